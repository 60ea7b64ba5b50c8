use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

const FIXTURE: [&str; 3] = ["a b", "a b", "b a"];

fn bigram() -> KnModel {
    train_kn(&FIXTURE, 2, SubwordSegmenter::WhitespaceLowercase).unwrap()
}

fn p(m: &KnModel, ctx: &[&str], w: &str) -> f64 {
    let ctx: Vec<u32> = ctx.iter().map(|u| m.id(u)).collect();
    m.prob(&ctx, m.id(w))
}

/// Interpolated KN for the three-line fixture, worked by hand.
///
/// Bigram counts with markers: <s>a 2, <s>b 1, ab 2, ba 1, b</s> 2, a</s> 1,
/// so n1 = 3, n2 = 3 and D2 = 1/3. Unigram continuation counts are a 2, b 2,
/// </s> 2 (total 6), so n1 = 0 and D1 = 0.
fn hand_table(ctx: &str, w: &str) -> f64 {
    let d = 1.0 / 3.0;
    let uni = |w: &str| match w {
        "a" | "b" | "</s>" => 2.0 / 6.0,
        _ => 0.0,
    };
    let counts: &[(&str, &str, f64)] = &[
        ("<s>", "a", 2.0),
        ("<s>", "b", 1.0),
        ("a", "b", 2.0),
        ("a", "</s>", 1.0),
        ("b", "a", 1.0),
        ("b", "</s>", 2.0),
    ];
    let row: Vec<_> = counts.iter().filter(|c| c.0 == ctx).collect();
    let total: f64 = row.iter().map(|c| c.2).sum();
    let types = row.len() as f64;
    let c = row.iter().find(|c| c.1 == w).map_or(0.0, |c| c.2);
    ((c - d).max(0.0) / total) + d * types / total * uni(w)
}

#[test]
fn discounts_match_count_of_counts() {
    let m = bigram();
    assert_eq!(m.discounts(), &[0.0, 1.0 / 3.0]);
    assert_eq!(discount(3, 3), 1.0 / 3.0);
    assert_eq!(discount(1, 0), 0.0);
}

#[test]
fn bigram_table_matches_hand_computation() {
    let m = bigram();
    assert!((p(&m, &["a"], "b") - 17.0 / 27.0).abs() < 1e-12);
    for ctx in ["<s>", "a", "b"] {
        for w in ["a", "b", "</s>", "<unk>"] {
            let want = hand_table(ctx, w);
            let got = p(&m, &[ctx], w);
            assert!((got - want).abs() < 1e-12, "P({w}|{ctx}) = {got}, expected {want}");
        }
    }
    assert!((p(&m, &[], "a") - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn scoring_a_line_uses_the_table_product() {
    let m = bigram();
    let product = hand_table("<s>", "a") * hand_table("a", "b") * hand_table("b", "</s>");
    let s = m.perplexity("a b", PerplexityMode::Document).unwrap();
    assert_eq!(s.token_count, 3);
    assert!((s.value - product.powf(-1.0 / 3.0)).abs() < 1e-9);
}

#[test]
fn single_token_unigram_is_certain() {
    let m = train_kn(&["x"], 1, SubwordSegmenter::WhitespaceLowercase).unwrap();
    assert_eq!(p(&m, &[], "x"), 1.0);
    let s = m.perplexity("x", PerplexityMode::Document).unwrap();
    assert_eq!(s.value, 1.0);
    assert_eq!(s.token_count, 1);
}

#[test]
fn bad_inputs_are_rejected() {
    let seg = SubwordSegmenter::WhitespaceLowercase;
    assert!(matches!(train_kn::<&str>(&[], 3, seg.clone()), Err(LmError::EmptyCorpus)));
    assert!(matches!(train_kn(&["\n \n"], 3, seg.clone()), Err(LmError::EmptyCorpus)));
    assert!(matches!(train_kn(&["a"], 0, seg.clone()), Err(LmError::Order(0))));
    assert!(matches!(train_kn(&["a"], 7, seg), Err(LmError::Order(7))));
    assert!(matches!(bigram().perplexity(" \n", PerplexityMode::Document), Err(LmError::EmptyText)));
}

const PROSE: &[&str] = &[
    "the cat sat on the mat and the dog sat on the rug",
    "a cat and a dog played in the garden all day",
    "the dog ran after the cat in the garden",
    "on the mat the cat slept while the dog barked",
    "le chat dort sur le tapis et le chien dort aussi",
];

fn check_normalized(m: &KnModel) {
    let vocab = m.predictable();
    let mut histories = vec![Vec::new()];
    for len in 1..m.order() {
        histories.extend(m.histories(len));
    }
    for h in histories {
        let total: f64 = vocab.iter().map(|&w| m.prob(&h, w)).sum();
        assert!((total - 1.0).abs() < 1e-6, "history {h:?} sums to {total}");
    }
}

#[test]
fn every_history_is_normalized() {
    for order in 1..=4 {
        check_normalized(&train_kn(PROSE, order, SubwordSegmenter::WhitespaceLowercase).unwrap());
    }
    check_normalized(&bigram());
}

#[test]
fn probabilities_are_positive_when_discounts_are() {
    let m = train_kn(PROSE, 3, SubwordSegmenter::WhitespaceLowercase).unwrap();
    assert!(m.discounts().iter().all(|&d| d > 0.0));
    for w in m.predictable() {
        assert!(m.prob(&[1, 5], w) > 0.0);
    }
}

#[test]
fn serialization_round_trips_and_is_deterministic() {
    let a = train_kn(PROSE, 3, SubwordSegmenter::WhitespaceLowercase).unwrap();
    let b = train_kn(PROSE, 3, SubwordSegmenter::WhitespaceLowercase).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let back = KnModel::from_text(&a.to_text(), None).unwrap();
    assert_eq!(back.to_text(), a.to_text());
    for line in PROSE {
        let x = a.perplexity(line, PerplexityMode::Document).unwrap();
        let y = back.perplexity(line, PerplexityMode::Document).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn parallel_counts_merge_to_the_same_model() {
    let many: Vec<String> = PROSE.iter().cycle().take(500).enumerate().map(|(i, s)| format!("{s} {}", i % 7)).collect();
    let a = train_kn(&many, 3, SubwordSegmenter::WhitespaceLowercase).unwrap();
    let mut counts = NgramCounts::new(3);
    for t in &many {
        counts.add_sequence(&SubwordSegmenter::WhitespaceLowercase.segment(t));
    }
    let b = KnModel::estimate(&counts, SubwordSegmenter::WhitespaceLowercase).unwrap();
    assert_eq!(a.to_text(), b.to_text());
}

#[test]
fn mean_of_lines_averages_line_perplexities() {
    let m = bigram();
    let one = m.perplexity("a b", PerplexityMode::Document).unwrap().value;
    let two = m.perplexity("b a", PerplexityMode::Document).unwrap().value;
    let mean = m.perplexity("a b\nb a", PerplexityMode::MeanOfLines).unwrap();
    assert!((mean.value - (one + two) / 2.0).abs() < 1e-12);
    assert_eq!(mean.mode, PerplexityMode::MeanOfLines);
}

#[test]
fn shuffled_text_scores_worse() {
    let tok = crate::tokenizer::train_bpe(PROSE, &crate::tokenizer::TrainConfig::new(512)).unwrap();
    let m = train_kn(PROSE, 5, SubwordSegmenter::Tokenizer(std::sync::Arc::new(tok))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let line = PROSE[trial % PROSE.len()];
        let mut chars: Vec<char> = line.chars().collect();
        loop {
            chars.shuffle(&mut rng);
            let s: String = chars.iter().collect();
            if s != line {
                break;
            }
        }
        let shuffled: String = chars.into_iter().collect();
        let a = m.perplexity(line, PerplexityMode::Document).unwrap().value;
        let b = m.perplexity(&shuffled, PerplexityMode::Document).unwrap().value;
        assert!(b > a, "trial {trial}: {b} <= {a}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn small_models_normalize(lines in prop::collection::vec("[abc]( [abc]){0,5}", 1..6), order in 1usize..4) {
        let m = train_kn(&lines, order, SubwordSegmenter::WhitespaceLowercase).unwrap();
        check_normalized(&m);
    }
}
