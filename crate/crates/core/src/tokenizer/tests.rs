use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;

const SAMPLE: &[&str] = &[
    "Le chat dort sur le canapé. Le chien aboie dans le jardin.",
    "The cat sleeps on the sofa.\nThe dog barks in the garden (loudly).",
    "Il y avait 1234 personnes « très » heureuses en 2023.",
    "fn main() {\n    println!(\"hello\");\n}\n",
    "Der Hund bellt im Garten, die Katze schläft auf dem Sofa.",
    "El perro ladra en el jardín; el gato duerme en el sofá.",
    "Il cane abbaia nel giardino e il gatto dorme sul divano.",
];

fn trained() -> TokenizerModel {
    static MODEL: OnceLock<TokenizerModel> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let texts: Vec<&str> = SAMPLE.iter().cycle().take(SAMPLE.len() * 5).copied().collect();
            train_bpe(texts, &TrainConfig::new(1024)).unwrap()
        })
        .clone()
}

#[test]
fn digits_never_merge() {
    let m = trained();
    let ids = m.encode("1234");
    let toks: Vec<_> = ids.iter().map(|&i| m.token(i).unwrap()).collect();
    assert_eq!(toks, vec!["1", "2", "3", "4"]);
    assert_eq!(m.encode("123456").len(), 6);
    assert_eq!(m.encode("        ").len(), 1);
    assert_eq!(m.encode("\t\t\t\t").len(), 1);
}

#[test]
fn class_constraints_hold_on_digit_heavy_corpus() {
    let m = train_bpe(["a1a1a1"; 10], &TrainConfig::new(1024)).unwrap();
    assert!(m.vocab().iter().all(|t| !(t.contains('a') && t.contains('1'))));
}

#[test]
fn first_merge_matches_brute_force_count() {
    let text = "aaabdaaabac";
    let chars: Vec<char> = text.chars().collect();
    let mut counts = std::collections::BTreeMap::new();
    for w in chars.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0) += 1;
    }
    let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap().0;
    let m = train_bpe([text], &TrainConfig::unconstrained(512)).unwrap();
    let (a, b) = m.merges()[0];
    let got = format!("{}{}", m.token(a).unwrap(), m.token(b).unwrap());
    assert_eq!(got, format!("{}{}", best.0, best.1));
    assert_eq!(got, "aa");
}

#[test]
fn retraining_is_deterministic() {
    let a = trained();
    let b = train_bpe(SAMPLE.iter().cycle().take(SAMPLE.len() * 5), &TrainConfig::new(1024)).unwrap();
    assert_eq!(a.vocab(), b.vocab());
    assert_eq!(a.merges(), b.merges());
}

#[test]
fn published_sample_round_trips() {
    let m = trained();
    let r = crate::corpus::fixtures::american_stories();
    for s in [&r.text, r.title.as_ref().unwrap()] {
        assert_eq!(&m.decode(&m.encode(s)).unwrap(), s);
    }
}

#[test]
fn emoji_falls_back_to_bytes() {
    let m = trained();
    let ids = m.encode("🦜");
    assert_eq!(ids.len(), 4);
    assert!(ids.iter().all(|&i| m.is_byte(i)));
}

#[test]
fn trained_vocabulary_passes_audit() {
    let m = trained();
    assert!(audit_vocabulary(&m).is_clean());
    assert!(m.merges().len() > 20);
}

#[test]
fn special_ids_follow_the_declared_order() {
    let m = trained();
    for (i, s) in DEFAULT_SPECIAL_TOKENS.iter().enumerate() {
        assert_eq!(m.special_id(s), Some(i as TokenId));
    }
    assert_eq!(m.token(6), Some("<0x00>"));
}

#[test]
fn unseen_characters_fall_back_to_bytes() {
    let m = trained();
    let ids = m.encode("日本");
    assert!(ids.iter().skip(1).all(|&i| m.is_byte(i)));
    assert_eq!(m.decode(&ids).unwrap(), "日本");
}

#[test]
fn truncated_utf8_decodes_with_replacement() {
    let m = trained();
    let ids = m.encode("日");
    let cut = &ids[..ids.len() - 1];
    assert!(m.decode(cut).unwrap().contains('\u{fffd}'));
    assert!(matches!(m.decode(&[u32::MAX]), Err(TokenizerError::UnknownId(_))));
}

#[test]
fn specials_are_recognised_only_when_asked() {
    let m = trained();
    let text = "<s>bonjour<|eot_id|>";
    let with = m.encode_with_specials(text);
    assert_eq!(with[0], m.special_id("<s>").unwrap());
    assert_eq!(*with.last().unwrap(), m.special_id("<|eot_id|>").unwrap());
    assert_eq!(m.decode(&with).unwrap(), text);
    let plain = m.encode(text);
    assert!(plain.iter().all(|&i| !m.is_special(i)));
    assert_eq!(m.decode(&plain).unwrap(), text);
}

#[test]
fn ensure_special_tokens_appends_missing() {
    let mut m = trained();
    let n = m.vocab_size();
    m.ensure_special_tokens(&["<s>", "<|tool|>"]).unwrap();
    assert_eq!(m.vocab_size(), n + 1);
    assert_eq!(m.special_id("<|tool|>"), Some(n as TokenId));
}

#[test]
fn save_and_load_round_trip() {
    let m = trained();
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let back = TokenizerModel::load(dir.path()).unwrap();
    assert_eq!(back.vocab(), m.vocab());
    assert_eq!(back.merges(), m.merges());
    for s in SAMPLE {
        assert_eq!(back.encode(s), m.encode(s));
    }
}

#[test]
fn corrupted_model_is_rejected() {
    let m = trained();
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let vocab = std::fs::read_to_string(dir.path().join("vocab.txt")).unwrap();
    let broken = vocab.replacen("\"<0x41>\"", "\"<0x4>\"", 1);
    std::fs::write(dir.path().join("vocab.txt"), broken).unwrap();
    assert!(TokenizerModel::load(dir.path()).is_err());
}

#[test]
fn model_with_mixed_token_is_rejected() {
    let m = trained();
    let mut vocab = m.vocab().to_vec();
    vocab.push("a1".into());
    let r = TokenizerModel::from_parts(
        vocab,
        m.merges().to_vec(),
        &DEFAULT_SPECIAL_TOKENS.map(String::from),
        6,
        NormalizationRules::default(),
        SegmentationMode::Constrained,
    );
    assert!(r.is_err());
}

#[test]
fn unconstrained_mode_merges_across_classes() {
    let texts = ["ab1 ab1 ab1 ab1"; 4];
    let m = train_bpe(texts, &TrainConfig::unconstrained(512)).unwrap();
    assert!(m.vocab().iter().any(|t| t.contains('b') && t.contains('1')));
}

#[test]
fn fertility_counts_tokens_per_word() {
    let m = trained();
    let f = fertility(&m, ["le chat", "the dog"]).unwrap();
    assert_eq!(f.words, 4);
    assert!(f.value() >= 1.0);
    assert!(fertility(&m, ["   "]).is_err());
    let letters = ["a b c a b", "c a b"];
    let single = train_bpe(letters, &TrainConfig::unconstrained(512)).unwrap();
    assert_eq!(fertility(&single, ["a b c"]).unwrap().value(), 1.0);
}

fn text_strategy() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "le", " chat", "The", "1", "42", " ", "   ", "\t", "\n", "\n\n\n", "\r", "\0", "(", "[",
        "«", "»", "’", "—", ".", ",", "é", "e\u{301}", "日", "😀", "<s>", "<|eot_id|>",
    ]);
    prop::collection::vec(prop_oneof![pieces.prop_map(String::from), "\\PC{0,3}"], 0..16)
        .prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn decode_inverts_encode_on_clean_text(s in text_strategy()) {
        let m = trained();
        let c = clean(&s, m.rules());
        prop_assert_eq!(m.decode(&m.encode(&s)).unwrap(), c.clone());
        prop_assert_eq!(m.decode(&m.encode_with_specials(&s)).unwrap(), c);
    }

    #[test]
    fn encoding_splits_after_a_newline(a in text_strategy(), b in "[a-zA-Z0-9][a-z ]{0,8}") {
        let m = trained();
        let a = format!("{}\n", clean(&a, m.rules()));
        let whole = m.encode(&format!("{a}{b}"));
        let mut parts = m.encode(&a);
        parts.extend(m.encode_fragment(&b, Boundary::After('\n')));
        prop_assert_eq!(whole, parts);
    }
}
