use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::corpus::Verdict;
use crate::filters::FILTER_STRINGS;
use crate::tokenizer::{train_bpe, TokenizerModel, TrainConfig};

pub(crate) const FIXTURE_BLOCK: &str = "<s><|start_header_id|>user<|end_header_id|>\n\nDonne trois conseils pour rester en bonne santé.\n\n<|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\n1. Mangez une alimentation équilibrée et assurez-vous d'inclure beaucoup de fruits \net légumes. \n2. Faites de l'exercice régulièrement pour maintenir votre corps actif et fort. \n3. Dormez suffisamment et maintenez un horaire de sommeil régulier.\n\n<|eot_id|>";

fn fixture() -> Conversation {
    Conversation::new(vec![
        Turn::new(Role::User, "Donne trois conseils pour rester en bonne santé."),
        Turn::new(
            Role::Assistant,
            "1. Mangez une alimentation équilibrée et assurez-vous d'inclure beaucoup de fruits \net légumes. \n2. Faites de l'exercice régulièrement pour maintenir votre corps actif et fort. \n3. Dormez suffisamment et maintenez un horaire de sommeil régulier.",
        ),
    ])
}

fn model() -> &'static TokenizerModel {
    static M: OnceLock<TokenizerModel> = OnceLock::new();
    M.get_or_init(|| {
        let text = render_chat(&fixture()).unwrap().replace("<", " ");
        train_bpe(vec![text; 4], &TrainConfig::new(600)).unwrap()
    })
}

#[test]
fn fixture_renders_byte_exact() {
    assert_eq!(render_chat(&fixture()).unwrap(), FIXTURE_BLOCK);
}

#[test]
fn parse_inverts_render() {
    assert_eq!(parse_chat(FIXTURE_BLOCK).unwrap().turns, fixture().turns);
}

#[test]
fn empty_assistant_content_renders() {
    let c = Conversation::new(vec![Turn::new(Role::User, "hi"), Turn::new(Role::Assistant, "")]);
    let r = render_chat(&c).unwrap();
    assert!(r.ends_with("assistant<|end_header_id|>\n\n\n\n<|eot_id|>"));
    assert_eq!(parse_chat(&r).unwrap().turns, c.turns);
}

#[test]
fn unknown_role_and_literals_rejected() {
    let bad = FIXTURE_BLOCK.replacen(">user<", ">tool<", 1);
    assert!(matches!(parse_chat(&bad), Err(SftError::UnknownRole(_))));
    let c = Conversation::new(vec![Turn::new(Role::User, "say <|eot_id|> now")]);
    assert!(matches!(render_chat(&c), Err(SftError::SpecialLiteral { turn: 0, .. })));
    assert!(matches!(render_chat(&Conversation::default()), Err(SftError::EmptyConversation)));
}

#[test]
fn encoding_decodes_to_rendered_text() {
    let m = model();
    let enc = encode_chat(m, &fixture(), MaskOptions::default()).unwrap();
    assert_eq!(m.decode(&enc.ids).unwrap(), FIXTURE_BLOCK);
}

#[test]
fn mask_covers_assistant_content_and_eot() {
    let m = model();
    let conv = fixture();
    let enc = encode_chat(m, &conv, MaskOptions::default()).unwrap();
    let content = m.encode_fragment(&conv.turns[1].content, crate::tokenizer::Boundary::After('\n'));
    let ones: usize = enc.mask.iter().map(|&b| b as usize).sum();
    assert_eq!(ones, content.len() + 1);
    // The masked run is contiguous up to the separator, then the final eot.
    let first = enc.mask.iter().position(|&b| b == 1).unwrap();
    assert_eq!(&enc.ids[first..first + content.len()], &content[..]);
    assert_eq!(*enc.mask.last().unwrap(), 1);
    assert_eq!(*enc.ids.last().unwrap(), m.special_id(EOT).unwrap());
    let no_eot = encode_chat(m, &conv, MaskOptions { include_eot: false }).unwrap();
    assert_eq!(no_eot.mask.iter().filter(|&&b| b == 1).count(), content.len());
}

#[test]
fn no_assistant_turn_is_flagged() {
    let c = Conversation::new(vec![Turn::new(Role::User, "bonjour")]);
    let ex = prepare_example(model(), &c, MaskOptions::default(), SEQUENCE_LENGTH).unwrap();
    assert!(ex.no_trainable_tokens);
    assert!(ex.loss_mask.iter().all(|&b| b == 0));
}

#[test]
fn pad_truncate_examples() {
    let ex = pad_truncate(vec![7; 10], vec![1; 10], 4096, 0).unwrap();
    assert_eq!(ex.ids.len(), 4096);
    assert_eq!(ex.ids.iter().filter(|&&i| i == 0).count(), 4086);
    assert_eq!(ex.loss_mask.iter().map(|&b| b as usize).sum::<usize>(), 10);
    assert!(!ex.truncated);
    let long = pad_truncate(vec![7; 5000], vec![1; 5000], 4096, 0).unwrap();
    assert_eq!(long.ids.len(), 4096);
    assert!(long.truncated);
    let exact = pad_truncate((0..4096).collect(), vec![0; 4096], 4096, 0).unwrap();
    assert_eq!(exact.ids, (0..4096).collect::<Vec<u32>>());
    assert!(!exact.truncated);
    assert!(matches!(pad_truncate(vec![1], vec![], 8, 0), Err(SftError::SpanMismatch { .. })));
}

#[test]
fn truncation_inside_assistant_turn() {
    let m = model();
    let conv = fixture();
    let enc = encode_chat(m, &conv, MaskOptions::default()).unwrap();
    let first = enc.mask.iter().position(|&b| b == 1).unwrap();
    let cut = first + 5;
    let ex = prepare_example(m, &conv, MaskOptions::default(), cut).unwrap();
    assert!(ex.truncated);
    assert_eq!(ex.loss_mask.iter().filter(|&&b| b == 1).count(), 5);
    assert_eq!(*ex.loss_mask.last().unwrap(), 1);
}

#[test]
fn language_and_keyword_filtering() {
    let mut c = fixture();
    assert!(matches!(sft_filter(&c, true), Err(SftError::MissingLanguage { .. })));
    c.language = Some("pt".into());
    let d = sft_filter(&c, true).unwrap();
    assert_eq!((d.verdict, d.rule_id.as_str()), (Verdict::Drop, rules::LANGUAGE));
    c.language = Some("en".into());
    assert!(sft_filter(&c, true).unwrap().is_keep());
    c.language = Some("fr".into());
    c.turns[1].content.push_str(" Je suis Claude.");
    let d = sft_filter(&c, true).unwrap();
    assert_eq!((d.verdict, d.rule_id.as_str()), (Verdict::Drop, rules::KEYWORD));
}

#[test]
fn keyword_only_in_user_turn_is_kept() {
    for k in FILTER_STRINGS {
        let mut c = fixture();
        c.language = Some("en".into());
        c.turns[0].content = format!("Tell me about {k}.");
        assert!(sft_filter(&c, true).unwrap().is_keep(), "{k}");
        c.turns[1].content = format!("Sure, {k} is a name.");
        assert!(sft_filter(&c, true).unwrap().is_drop(), "{k}");
    }
}

fn content() -> impl Strategy<Value = String> {
    "(\\PC|\n){0,40}".prop_filter("no reserved literal", |s| {
        !RESERVED_LITERALS.iter().any(|l| s.contains(l))
    })
}

fn conversation() -> impl Strategy<Value = Conversation> {
    let role = prop_oneof![Just(Role::System), Just(Role::User), Just(Role::Assistant)];
    prop::collection::vec((role, content()), 1..6)
        .prop_map(|ts| Conversation::new(ts.into_iter().map(|(r, c)| Turn::new(r, c)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn parse_render_identity(c in conversation()) {
        let r = render_chat(&c).unwrap();
        prop_assert_eq!(parse_chat(&r).unwrap().turns, c.turns);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn examples_are_fixed_length(c in conversation()) {
        let m = model();
        let ex = prepare_example(m, &c, MaskOptions::default(), SEQUENCE_LENGTH).unwrap();
        prop_assert_eq!(ex.ids.len(), SEQUENCE_LENGTH);
        prop_assert_eq!(ex.loss_mask.len(), SEQUENCE_LENGTH);
        let pad = m.special_id(crate::tokenizer::PAD).unwrap();
        for (i, &b) in ex.loss_mask.iter().enumerate() {
            if i >= ex.original_length { prop_assert_eq!(b, 0); prop_assert_eq!(ex.ids[i], pad); }
        }
        let has_assistant = c.turns.iter().any(|t| t.role == Role::Assistant);
        prop_assert_eq!(ex.no_trainable_tokens, !has_assistant);
    }
}
