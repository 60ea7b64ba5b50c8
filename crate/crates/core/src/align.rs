//! Parallel-text preparation: splitting bilingual passages and rendering
//! translation pairs with varied prefixes and separators.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::corpus::{DocumentRecord, IsoCode, SourceId};
use crate::langid::LanguageIdentifier;

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("no_transition: no confident language change found ({})", fmt_candidates(.candidates))]
    NoTransition { candidates: Vec<SplitCandidate> },
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("unknown template id {0}")]
    UnknownTemplate(usize),
    #[error("rendered text does not match the template")]
    NotRendered,
}

fn fmt_candidates(c: &[SplitCandidate]) -> String {
    if c.is_empty() {
        return "no split points".into();
    }
    c.iter()
        .map(|s| format!("@{} {}|{} {:.3}", s.offset, s.left.as_str(), s.right.as_str(), s.score))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Two passages that translate each other, in text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub text_1: String,
    pub lang_1: IsoCode,
    pub text_2: String,
    pub lang_2: IsoCode,
}

impl AlignedPair {
    pub fn new(text_1: impl Into<String>, lang_1: IsoCode, text_2: impl Into<String>, lang_2: IsoCode) -> Result<Self, AlignError> {
        let p = AlignedPair { text_1: text_1.into(), lang_1, text_2: text_2.into(), lang_2 };
        if p.lang_1 == p.lang_2 {
            return Err(AlignError::InvalidPair(format!("both sides are {}", p.lang_1.as_str())));
        }
        if p.text_1.trim().is_empty() || p.text_2.trim().is_empty() {
            return Err(AlignError::InvalidPair("empty passage".into()));
        }
        Ok(p)
    }

    /// Comma pair tag in text order, e.g. `fr,en`.
    pub fn language_tag(&self) -> String {
        format!("{},{}", self.lang_1.as_str(), self.lang_2.as_str())
    }
}

/// Passage-level language scorer.
pub trait PassageClassifier {
    /// Best language and a confidence margin (larger is surer).
    fn classify(&self, text: &str) -> Option<(IsoCode, f64)>;
}

impl PassageClassifier for LanguageIdentifier {
    fn classify(&self, text: &str) -> Option<(IsoCode, f64)> {
        self.identify(text).map(|g| (g.language, g.margin))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    /// Byte offset where the second passage starts.
    pub offset: usize,
    pub left: IsoCode,
    pub right: IsoCode,
    /// Smaller of the two side margins; zero when both sides agree.
    pub score: f64,
}

/// Minimum side margin for a split to count as confident.
pub const MIN_SPLIT_MARGIN: f64 = 0.05;

fn split_points(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev: Option<char> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() && (prev.is_some_and(|p| matches!(p, '.' | '!' | '?' | '"' | '\u{bb}')) || c == '\n') {
            let start = i + text[i..].len() - text[i..].trim_start().len();
            if start < text.len() && !out.contains(&start) {
                out.push(start);
            }
        }
        prev = Some(c);
    }
    out
}

/// Splits a text made of one passage followed by its translation at the
/// point where the two sides are most confidently in different languages.
pub fn split_bilingual(text: &str, classifier: &dyn PassageClassifier) -> Result<AlignedPair, AlignError> {
    let mut candidates = Vec::new();
    for offset in split_points(text) {
        let (l, r) = (text[..offset].trim(), text[offset..].trim());
        let (Some((ll, lm)), Some((rl, rm))) = (classifier.classify(l), classifier.classify(r)) else { continue };
        let score = if ll == rl { 0.0 } else { lm.min(rm) };
        candidates.push(SplitCandidate { offset, left: ll, right: rl, score });
    }
    let best = candidates
        .iter()
        .filter(|c| c.left != c.right && c.score >= MIN_SPLIT_MARGIN)
        .max_by(|a, b| a.score.total_cmp(&b.score).then(b.offset.cmp(&a.offset)));
    match best {
        Some(c) => AlignedPair::new(text[..c.offset].trim(), c.left, text[c.offset..].trim(), c.right),
        None => Err(AlignError::NoTransition { candidates }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixStyle {
    /// `French: ...`
    LanguageName,
    /// `[fr] ...`
    IsoCodeBracket,
    None,
}

pub const SEPARATORS: [&str; 4] = ["\n", "\n\n", "\n###\n", "\t"];
const STYLES: [PrefixStyle; 3] = [PrefixStyle::LanguageName, PrefixStyle::IsoCodeBracket, PrefixStyle::None];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTemplate {
    pub id: usize,
    pub prefix_style: PrefixStyle,
    pub separator: &'static str,
}

impl fmt::Display for PairTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {:?} {:?}", self.id, self.prefix_style, self.separator)
    }
}

/// The registered template pool, version 1: every prefix style crossed with
/// every separator.
pub fn templates() -> Vec<PairTemplate> {
    STYLES
        .iter()
        .flat_map(|&prefix_style| SEPARATORS.iter().map(move |&separator| (prefix_style, separator)))
        .enumerate()
        .map(|(id, (prefix_style, separator))| PairTemplate { id, prefix_style, separator })
        .collect()
}

pub fn template(id: usize) -> Result<PairTemplate, AlignError> {
    templates().get(id).copied().ok_or(AlignError::UnknownTemplate(id))
}

/// Template drawn uniformly from the pool by `seed`.
pub fn choose_template(seed: u64) -> PairTemplate {
    let pool = templates();
    pool[ChaCha8Rng::seed_from_u64(seed).gen_range(0..pool.len())]
}

fn prefix(style: PrefixStyle, lang: IsoCode) -> String {
    match style {
        PrefixStyle::LanguageName => format!("{}: ", lang.english_name()),
        PrefixStyle::IsoCodeBracket => format!("[{}] ", lang.as_str()),
        PrefixStyle::None => String::new(),
    }
}

/// Renders the pair with the given template, or with one chosen by `seed`.
pub fn render_pair(pair: &AlignedPair, template_id: Option<usize>, seed: u64) -> Result<String, AlignError> {
    let t = match template_id {
        Some(id) => template(id)?,
        None => choose_template(seed),
    };
    Ok(render_with(pair, &t))
}

pub fn render_with(pair: &AlignedPair, t: &PairTemplate) -> String {
    format!(
        "{}{}{}{}{}",
        prefix(t.prefix_style, pair.lang_1),
        pair.text_1,
        t.separator,
        prefix(t.prefix_style, pair.lang_2),
        pair.text_2
    )
}

/// Recovers both passages from a rendering. Exact when the first passage
/// does not itself contain the separator followed by the second prefix.
pub fn unrender(rendered: &str, t: &PairTemplate, lang_1: IsoCode, lang_2: IsoCode) -> Result<(String, String), AlignError> {
    let body = rendered.strip_prefix(&prefix(t.prefix_style, lang_1)).ok_or(AlignError::NotRendered)?;
    let mid = format!("{}{}", t.separator, prefix(t.prefix_style, lang_2));
    let (a, b) = body.split_once(&mid).ok_or(AlignError::NotRendered)?;
    Ok((a.to_string(), b.to_string()))
}

/// Obtains the pair behind a record: pre-tagged `text_1/text_2` or
/// `text_fr/text_en` fields pass through, anything else is split.
pub fn pair_from_record(doc: &DocumentRecord, classifier: &dyn PassageClassifier) -> Result<AlignedPair, AlignError> {
    let extra = doc.extra_map().ok().flatten().unwrap_or_default();
    let s = |k: &str| extra.get(k).and_then(Value::as_str).map(str::to_string);
    let lang = |k: &str| s(k).and_then(|v| v.parse::<IsoCode>().ok());
    if let (Some(t1), Some(t2), Some(l1), Some(l2)) = (s("text_1"), s("text_2"), lang("lang_1"), lang("lang_2")) {
        return AlignedPair::new(t1, l1, t2, l2);
    }
    if let (Some(fr), Some(en)) = (s("text_fr"), s("text_en")) {
        return if doc.language.starts_with("en") {
            AlignedPair::new(en, IsoCode::En, fr, IsoCode::Fr)
        } else {
            AlignedPair::new(fr, IsoCode::Fr, en, IsoCode::En)
        };
    }
    split_bilingual(&doc.text, classifier)
}

/// Output record: rendered text, comma language pair, and the per-corpus
/// `extra` convention (`text_fr/text_en` for the French-English aligned
/// corpus, `text_1/text_2/lang_1/lang_2` otherwise).
pub fn aligned_record(
    pair: &AlignedPair,
    source: SourceId,
    id: &str,
    template_id: Option<usize>,
    seed: u64,
) -> Result<DocumentRecord, AlignError> {
    let text = render_pair(pair, template_id, seed)?;
    let mut doc = DocumentRecord::new(text, pair.language_tag(), source.as_str(), id);
    let mut extra = Map::new();
    let fr_en = [pair.lang_1, pair.lang_2].contains(&IsoCode::Fr) && [pair.lang_1, pair.lang_2].contains(&IsoCode::En);
    if source == SourceId::CroissantAligned && fr_en {
        let (fr, en) = if pair.lang_1 == IsoCode::Fr { (&pair.text_1, &pair.text_2) } else { (&pair.text_2, &pair.text_1) };
        extra.insert("text_fr".into(), Value::String(fr.clone()));
        extra.insert("text_en".into(), Value::String(en.clone()));
    } else {
        extra.insert("text_1".into(), Value::String(pair.text_1.clone()));
        extra.insert("text_2".into(), Value::String(pair.text_2.clone()));
        extra.insert("lang_1".into(), Value::String(pair.lang_1.as_str().into()));
        extra.insert("lang_2".into(), Value::String(pair.lang_2.as_str().into()));
    }
    doc.set_extra(&extra);
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id() -> &'static LanguageIdentifier {
        LanguageIdentifier::bundled()
    }

    #[test]
    fn splits_the_example() {
        let p = split_bilingual("Bonjour le monde. Hello world.", id()).unwrap();
        assert_eq!(p, AlignedPair::new("Bonjour le monde.", IsoCode::Fr, "Hello world.", IsoCode::En).unwrap());
    }

    #[test]
    fn split_matches_brute_force_oracle() {
        let text = "Le conseil a adopté le budget pour l'année prochaine. Les députés ont voté tard dans la nuit. \
                    The council adopted the budget for next year. The members voted late at night.";
        let p = split_bilingual(text, id()).unwrap();
        // Oracle: score every sentence boundary directly and take the best.
        let mut best = (f64::MIN, 0);
        for (i, _) in text.match_indices(". ") {
            let off = i + 2;
            let l = id().identify(&text[..off]).unwrap();
            let r = id().identify(&text[off..]).unwrap();
            if l.language != r.language && l.margin.min(r.margin) > best.0 {
                best = (l.margin.min(r.margin), off);
            }
        }
        assert_eq!(p.text_2, text[best.1..].trim());
        assert_eq!((p.lang_1, p.lang_2), (IsoCode::Fr, IsoCode::En));
    }

    #[test]
    fn monolingual_input_has_no_transition() {
        let e = split_bilingual("The cat sleeps. The dog barks loudly. Birds sing.", id()).unwrap_err();
        assert!(matches!(e, AlignError::NoTransition { .. }));
        assert!(e.to_string().starts_with("no_transition"));
        assert!(matches!(split_bilingual("no boundary here", id()), Err(AlignError::NoTransition { .. })));
    }

    #[test]
    fn pre_tagged_records_pass_through() {
        let mut d = DocumentRecord::new("ignored", "de,en", "EuroparlAligned", "e1");
        d.extra = Some(r#"{"text_1":"Guten Tag.","text_2":"Good day.","lang_1":"de","lang_2":"en"}"#.into());
        let p = pair_from_record(&d, id()).unwrap();
        assert_eq!(p, AlignedPair::new("Guten Tag.", IsoCode::De, "Good day.", IsoCode::En).unwrap());
        let out = aligned_record(&p, SourceId::EuroparlAligned, "e1", Some(4), 0).unwrap();
        assert_eq!(out.text, "[de] Guten Tag.\n[en] Good day.");
        assert_eq!(out.language, "de,en");
        assert_eq!(out.extra_value("lang_1").unwrap(), "de");
    }

    #[test]
    fn croissant_records_use_fr_en_fields() {
        let p = AlignedPair::new("Hello.", IsoCode::En, "Bonjour.", IsoCode::Fr).unwrap();
        let out = aligned_record(&p, SourceId::CroissantAligned, "c", Some(8), 0).unwrap();
        assert_eq!(out.language, "en,fr");
        assert_eq!(out.text, "Hello.\nBonjour.");
        assert_eq!(out.extra_value("text_fr").unwrap(), "Bonjour.");
        assert_eq!(out.extra_value("text_en").unwrap(), "Hello.");
    }

    #[test]
    fn template_pool() {
        let pool = templates();
        assert_eq!(pool.len(), 12);
        let p = AlignedPair::new("Bonjour.", IsoCode::Fr, "Hello.", IsoCode::En).unwrap();
        let bracket = pool.iter().find(|t| t.prefix_style == PrefixStyle::IsoCodeBracket && t.separator == "\n\n").unwrap();
        assert_eq!(render_with(&p, bracket), "[fr] Bonjour.\n\n[en] Hello.");
        assert_eq!(render_pair(&p, Some(0), 0).unwrap(), "French: Bonjour.\nEnglish: Hello.");
        let outs: std::collections::HashSet<String> = pool.iter().map(|t| render_with(&p, t)).collect();
        assert_eq!(outs.len(), 12);
        assert!(matches!(render_pair(&p, Some(12), 0), Err(AlignError::UnknownTemplate(12))));
        assert_eq!(render_pair(&p, None, 99).unwrap(), render_pair(&p, None, 99).unwrap());
    }

    #[test]
    fn template_choice_is_uniform() {
        let n = 12_000;
        let mut counts = [0usize; 12];
        for seed in 0..n {
            counts[choose_template(seed).id] += 1;
        }
        let expected = n as f64 / 12.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 11 degrees of freedom, p = 0.001.
        assert!(chi2 < 31.26, "chi2 = {chi2}, counts = {counts:?}");
    }

    proptest! {
        #[test]
        fn rendering_is_invertible_and_ordered(a in "[A-Za-zéà ,.]{1,40}", b in "[A-Za-zéà ,.]{1,40}", t in 0usize..12) {
            prop_assume!(!a.trim().is_empty() && !b.trim().is_empty());
            let p = AlignedPair::new(a.clone(), IsoCode::Fr, b.clone(), IsoCode::En).unwrap();
            let tpl = template(t).unwrap();
            let r = render_with(&p, &tpl);
            prop_assert!(r.find(&a).unwrap() < r.len() - b.len() + 1);
            let (x, y) = unrender(&r, &tpl, IsoCode::Fr, IsoCode::En).unwrap();
            prop_assert_eq!(x, a);
            prop_assert_eq!(y, b);
        }
    }
}
