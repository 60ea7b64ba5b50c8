use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::rules;
use crate::corpus::{DocumentRecord, FilterDecision, IsoCode, LanguageTag, SourceId};
use crate::langid::LanguageIdentifier;

/// Year against which author death dates are compared.
pub const DEFAULT_REFERENCE_YEAR: i32 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CleanContext {
    pub reference_year: i32,
    /// Years since death required for non-French authors.
    pub public_domain_years: i32,
    /// Years since death required for French authors.
    pub public_domain_years_fr: i32,
}

impl Default for CleanContext {
    fn default() -> Self {
        CleanContext { reference_year: DEFAULT_REFERENCE_YEAR, public_domain_years: 70, public_domain_years_fr: 80 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cleaned {
    Kept(DocumentRecord),
    Dropped(FilterDecision),
}

impl Cleaned {
    pub fn kept(self) -> Option<DocumentRecord> {
        match self {
            Cleaned::Kept(d) => Some(d),
            Cleaned::Dropped(_) => None,
        }
    }
}

macro_rules! re {
    ($name:ident, $pat:expr) => {
        fn $name() -> &'static Regex {
            static RE: OnceLock<Regex> = OnceLock::new();
            RE.get_or_init(|| Regex::new($pat).unwrap())
        }
    };
}

re!(cid_re, r"\(cid:\d+\)");
re!(url_line_re, r"(?im)^[ \t]*(?:source[ \t]*:?[ \t]*)?(?:https?://|www\.)\S+[ \t]*$");
re!(views_line_re, r"(?im)^[ \t]*(?:(?:nombre de )?vues[ \t]*:?[ \t]*[\d \u{a0}.,]+|[\d \u{a0}.,]+[ \t]*(?:vues|views))[ \t]*$");
re!(bracket_re, r"\[[^\]\n]*\]");
re!(credit_re, r"(?i)^(?:subtitled by|subtitles by|sous-titr(?:é|e|es|és|age|ages)(?: réalisés| realises)? par)\b");

/// Collapses horizontal whitespace, trims every line and drops blank lines
/// at both ends.
fn normalize_ws(text: &str) -> String {
    let lines: Vec<String> = text
        .lines()
        .map(|l| l.split([' ', '\t']).filter(|p| !p.is_empty()).collect::<Vec<_>>().join(" "))
        .collect();
    lines.join("\n").trim_matches('\n').to_string()
}

fn drop_blank_lines(text: &str) -> String {
    text.lines().filter(|l| !l.trim().is_empty()).collect::<Vec<_>>().join("\n")
}

/// Question body followed by the answer bodies joined with blank lines,
/// concatenated exactly as the conversion code does.
pub fn stackexchange_text(sample: &Value) -> Option<String> {
    let question = sample.get("question")?.get("Body")?.as_str()?;
    let answers: Vec<&str> = sample
        .get("answers")?
        .as_array()?
        .iter()
        .filter_map(|a| a.get("Body").and_then(Value::as_str))
        .collect();
    Some(format!("{question}{}", answers.join("\n\n")))
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0xFE0F | 0x200D | 0xE0020..=0xE007F)
}

fn youtube(text: &str) -> String {
    let no_emoji: String = text.chars().filter(|c| !is_emoji(*c)).collect();
    let no_brackets = bracket_re().replace_all(&no_emoji, "");
    let mut lines: Vec<String> = normalize_ws(&no_brackets).lines().map(str::to_string).collect();
    while lines.last().is_some_and(|l| l.trim().is_empty() || credit_re().is_match(l.trim())) {
        lines.pop();
    }
    drop_blank_lines(&lines.join("\n"))
}

fn gutenberg_body(text: &str) -> String {
    let upper = text.to_uppercase();
    let start = ["*** START OF THE PROJECT GUTENBERG", "*** START OF THIS PROJECT GUTENBERG", "*END*THE SMALL PRINT"]
        .iter()
        .filter_map(|m| upper.find(m))
        .min();
    let mut body = text;
    if let Some(s) = start {
        // Skip to the end of the marker line.
        body = text[s..].split_once('\n').map_or("", |(_, rest)| rest);
    }
    let upper_body = body.to_uppercase();
    let end = ["*** END OF THE PROJECT GUTENBERG", "*** END OF THIS PROJECT GUTENBERG", "END OF THE PROJECT GUTENBERG EBOOK", "END OF PROJECT GUTENBERG"]
        .iter()
        .filter_map(|m| upper_body.find(m))
        .min();
    if let Some(e) = end {
        body = &body[..e];
    }
    body.trim_matches(|c: char| c.is_whitespace()).to_string()
}

fn death_year(doc: &DocumentRecord) -> Option<i32> {
    let v = doc.extra_value("author_death_year").or_else(|| doc.extra_value("death_year"))?;
    v.as_i64().map(|y| y as i32).or_else(|| v.as_str()?.trim().parse().ok())
}

fn is_hal_title_page(page: &str) -> bool {
    let lower = page.to_lowercase();
    lower.contains("hal id") || lower.contains("theses.hal.science") || lower.contains("hal.archives-ouvertes")
        || (lower.contains("hal") && lower.contains("archive ouverte"))
}

fn control_fraction(page: &str) -> f64 {
    let total = page.chars().count().max(1);
    let ctrl = page.chars().filter(|c| c.is_control() && !matches!(c, '\n' | '\t' | '\r')).count();
    ctrl as f64 / total as f64
}

const MAX_CONTROL_FRACTION: f64 = 0.05;

fn theses(text: &str) -> String {
    let pages: Vec<&str> = text
        .split('\u{c}')
        .filter(|p| !is_hal_title_page(p) && control_fraction(p) <= MAX_CONTROL_FRACTION)
        .collect();
    let mut seen = HashSet::new();
    pages
        .join("\n")
        .lines()
        .filter(|l| l.trim().is_empty() || seen.insert(l.trim().to_string()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn target_language(text: &str) -> bool {
    LanguageIdentifier::bundled().identify(text).is_some_and(|g| g.is_known())
}

fn pile_drop(doc: &DocumentRecord) -> Option<FilterDecision> {
    let set = doc.extra_value("pile_set_name")?;
    match set.as_str()? {
        "PhilPapers" => (!target_language(&doc.text))
            .then(|| FilterDecision::drop(rules::PILE_LANGUAGE, "paper not in a target language")),
        "Ubuntu IRC" => {
            let id = LanguageIdentifier::bundled();
            let (mut inside, mut outside) = (0usize, 0usize);
            for line in doc.text.lines() {
                let words = line.split_whitespace().count();
                if words < 4 {
                    continue;
                }
                match id.identify(line) {
                    Some(g) if g.is_known() => inside += words,
                    _ => outside += words,
                }
            }
            (outside > inside).then(|| {
                FilterDecision::drop(rules::PILE_LANGUAGE, "channel predominantly outside the target languages")
                    .with("target_words", inside as f64)
                    .with("other_words", outside as f64)
            })
        }
        _ => None,
    }
}

/// Applies the cleanup bundle of the document's source. Documents of
/// unknown or rule-less sources are returned unchanged.
pub fn clean_source_specific(doc: &DocumentRecord, ctx: &CleanContext) -> Cleaned {
    let Ok(source) = doc.source_id() else {
        return Cleaned::Kept(doc.clone());
    };
    let mut out = doc.clone();
    match source {
        SourceId::DiscoursPublics => {
            let t = url_line_re().replace_all(&doc.text, "");
            let t = views_line_re().replace_all(&t, "");
            out.text = drop_blank_lines(&t);
        }
        SourceId::Eurovoc => {
            out.text = normalize_ws(&cid_re().replace_all(&doc.text, ""));
        }
        SourceId::Gutenberg => {
            let Some(year) = death_year(doc) else {
                return Cleaned::Dropped(FilterDecision::drop(rules::GUTENBERG_DEATH_YEAR, "author death year unknown"));
            };
            let french = matches!(doc.language_tag(), Ok(LanguageTag::Natural(IsoCode::Fr)));
            let required = if french { ctx.public_domain_years_fr } else { ctx.public_domain_years };
            let elapsed = ctx.reference_year - year;
            if elapsed <= required {
                return Cleaned::Dropped(
                    FilterDecision::drop(rules::GUTENBERG_DEATH_YEAR, format!("author died {elapsed} years ago, need more than {required}"))
                        .with("death_year", year as f64),
                );
            }
            out.text = gutenberg_body(&doc.text);
        }
        SourceId::Theses => {
            out.text = theses(&doc.text);
            let words = out.text.split_whitespace().count();
            let chars = out.text.chars().count();
            if words < 1000 || chars < 10_000 {
                return Cleaned::Dropped(
                    FilterDecision::drop(rules::THESES_TOO_SHORT, format!("{words} words, {chars} characters"))
                        .with("words", words as f64)
                        .with("chars", chars as f64),
                );
            }
        }
        SourceId::Pile => {
            if let Some(d) = pile_drop(doc) {
                return Cleaned::Dropped(d);
            }
        }
        SourceId::YouTube => out.text = youtube(&doc.text),
        SourceId::MathPile => {
            if let Ok(Some(mut extra)) = doc.extra_map() {
                if let Some(text) = stackexchange_text(&Value::Object(extra.clone())) {
                    out.text = text;
                    extra.remove("question");
                    extra.remove("answers");
                    out.set_extra(&extra);
                }
            }
        }
        _ => return Cleaned::Kept(out),
    }
    if out.text.trim().is_empty() {
        return Cleaned::Dropped(FilterDecision::drop(rules::EMPTY_AFTER_CLEANING, "no text left after cleaning"));
    }
    Cleaned::Kept(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean(text: &str, source: &str) -> Cleaned {
        clean_source_specific(&DocumentRecord::new(text, "fr", source, "1"), &CleanContext::default())
    }

    fn text(c: Cleaned) -> String {
        c.kept().expect("kept").text
    }

    #[test]
    fn eurovoc_cid_artifacts() {
        assert_eq!(text(clean("loans (cid:146) granted", "Eurovoc")), "loans granted");
        assert_eq!(text(clean("a(cid:9)b\n(cid:1) c", "Eurovoc")), "ab\nc");
    }

    #[test]
    fn subtitle_annotations() {
        assert_eq!(text(clean("[Music] hello", "YouTube")), "hello");
        assert_eq!(
            text(clean("bonjour 😀 à tous\n[Applaudissements]\nmerci\nSous-titrage par XYZ", "YouTube")),
            "bonjour à tous\nmerci"
        );
        assert_eq!(text(clean("hi\nSubtitled by the Amara community", "YouTube")), "hi");
    }

    #[test]
    fn discours_publics_metadata_lines() {
        let t = "Source : https://www.vie-publique.fr/discours/123\nMesdames et messieurs,\n1 234 vues\nMerci.";
        assert_eq!(text(clean(t, "DiscoursPublics")), "Mesdames et messieurs,\nMerci.");
    }

    #[test]
    fn theses_length_gate() {
        let words: Vec<String> = (0..999).map(|i| format!("motlong{i:05}")).collect();
        let c = clean(&words.join(" "), "Theses");
        match c {
            Cleaned::Dropped(d) => {
                assert_eq!(d.rule_id, rules::THESES_TOO_SHORT);
                assert_eq!(d.measurements["words"], 999.0);
            }
            other => panic!("{other:?}"),
        }
        let words: Vec<String> = (0..1000).map(|i| format!("motlong{i:05}")).collect();
        assert!(clean(&words.join(" "), "Theses").kept().is_some());
    }

    #[test]
    fn theses_pages_and_duplicate_lines() {
        let body: String = (0..1200).map(|i| format!("ligne{i:05} ")).collect();
        let t = format!("HAL Id: tel-0001\narchive ouverte\u{c}{body}\nrepeated\nrepeated\u{c}\u{1}\u{2}\u{3}x");
        let out = text(clean(&t, "Theses"));
        assert!(!out.contains("HAL Id"));
        assert_eq!(out.matches("repeated").count(), 1);
        assert!(!out.contains('\u{1}'));
    }

    #[test]
    fn gutenberg_gate_and_markers() {
        let body = "*** START OF THE PROJECT GUTENBERG EBOOK X ***\nChapitre un.\n*** END OF THE PROJECT GUTENBERG EBOOK X ***\nlicense";
        let mut d = DocumentRecord::new(body, "fr", "Gutenberg", "g");
        let ctx = CleanContext::default();
        assert!(matches!(clean_source_specific(&d, &ctx), Cleaned::Dropped(ref x) if x.rule_id == rules::GUTENBERG_DEATH_YEAR));
        d.extra = Some(r#"{"author_death_year": 1940}"#.into());
        assert_eq!(text(clean_source_specific(&d, &ctx)), "Chapitre un.");
        // French authors need 80 years: 2024 - 1944 = 80 is not more than 80.
        d.extra = Some(r#"{"author_death_year": 1944}"#.into());
        assert!(clean_source_specific(&d, &ctx).kept().is_none());
        d.language = "en".into();
        assert!(clean_source_specific(&d, &ctx).kept().is_some());
    }

    #[test]
    fn stackexchange_conversion_matches_reference_code() {
        let v: Value = serde_json::json!({"question": {"Body": "Q?"}, "answers": [{"Body": "A1"}, {"Body": "A2"}]});
        assert_eq!(stackexchange_text(&v).unwrap(), "Q?A1\n\nA2");
        let mut d = DocumentRecord::new("", "en", "MathPile", "m");
        d.set_extra(v.as_object().unwrap());
        let out = text(clean_source_specific(&d, &CleanContext::default()));
        assert_eq!(out, "Q?A1\n\nA2");
    }

    #[test]
    fn unknown_and_ruleless_sources_pass_through() {
        let d = DocumentRecord::new("  odd (cid:1) text ", "fr", "Mystery", "1");
        assert_eq!(clean_source_specific(&d, &CleanContext::default()), Cleaned::Kept(d.clone()));
        let d = DocumentRecord::new("  odd (cid:1) text ", "fr", "Wikipedia", "1");
        assert_eq!(clean_source_specific(&d, &CleanContext::default()), Cleaned::Kept(d.clone()));
    }

    #[test]
    fn pile_language_gate() {
        let mut d = DocumentRecord::new(crate::langid::bundled_heldout(IsoCode::En), "en", "Pile", "p");
        d.extra = Some(r#"{"pile_set_name": "PhilPapers"}"#.into());
        assert!(clean_source_specific(&d, &CleanContext::default()).kept().is_some());
        d.text = "Dit is een Nederlandse tekst over filosofie en de geschiedenis van het denken in Europa.".into();
        assert!(clean_source_specific(&d, &CleanContext::default()).kept().is_none());
    }
}
