use serde::{Deserialize, Serialize};

use super::rules;
use crate::corpus::{DocumentRecord, FilterDecision, IsoCode, LanguageTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GopherConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub min_mean_word_length: f64,
    pub max_mean_word_length: f64,
    pub max_symbol_ratio: f64,
    pub max_bullet_fraction: f64,
    pub max_ellipsis_fraction: f64,
    pub min_alpha_fraction: f64,
    pub min_stop_words: usize,
}

impl Default for GopherConfig {
    fn default() -> Self {
        GopherConfig {
            min_words: 50,
            max_words: 100_000,
            min_mean_word_length: 3.0,
            max_mean_word_length: 10.0,
            max_symbol_ratio: 0.1,
            max_bullet_fraction: 0.9,
            max_ellipsis_fraction: 0.3,
            min_alpha_fraction: 0.8,
            min_stop_words: 2,
        }
    }
}

/// Short function-word list per language.
pub fn stop_words(lang: IsoCode) -> &'static [&'static str] {
    match lang {
        IsoCode::En => &["the", "be", "to", "of", "and", "that", "have", "with"],
        IsoCode::Fr => &["le", "la", "les", "de", "et", "un", "une", "des", "est", "que", "dans", "pour"],
        IsoCode::De => &["der", "die", "das", "und", "ist", "zu", "den", "mit", "nicht", "ein", "von"],
        IsoCode::Es => &["el", "la", "los", "de", "y", "que", "en", "un", "una", "por", "con", "es"],
        IsoCode::It => &["il", "la", "di", "e", "che", "un", "una", "per", "con", "non", "è", "sono"],
    }
}

fn languages_of(doc: &DocumentRecord) -> Vec<IsoCode> {
    match doc.language_tag() {
        Ok(LanguageTag::Natural(l)) => vec![l],
        Ok(LanguageTag::Pair(a, b)) => vec![a, b],
        _ => IsoCode::ALL.to_vec(),
    }
}

const BULLETS: [char; 6] = ['•', '-', '*', '‣', '◦', '⁃'];

/// Gopher quality rules. Non-natural-language tags use the union of all
/// stop-word lists.
pub fn gopher_rules(doc: &DocumentRecord, cfg: &GopherConfig) -> FilterDecision {
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    let n = words.len();
    let nf = n.max(1) as f64;
    let mean_len = words.iter().map(|w| w.chars().count()).sum::<usize>() as f64 / nf;
    let symbols = doc.text.matches('#').count() + doc.text.matches("...").count() + doc.text.matches('…').count();
    let symbol_ratio = symbols as f64 / nf;
    let lines: Vec<&str> = doc.text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let lf = lines.len().max(1) as f64;
    let bullet = lines.iter().filter(|l| l.starts_with(BULLETS)).count() as f64 / lf;
    let ellipsis = lines.iter().filter(|l| l.ends_with("...") || l.ends_with('…')).count() as f64 / lf;
    let alpha = words.iter().filter(|w| w.chars().any(char::is_alphabetic)).count() as f64 / nf;
    let langs = languages_of(doc);
    let stops = words
        .iter()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| langs.iter().any(|l| stop_words(*l).contains(&w.as_str())))
        .count();

    let measurements = [
        ("word_count", n as f64),
        ("mean_word_length", mean_len),
        ("symbol_ratio", symbol_ratio),
        ("bullet_fraction", bullet),
        ("ellipsis_fraction", ellipsis),
        ("alpha_fraction", alpha),
        ("stop_words", stops as f64),
    ];
    let fail = if n < cfg.min_words || n > cfg.max_words {
        Some((rules::WORD_COUNT, format!("{n} words outside [{}, {}]", cfg.min_words, cfg.max_words)))
    } else if mean_len < cfg.min_mean_word_length || mean_len > cfg.max_mean_word_length {
        Some((rules::MEAN_WORD_LENGTH, format!("mean word length {mean_len:.2}")))
    } else if symbol_ratio > cfg.max_symbol_ratio {
        Some((rules::SYMBOL_RATIO, format!("symbol ratio {symbol_ratio:.3}")))
    } else if bullet > cfg.max_bullet_fraction {
        Some((rules::BULLET_FRACTION, format!("{:.0}% bullet lines", bullet * 100.0)))
    } else if ellipsis > cfg.max_ellipsis_fraction {
        Some((rules::ELLIPSIS_FRACTION, format!("{:.0}% ellipsis lines", ellipsis * 100.0)))
    } else if alpha < cfg.min_alpha_fraction {
        Some((rules::ALPHA_FRACTION, format!("{:.0}% alphabetic words", alpha * 100.0)))
    } else if stops < cfg.min_stop_words {
        Some((rules::STOP_WORDS, format!("{stops} stop words")))
    } else {
        None
    };
    let d = match fail {
        Some((rule, reason)) => FilterDecision::drop(rule, reason),
        None => FilterDecision::keep("gopher"),
    };
    measurements.iter().fold(d, |d, (k, v)| d.with(k, *v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(words: usize) -> String {
        let base = "the old harbour town of the north coast has long been a place where fishing boats and \
            merchants meet with travellers to trade goods and stories";
        base.split(' ').cycle().take(words).collect::<Vec<_>>().join(" ")
    }

    fn doc(t: &str, lang: &str) -> DocumentRecord {
        DocumentRecord::new(t, lang, "RedPajama", "x")
    }

    #[test]
    fn ten_words_fail_word_count() {
        assert_eq!(gopher_rules(&doc(&article(10), "en"), &GopherConfig::default()).rule_id, rules::WORD_COUNT);
    }

    #[test]
    fn normal_article_kept() {
        let d = gopher_rules(&doc(&article(500), "en"), &GopherConfig::default());
        assert!(d.is_keep(), "{d:?}");
    }

    #[test]
    fn bullet_heavy_document_dropped() {
        let mut lines: Vec<String> = (0..95).map(|i| format!("- item number {i} of the list with the words")).collect();
        lines.extend((0..5).map(|_| "the plain line of text with the words".to_string()));
        let d = gopher_rules(&doc(&lines.join("\n"), "en"), &GopherConfig::default());
        assert_eq!(d.rule_id, rules::BULLET_FRACTION);
        assert!((d.measurements["bullet_fraction"] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn boundaries() {
        let cfg = GopherConfig::default();
        assert!(gopher_rules(&doc(&article(50), "en"), &cfg).is_keep());
        assert_eq!(gopher_rules(&doc(&article(49), "en"), &cfg).rule_id, rules::WORD_COUNT);
        // 30% ellipsis lines passes, 40% fails.
        let mk = |e: usize| {
            (0..10)
                .map(|i| if i < e { format!("{}...", article(8)) } else { article(8) })
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert!(gopher_rules(&doc(&mk(3), "en"), &cfg).is_keep());
        assert_eq!(gopher_rules(&doc(&mk(4), "en"), &cfg).rule_id, rules::ELLIPSIS_FRACTION);
    }

    #[test]
    fn stop_words_depend_on_language() {
        let fr = "der die das ".repeat(20);
        let d = gopher_rules(&doc(&fr, "fr"), &GopherConfig::default());
        assert_eq!(d.rule_id, rules::STOP_WORDS);
        assert!(gopher_rules(&doc(&fr, "de"), &GopherConfig::default()).is_keep());
    }

    #[test]
    fn non_alpha_words_dropped() {
        let t = format!("{} {}", article(60), "1234 5678 ".repeat(20));
        assert_eq!(gopher_rules(&doc(&t, "en"), &GopherConfig::default()).rule_id, rules::ALPHA_FRACTION);
    }
}
