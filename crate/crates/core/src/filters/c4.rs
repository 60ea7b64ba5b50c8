use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{rules, FilterError};
use crate::corpus::{DocumentRecord, FilterDecision};

/// C4-style cleaning parameters. The badword list is loaded from a file and
/// never bundled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C4Config {
    pub badwords: Vec<String>,
    pub policy_phrases: Vec<String>,
    pub terminal_punctuation: Vec<char>,
    /// Lines with fewer words are removed.
    pub min_words_per_line: usize,
    pub min_sentences: usize,
    /// Lines mentioning javascript are removed.
    pub remove_javascript_lines: bool,
}

impl Default for C4Config {
    fn default() -> Self {
        C4Config {
            badwords: Vec::new(),
            policy_phrases: [
                "terms of use",
                "privacy policy",
                "cookie policy",
                "uses cookies",
                "use of cookies",
                "use cookies",
            ]
            .map(String::from)
            .to_vec(),
            terminal_punctuation: vec!['.', '!', '?', '"', '\u{201d}', '\u{bb}'],
            min_words_per_line: 5,
            min_sentences: 3,
            remove_javascript_lines: true,
        }
    }
}

impl C4Config {
    /// Reads one badword (or badword phrase) per line; blank lines and `#`
    /// comments are skipped.
    pub fn load_badwords(&mut self, path: &Path) -> Result<(), FilterError> {
        let raw = std::fs::read_to_string(path)?;
        self.badwords = raw
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Ok(())
    }
}

/// Decision plus the line-filtered text (meaningful when kept).
#[derive(Debug, Clone, PartialEq)]
pub struct C4Outcome {
    pub decision: FilterDecision,
    pub text: String,
    pub lines_removed: usize,
}

fn words_lower(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_badword(text: &str, badwords: &[String]) -> Option<String> {
    if badwords.is_empty() {
        return None;
    }
    let words = words_lower(text);
    let set: HashSet<&str> = words.iter().map(String::as_str).collect();
    let joined = format!(" {} ", words.join(" "));
    badwords
        .iter()
        .find(|b| {
            if b.contains(' ') {
                joined.contains(&format!(" {b} "))
            } else {
                set.contains(b.as_str())
            }
        })
        .cloned()
}

/// Counts sentences as runs of text closed by `.`, `!` or `?` (or the end of
/// the text) that contain at least one letter.
pub(crate) fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut has_letter = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphabetic() {
            has_letter = true;
        }
        let closes = matches!(c, '.' | '!' | '?')
            && chars.peek().is_none_or(|n| n.is_whitespace() || matches!(n, '"' | '\u{201d}' | '\u{bb}'));
        if closes && has_letter {
            count += 1;
            has_letter = false;
        }
    }
    count + usize::from(has_letter)
}

fn keep_line(line: &str, cfg: &C4Config) -> bool {
    let t = line.trim();
    let ends_ok = t.chars().last().is_some_and(|c| cfg.terminal_punctuation.contains(&c));
    let long_enough = t.split_whitespace().count() >= cfg.min_words_per_line;
    let js = cfg.remove_javascript_lines && t.to_lowercase().contains("javascript");
    ends_ok && long_enough && !js
}

/// Applies the C4 page rules, then line filtering, then the sentence count.
pub fn c4_rules(doc: &DocumentRecord, cfg: &C4Config) -> C4Outcome {
    let text = &doc.text;
    let lower = text.to_lowercase();
    let early = |d: FilterDecision| C4Outcome { decision: d, text: text.clone(), lines_removed: 0 };
    if let Some(b) = contains_badword(text, &cfg.badwords) {
        return early(FilterDecision::drop(rules::C4_BADWORD, format!("contains listed term {b:?}")));
    }
    if lower.contains("lorem ipsum") {
        return early(FilterDecision::drop(rules::C4_LOREM_IPSUM, "contains lorem ipsum"));
    }
    if text.contains('{') || text.contains('}') {
        return early(FilterDecision::drop(rules::C4_CURLY_BRACE, "contains a curly brace"));
    }
    if let Some(p) = cfg.policy_phrases.iter().find(|p| lower.contains(&p.to_lowercase())) {
        return early(FilterDecision::drop(rules::C4_POLICY, format!("contains policy phrase {p:?}")));
    }
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let kept: Vec<&str> = lines.iter().copied().filter(|l| keep_line(l, cfg)).collect();
    let removed = lines.len() - kept.len();
    let new_text = kept.join("\n");
    let sentences = sentence_count(&new_text);
    let decision = if sentences < cfg.min_sentences {
        FilterDecision::drop(
            rules::C4_TOO_FEW_SENTENCES,
            format!("{sentences} sentences after line filtering"),
        )
    } else {
        FilterDecision::keep("c4")
    };
    C4Outcome {
        decision: decision
            .with("sentences", sentences as f64)
            .with("lines_removed", removed as f64),
        text: new_text,
        lines_removed: removed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(t: &str) -> DocumentRecord {
        DocumentRecord::new(t, "en", "RedPajama", "x")
    }

    const CLEAN: &str = "The river rises in the northern hills every spring. \
        Farmers along its banks plant their crops after the floods recede. \
        The soil there is rich and dark from the yearly silt. \
        Several villages hold a festival when the water returns. \
        Visitors come from far away to watch the boats.";

    #[test]
    fn clean_paragraph_is_kept_unchanged() {
        let out = c4_rules(&doc(CLEAN), &C4Config::default());
        assert!(out.decision.is_keep(), "{:?}", out.decision);
        assert_eq!(out.text, CLEAN);
        assert_eq!(out.decision.measurements["sentences"], 5.0);
    }

    #[test]
    fn lorem_ipsum_and_braces_drop() {
        let cfg = C4Config::default();
        let d = c4_rules(&doc(&format!("{CLEAN} Lorem ipsum dolor sit amet.")), &cfg).decision;
        assert_eq!(d.rule_id, rules::C4_LOREM_IPSUM);
        let d = c4_rules(&doc(&format!("{CLEAN} x = {{}}.")), &cfg).decision;
        assert_eq!(d.rule_id, rules::C4_CURLY_BRACE);
        let d = c4_rules(&doc(&format!("{CLEAN} Read our cookie policy today.")), &cfg).decision;
        assert_eq!(d.rule_id, rules::C4_POLICY);
    }

    #[test]
    fn badwords_match_whole_words() {
        let cfg = C4Config { badwords: vec!["silt".into(), "far away".into()], ..Default::default() };
        assert_eq!(c4_rules(&doc(CLEAN), &cfg).decision.rule_id, rules::C4_BADWORD);
        let cfg = C4Config { badwords: vec!["sil".into()], ..Default::default() };
        assert!(c4_rules(&doc(CLEAN), &cfg).decision.is_keep());
    }

    #[test]
    fn badword_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        std::fs::write(&p, "# list\nSilt\n\n").unwrap();
        let mut cfg = C4Config::default();
        cfg.load_badwords(&p).unwrap();
        assert_eq!(cfg.badwords, vec!["silt"]);
    }

    #[test]
    fn unterminated_lines_are_removed() {
        let text = format!("Home | About | Contact\n{CLEAN}\nShare this");
        let out = c4_rules(&doc(&text), &C4Config::default());
        assert!(out.decision.is_keep());
        assert_eq!(out.text, CLEAN);
        assert_eq!(out.lines_removed, 2);
    }

    #[test]
    fn too_few_sentences() {
        let out = c4_rules(&doc("One short sentence here is fine. And another one right here."), &C4Config::default());
        assert_eq!(out.decision.rule_id, rules::C4_TOO_FEW_SENTENCES);
    }

    #[test]
    fn sentence_counter() {
        assert_eq!(sentence_count("A b. C d! E f? G"), 4);
        assert_eq!(sentence_count("3.14 is pi."), 1);
        assert_eq!(sentence_count(""), 0);
    }
}
