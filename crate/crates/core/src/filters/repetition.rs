use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::rules;
use crate::corpus::{DocumentRecord, FilterDecision};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepetitionConfig {
    pub max_duplicate_line_chars: f64,
    pub max_duplicate_paragraph_chars: f64,
    pub max_top_2gram_chars: f64,
}

impl Default for RepetitionConfig {
    fn default() -> Self {
        RepetitionConfig {
            max_duplicate_line_chars: 0.20,
            max_duplicate_paragraph_chars: 0.20,
            max_top_2gram_chars: 0.20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionStats {
    pub duplicate_line_chars: f64,
    pub duplicate_paragraph_chars: f64,
    pub top_2gram_chars: f64,
}

/// Characters in repeated occurrences (every copy after the first) over all
/// characters of the units.
fn duplicate_fraction<'a>(units: impl Iterator<Item = &'a str>) -> f64 {
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let (mut total, mut dup) = (0usize, 0usize);
    for u in units {
        let n = u.chars().count();
        total += n;
        if seen.insert(u, ()).is_some() {
            dup += n;
        }
    }
    if total == 0 {
        0.0
    } else {
        dup as f64 / total as f64
    }
}

/// Characters covered by the most frequent word bigram over all word
/// characters.
fn top_ngram_fraction(words: &[&str], n: usize) -> f64 {
    let total: usize = words.iter().map(|w| w.chars().count()).sum();
    if total == 0 || words.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    for g in words.windows(n) {
        *counts.entry(g).or_default() += 1;
    }
    let best = counts
        .iter()
        .map(|(g, c)| g.iter().map(|w| w.chars().count()).sum::<usize>() * c)
        .max()
        .unwrap_or(0);
    best as f64 / total as f64
}

pub fn repetition_stats(text: &str) -> RepetitionStats {
    let lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let paragraphs = text.split("\n\n").map(str::trim).filter(|p| !p.is_empty());
    let words: Vec<&str> = text.split_whitespace().collect();
    RepetitionStats {
        duplicate_line_chars: duplicate_fraction(lines),
        duplicate_paragraph_chars: duplicate_fraction(paragraphs),
        top_2gram_chars: top_ngram_fraction(&words, 2),
    }
}

pub fn repetition_filter(doc: &DocumentRecord, cfg: &RepetitionConfig) -> FilterDecision {
    let s = repetition_stats(&doc.text);
    let d = if s.duplicate_line_chars > cfg.max_duplicate_line_chars {
        FilterDecision::drop(rules::DUPLICATE_LINES, format!("{:.3} of characters in duplicate lines", s.duplicate_line_chars))
    } else if s.duplicate_paragraph_chars > cfg.max_duplicate_paragraph_chars {
        FilterDecision::drop(
            rules::DUPLICATE_PARAGRAPHS,
            format!("{:.3} of characters in duplicate paragraphs", s.duplicate_paragraph_chars),
        )
    } else if s.top_2gram_chars > cfg.max_top_2gram_chars {
        FilterDecision::drop(rules::TOP_2GRAM, format!("top bigram covers {:.3} of characters", s.top_2gram_chars))
    } else {
        FilterDecision::keep("repetition")
    };
    d.with("duplicate_line_chars", s.duplicate_line_chars)
        .with("duplicate_paragraph_chars", s.duplicate_paragraph_chars)
        .with("top_2gram_chars", s.top_2gram_chars)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(t: &str) -> DocumentRecord {
        DocumentRecord::new(t, "en", "RedPajama", "x")
    }

    fn distinct_word(i: usize) -> String {
        let letters = b"abcdefghijklmnopqrstuvwxyz";
        let mut n = i + 1;
        let mut s = String::new();
        while n > 0 {
            s.push(letters[n % 26] as char);
            n /= 26;
        }
        format!("w{s}")
    }

    #[test]
    fn repeated_line_dropped() {
        let t = vec!["the same line of text appears here"; 10].join("\n");
        let d = repetition_filter(&doc(&t), &RepetitionConfig::default());
        assert_eq!(d.rule_id, rules::DUPLICATE_LINES);
        assert!((d.measurements["duplicate_line_chars"] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn distinct_lines_kept() {
        let t: Vec<String> = (0..100)
            .map(|i| (0..6).map(|j| distinct_word(i * 6 + j)).collect::<Vec<_>>().join(" "))
            .collect();
        assert!(repetition_filter(&doc(&t.join("\n")), &RepetitionConfig::default()).is_keep());
    }

    /// Independent count: slide over the text string by string.
    fn brute_top_bigram(words: &[&str]) -> f64 {
        let total: usize = words.iter().map(|w| w.len()).sum();
        let mut best = 0;
        for i in 0..words.len() - 1 {
            let c = (0..words.len() - 1)
                .filter(|&j| words[j] == words[i] && words[j + 1] == words[i + 1])
                .count();
            best = best.max(c * (words[i].len() + words[i + 1].len()));
        }
        best as f64 / total as f64
    }

    #[test]
    fn top_bigram_matches_brute_force() {
        // "ab cd" appears 5 times among distinct filler: 5*4 = 20 of 80 chars.
        let mut words: Vec<String> = Vec::new();
        for i in 0..5 {
            words.push("ab".into());
            words.push("cd".into());
            let w = distinct_word(i);
            words.push(format!("{w}{}", "x".repeat(12 - w.len())));
        }
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let brute = brute_top_bigram(&refs);
        assert!((brute - 0.25).abs() < 1e-12, "{brute}");
        let s = repetition_stats(&refs.join(" "));
        assert!((s.top_2gram_chars - brute).abs() < 1e-12);
        let d = repetition_filter(&doc(&refs.join(" ")), &RepetitionConfig::default());
        assert_eq!(d.rule_id, rules::TOP_2GRAM);
    }

    #[test]
    fn duplicate_paragraphs() {
        let p = "first paragraph has several distinct words\nacross two lines";
        let t = format!("{p}\n\nsomething else entirely\n\n{p}");
        let s = repetition_stats(&t);
        assert!(s.duplicate_paragraph_chars > 0.4);
    }
}
