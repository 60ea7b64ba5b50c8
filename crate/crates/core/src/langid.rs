//! Character n-gram language identifier trained on the bundled samples.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::corpus::IsoCode;

const MAX_N: usize = 3;

/// Bundled training text per language.
pub fn bundled_sample(lang: IsoCode) -> &'static str {
    match lang {
        IsoCode::En => include_str!("../data/samples/en.txt"),
        IsoCode::Fr => include_str!("../data/samples/fr.txt"),
        IsoCode::De => include_str!("../data/samples/de.txt"),
        IsoCode::Es => include_str!("../data/samples/es.txt"),
        IsoCode::It => include_str!("../data/samples/it.txt"),
    }
}

/// Held-out text per language, never used for training.
pub fn bundled_heldout(lang: IsoCode) -> &'static str {
    match lang {
        IsoCode::En => include_str!("../data/samples/en.heldout.txt"),
        IsoCode::Fr => include_str!("../data/samples/fr.heldout.txt"),
        IsoCode::De => include_str!("../data/samples/de.heldout.txt"),
        IsoCode::Es => include_str!("../data/samples/es.heldout.txt"),
        IsoCode::It => include_str!("../data/samples/it.heldout.txt"),
    }
}

pub const CODE_SAMPLE: &str = include_str!("../data/samples/code.txt");
pub const CODE_HELDOUT: &str = include_str!("../data/samples/code.heldout.txt");

/// Lowercased letters with every other run collapsed to one space, padded.
fn letters(text: &str) -> Vec<char> {
    let mut out = vec![' '];
    for c in text.chars() {
        if c.is_alphabetic() {
            out.extend(c.to_lowercase());
        } else if out.last() != Some(&' ') {
            out.push(' ');
        }
    }
    if out.last() != Some(&' ') {
        out.push(' ');
    }
    out
}

fn ngrams(chars: &[char]) -> impl Iterator<Item = String> + '_ {
    (1..=MAX_N).flat_map(move |n| {
        chars
            .windows(n)
            .filter(move |w| !(n > 1 && w.iter().all(|&c| c == ' ')))
            .map(|w| w.iter().collect::<String>())
    })
}

#[derive(Debug, Clone)]
struct Profile {
    counts: HashMap<String, u64>,
    total: u64,
}

/// Result of scoring one text.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageGuess {
    pub language: IsoCode,
    /// Posterior probability of the best language among the known ones.
    pub confidence: f64,
    /// Mean per-n-gram log-likelihood margin over the runner-up.
    pub margin: f64,
    /// Fraction of trigrams the best profile has never seen.
    pub unseen_trigrams: f64,
    /// Fraction of letters in Latin script.
    pub latin_fraction: f64,
}

impl LanguageGuess {
    /// Whether the text plausibly belongs to the guessed language rather than
    /// to some language the identifier does not model.
    pub fn is_known(&self) -> bool {
        self.latin_fraction >= 0.5 && self.unseen_trigrams <= 0.22 && self.margin >= 0.2
    }
}

#[derive(Debug, Clone)]
pub struct LanguageIdentifier {
    profiles: Vec<(IsoCode, Profile)>,
    vocab_size: usize,
}

impl LanguageIdentifier {
    pub fn train<'a, I>(samples: I) -> Self
    where
        I: IntoIterator<Item = (IsoCode, &'a str)>,
    {
        let mut profiles: Vec<(IsoCode, Profile)> = Vec::new();
        let mut vocab: std::collections::HashSet<String> = Default::default();
        for (lang, text) in samples {
            let mut p = Profile { counts: HashMap::new(), total: 0 };
            for g in ngrams(&letters(text)) {
                vocab.insert(g.clone());
                *p.counts.entry(g).or_insert(0) += 1;
                p.total += 1;
            }
            profiles.push((lang, p));
        }
        LanguageIdentifier { profiles, vocab_size: vocab.len() + 1 }
    }

    /// Identifier trained on the bundled samples, built once.
    pub fn bundled() -> &'static LanguageIdentifier {
        static ID: OnceLock<LanguageIdentifier> = OnceLock::new();
        ID.get_or_init(|| LanguageIdentifier::train(IsoCode::ALL.iter().map(|&l| (l, bundled_sample(l)))))
    }

    /// Per-language total log-likelihoods and the number of n-grams scored.
    pub fn scores(&self, text: &str) -> (Vec<(IsoCode, f64)>, usize) {
        let chars = letters(text);
        let grams: Vec<String> = ngrams(&chars).collect();
        let v = self.vocab_size as f64;
        let scores = self
            .profiles
            .iter()
            .map(|(lang, p)| {
                let denom = (p.total as f64 + v).ln();
                let ll: f64 = grams
                    .iter()
                    .map(|g| (p.counts.get(g).copied().unwrap_or(0) as f64 + 1.0).ln() - denom)
                    .sum();
                (*lang, ll)
            })
            .collect();
        (scores, grams.len())
    }

    /// Best language, or `None` for text without letters.
    pub fn identify(&self, text: &str) -> Option<LanguageGuess> {
        let chars = letters(text);
        let letter_count = chars.iter().filter(|c| **c != ' ').count();
        if letter_count == 0 {
            return None;
        }
        let latin = chars
            .iter()
            .filter(|&&c| c != ' ' && (c as u32) <= 0x024F)
            .count();
        let (mut scores, n) = self.scores(text);
        scores.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (best, best_ll) = scores[0];
        let max = best_ll;
        let z: f64 = scores.iter().map(|(_, s)| (s - max).exp()).sum();
        let runner = scores.get(1).map_or(best_ll, |s| s.1);
        let profile = &self.profiles.iter().find(|(l, _)| *l == best)?.1;
        let trigrams: Vec<String> = chars.windows(3).map(|w| w.iter().collect()).collect();
        let unseen = trigrams.iter().filter(|g| !profile.counts.contains_key(*g)).count();
        Some(LanguageGuess {
            language: best,
            confidence: 1.0 / z,
            margin: (best_ll - runner) / n.max(1) as f64,
            unseen_trigrams: if trigrams.is_empty() { 0.0 } else { unseen as f64 / trigrams.len() as f64 },
            latin_fraction: latin as f64 / letter_count as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn held_out_lines_are_identified() {
        let id = LanguageIdentifier::bundled();
        for lang in IsoCode::ALL {
            let lines: Vec<&str> = bundled_heldout(lang).lines().collect();
            let right = lines
                .iter()
                .filter(|l| id.identify(l).map(|g| g.language) == Some(lang))
                .count();
            assert_eq!(right, lines.len(), "{lang:?}");
            for l in &lines {
                let g = id.identify(l).unwrap();
                assert!(g.is_known(), "{l} {g:?}");
            }
            let whole = id.identify(bundled_heldout(lang)).unwrap();
            assert!(whole.is_known(), "{lang:?}: {whole:?}");
        }
    }

    #[test]
    fn foreign_scripts_are_unknown() {
        let id = LanguageIdentifier::bundled();
        let g = id.identify("Привет, как дела? Сегодня хорошая погода.").unwrap();
        assert!(!g.is_known());
        assert!(id.identify("12345 !!!").is_none());
    }

    #[test]
    fn unrelated_latin_languages_are_unknown() {
        let id = LanguageIdentifier::bundled();
        for t in [
            "Wij gaan morgen naar het strand, want het weer wordt zonnig en warm.",
            "Eu gosto muito de viajar com a minha família durante as férias de verão.",
            "Dzisiaj jest bardzo ładna pogoda i idziemy na spacer do parku.",
            "Vi åker till landet i morgon och stannar där hela veckan.",
        ] {
            assert!(!id.identify(t).unwrap().is_known(), "{t}");
        }
    }
}
