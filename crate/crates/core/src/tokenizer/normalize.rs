use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Characters after which a space is inserted when the next character is
/// alphanumeric (or a space, for the reversible encoder transform).
pub const TRIGGER_CHARS: [char; 18] = [
    '\n', '\t', '(', '[', '{', '/', '<', '\'', '\u{2019}', '"', '\u{ab}', '\u{201c}', '\u{2018}',
    '\u{201a}', '\u{2039}', '\u{2014}', '\u{2013}', '\u{2015}',
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRules {
    pub nfc: bool,
    pub strip_chars: Vec<char>,
    pub space_triggers: Vec<char>,
    pub leading_space: bool,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        NormalizationRules {
            nfc: true,
            strip_chars: vec!['\r', '\0'],
            space_triggers: TRIGGER_CHARS.to_vec(),
            leading_space: true,
        }
    }
}

impl NormalizationRules {
    /// No normalization at all; used for unconstrained toy training.
    pub fn none() -> Self {
        NormalizationRules {
            nfc: false,
            strip_chars: Vec::new(),
            space_triggers: Vec::new(),
            leading_space: false,
        }
    }

    pub fn is_trigger(&self, c: char) -> bool {
        self.space_triggers.contains(&c)
    }
}

/// What precedes a fragment being encoded or decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Start of the whole input.
    Start,
    /// Directly after the given character.
    After(char),
    /// Directly after a special token.
    AfterSpecial,
}

/// NFC plus removal of the stripped control characters. Lossy by intent.
pub fn clean(text: &str, rules: &NormalizationRules) -> String {
    let stripped = |c: &char| !rules.strip_chars.contains(c);
    if rules.nfc {
        text.nfc().filter(stripped).collect()
    } else {
        text.chars().filter(stripped).collect()
    }
}

/// Idempotent normalization: [`clean`], then a space after every trigger
/// character followed by an alphanumeric character. The leading space is
/// left to the encoder.
pub fn normalize(text: &str, rules: &NormalizationRules) -> String {
    let cleaned = clean(text, rules);
    let mut out = String::with_capacity(cleaned.len() + 8);
    let mut chars = cleaned.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if rules.is_trigger(c) {
            if let Some(&next) = chars.peek() {
                if next.is_alphanumeric() {
                    out.push(' ');
                }
            }
        }
    }
    out
}

fn wants_space(rules: &NormalizationRules, prev: char, next: char) -> bool {
    rules.is_trigger(prev) && (next.is_alphanumeric() || next == ' ')
}

/// True when `text` is optional spaces followed by a letter.
fn starts_with_word(text: &str) -> bool {
    text.trim_start_matches(' ').chars().next().is_some_and(char::is_alphabetic)
}

/// Reversible space insertion applied by the encoder to cleaned text.
///
/// A space is added at the start when the input opens with a word (after
/// optional spaces), and after a trigger that is followed by an alphanumeric
/// character or a space. Every trigger followed by a space in the output, and
/// a leading space run followed by a letter, therefore mark exactly one
/// inserted space.
pub fn insert_spaces(text: &str, rules: &NormalizationRules, boundary: Boundary) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    let mut chars = text.chars().peekable();
    if let Some(&first) = chars.peek() {
        match boundary {
            Boundary::Start if rules.leading_space && starts_with_word(text) => out.push(' '),
            Boundary::After(prev) if wants_space(rules, prev, first) => out.push(' '),
            _ => {}
        }
    }
    while let Some(c) = chars.next() {
        out.push(c);
        if let Some(&next) = chars.peek() {
            if wants_space(rules, c, next) {
                out.push(' ');
            }
        }
    }
    out
}

/// Inverse of [`insert_spaces`] for the same boundary.
pub fn remove_inserted_spaces(text: &str, rules: &NormalizationRules, boundary: Boundary) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let drop_first = match boundary {
        Boundary::Start => rules.leading_space && text.starts_with(' ') && starts_with_word(text),
        Boundary::After(prev) => rules.is_trigger(prev),
        Boundary::AfterSpecial => false,
    };
    if drop_first && chars.peek() == Some(&' ') {
        chars.next();
    }
    while let Some(c) = chars.next() {
        out.push(c);
        if rules.is_trigger(c) && chars.peek() == Some(&' ') {
            chars.next();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eighteen_triggers() {
        assert_eq!(TRIGGER_CHARS.len(), 18);
    }

    #[test]
    fn paren_gets_spaces() {
        let r = NormalizationRules::default();
        assert_eq!(normalize("(hello", &r), "( hello");
    }

    #[test]
    fn control_chars_removed() {
        let r = NormalizationRules::default();
        assert_eq!(clean("a\r\x00b", &r), "ab");
        assert_eq!(normalize("a\r\x00b", &r), "ab");
    }

    #[test]
    fn nfc_applied() {
        let r = NormalizationRules::default();
        assert_eq!(clean("e\u{301}", &r), "\u{e9}");
    }

    #[test]
    fn quotes_and_dashes_trigger() {
        let r = NormalizationRules::default();
        assert_eq!(normalize("«bonjour»", &r), "« bonjour»");
        assert_eq!(normalize("a—b", &r), "a— b");
        assert_eq!(normalize("x\ny", &r), "x\n y");
    }

    #[test]
    fn leading_space_only_before_words() {
        let r = NormalizationRules::default();
        assert_eq!(insert_spaces("hello", &r, Boundary::Start), " hello");
        assert_eq!(insert_spaces("  hello", &r, Boundary::Start), "   hello");
        assert_eq!(insert_spaces("123", &r, Boundary::Start), "123");
        assert_eq!(insert_spaces("        ", &r, Boundary::Start), "        ");
    }

    #[test]
    fn reversible_transform_handles_existing_spaces() {
        let r = NormalizationRules::default();
        let t = insert_spaces("( x", &r, Boundary::Start);
        assert_eq!(t, "(  x");
        assert_eq!(remove_inserted_spaces(&t, &r, Boundary::Start), "( x");
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "a", "Z", "é", "1", "9", " ", "  ", "\t", "\n", "\r", "\0", "(", "[", "{", "/", "<",
            "'", "’", "\"", "«", "“", "‘", "‚", "‹", "—", "–", "―", ".", ",", "e\u{301}", "日",
            "😀", "\u{a0}",
        ]);
        prop::collection::vec(prop_oneof![pieces.prop_map(String::from), "\\PC{0,3}"], 0..24)
            .prop_map(|v| v.concat())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn normalize_is_idempotent(s in text_strategy()) {
            let r = NormalizationRules::default();
            let once = normalize(&s, &r);
            prop_assert_eq!(normalize(&once, &r), once);
        }

        #[test]
        fn insertion_is_reversible(s in text_strategy()) {
            let r = NormalizationRules::default();
            let c = clean(&s, &r);
            for b in [Boundary::Start, Boundary::After('\n'), Boundary::After('x'), Boundary::AfterSpecial] {
                let t = insert_spaces(&c, &r, b);
                prop_assert_eq!(remove_inserted_spaces(&t, &r, b), c.clone());
            }
        }
    }
}
