use std::fmt;

use super::model::TokenizerModel;
use super::pretokenize::{char_class, max_run, whitespace_run_tokens, CharClass};

/// Tokens that break the class-boundary constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    /// Tokens containing a digit together with anything else.
    pub digit_mixed: Vec<String>,
    /// Tokens mixing letters with punctuation or inner whitespace.
    pub class_mixed: Vec<String>,
    /// Whitespace tokens that are not a bounded run of one character.
    pub bad_whitespace: Vec<String>,
    /// Required whitespace-run tokens absent from the vocabulary.
    pub missing_whitespace_runs: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.digit_mixed.is_empty()
            && self.class_mixed.is_empty()
            && self.bad_whitespace.is_empty()
            && self.missing_whitespace_runs.is_empty()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} digit-mixed, {} class-mixed, {} bad whitespace, {} missing whitespace runs",
            self.digit_mixed.len(),
            self.class_mixed.len(),
            self.bad_whitespace.len(),
            self.missing_whitespace_runs.len()
        )?;
        let first = self
            .digit_mixed
            .iter()
            .chain(&self.class_mixed)
            .chain(&self.bad_whitespace)
            .chain(&self.missing_whitespace_runs)
            .next();
        if let Some(t) = first {
            write!(f, " (first: {t:?})")?;
        }
        Ok(())
    }
}

enum TokenShape {
    Ok,
    DigitMixed,
    ClassMixed,
    BadWhitespace,
}

fn shape(token: &str) -> TokenShape {
    let chars: Vec<char> = token.chars().collect();
    let has_digit = chars.iter().any(|&c| char_class(c) == CharClass::Digit);
    if has_digit {
        return if chars.len() == 1 { TokenShape::Ok } else { TokenShape::DigitMixed };
    }
    if chars.iter().all(|&c| char_class(c) == CharClass::Space) {
        let first = chars[0];
        let uniform = chars.iter().all(|&c| c == first);
        return if uniform && chars.len() <= max_run(first) {
            TokenShape::Ok
        } else {
            TokenShape::BadWhitespace
        };
    }
    let body = match chars.split_first() {
        Some((' ', rest)) if !rest.is_empty() => rest,
        _ => &chars[..],
    };
    let cls = char_class(body[0]);
    if body.iter().all(|&c| char_class(c) == cls) {
        TokenShape::Ok
    } else {
        TokenShape::ClassMixed
    }
}

/// Checks every ordinary token against the segmentation constraints.
/// Byte-fallback and special tokens are exempt.
pub fn audit_vocabulary(model: &TokenizerModel) -> AuditReport {
    let mut report = AuditReport::default();
    for (id, token) in model.vocab().iter().enumerate() {
        let id = id as u32;
        if model.is_byte(id) || model.is_special(id) || token.is_empty() {
            continue;
        }
        match shape(token) {
            TokenShape::Ok => {}
            TokenShape::DigitMixed => report.digit_mixed.push(token.clone()),
            TokenShape::ClassMixed => report.class_mixed.push(token.clone()),
            TokenShape::BadWhitespace => report.bad_whitespace.push(token.clone()),
        }
    }
    for run in whitespace_run_tokens() {
        if model.id(&run).is_none() {
            report.missing_whitespace_runs.push(run);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(t: &str) -> bool {
        matches!(shape(t), TokenShape::Ok)
    }

    #[test]
    fn shapes() {
        assert!(ok("7"));
        assert!(ok(" hello"));
        assert!(ok(" (("));
        assert!(ok("        "));
        assert!(ok("\n\n"));
        assert!(matches!(shape("12"), TokenShape::DigitMixed));
        assert!(matches!(shape(" 1"), TokenShape::DigitMixed));
        assert!(matches!(shape("a."), TokenShape::ClassMixed));
        assert!(matches!(shape("a b"), TokenShape::ClassMixed));
        assert!(matches!(shape("\n\n\n"), TokenShape::BadWhitespace));
        assert!(matches!(shape(" \n"), TokenShape::BadWhitespace));
    }
}
