use serde::{Deserialize, Serialize};

/// Character classes whose boundaries merges may not cross.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharClass {
    Alpha,
    Digit,
    Space,
    Punct,
}

pub fn char_class(c: char) -> CharClass {
    if c.is_alphabetic() {
        CharClass::Alpha
    } else if c.is_numeric() {
        CharClass::Digit
    } else if c.is_whitespace() {
        CharClass::Space
    } else {
        CharClass::Punct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentationMode {
    /// Class-boundary pre-segmentation: isolated digits, punctuation apart
    /// from letters, bounded whitespace runs.
    Constrained,
    /// Each input string is a single segment.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// Letters, optionally with one leading space.
    Word,
    /// Punctuation/symbols, optionally with one leading space.
    Punct,
    /// One numeric character.
    Digit,
    /// A run of one whitespace character, bounded per character.
    Whitespace,
    /// Everything, in unconstrained mode.
    Free,
}

impl SegmentKind {
    /// Whether BPE merges apply inside segments of this kind.
    pub fn mergeable(self) -> bool {
        matches!(self, SegmentKind::Word | SegmentKind::Punct | SegmentKind::Free)
    }
}

/// Longest whitespace-run token for a given whitespace character.
pub fn max_run(c: char) -> usize {
    match c {
        ' ' => 8,
        '\t' => 4,
        '\n' => 2,
        _ => 1,
    }
}

/// Required whitespace-run inventory: spaces 1..=8, tabs 1..=4, newlines 1..=2.
pub fn whitespace_run_tokens() -> Vec<String> {
    let mut out = Vec::new();
    for c in [' ', '\t', '\n'] {
        for n in 1..=max_run(c) {
            out.push(c.to_string().repeat(n));
        }
    }
    out
}

/// Splits already space-inserted text into segments.
pub fn segment(text: &str, mode: SegmentationMode) -> Vec<(SegmentKind, &str)> {
    if text.is_empty() {
        return Vec::new();
    }
    if mode == SegmentationMode::Unconstrained {
        return vec![(SegmentKind::Free, text)];
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map(|(b, _)| *b).unwrap_or(text.len());
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        match char_class(c) {
            CharClass::Space => {
                let mut j = i;
                while j < chars.len() && chars[j].1 == c {
                    j += 1;
                }
                // The last space of a run travels with a following word or
                // punctuation run.
                let attaches = c == ' '
                    && j < chars.len()
                    && matches!(char_class(chars[j].1), CharClass::Alpha | CharClass::Punct);
                let run_end = if attaches { j - 1 } else { j };
                let limit = max_run(c);
                let mut k = i;
                while k < run_end {
                    let stop = (k + limit).min(run_end);
                    out.push((SegmentKind::Whitespace, &text[end_of(k)..end_of(stop)]));
                    k = stop;
                }
                if attaches {
                    let cls = char_class(chars[j].1);
                    let mut m = j;
                    while m < chars.len() && char_class(chars[m].1) == cls {
                        m += 1;
                    }
                    let kind = if cls == CharClass::Alpha {
                        SegmentKind::Word
                    } else {
                        SegmentKind::Punct
                    };
                    out.push((kind, &text[end_of(j - 1)..end_of(m)]));
                    i = m;
                } else {
                    i = j;
                }
            }
            CharClass::Digit => {
                out.push((SegmentKind::Digit, &text[end_of(i)..end_of(i + 1)]));
                i += 1;
            }
            cls => {
                let mut m = i;
                while m < chars.len() && char_class(chars[m].1) == cls {
                    m += 1;
                }
                let kind = if cls == CharClass::Alpha {
                    SegmentKind::Word
                } else {
                    SegmentKind::Punct
                };
                out.push((kind, &text[end_of(i)..end_of(m)]));
                i = m;
            }
        }
    }
    out
}
