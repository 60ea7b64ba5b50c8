use super::model::TokenizerModel;
use super::TokenizerError;

/// Token and word totals over a sample; fertility is tokens per word.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fertility {
    pub tokens: u64,
    pub words: u64,
}

impl Fertility {
    pub fn value(&self) -> f64 {
        if self.words == 0 {
            0.0
        } else {
            self.tokens as f64 / self.words as f64
        }
    }

    pub fn add(&mut self, other: Fertility) {
        self.tokens += other.tokens;
        self.words += other.words;
    }
}

/// Words are whitespace-separated spans.
pub fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Tokens per whitespace-delimited word over `texts`.
pub fn fertility<I, S>(model: &TokenizerModel, texts: I) -> Result<Fertility, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut f = Fertility::default();
    for t in texts {
        let t = t.as_ref();
        f.tokens += model.encode(t).len() as u64;
        f.words += word_count(t);
    }
    if f.words == 0 {
        return Err(TokenizerError::NoWords);
    }
    Ok(f)
}
