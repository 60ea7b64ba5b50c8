//! Instruction-data preparation.

mod conversation;
mod template;

pub use conversation::{Conversation, Role, Turn};
pub use template::{
    encode_chat, pad_truncate, parse_chat, prepare_example, render_chat, EncodedChat, MaskOptions, RenderedExample,
    END_HEADER, EOT, RESERVED_LITERALS, SEQUENCE_LENGTH, START_HEADER,
};

use crate::corpus::FilterDecision;
use crate::filters::{rules, synthetic_keyword_filter};

/// Languages kept for instruction tuning.
pub const SFT_LANGUAGES: [&str; 5] = ["en", "fr", "de", "es", "it"];

#[derive(Debug, thiserror::Error)]
pub enum SftError {
    #[error("conversation has no turns")]
    EmptyConversation,
    #[error("{0}")]
    UnknownRole(String),
    #[error("turn {turn} contains the reserved literal {literal}")]
    SpecialLiteral { turn: usize, literal: String },
    #[error("malformed chat text: {0}")]
    Parse(String),
    #[error("tokenizer lacks special token {0}")]
    MissingSpecial(String),
    #[error("{ids} token ids but {mask} mask entries")]
    SpanMismatch { ids: usize, mask: usize },
    #[error("example {id:?} has no language tag")]
    MissingLanguage { id: Option<String> },
}

/// Language check, then the keyword filter on assistant turns.
pub fn sft_filter(example: &Conversation, case_sensitive: bool) -> Result<FilterDecision, SftError> {
    let lang = example
        .language
        .as_deref()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| SftError::MissingLanguage { id: example.id.clone() })?;
    if !lang.split('-').all(|part| SFT_LANGUAGES.contains(&part)) {
        return Ok(FilterDecision::drop(rules::LANGUAGE, format!("language {lang} not trained on")));
    }
    Ok(synthetic_keyword_filter(example, case_sensitive))
}

#[cfg(test)]
mod tests;
