//! Byte-fallback BPE tokenizer with class-constrained merges.

mod audit;
mod fertility;
mod model;
mod normalize;
mod pretokenize;
mod train;

pub use audit::{audit_vocabulary, AuditReport};
pub use fertility::{fertility, word_count, Fertility};
pub use model::{byte_token, ModelHeader, TokenId, TokenizerModel, BOS, EOS, PAD};
pub use normalize::{
    clean, insert_spaces, normalize, remove_inserted_spaces, Boundary, NormalizationRules,
    TRIGGER_CHARS,
};
pub use pretokenize::{char_class, max_run, segment, whitespace_run_tokens, CharClass, SegmentKind, SegmentationMode};
pub use train::{check_vocab_size, train_bpe, TrainConfig, DEFAULT_SPECIAL_TOKENS};

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),
    #[error("token id {0} is out of range")]
    UnknownId(TokenId),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("sample contains no words")]
    NoWords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
