//! Canonical document record, language tags, validation and line-delimited
//! record files.

mod decision;
mod io;
mod language;
mod record;
mod source;
mod validate;

pub use decision::{FilterDecision, Verdict};
pub use io::{
    open_input, read_all, read_records, write_records, ErrorMode, Located, RecordReader,
    RecordWriter,
};
pub use language::{IsoCode, LanguageTag};
pub use record::DocumentRecord;
pub use source::SourceId;
pub use validate::{validate_record, PartitionValidator};
pub use validate::{
    RULE_BAD_EXTRA, RULE_BAD_LANGUAGE, RULE_BAD_QUALITY_SIGNALS, RULE_CONTROL_CHARS,
    RULE_DUPLICATE_ID, RULE_MISSING_ID, RULE_UNKNOWN_SOURCE,
};

#[cfg(test)]
pub(crate) use record::fixtures;

/// Quality-signal keys read by this toolkit, spelled as in the published data.
pub mod signal_keys {
    pub const CHAR_COUNT: &str = "char_count";
    pub const WORD_COUNT: &str = "word_count";
    pub const CCNET_LANGUAGE_SCORE: &str = "ccnet_language_score";
    pub const CCNET_PERPLEXITY: &str = "ccnet_perplexity";
    pub const FASTTEXT_LANGUAGE: &str = "fasttext_language";
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid language tag fragment {fragment:?}: {message}")]
    LanguageTag { fragment: String, message: String },
    #[error("unknown source {0:?}")]
    UnknownSource(String),
    #[error("field {field} does not hold a JSON object: {message}")]
    EmbeddedJson { field: &'static str, message: String },
    #[error("line {line} (byte {offset}): {message}")]
    Parse {
        line: usize,
        offset: u64,
        message: String,
    },
    #[error("write failed after {written} records: {message}")]
    Write { written: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
