//! Document-level quality gates, cleanups and redaction.

mod c4;
mod gates;
mod gopher;
mod keywords;
mod pii;
mod repetition;
mod report;
mod sources;

pub use c4::{c4_rules, C4Config, C4Outcome};
pub use gates::{
    chunk_text, gallica_filter_document, gallica_gate_v11, ocr_score_gate_v12, perplexity_band_gate,
    threshold_decision, threshold_gate, web_perplexity_band, ChunkMode, GateConfig, ThresholdTable,
};
pub use gopher::{gopher_rules, stop_words, GopherConfig};
pub use keywords::{synthetic_keyword_filter, FILTER_STRINGS};
pub use pii::{detect_pii, redact_pii, redact_text, PiiKind, PiiMatch};
pub use repetition::{repetition_filter, repetition_stats, RepetitionConfig, RepetitionStats};
pub use report::{DecisionRecord, RuleSummary};
pub use sources::{
    clean_source_specific, stackexchange_text, CleanContext, Cleaned, DEFAULT_REFERENCE_YEAR,
};

/// Rule identifiers carried by drop decisions.
pub mod rules {
    pub const PERPLEXITY_THRESHOLD: &str = "perplexity_threshold";
    pub const PERPLEXITY_LOW: &str = "perplexity_low";
    pub const PERPLEXITY_HIGH: &str = "perplexity_high";
    pub const LANGUAGE: &str = "language";
    pub const LANG_CONFIDENCE: &str = "lang_confidence";
    pub const OCR_SCORE: &str = "ocr_score";
    pub const C4_BADWORD: &str = "c4_badword";
    pub const C4_LOREM_IPSUM: &str = "c4_lorem_ipsum";
    pub const C4_CURLY_BRACE: &str = "c4_curly_brace";
    pub const C4_POLICY: &str = "c4_policy";
    pub const C4_TOO_FEW_SENTENCES: &str = "c4_too_few_sentences";
    pub const WORD_COUNT: &str = "word_count";
    pub const MEAN_WORD_LENGTH: &str = "mean_word_length";
    pub const SYMBOL_RATIO: &str = "symbol_ratio";
    pub const BULLET_FRACTION: &str = "bullet_fraction";
    pub const ELLIPSIS_FRACTION: &str = "ellipsis_fraction";
    pub const ALPHA_FRACTION: &str = "alpha_fraction";
    pub const STOP_WORDS: &str = "stop_words";
    pub const DUPLICATE_LINES: &str = "duplicate_lines";
    pub const DUPLICATE_PARAGRAPHS: &str = "duplicate_paragraphs";
    pub const TOP_2GRAM: &str = "top_2gram";
    pub const KEYWORD: &str = "keyword";
    pub const GUTENBERG_DEATH_YEAR: &str = "gutenberg_death_year";
    pub const THESES_TOO_SHORT: &str = "theses_too_short";
    pub const PILE_LANGUAGE: &str = "pile_language";
    pub const EMPTY_AFTER_CLEANING: &str = "empty_after_cleaning";
}

#[derive(Debug, thiserror::Error)]
pub enum FilterError {
    #[error("no perplexity threshold configured for source {0:?}")]
    NoThreshold(String),
    #[error("document {id:?} has no {field} value")]
    MissingField { id: String, field: &'static str },
    #[error("invalid gate configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lm(#[from] crate::lm::LmError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
