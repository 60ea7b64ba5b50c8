//! Corpus curation toolkit: record schema, quality gates, web selection,
//! near-duplicate removal, subword tokenization, training-mix planning,
//! instruction-data preparation and long-context probes.

pub mod align;
pub mod corpus;
pub mod dedup;
pub mod langid;
pub mod lm;
pub mod tokenizer;
pub mod web;
pub mod filters;
pub mod mix;
pub mod niah;
pub mod pipeline;
pub mod sft;
