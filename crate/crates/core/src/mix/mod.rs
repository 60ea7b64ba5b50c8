//! Corpus composition, epoch plans, data mixes and training schedules.

mod composition;
mod epochs;
mod plan;
mod schedule;

pub use composition::{CompositionRow, CompositionTable, CompositionTotals, Totals};
pub use epochs::{apply_epochs, EffectiveComposition, EpochRule, EpochTable, PlanRow};
pub use plan::{
    annealing_mix, layout, length_splits, long_doc_upsample, AnnealingMix, LengthSplit, MixEntry,
    ParallelLayout, UpsampleRow, ValidatedMix, LONG_DOC_FACTOR, LONG_DOC_THRESHOLD, WEIGHT_TOLERANCE,
};
pub use schedule::{batch_rampup, lr_at, write_schedule, LrPoint, LrSchedule, RampupConfig};

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("composition table: {0}")]
    Composition(String),
    #[error("no epoch rule for dataset {dataset} ({language})")]
    UnmatchedDataset { dataset: String, language: String },
    #[error("mix weights do not sum to 1 (residual {residual:+e})")]
    Weights { residual: f64 },
    #[error("{n_gpus} GPUs cannot be split as TP {tp} x PP {pp}; valid (tp, pp): {valid:?}")]
    Layout { n_gpus: u64, tp: u64, pp: u64, valid: Vec<(u64, u64)> },
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("upsampling: {0}")]
    Upsample(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
