use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MixError;

/// Staircase batch-size rampup over consumed samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampupConfig {
    pub start: u64,
    pub end: u64,
    pub step: u64,
    /// Samples over which the batch size reaches `end`.
    pub horizon: u64,
}

impl Default for RampupConfig {
    fn default() -> Self {
        RampupConfig { start: 256, end: 1024, step: 64, horizon: 10_000_000 }
    }
}

impl RampupConfig {
    pub fn validate(&self) -> Result<(), MixError> {
        if self.start == 0 || self.start > self.end {
            return Err(MixError::Schedule(format!("need 0 < start ({}) <= end ({})", self.start, self.end)));
        }
        if self.step == 0 || (self.end - self.start) % self.step != 0 {
            return Err(MixError::Schedule(format!(
                "end - start ({}) is not a multiple of step ({})",
                self.end - self.start,
                self.step
            )));
        }
        if self.horizon == 0 {
            return Err(MixError::Schedule("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn increments(&self) -> u64 {
        (self.end - self.start) / self.step
    }
}

/// Batch size after `consumed` samples: one more step each time another
/// `horizon / increments` samples have been consumed, computed exactly.
pub fn batch_rampup(consumed: u64, cfg: &RampupConfig) -> Result<u64, MixError> {
    cfg.validate()?;
    let n = cfg.increments();
    let done = ((consumed as u128 * n as u128) / cfg.horizon as u128).min(n as u128) as u64;
    Ok(cfg.start + done * cfg.step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule {
    /// Linear warmup from 0 to `max_lr`, then cosine decay to `min_lr` at `total`.
    WarmupCosine { max_lr: f64, min_lr: f64, warmup: u64, total: u64 },
    Constant { lr: f64, total: u64 },
    /// Linear from `from` to `to` over `total`.
    Linear { from: f64, to: f64, total: u64 },
}

impl LrSchedule {
    /// Main pretraining phase, in samples.
    pub fn pretraining() -> Self {
        LrSchedule::WarmupCosine { max_lr: 3e-4, min_lr: 3e-5, warmup: 2_000_000, total: 762_000_000 }
    }

    /// Context extension phase, in samples.
    pub fn context_extension() -> Self {
        LrSchedule::Constant { lr: 2e-5, total: 156_250 }
    }

    /// Annealing phase over `total` positions.
    pub fn annealing(total: u64) -> Self {
        LrSchedule::Linear { from: 3e-5, to: 0.0, total }
    }

    pub fn total(&self) -> u64 {
        match *self {
            LrSchedule::WarmupCosine { total, .. } | LrSchedule::Constant { total, .. } | LrSchedule::Linear { total, .. } => total,
        }
    }

    pub fn validate(&self) -> Result<(), MixError> {
        match *self {
            LrSchedule::WarmupCosine { warmup, total, max_lr, min_lr } if warmup >= total || min_lr > max_lr => {
                Err(MixError::Schedule(format!("warmup {warmup} must be below total {total} and min_lr <= max_lr")))
            }
            s if s.total() == 0 => Err(MixError::Schedule("total must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrPoint {
    pub lr: f64,
    /// The position lay past the horizon and was clamped to it.
    pub clamped: bool,
}

pub fn lr_at(schedule: &LrSchedule, position: u64) -> LrPoint {
    let clamped = position > schedule.total();
    let p = position.min(schedule.total());
    let lr = match *schedule {
        LrSchedule::WarmupCosine { max_lr, min_lr, warmup, total } => {
            if p <= warmup {
                max_lr * p as f64 / warmup as f64
            } else if p == total {
                min_lr
            } else {
                let progress = (p - warmup) as f64 / (total - warmup) as f64;
                min_lr + (max_lr - min_lr) * 0.5 * (1.0 + (PI * progress).cos())
            }
        }
        LrSchedule::Constant { lr, .. } => lr,
        LrSchedule::Linear { from, to, total } => {
            if p == total {
                to
            } else {
                from + (to - from) * p as f64 / total as f64
            }
        }
    };
    LrPoint { lr, clamped }
}

/// CSV with columns `position,batch_size,lr`, one row per `stride`
/// positions up to and including the horizon.
pub fn write_schedule<W: Write>(
    schedule: &LrSchedule,
    rampup: Option<&RampupConfig>,
    stride: u64,
    w: W,
) -> Result<(), MixError> {
    schedule.validate()?;
    if stride == 0 {
        return Err(MixError::Schedule("stride must be positive".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["position", "batch_size", "lr"])?;
    let mut positions: Vec<u64> = (0..=schedule.total()).step_by(stride as usize).collect();
    if positions.last() != Some(&schedule.total()) {
        positions.push(schedule.total());
    }
    for p in positions {
        let bs = match rampup {
            Some(r) => batch_rampup(p, r)?.to_string(),
            None => String::new(),
        };
        out.write_record([p.to_string(), bs, format!("{:e}", lr_at(schedule, p).lr)])?;
    }
    out.flush()?;
    Ok(())
}
