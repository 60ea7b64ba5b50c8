use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MixError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParallelLayout {
    pub n_gpus: u64,
    pub tp: u64,
    pub pp: u64,
    pub dp: u64,
}

impl fmt::Display for ParallelLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} GPUs = TP {} x PP {} x DP {}", self.n_gpus, self.tp, self.pp, self.dp)
    }
}

/// Data parallelism `dp = n_gpus / (tp * pp)`, exact or an error.
pub fn layout(n_gpus: u64, tp: u64, pp: u64) -> Result<ParallelLayout, MixError> {
    if n_gpus == 0 || tp == 0 || pp == 0 {
        return Err(MixError::Layout { n_gpus, tp, pp, valid: Vec::new() });
    }
    if n_gpus % (tp * pp) != 0 {
        let valid = (1..=n_gpus)
            .filter(|t| n_gpus % t == 0)
            .flat_map(|t| (1..=n_gpus / t).filter(move |p| (n_gpus / t) % p == 0).map(move |p| (t, p)))
            .collect();
        return Err(MixError::Layout { n_gpus, tp, pp, valid });
    }
    Ok(ParallelLayout { n_gpus, tp, pp, dp: n_gpus / (tp * pp) })
}

/// Token subtotals of one dataset split at the long-document threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSplit {
    pub dataset: String,
    /// Tokens in documents of at most the threshold length.
    pub short_tokens: f64,
    /// Tokens in documents longer than the threshold.
    pub long_tokens: f64,
}

/// Documents longer than this many tokens count as long.
pub const LONG_DOC_THRESHOLD: u64 = 4096;
pub const LONG_DOC_FACTOR: f64 = 10.0;

/// Sums document token counts per dataset into short/long subtotals.
pub fn length_splits<'a, I>(docs: I, threshold: u64) -> Vec<LengthSplit>
where
    I: IntoIterator<Item = (&'a str, u64)>,
{
    let mut m: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for (ds, tokens) in docs {
        let e = m.entry(ds).or_default();
        if tokens > threshold {
            e.1 += tokens as f64;
        } else {
            e.0 += tokens as f64;
        }
    }
    m.into_iter()
        .map(|(d, (s, l))| LengthSplit { dataset: d.to_string(), short_tokens: s, long_tokens: l })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpsampleRow {
    pub dataset: String,
    /// Sampling weight of short and long documents inside the dataset.
    pub short_weight: f64,
    pub long_weight: f64,
    /// Fraction of the dataset's draws that come from long documents.
    pub long_share: f64,
    /// Dataset share of the whole mix, unchanged by the upsampling.
    pub domain_share: f64,
    /// Share of all training tokens coming from this dataset's long documents.
    pub long_share_of_mix: f64,
}

/// Multiplies long-document weight by `factor` inside each dataset while
/// keeping each dataset's share of the mix equal to its raw token share.
pub fn long_doc_upsample(splits: &[LengthSplit], factor: f64) -> Result<Vec<UpsampleRow>, MixError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(MixError::Upsample("factor must be positive".into()));
    }
    for s in splits {
        if !(s.short_tokens >= 0.0 && s.long_tokens >= 0.0) || s.short_tokens + s.long_tokens <= 0.0 {
            return Err(MixError::Upsample(format!("dataset {} needs non-negative, non-empty split", s.dataset)));
        }
    }
    let total: f64 = splits.iter().map(|s| s.short_tokens + s.long_tokens).sum();
    Ok(splits
        .iter()
        .map(|s| {
            let (sw, lw) = (s.short_tokens, s.long_tokens * factor);
            let long_share = lw / (sw + lw);
            let domain_share = (s.short_tokens + s.long_tokens) / total;
            UpsampleRow {
                dataset: s.dataset.clone(),
                short_weight: sw,
                long_weight: lw,
                long_share,
                domain_share,
                long_share_of_mix: domain_share * long_share,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixEntry {
    pub dataset: String,
    pub languages: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealingMix {
    pub entries: Vec<MixEntry>,
}

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

impl AnnealingMix {
    pub fn published() -> Self {
        let e = |d: &str, l: &[&str], w: f64| MixEntry {
            dataset: d.into(),
            languages: l.iter().map(|s| s.to_string()).collect(),
            weight: w,
        };
        AnnealingMix {
            entries: vec![
                e("OpenWebMath", &["en"], 0.2),
                e("Pes2o", &["en"], 0.1),
                e("MathPile", &["en"], 0.25),
                e("StackMathQA", &["en"], 0.05),
                e("Flan", &["en"], 0.2),
                e("Wikipedia", &["en", "fr", "es", "it", "de"], 0.1),
                e("Aya", &["fr", "es", "it", "de"], 0.1),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidatedMix {
    pub weights: Vec<(String, f64)>,
    /// Weight per language, splitting multilingual datasets evenly.
    pub by_language: BTreeMap<String, f64>,
}

/// Checks that weights are non-negative and sum to one.
pub fn annealing_mix(mix: &AnnealingMix) -> Result<ValidatedMix, MixError> {
    if mix.entries.is_empty() {
        return Err(MixError::Weights { residual: -1.0 });
    }
    if let Some(e) = mix.entries.iter().find(|e| !(e.weight >= 0.0) || e.languages.is_empty()) {
        return Err(MixError::Upsample(format!("dataset {} needs a non-negative weight and a language", e.dataset)));
    }
    let sum: f64 = mix.entries.iter().map(|e| e.weight).sum();
    let residual = sum - 1.0;
    if residual.abs() > WEIGHT_TOLERANCE {
        return Err(MixError::Weights { residual });
    }
    let mut by_language: BTreeMap<String, f64> = BTreeMap::new();
    for e in &mix.entries {
        let share = e.weight / e.languages.len() as f64;
        for l in &e.languages {
            *by_language.entry(l.clone()).or_default() += share;
        }
    }
    Ok(ValidatedMix { weights: mix.entries.iter().map(|e| (e.dataset.clone(), e.weight)).collect(), by_language })
}
