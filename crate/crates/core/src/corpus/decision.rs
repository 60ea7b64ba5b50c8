use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Drop,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Keep => "keep",
            Verdict::Drop => "drop",
        })
    }
}

/// Keep/drop verdict of one gate, with the signals it looked at.
///
/// For keep verdicts `rule_id` names the gate that passed the document; for
/// drop verdicts it names the rule that fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub verdict: Verdict,
    pub rule_id: String,
    pub measurements: BTreeMap<String, f64>,
    pub reason: String,
}

impl FilterDecision {
    pub fn keep(gate: impl Into<String>) -> Self {
        FilterDecision {
            verdict: Verdict::Keep,
            rule_id: gate.into(),
            measurements: BTreeMap::new(),
            reason: String::new(),
        }
    }

    pub fn drop(rule_id: impl Into<String>, reason: impl Into<String>) -> Self {
        FilterDecision {
            verdict: Verdict::Drop,
            rule_id: rule_id.into(),
            measurements: BTreeMap::new(),
            reason: reason.into(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.measurements.insert(name.to_string(), value);
        self
    }

    pub fn with_all(mut self, measurements: &BTreeMap<String, f64>) -> Self {
        self.measurements
            .extend(measurements.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }

    pub fn is_keep(&self) -> bool {
        self.verdict == Verdict::Keep
    }

    pub fn is_drop(&self) -> bool {
        self.verdict == Verdict::Drop
    }
}
