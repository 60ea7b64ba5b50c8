use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FilterError;
use crate::corpus::{DocumentRecord, FilterDecision, Verdict};

/// One line of a filter report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub source: String,
    pub id: String,
    pub verdict: Verdict,
    pub rule_id: String,
    pub measurements: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub reason: String,
}

impl DecisionRecord {
    pub fn new(doc: &DocumentRecord, decision: &FilterDecision) -> Self {
        DecisionRecord {
            source: doc.source.clone(),
            id: doc.id.clone(),
            verdict: decision.verdict,
            rule_id: decision.rule_id.clone(),
            measurements: decision.measurements.clone(),
            reason: decision.reason.clone(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("decision serialization is infallible")
    }
}

/// Keep/drop counts per rule id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSummary {
    counts: BTreeMap<String, (u64, u64)>,
}

impl RuleSummary {
    pub fn add(&mut self, decision: &FilterDecision) {
        let e = self.counts.entry(decision.rule_id.clone()).or_default();
        match decision.verdict {
            Verdict::Keep => e.0 += 1,
            Verdict::Drop => e.1 += 1,
        }
    }

    pub fn dropped(&self, rule: &str) -> u64 {
        self.counts.get(rule).map_or(0, |c| c.1)
    }

    pub fn kept(&self, rule: &str) -> u64 {
        self.counts.get(rule).map_or(0, |c| c.0)
    }

    pub fn total_dropped(&self) -> u64 {
        self.counts.values().map(|c| c.1).sum()
    }

    /// Drop counts per rule, omitting rules that never dropped.
    pub fn drops_by_rule(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .filter(|(_, c)| c.1 > 0)
            .map(|(k, c)| (k.clone(), c.1))
            .collect()
    }

    /// CSV with columns `rule_id,kept,dropped`, sorted by rule id.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FilterError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rule_id", "kept", "dropped"]).map_err(csv_err)?;
        for (rule, (k, d)) in &self.counts {
            out.write_record([rule.as_str(), &k.to_string(), &d.to_string()]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> FilterError {
    FilterError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_line_and_summary() {
        let doc = DocumentRecord::new("t", "fr", "HAL", "42");
        let d = FilterDecision::drop("perplexity_threshold", "too high").with("perplexity", 931.0);
        let line = DecisionRecord::new(&doc, &d).to_line();
        assert_eq!(
            line,
            r#"{"source":"HAL","id":"42","verdict":"drop","rule_id":"perplexity_threshold","measurements":{"perplexity":931.0},"reason":"too high"}"#
        );
        let back: DecisionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.rule_id, "perplexity_threshold");

        let mut s = RuleSummary::default();
        s.add(&d);
        s.add(&d);
        s.add(&FilterDecision::keep("perplexity_threshold"));
        s.add(&FilterDecision::drop("c4_curly_brace", ""));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rule_id,kept,dropped\nc4_curly_brace,0,1\nperplexity_threshold,1,2\n"
        );
        assert_eq!(s.total_dropped(), 3);
    }
}
