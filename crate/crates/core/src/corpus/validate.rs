use std::collections::HashSet;

use serde_json::Value;

use super::{DocumentRecord, FilterDecision};

pub const RULE_MISSING_ID: &str = "missing_id";
pub const RULE_UNKNOWN_SOURCE: &str = "unknown_source";
pub const RULE_BAD_LANGUAGE: &str = "bad_language";
pub const RULE_CONTROL_CHARS: &str = "control_chars";
pub const RULE_BAD_QUALITY_SIGNALS: &str = "bad_quality_signals";
pub const RULE_BAD_EXTRA: &str = "bad_extra";
pub const RULE_DUPLICATE_ID: &str = "duplicate_id";

const GATE: &str = "validate";

/// Checks every record-level invariant. The first violation becomes the
/// decision's `rule_id`; `reason` lists all of them.
pub fn validate_record(record: &DocumentRecord) -> FilterDecision {
    finish(violations(record))
}

fn violations(record: &DocumentRecord) -> Vec<(&'static str, String)> {
    let mut found = Vec::new();
    if record.id.is_empty() {
        found.push((RULE_MISSING_ID, "id is empty".to_string()));
    }
    if let Err(e) = record.source_id() {
        found.push((RULE_UNKNOWN_SOURCE, e.to_string()));
    }
    if let Err(e) = record.language_tag() {
        found.push((RULE_BAD_LANGUAGE, e.to_string()));
    }
    if record.text.contains(['\r', '\0']) {
        found.push((RULE_CONTROL_CHARS, "text contains CR or NUL".to_string()));
    }
    match record.quality_signals_map() {
        Ok(Some(map)) => {
            if let Some((k, _)) = map.iter().find(|(_, v)| !is_scalar(v)) {
                found.push((
                    RULE_BAD_QUALITY_SIGNALS,
                    format!("quality signal {k:?} is not a scalar"),
                ));
            }
        }
        Ok(None) => {}
        Err(e) => found.push((RULE_BAD_QUALITY_SIGNALS, e.to_string())),
    }
    if let Err(e) = record.extra_map() {
        found.push((RULE_BAD_EXTRA, e.to_string()));
    }
    found
}

fn is_scalar(v: &Value) -> bool {
    matches!(v, Value::Number(_) | Value::String(_) | Value::Bool(_) | Value::Null)
}

fn finish(found: Vec<(&'static str, String)>) -> FilterDecision {
    match found.first() {
        None => FilterDecision::keep(GATE).with("violations", 0.0),
        Some((rule, _)) => {
            let reason = found
                .iter()
                .map(|(r, msg)| format!("{r}: {msg}"))
                .collect::<Vec<_>>()
                .join("; ");
            FilterDecision::drop(*rule, reason).with("violations", found.len() as f64)
        }
    }
}

/// Validates records of one input partition, adding the `(source, id)`
/// uniqueness check on top of the per-record invariants.
#[derive(Debug, Default)]
pub struct PartitionValidator {
    seen: HashSet<(String, String)>,
}

impl PartitionValidator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, record: &DocumentRecord) -> FilterDecision {
        let mut found = violations(record);
        let key = (record.source.clone(), record.id.clone());
        if !record.id.is_empty() && !self.seen.insert(key) {
            found.push((
                RULE_DUPLICATE_ID,
                format!("id {:?} already used in source {:?}", record.id, record.source),
            ));
        }
        finish(found)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::record::fixtures::american_stories;

    #[test]
    fn published_sample_is_valid() {
        let d = validate_record(&american_stories());
        assert!(d.is_keep(), "{d:?}");
    }

    #[test]
    fn empty_id_is_reported() {
        let mut r = american_stories();
        r.id.clear();
        let d = validate_record(&r);
        assert!(d.is_drop());
        assert_eq!(d.rule_id, RULE_MISSING_ID);
    }

    #[test]
    fn unknown_source_is_reported() {
        let mut r = american_stories();
        r.source = "FooCorpus".into();
        let d = validate_record(&r);
        assert_eq!(d.rule_id, RULE_UNKNOWN_SOURCE);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut r = american_stories();
        r.id.clear();
        r.source = "FooCorpus".into();
        r.language = "xx".into();
        r.text.push('\r');
        r.extra = Some("[1]".into());
        r.quality_signals = Some(r#"{"a": [1]}"#.into());
        let d = validate_record(&r);
        assert_eq!(d.measurements["violations"], 6.0);
        for rule in [
            RULE_MISSING_ID,
            RULE_UNKNOWN_SOURCE,
            RULE_BAD_LANGUAGE,
            RULE_CONTROL_CHARS,
            RULE_BAD_QUALITY_SIGNALS,
            RULE_BAD_EXTRA,
        ] {
            assert!(d.reason.contains(rule), "{rule} missing from {}", d.reason);
        }
    }

    #[test]
    fn duplicates_within_a_partition() {
        let mut v = PartitionValidator::new();
        let a = DocumentRecord::new("x", "fr", "HAL", "1");
        let b = DocumentRecord::new("y", "fr", "Theses", "1");
        assert!(v.check(&a).is_keep());
        assert!(v.check(&b).is_keep());
        let d = v.check(&a);
        assert_eq!(d.rule_id, RULE_DUPLICATE_ID);
    }
}
