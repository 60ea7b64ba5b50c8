use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use super::{CorpusError, LanguageTag, SourceId};

/// One corpus sample.
///
/// `language` and `source` are kept as the raw strings found on disk so that
/// invalid records can still be loaded and reported by [`validate_record`];
/// use [`DocumentRecord::language_tag`] and [`DocumentRecord::source_id`] for
/// the typed views. `quality_signals` and `extra` hold serialized JSON objects
/// exactly as published and are parsed on demand.
///
/// [`validate_record`]: super::validate_record
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DocumentRecord {
    pub text: String,
    pub language: String,
    pub source: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "embedded_json"
    )]
    pub quality_signals: Option<String>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "embedded_json"
    )]
    pub extra: Option<String>,
}

/// Accepts either the published form (a JSON document inside a string) or an
/// inline object, which is re-serialized into the string form.
fn embedded_json<'de, D>(deserializer: D) -> Result<Option<String>, D::Error>
where
    D: Deserializer<'de>,
{
    let value = Option::<Value>::deserialize(deserializer)?;
    Ok(match value {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(other) => Some(other.to_string()),
    })
}

impl DocumentRecord {
    pub fn new(
        text: impl Into<String>,
        language: impl Into<String>,
        source: impl Into<String>,
        id: impl Into<String>,
    ) -> Self {
        DocumentRecord {
            text: text.into(),
            language: language.into(),
            source: source.into(),
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn language_tag(&self) -> Result<LanguageTag, CorpusError> {
        LanguageTag::parse(&self.language)
    }

    pub fn source_id(&self) -> Result<SourceId, CorpusError> {
        self.source.parse()
    }

    /// Parsed `quality_signals`; `None` when the field is absent.
    pub fn quality_signals_map(&self) -> Result<Option<Map<String, Value>>, CorpusError> {
        parse_object("quality_signals", self.quality_signals.as_deref())
    }

    /// Parsed `extra`; `None` when the field is absent.
    pub fn extra_map(&self) -> Result<Option<Map<String, Value>>, CorpusError> {
        parse_object("extra", self.extra.as_deref())
    }

    /// Looks up one key of `extra`, treating a missing or unparsable field as absent.
    pub fn extra_value(&self, key: &str) -> Option<Value> {
        self.extra_map().ok().flatten().and_then(|mut m| m.remove(key))
    }

    pub fn set_extra(&mut self, map: &Map<String, Value>) {
        self.extra = Some(Value::Object(map.clone()).to_string());
    }

    pub fn set_quality_signals(&mut self, map: &Map<String, Value>) {
        self.quality_signals = Some(Value::Object(map.clone()).to_string());
    }

    /// One JSON line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

fn parse_object(field: &'static str, raw: Option<&str>) -> Result<Option<Map<String, Value>>, CorpusError> {
    let Some(raw) = raw else { return Ok(None) };
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Object(map)) => Ok(Some(map)),
        Ok(_) => Err(CorpusError::EmbeddedJson {
            field,
            message: "not a JSON object".into(),
        }),
        Err(e) => Err(CorpusError::EmbeddedJson {
            field,
            message: e.to_string(),
        }),
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_sample_parses() {
        let r = fixtures::american_stories();
        assert_eq!(r.source, "AmericanStories");
        assert_eq!(r.url.as_deref(), Some(""));
        assert_eq!(r.date.as_deref(), Some("1858-12-04"));
        let qs = r.quality_signals_map().unwrap().unwrap();
        assert_eq!(qs["word_count"], 116);
        assert_eq!(qs["fasttext_language"], "en");
        assert_eq!(qs["ccnet_perplexity"].as_f64(), Some(1389.5));
        let extra = r.extra_map().unwrap().unwrap();
        assert_eq!(extra["page"], "p3");
    }

    #[test]
    fn embedded_strings_survive_byte_for_byte() {
        let r = fixtures::american_stories();
        let back = DocumentRecord::from_line(&r.to_line()).unwrap();
        assert_eq!(back, r);
        assert!(r.quality_signals.as_deref().unwrap().starts_with("{\"char_count\": 670,"));
    }

    #[test]
    fn optional_fields_omitted_not_null() {
        let r = DocumentRecord::new("hi", "fr", "Wikipedia", "1");
        let line = r.to_line();
        assert_eq!(line, r#"{"text":"hi","language":"fr","source":"Wikipedia","id":"1"}"#);
        assert!(!line.contains("null"));
    }

    #[test]
    fn inline_objects_are_accepted() {
        let r = DocumentRecord::from_line(
            r#"{"text":"x","language":"fr","source":"HAL","id":"1","extra":{"ocr_score":95},"url":null}"#,
        )
        .unwrap();
        assert_eq!(r.extra.as_deref(), Some(r#"{"ocr_score":95}"#));
        assert_eq!(r.url, None);
    }
}
