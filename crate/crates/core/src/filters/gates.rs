use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{rules, FilterError};
use crate::corpus::{signal_keys, DocumentRecord, FilterDecision, IsoCode, SourceId};
use crate::langid::LanguageIdentifier;
use crate::lm::{KnModel, PerplexityMode};

/// Per-source perplexity ceilings; documents scoring above are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdTable(BTreeMap<SourceId, f64>);

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable(BTreeMap::from([
            (SourceId::AmericanStories, 2310.0),
            (SourceId::Eurovoc, 1500.0),
            (SourceId::Hal, 930.0),
            (SourceId::Theses, 2000.0),
        ]))
    }
}

impl ThresholdTable {
    pub fn new(entries: BTreeMap<SourceId, f64>) -> Result<Self, FilterError> {
        let t = ThresholdTable(entries);
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        for (s, v) in &self.0 {
            if !(v.is_finite() && *v > 0.0) {
                return Err(FilterError::Config(format!("threshold for {s} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, source: SourceId) -> Option<f64> {
        self.0.get(&source).copied()
    }

    pub fn set(&mut self, source: SourceId, threshold: f64) {
        self.0.insert(source, threshold);
    }

    pub fn iter(&self) -> impl Iterator<Item = (SourceId, f64)> + '_ {
        self.0.iter().map(|(s, v)| (*s, *v))
    }
}

/// Keep iff `ppl <= threshold`.
pub fn threshold_decision(ppl: f64, threshold: f64) -> FilterDecision {
    let d = if ppl <= threshold {
        FilterDecision::keep(rules::PERPLEXITY_THRESHOLD)
    } else {
        FilterDecision::drop(
            rules::PERPLEXITY_THRESHOLD,
            format!("perplexity {ppl} above threshold {threshold}"),
        )
    };
    d.with("perplexity", ppl).with("threshold", threshold)
}

/// Scores the document and applies its source's threshold.
pub fn threshold_gate(
    doc: &DocumentRecord,
    model: &KnModel,
    table: &ThresholdTable,
    mode: PerplexityMode,
) -> Result<FilterDecision, FilterError> {
    let source = doc
        .source_id()
        .ok()
        .and_then(|s| table.get(s).map(|t| (s, t)));
    let Some((_, threshold)) = source else {
        return Err(FilterError::NoThreshold(doc.source.clone()));
    };
    let score = model.perplexity(&doc.text, mode)?;
    Ok(with_mode(threshold_decision(score.value, threshold), mode).with("tokens", score.token_count as f64))
}

fn with_mode(d: FilterDecision, mode: PerplexityMode) -> FilterDecision {
    d.with("mean_of_lines", f64::from(u8::from(mode == PerplexityMode::MeanOfLines)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub language_confidence_min: f64,
    pub perplexity_low: f64,
    pub perplexity_high: f64,
    pub ocr_score_min: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            language_confidence_min: 0.65,
            perplexity_low: 10.0,
            perplexity_high: 1000.0,
            ocr_score_min: 90.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(0.0..=1.0).contains(&self.language_confidence_min) {
            return Err(FilterError::Config("language_confidence_min must lie in [0, 1]".into()));
        }
        if !(self.perplexity_low < self.perplexity_high) {
            return Err(FilterError::Config("perplexity band needs low < high".into()));
        }
        if !(0.0..=100.0).contains(&self.ocr_score_min) {
            return Err(FilterError::Config("ocr_score_min must lie in [0, 100]".into()));
        }
        Ok(())
    }
}

/// Keep iff `low <= ppl <= high`.
pub fn perplexity_band_gate(ppl: f64, cfg: &GateConfig) -> FilterDecision {
    let d = if ppl < cfg.perplexity_low {
        FilterDecision::drop(rules::PERPLEXITY_LOW, format!("perplexity {ppl} below {}", cfg.perplexity_low))
    } else if ppl > cfg.perplexity_high {
        FilterDecision::drop(rules::PERPLEXITY_HIGH, format!("perplexity {ppl} above {}", cfg.perplexity_high))
    } else {
        FilterDecision::keep("perplexity_band")
    };
    d.with("perplexity", ppl)
}

/// French, confidently identified, inside the perplexity band.
pub fn gallica_gate_v11(lang: Option<IsoCode>, lang_confidence: f64, ppl: f64, cfg: &GateConfig) -> FilterDecision {
    let d = if lang != Some(IsoCode::Fr) {
        FilterDecision::drop(
            rules::LANGUAGE,
            format!("language {} is not fr", lang.map_or("unknown", |l| l.as_str())),
        )
    } else if lang_confidence < cfg.language_confidence_min {
        FilterDecision::drop(
            rules::LANG_CONFIDENCE,
            format!("confidence {lang_confidence} below {}", cfg.language_confidence_min),
        )
    } else {
        let band = perplexity_band_gate(ppl, cfg);
        if band.is_drop() {
            return band.with("lang_confidence", lang_confidence);
        }
        FilterDecision::keep("gallica_v11")
    };
    d.with("lang_confidence", lang_confidence).with("perplexity", ppl)
}

/// How documents are cut into independently gated chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkMode {
    /// Blank-line separated paragraphs.
    Paragraph,
    /// Consecutive lines grouped up to roughly this many characters.
    Chars(usize),
}

impl Default for ChunkMode {
    fn default() -> Self {
        ChunkMode::Paragraph
    }
}

/// Splits text into chunks whose concatenation with `separator` gives back
/// the non-blank content.
pub fn chunk_text(text: &str, mode: ChunkMode) -> Vec<String> {
    match mode {
        ChunkMode::Paragraph => text
            .split("\n\n")
            .map(|p| p.trim_matches('\n'))
            .filter(|p| !p.trim().is_empty())
            .map(str::to_string)
            .collect(),
        ChunkMode::Chars(limit) => {
            let mut out = Vec::new();
            let mut cur = String::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if !cur.is_empty() && cur.len() + line.len() + 1 > limit {
                    out.push(std::mem::take(&mut cur));
                }
                if !cur.is_empty() {
                    cur.push('\n');
                }
                cur.push_str(line);
            }
            if !cur.is_empty() {
                out.push(cur);
            }
            out
        }
    }
}

/// Applies the v1.1 chunk gate to every chunk of a document and keeps the
/// surviving chunks. Returns `None` when no chunk survives.
pub fn gallica_filter_document(
    doc: &DocumentRecord,
    model: &KnModel,
    langid: &LanguageIdentifier,
    cfg: &GateConfig,
    chunking: ChunkMode,
) -> (Option<DocumentRecord>, Vec<FilterDecision>) {
    let mut kept = Vec::new();
    let mut decisions = Vec::new();
    for chunk in chunk_text(&doc.text, chunking) {
        let guess = langid.identify(&chunk);
        let (lang, conf) = guess.map_or((None, 0.0), |g| (Some(g.language), g.confidence));
        let d = match model.perplexity(&chunk, PerplexityMode::Document) {
            Ok(s) => gallica_gate_v11(lang, conf, s.value, cfg),
            Err(e) => FilterDecision::drop(rules::PERPLEXITY_LOW, e.to_string()),
        };
        if d.is_keep() {
            kept.push(chunk);
        }
        decisions.push(d);
    }
    if kept.is_empty() {
        return (None, decisions);
    }
    let separator = match chunking {
        ChunkMode::Paragraph => "\n\n",
        ChunkMode::Chars(_) => "\n",
    };
    let mut out = doc.clone();
    out.text = kept.join(separator);
    (Some(out), decisions)
}

/// Keep iff `extra.ocr_score >= ocr_score_min` (0-100 scale).
pub fn ocr_score_gate_v12(doc: &DocumentRecord, cfg: &GateConfig) -> Result<FilterDecision, FilterError> {
    let score = doc
        .extra_value("ocr_score")
        .and_then(|v| v.as_f64().or_else(|| v.as_str().and_then(|s| s.trim().parse().ok())))
        .ok_or_else(|| FilterError::MissingField { id: doc.id.clone(), field: "extra.ocr_score" })?;
    let d = if score >= cfg.ocr_score_min {
        FilterDecision::keep(rules::OCR_SCORE)
    } else {
        FilterDecision::drop(rules::OCR_SCORE, format!("ocr score {score} below {}", cfg.ocr_score_min))
    };
    Ok(d.with("ocr_score", score))
}

/// Web perplexity band. Uses the model when given, otherwise the
/// precomputed `ccnet_perplexity` quality signal.
pub fn web_perplexity_band(
    doc: &DocumentRecord,
    model: Option<&KnModel>,
    cfg: &GateConfig,
) -> Result<FilterDecision, FilterError> {
    let ppl = match model {
        Some(m) => m.perplexity(&doc.text, PerplexityMode::Document)?.value,
        None => doc
            .quality_signals_map()?
            .and_then(|m| m.get(signal_keys::CCNET_PERPLEXITY).and_then(|v| v.as_f64()))
            .ok_or_else(|| FilterError::MissingField {
                id: doc.id.clone(),
                field: "quality_signals.ccnet_perplexity",
            })?,
    };
    Ok(perplexity_band_gate(ppl, cfg))
}
