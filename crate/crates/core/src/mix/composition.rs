use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};

use super::MixError;

/// One row of the composition table. Counts are in millions of documents
/// and billions of words, tokens and characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionRow {
    pub category: String,
    pub dataset: String,
    pub language: String,
    pub m_docs: Decimal,
    pub b_words: Decimal,
    pub b_tokens: Decimal,
    pub b_chars: Decimal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub m_docs: Decimal,
    pub b_words: Decimal,
    pub b_tokens: Decimal,
    pub b_chars: Decimal,
}

impl Totals {
    fn add(&mut self, r: &CompositionRow) {
        self.m_docs += r.m_docs;
        self.b_words += r.b_words;
        self.b_tokens += r.b_tokens;
        self.b_chars += r.b_chars;
    }

    /// Rounded to `dp` decimals, ties to even.
    pub fn rounded(&self, dp: u32) -> Totals {
        let r = |d: Decimal| d.round_dp_with_strategy(dp, RoundingStrategy::MidpointNearestEven);
        Totals { m_docs: r(self.m_docs), b_words: r(self.b_words), b_tokens: r(self.b_tokens), b_chars: r(self.b_chars) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompositionTotals {
    pub by_language: BTreeMap<String, Totals>,
    pub total: Totals,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompositionTable {
    pub rows: Vec<CompositionRow>,
}

const HEADER: [&str; 7] = ["category", "dataset", "language", "m_docs", "b_words", "b_tokens", "b_chars"];

impl CompositionTable {
    /// The published composition of the training corpus.
    pub fn bundled() -> Self {
        Self::from_reader(include_str!("../../data/composition.csv").as_bytes()).expect("bundled composition is valid")
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, MixError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != HEADER {
            return Err(MixError::Composition(format!("expected columns {}, found {}", HEADER.join(","), header.join(","))));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<Decimal, MixError> {
                let raw = rec.get(j).unwrap_or("").trim();
                let v = Decimal::from_str(raw)
                    .or_else(|_| Decimal::from_scientific(raw))
                    .map_err(|e| MixError::Composition(format!("row {}: column {}: {e}", i + 2, HEADER[j])))?;
                if v.is_sign_negative() && !v.is_zero() {
                    return Err(MixError::Composition(format!("row {}: negative {}", i + 2, HEADER[j])));
                }
                Ok(v)
            };
            rows.push(CompositionRow {
                category: rec.get(0).unwrap_or("").to_string(),
                dataset: rec.get(1).unwrap_or("").to_string(),
                language: rec.get(2).unwrap_or("").to_string(),
                m_docs: num(3)?,
                b_words: num(4)?,
                b_tokens: num(5)?,
                b_chars: num(6)?,
            });
        }
        Ok(CompositionTable { rows })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MixError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.category.clone(),
                r.dataset.clone(),
                r.language.clone(),
                r.m_docs.to_string(),
                r.b_words.to_string(),
                r.b_tokens.to_string(),
                r.b_chars.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Exact per-language and grand totals.
    pub fn aggregate(&self) -> CompositionTotals {
        let mut out = CompositionTotals::default();
        for r in &self.rows {
            out.by_language.entry(r.language.clone()).or_default().add(r);
            out.total.add(r);
        }
        out
    }
}
