use std::io::Write;

use rust_decimal::Decimal;

use super::{CompositionTable, MixError};

/// Epoch multiplier for a dataset, optionally restricted to one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochRule {
    pub dataset: String,
    pub language: Option<String>,
    pub multiplier: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EpochTable {
    pub rules: Vec<EpochRule>,
}

fn d(s: &str) -> Decimal {
    s.parse().expect("literal decimal")
}

impl EpochTable {
    /// Epochs per dataset of the main pretraining phase.
    pub fn published() -> Self {
        let groups: [(&str, &[(&str, Option<&str>)]); 5] = [
            ("1", &[("Eurovoc", Some("en")), ("GallicaPress", None), ("Pile (FreeLaw)", None), ("RedPajama", None)]),
            ("1.5", &[("AmericanStories", None), ("FineWebEdu", None)]),
            (
                "2",
                &[
                    ("AmendementsParlement", None),
                    ("Claire", None),
                    ("DiscoursPublics", None),
                    ("Europarl", None),
                    ("Eurovoc", Some("es")),
                    ("Eurovoc", Some("it")),
                    ("Eurovoc", Some("de")),
                    ("GallicaMonographies", None),
                    ("Gutenberg", Some("fr")),
                    ("HAL", None),
                    ("InterventionsParlement", None),
                    ("OpenData", None),
                    ("LEGI", None),
                    ("Persee", None),
                    ("OpenEdition", None),
                    ("QuestionsEcritesParlement", None),
                    ("Stac", None),
                    ("TheStack", None),
                    ("Theses", None),
                    ("YouTube", None),
                ],
            ),
            (
                "2.5",
                &[
                    ("Pile (NIH_ExPorter)", None),
                    ("Pile (PhilPapers)", None),
                    ("Pile (StackExchange)", None),
                    ("Pile (Ubuntu_IRC)", None),
                    ("Pile (USPTO_Backgrounds)", None),
                    ("PeS2o", None),
                ],
            ),
            (
                "3",
                &[
                    ("Gutenberg", Some("de")),
                    ("Gutenberg", Some("en")),
                    ("Gutenberg", Some("es")),
                    ("Gutenberg", Some("it")),
                    ("Pile (DM_Mathematics)", None),
                    ("Wikipedia", None),
                    ("Wikisource", None),
                    ("Wiktionary", None),
                    ("CroissantAligned", None),
                    ("EuroparlAligned", None),
                    ("MathPile", None),
                ],
            ),
        ];
        let rules = groups
            .iter()
            .flat_map(|(m, ds)| {
                ds.iter().map(move |(name, lang)| EpochRule {
                    dataset: name.to_string(),
                    language: lang.map(str::to_string),
                    multiplier: d(m),
                })
            })
            .collect();
        EpochTable { rules }
    }

    /// A language-specific rule takes precedence over a dataset-wide one.
    pub fn multiplier(&self, dataset: &str, language: &str) -> Option<Decimal> {
        let specific = self.rules.iter().find(|r| r.dataset == dataset && r.language.as_deref() == Some(language));
        specific
            .or_else(|| self.rules.iter().find(|r| r.dataset == dataset && r.language.is_none()))
            .map(|r| r.multiplier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRow {
    pub dataset: String,
    pub language: String,
    pub raw_tokens: Decimal,
    pub multiplier: Decimal,
    pub effective_tokens: Decimal,
    /// Fraction of the effective total.
    pub share: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectiveComposition {
    pub rows: Vec<PlanRow>,
    pub raw_total: Decimal,
    pub effective_total: Decimal,
}

impl EffectiveComposition {
    /// CSV with columns `dataset,language,raw_tokens,multiplier,effective_tokens,share`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MixError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dataset", "language", "raw_tokens", "multiplier", "effective_tokens", "share"])?;
        for r in &self.rows {
            out.write_record([
                r.dataset.clone(),
                r.language.clone(),
                r.raw_tokens.to_string(),
                r.multiplier.normalize().to_string(),
                r.effective_tokens.normalize().to_string(),
                r.share.round_dp(6).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Multiplies each row's token count by its epoch multiplier.
pub fn apply_epochs(table: &CompositionTable, epochs: &EpochTable) -> Result<EffectiveComposition, MixError> {
    let mut rows = Vec::with_capacity(table.rows.len());
    for r in &table.rows {
        let m = epochs
            .multiplier(&r.dataset, &r.language)
            .ok_or_else(|| MixError::UnmatchedDataset { dataset: r.dataset.clone(), language: r.language.clone() })?;
        rows.push(PlanRow {
            dataset: r.dataset.clone(),
            language: r.language.clone(),
            raw_tokens: r.b_tokens,
            multiplier: m,
            effective_tokens: r.b_tokens * m,
            share: Decimal::ZERO,
        });
    }
    let raw_total: Decimal = rows.iter().map(|r| r.raw_tokens).sum();
    let effective_total: Decimal = rows.iter().map(|r| r.effective_tokens).sum();
    if !effective_total.is_zero() {
        for r in &mut rows {
            r.share = r.effective_tokens / effective_total;
        }
    }
    Ok(EffectiveComposition { rows, raw_total, effective_total })
}
