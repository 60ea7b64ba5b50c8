//! Needle-in-a-haystack probes: case generation, response scoring and
//! heatmap summaries. No inference happens here; responses come from outside.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tokenizer::TokenizerModel;

pub const NEEDLE: &str = "The best thing to do in San Francisco is eat a sandwich and sit in Dolores Park on a sunny day.";
pub const EXPECTED: &str = "eat a sandwich and sit in Dolores Park on a sunny day.";
pub const QUESTION: &str = "What is the best thing to do in San Francisco?\nAnswer: The best thing to do in San Francisco is";
pub const DEFAULT_FILLER: &str = include_str!("../data/niah_filler.txt");
pub const LENGTH_TOLERANCE: f64 = 0.02;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Words ignored when scoring.
pub const STOP_WORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "do", "for", "from", "in", "is", "it", "of", "on", "or",
    "that", "the", "their", "then", "there", "this", "to", "was", "were", "with",
];

#[derive(Debug, thiserror::Error)]
pub enum NiahError {
    #[error("filler has no usable sentences")]
    FillerTooShort,
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("could not reach {target} tokens within tolerance (closest {measured})")]
    Length { target: usize, measured: usize },
    #[error("missing heatmap cells (length, depth): {0:?}")]
    MissingCells(Vec<(usize, f64)>),
    #[error("response for unknown case {0}")]
    UnknownCase(String),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiahCase {
    pub case_id: String,
    pub length: usize,
    pub depth: f64,
    pub prompt: String,
    pub expected: String,
    /// Tokenizer-measured prompt length.
    #[serde(default)]
    pub measured_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NiahGrid {
    pub lengths: Vec<usize>,
    pub depths: Vec<f64>,
}

impl Default for NiahGrid {
    /// Twelve log-spaced lengths from 1k to 36k tokens, depths 0 to 1 by 0.1.
    fn default() -> Self {
        let lengths = (0..12).map(|i| (1000.0 * 36f64.powf(i as f64 / 11.0)).round() as usize).collect();
        let depths = (0..=10).map(|i| i as f64 / 10.0).collect();
        NiahGrid { lengths, depths }
    }
}

impl NiahGrid {
    pub fn validate(&self, model: &TokenizerModel) -> Result<(), NiahError> {
        if self.lengths.is_empty() || self.depths.is_empty() {
            return Err(NiahError::Grid("empty axis".into()));
        }
        if !self.lengths.windows(2).all(|w| w[0] < w[1]) || !self.depths.windows(2).all(|w| w[0] < w[1]) {
            return Err(NiahError::Grid("axes must be strictly ascending".into()));
        }
        if self.depths.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(NiahError::Grid("depths must lie in [0, 1]".into()));
        }
        let floor = fixed_tokens(model);
        if self.lengths[0] < floor {
            return Err(NiahError::Grid(format!("length {} below needle plus question ({floor} tokens)", self.lengths[0])));
        }
        Ok(())
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

/// Lower-cased words of `text` that are not stop words.
pub fn content_words(text: &str) -> BTreeSet<String> {
    words(text).filter(|w| !STOP_WORDS.contains(&w.as_str())).collect()
}

/// Splits filler into sentences and drops any that share a content word with
/// the needle or question.
pub fn filler_sentences(filler: &str) -> Vec<String> {
    let banned: BTreeSet<String> = content_words(NEEDLE).into_iter().chain(content_words(QUESTION)).collect();
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = filler.chars().peekable();
    while let Some(c) = chars.next() {
        cur.push(c);
        let end = matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace());
        if end || chars.peek().is_none() {
            let s = cur.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() && content_words(&s).is_disjoint(&banned) {
                out.push(s);
            }
            cur.clear();
        }
    }
    out
}

fn assemble(sentences: &[&str], needle_at: usize) -> String {
    let mut parts: Vec<&str> = sentences.to_vec();
    parts.insert(needle_at, NEEDLE);
    format!("{}\n\n{QUESTION}", parts.join(" "))
}

fn fixed_tokens(model: &TokenizerModel) -> usize {
    model.encode(&assemble(&[], 0)).len()
}

/// Builds one probe of `length` tokens with the needle at the sentence
/// boundary nearest `depth` of the haystack. Filler sentences are cycled
/// from a seed-chosen starting point.
pub fn build_case(
    filler: &[String],
    length: usize,
    depth: f64,
    model: &TokenizerModel,
    seed: u64,
) -> Result<NiahCase, NiahError> {
    if filler.is_empty() {
        return Err(NiahError::FillerTooShort);
    }
    if !(0.0..=1.0).contains(&depth) {
        return Err(NiahError::Grid(format!("depth {depth} outside [0, 1]")));
    }
    let fixed = fixed_tokens(model);
    let offset = ChaCha8Rng::seed_from_u64(seed).gen_range(0..filler.len());
    let costs: Vec<usize> = filler.iter().map(|s| model.encode(&format!("{s} ")).len()).collect();

    let mut picked: Vec<usize> = Vec::new();
    let mut budget = fixed;
    while budget < length {
        let i = (offset + picked.len()) % filler.len();
        if budget + costs[i] / 2 > length {
            break;
        }
        budget += costs[i];
        picked.push(i);
    }

    let tolerance = (length as f64 * LENGTH_TOLERANCE).floor() as usize;
    let mut best: Option<(usize, NiahCase)> = None;
    // Per-sentence costs are an estimate; correct with full measurements.
    for _ in 0..16 {
        let sentences: Vec<&str> = picked.iter().map(|&i| filler[i].as_str()).collect();
        let mut cum = vec![0usize];
        for &i in &picked {
            cum.push(cum.last().unwrap() + costs[i]);
        }
        let target = depth * *cum.last().unwrap() as f64;
        let needle_at = (0..cum.len())
            .min_by(|&a, &b| (cum[a] as f64 - target).abs().total_cmp(&(cum[b] as f64 - target).abs()).then(a.cmp(&b)))
            .unwrap();
        let prompt = assemble(&sentences, needle_at);
        let measured = model.encode(&prompt).len();
        let err = measured.abs_diff(length);
        let case = NiahCase {
            case_id: case_id(length, depth),
            length,
            depth,
            prompt,
            expected: EXPECTED.to_string(),
            measured_tokens: measured,
        };
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, case));
        }
        if err <= tolerance {
            break;
        }
        // Move by the whole measured error, at least one sentence per step.
        if measured > length {
            let excess = measured - length;
            let mut removed = 0;
            while let Some(&last) = picked.last() {
                if removed > 0 && removed + costs[last] / 2 > excess {
                    break;
                }
                removed += costs[last];
                picked.pop();
            }
            if removed == 0 {
                break;
            }
        } else {
            let deficit = length - measured;
            let mut added = 0;
            loop {
                let i = (offset + picked.len()) % filler.len();
                if added > 0 && added + costs[i] / 2 > deficit {
                    break;
                }
                added += costs[i];
                picked.push(i);
            }
        }
    }
    let (err, case) = best.expect("at least one attempt");
    if err > tolerance {
        return Err(NiahError::Length { target: length, measured: case.measured_tokens });
    }
    Ok(case)
}

pub fn case_id(length: usize, depth: f64) -> String {
    format!("L{length}_d{depth:.2}")
}

/// Every grid cell, lengths outer, depths inner. Deterministic in
/// (filler, grid, seed).
pub fn generate_grid(filler: &str, grid: &NiahGrid, model: &TokenizerModel, seed: u64) -> Result<Vec<NiahCase>, NiahError> {
    grid.validate(model)?;
    let sentences = filler_sentences(filler);
    let cells: Vec<(usize, usize)> =
        (0..grid.lengths.len()).flat_map(|li| (0..grid.depths.len()).map(move |di| (li, di))).collect();
    cells
        .into_par_iter()
        .map(|(li, di)| {
            let cell_seed = seed ^ ((li as u64) << 32 | di as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            build_case(&sentences, grid.lengths[li], grid.depths[di], model, cell_seed)
        })
        .collect()
}

/// Fraction of the expected content words present in the response.
pub fn score(response: &str, expected: &str) -> f64 {
    let want = content_words(expected);
    if want.is_empty() {
        return 1.0;
    }
    let got: BTreeSet<String> = words(response).collect();
    want.iter().filter(|w| got.contains(*w)).count() as f64 / want.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiahResponse {
    pub case_id: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub length: usize,
    pub depth: f64,
    pub score: f64,
}

/// Scores responses against their cases.
pub fn score_responses(cases: &[NiahCase], responses: &[NiahResponse]) -> Result<Vec<CellResult>, NiahError> {
    let by_id: HashMap<&str, &NiahCase> = cases.iter().map(|c| (c.case_id.as_str(), c)).collect();
    responses
        .iter()
        .map(|r| {
            let c = by_id.get(r.case_id.as_str()).ok_or_else(|| NiahError::UnknownCase(r.case_id.clone()))?;
            Ok(CellResult { length: c.length, depth: c.depth, score: score(&r.response, &c.expected) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub lengths: Vec<usize>,
    pub depths: Vec<f64>,
    /// Mean score, `cells[length][depth]`.
    pub cells: Vec<Vec<f64>>,
}

fn depth_key(d: f64) -> i64 {
    (d * 1e6).round() as i64
}

/// Averages results per (length, depth) cell of the grid.
pub fn heatmap(grid: &NiahGrid, results: &[CellResult]) -> Result<Heatmap, NiahError> {
    let mut sums: BTreeMap<(usize, i64), (f64, usize)> = BTreeMap::new();
    for r in results {
        let e = sums.entry((r.length, depth_key(r.depth))).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    let mut missing = Vec::new();
    let cells = grid
        .lengths
        .iter()
        .map(|&l| {
            grid.depths
                .iter()
                .map(|&d| match sums.get(&(l, depth_key(d))) {
                    Some(&(s, n)) => s / n as f64,
                    None => {
                        missing.push((l, d));
                        f64::NAN
                    }
                })
                .collect()
        })
        .collect();
    if !missing.is_empty() {
        return Err(NiahError::MissingCells(missing));
    }
    Ok(Heatmap { lengths: grid.lengths.clone(), depths: grid.depths.clone(), cells })
}

impl Heatmap {
    /// Largest length whose minimum score over depths reaches `threshold`.
    pub fn effective_window(&self, threshold: f64) -> Option<usize> {
        self.lengths
            .iter()
            .zip(&self.cells)
            .filter(|(_, row)| row.iter().copied().fold(f64::INFINITY, f64::min) >= threshold)
            .map(|(&l, _)| l)
            .max()
    }

    /// Rows are lengths, columns depths.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), NiahError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["length".to_string()];
        header.extend(self.depths.iter().map(|d| format!("{d}")));
        out.write_record(&header)?;
        for (l, row) in self.lengths.iter().zip(&self.cells) {
            let mut rec = vec![l.to_string()];
            rec.extend(row.iter().map(|s| format!("{s:.4}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<(), NiahError> {
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| NiahError::Json { line: 0, source: e })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>, NiahError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| NiahError::Json { line: i + 1, source: e })?);
    }
    Ok(out)
}

/// Stand-in model for testing the harness: answers correctly when the
/// prompt has at most `window` tokens and returns nothing otherwise.
pub fn synthetic_responder(case: &NiahCase, window: usize) -> NiahResponse {
    let response = if case.measured_tokens <= window { case.expected.clone() } else { String::new() };
    NiahResponse { case_id: case.case_id.clone(), response }
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use proptest::prelude::*;

    use super::*;
    use crate::tokenizer::{train_bpe, TrainConfig};

    fn model() -> &'static TokenizerModel {
        static M: OnceLock<TokenizerModel> = OnceLock::new();
        M.get_or_init(|| train_bpe([DEFAULT_FILLER, NEEDLE, QUESTION], &TrainConfig::new(800)).unwrap())
    }

    #[test]
    fn needle_has_seven_content_words() {
        let w: Vec<String> = content_words(EXPECTED).into_iter().collect();
        assert_eq!(w, ["day", "dolores", "eat", "park", "sandwich", "sit", "sunny"]);
    }

    #[test]
    fn scoring_examples() {
        assert_eq!(score(EXPECTED, EXPECTED), 1.0);
        assert_eq!(score("", EXPECTED), 0.0);
        assert!((score("Dolores Park, sandwich", EXPECTED) - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn depth_extremes() {
        let f = filler_sentences(DEFAULT_FILLER);
        let first = build_case(&f, 1000, 0.0, model(), 1).unwrap();
        assert!(first.prompt.starts_with(NEEDLE));
        let last = build_case(&f, 1000, 1.0, model(), 1).unwrap();
        assert!(last.prompt.ends_with(&format!("{NEEDLE}\n\n{QUESTION}")));
    }

    #[test]
    fn length_4096_within_two_percent() {
        let f = filler_sentences(DEFAULT_FILLER);
        let c = build_case(&f, 4096, 0.5, model(), 7).unwrap();
        let n = model().encode(&c.prompt).len();
        assert!((4014..=4178).contains(&n), "{n}");
        assert_eq!(c.prompt.matches(NEEDLE).count(), 1);
    }

    #[test]
    fn filler_is_screened() {
        let f = filler_sentences("A sunny walk. The clock ticks. We eat soup.");
        assert_eq!(f, ["The clock ticks."]);
        assert!(matches!(build_case(&[], 1000, 0.5, model(), 0), Err(NiahError::FillerTooShort)));
    }

    #[test]
    fn default_grid_shape() {
        let g = NiahGrid::default();
        assert_eq!(g.lengths.len(), 12);
        assert_eq!(g.lengths[0], 1000);
        assert_eq!(*g.lengths.last().unwrap(), 36000);
        assert_eq!(g.depths.len(), 11);
    }

    #[test]
    fn heatmap_rules() {
        let grid = NiahGrid { lengths: vec![1000, 2000, 4000], depths: vec![0.0, 1.0] };
        let all: Vec<CellResult> = grid
            .lengths
            .iter()
            .flat_map(|&l| grid.depths.iter().map(move |&d| CellResult { length: l, depth: d, score: 1.0 }))
            .collect();
        assert_eq!(heatmap(&grid, &all).unwrap().effective_window(0.8), Some(4000));
        let mut one_bad = all.clone();
        one_bad[5].score = 0.0;
        assert_eq!(heatmap(&grid, &one_bad).unwrap().effective_window(0.8), Some(2000));
        match heatmap(&grid, &all[..4]) {
            Err(NiahError::MissingCells(m)) => assert_eq!(m, vec![(4000, 0.0), (4000, 1.0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let grid = NiahGrid { lengths: vec![1000, 1500], depths: vec![0.0, 0.5, 1.0] };
        let a = generate_grid(DEFAULT_FILLER, &grid, model(), 3).unwrap();
        let b = generate_grid(DEFAULT_FILLER, &grid, model(), 3).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_jsonl(&a, &mut buf).unwrap();
        let back: Vec<NiahCase> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #[test]
        fn score_is_monotone(extra in prop::sample::subsequence(vec!["eat", "sandwich", "sit", "Dolores", "Park", "sunny", "day"], 0..7), base in "[a-z ]{0,20}") {
            let before = score(&base, EXPECTED);
            let after = score(&format!("{base} {}", extra.join(" ")), EXPECTED);
            prop_assert!(after >= before);
            prop_assert!((0.0..=1.0).contains(&after));
        }
    }
}
