use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::counts::NgramCounts;
use super::segment::{lines, SubwordSegmenter};
use super::{LmError, BOS, EOS, UNK};
use crate::tokenizer::TokenizerModel;

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
pub const MAX_ORDER: usize = 6;

/// One stored n-gram: natural-log probability and natural-log backoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub log_prob: f64,
    pub log_backoff: f64,
}

/// Interpolated Kneser-Ney model in backoff form.
#[derive(Debug, Clone)]
pub struct KnModel {
    order: usize,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    discounts: Vec<f64>,
    tables: Vec<HashMap<Vec<u32>, Entry>>,
    segmenter: SubwordSegmenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerplexityMode {
    /// All lines pooled into one average.
    #[default]
    Document,
    /// Arithmetic mean of per-line perplexities.
    MeanOfLines,
}

impl PerplexityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PerplexityMode::Document => "document",
            PerplexityMode::MeanOfLines => "mean-of-lines",
        }
    }
}

impl std::str::FromStr for PerplexityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "document" => Ok(PerplexityMode::Document),
            "mean-of-lines" => Ok(PerplexityMode::MeanOfLines),
            _ => Err(format!("unknown perplexity mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityScore {
    pub value: f64,
    pub token_count: usize,
    pub mode: PerplexityMode,
}

/// Discount from count-of-counts; zero when it cannot be estimated.
pub fn discount(n1: u64, n2: u64) -> f64 {
    if n2 == 0 || n1 + 2 * n2 == 0 {
        0.0
    } else {
        n1 as f64 / (n1 + 2 * n2) as f64
    }
}

/// Counts n-grams over every line of every text.
pub fn count_corpus<S: AsRef<str> + Sync>(
    texts: &[S],
    order: usize,
    segmenter: &SubwordSegmenter,
) -> NgramCounts {
    texts
        .par_chunks(64)
        .map(|chunk| {
            let mut c = NgramCounts::new(order);
            for t in chunk {
                for line in lines(t.as_ref()) {
                    c.add_sequence(&segmenter.segment(line));
                }
            }
            c
        })
        .reduce(
            || NgramCounts::new(order),
            |mut a, b| {
                a.merge(b);
                a
            },
        )
}

pub fn train_kn<S: AsRef<str> + Sync>(
    texts: &[S],
    order: usize,
    segmenter: SubwordSegmenter,
) -> Result<KnModel, LmError> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::Order(order));
    }
    let counts = count_corpus(texts, order, &segmenter);
    KnModel::estimate(&counts, segmenter)
}

impl KnModel {
    /// Turns raw counts into a model.
    pub fn estimate(counts: &NgramCounts, segmenter: SubwordSegmenter) -> Result<Self, LmError> {
        let n = counts.order();
        if !(1..=MAX_ORDER).contains(&n) {
            return Err(LmError::Order(n));
        }
        if counts.is_empty() {
            return Err(LmError::EmptyCorpus);
        }

        let mut words: Vec<String> = counts
            .units()
            .iter()
            .cloned()
            .chain(segmenter.seed_vocabulary())
            .filter(|u| u != UNK && u != BOS && u != EOS)
            .collect();
        words.sort();
        words.dedup();
        let vocab: Vec<String> = [UNK, BOS, EOS]
            .into_iter()
            .map(String::from)
            .chain(words)
            .collect();
        let index: HashMap<String, u32> =
            vocab.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
        let remap: Vec<u32> = counts.units().iter().map(|u| index[u]).collect();
        let raw: Vec<HashMap<Vec<u32>, u64>> = (1..=n)
            .map(|k| {
                counts
                    .table(k)
                    .iter()
                    .map(|(g, c)| (g.iter().map(|&i| remap[i as usize]).collect(), *c))
                    .collect()
            })
            .collect();

        // Lower orders use continuation counts, except for n-grams pinned to
        // the sentence start, which have no left context to count.
        let mut adjusted: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); n];
        adjusted[n - 1] = raw[n - 1].clone();
        for k in (1..n).rev() {
            let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
            for g in raw[k].keys() {
                *cont.entry(g[1..].to_vec()).or_insert(0) += 1;
            }
            for (g, c) in &raw[k - 1] {
                if g[0] == BOS_ID {
                    cont.insert(g.clone(), *c);
                }
            }
            adjusted[k - 1] = cont;
        }
        adjusted[0].remove(&vec![BOS_ID]);

        let discounts: Vec<f64> = adjusted
            .iter()
            .map(|t| {
                let n1 = t.values().filter(|&&c| c == 1).count() as u64;
                let n2 = t.values().filter(|&&c| c == 2).count() as u64;
                discount(n1, n2)
            })
            .collect();

        let predictable: Vec<u32> = (0..vocab.len() as u32)
            .filter(|&i| i != BOS_ID && (n >= 2 || i != EOS_ID))
            .collect();

        let mut tables: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); n];
        let mut probs: Vec<HashMap<Vec<u32>, f64>> = vec![HashMap::new(); n];

        let total1: u64 = adjusted[0].values().sum();
        let types1 = adjusted[0].len() as f64;
        let d1 = discounts[0];
        let gamma1 = d1 * types1 / total1 as f64;
        let uniform = 1.0 / predictable.len() as f64;
        for &w in &predictable {
            let a = adjusted[0].get(&vec![w]).copied().unwrap_or(0) as f64;
            let p = (a - d1).max(0.0) / total1 as f64 + gamma1 * uniform;
            probs[0].insert(vec![w], p);
        }

        for k in 2..=n {
            let d = discounts[k - 1];
            let mut ctx_stats: HashMap<&[u32], (u64, u64)> = HashMap::new();
            for (g, &a) in &adjusted[k - 1] {
                let s = ctx_stats.entry(&g[..k - 1]).or_insert((0, 0));
                s.0 += a;
                s.1 += 1;
            }
            let mut level = HashMap::with_capacity(adjusted[k - 1].len());
            for (g, &a) in &adjusted[k - 1] {
                let (total, types) = ctx_stats[&g[..k - 1]];
                let gamma = d * types as f64 / total as f64;
                let lower = probs[k - 2][&g[1..]];
                level.insert(g.clone(), (a as f64 - d).max(0.0) / total as f64 + gamma * lower);
            }
            for (ctx, (total, types)) in ctx_stats {
                let gamma = d * types as f64 / total as f64;
                tables[k - 2].entry(ctx.to_vec()).or_insert(Entry {
                    log_prob: probs[k - 2].get(ctx).map_or(f64::NEG_INFINITY, |p| p.ln()),
                    log_backoff: 0.0,
                }).log_backoff = gamma.ln();
            }
            probs[k - 1] = level;
        }
        for (k, level) in probs.iter().enumerate() {
            for (g, p) in level {
                tables[k]
                    .entry(g.clone())
                    .or_insert(Entry { log_prob: 0.0, log_backoff: 0.0 })
                    .log_prob = p.ln();
            }
        }

        Ok(KnModel {
            order: n,
            vocab,
            index,
            discounts,
            tables,
            segmenter,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn discounts(&self) -> &[f64] {
        &self.discounts
    }

    pub fn segmenter(&self) -> &SubwordSegmenter {
        &self.segmenter
    }

    pub fn id(&self, unit: &str) -> u32 {
        self.index.get(unit).copied().unwrap_or(UNK_ID)
    }

    /// Units that can be predicted; conditional distributions sum to one
    /// over this set.
    pub fn predictable(&self) -> Vec<u32> {
        (0..self.vocab.len() as u32)
            .filter(|&i| i != BOS_ID && (self.order >= 2 || i != EOS_ID))
            .collect()
    }

    /// Stored n-grams of a given length, usable as histories.
    pub fn histories(&self, len: usize) -> Vec<Vec<u32>> {
        let mut v: Vec<Vec<u32>> = self.tables[len - 1].keys().cloned().collect();
        v.sort();
        v
    }

    /// ln P(word | context); the context is truncated to order - 1 units.
    pub fn log_prob(&self, context: &[u32], word: u32) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut ctx = &context[context.len() - keep..];
        let mut backoff = 0.0;
        loop {
            let mut key = ctx.to_vec();
            key.push(word);
            if let Some(e) = self.tables[key.len() - 1].get(&key) {
                return backoff + e.log_prob;
            }
            if ctx.is_empty() {
                return f64::NEG_INFINITY;
            }
            if let Some(e) = self.tables[ctx.len() - 1].get(ctx) {
                backoff += e.log_backoff;
            }
            ctx = &ctx[1..];
        }
    }

    pub fn prob(&self, context: &[u32], word: u32) -> f64 {
        self.log_prob(context, word).exp()
    }

    /// Sum of ln-probabilities of one unit sequence and the number of
    /// predictions made (including the end marker for order ≥ 2).
    pub fn score_units<S: AsRef<str>>(&self, units: &[S]) -> (f64, usize) {
        let mut seq: Vec<u32> = Vec::with_capacity(units.len() + 2);
        let marked = self.order >= 2;
        if marked {
            seq.push(BOS_ID);
        }
        seq.extend(units.iter().map(|u| self.id(u.as_ref())));
        if marked {
            seq.push(EOS_ID);
        }
        let first = usize::from(marked);
        let mut sum = 0.0;
        for i in first..seq.len() {
            sum += self.log_prob(&seq[..i], seq[i]);
        }
        (sum, seq.len() - first)
    }

    pub fn perplexity(&self, text: &str, mode: PerplexityMode) -> Result<PerplexityScore, LmError> {
        let scored: Vec<(f64, usize)> = lines(text)
            .map(|l| self.score_units(&self.segmenter.segment(l)))
            .filter(|(_, n)| *n > 0)
            .collect();
        if scored.is_empty() {
            return Err(LmError::EmptyText);
        }
        let token_count = scored.iter().map(|s| s.1).sum();
        let value = match mode {
            PerplexityMode::Document => {
                let sum: f64 = scored.iter().map(|s| s.0).sum();
                (-sum / token_count as f64).exp()
            }
            PerplexityMode::MeanOfLines => {
                scored.iter().map(|(s, n)| (-s / *n as f64).exp()).sum::<f64>() / scored.len() as f64
            }
        };
        Ok(PerplexityScore { value, token_count, mode })
    }

    /// Stable text form: header, then per order the sorted
    /// `log_prob<TAB>units<TAB>log_backoff` lines, units JSON-quoted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kn-model 1");
        let _ = writeln!(out, "order {}", self.order);
        let _ = writeln!(out, "vocab {}", self.vocab.len());
        let _ = writeln!(out, "segmenter {}", self.segmenter.name());
        let d: Vec<String> = self.discounts.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "discounts {}", d.join(" "));
        for (k, table) in self.tables.iter().enumerate() {
            let mut rows: Vec<(Vec<&str>, &Entry)> = table
                .iter()
                .map(|(g, e)| (g.iter().map(|&i| self.vocab[i as usize].as_str()).collect(), e))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            let _ = writeln!(out, "\\{}-grams {}", k + 1, rows.len());
            for (units, e) in rows {
                let quoted: Vec<String> = units
                    .iter()
                    .map(|u| serde_json::to_string(u).expect("string serialization"))
                    .collect();
                let _ = writeln!(out, "{}\t{}\t{}", e.log_prob, quoted.join(" "), e.log_backoff);
            }
        }
        out.push_str("\\end\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), LmError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path, tokenizer: Option<Arc<TokenizerModel>>) -> Result<Self, LmError> {
        Self::from_text(&fs::read_to_string(path)?, tokenizer)
    }

    pub fn from_text(text: &str, tokenizer: Option<Arc<TokenizerModel>>) -> Result<Self, LmError> {
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String, LmError> {
            let (i, l) = lines.next().ok_or_else(|| LmError::parse(0, "truncated header"))?;
            if key.is_empty() {
                return Ok(l.to_string());
            }
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| LmError::parse(i + 1, &format!("expected {key}")))
        };
        if header("")? != "kn-model 1" {
            return Err(LmError::parse(1, "not a kn-model file"));
        }
        let order: usize = header("order")?.parse().map_err(|_| LmError::parse(2, "bad order"))?;
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(LmError::Order(order));
        }
        let vocab_size: usize = header("vocab")?.parse().map_err(|_| LmError::parse(3, "bad vocab"))?;
        let segmenter = match header("segmenter")?.as_str() {
            "tokenizer" => SubwordSegmenter::Tokenizer(tokenizer.ok_or(LmError::MissingTokenizer)?),
            "whitespace-lowercase" => SubwordSegmenter::WhitespaceLowercase,
            other => return Err(LmError::parse(4, &format!("unknown segmenter {other}"))),
        };
        let discounts = header("discounts")?
            .split(' ')
            .map(|d| d.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| LmError::parse(5, "bad discounts"))?;
        if discounts.len() != order {
            return Err(LmError::parse(5, "one discount per order expected"));
        }

        let mut rows: Vec<Vec<(Vec<String>, Entry)>> = vec![Vec::new(); order];
        let mut current = 0usize;
        let mut ended = false;
        for (i, l) in lines {
            let bad = |m: &str| LmError::parse(i + 1, m);
            if l == "\\end" {
                ended = true;
                break;
            }
            if let Some(rest) = l.strip_prefix('\\') {
                let k: usize = rest
                    .split('-')
                    .next()
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| bad("bad section header"))?;
                if k != current + 1 || k > order {
                    return Err(bad("unexpected section"));
                }
                current = k;
                continue;
            }
            if current == 0 {
                return Err(bad("entry before first section"));
            }
            let mut parts = l.split('\t');
            let (Some(p), Some(units), Some(b), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected three tab-separated fields"));
            };
            let units: Vec<String> = serde_json::Deserializer::from_str(units)
                .into_iter::<String>()
                .collect::<Result<_, _>>()
                .map_err(|e| bad(&e.to_string()))?;
            if units.len() != current {
                return Err(bad("n-gram length does not match its section"));
            }
            let entry = Entry {
                log_prob: p.parse().map_err(|_| bad("bad probability"))?,
                log_backoff: b.parse().map_err(|_| bad("bad backoff"))?,
            };
            rows[current - 1].push((units, entry));
        }
        if !ended {
            return Err(LmError::parse(0, "missing \\end"));
        }
        let mut vocab: Vec<String> = rows[0].iter().map(|(u, _)| u[0].clone()).collect();
        for special in [UNK, BOS, EOS] {
            vocab.retain(|u| u != special);
        }
        vocab.sort();
        vocab.splice(0..0, [UNK, BOS, EOS].map(String::from));
        if vocab.len() != vocab_size {
            return Err(LmError::parse(3, "vocabulary size does not match unigram section"));
        }
        let index: HashMap<String, u32> =
            vocab.iter().enumerate().map(|(i, u)| (u.clone(), i as u32)).collect();
        let mut tables = vec![HashMap::new(); order];
        for (k, level) in rows.into_iter().enumerate() {
            for (units, e) in level {
                let key = units
                    .iter()
                    .map(|u| index.get(u).copied().ok_or_else(|| LmError::parse(0, &format!("unit {u:?} not in vocabulary"))))
                    .collect::<Result<Vec<u32>, _>>()?;
                tables[k].insert(key, e);
            }
        }
        Ok(KnModel {
            order,
            vocab,
            index,
            discounts,
            tables,
            segmenter,
        })
    }
}
