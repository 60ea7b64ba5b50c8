//! MinHash/LSH near-duplicate removal, run independently per
//! (snapshot, language) partition.

mod minhash;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;

pub use minhash::{
    find_duplicates, fingerprint, minhash, minhash_values, normalized_words, permutations, shingle, LshIndex,
    MinHashSignature, ShingleSet, VerifiedPair,
};

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("cannot build a MinHash signature from an empty shingle set")]
    EmptyShingles,
    #[error("invalid dedup configuration: {0}")]
    Config(String),
    #[error("document {id:?} has no snapshot (extra.snapshot or extra.dump)")]
    MissingPartitionKey { id: String },
    #[error("signature cache line {line}: {message}")]
    Cache { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DedupConfig {
    /// Shingle width in words.
    pub k: usize,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    /// Minimum signature agreement for a candidate pair to count.
    pub threshold: f64,
    pub seed: u64,
    /// Remove identical normalized texts before MinHash.
    pub exact_fast_path: bool,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { k: 5, num_perm: 112, bands: 14, rows: 8, threshold: 0.75, seed: 42, exact_fast_path: true }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.k == 0 {
            return Err(DedupError::Config("k must be at least 1".into()));
        }
        if self.bands * self.rows != self.num_perm || self.num_perm == 0 {
            return Err(DedupError::Config(format!(
                "bands ({}) x rows ({}) must equal num_perm ({})",
                self.bands, self.rows, self.num_perm
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DedupError::Config("threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionKey {
    pub snapshot: String,
    pub language: String,
}

impl std::fmt::Display for PartitionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.snapshot, self.language)
    }
}

pub fn partition_key(doc: &DocumentRecord) -> Result<PartitionKey, DedupError> {
    let snap = doc
        .extra_value("snapshot")
        .or_else(|| doc.extra_value("dump"))
        .and_then(|v| match v {
            serde_json::Value::String(s) => Some(s),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .filter(|s| !s.is_empty())
        .ok_or_else(|| DedupError::MissingPartitionKey { id: doc.id.clone() })?;
    Ok(PartitionKey { snapshot: snap, language: doc.language.clone() })
}

/// One removed document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRow {
    pub partition: String,
    pub kept_id: String,
    pub dropped_id: String,
    pub verified_similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupOutcome {
    /// Per input document, in input order.
    pub keep: Vec<bool>,
    pub drops: Vec<DropRow>,
    /// Documents too short to shingle.
    pub exempt: usize,
}

impl DedupOutcome {
    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }
}

/// Signatures keyed by (source, id, seed, num_perm); the shingle width is
/// stored alongside and must match on lookup.
#[derive(Debug, Clone, Default)]
pub struct SignatureCache {
    entries: HashMap<(String, String, u64, usize), (usize, Vec<u64>)>,
    dirty: bool,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    source: String,
    id: String,
    seed: u64,
    num_perm: usize,
    k: usize,
    values: Vec<u64>,
}

impl SignatureCache {
    pub fn load(path: &Path) -> Result<Self, DedupError> {
        let mut cache = SignatureCache::default();
        if !path.exists() {
            return Ok(cache);
        }
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: CacheLine =
                serde_json::from_str(&line).map_err(|e| DedupError::Cache { line: i + 1, message: e.to_string() })?;
            if c.values.len() != c.num_perm {
                return Err(DedupError::Cache { line: i + 1, message: "value count differs from num_perm".into() });
            }
            cache.entries.insert((c.source, c.id, c.seed, c.num_perm), (c.k, c.values));
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<(), DedupError> {
        let mut keys: Vec<_> = self.entries.keys().collect();
        keys.sort();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for key in keys {
            let (k, values) = &self.entries[key];
            let line = CacheLine {
                source: key.0.clone(),
                id: key.1.clone(),
                seed: key.2,
                num_perm: key.3,
                k: *k,
                values: values.clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&line).expect("cache line serializes"))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    fn get(&self, doc: &DocumentRecord, cfg: &DedupConfig) -> Option<MinHashSignature> {
        let key = (doc.source.clone(), doc.id.clone(), cfg.seed, cfg.num_perm);
        self.entries.get(&key).filter(|(k, _)| *k == cfg.k).map(|(_, v)| MinHashSignature {
            num_perm: cfg.num_perm,
            seed: cfg.seed,
            values: v.clone(),
        })
    }

    fn put(&mut self, doc: &DocumentRecord, cfg: &DedupConfig, sig: &MinHashSignature) {
        let key = (doc.source.clone(), doc.id.clone(), cfg.seed, cfg.num_perm);
        self.entries.insert(key, (cfg.k, sig.values.clone()));
        self.dirty = true;
    }
}

/// Deduplicates the documents of one partition. Within each cluster the
/// earliest document is kept.
pub fn dedup_partition(
    partition: &str,
    docs: &[&DocumentRecord],
    cfg: &DedupConfig,
    cache: Option<&SignatureCache>,
) -> Result<(DedupOutcome, Vec<(usize, MinHashSignature)>), DedupError> {
    cfg.validate()?;
    let mut keep = vec![true; docs.len()];
    let mut drops = Vec::new();

    if cfg.exact_fast_path {
        let mut first: HashMap<String, usize> = HashMap::new();
        for (i, d) in docs.iter().enumerate() {
            let norm = normalized_words(&d.text).join(" ");
            match first.get(&norm) {
                Some(&j) => {
                    keep[i] = false;
                    drops.push((j, i, 1.0));
                }
                None => {
                    first.insert(norm, i);
                }
            }
        }
    }

    let perms = permutations(cfg.num_perm, cfg.seed);
    let computed: Vec<Result<(usize, Option<MinHashSignature>, bool, bool), DedupError>> = docs
        .par_iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(i, d)| {
            if let Some(sig) = cache.and_then(|c| c.get(d, cfg)) {
                return Ok((i, Some(sig), false, false));
            }
            let sh = shingle(&d.text, cfg.k)?;
            if sh.exempt {
                return Ok((i, None, true, false));
            }
            Ok((i, Some(minhash_values(&sh.hashes, &perms, cfg.seed)?), false, true))
        })
        .collect();

    let mut idx = Vec::new();
    let mut sigs = Vec::new();
    let mut fresh = Vec::new();
    let mut exempt = 0;
    for r in computed {
        let (i, sig, is_exempt, is_fresh) = r?;
        exempt += usize::from(is_exempt);
        if let Some(s) = sig {
            if is_fresh {
                fresh.push((i, s.clone()));
            }
            idx.push(i);
            sigs.push(s);
        }
    }

    let (clusters, _) = find_duplicates(&sigs, cfg.bands, cfg.rows, cfg.threshold)?;
    for cluster in clusters {
        // Cluster members are positions into `sigs`, ascending in input order.
        let head = cluster[0];
        for &m in &cluster[1..] {
            keep[idx[m]] = false;
            drops.push((idx[head], idx[m], sigs[head].agreement(&sigs[m])));
        }
    }

    drops.sort_by_key(|(_, dropped, _)| *dropped);
    let drops = drops
        .into_iter()
        .map(|(k, d, s)| DropRow {
            partition: partition.to_string(),
            kept_id: docs[k].id.clone(),
            dropped_id: docs[d].id.clone(),
            verified_similarity: s,
        })
        .collect();
    Ok((DedupOutcome { keep, drops, exempt }, fresh))
}

/// Splits the corpus by (snapshot, language) and deduplicates each part on
/// its own. Documents are never compared across partitions.
pub fn dedup_corpus(
    docs: &[DocumentRecord],
    cfg: &DedupConfig,
    mut cache: Option<&mut SignatureCache>,
) -> Result<DedupOutcome, DedupError> {
    cfg.validate()?;
    let mut parts: BTreeMap<PartitionKey, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        parts.entry(partition_key(d)?).or_default().push(i);
    }
    let results: Vec<_> = parts
        .par_iter()
        .map(|(key, members)| {
            let refs: Vec<&DocumentRecord> = members.iter().map(|&i| &docs[i]).collect();
            dedup_partition(&key.to_string(), &refs, cfg, cache.as_deref()).map(|r| (members, r))
        })
        .collect::<Result<_, _>>()?;

    let mut out = DedupOutcome { keep: vec![true; docs.len()], drops: Vec::new(), exempt: 0 };
    for (members, (part, fresh)) in results {
        for (local, k) in part.keep.iter().enumerate() {
            out.keep[members[local]] = *k;
        }
        out.drops.extend(part.drops);
        out.exempt += part.exempt;
        if let Some(c) = cache.as_deref_mut() {
            for (local, sig) in fresh {
                c.put(&docs[members[local]], cfg, &sig);
            }
        }
    }
    Ok(out)
}

/// CSV with columns `partition,kept_id,dropped_id,verified_similarity`.
pub fn write_drop_report<W: Write>(rows: &[DropRow], w: W) -> Result<(), DedupError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["partition", "kept_id", "dropped_id", "verified_similarity"])?;
    for r in rows {
        out.write_record([&r.partition, &r.kept_id, &r.dropped_id, &format!("{:.4}", r.verified_similarity)])?;
    }
    out.flush()?;
    Ok(())
}
