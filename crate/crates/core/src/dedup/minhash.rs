use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DedupError;

/// Stable 64-bit fingerprint of a string: FNV-1a followed by a splitmix
/// finalizer so that nearby strings spread over the whole range.
pub fn fingerprint(s: &str) -> u64 {
    let h = s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
    mix64(h)
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fingerprints of the k-word windows of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub k: usize,
    pub hashes: BTreeSet<u64>,
    /// The text has fewer than `k` words and takes no part in near-duplicate
    /// detection.
    pub exempt: bool,
}

/// Lowercased, whitespace-normalized words.
pub fn normalized_words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

pub fn shingle(text: &str, k: usize) -> Result<ShingleSet, DedupError> {
    if k == 0 {
        return Err(DedupError::Config("shingle width must be at least 1".into()));
    }
    let words = normalized_words(text);
    if words.len() < k {
        return Ok(ShingleSet { k, hashes: BTreeSet::new(), exempt: true });
    }
    let hashes = words.windows(k).map(|w| fingerprint(&w.join(" "))).collect();
    Ok(ShingleSet { k, hashes, exempt: false })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub num_perm: usize,
    pub seed: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// Fraction of positions where both signatures agree.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        if self.values.len() != other.values.len() || self.values.is_empty() {
            return 0.0;
        }
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.values.len() as f64
    }
}

/// Per-permutation multiply-add coefficients `(a odd, b)` derived from one
/// master seed.
pub fn permutations(num_perm: usize, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_perm).map(|_| (rng.gen::<u64>() | 1, rng.gen::<u64>())).collect()
}

/// Signature over raw fingerprints.
pub fn minhash_values(hashes: &BTreeSet<u64>, perms: &[(u64, u64)], seed: u64) -> Result<MinHashSignature, DedupError> {
    if hashes.is_empty() {
        return Err(DedupError::EmptyShingles);
    }
    let mut values = vec![u64::MAX; perms.len()];
    for &x in hashes {
        for (v, &(a, b)) in values.iter_mut().zip(perms) {
            let h = a.wrapping_mul(x).wrapping_add(b);
            if h < *v {
                *v = h;
            }
        }
    }
    Ok(MinHashSignature { num_perm: perms.len(), seed, values })
}

pub fn minhash(shingles: &ShingleSet, num_perm: usize, seed: u64) -> Result<MinHashSignature, DedupError> {
    if num_perm == 0 {
        return Err(DedupError::Config("num_perm must be positive".into()));
    }
    minhash_values(&shingles.hashes, &permutations(num_perm, seed), seed)
}

/// Banded LSH buckets. Partial indexes built on disjoint document ranges can
/// be merged.
#[derive(Debug, Clone, Default)]
pub struct LshIndex {
    pub bands: usize,
    pub rows: usize,
    buckets: HashMap<(usize, u64), Vec<usize>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize, num_perm: usize) -> Result<Self, DedupError> {
        if bands == 0 || rows == 0 || bands * rows != num_perm {
            return Err(DedupError::Config(format!(
                "bands ({bands}) x rows ({rows}) must equal num_perm ({num_perm})"
            )));
        }
        Ok(LshIndex { bands, rows, buckets: HashMap::new() })
    }

    fn band_hash(values: &[u64]) -> u64 {
        values.iter().fold(0x84222325cbf29ce4u64, |h, v| mix64(h ^ v))
    }

    pub fn insert(&mut self, doc: usize, sig: &MinHashSignature) -> Result<(), DedupError> {
        if sig.values.len() != self.bands * self.rows {
            return Err(DedupError::Config(format!(
                "signature has {} values, index expects {}",
                sig.values.len(),
                self.bands * self.rows
            )));
        }
        for (band, chunk) in sig.values.chunks(self.rows).enumerate() {
            self.buckets.entry((band, Self::band_hash(chunk))).or_default().push(doc);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: LshIndex) {
        for (k, v) in other.buckets {
            self.buckets.entry(k).or_default().extend(v);
        }
    }

    /// Number of buckets holding `doc`.
    pub fn bucket_count(&self, doc: usize) -> usize {
        self.buckets.values().filter(|v| v.contains(&doc)).count()
    }

    /// Distinct unordered pairs sharing at least one bucket, sorted.
    pub fn candidate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = BTreeSet::new();
        for docs in self.buckets.values() {
            for (i, &a) in docs.iter().enumerate() {
                for &b in &docs[i + 1..] {
                    if a != b {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
        pairs.into_iter().collect()
    }
}

/// A verified near-duplicate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifiedPair {
    pub a: usize,
    pub b: usize,
    pub similarity: f64,
}

/// Candidate pairs whose signature agreement reaches `threshold`, and the
/// connected components they induce. Every document index appears in
/// exactly one cluster; clusters are sorted by their smallest member.
pub fn find_duplicates(
    signatures: &[MinHashSignature],
    bands: usize,
    rows: usize,
    threshold: f64,
) -> Result<(Vec<Vec<usize>>, Vec<VerifiedPair>), DedupError> {
    let num_perm = bands * rows;
    let mut index = LshIndex::new(bands, rows, num_perm)?;
    for (i, s) in signatures.iter().enumerate() {
        index.insert(i, s)?;
    }
    let verified: Vec<VerifiedPair> = index
        .candidate_pairs()
        .into_iter()
        .map(|(a, b)| VerifiedPair { a, b, similarity: signatures[a].agreement(&signatures[b]) })
        .filter(|p| p.similarity >= threshold)
        .collect();
    let mut uf = UnionFind::new(signatures.len());
    for p in &verified {
        uf.union(p.a, p.b);
    }
    Ok((uf.clusters(), verified))
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two sets; the smaller index becomes the root.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    pub(crate) fn clusters(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}
