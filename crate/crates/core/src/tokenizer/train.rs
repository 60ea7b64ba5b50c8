use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use log::debug;

use super::model::{byte_token, TokenId, TokenizerModel};
use super::normalize::{clean, insert_spaces, Boundary, NormalizationRules};
use super::pretokenize::{segment, whitespace_run_tokens, SegmentationMode};
use super::TokenizerError;

pub const DEFAULT_SPECIAL_TOKENS: [&str; 6] = [
    "<pad>",
    "<s>",
    "</s>",
    "<|start_header_id|>",
    "<|end_header_id|>",
    "<|eot_id|>",
];

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub vocab_size: usize,
    pub special_tokens: Vec<String>,
    pub rules: NormalizationRules,
    pub segmentation: SegmentationMode,
    /// Pairs seen fewer times than this are never merged.
    pub min_frequency: u64,
}

impl TrainConfig {
    pub fn new(vocab_size: usize) -> Self {
        TrainConfig {
            vocab_size,
            special_tokens: DEFAULT_SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect(),
            rules: NormalizationRules::default(),
            segmentation: SegmentationMode::Constrained,
            min_frequency: 2,
        }
    }

    /// Plain BPE without normalization or class constraints.
    pub fn unconstrained(vocab_size: usize) -> Self {
        TrainConfig {
            rules: NormalizationRules::none(),
            segmentation: SegmentationMode::Unconstrained,
            ..TrainConfig::new(vocab_size)
        }
    }
}

/// Checks a target vocabulary size: a multiple of 256 that fits in 16 bits.
pub fn check_vocab_size(n: usize) -> Result<(), TokenizerError> {
    if n % 256 != 0 {
        return Err(TokenizerError::Config(format!("vocab size {n} is not a multiple of 256")));
    }
    if n > u16::MAX as usize {
        return Err(TokenizerError::Config(format!("vocab size {n} does not fit in 16 bits")));
    }
    Ok(())
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: u64,
    key: Reverse<(String, String)>,
    pair: (TokenId, TokenId),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count.cmp(&other.count).then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Trainer {
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
    byte_offset: TokenId,
    words: Vec<(Vec<TokenId>, u64)>,
    pair_counts: HashMap<(TokenId, TokenId), u64>,
    where_: HashMap<(TokenId, TokenId), HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl Trainer {
    fn is_byte(&self, id: TokenId) -> bool {
        id >= self.byte_offset && id < self.byte_offset + 256
    }

    fn push(&mut self, pair: (TokenId, TokenId)) {
        let count = self.pair_counts.get(&pair).copied().unwrap_or(0);
        if count > 0 {
            let key = Reverse((self.vocab[pair.0 as usize].clone(), self.vocab[pair.1 as usize].clone()));
            self.heap.push(Candidate { count, key, pair });
        }
    }

    fn pairs_of(&self, w: &[TokenId]) -> Vec<(TokenId, TokenId)> {
        w.windows(2)
            .map(|p| (p[0], p[1]))
            .filter(|&(a, b)| !self.is_byte(a) && !self.is_byte(b))
            .collect()
    }

    fn add_word_pairs(&mut self, idx: usize, sign: bool) -> Vec<(TokenId, TokenId)> {
        let (ref w, freq) = self.words[idx];
        let pairs = self.pairs_of(w);
        for &p in &pairs {
            let c = self.pair_counts.entry(p).or_insert(0);
            if sign {
                *c += freq;
                self.where_.entry(p).or_default().insert(idx);
            } else {
                *c -= freq;
            }
        }
        pairs
    }

    fn pop_best(&mut self, min_frequency: u64) -> Option<(TokenId, TokenId)> {
        while let Some(c) = self.heap.pop() {
            let current = self.pair_counts.get(&c.pair).copied().unwrap_or(0);
            if current != c.count {
                continue;
            }
            return (current >= min_frequency).then_some(c.pair);
        }
        None
    }

    fn apply(&mut self, pair: (TokenId, TokenId), new_id: TokenId) {
        let affected: Vec<usize> = self
            .where_
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        let mut touched = HashSet::new();
        for idx in affected {
            if !self.words[idx].0.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            touched.extend(self.add_word_pairs(idx, false));
            let w = &mut self.words[idx].0;
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && (w[i], w[i + 1]) == pair {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(w[i]);
                    i += 1;
                }
            }
            *w = out;
            touched.extend(self.add_word_pairs(idx, true));
        }
        self.pair_counts.remove(&pair);
        for p in touched {
            if p != pair {
                self.push(p);
            }
        }
    }
}

/// Trains a BPE model on `texts`.
///
/// Layout: specials, 256 byte tokens, whitespace runs, base characters by
/// descending frequency, then merge results. Ties between equally frequent
/// pairs go to the lexicographically smallest (left, right).
pub fn train_bpe<I, S>(texts: I, config: &TrainConfig) -> Result<TokenizerModel, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut vocab: Vec<String> = Vec::new();
    let mut index: HashMap<String, TokenId> = HashMap::new();
    let mut add = |t: String, vocab: &mut Vec<String>| -> bool {
        if index.contains_key(&t) {
            return false;
        }
        index.insert(t.clone(), vocab.len() as TokenId);
        vocab.push(t);
        true
    };
    for s in &config.special_tokens {
        if !add(s.clone(), &mut vocab) {
            return Err(TokenizerError::Config(format!("duplicate special token {s:?}")));
        }
    }
    let byte_offset = vocab.len() as TokenId;
    for b in 0..=255u8 {
        add(byte_token(b), &mut vocab);
    }
    for run in whitespace_run_tokens() {
        add(run, &mut vocab);
    }
    if vocab.len() > config.vocab_size {
        return Err(TokenizerError::Config(format!(
            "vocab size {} is below the {} reserved tokens",
            config.vocab_size,
            vocab.len()
        )));
    }

    let mut segments: HashMap<String, u64> = HashMap::new();
    let mut char_freq: HashMap<char, u64> = HashMap::new();
    for text in texts {
        let spaced = insert_spaces(&clean(text.as_ref(), &config.rules), &config.rules, Boundary::Start);
        for (kind, piece) in segment(&spaced, config.segmentation) {
            for c in piece.chars() {
                *char_freq.entry(c).or_insert(0) += 1;
            }
            if kind.mergeable() {
                *segments.entry(piece.to_string()).or_insert(0) += 1;
            }
        }
    }
    let mut chars: Vec<(char, u64)> = char_freq.into_iter().collect();
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    for (c, _) in chars {
        if vocab.len() >= config.vocab_size {
            break;
        }
        add(c.to_string(), &mut vocab);
    }
    drop(add);

    let mut segs: Vec<(String, u64)> = segments.into_iter().collect();
    segs.sort();
    let words: Vec<(Vec<TokenId>, u64)> = segs
        .into_iter()
        .map(|(s, f)| {
            let mut ids = Vec::new();
            let mut buf = [0u8; 4];
            for c in s.chars() {
                let cs = c.encode_utf8(&mut buf);
                match index.get(&*cs) {
                    Some(&id) => ids.push(id),
                    None => ids.extend(cs.bytes().map(|b| byte_offset + b as TokenId)),
                }
            }
            (ids, f)
        })
        .collect();

    let mut t = Trainer {
        vocab,
        index,
        byte_offset,
        words,
        pair_counts: HashMap::new(),
        where_: HashMap::new(),
        heap: BinaryHeap::new(),
    };
    for idx in 0..t.words.len() {
        t.add_word_pairs(idx, true);
    }
    let initial: Vec<_> = t.pair_counts.keys().copied().collect();
    for p in initial {
        t.push(p);
    }

    let mut merges = Vec::new();
    while t.vocab.len() < config.vocab_size {
        let Some(pair) = t.pop_best(config.min_frequency.max(1)) else { break };
        let merged = format!("{}{}", t.vocab[pair.0 as usize], t.vocab[pair.1 as usize]);
        let new_id = match t.index.get(&merged) {
            Some(&id) => id,
            None => {
                let id = t.vocab.len() as TokenId;
                t.index.insert(merged.clone(), id);
                t.vocab.push(merged);
                id
            }
        };
        merges.push(pair);
        t.apply(pair, new_id);
    }
    debug!("trained {} tokens with {} merges", t.vocab.len(), merges.len());

    TokenizerModel::from_parts(
        t.vocab,
        merges,
        &config.special_tokens,
        byte_offset,
        config.rules.clone(),
        config.segmentation,
    )
}
