use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::audit::audit_vocabulary;
use super::normalize::{clean, insert_spaces, remove_inserted_spaces, Boundary, NormalizationRules};
use super::pretokenize::{segment, SegmentKind, SegmentationMode};
use super::TokenizerError;

pub type TokenId = u32;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Byte-fallback token for one byte, e.g. `<0x0A>`.
pub fn byte_token(b: u8) -> String {
    format!("<0x{b:02X}>")
}

/// Header stored next to the vocabulary and merge lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format: String,
    pub rules: NormalizationRules,
    pub segmentation: SegmentationMode,
    pub special_tokens: Vec<String>,
    pub byte_offset: TokenId,
    pub vocab_size: usize,
    pub merges: usize,
}

const FORMAT: &str = "corpuskit-bpe/1";

/// Unicode-level BPE model with byte fallback.
#[derive(Debug, Clone)]
pub struct TokenizerModel {
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
    merges: Vec<(TokenId, TokenId)>,
    ranks: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    specials: Vec<TokenId>,
    byte_offset: TokenId,
    rules: NormalizationRules,
    segmentation: SegmentationMode,
}

impl TokenizerModel {
    /// Assembles a model from a vocabulary and merge list, checking that the
    /// two agree with each other and with the declared layout.
    pub fn from_parts(
        vocab: Vec<String>,
        merges: Vec<(TokenId, TokenId)>,
        special_tokens: &[String],
        byte_offset: TokenId,
        rules: NormalizationRules,
        segmentation: SegmentationMode,
    ) -> Result<Self, TokenizerError> {
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, t) in vocab.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(TokenizerError::InvalidModel(format!("duplicate token {t:?}")));
            }
        }
        for b in 0..=255u8 {
            let id = byte_offset as usize + b as usize;
            if vocab.get(id) != Some(&byte_token(b)) {
                return Err(TokenizerError::InvalidModel(format!(
                    "byte token {} not at id {id}",
                    byte_token(b)
                )));
            }
        }
        let mut specials = Vec::new();
        for s in special_tokens {
            let id = *index
                .get(s)
                .ok_or_else(|| TokenizerError::InvalidModel(format!("special token {s:?} missing")))?;
            specials.push(id);
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, &(a, b)) in merges.iter().enumerate() {
            let (Some(left), Some(right)) = (vocab.get(a as usize), vocab.get(b as usize)) else {
                return Err(TokenizerError::InvalidModel(format!("merge {rank} references unknown ids")));
            };
            let merged = format!("{left}{right}");
            let id = *index.get(&merged).ok_or_else(|| {
                TokenizerError::InvalidModel(format!("merge {rank} result {merged:?} not in vocabulary"))
            })?;
            if ranks.insert((a, b), (rank as u32, id)).is_some() {
                return Err(TokenizerError::InvalidModel(format!("merge {rank} repeated")));
            }
        }
        let model = TokenizerModel {
            vocab,
            index,
            merges,
            ranks,
            specials,
            byte_offset,
            rules,
            segmentation,
        };
        if model.segmentation == SegmentationMode::Constrained {
            let report = audit_vocabulary(&model);
            if !report.is_clean() {
                return Err(TokenizerError::InvalidModel(format!(
                    "vocabulary violates token constraints: {report}"
                )));
            }
        }
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    pub fn rules(&self) -> &NormalizationRules {
        &self.rules
    }

    pub fn segmentation(&self) -> SegmentationMode {
        self.segmentation
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn is_byte(&self, id: TokenId) -> bool {
        id >= self.byte_offset && id < self.byte_offset + 256
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        self.specials.contains(&id)
    }

    pub fn special_tokens(&self) -> Vec<&str> {
        self.specials.iter().map(|&i| self.vocab[i as usize].as_str()).collect()
    }

    /// Id of a registered special token.
    pub fn special_id(&self, literal: &str) -> Option<TokenId> {
        self.id(literal).filter(|id| self.is_special(*id))
    }

    /// Appends special tokens that are not registered yet.
    pub fn ensure_special_tokens(&mut self, literals: &[&str]) -> Result<(), TokenizerError> {
        for &lit in literals {
            match self.index.get(lit) {
                Some(&id) if self.is_special(id) => {}
                Some(_) => {
                    return Err(TokenizerError::InvalidModel(format!(
                        "{lit:?} already exists as an ordinary token"
                    )))
                }
                None => {
                    let id = self.vocab.len() as TokenId;
                    self.vocab.push(lit.to_string());
                    self.index.insert(lit.to_string(), id);
                    self.specials.push(id);
                }
            }
        }
        Ok(())
    }

    /// Encodes plain text. Special-token literals in `text` are treated as
    /// ordinary characters.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        self.encode_fragment(text, Boundary::Start)
    }

    /// Encodes a fragment of a longer input; `boundary` describes what came
    /// right before it so that space insertion matches whole-input encoding.
    pub fn encode_fragment(&self, text: &str, boundary: Boundary) -> Vec<TokenId> {
        let cleaned = clean(text, &self.rules);
        let spaced = insert_spaces(&cleaned, &self.rules, boundary);
        let mut out = Vec::with_capacity(spaced.len() / 3 + 1);
        for (kind, piece) in segment(&spaced, self.segmentation) {
            self.encode_segment(kind, piece, &mut out);
        }
        out
    }

    /// Encodes text in which registered special-token literals stand for
    /// their special ids.
    pub fn encode_with_specials(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        let mut boundary = Boundary::Start;
        let mut rest = text;
        while !rest.is_empty() {
            match self.next_special(rest) {
                Some((pos, lit, id)) => {
                    if pos > 0 {
                        out.extend(self.encode_fragment(&rest[..pos], boundary));
                    }
                    out.push(id);
                    boundary = Boundary::AfterSpecial;
                    rest = &rest[pos + lit.len()..];
                }
                None => {
                    out.extend(self.encode_fragment(rest, boundary));
                    break;
                }
            }
        }
        out
    }

    fn next_special<'a>(&'a self, text: &str) -> Option<(usize, &'a str, TokenId)> {
        self.specials
            .iter()
            .filter_map(|&id| {
                let lit = self.vocab[id as usize].as_str();
                text.find(lit).map(|pos| (pos, lit, id))
            })
            .min_by_key(|(pos, lit, _)| (*pos, std::cmp::Reverse(lit.len())))
    }

    fn encode_segment(&self, kind: SegmentKind, piece: &str, out: &mut Vec<TokenId>) {
        if !kind.mergeable() {
            if let Some(&id) = self.index.get(piece) {
                if !self.is_special(id) {
                    out.push(id);
                    return;
                }
            }
        }
        let mut symbols: Vec<TokenId> = Vec::with_capacity(piece.len());
        let mut buf = [0u8; 4];
        for c in piece.chars() {
            let s = c.encode_utf8(&mut buf);
            match self.index.get(&*s) {
                Some(&id) if !self.is_special(id) => symbols.push(id),
                _ => symbols.extend(s.bytes().map(|b| self.byte_offset + b as TokenId)),
            }
        }
        if kind.mergeable() {
            self.apply_merges(&mut symbols);
        }
        out.extend_from_slice(&symbols);
    }

    fn apply_merges(&self, symbols: &mut Vec<TokenId>) {
        loop {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0], w[1])).map(|&(rank, id)| (rank, i, id)))
                .min();
            let Some((_, i, id)) = best else { break };
            symbols[i] = id;
            symbols.remove(i + 1);
        }
    }

    /// Decodes ids back to text. Invalid UTF-8 produced by byte-fallback
    /// tokens is replaced with U+FFFD.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String, TokenizerError> {
        let mut out = String::new();
        let mut fragment = String::new();
        let mut bytes: Vec<u8> = Vec::new();
        let mut boundary = Boundary::Start;
        for &id in ids {
            let token = self
                .vocab
                .get(id as usize)
                .ok_or(TokenizerError::UnknownId(id))?;
            if self.is_byte(id) {
                bytes.push((id - self.byte_offset) as u8);
                continue;
            }
            flush_bytes(&mut bytes, &mut fragment);
            if self.is_special(id) {
                out.push_str(&remove_inserted_spaces(&fragment, &self.rules, boundary));
                fragment.clear();
                out.push_str(token);
                boundary = Boundary::AfterSpecial;
            } else {
                fragment.push_str(token);
            }
        }
        flush_bytes(&mut bytes, &mut fragment);
        out.push_str(&remove_inserted_spaces(&fragment, &self.rules, boundary));
        Ok(out)
    }

    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            format: FORMAT.to_string(),
            rules: self.rules.clone(),
            segmentation: self.segmentation,
            special_tokens: self.special_tokens().into_iter().map(String::from).collect(),
            byte_offset: self.byte_offset,
            vocab_size: self.vocab.len(),
            merges: self.merges.len(),
        }
    }

    /// Writes `header.json`, `vocab.txt` (one JSON-quoted token per line,
    /// id = line index) and `merges.txt` (two JSON-quoted tokens per line,
    /// rank = line index) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), TokenizerError> {
        fs::create_dir_all(dir)?;
        let header = serde_json::to_string_pretty(&self.header())
            .map_err(|e| TokenizerError::InvalidModel(e.to_string()))?;
        fs::write(dir.join("header.json"), header + "\n")?;
        let mut vocab = String::new();
        for t in &self.vocab {
            vocab.push_str(&quote(t));
            vocab.push('\n');
        }
        fs::write(dir.join("vocab.txt"), vocab)?;
        let mut merges = String::new();
        for &(a, b) in &self.merges {
            merges.push_str(&quote(&self.vocab[a as usize]));
            merges.push(' ');
            merges.push_str(&quote(&self.vocab[b as usize]));
            merges.push('\n');
        }
        fs::write(dir.join("merges.txt"), merges)?;
        Ok(())
    }

    /// Loads a model directory and re-validates every invariant.
    pub fn load(dir: &Path) -> Result<Self, TokenizerError> {
        let header: ModelHeader = serde_json::from_str(&fs::read_to_string(dir.join("header.json"))?)
            .map_err(|e| TokenizerError::InvalidModel(format!("header: {e}")))?;
        if header.format != FORMAT {
            return Err(TokenizerError::InvalidModel(format!(
                "unsupported format {:?}",
                header.format
            )));
        }
        let vocab = fs::read_to_string(dir.join("vocab.txt"))?
            .lines()
            .enumerate()
            .map(|(i, l)| unquote(l).map_err(|e| TokenizerError::InvalidModel(format!("vocab line {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        if vocab.len() != header.vocab_size {
            return Err(TokenizerError::InvalidModel(format!(
                "header declares {} tokens, vocab.txt has {}",
                header.vocab_size,
                vocab.len()
            )));
        }
        let index: HashMap<&str, TokenId> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as TokenId))
            .collect();
        let mut merges = Vec::new();
        for (i, line) in fs::read_to_string(dir.join("merges.txt"))?.lines().enumerate() {
            let bad = |m: &str| TokenizerError::InvalidModel(format!("merges line {}: {m}", i + 1));
            let (left, right) = split_quoted_pair(line).map_err(|e| bad(&e))?;
            let a = *index.get(left.as_str()).ok_or_else(|| bad("unknown left token"))?;
            let b = *index.get(right.as_str()).ok_or_else(|| bad("unknown right token"))?;
            merges.push((a, b));
        }
        if merges.len() != header.merges {
            return Err(TokenizerError::InvalidModel(format!(
                "header declares {} merges, merges.txt has {}",
                header.merges,
                merges.len()
            )));
        }
        let model = TokenizerModel::from_parts(
            vocab,
            merges,
            &header.special_tokens,
            header.byte_offset,
            header.rules,
            header.segmentation,
        )?;
        Ok(model)
    }
}

fn flush_bytes(bytes: &mut Vec<u8>, out: &mut String) {
    if !bytes.is_empty() {
        out.push_str(&String::from_utf8_lossy(bytes));
        bytes.clear();
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn unquote(s: &str) -> Result<String, String> {
    serde_json::from_str::<String>(s).map_err(|e| e.to_string())
}

fn split_quoted_pair(line: &str) -> Result<(String, String), String> {
    let mut de = serde_json::Deserializer::from_str(line).into_iter::<String>();
    let left = de.next().ok_or("missing left token")?.map_err(|e| e.to_string())?;
    let right = de.next().ok_or("missing right token")?.map_err(|e| e.to_string())?;
    if de.next().is_some() {
        return Err("trailing data".into());
    }
    Ok((left, right))
}
