use serde::{Deserialize, Serialize};

use super::{Conversation, Role, SftError, Turn};
use crate::tokenizer::{Boundary, TokenId, TokenizerModel, BOS, PAD};

pub const START_HEADER: &str = "<|start_header_id|>";
pub const END_HEADER: &str = "<|end_header_id|>";
pub const EOT: &str = "<|eot_id|>";
pub const SEQUENCE_LENGTH: usize = 4096;

/// Literals that may not occur inside turn content.
pub const RESERVED_LITERALS: [&str; 6] = [START_HEADER, END_HEADER, EOT, BOS, "</s>", PAD];

const SEP: &str = "\n\n";

fn check(conv: &Conversation) -> Result<(), SftError> {
    if conv.turns.is_empty() {
        return Err(SftError::EmptyConversation);
    }
    for (i, t) in conv.turns.iter().enumerate() {
        if let Some(lit) = RESERVED_LITERALS.iter().find(|l| t.content.contains(*l)) {
            return Err(SftError::SpecialLiteral { turn: i, literal: lit.to_string() });
        }
    }
    Ok(())
}

/// Renders the conversation with the chat template: `<s>`, then per turn
/// the role between header tokens, a blank line, the content, a blank line
/// and the end-of-turn token.
pub fn render_chat(conv: &Conversation) -> Result<String, SftError> {
    check(conv)?;
    let mut out = String::from(BOS);
    for t in &conv.turns {
        out.push_str(START_HEADER);
        out.push_str(t.role.as_str());
        out.push_str(END_HEADER);
        out.push_str(SEP);
        out.push_str(&t.content);
        out.push_str(SEP);
        out.push_str(EOT);
    }
    Ok(out)
}

/// Inverse of [`render_chat`]. Only the turns are recovered.
pub fn parse_chat(text: &str) -> Result<Conversation, SftError> {
    let bad = |m: &str| SftError::Parse(m.to_string());
    let mut rest = text.strip_prefix(BOS).ok_or_else(|| bad("missing sequence-start marker"))?;
    let mut turns = Vec::new();
    while !rest.is_empty() {
        rest = rest.strip_prefix(START_HEADER).ok_or_else(|| bad("expected start header"))?;
        let end = rest.find(END_HEADER).ok_or_else(|| bad("unterminated header"))?;
        let role: Role = rest[..end].parse().map_err(SftError::UnknownRole)?;
        rest = rest[end + END_HEADER.len()..].strip_prefix(SEP).ok_or_else(|| bad("missing blank line after header"))?;
        let eot = rest.find(EOT).ok_or_else(|| bad("missing end-of-turn token"))?;
        let content = rest[..eot].strip_suffix(SEP).ok_or_else(|| bad("missing blank line before end of turn"))?;
        if RESERVED_LITERALS.iter().any(|l| content.contains(l)) {
            return Err(bad("special token inside content"));
        }
        turns.push(Turn::new(role, content));
        rest = &rest[eot + EOT.len()..];
    }
    if turns.is_empty() {
        return Err(SftError::EmptyConversation);
    }
    Ok(Conversation::new(turns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskOptions {
    /// Train on the end-of-turn token that closes each assistant turn.
    pub include_eot: bool,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions { include_eot: true }
    }
}

/// Token ids of a rendered conversation with a 0/1 loss mask of the same
/// length, before padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedChat {
    pub ids: Vec<TokenId>,
    pub mask: Vec<u8>,
}

fn special(model: &TokenizerModel, lit: &str) -> Result<TokenId, SftError> {
    model.special_id(lit).ok_or_else(|| SftError::MissingSpecial(lit.to_string()))
}

/// Encodes the rendered conversation piece by piece so that assistant
/// content spans map to exact token ranges. Decoding the ids gives back the
/// rendered text.
pub fn encode_chat(model: &TokenizerModel, conv: &Conversation, opts: MaskOptions) -> Result<EncodedChat, SftError> {
    check(conv)?;
    let (bos, start, end, eot) =
        (special(model, BOS)?, special(model, START_HEADER)?, special(model, END_HEADER)?, special(model, EOT)?);
    let mut ids = vec![bos];
    let mut mask = vec![0u8];
    let mut push = |ids_part: Vec<TokenId>, bit: u8, ids: &mut Vec<TokenId>| {
        mask.extend(std::iter::repeat(bit).take(ids_part.len()));
        ids.extend(ids_part);
    };
    for t in &conv.turns {
        let trained = u8::from(t.role == Role::Assistant);
        push(vec![start], 0, &mut ids);
        push(model.encode_fragment(t.role.as_str(), Boundary::AfterSpecial), 0, &mut ids);
        push(vec![end], 0, &mut ids);
        push(model.encode_fragment(SEP, Boundary::AfterSpecial), 0, &mut ids);
        push(model.encode_fragment(&t.content, Boundary::After('\n')), trained, &mut ids);
        let last = t.content.chars().last().unwrap_or('\n');
        push(model.encode_fragment(SEP, Boundary::After(last)), 0, &mut ids);
        push(vec![eot], trained & u8::from(opts.include_eot), &mut ids);
    }
    Ok(EncodedChat { ids, mask })
}

/// Fixed-length training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExample {
    pub ids: Vec<TokenId>,
    pub loss_mask: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Length before padding or truncation.
    pub original_length: usize,
    pub truncated: bool,
    /// No position carries loss.
    pub no_trainable_tokens: bool,
}

/// Pads with `pad_id` (mask 0) or cuts to exactly `length` tokens.
pub fn pad_truncate(mut ids: Vec<TokenId>, mut mask: Vec<u8>, length: usize, pad_id: TokenId) -> Result<RenderedExample, SftError> {
    if ids.len() != mask.len() {
        return Err(SftError::SpanMismatch { ids: ids.len(), mask: mask.len() });
    }
    let original_length = ids.len();
    ids.resize(length, pad_id);
    mask.resize(length, 0);
    Ok(RenderedExample {
        no_trainable_tokens: !mask.contains(&1),
        ids,
        loss_mask: mask,
        source: None,
        language: None,
        id: None,
        original_length,
        truncated: original_length > length,
    })
}

/// Renders, encodes, masks and pads one conversation.
pub fn prepare_example(
    model: &TokenizerModel,
    conv: &Conversation,
    opts: MaskOptions,
    length: usize,
) -> Result<RenderedExample, SftError> {
    let enc = encode_chat(model, conv, opts)?;
    let mut ex = pad_truncate(enc.ids, enc.mask, length, special(model, PAD)?)?;
    ex.source = conv.source.clone();
    ex.language = conv.language.clone();
    ex.id = conv.id.clone();
    Ok(ex)
}
