//! Character-level vocabulary, property-bin quantization and example layout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqdata::{residue_index, AminoAcidSequence, PropertyVector, ALPHABET};

pub type TokenId = u32;

pub const N_RESIDUES: usize = 20;
pub const EOS: TokenId = 20;
/// Padding is the end-of-sequence token.
pub const PAD: TokenId = EOS;
pub const TASK_GEN: TokenId = 21;
pub const TASK_EST: TokenId = 22;
pub const SEP: TokenId = 23;
pub const BIN_BASE: TokenId = 24;
pub const N_BINS: usize = 101;
pub const N_PROPERTIES: usize = 8;
pub const VOCAB_SIZE: usize = BIN_BASE as usize + N_BINS;

/// Tokens around the sequence in a conditioned example: task, 8 bins, SEP, EOS.
pub const CONDITIONED_OVERHEAD: usize = 1 + N_PROPERTIES + 1 + 1;
pub const DEFAULT_MAX_LEN: usize = 512;

pub const EOS_TOKEN: &str = "<EOS>";
pub const PAD_TOKEN: &str = "<PAD>";
pub const GEN_TOKEN: &str = "<GenerateSequence>";
pub const EST_TOKEN: &str = "<EstimateProperty>";
pub const SEP_TOKEN: &str = "<SEP>";

pub fn bin_token(bin: usize) -> TokenId {
    BIN_BASE + bin as TokenId
}

pub fn is_bin(id: TokenId) -> bool {
    (BIN_BASE..BIN_BASE + N_BINS as TokenId).contains(&id)
}

pub fn is_residue(id: TokenId) -> bool {
    (id as usize) < N_RESIDUES
}

/// The fixed token table. Ids are dense from 0; `<PAD>` maps to the `<EOS>` id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::standard()
    }
}

impl Vocabulary {
    pub fn standard() -> Self {
        let mut tokens: Vec<String> = ALPHABET.iter().map(|&b| (b as char).to_string()).collect();
        for t in [EOS_TOKEN, GEN_TOKEN, EST_TOKEN, SEP_TOKEN] {
            tokens.push(t.to_string());
        }
        tokens.extend((0..N_BINS).map(|b| format!("B{b:03}")));
        debug_assert_eq!(tokens.len(), VOCAB_SIZE);
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        if token == PAD_TOKEN {
            return Some(PAD);
        }
        self.tokens.iter().position(|t| t == token).map(|i| i as TokenId)
    }

    pub fn to_map(&self) -> BTreeMap<String, TokenId> {
        let mut map: BTreeMap<String, TokenId> =
            self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as TokenId)).collect();
        map.insert(PAD_TOKEN.to_string(), PAD);
        map
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_map()).expect("string map serializes")
    }

    /// Parse a `{token: id}` map. Only the standard table is accepted, so a
    /// mismatched vocabulary is caught when models or logits are loaded.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: BTreeMap<String, TokenId> = serde_json::from_str(text)?;
        let standard = Self::standard();
        if map != standard.to_map() {
            return Err(Error::Config("vocabulary does not match the built-in token table".into()));
        }
        Ok(standard)
    }
}

pub fn encode_sequence(seq: &AminoAcidSequence) -> Vec<TokenId> {
    seq.as_bytes()
        .iter()
        .map(|&b| residue_index(b).expect("validated residue") as TokenId)
        .collect()
}

/// Residue string for `ids`. Other special tokens are skipped and decoding
/// stops at the first EOS. The result may be empty.
pub fn decode_tokens(ids: &[TokenId]) -> Result<String> {
    let mut out = String::new();
    for &id in ids {
        if id == EOS {
            break;
        }
        if is_residue(id) {
            out.push(ALPHABET[id as usize] as char);
        } else if id as usize >= VOCAB_SIZE {
            return Err(Error::Decode(format!("unknown token id {id}")));
        }
    }
    Ok(out)
}

pub fn quantize(x: f64) -> usize {
    (x.clamp(0.0, 1.0) * 100.0).round() as usize
}

pub fn encode_property_vector(v: &PropertyVector) -> Result<[TokenId; N_PROPERTIES]> {
    if !v.normalized {
        return Err(Error::State("property vector must be normalized before tokenization".into()));
    }
    v.validate()?;
    Ok(v.to_array().map(|x| bin_token(quantize(x))))
}

pub fn decode_property_tokens(ids: &[TokenId]) -> Result<PropertyVector> {
    if ids.len() != N_PROPERTIES {
        return Err(Error::Decode(format!("expected {N_PROPERTIES} bin tokens, got {}", ids.len())));
    }
    let mut v = [0.0; N_PROPERTIES];
    for (slot, &id) in v.iter_mut().zip(ids) {
        if !is_bin(id) {
            return Err(Error::Decode(format!("token id {id} is not a property bin")));
        }
        *slot = (id - BIN_BASE) as f64 / 100.0;
    }
    Ok(PropertyVector::from_array(v, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// properties -> sequence
    Generate,
    /// sequence -> properties
    Estimate,
}

/// A padded token stream with its loss mask.
///
/// `mask[t] = 1` means token `t` is a prediction target (predicted from
/// positions `< t`). `len` counts the real tokens before padding, which
/// cannot be recovered from the ids because PAD equals EOS.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub ids: Vec<TokenId>,
    pub mask: Vec<u8>,
    pub len: usize,
    /// `None` for plain language-model examples.
    pub direction: Option<Direction>,
    /// Residues dropped from the right to fit.
    pub truncated: usize,
}

impl EncodedExample {
    pub fn real_ids(&self) -> &[TokenId] {
        &self.ids[..self.len]
    }

    pub fn real_mask(&self) -> &[u8] {
        &self.mask[..self.len]
    }

    pub fn active(&self) -> usize {
        self.mask.iter().map(|&m| m as usize).sum()
    }

    fn pad_to(mut self, max_len: usize) -> Self {
        self.ids.resize(max_len, PAD);
        self.mask.resize(max_len, 0);
        self
    }
}

fn fit(seq: &AminoAcidSequence, room: usize) -> (Vec<TokenId>, usize) {
    let mut ids = encode_sequence(seq);
    let dropped = ids.len().saturating_sub(room);
    ids.truncate(room);
    (ids, dropped)
}

fn check_len(max_len: usize, overhead: usize) -> Result<()> {
    if max_len <= overhead {
        return Err(Error::Config(format!("max_len {max_len} leaves no room for residues")));
    }
    Ok(())
}

/// Lay out one direction-tagged example, padded to `max_len`.
pub fn build_example(
    direction: Direction,
    seq: &AminoAcidSequence,
    v: &PropertyVector,
    max_len: usize,
) -> Result<EncodedExample> {
    check_len(max_len, CONDITIONED_OVERHEAD)?;
    let bins = encode_property_vector(v)?;
    let (residues, truncated) = fit(seq, max_len - CONDITIONED_OVERHEAD);
    let n = residues.len();
    let (ids, mask) = match direction {
        Direction::Generate => {
            let mut ids = vec![TASK_GEN];
            ids.extend(bins);
            ids.push(SEP);
            ids.extend(residues);
            ids.push(EOS);
            let mut mask = vec![0u8; 2 + N_PROPERTIES];
            mask.extend(std::iter::repeat_n(1, n + 1));
            (ids, mask)
        }
        Direction::Estimate => {
            let mut ids = vec![TASK_EST];
            ids.extend(residues);
            ids.push(SEP);
            ids.extend(bins);
            ids.push(EOS);
            let mut mask = vec![0u8; n + 2];
            mask.extend(std::iter::repeat_n(1, N_PROPERTIES + 1));
            (ids, mask)
        }
    };
    let len = ids.len();
    Ok(EncodedExample { ids, mask, len, direction: Some(direction), truncated }.pad_to(max_len))
}

/// Unconditioned layout `[EOS, sequence, EOS]` used for distillation and
/// repeat fine-tuning; the leading EOS doubles as a start token.
pub fn build_lm_example(seq: &AminoAcidSequence, max_len: usize) -> Result<EncodedExample> {
    check_len(max_len, 2)?;
    let (residues, truncated) = fit(seq, max_len - 2);
    let n = residues.len();
    let mut ids = vec![EOS];
    ids.extend(residues);
    ids.push(EOS);
    let mut mask = vec![0u8];
    mask.extend(std::iter::repeat_n(1, n + 1));
    let len = ids.len();
    Ok(EncodedExample { ids, mask, len, direction: None, truncated }.pad_to(max_len))
}

pub fn generate_prompt(v: &PropertyVector) -> Result<Vec<TokenId>> {
    let mut ids = vec![TASK_GEN];
    ids.extend(encode_property_vector(v)?);
    ids.push(SEP);
    Ok(ids)
}

pub fn estimate_prompt(seq: &AminoAcidSequence) -> Vec<TokenId> {
    let mut ids = vec![TASK_EST];
    ids.extend(encode_sequence(seq));
    ids.push(SEP);
    ids
}

pub fn unconditional_prompt() -> Vec<TokenId> {
    vec![EOS]
}

/// Running totals of truncation across a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TruncationStats {
    pub examples: usize,
    pub truncated_examples: usize,
    pub dropped_residues: usize,
}

impl TruncationStats {
    pub fn record(&mut self, ex: &EncodedExample) {
        self.examples += 1;
        if ex.truncated > 0 {
            self.truncated_examples += 1;
            self.dropped_residues += ex.truncated;
        }
    }
}
