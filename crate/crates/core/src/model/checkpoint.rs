//! `SGPT` checkpoint files.
//!
//! Layout: magic `SGPT`, u32 version, u64 header length, JSON header, then
//! every tensor as row-major little-endian f32 in directory order.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LoraAdapter, LoraConfig, ModelConfig, Params};
use crate::seqdata::uniprot::write_atomic;
use crate::seqdata::MinMaxScaler;
use crate::tokenizer::{TokenId, Vocabulary};

pub const MAGIC: &[u8; 4] = b"SGPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
    pub val_loss: Option<f64>,
    #[serde(default)]
    pub stage: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Params<f32>,
    pub adapter: Option<LoraAdapter<f32>>,
    pub meta: CheckpointMeta,
    /// Present on property-conditioned models.
    pub scaler: Option<MinMaxScaler>,
}

impl Checkpoint {
    pub fn new(params: Params<f32>) -> Self {
        Self { params, adapter: None, meta: CheckpointMeta::default(), scaler: None }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    vocabulary: BTreeMap<String, TokenId>,
    tensors: Vec<TensorEntry>,
    lora: Option<LoraConfig>,
    adapter_tensors: Vec<TensorEntry>,
    metadata: CheckpointMeta,
    scaler: Option<MinMaxScaler>,
}

fn directory<'a>(
    tensors: impl Iterator<Item = (String, &'a Array2<f32>)>,
    offset: &mut u64,
    payload: &mut Vec<u8>,
) -> Vec<TensorEntry> {
    tensors
        .map(|(name, t)| {
            let entry = TensorEntry { name, shape: [t.nrows(), t.ncols()], offset: *offset };
            for x in t.iter() {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            *offset += 4 * t.len() as u64;
            entry
        })
        .collect()
}

pub fn checkpoint_bytes(ck: &Checkpoint) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut offset = 0u64;
    let tensors = directory(ck.params.tensors().into_iter(), &mut offset, &mut payload);
    let adapter_tensors = ck
        .adapter
        .as_ref()
        .map(|a| directory(a.tensors().into_iter(), &mut offset, &mut payload))
        .unwrap_or_default();
    let header = Header {
        config: ck.params.config,
        vocabulary: Vocabulary::standard().to_map(),
        tensors,
        lora: ck.adapter.as_ref().map(|a| a.config.clone()),
        adapter_tensors,
        metadata: ck.meta.clone(),
        scaler: ck.scaler.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(ck)?)
}

fn read_tensors(entries: &[TensorEntry], payload: &[u8]) -> Result<Vec<(String, Array2<f32>)>> {
    entries
        .iter()
        .map(|e| {
            let n = e.shape[0] * e.shape[1];
            let start = e.offset as usize;
            let end = start + 4 * n;
            let bytes = payload
                .get(start..end)
                .ok_or_else(|| Error::Integrity(format!("tensor {} extends past end of file", e.name)))?;
            let data: Vec<f32> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let t = Array2::from_shape_vec((e.shape[0], e.shape[1]), data).expect("length checked");
            Ok((e.name.clone(), t))
        })
        .collect()
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    if bytes.len() < 16 {
        return Err(Error::Integrity("checkpoint truncated inside preamble".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Integrity("checkpoint truncated inside header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if header.vocabulary != Vocabulary::standard().to_map() || header.config.vocab_size != header.vocabulary.len() - 1 {
        return Err(Error::Config("checkpoint vocabulary differs from the built-in token table".into()));
    }
    let payload = &bytes[header_end..];
    let expected: usize = header
        .tensors
        .iter()
        .chain(&header.adapter_tensors)
        .map(|e| 4 * e.shape[0] * e.shape[1])
        .sum();
    if payload.len() != expected {
        return Err(Error::Integrity(format!(
            "payload is {} bytes, directory describes {expected}",
            payload.len()
        )));
    }
    let params = Params::from_named(header.config, read_tensors(&header.tensors, payload)?)?;
    let adapter = match header.lora {
        Some(cfg) => Some(LoraAdapter::from_named(cfg, &params, read_tensors(&header.adapter_tensors, payload)?)?),
        None if !header.adapter_tensors.is_empty() => {
            return Err(Error::Integrity("adapter tensors without adapter config".into()))
        }
        None => None,
    };
    Ok(Checkpoint { params, adapter, meta: header.metadata, scaler: header.scaler })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{attach_lora, init_model};

    fn sample_checkpoint(with_adapter: bool) -> Checkpoint {
        let params = init_model(&crate::model::ModelConfig::desk_tiny(), 9).unwrap();
        let adapter = with_adapter.then(|| {
            let mut a = attach_lora(&params, &LoraConfig::default(), 2).unwrap();
            a.pairs[3].b.fill(-0.25);
            a
        });
        Checkpoint {
            params,
            adapter,
            meta: CheckpointMeta { seed: 9, epoch: 3, val_loss: Some(1.25), stage: "test".into() },
            scaler: None,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for with in [false, true] {
            let ck = sample_checkpoint(with);
            let path = dir.path().join(format!("m{with}.sgpt"));
            save_checkpoint(&path, &ck).unwrap();
            let back = load_checkpoint(&path).unwrap();
            for ((na, a), (nb, b)) in ck.params.tensors().into_iter().zip(back.params.tensors()) {
                assert_eq!(na, nb);
                assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            assert_eq!(back, ck);
        }
    }

    #[test]
    fn header_echoes_config() {
        let bytes = checkpoint_bytes(&sample_checkpoint(false)).unwrap();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
        assert_eq!(header["config"]["n_embd"], 16);
        assert_eq!(header["config"]["n_layer"], 2);
    }

    #[test]
    fn damaged_files() {
        let bytes = checkpoint_bytes(&sample_checkpoint(true)).unwrap();
        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(checkpoint_from_bytes(truncated), Err(Error::Integrity(_))));
        assert!(matches!(checkpoint_from_bytes(&bytes[..12]), Err(Error::Integrity(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(checkpoint_from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(checkpoint_from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn shape_mismatch_is_integrity_error() {
        let ck = sample_checkpoint(false);
        let bytes = checkpoint_bytes(&ck).unwrap();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[16..16 + len].to_vec()).unwrap();
        let mut patched: serde_json::Value = serde_json::from_str(&header).unwrap();
        patched["config"]["hidden_dim"] = 32.into();
        let json = serde_json::to_vec(&patched).unwrap();
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&bytes[16 + len..]);
        assert!(matches!(checkpoint_from_bytes(&out), Err(Error::Integrity(_))));
    }
}
