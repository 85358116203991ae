//! Model directory format, version 1:
//!
//! - `metadata.json` — config, training metadata, vocab hashes, format version
//! - `input_vocab.txt`, `output_vocab.txt` — one token per line
//! - `params.bin` — named flat f64 arrays, self-describing:
//!   magic `MWPX`, u32 version, u32 array count, then per array
//!   u16 name length + name, u8 ndim, u64 dims, little-endian f64 data.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::net::{NetParams, NetShape};
use super::{ModelMetadata, SolverConfig, SolverError, TrainedModel, Vocab};

const MAGIC: &[u8; 4] = b"MWPX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct MetadataFile {
    format_version: u32,
    config: SolverConfig,
    metadata: ModelMetadata,
    input_vocab_sha256: String,
    output_vocab_sha256: String,
}

pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<(), SolverError> {
    std::fs::create_dir_all(dir)?;
    let meta = MetadataFile {
        format_version: FORMAT_VERSION,
        config: model.config.clone(),
        metadata: model.metadata.clone(),
        input_vocab_sha256: model.input_vocab.sha256(),
        output_vocab_sha256: model.output_vocab.sha256(),
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| SolverError::Format(e.to_string()))?;
    std::fs::write(dir.join("metadata.json"), json)?;
    std::fs::write(
        dir.join("input_vocab.txt"),
        model.input_vocab.tokens().join("\n") + "\n",
    )?;
    std::fs::write(
        dir.join("output_vocab.txt"),
        model.output_vocab.tokens().join("\n") + "\n",
    )?;

    let mut buf = Vec::new();
    write_params(&mut buf, model.params())?;
    std::fs::write(dir.join("params.bin"), buf)?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<TrainedModel, SolverError> {
    let meta_path = dir.join("metadata.json");
    if !meta_path.exists() {
        return Err(SolverError::Format(format!(
            "{} is not a model directory (metadata.json missing)",
            dir.display()
        )));
    }
    let meta: MetadataFile = serde_json::from_str(&std::fs::read_to_string(meta_path)?)
        .map_err(|e| SolverError::Format(format!("metadata.json: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(SolverError::VersionMismatch {
            found: meta.format_version,
            expected: FORMAT_VERSION,
        });
    }

    let input_vocab = read_vocab(&dir.join("input_vocab.txt"))?;
    let output_vocab = read_vocab(&dir.join("output_vocab.txt"))?;
    if input_vocab.sha256() != meta.input_vocab_sha256 {
        return Err(SolverError::Format("input vocab hash mismatch".into()));
    }
    if output_vocab.sha256() != meta.output_vocab_sha256 {
        return Err(SolverError::Format("output vocab hash mismatch".into()));
    }

    let shape = NetShape {
        cell: meta.config.cell,
        layers: meta.config.layers,
        embedding: meta.config.embedding_dim,
        hidden: meta.config.hidden_dim,
        input_vocab: input_vocab.len(),
        output_vocab: output_vocab.len(),
    };
    let bytes = std::fs::read(dir.join("params.bin"))?;
    let params = read_params(&bytes, &shape)?;

    Ok(TrainedModel::from_parts(
        meta.config,
        input_vocab,
        output_vocab,
        meta.metadata,
        params,
    ))
}

fn read_vocab(path: &Path) -> Result<Vocab, SolverError> {
    let text = std::fs::read_to_string(path)?;
    let tokens: Vec<String> = text.lines().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(SolverError::Format(format!("{} is empty", path.display())));
    }
    Ok(Vocab::from_tokens(tokens))
}

fn write_params<W: Write>(w: &mut W, params: &NetParams) -> Result<(), SolverError> {
    let tensors = params.tensors();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[2u8])?;
        w.write_all(&(t.nrows() as u64).to_le_bytes())?;
        w.write_all(&(t.ncols() as u64).to_le_bytes())?;
        for v in t.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_params(bytes: &[u8], shape: &NetShape) -> Result<NetParams, SolverError> {
    let mut cursor = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
    if &magic != MAGIC {
        return Err(SolverError::Format("params.bin has a bad magic number".into()));
    }
    let version = read_u32(&mut cursor)?;
    if version != FORMAT_VERSION {
        return Err(SolverError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let count = read_u32(&mut cursor)? as usize;

    let mut entries: Vec<(String, Array2<f64>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(&mut cursor)? as usize;
        let mut name = vec![0u8; name_len];
        cursor
            .read_exact(&mut name)
            .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| SolverError::Format("tensor name is not UTF-8".into()))?;
        let mut ndim = [0u8; 1];
        cursor
            .read_exact(&mut ndim)
            .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
        if ndim[0] != 2 {
            return Err(SolverError::Format(format!(
                "tensor {name} has unsupported rank {}",
                ndim[0]
            )));
        }
        let rows = read_u64(&mut cursor)? as usize;
        let cols = read_u64(&mut cursor)? as usize;
        let mut data = vec![0f64; rows * cols];
        for v in data.iter_mut() {
            let mut b = [0u8; 8];
            cursor
                .read_exact(&mut b)
                .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
            *v = f64::from_le_bytes(b);
        }
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| SolverError::Format(format!("tensor {name}: {e}")))?;
        entries.push((name, arr));
    }

    // Assemble by name against a zero-initialized skeleton of the right shape.
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
    let mut params = NetParams::init(shape, &mut rng);
    {
        let mut targets = params.tensors_mut();
        if targets.len() != entries.len() {
            return Err(SolverError::Format(format!(
                "expected {} tensors, file has {}",
                targets.len(),
                entries.len()
            )));
        }
        for (name, arr) in entries {
            let slot = targets
                .iter_mut()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| SolverError::Format(format!("unexpected tensor {name}")))?;
            if slot.1.raw_dim() != arr.raw_dim() {
                return Err(SolverError::Format(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    arr.shape(),
                    slot.1.shape()
                )));
            }
            *slot.1 = arr;
        }
    }
    Ok(params)
}

fn read_u16(c: &mut std::io::Cursor<&[u8]>) -> Result<u16, SolverError> {
    let mut b = [0u8; 2];
    c.read_exact(&mut b)
        .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32(c: &mut std::io::Cursor<&[u8]>) -> Result<u32, SolverError> {
    let mut b = [0u8; 4];
    c.read_exact(&mut b)
        .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(c: &mut std::io::Cursor<&[u8]>) -> Result<u64, SolverError> {
    let mut b = [0u8; 8];
    c.read_exact(&mut b)
        .map_err(|_| SolverError::Format("params.bin is truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}
