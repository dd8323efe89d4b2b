//! Self-describing checkpoint archive.
//!
//! Layout: 8 magic bytes, a little-endian `u64` header length, a JSON header
//! (configuration, labels, training run, tensor index) and the raw
//! little-endian `f32` tensor data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::net::{STNetConfig, StNet};
use super::train::TrainRun;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"HBSTNET1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: STNetConfig,
    run: TrainRun,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub net: StNet,
    /// Training settings, label set and per-epoch log.
    pub run: TrainRun,
    /// Hex sha256 of the archive bytes.
    pub fingerprint: String,
}

impl Checkpoint {
    pub fn labels(&self) -> &[String] {
        &self.run.labels
    }
}

pub fn encode(net: &StNet, run: &TrainRun) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    let mut offset = 0;
    for (name, shape, data) in net.tensors() {
        tensors.push(TensorEntry {
            name,
            shape,
            offset,
            len: data.len(),
        });
        offset += data.len();
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&Header {
        config: net.config().clone(),
        run: run.clone(),
        tensors,
    })?;
    let mut out = Vec::with_capacity(16 + header.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Writes atomically through a temporary sibling file.
pub fn save(path: impl AsRef<Path>, net: &StNet, run: &TrainRun) -> Result<String> {
    let path = path.as_ref();
    let bytes = encode(net, run)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&bytes)?;
    fs::rename(&tmp, path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |r: &str| Error::format("checkpoint", r);
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| Error::format("checkpoint", e))?;
    let blob = &bytes[16 + hlen..];
    if !blob.len().is_multiple_of(4) {
        return Err(bad("tensor data is not a whole number of floats"));
    }
    let floats: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut net = StNet::new(header.config.clone(), 0)?;
    let expected = net.tensors();
    if expected.len() != header.tensors.len() {
        return Err(bad("tensor count does not match the configuration"));
    }
    for ((name, shape, _), e) in expected.iter().zip(&header.tensors) {
        if name != &e.name || shape != &e.shape {
            return Err(Error::format("checkpoint", format!("unexpected tensor {}", e.name)));
        }
    }
    drop(expected);
    for (dst, e) in net.tensors_mut().into_iter().zip(&header.tensors) {
        let src = floats
            .get(e.offset..e.offset + e.len)
            .ok_or_else(|| Error::format("checkpoint", format!("tensor {} out of bounds", e.name)))?;
        if dst.len() != src.len() {
            return Err(Error::format("checkpoint", format!("tensor {} has wrong length", e.name)));
        }
        dst.copy_from_slice(src);
    }
    Ok(Checkpoint {
        net,
        run: header.run,
        fingerprint: hex::encode(Sha256::digest(bytes)),
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode(&fs::read(path)?)
}
