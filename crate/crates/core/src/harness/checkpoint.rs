//! Binary checkpoint: 8-byte magic `SHRPBNC1`, `u32` version, 32-byte config
//! hash, `u64` parameter count, then the parameters as `f64`. All integers and
//! floats little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::MlpSpec;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SHRPBNC1";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 32 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub model: MlpSpec,
    pub params: Vec<f64>,
    pub config_hash: [u8; 32],
    /// Epoch the weights come from; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_valid_acc: f64,
}

/// What the binary file itself carries.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointFile {
    pub version: u32,
    pub config_hash: [u8; 32],
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend(self.version.to_le_bytes());
        out.extend(self.config_hash);
        out.extend((self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend(p.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CheckpointFile> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checkpoint(format!(
            "file too short: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[..8])
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config_hash: [u8; 32] = bytes[12..44].try_into().expect("32 bytes");
    let count = u64::from_le_bytes(bytes[44..52].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {count} parameters ({} bytes), found {} bytes",
            count * 8,
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(CheckpointFile {
        version,
        config_hash,
        params,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<CheckpointFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
