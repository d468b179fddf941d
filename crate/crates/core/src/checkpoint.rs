//! Versioned parameter container shared by trainable models.
//!
//! ```text
//! magic      8 bytes   "ATTRDIFF"
//! version    u32 LE    CONTAINER_VERSION
//! header_len u32 LE
//! header     JSON      {"kind": ..., "param_count": n, ...}
//! params     n × f64 LE
//! digest     32 bytes  SHA-256 of the params section
//! ```

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8; 8] = b"ATTRDIFF";
pub(crate) const CONTAINER_VERSION: u32 = 1;

pub(crate) fn encode<H: Serialize>(header: &H, params: &[f64]) -> Result<Vec<u8>> {
    let mut head = serde_json::to_value(header)?;
    head["param_count"] = params.len().into();
    let head = serde_json::to_vec(&head)?;
    let mut out = Vec::with_capacity(16 + head.len() + params.len() * 8 + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(&head);
    let start = out.len();
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out[start..]);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub(crate) fn write<H: Serialize>(path: &Path, header: &H, params: &[f64]) -> Result<()> {
    fs::write(path, encode(header, params)?)?;
    Ok(())
}

pub(crate) fn is_container(bytes: &[u8]) -> bool {
    bytes.len() >= 8 && &bytes[..8] == MAGIC
}

/// Parse a container, checking magic, version, kind and digest.
pub(crate) fn decode<H: DeserializeOwned>(
    path: &Path,
    bytes: &[u8],
    kind: &str,
) -> Result<(H, Vec<f64>)> {
    let bad = |reason: &str| Error::load(path, reason);
    if !is_container(bytes) {
        return Err(bad("missing checkpoint magic header"));
    }
    if bytes.len() < 16 {
        return Err(bad("truncated header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CONTAINER_VERSION {
        return Err(bad(&format!(
            "container version {version}, this build reads {CONTAINER_VERSION}"
        )));
    }
    let head_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let head_end = 16 + head_len;
    if bytes.len() < head_end {
        return Err(bad("truncated header"));
    }
    let head: serde_json::Value =
        serde_json::from_slice(&bytes[16..head_end]).map_err(|e| bad(&e.to_string()))?;
    if head["kind"] != kind {
        return Err(bad(&format!(
            "expected a {kind} checkpoint, found {}",
            head["kind"]
        )));
    }
    let n = head["param_count"]
        .as_u64()
        .ok_or_else(|| bad("header lacks param_count"))? as usize;
    let params_end = head_end + n * 8;
    if bytes.len() != params_end + 32 {
        return Err(bad("parameter section length does not match header"));
    }
    let digest = Sha256::digest(&bytes[head_end..params_end]);
    if digest.as_slice() != &bytes[params_end..] {
        return Err(bad("parameter digest mismatch (corrupt file)"));
    }
    let params = bytes[head_end..params_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let header = serde_json::from_value(head).map_err(|e| bad(&e.to_string()))?;
    Ok((header, params))
}

pub(crate) fn read<H: DeserializeOwned>(path: &Path, kind: &str) -> Result<(H, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::load(path, e))?;
    decode(path, &bytes, kind)
}
