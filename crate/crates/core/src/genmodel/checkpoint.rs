//! Self-describing parameter container.
//!
//! Layout: the 8-byte magic `SQOODCKP`, a little-endian `u64` header length,
//! a JSON header (format version, config, parameter names and shapes,
//! training step and seed, fingerprint), then every parameter as
//! little-endian IEEE-754 `f64` in declaration order. The fingerprint is the
//! SHA-256 of the header serialized with an empty fingerprint field followed
//! by the parameter bytes.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::numcore::Tensor;

const MAGIC: &[u8; 8] = b"SQOODCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header<C> {
    version: u32,
    kind: String,
    config: C,
    step: u64,
    seed: u64,
    params: Vec<ParamMeta>,
    fingerprint: String,
}

/// Decoded container contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Container<C> {
    pub kind: String,
    pub config: C,
    pub step: u64,
    pub seed: u64,
    pub params: Vec<(String, Tensor)>,
    pub fingerprint: String,
}

fn param_bytes(params: &[(String, Tensor)]) -> Vec<u8> {
    let n: usize = params.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(8 * n);
    for (_, t) in params {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn digest<C: Serialize>(header: &Header<C>, body: &[u8]) -> Result<String, ModelError> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(header)?);
    hasher.update(body);
    Ok(hex::encode(hasher.finalize()))
}

/// Fingerprint of a container's contents.
pub fn fingerprint<C: Serialize + Clone>(
    kind: &str,
    config: &C,
    step: u64,
    seed: u64,
    params: &[(String, Tensor)],
) -> Result<String, ModelError> {
    let header = Header {
        version: FORMAT_VERSION,
        kind: kind.to_string(),
        config: config.clone(),
        step,
        seed,
        params: params
            .iter()
            .map(|(n, t)| ParamMeta {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        fingerprint: String::new(),
    };
    digest(&header, &param_bytes(params))
}

pub fn encode<C: Serialize + Clone>(c: &Container<C>) -> Result<Vec<u8>, ModelError> {
    let body = param_bytes(&c.params);
    let header = Header {
        version: FORMAT_VERSION,
        kind: c.kind.clone(),
        config: c.config.clone(),
        step: c.step,
        seed: c.seed,
        params: c
            .params
            .iter()
            .map(|(n, t)| ParamMeta {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        fingerprint: c.fingerprint.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn decode<C: Serialize + DeserializeOwned + Clone>(
    bytes: &[u8],
    expected_kind: &str,
) -> Result<Container<C>, ModelError> {
    let corrupt = |m: &str| ModelError::CorruptCheckpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("missing magic bytes"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize
        .checked_add(hlen)
        .ok_or_else(|| corrupt("header length overflow"))?;
    if bytes.len() < body_start {
        return Err(corrupt("truncated header"));
    }
    // Peek at the version before committing to the config schema.
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes[16..body_start]).map_err(|e| corrupt(&format!("header: {e}")))?;
    let version = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if version != FORMAT_VERSION as u64 {
        return Err(ModelError::VersionMismatch {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let mut header: Header<C> = serde_json::from_value(raw).map_err(|e| corrupt(&format!("header: {e}")))?;
    if header.kind != expected_kind {
        return Err(ModelError::CorruptCheckpoint(format!(
            "expected a {expected_kind} checkpoint, found {}",
            header.kind
        )));
    }
    let body = &bytes[body_start..];
    let n: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    if body.len() != 8 * n {
        return Err(corrupt(&format!(
            "parameter block has {} bytes, expected {}",
            body.len(),
            8 * n
        )));
    }
    let stored = std::mem::take(&mut header.fingerprint);
    let actual = digest(&header, body)?;
    if stored != actual {
        return Err(ModelError::FingerprintMismatch { stored, actual });
    }
    let mut params = Vec::with_capacity(header.params.len());
    let mut offset = 0;
    for meta in &header.params {
        let len: usize = meta.shape.iter().product();
        let data = body[offset..offset + 8 * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += 8 * len;
        params.push((
            meta.name.clone(),
            Tensor::new(meta.shape.clone(), data).map_err(|e| corrupt(&e.to_string()))?,
        ));
    }
    Ok(Container {
        kind: header.kind,
        config: header.config,
        step: header.step,
        seed: header.seed,
        params,
        fingerprint: actual,
    })
}

pub fn save<C: Serialize + Clone>(c: &Container<C>, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode(c)?)?;
    Ok(())
}

pub fn load<C: Serialize + DeserializeOwned + Clone>(
    path: &Path,
    expected_kind: &str,
) -> Result<Container<C>, ModelError> {
    decode(&fs::read(path)?, expected_kind)
}
