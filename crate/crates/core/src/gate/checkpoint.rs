// SPDX-License-Identifier: Apache-2.0
//! Model checkpoint file.
//!
//! Four newline-terminated lines:
//!
//! ```text
//! FSMREG-GATE 1
//! {"format_version":1,"scalar":"f64","heads":4,...}
//! <base64 of all parameters as little-endian f64>
//! sha256 <hex digest of the three lines above>
//! ```

use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layer::Activation;
use super::model::{GateModel, ModelShape, Parameters};
use crate::{Error, Result, Scalar};

pub const CHECKPOINT_MAGIC: &str = "FSMREG-GATE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    scalar: String,
    heads: usize,
    activation: Activation,
    output_activation: Activation,
    seed: u64,
    shape: ModelShape,
    encoder: Vec<[usize; 2]>,
    decoder: Vec<[usize; 2]>,
    parameter_count: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn checkpoint_bytes<T: Scalar>(model: &GateModel<T>) -> Vec<u8> {
    let meta = Metadata {
        format_version: CHECKPOINT_VERSION,
        scalar: T::NAME.to_string(),
        heads: model.heads,
        activation: model.activation,
        output_activation: model.output_activation,
        seed: model.seed,
        shape: model.shape,
        encoder: model.params.encoder.iter().map(|l| [l.d_in(), l.d_out()]).collect(),
        decoder: model.params.decoder.iter().map(|l| [l.d_in(), l.d_out()]).collect(),
        parameter_count: model.params.len(),
    };
    let mut raw = Vec::with_capacity(meta.parameter_count * 8);
    for x in model.params.to_flat() {
        raw.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
    }
    let mut body = format!(
        "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n{}\n{}\n",
        serde_json::to_string(&meta).expect("metadata serializes"),
        BASE64.encode(&raw)
    )
    .into_bytes();
    let digest = hex(&Sha256::digest(&body));
    body.extend_from_slice(format!("sha256 {digest}\n").as_bytes());
    body
}

pub fn checkpoint_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<GateModel<T>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Checkpoint("not UTF-8".into()))?;
    let Some(header_end) = text.find('\n') else {
        return Err(Error::Checksum);
    };
    let header = &text[..header_end];
    let mut parts = header.split(' ');
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let version = parts.next().and_then(|v| v.parse::<u32>().ok());
    if version != Some(CHECKPOINT_VERSION) {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {:?}, expected {CHECKPOINT_VERSION}",
            parts.clone().next().unwrap_or("")
        )));
    }

    let lines: Vec<&str> = text.split_terminator('\n').collect();
    if lines.len() != 4 || !text.ends_with('\n') {
        return Err(Error::Checksum);
    }
    let body_len = lines[0].len() + lines[1].len() + lines[2].len() + 3;
    let Some(stored) = lines[3].strip_prefix("sha256 ") else {
        return Err(Error::Checksum);
    };
    if hex(&Sha256::digest(&bytes[..body_len])) != stored {
        return Err(Error::Checksum);
    }

    let meta: Metadata =
        serde_json::from_str(lines[1]).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "metadata version {} does not match {CHECKPOINT_VERSION}",
            meta.format_version
        )));
    }
    let raw = BASE64
        .decode(lines[2])
        .map_err(|e| Error::Checkpoint(format!("parameters: {e}")))?;
    if raw.len() != meta.parameter_count * 8 {
        return Err(Error::Checkpoint("parameter count does not match payload".into()));
    }
    let mut params = Parameters::<T>::zeros(meta.shape, meta.heads);
    let dims = |ls: &[super::layer::AttentionLayer<T>]| ls.iter().map(|l| [l.d_in(), l.d_out()]).collect::<Vec<_>>();
    if dims(&params.encoder) != meta.encoder || dims(&params.decoder) != meta.decoder {
        return Err(Error::Checkpoint("layer shapes do not match the model shape".into()));
    }
    let flat: Vec<T> = raw
        .chunks_exact(8)
        .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    params.copy_from_flat(&flat)?;
    Ok(GateModel {
        shape: meta.shape,
        heads: meta.heads,
        activation: meta.activation,
        output_activation: meta.output_activation,
        seed: meta.seed,
        params,
    })
}

pub fn save_model<T: Scalar>(model: &GateModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<GateModel<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
