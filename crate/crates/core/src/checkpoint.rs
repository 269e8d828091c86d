//! Versioned JSON checkpoints. Every parameter tensor is stored by name as
//! base64 of its row-major little-endian `f64` bytes, next to the metadata
//! needed to rebuild and use the model (variant, architecture, init,
//! normalization statistics, training configuration).

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{ModelMeta, ModelParams, Variant};
use crate::trainer::TrainingConfig;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const GATE_ORDER: &str = "i,f,g,o";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub normalization: NormStats,
    pub training: TrainingConfig,
    pub best_epoch: Option<usize>,
    /// Digest of the cohort and split the model was trained on.
    pub cohort_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointRecord {
    format_version: u32,
    variant: Variant,
    k: usize,
    input_size: usize,
    layer_sizes: Vec<usize>,
    init: String,
    forget_bias: f64,
    seed: u64,
    gate_order: String,
    best_epoch: Option<usize>,
    cohort_fingerprint: String,
    normalization: NormStats,
    training: TrainingConfig,
    tensors: Vec<TensorRecord>,
}

fn encode(m: &Matrix) -> String {
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for v in m.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

fn decode(t: &TensorRecord) -> Result<Matrix> {
    let loc = format!("tensor {}", t.name);
    let bytes = STANDARD
        .decode(&t.data)
        .map_err(|e| Error::parse(&loc, format!("bad base64: {e}")))?;
    let expected = t
        .rows
        .checked_mul(t.cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::parse(&loc, "shape overflows"))?;
    if bytes.len() != expected {
        return Err(Error::parse(
            &loc,
            format!("{} bytes for a {}x{} tensor", bytes.len(), t.rows, t.cols),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(&loc, "non-finite weight"));
    }
    Matrix::from_vec(t.rows, t.cols, data)
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let meta = &self.params.meta;
        let record = CheckpointRecord {
            format_version: CHECKPOINT_FORMAT_VERSION,
            variant: meta.variant,
            k: meta.variant.k(),
            input_size: meta.input_size,
            layer_sizes: meta.layer_sizes.clone(),
            init: meta.init.clone(),
            forget_bias: meta.forget_bias,
            seed: meta.seed,
            gate_order: GATE_ORDER.to_string(),
            best_epoch: self.best_epoch,
            cohort_fingerprint: self.cohort_fingerprint.clone(),
            normalization: self.normalization.clone(),
            training: self.training.clone(),
            tensors: self
                .params
                .tensors()
                .iter()
                .map(|t| TensorRecord {
                    name: t.name.clone(),
                    rows: t.tensor.rows(),
                    cols: t.tensor.cols(),
                    data: encode(t.tensor),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&record)
            .map_err(|e| Error::Inconsistent(format!("serializing checkpoint: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_checkpoint(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }
}

/// Parses and fully validates a checkpoint document.
pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let r: CheckpointRecord =
        serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    if r.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::parse(
            "checkpoint",
            format!("unsupported format_version {}", r.format_version),
        ));
    }
    if r.gate_order != GATE_ORDER {
        return Err(Error::parse(
            "checkpoint",
            format!("unsupported gate order {:?}", r.gate_order),
        ));
    }
    if r.k != r.variant.k() {
        return Err(Error::parse(
            "checkpoint",
            format!("k = {} disagrees with the variant", r.k),
        ));
    }
    r.variant
        .validate()
        .map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    if r.normalization.channels.len() != r.input_size
        || r.normalization.mean.len() != r.input_size
        || r.normalization.sd.len() != r.input_size
        || r.normalization.clamped.len() != r.input_size
    {
        return Err(Error::parse(
            "checkpoint",
            "normalization does not match input_size",
        ));
    }
    // Build the expected structure, then overwrite every tensor by name.
    let mut params = ModelParams::init(r.variant, r.input_size, &r.layer_sizes, r.seed)
        .map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    params.meta = ModelMeta {
        variant: r.variant,
        input_size: r.input_size,
        layer_sizes: r.layer_sizes.clone(),
        init: r.init.clone(),
        forget_bias: r.forget_bias,
        seed: r.seed,
    };
    {
        let slots = params.tensors_mut();
        if slots.len() != r.tensors.len() {
            return Err(Error::parse(
                "checkpoint",
                format!("{} tensors, expected {}", r.tensors.len(), slots.len()),
            ));
        }
        for ((name, slot), rec) in slots.into_iter().zip(&r.tensors) {
            if rec.name != name {
                return Err(Error::parse(
                    "checkpoint",
                    format!("expected tensor {name}, found {}", rec.name),
                ));
            }
            let m = decode(rec)?;
            if m.shape() != slot.shape() {
                return Err(Error::parse(
                    format!("tensor {name}"),
                    format!("shape {:?}, expected {:?}", m.shape(), slot.shape()),
                ));
            }
            *slot = m;
        }
    }
    params
        .check()
        .map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    r.training
        .validate()
        .map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    Ok(Checkpoint {
        params,
        normalization: r.normalization,
        training: r.training,
        best_epoch: r.best_epoch,
        cohort_fingerprint: r.cohort_fingerprint,
    })
}
