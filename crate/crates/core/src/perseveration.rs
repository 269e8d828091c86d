//! Input perseveration: every time step is fed to the network `k` times in a
//! row and only the output of the last replication is kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lstm::predict;
use crate::model::{ModelParams, MAX_K};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerseverationConfig {
    pub k: usize,
}

impl PerseverationConfig {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=MAX_K).contains(&k) {
            return Err(Error::argument(format!(
                "perseveration k must be in 1..={MAX_K}, got {k}"
            )));
        }
        Ok(PerseverationConfig { k })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedSequence {
    /// `n * k` rows; row `i * k + j` is original row `i`.
    pub inputs: Matrix,
    /// `i * k + k - 1` for each original step `i`.
    pub keep_indices: Vec<usize>,
    pub targets: Vec<f64>,
    pub k: usize,
}

impl ExpandedSequence {
    pub fn original_len(&self) -> usize {
        self.keep_indices.len()
    }
}

pub fn keep_indices(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i * k + k - 1).collect()
}

pub fn expand_sequence(inputs: &Matrix, targets: &[f64], k: usize) -> Result<ExpandedSequence> {
    if k == 0 {
        return Err(Error::argument("perseveration k must be at least 1"));
    }
    let n = inputs.rows();
    if targets.len() != n {
        return Err(Error::argument(format!(
            "{n} input steps but {} targets",
            targets.len()
        )));
    }
    let f = inputs.cols();
    let mut data = Vec::with_capacity(n * k * f);
    let mut expanded_targets = Vec::with_capacity(n * k);
    for i in 0..n {
        for _ in 0..k {
            data.extend_from_slice(inputs.row(i));
            expanded_targets.push(targets[i]);
        }
    }
    Ok(ExpandedSequence {
        inputs: Matrix::from_vec(n * k, f, data)?,
        keep_indices: keep_indices(n, k),
        targets: expanded_targets,
        k,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    AllEqual,
}

/// Per-step loss weights over the expanded sequence; they sum to one.
pub fn build_loss_weights(n: usize, k: usize, scheme: WeightScheme) -> Vec<f64> {
    match scheme {
        WeightScheme::AllEqual => {
            let len = n * k;
            vec![1.0 / len as f64; len]
        }
    }
}

pub fn select_final_outputs(outputs: &[f64], keep_indices: &[usize]) -> Result<Vec<f64>> {
    let n = keep_indices.len();
    if n == 0 || !outputs.len().is_multiple_of(n) {
        return Err(Error::argument(format!(
            "{} outputs cannot be split into {n} replication blocks",
            outputs.len()
        )));
    }
    let k = outputs.len() / n;
    keep_indices
        .iter()
        .enumerate()
        .map(|(i, &idx)| {
            if idx != i * k + k - 1 {
                return Err(Error::argument(format!(
                    "keep index {idx} at step {i} does not mark the last of {k} replications"
                )));
            }
            Ok(outputs[idx])
        })
        .collect()
}

/// Inference-mode trajectory of an episode: one prediction per original row.
pub fn predict_trajectory(params: &ModelParams, inputs: &Matrix) -> Result<Vec<f64>> {
    let k = params.variant().k();
    if k == 1 {
        return predict(params, inputs);
    }
    let exp = expand_sequence(inputs, &vec![0.0; inputs.rows()], k)?;
    let y = predict(params, &exp.inputs)?;
    select_final_outputs(&y, &exp.keep_indices)
}
