use crate::data::{impute_and_normalize, EpisodeMatrix, NormStats};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lstm::{backward_bptt, stack_forward, Gradients, Mode};
use crate::model::ModelParams;
use crate::perseveration::{build_loss_weights, expand_sequence, WeightScheme};
use crate::rng::Rng;

/// A normalized episode ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub episode_id: String,
    pub times: Vec<f64>,
    pub inputs: Matrix,
    /// 1 for survival, 0 for death.
    pub target: f64,
}

pub fn prepare_examples<'a>(
    episodes: impl IntoIterator<Item = &'a EpisodeMatrix>,
    stats: &NormStats,
) -> Result<Vec<Example>> {
    episodes
        .into_iter()
        .map(|ep| {
            let norm = impute_and_normalize(ep, stats)?;
            Ok(Example {
                episode_id: ep.episode_id.clone(),
                times: ep.times.clone(),
                inputs: norm.values,
                target: ep.outcome.target(),
            })
        })
        .collect()
}

/// Zero-padded, perseveration-expanded sequences of one mini-batch. Every
/// sequence has `padded_len` rows; weights are zero on padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub example_indices: Vec<usize>,
    pub inputs: Vec<Matrix>,
    pub mask: Vec<Vec<bool>>,
    pub weights: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub padded_len: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Builds a batch from the given examples. Each sequence's loss weights
    /// are `1 / (n * k * B)`, so the batch loss is the mean of per-episode
    /// mean losses. `pad_to` may extend the padding beyond the longest member.
    pub fn build(
        examples: &[Example],
        indices: &[usize],
        k: usize,
        pad_to: usize,
    ) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::argument("empty batch"));
        }
        let longest = indices
            .iter()
            .map(|&i| examples[i].inputs.rows() * k)
            .max()
            .unwrap_or(0);
        let padded_len = longest.max(pad_to);
        let b = indices.len() as f64;
        let mut batch = Batch {
            example_indices: indices.to_vec(),
            inputs: Vec::with_capacity(indices.len()),
            mask: Vec::with_capacity(indices.len()),
            weights: Vec::with_capacity(indices.len()),
            targets: Vec::with_capacity(indices.len()),
            padded_len,
        };
        for &i in indices {
            let ex = &examples[i];
            let n = ex.inputs.rows();
            let e = expand_sequence(&ex.inputs, &vec![ex.target; n], k)?;
            let real = n * k;
            let f = ex.inputs.cols();
            let mut data = e.inputs.into_vec();
            data.resize(padded_len * f, 0.0);
            let mut w: Vec<f64> = build_loss_weights(n, k, WeightScheme::AllEqual)
                .into_iter()
                .map(|v| v / b)
                .collect();
            w.resize(padded_len, 0.0);
            let mut t = e.targets;
            t.resize(padded_len, ex.target);
            let mut m = vec![true; real];
            m.resize(padded_len, false);
            batch.inputs.push(Matrix::from_vec(padded_len, f, data)?);
            batch.weights.push(w);
            batch.targets.push(t);
            batch.mask.push(m);
        }
        Ok(batch)
    }
}

/// Shuffles, sorts pools of `4 * batch_size` examples by length, cuts them
/// into batches and shuffles the batch order.
pub fn make_batches(
    examples: &[Example],
    k: usize,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>> {
    if examples.is_empty() {
        return Err(Error::argument("no training examples"));
    }
    if batch_size == 0 {
        return Err(Error::argument("batch_size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    rng.shuffle(&mut order);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for pool in order.chunks_mut(4 * batch_size) {
        pool.sort_by_key(|&i| examples[i].inputs.rows());
        groups.extend(pool.chunks(batch_size).map(|c| c.to_vec()));
    }
    rng.shuffle(&mut groups);
    groups
        .iter()
        .map(|g| Batch::build(examples, g, k, 0))
        .collect()
}

/// Summed gradients of the batch (dropout masks drawn per sequence from
/// `rng`) plus one L2 term.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &Batch,
    dropout: f64,
    recurrent_dropout: f64,
    l2: f64,
    rng: &mut Rng,
) -> Result<Gradients> {
    let mut grads = params.zeros_like();
    let mut data_loss = 0.0;
    let mode = Mode::Train {
        dropout,
        recurrent_dropout,
    };
    for s in 0..batch.len() {
        let (_, tape) = stack_forward(params, &batch.inputs[s], mode, rng)?;
        let g = backward_bptt(params, &tape, &batch.targets[s], &batch.weights[s], 0.0)?;
        data_loss += g.data_loss;
        grads.accumulate(&g.grads)?;
    }
    params.add_l2_gradient(&mut grads, l2);
    Ok(Gradients {
        loss: data_loss + params.l2_penalty(l2),
        data_loss,
        grads,
    })
}
