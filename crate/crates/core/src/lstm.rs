//! Stacked LSTM forward pass and exact backpropagation through time.
//!
//! The stack is evaluated layer by layer over the whole sequence. Dropout
//! masks are drawn once per sequence: an input mask per layer applied to
//! `x_t`, and a recurrent mask applied to `h_{t-1}`. Kept units are scaled
//! by `1 / (1 - p)` at train time; inference applies no masks.

use crate::attention::{causal_attention_backward, causal_attention_forward, AttentionTape};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec_acc, outer_acc, sigmoid, tanh, vec_mat_acc, Matrix};
use crate::loss::bce_loss;
use crate::model::{DenseHead, LstmLayerParams, ModelParams, OutputLayer};
use crate::rng::Rng;

/// Multiplicative masks for one layer (entries are 0 or `1 / (1 - p)`).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMasks {
    pub input: Vec<f64>,
    pub recurrent: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<LayerMasks>,
}

fn draw_mask(rng: &mut Rng, n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - p);
    (0..n)
        .map(|_| if rng.bernoulli(p) { 0.0 } else { keep })
        .collect()
}

impl DropoutMasks {
    pub fn draw(
        params: &ModelParams,
        dropout: f64,
        recurrent_dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        for p in [dropout, recurrent_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::argument(format!(
                    "dropout rate must lie in [0, 1), got {p}"
                )));
            }
        }
        let layers = params
            .layers
            .iter()
            .map(|l| LayerMasks {
                input: draw_mask(rng, l.input_size(), dropout),
                recurrent: draw_mask(rng, l.hidden_size, recurrent_dropout),
            })
            .collect();
        Ok(DropoutMasks { layers })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Train {
        dropout: f64,
        recurrent_dropout: f64,
    },
    Infer,
}

/// One cell evaluation. `gates` holds the activated `[i, f, g, o]` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutput {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub gates: Vec<f64>,
}

/// Single LSTM step:
/// `i, f, o = sigmoid(.)`, `g = tanh(.)`, `c = f*c_prev + i*g`, `h = o*tanh(c)`.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmLayerParams,
    masks: Option<&LayerMasks>,
) -> Result<CellOutput> {
    let hs = params.hidden_size;
    if x.len() != params.input_size() {
        return Err(Error::shape((1, x.len()), params.w.shape(), "cell input"));
    }
    if h_prev.len() != hs || c_prev.len() != hs {
        return Err(Error::shape((1, h_prev.len()), (1, hs), "cell state"));
    }
    let (xm, hm) = apply_masks(x, h_prev, masks);
    let mut gates = vec![0.0; 4 * hs];
    let mut c = vec![0.0; hs];
    let mut tc = vec![0.0; hs];
    let mut h = vec![0.0; hs];
    cell_step(
        params, &xm, &hm, c_prev, &mut gates, &mut c, &mut tc, &mut h,
    );
    Ok(CellOutput { h, c, gates })
}

fn apply_masks(x: &[f64], h: &[f64], masks: Option<&LayerMasks>) -> (Vec<f64>, Vec<f64>) {
    match masks {
        Some(m) => (
            x.iter().zip(&m.input).map(|(a, b)| a * b).collect(),
            h.iter().zip(&m.recurrent).map(|(a, b)| a * b).collect(),
        ),
        None => (x.to_vec(), h.to_vec()),
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn cell_step(
    p: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
) {
    let hs = p.hidden_size;
    gates.copy_from_slice(p.b.data());
    vec_mat_acc(x, &p.w, gates);
    vec_mat_acc(h_prev, &p.u, gates);
    let (ifg, o) = gates.split_at_mut(3 * hs);
    let (i_f, g) = ifg.split_at_mut(2 * hs);
    let (i, f) = i_f.split_at_mut(hs);
    for j in 0..hs {
        i[j] = sigmoid(i[j]);
        f[j] = sigmoid(f[j]);
        g[j] = tanh(g[j]);
        o[j] = sigmoid(o[j]);
        c[j] = f[j] * c_prev[j] + i[j] * g[j];
        tanh_c[j] = tanh(c[j]);
        h[j] = o[j] * tanh_c[j];
    }
}

/// Per-layer cache for BPTT. Row `t` of each matrix belongs to step `t`.
#[derive(Clone, Debug)]
pub struct LayerTape {
    /// Masked layer input.
    pub x: Matrix,
    /// Masked previous hidden state.
    pub h_prev: Matrix,
    pub gates: Matrix,
    pub c: Matrix,
    pub tanh_c: Matrix,
    pub h: Matrix,
}

#[derive(Clone, Debug)]
pub enum OutputTape {
    Dense,
    Attention(AttentionTape),
}

#[derive(Clone, Debug)]
pub struct ForwardTape {
    pub layers: Vec<LayerTape>,
    pub masks: Option<DropoutMasks>,
    pub output: OutputTape,
    pub outputs: Vec<f64>,
}

impl ForwardTape {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn top_hidden(&self) -> &Matrix {
        &self.layers.last().expect("at least one layer").h
    }
}

fn layer_forward(p: &LstmLayerParams, x: &Matrix, masks: Option<&LayerMasks>) -> LayerTape {
    let steps = x.rows();
    let hs = p.hidden_size;
    let mut tape = LayerTape {
        x: x.clone(),
        h_prev: Matrix::zeros(steps, hs),
        gates: Matrix::zeros(steps, 4 * hs),
        c: Matrix::zeros(steps, hs),
        tanh_c: Matrix::zeros(steps, hs),
        h: Matrix::zeros(steps, hs),
    };
    if let Some(m) = masks {
        for t in 0..steps {
            for (v, s) in tape.x.row_mut(t).iter_mut().zip(&m.input) {
                *v *= s;
            }
        }
    }
    let zeros = vec![0.0; hs];
    let LayerTape {
        x: tx,
        h_prev,
        gates,
        c,
        tanh_c,
        h,
    } = &mut tape;
    for t in 0..steps {
        if t > 0 {
            let hp = h_prev.row_mut(t);
            hp.copy_from_slice(h.row(t - 1));
            if let Some(m) = masks {
                for (v, s) in hp.iter_mut().zip(&m.recurrent) {
                    *v *= s;
                }
            }
        }
        let (c_done, c_rest) = c.data_mut().split_at_mut(t * hs);
        let c_prev = if t > 0 {
            &c_done[(t - 1) * hs..]
        } else {
            &zeros[..]
        };
        cell_step(
            p,
            tx.row(t),
            h_prev.row(t),
            c_prev,
            gates.row_mut(t),
            &mut c_rest[..hs],
            tanh_c.row_mut(t),
            h.row_mut(t),
        );
    }
    tape
}

/// Gradients of one layer given upstream `dh` for every step. Returns the
/// parameter gradients and, when requested, the gradient with respect to
/// the (unmasked) layer input.
fn layer_backward(
    p: &LstmLayerParams,
    tape: &LayerTape,
    masks: Option<&LayerMasks>,
    dh_out: &Matrix,
    want_dx: bool,
) -> (LstmLayerParams, Option<Matrix>) {
    let steps = tape.h.rows();
    let hs = p.hidden_size;
    let mut grad = LstmLayerParams::zeros(p.input_size(), hs);
    let mut dx = want_dx.then(|| Matrix::zeros(steps, p.input_size()));
    let mut dh_next = vec![0.0; hs];
    let mut dc_next = vec![0.0; hs];
    let mut dz = vec![0.0; 4 * hs];
    let mut dh_masked = vec![0.0; hs];
    for t in (0..steps).rev() {
        let gates = tape.gates.row(t);
        let tc = tape.tanh_c.row(t);
        let up = dh_out.row(t);
        for j in 0..hs {
            let i = gates[j];
            let f = gates[hs + j];
            let g = gates[2 * hs + j];
            let o = gates[3 * hs + j];
            let c_prev = if t > 0 { tape.c.get(t - 1, j) } else { 0.0 };
            let dh = up[j] + dh_next[j];
            let d_o = dh * tc[j];
            let dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            dz[j] = dc * g * i * (1.0 - i);
            dz[hs + j] = dc * c_prev * f * (1.0 - f);
            dz[2 * hs + j] = dc * i * (1.0 - g * g);
            dz[3 * hs + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        outer_acc(tape.x.row(t), &dz, &mut grad.w);
        outer_acc(tape.h_prev.row(t), &dz, &mut grad.u);
        for (gb, d) in grad.b.data_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        if let Some(dx) = dx.as_mut() {
            let row = dx.row_mut(t);
            mat_vec_acc(&p.w, &dz, row);
            if let Some(m) = masks {
                for (v, s) in row.iter_mut().zip(&m.input) {
                    *v *= s;
                }
            }
        }
        dh_masked.fill(0.0);
        mat_vec_acc(&p.u, &dz, &mut dh_masked);
        match masks {
            Some(m) => {
                for j in 0..hs {
                    dh_next[j] = dh_masked[j] * m.recurrent[j];
                }
            }
            None => dh_next.copy_from_slice(&dh_masked),
        }
    }
    (grad, dx)
}

fn dense_forward(head: &DenseHead, h: &Matrix) -> Vec<f64> {
    let b = head.b.data()[0];
    let w = head.w.data();
    (0..h.rows())
        .map(|t| sigmoid(crate::linalg::dot(h.row(t), w) + b))
        .collect()
}

/// Forward pass with explicit (possibly absent) dropout masks.
pub fn stack_forward_with_masks(
    params: &ModelParams,
    inputs: &Matrix,
    masks: Option<DropoutMasks>,
) -> Result<(Vec<f64>, ForwardTape)> {
    if inputs.rows() == 0 {
        return Err(Error::argument("empty input sequence"));
    }
    if inputs.cols() != params.input_size() {
        return Err(Error::shape(
            inputs.shape(),
            (inputs.rows(), params.input_size()),
            "model input",
        ));
    }
    if let Some(m) = &masks {
        if m.layers.len() != params.layers.len() {
            return Err(Error::argument("dropout masks do not match layer count"));
        }
    }
    let mut layer_tapes: Vec<LayerTape> = Vec::with_capacity(params.layers.len());
    for (l, layer) in params.layers.iter().enumerate() {
        let m = masks.as_ref().map(|m| &m.layers[l]);
        let x = match layer_tapes.last() {
            Some(prev) => &prev.h,
            None => inputs,
        };
        let tape = layer_forward(layer, x, m);
        layer_tapes.push(tape);
    }
    let top = &layer_tapes.last().expect("nonempty").h;
    let (outputs, output) = match &params.output {
        OutputLayer::Dense(head) => (dense_forward(head, top), OutputTape::Dense),
        OutputLayer::Attention(att) => {
            let (y, tape) = causal_attention_forward(top, att)?;
            (y, OutputTape::Attention(tape))
        }
    };
    Ok((
        outputs.clone(),
        ForwardTape {
            layers: layer_tapes,
            masks,
            output,
            outputs,
        },
    ))
}

/// Runs the stack over an (already perseveration-expanded) sequence.
/// Initial hidden and cell states are zero. Train mode draws one set of
/// dropout masks for the whole sequence from `rng`.
pub fn stack_forward(
    params: &ModelParams,
    inputs: &Matrix,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Vec<f64>, ForwardTape)> {
    let masks = match mode {
        Mode::Infer => None,
        Mode::Train {
            dropout,
            recurrent_dropout,
        } => {
            if dropout == 0.0 && recurrent_dropout == 0.0 {
                None
            } else {
                Some(DropoutMasks::draw(params, dropout, recurrent_dropout, rng)?)
            }
        }
    };
    stack_forward_with_masks(params, inputs, masks)
}

/// Inference-mode outputs for every step.
pub fn predict(params: &ModelParams, inputs: &Matrix) -> Result<Vec<f64>> {
    stack_forward_with_masks(params, inputs, None).map(|(y, _)| y)
}

#[derive(Clone, Debug)]
pub struct Gradients {
    /// Weighted BCE plus the L2 penalty.
    pub loss: f64,
    pub data_loss: f64,
    pub grads: ModelParams,
}

/// Exact gradients of `sum_t w_t * BCE(y_hat_t, y_t) + l2 * sum(W^2)`.
pub fn backward_bptt(
    params: &ModelParams,
    tape: &ForwardTape,
    targets: &[f64],
    loss_weights: &[f64],
    l2: f64,
) -> Result<Gradients> {
    if targets.len() != tape.len() || loss_weights.len() != tape.len() {
        return Err(Error::argument(format!(
            "tape has {} steps but {} targets and {} weights",
            tape.len(),
            targets.len(),
            loss_weights.len()
        )));
    }
    let (data_loss, dy) = bce_loss(&tape.outputs, targets, loss_weights)?;
    let mut grads = params.zeros_like();
    let top = tape.top_hidden();
    let steps = top.rows();
    let mut dh = Matrix::zeros(steps, top.cols());

    match (&params.output, &mut grads.output, &tape.output) {
        (OutputLayer::Dense(head), OutputLayer::Dense(g), OutputTape::Dense) => {
            let w = head.w.data();
            for t in 0..steps {
                let y = tape.outputs[t];
                let dz = dy[t] * y * (1.0 - y);
                if dz == 0.0 {
                    continue;
                }
                crate::linalg::axpy(dz, top.row(t), g.w.data_mut());
                g.b.data_mut()[0] += dz;
                crate::linalg::axpy(dz, w, dh.row_mut(t));
            }
        }
        (OutputLayer::Attention(att), OutputLayer::Attention(g), OutputTape::Attention(at)) => {
            let back = causal_attention_backward(at, att, &dy)?;
            *g = back.params;
            dh = back.d_hidden;
        }
        _ => {
            return Err(Error::argument(
                "tape does not match the model's output layer",
            ))
        }
    }

    for l in (0..params.layers.len()).rev() {
        let m = tape.masks.as_ref().map(|m| &m.layers[l]);
        let (g, dx) = layer_backward(&params.layers[l], &tape.layers[l], m, &dh, l > 0);
        grads.layers[l] = g;
        if let Some(dx) = dx {
            dh = dx;
        }
    }

    params.add_l2_gradient(&mut grads, l2);
    Ok(Gradients {
        loss: data_loss + params.l2_penalty(l2),
        data_loss,
        grads,
    })
}
