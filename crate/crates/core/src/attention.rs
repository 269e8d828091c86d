//! Causally masked scaled dot-product attention over the top LSTM layer.
//!
//! For step `t`: `s_j = h_t . h_j / sqrt(d)` for `j <= t`, `alpha = softmax(s)`,
//! `context_t = sum_j alpha_j h_j`, and
//! `y_t = sigmoid([h_t ; context_t] . W_out + b_out)`. Steps after `t` never
//! enter the computation for `t`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sigmoid, Matrix};
use crate::model::AttentionParams;

#[derive(Clone, Debug)]
pub struct AttentionTape {
    pub hidden: Matrix,
    /// `alphas[t]` has `t + 1` entries.
    pub alphas: Vec<Vec<f64>>,
    pub context: Matrix,
    pub outputs: Vec<f64>,
}

pub fn causal_attention_forward(
    hidden: &Matrix,
    params: &AttentionParams,
) -> Result<(Vec<f64>, AttentionTape)> {
    let (steps, d) = hidden.shape();
    if steps == 0 {
        return Err(Error::argument("attention over an empty sequence"));
    }
    if params.w_out.shape() != (2 * d, 1) {
        return Err(Error::shape(
            params.w_out.shape(),
            (2 * d, 1),
            "attention W_out",
        ));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let w = params.w_out.data();
    let b = params.b_out.data()[0];
    let mut alphas = Vec::with_capacity(steps);
    let mut context = Matrix::zeros(steps, d);
    let mut outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let ht = hidden.row(t);
        let mut a: Vec<f64> = (0..=t).map(|j| dot(ht, hidden.row(j)) * scale).collect();
        let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in a.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in a.iter_mut() {
            *v /= total;
        }
        let ctx = context.row_mut(t);
        for (j, &aj) in a.iter().enumerate() {
            axpy(aj, hidden.row(j), ctx);
        }
        let z = dot(ht, &w[..d]) + dot(context.row(t), &w[d..]) + b;
        outputs.push(sigmoid(z));
        alphas.push(a);
    }
    Ok((
        outputs.clone(),
        AttentionTape {
            hidden: hidden.clone(),
            alphas,
            context,
            outputs,
        },
    ))
}

#[derive(Clone, Debug)]
pub struct AttentionBackward {
    pub params: AttentionParams,
    pub d_hidden: Matrix,
}

/// Backpropagates `dL/dy` through the output projection, context and
/// softmax into the parameters and every hidden state.
pub fn causal_attention_backward(
    tape: &AttentionTape,
    params: &AttentionParams,
    d_outputs: &[f64],
) -> Result<AttentionBackward> {
    let (steps, d) = tape.hidden.shape();
    if d_outputs.len() != steps {
        return Err(Error::argument(format!(
            "attention backward: {} upstream gradients for {steps} steps",
            d_outputs.len()
        )));
    }
    if params.w_out.shape() != (2 * d, 1) {
        return Err(Error::shape(
            params.w_out.shape(),
            (2 * d, 1),
            "attention W_out",
        ));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let w = params.w_out.data();
    let mut gw = Matrix::zeros(2 * d, 1);
    let mut gb = 0.0;
    let mut dh = Matrix::zeros(steps, d);
    let mut dctx = vec![0.0; d];
    let mut ds_sum = vec![0.0; d];
    for t in 0..steps {
        let y = tape.outputs[t];
        let dz = d_outputs[t] * y * (1.0 - y);
        if dz == 0.0 {
            continue;
        }
        let ht = tape.hidden.row(t);
        axpy(dz, ht, &mut gw.data_mut()[..d]);
        axpy(dz, tape.context.row(t), &mut gw.data_mut()[d..]);
        gb += dz;
        axpy(dz, &w[..d], dh.row_mut(t));
        for (c, &wv) in dctx.iter_mut().zip(&w[d..]) {
            *c = dz * wv;
        }
        let alpha = &tape.alphas[t];
        let d_alpha: Vec<f64> = (0..=t).map(|j| dot(&dctx, tape.hidden.row(j))).collect();
        let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, g)| a * g).sum();
        ds_sum.fill(0.0);
        for j in 0..=t {
            let ds = alpha[j] * (d_alpha[j] - mean) * scale;
            // context term and key side of the score
            let row = dh.row_mut(j);
            axpy(alpha[j], &dctx, row);
            axpy(ds, ht, row);
            // query side of the score
            axpy(ds, tape.hidden.row(j), &mut ds_sum);
        }
        axpy(1.0, &ds_sum, dh.row_mut(t));
    }
    let mut gbm = Matrix::zeros(1, 1);
    gbm.set(0, 0, gb);
    Ok(AttentionBackward {
        params: AttentionParams {
            w_out: gw,
            b_out: gbm,
        },
        d_hidden: dh,
    })
}
