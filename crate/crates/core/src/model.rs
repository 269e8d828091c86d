//! Parameter containers for the stacked LSTM and its output layer.
//!
//! Gate blocks are laid out as `[input | forget | candidate | output]`,
//! each `hidden_size` columns wide, in every weight and bias.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{glorot_uniform, Rng, Stream};

pub const MAX_K: usize = 8;
pub const INIT_SCHEME: &str = "glorot_uniform";
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    /// Stacked LSTM with dense head; `k = 1` is the baseline RNN.
    Prnn { k: usize },
    /// Stacked LSTM with a causally masked attention output layer.
    Attention,
}

impl Variant {
    pub fn k(self) -> usize {
        match self {
            Variant::Prnn { k } => k,
            Variant::Attention => 1,
        }
    }

    pub fn label(self) -> String {
        match self {
            Variant::Prnn { k } => format!("k{k}"),
            Variant::Attention => "attention".to_string(),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Variant::Prnn { k } if !(1..=MAX_K).contains(&k) => Err(Error::argument(format!(
                "perseveration k must be in 1..={MAX_K}, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams {
    /// input x 4H
    pub w: Matrix,
    /// H x 4H
    pub u: Matrix,
    /// 1 x 4H
    pub b: Matrix,
    pub hidden_size: usize,
}

impl LstmLayerParams {
    pub fn input_size(&self) -> usize {
        self.w.rows()
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmLayerParams {
            w: Matrix::zeros(input_size, 4 * hidden_size),
            u: Matrix::zeros(hidden_size, 4 * hidden_size),
            b: Matrix::zeros(1, 4 * hidden_size),
            hidden_size,
        }
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_size;
        if self.w.cols() != 4 * h {
            return Err(Error::shape(
                self.w.shape(),
                (self.w.rows(), 4 * h),
                "lstm W",
            ));
        }
        if self.u.shape() != (h, 4 * h) {
            return Err(Error::shape(self.u.shape(), (h, 4 * h), "lstm U"));
        }
        if self.b.shape() != (1, 4 * h) {
            return Err(Error::shape(self.b.shape(), (1, 4 * h), "lstm b"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseHead {
    /// H x 1
    pub w: Matrix,
    /// 1 x 1
    pub b: Matrix,
}

/// Output projection over `[h_t ; context_t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    /// 2H x 1
    pub w_out: Matrix,
    /// 1 x 1
    pub b_out: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutputLayer {
    Dense(DenseHead),
    Attention(AttentionParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub variant: Variant,
    pub input_size: usize,
    pub layer_sizes: Vec<usize>,
    pub init: String,
    pub forget_bias: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LstmLayerParams>,
    pub output: OutputLayer,
    pub meta: ModelMeta,
}

/// A parameter tensor with its serialized name.
pub struct NamedTensor<'a> {
    pub name: String,
    pub tensor: &'a Matrix,
    /// Subject to the L2 penalty (weights, not biases).
    pub regularized: bool,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases except the forget block at 1.0.
    pub fn init(
        variant: Variant,
        input_size: usize,
        layer_sizes: &[usize],
        seed: u64,
    ) -> Result<Self> {
        variant.validate()?;
        if input_size == 0 || layer_sizes.is_empty() || layer_sizes.contains(&0) {
            return Err(Error::argument(format!(
                "invalid architecture: input {input_size}, layers {layer_sizes:?}"
            )));
        }
        let mut rng = Rng::stream(seed, Stream::Init);
        let mut layers = Vec::with_capacity(layer_sizes.len());
        let mut fan_in = input_size;
        for &h in layer_sizes {
            let w = glorot_uniform(&mut rng, fan_in, 4 * h)?;
            let u = glorot_uniform(&mut rng, h, 4 * h)?;
            let mut b = Matrix::zeros(1, 4 * h);
            b.data_mut()[h..2 * h].fill(FORGET_BIAS);
            layers.push(LstmLayerParams {
                w,
                u,
                b,
                hidden_size: h,
            });
            fan_in = h;
        }
        let last = fan_in;
        let output = match variant {
            Variant::Prnn { .. } => OutputLayer::Dense(DenseHead {
                w: glorot_uniform(&mut rng, last, 1)?,
                b: Matrix::zeros(1, 1),
            }),
            Variant::Attention => OutputLayer::Attention(AttentionParams {
                w_out: glorot_uniform(&mut rng, 2 * last, 1)?,
                b_out: Matrix::zeros(1, 1),
            }),
        };
        Ok(ModelParams {
            layers,
            output,
            meta: ModelMeta {
                variant,
                input_size,
                layer_sizes: layer_sizes.to_vec(),
                init: INIT_SCHEME.to_string(),
                forget_bias: FORGET_BIAS,
                seed,
            },
        })
    }

    pub fn variant(&self) -> Variant {
        self.meta.variant
    }

    pub fn input_size(&self) -> usize {
        self.meta.input_size
    }

    pub fn top_hidden_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.hidden_size)
    }

    /// Same structure, every entry zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.1.fill(0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(NamedTensor {
                name: format!("lstm.{l}.W"),
                tensor: &layer.w,
                regularized: true,
            });
            out.push(NamedTensor {
                name: format!("lstm.{l}.U"),
                tensor: &layer.u,
                regularized: true,
            });
            out.push(NamedTensor {
                name: format!("lstm.{l}.b"),
                tensor: &layer.b,
                regularized: false,
            });
        }
        match &self.output {
            OutputLayer::Dense(h) => {
                out.push(NamedTensor {
                    name: "head.W".into(),
                    tensor: &h.w,
                    regularized: true,
                });
                out.push(NamedTensor {
                    name: "head.b".into(),
                    tensor: &h.b,
                    regularized: false,
                });
            }
            OutputLayer::Attention(a) => {
                out.push(NamedTensor {
                    name: "attention.W_out".into(),
                    tensor: &a.w_out,
                    regularized: true,
                });
                out.push(NamedTensor {
                    name: "attention.b_out".into(),
                    tensor: &a.b_out,
                    regularized: false,
                });
            }
        }
        out
    }

    /// Mutable view in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.push((format!("lstm.{l}.W"), &mut layer.w));
            out.push((format!("lstm.{l}.U"), &mut layer.u));
            out.push((format!("lstm.{l}.b"), &mut layer.b));
        }
        match &mut self.output {
            OutputLayer::Dense(h) => {
                out.push(("head.W".into(), &mut h.w));
                out.push(("head.b".into(), &mut h.b));
            }
            OutputLayer::Attention(a) => {
                out.push(("attention.W_out".into(), &mut a.w_out));
                out.push(("attention.b_out".into(), &mut a.b_out));
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.tensor.len()).sum()
    }

    /// `l2 * sum(w^2)` over regularized tensors.
    pub fn l2_penalty(&self, l2: f64) -> f64 {
        if l2 == 0.0 {
            return 0.0;
        }
        l2 * self
            .tensors()
            .iter()
            .filter(|t| t.regularized)
            .map(|t| t.tensor.sum_squares())
            .sum::<f64>()
    }

    /// Adds `2 * l2 * w` to the matching gradient tensors.
    pub fn add_l2_gradient(&self, grads: &mut ModelParams, l2: f64) {
        if l2 == 0.0 {
            return;
        }
        let src = self.tensors();
        for (t, (_, g)) in src.iter().zip(grads.tensors_mut()) {
            if t.regularized {
                for (gv, wv) in g.data_mut().iter_mut().zip(t.tensor.data()) {
                    *gv += 2.0 * l2 * wv;
                }
            }
        }
    }

    /// Adds `other` into `self` tensor by tensor.
    pub fn accumulate(&mut self, other: &ModelParams) -> Result<()> {
        let src = other.tensors();
        let dst = self.tensors_mut();
        if src.len() != dst.len() {
            return Err(Error::argument("parameter structures differ"));
        }
        for (s, (_, d)) in src.iter().zip(dst) {
            d.add_assign(s.tensor)?;
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.tensor.data().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::argument(format!(
                "flat vector has {} entries, model has {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut offset = 0;
        for (_, t) in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.tensor.is_finite())
    }

    /// Verifies that layer shapes chain and match the metadata.
    pub fn check(&self) -> Result<()> {
        self.meta.variant.validate()?;
        if self.layers.len() != self.meta.layer_sizes.len() || self.layers.is_empty() {
            return Err(Error::argument("layer count does not match metadata"));
        }
        let mut fan_in = self.meta.input_size;
        for (layer, &h) in self.layers.iter().zip(&self.meta.layer_sizes) {
            if layer.hidden_size != h || layer.input_size() != fan_in {
                return Err(Error::shape(
                    layer.w.shape(),
                    (fan_in, 4 * h),
                    "layer chain",
                ));
            }
            layer.check()?;
            fan_in = h;
        }
        match (&self.output, self.meta.variant) {
            (OutputLayer::Dense(h), Variant::Prnn { .. }) => {
                if h.w.shape() != (fan_in, 1) || h.b.shape() != (1, 1) {
                    return Err(Error::shape(h.w.shape(), (fan_in, 1), "dense head"));
                }
            }
            (OutputLayer::Attention(a), Variant::Attention) => {
                if a.w_out.shape() != (2 * fan_in, 1) || a.b_out.shape() != (1, 1) {
                    return Err(Error::shape(
                        a.w_out.shape(),
                        (2 * fan_in, 1),
                        "attention output",
                    ));
                }
            }
            _ => return Err(Error::argument("output layer does not match model variant")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_forget_bias() {
        let p = ModelParams::init(Variant::Prnn { k: 3 }, 8, &[128, 256, 128], 1).unwrap();
        p.check().unwrap();
        assert_eq!(p.layers[1].w.shape(), (128, 1024));
        assert_eq!(p.layers[1].u.shape(), (256, 1024));
        let b = p.layers[2].b.data();
        assert!(b[..128].iter().all(|&v| v == 0.0));
        assert!(b[128..256].iter().all(|&v| v == 1.0));
        assert!(b[256..].iter().all(|&v| v == 0.0));
        let a = ModelParams::init(Variant::Attention, 8, &[4, 5, 3], 1).unwrap();
        a.check().unwrap();
    }

    #[test]
    fn flat_round_trip_and_l2() {
        let mut p = ModelParams::init(Variant::Prnn { k: 1 }, 3, &[4, 2], 9).unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), p.n_params());
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        p.set_flat(&doubled).unwrap();
        assert_eq!(p.to_flat(), doubled);
        let weights: f64 = p
            .tensors()
            .iter()
            .filter(|t| !t.name.ends_with(".b"))
            .map(|t| t.tensor.sum_squares())
            .sum();
        assert!((p.l2_penalty(0.5) - 0.5 * weights).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_architecture() {
        assert!(ModelParams::init(Variant::Prnn { k: 0 }, 3, &[4], 1).is_err());
        assert!(ModelParams::init(Variant::Prnn { k: 9 }, 3, &[4], 1).is_err());
        assert!(ModelParams::init(Variant::Prnn { k: 1 }, 0, &[4], 1).is_err());
        assert!(ModelParams::init(Variant::Prnn { k: 1 }, 3, &[], 1).is_err());
    }
}
