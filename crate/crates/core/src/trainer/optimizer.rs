use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::ModelParams;
use crate::trainer::TrainingConfig;

/// Running mean of squared gradients, one accumulator per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub accumulators: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        OptimizerState {
            accumulators: params
                .tensors()
                .iter()
                .map(|t| Matrix::zeros(t.tensor.rows(), t.tensor.cols()))
                .collect(),
        }
    }
}

/// `acc <- rho acc + (1 - rho) g^2; theta <- theta - lr g / (sqrt(acc) + eps)`.
pub fn rmsprop_update(
    theta: &mut [f64],
    grad: &[f64],
    acc: &mut [f64],
    lr: f64,
    rho: f64,
    eps: f64,
) {
    for ((t, &g), a) in theta.iter_mut().zip(grad).zip(acc.iter_mut()) {
        *a = rho * *a + (1.0 - rho) * g * g;
        *t -= lr * g / (a.sqrt() + eps);
    }
}

pub fn rmsprop_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    config: &TrainingConfig,
) -> Result<()> {
    let g = grads.tensors();
    let p = params.tensors_mut();
    if g.len() != p.len() || state.accumulators.len() != p.len() {
        return Err(Error::argument("optimizer state does not match the model"));
    }
    for ((gt, (name, pt)), acc) in g.iter().zip(p).zip(state.accumulators.iter_mut()) {
        if gt.tensor.shape() != pt.shape() || acc.shape() != pt.shape() {
            return Err(Error::Inconsistent(format!(
                "gradient shape mismatch for {name}"
            )));
        }
        rmsprop_update(
            pt.data_mut(),
            gt.tensor.data(),
            acc.data_mut(),
            config.learning_rate,
            config.rho,
            config.epsilon,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    #[test]
    fn first_step_size() {
        let mut theta = [0.0];
        let mut acc = [0.0];
        rmsprop_update(&mut theta, &[1.0], &mut acc, 1e-5, 0.9, 1e-7);
        let expected = -1e-5 / (0.1f64.sqrt() + 1e-7);
        assert!((theta[0] - expected).abs() < 1e-18);
        assert!((theta[0] + 3.1623e-5).abs() < 1e-9);
        assert!((acc[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = ModelParams::init(Variant::Prnn { k: 1 }, 3, &[4], 2).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut state = OptimizerState::new(&p);
        rmsprop_step(&mut p, &g, &mut state, &TrainingConfig::default()).unwrap();
        assert_eq!(p, before);
        assert!(state
            .accumulators
            .iter()
            .all(|a| a.data().iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn quadratic_bowl_descends_monotonically() {
        let a = [1.0, 4.0, 0.25, 2.0];
        let f = |t: &[f64]| t.iter().zip(&a).map(|(x, c)| c * x * x).sum::<f64>();
        let mut theta = vec![1.0, -2.0, 3.0, 0.5];
        let mut acc = vec![0.0; 4];
        let mut prev = f(&theta);
        for _ in 0..100 {
            let g: Vec<f64> = theta.iter().zip(&a).map(|(x, c)| 2.0 * c * x).collect();
            rmsprop_update(&mut theta, &g, &mut acc, 1e-2, 0.9, 1e-7);
            let now = f(&theta);
            assert!(now < prev, "{now} >= {prev}");
            prev = now;
        }
    }
}
