use crate::error::{Error, Result};

pub const PRED_CLAMP: f64 = 1e-12;

/// Weighted binary cross-entropy `sum_i w_i * -(y log p + (1-y) log(1-p))`
/// with predictions clamped to `[1e-12, 1 - 1e-12]`. Returns the loss and
/// its derivative with respect to each prediction.
pub fn bce_loss(pred: &[f64], target: &[f64], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.len() != weights.len() {
        return Err(Error::argument(format!(
            "bce_loss length mismatch: {} predictions, {} targets, {} weights",
            pred.len(),
            target.len(),
            weights.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for ((&p, &y), &w) in pred.iter().zip(target).zip(weights) {
        if w == 0.0 {
            grad.push(0.0);
            continue;
        }
        let pc = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP);
        loss += -w * (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln());
        // derivative of the clamped loss is zero outside the clamp range
        grad.push(if pc == p {
            w * (-y / pc + (1.0 - y) / (1.0 - pc))
        } else {
            0.0
        });
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_has_no_loss() {
        let (l, _) = bce_loss(&[1.0, 0.0], &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!(l < 1e-10);
    }

    #[test]
    fn half_everywhere_is_ln2() {
        let (l, _) = bce_loss(&[0.5; 4], &[1.0, 0.0, 1.0, 1.0], &[0.25; 4]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pred = [0.2, 0.7, 0.95, 0.4];
        let target = [1.0, 0.0, 1.0, 0.3];
        let w = [0.1, 0.4, 0.3, 0.2];
        let (_, g) = bce_loss(&pred, &target, &w).unwrap();
        let h = 1e-6;
        for i in 0..pred.len() {
            let mut up = pred;
            let mut dn = pred;
            up[i] += h;
            dn[i] -= h;
            let fd = (bce_loss(&up, &target, &w).unwrap().0
                - bce_loss(&dn, &target, &w).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(bce_loss(&[0.5], &[1.0, 0.0], &[1.0]).is_err());
    }
}
