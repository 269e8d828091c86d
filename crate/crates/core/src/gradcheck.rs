//! Central-difference verification of the analytic BPTT gradients.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loss::bce_loss;
use crate::lstm::{backward_bptt, stack_forward_with_masks, DropoutMasks};
use crate::model::ModelParams;

/// One sequence of a check batch. Masks, when present, are replayed in
/// every forward pass so the loss is a deterministic function of the weights.
#[derive(Clone, Debug)]
pub struct GradCheckCase {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub masks: Option<DropoutMasks>,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    pub l2: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            l2: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub worst_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.worst_rel_error < self.tolerance
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps entries whose true
/// gradient is essentially zero from dominating through round-off.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Total loss of the batch: summed weighted BCE plus one L2 penalty.
pub fn batch_loss(params: &ModelParams, cases: &[GradCheckCase], l2: f64) -> Result<f64> {
    let mut total = params.l2_penalty(l2);
    for case in cases {
        let (y, _) = stack_forward_with_masks(params, &case.inputs, case.masks.clone())?;
        total += bce_loss(&y, &case.targets, &case.weights)?.0;
    }
    Ok(total)
}

pub fn analytic_gradients(
    params: &ModelParams,
    cases: &[GradCheckCase],
    l2: f64,
) -> Result<ModelParams> {
    let mut grads = params.zeros_like();
    for (i, case) in cases.iter().enumerate() {
        let (_, tape) = stack_forward_with_masks(params, &case.inputs, case.masks.clone())?;
        let g = backward_bptt(
            params,
            &tape,
            &case.targets,
            &case.weights,
            if i == 0 { l2 } else { 0.0 },
        )?;
        grads.accumulate(&g.grads)?;
    }
    Ok(grads)
}

/// Compares supplied gradients against central differences of `batch_loss`
/// for every parameter entry.
pub fn compare_gradients(
    params: &ModelParams,
    analytic: &ModelParams,
    cases: &[GradCheckCase],
    config: GradCheckConfig,
) -> Result<GradCheckReport> {
    if cases.is_empty() {
        return Err(Error::argument(
            "gradient check needs at least one sequence",
        ));
    }
    let names: Vec<String> = params.tensors().into_iter().map(|t| t.name).collect();
    let flat_analytic = analytic.to_flat();
    let base = params.to_flat();
    if flat_analytic.len() != base.len() {
        return Err(Error::argument("gradient and parameter layouts differ"));
    }
    let sizes: Vec<usize> = params
        .tensors()
        .iter()
        .map(|t| t.tensor.data().len())
        .collect();

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        n_checked: 0,
        worst_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        tolerance: config.tolerance,
    };
    let mut offset = 0;
    for (name, size) in names.iter().zip(&sizes) {
        for j in 0..*size {
            let idx = offset + j;
            let mut flat = base.clone();
            flat[idx] = base[idx] + config.step;
            probe.set_flat(&flat)?;
            let plus = batch_loss(&probe, cases, config.l2)?;
            flat[idx] = base[idx] - config.step;
            probe.set_flat(&flat)?;
            let minus = batch_loss(&probe, cases, config.l2)?;
            let numeric = (plus - minus) / (2.0 * config.step);
            let err = relative_error(flat_analytic[idx], numeric);
            report.n_checked += 1;
            if err > report.worst_rel_error || report.worst_tensor.is_empty() {
                report.worst_rel_error = err;
                report.worst_tensor = name.clone();
                report.worst_index = j;
                report.analytic = flat_analytic[idx];
                report.numeric = numeric;
            }
        }
        offset += size;
    }
    Ok(report)
}

pub fn gradient_check(
    params: &ModelParams,
    cases: &[GradCheckCase],
    config: GradCheckConfig,
) -> Result<GradCheckReport> {
    let analytic = analytic_gradients(params, cases, config.l2)?;
    compare_gradients(params, &analytic, cases, config)
}
