use crate::error::{Error, Result};
use crate::loss::bce_loss;
use crate::metrics::auroc;
use crate::model::{ModelParams, Variant};
use crate::perseveration::predict_trajectory;
use crate::rng::{Rng, Stream};
use crate::trainer::batch::{batch_gradients, make_batches, Example};
use crate::trainer::optimizer::{rmsprop_step, OptimizerState};
use crate::trainer::TrainingConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auroc: Option<f64>,
    pub is_best: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationScore {
    /// Mean over episodes of the per-step mean BCE.
    pub loss: f64,
    /// AUROC of the final prediction of each episode; `None` if the
    /// validation set holds a single outcome class.
    pub auroc: Option<f64>,
}

impl ValidationScore {
    fn beats(&self, other: &ValidationScore) -> bool {
        match (self.auroc, other.auroc) {
            (Some(a), Some(b)) if a != b => a > b,
            _ => self.loss < other.loss,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: ModelParams,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
}

pub fn evaluate_validation(params: &ModelParams, examples: &[Example]) -> Result<ValidationScore> {
    if examples.is_empty() {
        return Err(Error::argument("empty validation set"));
    }
    let mut loss = 0.0;
    let mut finals = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for ex in examples {
        let y = predict_trajectory(params, &ex.inputs)?;
        let n = y.len();
        loss += bce_loss(&y, &vec![ex.target; n], &vec![1.0 / n as f64; n])?.0;
        finals.push(*y.last().expect("nonempty trajectory"));
        labels.push(ex.target == 1.0);
    }
    Ok(ValidationScore {
        loss: loss / examples.len() as f64,
        auroc: auroc(&finals, &labels)?,
    })
}

/// Trains for `max_epochs` epochs and returns the weights of the epoch with
/// the best validation score (initial weights when no epoch ran).
pub fn train(
    variant: Variant,
    train_set: &[Example],
    validation: &[Example],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    variant.validate()?;
    let input_size = train_set
        .first()
        .map(|e| e.inputs.cols())
        .ok_or_else(|| Error::argument("empty training set"))?;
    if validation.is_empty() {
        return Err(Error::argument("empty validation set"));
    }
    let mut params = ModelParams::init(variant, input_size, &config.layers, config.seed)?;
    let mut state = OptimizerState::new(&params);
    let mut shuffle_rng = Rng::stream(config.seed, Stream::Shuffle);
    let mut dropout_rng = Rng::stream(config.seed, Stream::Dropout);
    let k = variant.k();

    let mut best = params.clone();
    let mut best_score: Option<ValidationScore> = None;
    let mut best_epoch = None;
    let mut log = Vec::with_capacity(config.max_epochs);

    for epoch in 1..=config.max_epochs {
        let batches = make_batches(train_set, k, config.batch_size, &mut shuffle_rng)?;
        let mut total = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let g = batch_gradients(
                &params,
                batch,
                config.dropout,
                config.recurrent_dropout,
                config.l2,
                &mut dropout_rng,
            )?;
            if !g.loss.is_finite() || !g.grads.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: bi + 1,
                });
            }
            rmsprop_step(&mut params, &g.grads, &mut state, config)?;
            if !params.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: bi + 1,
                });
            }
            total += g.data_loss;
        }
        let train_loss = total / batches.len() as f64;
        let score = evaluate_validation(&params, validation)?;
        log::info!(
            "epoch {epoch}: train_loss {train_loss:.5} val_loss {:.5} val_auroc {}",
            score.loss,
            score
                .auroc
                .map_or("undefined".to_string(), |a| format!("{a:.4}"))
        );
        if best_score.is_none_or(|b| score.beats(&b)) {
            best_score = Some(score);
            best = params.clone();
            best_epoch = Some(epoch);
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss: score.loss,
            val_auroc: score.auroc,
            is_best: false,
        });
    }
    if let Some(e) = best_epoch {
        log[e - 1].is_best = true;
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    /// One feature whose sign reveals the outcome.
    fn toy(n: usize, seed: u64) -> Vec<Example> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let survived = i % 3 != 0;
                let len = 3 + rng.below(8);
                let centre = if survived { 1.0 } else { -1.0 };
                Example {
                    episode_id: format!("t{i}"),
                    times: (0..len).map(|t| 15.0 * t as f64).collect(),
                    inputs: Matrix::from_vec(
                        len,
                        1,
                        (0..len).map(|_| centre + rng.normal(0.0, 0.3)).collect(),
                    )
                    .unwrap(),
                    target: if survived { 1.0 } else { 0.0 },
                }
            })
            .collect()
    }

    fn small_config() -> TrainingConfig {
        TrainingConfig {
            batch_size: 16,
            learning_rate: 1e-2,
            layers: vec![6],
            max_epochs: 30,
            seed: 3,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn separable_toy_is_learned() {
        let out = train(
            Variant::Prnn { k: 1 },
            &toy(96, 1),
            &toy(48, 2),
            &small_config(),
        )
        .unwrap();
        let best = out
            .log
            .iter()
            .filter_map(|l| l.val_auroc)
            .fold(0.0, f64::max);
        assert!(best >= 0.95, "{best}");
        let e = out.best_epoch.unwrap();
        assert!(out.log[e - 1].is_best);
        assert_eq!(out.log[e - 1].val_auroc, Some(best));
        assert_eq!(out.log.iter().filter(|l| l.is_best).count(), 1);
        let rescored = evaluate_validation(&out.best, &toy(48, 2)).unwrap();
        assert_eq!(rescored.auroc, Some(best));
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let cfg = TrainingConfig {
            max_epochs: 0,
            ..small_config()
        };
        let out = train(Variant::Prnn { k: 2 }, &toy(10, 1), &toy(6, 2), &cfg).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.best_epoch, None);
        assert_eq!(
            out.best,
            ModelParams::init(Variant::Prnn { k: 2 }, 1, &[6], 3).unwrap()
        );
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = TrainingConfig {
            max_epochs: 3,
            ..small_config()
        };
        let a = train(Variant::Attention, &toy(20, 1), &toy(9, 2), &cfg).unwrap();
        let b = train(Variant::Attention, &toy(20, 1), &toy(9, 2), &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn divergence_is_reported() {
        let mut ex = toy(8, 1);
        ex[3].inputs.set(1, 0, f64::NAN);
        let cfg = TrainingConfig {
            max_epochs: 2,
            batch_size: 4,
            ..small_config()
        };
        match train(Variant::Prnn { k: 1 }, &ex, &toy(6, 2), &cfg) {
            Err(Error::NonFinite { epoch, batch }) => assert!(epoch == 1 && batch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
