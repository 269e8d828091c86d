use serde::{Deserialize, Serialize};

use crate::data::Outcome;

/// Inference-mode survival probabilities at every row of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrajectory {
    pub episode_id: String,
    pub times: Vec<f64>,
    pub predictions: Vec<f64>,
    pub outcome: Outcome,
}

impl PredictionTrajectory {
    pub fn duration_minutes(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassStats {
    pub n: usize,
    /// `None` when the class is absent.
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub sd: Option<f64>,
}

impl ClassStats {
    fn from_values(v: &[f64]) -> Self {
        if v.is_empty() {
            return ClassStats {
                n: 0,
                mean: None,
                sd: None,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        ClassStats {
            n: v.len(),
            mean: Some(mean),
            sd: Some(var.sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipeUpStats {
    pub survived: ClassStats,
    pub died: ClassStats,
}

/// Distribution of the first prediction of each episode, by outcome.
pub fn first_prediction_stats(trajectories: &[PredictionTrajectory]) -> PipeUpStats {
    let firsts = |o: Outcome| -> Vec<f64> {
        trajectories
            .iter()
            .filter(|t| t.outcome == o)
            .filter_map(|t| t.predictions.first().copied())
            .collect()
    };
    PipeUpStats {
        survived: ClassStats::from_values(&firsts(Outcome::Survived)),
        died: ClassStats::from_values(&firsts(Outcome::Died)),
    }
}
