use crate::data::Outcome;
use crate::error::{Error, Result};
use crate::metrics::trajectory::PredictionTrajectory;

pub const SLICE_HOURS: [f64; 6] = [0.0, 1.0, 3.0, 6.0, 12.0, 24.0];
/// Episodes enter the time-sliced cohort only if they last at least a day.
pub const TIMESLICE_MIN_MINUTES: f64 = 24.0 * 60.0;

/// Mann–Whitney AUROC with ties counted one half, computed from midranks.
/// `None` when either class is absent.
pub fn auroc(scores: &[f64], positive: &[bool]) -> Result<Option<f64>> {
    if scores.len() != positive.len() {
        return Err(Error::argument(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::argument(format!("non-finite score {s}")));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok(Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n)))
}

/// Prediction at the latest row with time <= `minutes` (the first row if
/// none qualifies).
pub fn score_at(traj: &PredictionTrajectory, minutes: f64) -> f64 {
    let idx = traj.times.partition_point(|&t| t <= minutes);
    traj.predictions[idx.saturating_sub(1)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceAuroc {
    pub hours: f64,
    pub auroc: Option<f64>,
    pub n: usize,
    pub mortality_rate: Option<f64>,
}

/// AUROC of survival probabilities (survivors positive) at each slice over
/// the fixed cohort of episodes lasting at least 24 hours.
pub fn timeslice_auroc(
    trajectories: &[PredictionTrajectory],
    hours: &[f64],
) -> Result<Vec<SliceAuroc>> {
    let cohort: Vec<&PredictionTrajectory> = trajectories
        .iter()
        .filter(|t| !t.predictions.is_empty() && t.duration_minutes() >= TIMESLICE_MIN_MINUTES)
        .collect();
    let labels: Vec<bool> = cohort
        .iter()
        .map(|t| t.outcome == Outcome::Survived)
        .collect();
    let n = cohort.len();
    let mortality_rate = if n == 0 {
        None
    } else {
        Some(labels.iter().filter(|&&s| !s).count() as f64 / n as f64)
    };
    hours
        .iter()
        .map(|&h| {
            let scores: Vec<f64> = cohort.iter().map(|t| score_at(t, h * 60.0)).collect();
            Ok(SliceAuroc {
                hours: h,
                auroc: auroc(&scores, &labels)?,
                n,
                mortality_rate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn pairwise(scores: &[f64], pos: &[bool]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    pairs += 1.0;
                    total += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        total / pairs
    }

    #[test]
    fn examples() {
        let a = |s: &[f64], p: &[bool]| auroc(s, p).unwrap().unwrap();
        assert_eq!(a(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]), 1.0);
        assert_eq!(a(&[0.4; 6], &[true, false, true, false, false, true]), 0.5);
        assert!((a(&[0.8, 0.3, 0.5, 0.1], &[true, true, false, false]) - 0.75).abs() < 1e-12);
        assert_eq!(auroc(&[0.1, 0.2], &[true, true]).unwrap(), None);
        assert!(auroc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn matches_pairwise_oracle() {
        let mut rng = Rng::new(99);
        for _ in 0..300 {
            let n = 2 + rng.below(60);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.uniform(0.0, 1.0) * 10.0).round() / 10.0)
                .collect();
            let pos: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.4)).collect();
            match auroc(&scores, &pos).unwrap() {
                Some(v) => assert!((v - pairwise(&scores, &pos)).abs() < 1e-12),
                None => assert!(pos.iter().all(|&p| p) || pos.iter().all(|&p| !p)),
            }
        }
    }

    #[test]
    fn monotone_invariance() {
        let mut rng = Rng::new(5);
        let scores: Vec<f64> = (0..50).map(|_| rng.uniform(0.01, 0.99)).collect();
        let pos: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let logit: Vec<f64> = scores.iter().map(|p| (p / (1.0 - p)).ln()).collect();
        assert_eq!(auroc(&scores, &pos).unwrap(), auroc(&logit, &pos).unwrap());
    }

    #[test]
    fn latest_not_after_slice() {
        let t = PredictionTrajectory {
            episode_id: "e".into(),
            times: vec![0.0, 30.0, 70.0],
            predictions: vec![0.1, 0.2, 0.3],
            outcome: Outcome::Survived,
        };
        assert_eq!(score_at(&t, 0.0), 0.1);
        assert_eq!(score_at(&t, 60.0), 0.2);
        assert_eq!(score_at(&t, 70.0), 0.3);
    }

    #[test]
    fn slices_filter_short_episodes() {
        let mk = |last: f64, first: f64, outcome| PredictionTrajectory {
            episode_id: "e".into(),
            times: vec![0.0, last],
            predictions: vec![first, first],
            outcome,
        };
        let trajs = vec![
            mk(1440.0, 0.9, Outcome::Survived),
            mk(2000.0, 0.2, Outcome::Died),
            mk(100.0, 0.0, Outcome::Survived),
        ];
        let r = timeslice_auroc(&trajs, &SLICE_HOURS).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r
            .iter()
            .all(|s| s.n == 2 && s.auroc == Some(1.0) && s.mortality_rate == Some(0.5)));
        let none = timeslice_auroc(&trajs[2..], &[1.0]).unwrap();
        assert_eq!(none[0].auroc, None);
        assert_eq!(none[0].n, 0);
    }
}
