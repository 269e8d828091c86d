use serde::{Deserialize, Serialize};

use crate::data::episode::EpisodeMatrix;
use crate::error::{Error, Result};

/// Per-channel statistics of charted training-split values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Channels whose sd was zero (or that were never charted) and got sd = 1.
    pub clamped: Vec<bool>,
}

impl NormStats {
    /// Mean and population sd over charted entries only.
    pub fn from_training<'a>(
        episodes: impl IntoIterator<Item = &'a EpisodeMatrix>,
    ) -> Result<Self> {
        let mut channels: Option<Vec<String>> = None;
        let mut sum: Vec<f64> = Vec::new();
        let mut count: Vec<usize> = Vec::new();
        let eps: Vec<&EpisodeMatrix> = episodes.into_iter().collect();
        for ep in &eps {
            match &channels {
                None => {
                    channels = Some(ep.channels.clone());
                    sum = vec![0.0; ep.n_channels()];
                    count = vec![0; ep.n_channels()];
                }
                Some(ch) if *ch != ep.channels => {
                    return Err(Error::Inconsistent(format!(
                        "episode {} has a different channel list",
                        ep.episode_id
                    )));
                }
                _ => {}
            }
            for r in 0..ep.n_rows() {
                for c in 0..ep.n_channels() {
                    if ep.is_charted(r, c) {
                        sum[c] += ep.values.get(r, c);
                        count[c] += 1;
                    }
                }
            }
        }
        let channels =
            channels.ok_or_else(|| Error::argument("no training episodes for normalization"))?;
        let mean: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        let mut ss = vec![0.0; channels.len()];
        for ep in &eps {
            for r in 0..ep.n_rows() {
                for c in 0..ep.n_channels() {
                    if ep.is_charted(r, c) {
                        ss[c] += (ep.values.get(r, c) - mean[c]).powi(2);
                    }
                }
            }
        }
        let mut sd = Vec::with_capacity(channels.len());
        let mut clamped = Vec::with_capacity(channels.len());
        for c in 0..channels.len() {
            let v = if count[c] > 0 {
                (ss[c] / count[c] as f64).sqrt()
            } else {
                0.0
            };
            if v > 0.0 && v.is_finite() {
                sd.push(v);
                clamped.push(false);
            } else {
                log::warn!("channel {} has zero spread; sd clamped to 1", channels[c]);
                sd.push(1.0);
                clamped.push(true);
            }
        }
        Ok(NormStats {
            channels,
            mean,
            sd,
            clamped,
        })
    }

    fn check(&self, ep: &EpisodeMatrix) -> Result<()> {
        if self.channels != ep.channels {
            return Err(Error::Inconsistent(format!(
                "episode {} channels do not match normalization statistics",
                ep.episode_id
            )));
        }
        Ok(())
    }
}

/// Forward-fills every channel from its last charted value; entries before a
/// channel's first charted value take the training mean. Charted entries are
/// never modified.
pub fn impute(episode: &EpisodeMatrix, stats: &NormStats) -> Result<EpisodeMatrix> {
    stats.check(episode)?;
    let mut out = episode.clone();
    for c in 0..episode.n_channels() {
        let mut last = stats.mean[c];
        for r in 0..episode.n_rows() {
            if episode.is_charted(r, c) {
                last = episode.values.get(r, c);
            } else {
                out.values.set(r, c, last);
            }
        }
    }
    Ok(out)
}

/// [`impute`] followed by z-scoring with the training statistics.
pub fn impute_and_normalize(episode: &EpisodeMatrix, stats: &NormStats) -> Result<EpisodeMatrix> {
    let mut out = impute(episode, stats)?;
    let n_ch = out.n_channels();
    for r in 0..out.n_rows() {
        let row = out.values.row_mut(r);
        for c in 0..n_ch {
            row[c] = (row[c] - stats.mean[c]) / stats.sd[c];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_cohort, GeneratorConfig, Outcome};
    use crate::linalg::Matrix;
    use crate::rng::Rng;

    fn tiny(values: &[[f64; 2]], charted: &[[bool; 2]]) -> EpisodeMatrix {
        let rows: Vec<Vec<f64>> = values.iter().map(|r| r.to_vec()).collect();
        EpisodeMatrix {
            patient_id: "p".into(),
            episode_id: "e".into(),
            channels: vec!["a".into(), "b".into()],
            times: (0..values.len()).map(|i| i as f64 * 15.0).collect(),
            values: Matrix::from_rows(&rows).unwrap(),
            charted: charted.iter().flatten().copied().collect(),
            outcome: Outcome::Survived,
            injected_events: vec![],
        }
    }

    fn stats(mean: [f64; 2], sd: [f64; 2]) -> NormStats {
        NormStats {
            channels: vec!["a".into(), "b".into()],
            mean: mean.to_vec(),
            sd: sd.to_vec(),
            clamped: vec![false; 2],
        }
    }

    #[test]
    fn forward_fill() {
        let ep = tiny(
            &[[5.0, 1.0], [0.0, 1.0], [7.0, 1.0]],
            &[[true, true], [false, true], [true, true]],
        );
        let out = impute(&ep, &stats([0.0, 0.0], [1.0, 1.0])).unwrap();
        assert_eq!(out.values.get(1, 0), 5.0);
        assert_eq!(out.charted, ep.charted);
    }

    #[test]
    fn never_charted_channel_normalizes_to_zero() {
        let ep = tiny(&[[0.0, 1.0], [0.0, 2.0]], &[[false, true], [false, true]]);
        let st = stats([3.0, 0.0], [2.0, 1.0]);
        assert_eq!(impute(&ep, &st).unwrap().values.get(1, 0), 3.0);
        let out = impute_and_normalize(&ep, &st).unwrap();
        assert_eq!(out.values.get(0, 0), 0.0);
        assert_eq!(out.values.get(1, 0), 0.0);
    }

    #[test]
    fn zero_spread_is_clamped_and_flagged() {
        let ep = tiny(&[[4.0, 1.0], [4.0, 2.0]], &[[true, true], [true, true]]);
        let st = NormStats::from_training([&ep]).unwrap();
        assert_eq!(st.sd[0], 1.0);
        assert!(st.clamped[0] && !st.clamped[1]);
    }

    #[test]
    fn charted_entries_survive_imputation() {
        let eps = generate_cohort(&Rng::new(4), 10, &GeneratorConfig::default()).unwrap();
        let st = NormStats::from_training(&eps).unwrap();
        for ep in &eps {
            let out = impute(ep, &st).unwrap();
            for r in 0..ep.n_rows() {
                for c in 0..ep.n_channels() {
                    if ep.is_charted(r, c) {
                        assert_eq!(out.values.get(r, c), ep.values.get(r, c));
                    }
                }
            }
        }
    }

    #[test]
    fn normalized_training_charted_values_are_standardized() {
        let eps = generate_cohort(&Rng::new(6), 30, &GeneratorConfig::default()).unwrap();
        let st = NormStats::from_training(&eps).unwrap();
        let normed: Vec<EpisodeMatrix> = eps
            .iter()
            .map(|e| impute_and_normalize(e, &st).unwrap())
            .collect();
        // independent recomputation of the moments over charted entries
        for c in 0..st.channels.len() {
            let vals: Vec<f64> = normed
                .iter()
                .flat_map(|e| {
                    (0..e.n_rows())
                        .filter(move |&r| e.is_charted(r, c))
                        .map(move |r| e.values.get(r, c))
                })
                .collect();
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mu.abs() < 1e-9, "{}: mean {mu}", st.channels[c]);
            assert!((sd - 1.0).abs() < 1e-9, "{}: sd {sd}", st.channels[c]);
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let ep = tiny(&[[1.0, 1.0]], &[[true, true]]);
        let mut st = stats([0.0, 0.0], [1.0, 1.0]);
        st.channels[1] = "z".into();
        assert!(impute(&ep, &st).is_err());
    }
}
