use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::episode::EpisodeMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Disjoint episode-id sets, partitioned at the patient level.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl CohortSplit {
    /// Selects the episodes belonging to one id list, in cohort order.
    pub fn select<'a>(episodes: &'a [EpisodeMatrix], ids: &[String]) -> Vec<&'a EpisodeMatrix> {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        episodes
            .iter()
            .filter(|e| wanted.contains(e.episode_id.as_str()))
            .collect()
    }

    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.validation).chain(&self.test) {
            if !seen.insert(id.as_str()) {
                return Err(Error::Inconsistent(format!(
                    "episode {id} appears in two splits"
                )));
            }
        }
        Ok(())
    }

    /// Checks that every split id exists in the cohort and that no patient
    /// spans two splits.
    pub fn check_against(&self, episodes: &[EpisodeMatrix]) -> Result<()> {
        self.check_disjoint()?;
        let by_id: BTreeMap<&str, &str> = episodes
            .iter()
            .map(|e| (e.episode_id.as_str(), e.patient_id.as_str()))
            .collect();
        let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
        for (s, ids) in [&self.train, &self.validation, &self.test]
            .iter()
            .enumerate()
        {
            for id in ids.iter() {
                let patient = by_id.get(id.as_str()).ok_or_else(|| {
                    Error::Inconsistent(format!("split references unknown episode {id}"))
                })?;
                if let Some(&prev) = owner.get(patient) {
                    if prev != s {
                        return Err(Error::Inconsistent(format!(
                            "patient {patient} appears in more than one split"
                        )));
                    }
                }
                owner.insert(patient, s);
            }
        }
        Ok(())
    }
}

/// Patient-level 60/20/20 partition with no stratification.
pub fn split_patients(episodes: &[EpisodeMatrix], rng: &mut Rng) -> Result<CohortSplit> {
    let mut patients: Vec<&str> = episodes
        .iter()
        .map(|e| e.patient_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = patients.len();
    if n < 5 {
        return Err(Error::argument(format!(
            "need at least 5 patients to split, got {n}"
        )));
    }
    rng.shuffle(&mut patients);
    let n_train = (n * 3 + 2) / 5;
    let n_val = (n + 2) / 5;
    let assignment: BTreeMap<&str, usize> = patients
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = if i < n_train {
                0
            } else if i < n_train + n_val {
                1
            } else {
                2
            };
            (p, s)
        })
        .collect();
    let mut split = CohortSplit::default();
    for ep in episodes {
        let target = match assignment[ep.patient_id.as_str()] {
            0 => &mut split.train,
            1 => &mut split.validation,
            _ => &mut split.test,
        };
        target.push(ep.episode_id.clone());
    }
    split.train.sort();
    split.validation.sort();
    split.test.sort();
    Ok(split)
}

/// Demographics-style summary of one partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSummary {
    pub name: &'static str,
    pub episodes: usize,
    pub patients: usize,
    pub mortality_rate: f64,
}

pub fn summarize(episodes: &[EpisodeMatrix], split: &CohortSplit) -> Vec<SplitSummary> {
    let all: Vec<String> = episodes.iter().map(|e| e.episode_id.clone()).collect();
    [
        ("training", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
        ("overall", &all),
    ]
    .into_iter()
    .map(|(name, ids)| {
        let eps = CohortSplit::select(episodes, ids);
        let patients = eps
            .iter()
            .map(|e| e.patient_id.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        let deaths = eps.iter().filter(|e| !e.outcome.survived()).count();
        SplitSummary {
            name,
            episodes: eps.len(),
            patients,
            mortality_rate: if eps.is_empty() {
                0.0
            } else {
                deaths as f64 / eps.len() as f64
            },
        }
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_cohort, GeneratorConfig};

    fn cohort(n: usize) -> Vec<EpisodeMatrix> {
        let cfg = GeneratorConfig {
            median_hours: 8.0,
            ..GeneratorConfig::default()
        };
        generate_cohort(&Rng::new(21), n, &cfg).unwrap()
    }

    fn patients_in(episodes: &[EpisodeMatrix], ids: &[String]) -> BTreeSet<String> {
        CohortSplit::select(episodes, ids)
            .iter()
            .map(|e| e.patient_id.clone())
            .collect()
    }

    #[test]
    fn ten_patients_split_six_two_two() {
        let eps = cohort(10);
        let split = split_patients(&eps, &mut Rng::new(1)).unwrap();
        assert_eq!(patients_in(&eps, &split.train).len(), 6);
        assert_eq!(patients_in(&eps, &split.validation).len(), 2);
        assert_eq!(patients_in(&eps, &split.test).len(), 2);
        split.check_against(&eps).unwrap();
    }

    #[test]
    fn patients_never_leak_across_splits() {
        let eps = cohort(60);
        let split = split_patients(&eps, &mut Rng::new(2)).unwrap();
        let tr = patients_in(&eps, &split.train);
        let va = patients_in(&eps, &split.validation);
        let te = patients_in(&eps, &split.test);
        assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        assert_eq!(
            split.train.len() + split.validation.len() + split.test.len(),
            eps.len()
        );
    }

    #[test]
    fn split_is_deterministic_and_rejects_tiny_cohorts() {
        let eps = cohort(12);
        let a = split_patients(&eps, &mut Rng::new(5)).unwrap();
        let b = split_patients(&eps, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(split_patients(&cohort(4), &mut Rng::new(5)).is_err());
    }

    #[test]
    fn multi_episode_patient_stays_together() {
        let eps = cohort(30);
        let split = split_patients(&eps, &mut Rng::new(8)).unwrap();
        let multi = eps
            .iter()
            .find(|e| eps.iter().filter(|o| o.patient_id == e.patient_id).count() >= 2)
            .expect("some patient has several episodes");
        let ids: Vec<&String> = eps
            .iter()
            .filter(|e| e.patient_id == multi.patient_id)
            .map(|e| &e.episode_id)
            .collect();
        let home = [&split.train, &split.validation, &split.test]
            .into_iter()
            .filter(|s| ids.iter().any(|id| s.contains(id)))
            .count();
        assert_eq!(home, 1);
    }

    #[test]
    fn leak_detection() {
        let eps = cohort(10);
        let mut split = split_patients(&eps, &mut Rng::new(1)).unwrap();
        let moved = split.test[0].clone();
        split.train.push(moved);
        assert!(split.check_against(&eps).is_err());
    }
}
