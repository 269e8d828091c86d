//! End-to-end pipeline steps shared by the command-line tool and the
//! acceptance suite: generate a cohort, train one model variant, evaluate
//! it on the test split and join evaluations into one comparison table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::data::{
    generate_cohort, impute_and_normalize, parse_cohort, parse_split, split_patients, summarize,
    write_cohort, write_split, CohortSplit, EpisodeMatrix, GeneratorConfig, NormStats, Outcome,
    SplitSummary,
};
use crate::error::{Error, Result};
use crate::metrics::{
    all_definitions, detect_acute_events, first_prediction_stats, reference_thresholds,
    thresholds_from_cohort, timeslice_auroc, variation_report, write_thresholds_csv,
    AcuityDefinition, PredictionTrajectory, ThresholdTable, SLICE_HOURS,
};
use crate::model::Variant;
use crate::perseveration::predict_trajectory;
use crate::reports::{
    auroc_csv, comparison_csv, parse_auroc, parse_pipeup, parse_variation, pipeup_csv, read_file,
    training_log_csv, variation_csv, write_file, AurocRow, ComparisonRow, PipeUpRow, VariationRow,
};
use crate::rng::{Rng, Stream};
use crate::trainer::{prepare_examples, train, EpochLog, TrainingConfig};

pub const COHORT_FILE: &str = "cohort.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const VARIATION_FILE: &str = "variation.csv";
pub const PIPEUP_FILE: &str = "pipeup.csv";
pub const AUROC_FILE: &str = "auroc.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const MANIFEST_FILE: &str = "evaluation.json";

/// SHA-256 over the serialized cohort and split.
pub fn cohort_fingerprint(cohort_text: &str, split_text: &str) -> String {
    let mut h = Sha256::new();
    h.update((cohort_text.len() as u64).to_le_bytes());
    h.update(cohort_text.as_bytes());
    h.update(split_text.as_bytes());
    hex::encode(h.finalize())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// A cohort with its split, as read from (or written to) disk.
#[derive(Clone, Debug)]
pub struct CohortData {
    pub episodes: Vec<EpisodeMatrix>,
    pub split: CohortSplit,
    pub fingerprint: String,
}

impl CohortData {
    pub fn generate(n_patients: usize, seed: u64, config: &GeneratorConfig) -> Result<Self> {
        let episodes = generate_cohort(&Rng::stream(seed, Stream::Data), n_patients, config)?;
        let split = split_patients(&episodes, &mut Rng::stream(seed, Stream::Split))?;
        let (c, s) = Self::serialize(&episodes, &split)?;
        Ok(CohortData {
            fingerprint: cohort_fingerprint(&c, &s),
            episodes,
            split,
        })
    }

    fn serialize(episodes: &[EpisodeMatrix], split: &CohortSplit) -> Result<(String, String)> {
        let mut c = Vec::new();
        write_cohort(&mut c, episodes)?;
        let mut s = Vec::new();
        write_split(&mut s, split)?;
        Ok((
            String::from_utf8(c).expect("utf-8 cohort"),
            String::from_utf8(s).expect("utf-8 split"),
        ))
    }

    /// Writes `cohort.jsonl` and `split.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        let (c, s) = Self::serialize(&self.episodes, &self.split)?;
        write_file(&dir.join(COHORT_FILE), c.as_bytes())?;
        write_file(&dir.join(SPLIT_FILE), s.as_bytes())
    }

    /// Loads a cohort file and its split (by default `split.json` next to it).
    pub fn load(cohort: &Path, split: Option<&Path>) -> Result<Self> {
        let split_path = match split {
            Some(p) => p.to_path_buf(),
            None => cohort.parent().unwrap_or(Path::new(".")).join(SPLIT_FILE),
        };
        let cohort_text = read_file(cohort)?;
        let split_text = read_file(&split_path)?;
        let episodes = parse_cohort(&cohort_text).map_err(|e| with_path(e, cohort))?;
        let split = parse_split(&split_text).map_err(|e| with_path(e, &split_path))?;
        split.check_against(&episodes)?;
        Ok(CohortData {
            fingerprint: cohort_fingerprint(&cohort_text, &split_text),
            episodes,
            split,
        })
    }

    pub fn select(&self, ids: &[String]) -> Vec<&EpisodeMatrix> {
        CohortSplit::select(&self.episodes, ids)
    }

    pub fn summary(&self) -> Vec<SplitSummary> {
        summarize(&self.episodes, &self.split)
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    }
}

/// Trains one variant on the training split, selecting on validation.
pub fn train_model(
    cohort: &CohortData,
    variant: Variant,
    config: &TrainingConfig,
) -> Result<(Checkpoint, Vec<EpochLog>)> {
    let train_eps = cohort.select(&cohort.split.train);
    let val_eps = cohort.select(&cohort.split.validation);
    let stats = NormStats::from_training(train_eps.iter().copied())?;
    let train_ex = prepare_examples(train_eps.iter().copied(), &stats)?;
    let val_ex = prepare_examples(val_eps.iter().copied(), &stats)?;
    log::info!(
        "training {} on {} episodes, validating on {}",
        variant.label(),
        train_ex.len(),
        val_ex.len()
    );
    let out = train(variant, &train_ex, &val_ex, config)?;
    Ok((
        Checkpoint {
            params: out.best,
            normalization: stats,
            training: config.clone(),
            best_epoch: out.best_epoch,
            cohort_fingerprint: cohort.fingerprint.clone(),
        },
        out.log,
    ))
}

pub fn save_training(dir: &Path, checkpoint: &Checkpoint, log: &[EpochLog]) -> Result<()> {
    ensure_dir(dir)?;
    checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    write_file(&dir.join(TRAINING_LOG_FILE), &training_log_csv(log)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    /// Derived from the test split's pooled percent changes.
    Computed,
    /// The published reference table bundled with the crate.
    Reference,
}

impl ThresholdSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdSource::Computed => "computed",
            ThresholdSource::Reference => "reference",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub model: String,
    pub trajectories: Vec<PredictionTrajectory>,
    pub thresholds: ThresholdTable,
    pub variation: Vec<VariationRow>,
    pub pipeup: Vec<PipeUpRow>,
    pub auroc: Vec<AurocRow>,
}

/// Inference-mode survival trajectory for every episode.
pub fn trajectories(
    checkpoint: &Checkpoint,
    episodes: &[&EpisodeMatrix],
) -> Result<Vec<PredictionTrajectory>> {
    episodes
        .iter()
        .map(|ep| {
            let x = impute_and_normalize(ep, &checkpoint.normalization)?;
            Ok(PredictionTrajectory {
                episode_id: ep.episode_id.clone(),
                times: ep.times.clone(),
                predictions: predict_trajectory(&checkpoint.params, &x.values)?,
                outcome: ep.outcome,
            })
        })
        .collect()
}

/// All metrics of one model on the given (test) episodes.
pub fn evaluate(
    checkpoint: &Checkpoint,
    test: &[&EpisodeMatrix],
    source: ThresholdSource,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::argument("no test episodes to evaluate"));
    }
    let model = checkpoint.params.variant().label();
    let trajs = trajectories(checkpoint, test)?;
    let thresholds = match source {
        ThresholdSource::Computed => thresholds_from_cohort(test.iter().copied())?,
        ThresholdSource::Reference => reference_thresholds(),
    };

    let mut variation = Vec::new();
    for def in all_definitions() {
        if let AcuityDefinition::Change { channel, x, .. } = &def {
            // channels without any change in the pool have no thresholds
            if thresholds.get(channel, *x).is_none() {
                continue;
            }
        }
        let acute: Vec<Vec<usize>> = test
            .iter()
            .map(|ep| detect_acute_events(ep, &def, &thresholds))
            .collect::<Result<_>>()?;
        let report = variation_report(
            &def.label(),
            trajs.iter().zip(&acute).map(|(t, s)| {
                (
                    t.episode_id.as_str(),
                    t.predictions.as_slice(),
                    s.as_slice(),
                )
            }),
        )?;
        variation.push(VariationRow {
            definition: report.definition,
            model: model.clone(),
            n_p: report.n_p,
            v_bar: report.v_bar,
        });
    }

    let stats = first_prediction_stats(&trajs);
    let pipeup = [
        (Outcome::Survived, stats.survived),
        (Outcome::Died, stats.died),
    ]
    .into_iter()
    .map(|(o, s)| PipeUpRow {
        model: model.clone(),
        class: o.as_str().to_string(),
        mean: s.mean,
        sd: s.sd,
    })
    .collect();

    let auroc = timeslice_auroc(&trajs, &SLICE_HOURS)?
        .into_iter()
        .map(|s| AurocRow {
            model: model.clone(),
            slice_hours: s.hours,
            auroc: s.auroc,
            n: s.n,
            mortality_rate: s.mortality_rate,
        })
        .collect();

    Ok(Evaluation {
        model,
        trajectories: trajs,
        thresholds,
        variation,
        pipeup,
        auroc,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationManifest {
    pub format_version: u32,
    pub model: String,
    pub cohort_fingerprint: String,
    pub thresholds: ThresholdSource,
    pub n_episodes: usize,
}

pub fn save_evaluation(
    dir: &Path,
    eval: &Evaluation,
    test: &[&EpisodeMatrix],
    fingerprint: &str,
    source: ThresholdSource,
) -> Result<()> {
    ensure_dir(dir)?;
    let mut t = Vec::new();
    write_thresholds_csv(&mut t, &eval.thresholds)?;
    write_file(&dir.join(THRESHOLDS_FILE), &t)?;
    write_file(&dir.join(VARIATION_FILE), &variation_csv(&eval.variation)?)?;
    write_file(&dir.join(PIPEUP_FILE), &pipeup_csv(&eval.pipeup)?)?;
    write_file(&dir.join(AUROC_FILE), &auroc_csv(&eval.auroc)?)?;
    let mut ep = String::from("episode_id,patient_id,outcome,rows\n");
    for e in test {
        ep.push_str(&format!(
            "{},{},{},{}\n",
            e.episode_id,
            e.patient_id,
            e.outcome.as_str(),
            e.n_rows()
        ));
    }
    write_file(&dir.join(EPISODES_FILE), ep.as_bytes())?;
    let manifest = EvaluationManifest {
        format_version: 1,
        model: eval.model.clone(),
        cohort_fingerprint: fingerprint.to_string(),
        thresholds: source,
        n_episodes: test.len(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Inconsistent(format!("serializing manifest: {e}")))?;
    json.push('\n');
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

pub fn parse_manifest(text: &str) -> Result<EvaluationManifest> {
    let m: EvaluationManifest = serde_json::from_str(text)
        .map_err(|e| Error::parse("evaluation manifest", e.to_string()))?;
    if m.format_version != 1 {
        return Err(Error::parse(
            "evaluation manifest",
            format!("unsupported format_version {}", m.format_version),
        ));
    }
    Ok(m)
}

pub fn load_manifest(dir: &Path) -> Result<EvaluationManifest> {
    let path = dir.join(MANIFEST_FILE);
    parse_manifest(&read_file(&path)?).map_err(|e| with_path(e, &path))
}

/// Joins evaluation directories into rows keyed by (metric, definition,
/// model). All directories must come from the same cohort and threshold
/// source, and model labels must be distinct.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    if dirs.is_empty() {
        return Err(Error::argument("no evaluation directories given"));
    }
    let mut manifests = Vec::new();
    for d in dirs {
        if !d.is_dir() {
            return Err(Error::io(
                d,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "evaluation directory not found",
                ),
            ));
        }
        manifests.push(load_manifest(d)?);
    }
    let first = &manifests[0];
    for (m, d) in manifests.iter().zip(dirs).skip(1) {
        if m.cohort_fingerprint != first.cohort_fingerprint {
            return Err(Error::Inconsistent(format!(
                "{} was evaluated on a different cohort than {}",
                d.display(),
                dirs[0].display()
            )));
        }
        if m.thresholds != first.thresholds {
            return Err(Error::Inconsistent(format!(
                "{} used {} thresholds, {} used {}",
                d.display(),
                m.thresholds.as_str(),
                dirs[0].display(),
                first.thresholds.as_str()
            )));
        }
    }
    for (i, m) in manifests.iter().enumerate() {
        if manifests[..i].iter().any(|o| o.model == m.model) {
            return Err(Error::Inconsistent(format!(
                "model {} appears twice",
                m.model
            )));
        }
    }

    let mut variation: Vec<Vec<VariationRow>> = Vec::new();
    let mut pipeup: Vec<Vec<PipeUpRow>> = Vec::new();
    let mut auroc: Vec<Vec<AurocRow>> = Vec::new();
    for d in dirs {
        let read = |f: &str| -> Result<(PathBuf, String)> {
            let p = d.join(f);
            let t = read_file(&p)?;
            Ok((p, t))
        };
        let (p, t) = read(VARIATION_FILE)?;
        variation.push(parse_variation(&t).map_err(|e| with_path(e, &p))?);
        let (p, t) = read(PIPEUP_FILE)?;
        pipeup.push(parse_pipeup(&t).map_err(|e| with_path(e, &p))?);
        let (p, t) = read(AUROC_FILE)?;
        auroc.push(parse_auroc(&t).map_err(|e| with_path(e, &p))?);
    }

    let mut rows = Vec::new();
    // variation: definition-major, models in directory order
    let mut defs: Vec<String> = Vec::new();
    for v in variation.iter().flatten() {
        if !defs.contains(&v.definition) {
            defs.push(v.definition.clone());
        }
    }
    for def in &defs {
        for v in variation.iter().flatten().filter(|v| &v.definition == def) {
            rows.push(ComparisonRow {
                metric: "variation".into(),
                definition: def.clone(),
                model: v.model.clone(),
                value: v.v_bar,
                n: Some(v.n_p),
            });
        }
    }
    for class in ["survived", "died"] {
        for (metric, pick) in [("pipeup_mean", 0), ("pipeup_sd", 1)] {
            for p in pipeup.iter().flatten().filter(|p| p.class == class) {
                rows.push(ComparisonRow {
                    metric: metric.into(),
                    definition: class.into(),
                    model: p.model.clone(),
                    value: if pick == 0 { p.mean } else { p.sd },
                    n: None,
                });
            }
        }
    }
    let mut slices: Vec<f64> = Vec::new();
    for a in auroc.iter().flatten() {
        if !slices.contains(&a.slice_hours) {
            slices.push(a.slice_hours);
        }
    }
    for h in slices {
        for a in auroc.iter().flatten().filter(|a| a.slice_hours == h) {
            rows.push(ComparisonRow {
                metric: "auroc".into(),
                definition: format!("slice_{h}h"),
                model: a.model.clone(),
                value: a.auroc,
                n: Some(a.n),
            });
        }
    }
    Ok(rows)
}

pub fn save_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_file(path, &comparison_csv(rows)?)
}
