//! Cohort files are JSON lines, one episode per line. Split files are a
//! single JSON object with three id arrays. Both carry `format_version`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::episode::{EpisodeMatrix, Outcome};
use crate::data::split::CohortSplit;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const COHORT_FORMAT_VERSION: u32 = 1;
pub const SPLIT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeRecord {
    format_version: u32,
    episode_id: String,
    patient_id: String,
    outcome: Outcome,
    channels: Vec<String>,
    times: Vec<f64>,
    values: Vec<f64>,
    charted_mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    injected_events: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitRecord {
    format_version: u32,
    train: Vec<String>,
    validation: Vec<String>,
    test: Vec<String>,
}

pub fn write_cohort<W: Write>(mut w: W, episodes: &[EpisodeMatrix]) -> Result<()> {
    for ep in episodes {
        let rec = EpisodeRecord {
            format_version: COHORT_FORMAT_VERSION,
            episode_id: ep.episode_id.clone(),
            patient_id: ep.patient_id.clone(),
            outcome: ep.outcome,
            channels: ep.channels.clone(),
            times: ep.times.clone(),
            values: ep.values.data().to_vec(),
            charted_mask: ep.charted.clone(),
            injected_events: ep.injected_events.clone(),
        };
        let line = serde_json::to_string(&rec)
            .map_err(|e| Error::argument(format!("episode {}: {e}", ep.episode_id)))?;
        writeln!(w, "{line}").map_err(|e| Error::io("<cohort>", e))?;
    }
    Ok(())
}

pub fn save_cohort(path: &Path, episodes: &[EpisodeMatrix]) -> Result<()> {
    let mut buf = Vec::new();
    write_cohort(&mut buf, episodes)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parses a JSON-lines cohort. Errors name the offending line.
pub fn parse_cohort(text: &str) -> Result<Vec<EpisodeMatrix>> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let loc = || format!("line {}", i + 1);
        if line.trim().is_empty() {
            continue;
        }
        let rec: EpisodeRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(loc(), e.to_string()))?;
        if rec.format_version != COHORT_FORMAT_VERSION {
            return Err(Error::parse(
                loc(),
                format!("unsupported format_version {}", rec.format_version),
            ));
        }
        let rows = rec.times.len();
        let cols = rec.channels.len();
        if rec.values.len() != rows * cols {
            return Err(Error::parse(
                loc(),
                format!(
                    "{} values for {rows} times x {cols} channels",
                    rec.values.len()
                ),
            ));
        }
        let ep = EpisodeMatrix {
            values: Matrix::from_vec(rows, cols, rec.values)?,
            patient_id: rec.patient_id,
            episode_id: rec.episode_id,
            channels: rec.channels,
            times: rec.times,
            charted: rec.charted_mask,
            outcome: rec.outcome,
            injected_events: rec.injected_events,
        };
        ep.validate()
            .map_err(|e| Error::parse(loc(), e.to_string()))?;
        if !ids.insert(ep.episode_id.clone()) {
            return Err(Error::parse(
                loc(),
                format!("duplicate episode id {}", ep.episode_id),
            ));
        }
        out.push(ep);
    }
    Ok(out)
}

pub fn load_cohort(path: &Path) -> Result<Vec<EpisodeMatrix>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cohort(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_split<W: Write>(w: W, split: &CohortSplit) -> Result<()> {
    let rec = SplitRecord {
        format_version: SPLIT_FORMAT_VERSION,
        train: split.train.clone(),
        validation: split.validation.clone(),
        test: split.test.clone(),
    };
    serde_json::to_writer_pretty(w, &rec).map_err(|e| Error::argument(e.to_string()))
}

pub fn save_split(path: &Path, split: &CohortSplit) -> Result<()> {
    let mut buf = Vec::new();
    write_split(&mut buf, split)?;
    buf.push(b'\n');
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn parse_split(text: &str) -> Result<CohortSplit> {
    let rec: SplitRecord = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
    if rec.format_version != SPLIT_FORMAT_VERSION {
        return Err(Error::parse(
            "format_version",
            format!("unsupported format_version {}", rec.format_version),
        ));
    }
    let split = CohortSplit {
        train: rec.train,
        validation: rec.validation,
        test: rec.test,
    };
    split
        .check_disjoint()
        .map_err(|e| Error::parse("split", e.to_string()))?;
    Ok(split)
}

pub fn load_split(path: &Path) -> Result<CohortSplit> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}
