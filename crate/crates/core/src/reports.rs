//! CSV reports written by evaluation and read back by comparison. Missing
//! values (single-class AUROC, no acute episodes) are written `undefined`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::EpochLog;

pub const UNDEFINED: &str = "undefined";

pub const TRAINING_LOG_HEADER: [&str; 5] =
    ["epoch", "train_loss", "val_loss", "val_auroc", "is_best"];
pub const VARIATION_HEADER: [&str; 4] = ["definition", "model", "n_p", "v_bar"];
pub const PIPEUP_HEADER: [&str; 4] = ["model", "class", "mean", "sd"];
pub const AUROC_HEADER: [&str; 5] = ["model", "slice_hours", "auroc", "n", "mortality_rate"];
pub const COMPARISON_HEADER: [&str; 5] = ["metric", "definition", "model", "value", "n"];

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x}"))
}

fn parse_opt(s: &str, loc: &str) -> Result<Option<f64>> {
    if s == UNDEFINED {
        return Ok(None);
    }
    parse_f64(s, loc).map(Some)
}

fn parse_f64(s: &str, loc: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(loc, format!("not a finite number: {s:?}")))
}

fn parse_usize(s: &str, loc: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(loc, format!("not a count: {s:?}")))
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Inconsistent(format!("writing csv: {e}"));
    writer.write_record(header).map_err(err)?;
    for r in rows {
        writer.write_record(r).map_err(err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Inconsistent(format!("writing csv: {e}")))
}

/// Records of a CSV with exactly `header`; each is returned with its
/// location string for error messages.
fn read_rows(text: &str, header: &[&str], what: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let h = reader
        .headers()
        .map_err(|e| Error::parse(format!("{what} header"), e.to_string()))?;
    if h.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(
            format!("{what} header"),
            format!("expected {}", header.join(",")),
        ));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let loc = format!("{what} row {}", i + 2);
            let r = r.map_err(|e| Error::parse(&loc, e.to_string()))?;
            Ok((loc, r.iter().map(str::to_string).collect()))
        })
        .collect()
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn training_log_csv(log: &[EpochLog]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|l| {
            vec![
                l.epoch.to_string(),
                format!("{}", l.train_loss),
                format!("{}", l.val_loss),
                fmt_opt(l.val_auroc),
                l.is_best.to_string(),
            ]
        })
        .collect();
    let mut out = Vec::new();
    write_rows(&mut out, &TRAINING_LOG_HEADER, &rows)?;
    Ok(out)
}

pub fn parse_training_log(text: &str) -> Result<Vec<EpochLog>> {
    read_rows(text, &TRAINING_LOG_HEADER, "training log")?
        .into_iter()
        .map(|(loc, r)| {
            Ok(EpochLog {
                epoch: parse_usize(&r[0], &loc)?,
                train_loss: parse_f64(&r[1], &loc)?,
                val_loss: parse_f64(&r[2], &loc)?,
                val_auroc: parse_opt(&r[3], &loc)?,
                is_best: match r[4].as_str() {
                    "true" => true,
                    "false" => false,
                    other => return Err(Error::parse(&loc, format!("bad is_best {other:?}"))),
                },
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationRow {
    pub definition: String,
    pub model: String,
    pub n_p: usize,
    pub v_bar: Option<f64>,
}

pub fn variation_csv(rows: &[VariationRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.definition.clone(),
                r.model.clone(),
                r.n_p.to_string(),
                fmt_opt(r.v_bar),
            ]
        })
        .collect();
    let mut out = Vec::new();
    write_rows(&mut out, &VARIATION_HEADER, &rows)?;
    Ok(out)
}

pub fn parse_variation(text: &str) -> Result<Vec<VariationRow>> {
    read_rows(text, &VARIATION_HEADER, "variation")?
        .into_iter()
        .map(|(loc, r)| {
            Ok(VariationRow {
                definition: r[0].clone(),
                model: r[1].clone(),
                n_p: parse_usize(&r[2], &loc)?,
                v_bar: parse_opt(&r[3], &loc)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipeUpRow {
    pub model: String,
    /// `survived` or `died`.
    pub class: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

pub fn pipeup_csv(rows: &[PipeUpRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.class.clone(),
                fmt_opt(r.mean),
                fmt_opt(r.sd),
            ]
        })
        .collect();
    let mut out = Vec::new();
    write_rows(&mut out, &PIPEUP_HEADER, &rows)?;
    Ok(out)
}

pub fn parse_pipeup(text: &str) -> Result<Vec<PipeUpRow>> {
    read_rows(text, &PIPEUP_HEADER, "pipeup")?
        .into_iter()
        .map(|(loc, r)| {
            Ok(PipeUpRow {
                model: r[0].clone(),
                class: r[1].clone(),
                mean: parse_opt(&r[2], &loc)?,
                sd: parse_opt(&r[3], &loc)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AurocRow {
    pub model: String,
    pub slice_hours: f64,
    pub auroc: Option<f64>,
    pub n: usize,
    pub mortality_rate: Option<f64>,
}

pub fn auroc_csv(rows: &[AurocRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                format!("{}", r.slice_hours),
                fmt_opt(r.auroc),
                r.n.to_string(),
                fmt_opt(r.mortality_rate),
            ]
        })
        .collect();
    let mut out = Vec::new();
    write_rows(&mut out, &AUROC_HEADER, &rows)?;
    Ok(out)
}

pub fn parse_auroc(text: &str) -> Result<Vec<AurocRow>> {
    read_rows(text, &AUROC_HEADER, "auroc")?
        .into_iter()
        .map(|(loc, r)| {
            Ok(AurocRow {
                model: r[0].clone(),
                slice_hours: parse_f64(&r[1], &loc)?,
                auroc: parse_opt(&r[2], &loc)?,
                n: parse_usize(&r[3], &loc)?,
                mortality_rate: parse_opt(&r[4], &loc)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub definition: String,
    pub model: String,
    pub value: Option<f64>,
    pub n: Option<usize>,
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.metric.clone(),
                r.definition.clone(),
                r.model.clone(),
                fmt_opt(r.value),
                r.n.map_or_else(String::new, |n| n.to_string()),
            ]
        })
        .collect();
    let mut out = Vec::new();
    write_rows(&mut out, &COMPARISON_HEADER, &rows)?;
    Ok(out)
}

pub fn parse_comparison(text: &str) -> Result<Vec<ComparisonRow>> {
    read_rows(text, &COMPARISON_HEADER, "comparison")?
        .into_iter()
        .map(|(loc, r)| {
            Ok(ComparisonRow {
                metric: r[0].clone(),
                definition: r[1].clone(),
                model: r[2].clone(),
                value: parse_opt(&r[3], &loc)?,
                n: if r[4].is_empty() {
                    None
                } else {
                    Some(parse_usize(&r[4], &loc)?)
                },
            })
        })
        .collect()
}
