use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{AcuteDirection, EpisodeMatrix, ACUITY_CHANNELS};
use crate::error::{Error, Result};

pub const REFERENCE_THRESHOLDS_CSV: &str = include_str!("../../assets/reference_thresholds.csv");

/// Extreme-percentile level `X`. Stored in per-mille so rank arithmetic
/// stays in integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Percentile {
    P5,
    P1,
    P05,
}

impl Percentile {
    pub const ALL: [Percentile; 3] = [Percentile::P5, Percentile::P1, Percentile::P05];

    pub fn per_mille(self) -> usize {
        match self {
            Percentile::P5 => 50,
            Percentile::P1 => 10,
            Percentile::P05 => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Percentile::P5 => "5",
            Percentile::P1 => "1",
            Percentile::P05 => "0.5",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "5" | "5.0" => Some(Percentile::P5),
            "1" | "1.0" => Some(Percentile::P1),
            "0.5" => Some(Percentile::P05),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AcuityDefinition {
    Change {
        channel: String,
        direction: AcuteDirection,
        x: Percentile,
    },
    /// Charted heart rate reaching zero.
    CardiacArrest,
}

impl AcuityDefinition {
    pub fn label(&self) -> String {
        match self {
            AcuityDefinition::Change {
                channel,
                direction,
                x,
            } => {
                format!("{channel}_{}_{}", direction.as_str(), x.as_str())
            }
            AcuityDefinition::CardiacArrest => "cardiac_arrest".to_string(),
        }
    }

    pub fn percentile(&self) -> Option<Percentile> {
        match self {
            AcuityDefinition::Change { x, .. } => Some(*x),
            AcuityDefinition::CardiacArrest => None,
        }
    }

    pub fn direction(&self) -> Option<AcuteDirection> {
        match self {
            AcuityDefinition::Change { direction, .. } => Some(*direction),
            AcuityDefinition::CardiacArrest => None,
        }
    }
}

impl fmt::Display for AcuityDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The 24 channel/percentile definitions followed by cardiac arrest.
pub fn all_definitions() -> Vec<AcuityDefinition> {
    let mut defs = Vec::with_capacity(25);
    for (channel, direction) in ACUITY_CHANNELS {
        for x in Percentile::ALL {
            defs.push(AcuityDefinition::Change {
                channel: channel.to_string(),
                direction,
                x,
            });
        }
    }
    defs.push(AcuityDefinition::CardiacArrest);
    defs
}

/// Percent changes between consecutive charted values of one channel,
/// indexed by the row of the later value. Pairs whose earlier value is
/// zero have no percent change and are skipped.
pub fn change_series(episode: &EpisodeMatrix, channel: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut prev: Option<f64> = None;
    for r in 0..episode.n_rows() {
        if !episode.is_charted(r, channel) {
            continue;
        }
        let v = episode.values.get(r, channel);
        if let Some(p) = prev {
            if p != 0.0 {
                out.push((r, 100.0 * (v - p) / p));
            }
        }
        prev = Some(v);
    }
    out
}

/// All percent changes of `channel` pooled over `episodes`, in episode order.
pub fn pooled_changes<'a>(
    episodes: impl IntoIterator<Item = &'a EpisodeMatrix>,
    channel: &str,
) -> Vec<f64> {
    let mut pool = Vec::new();
    for ep in episodes {
        if let Some(c) = ep.channel_index(channel) {
            pool.extend(change_series(ep, c).into_iter().map(|(_, v)| v));
        }
    }
    pool
}

/// Nearest-rank order statistic: the `ceil(X% * n)`-th smallest change for
/// drops, the `ceil(X% * n)`-th largest for rises.
pub fn nearest_rank(pool: &[f64], direction: AcuteDirection, x: Percentile) -> Option<f64> {
    if pool.is_empty() || direction == AcuteDirection::None {
        return None;
    }
    let n = pool.len();
    let rank = ((x.per_mille() * n).div_ceil(1000)).max(1);
    let mut sorted = pool.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Some(match direction {
        AcuteDirection::Drop => sorted[rank - 1],
        _ => sorted[n - rank],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEntry {
    pub channel: String,
    pub direction: AcuteDirection,
    pub x: Percentile,
    pub threshold: f64,
}

/// Signed percent-change thresholds keyed by `(channel, X)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThresholdTable {
    entries: BTreeMap<(String, Percentile), (AcuteDirection, f64)>,
    order: Vec<(String, Percentile)>,
}

impl ThresholdTable {
    pub fn insert(&mut self, entry: ThresholdEntry) -> Result<()> {
        let key = (entry.channel.clone(), entry.x);
        if self.entries.contains_key(&key) {
            return Err(Error::argument(format!(
                "duplicate threshold for {} at {}%",
                entry.channel,
                entry.x.as_str()
            )));
        }
        self.entries
            .insert(key.clone(), (entry.direction, entry.threshold));
        self.order.push(key);
        Ok(())
    }

    pub fn get(&self, channel: &str, x: Percentile) -> Option<(AcuteDirection, f64)> {
        self.entries.get(&(channel.to_string(), x)).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> Vec<ThresholdEntry> {
        self.order
            .iter()
            .map(|k| {
                let (direction, threshold) = self.entries[k];
                ThresholdEntry {
                    channel: k.0.clone(),
                    direction,
                    x: k.1,
                    threshold,
                }
            })
            .collect()
    }
}

/// Thresholds from pooled per-channel changes. Channels with an empty pool
/// are left out (with a warning).
pub fn compute_thresholds(
    pools: &[(String, AcuteDirection, Vec<f64>)],
    percentiles: &[Percentile],
) -> Result<ThresholdTable> {
    let mut table = ThresholdTable::default();
    for (channel, direction, pool) in pools {
        if pool.is_empty() {
            log::warn!("no percent changes for {channel}; its thresholds are omitted");
            continue;
        }
        for &x in percentiles {
            let threshold = nearest_rank(pool, *direction, x).ok_or_else(|| {
                Error::argument(format!("channel {channel} has no acute direction"))
            })?;
            table.insert(ThresholdEntry {
                channel: channel.clone(),
                direction: *direction,
                x,
                threshold,
            })?;
        }
    }
    Ok(table)
}

/// Thresholds for the eight acuity channels from a (test) cohort.
pub fn thresholds_from_cohort<'a>(
    episodes: impl IntoIterator<Item = &'a EpisodeMatrix> + Clone,
) -> Result<ThresholdTable> {
    let pools: Vec<_> = ACUITY_CHANNELS
        .iter()
        .map(|(c, d)| (c.to_string(), *d, pooled_changes(episodes.clone(), c)))
        .collect();
    compute_thresholds(&pools, &Percentile::ALL)
}

/// `channel,direction,x,threshold` with a header row.
pub fn parse_thresholds_csv(text: &str) -> Result<ThresholdTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("thresholds header", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["channel", "direction", "x", "threshold"] {
        return Err(Error::parse(
            "thresholds header",
            "expected channel,direction,x,threshold",
        ));
    }
    let mut table = ThresholdTable::default();
    for (i, rec) in reader.records().enumerate() {
        let loc = format!("thresholds row {}", i + 2);
        let rec = rec.map_err(|e| Error::parse(&loc, e.to_string()))?;
        let direction = AcuteDirection::parse(&rec[1])
            .filter(|d| *d != AcuteDirection::None)
            .ok_or_else(|| Error::parse(&loc, format!("bad direction {:?}", &rec[1])))?;
        let x = Percentile::parse(&rec[2])
            .ok_or_else(|| Error::parse(&loc, format!("bad percentile {:?}", &rec[2])))?;
        let threshold: f64 = rec[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(&loc, format!("bad threshold {:?}", &rec[3])))?;
        if rec[0].is_empty() {
            return Err(Error::parse(&loc, "empty channel"));
        }
        table
            .insert(ThresholdEntry {
                channel: rec[0].to_string(),
                direction,
                x,
                threshold,
            })
            .map_err(|e| Error::parse(&loc, e.to_string()))?;
    }
    Ok(table)
}

pub fn write_thresholds_csv<W: std::io::Write>(w: W, table: &ThresholdTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Inconsistent(format!("writing thresholds: {e}"));
    writer
        .write_record(["channel", "direction", "x", "threshold"])
        .map_err(io)?;
    for e in table.entries() {
        writer
            .write_record([
                e.channel.as_str(),
                e.direction.as_str(),
                e.x.as_str(),
                &format!("{}", e.threshold),
            ])
            .map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| Error::Inconsistent(format!("writing thresholds: {e}")))?;
    Ok(())
}

/// The published thresholds, bundled with the crate.
pub fn reference_thresholds() -> ThresholdTable {
    parse_thresholds_csv(REFERENCE_THRESHOLDS_CSV).expect("bundled reference thresholds parse")
}

/// Acute row indices (always >= 1) of `episode` under `definition`.
pub fn detect_acute_events(
    episode: &EpisodeMatrix,
    definition: &AcuityDefinition,
    thresholds: &ThresholdTable,
) -> Result<Vec<usize>> {
    match definition {
        AcuityDefinition::Change {
            channel,
            direction,
            x,
        } => {
            let (dir, thr) = thresholds.get(channel, *x).ok_or_else(|| {
                Error::argument(format!("no threshold for {}", definition.label()))
            })?;
            if dir != *direction {
                return Err(Error::Inconsistent(format!(
                    "threshold for {channel} is a {} threshold",
                    dir.as_str()
                )));
            }
            let Some(c) = episode.channel_index(channel) else {
                return Ok(Vec::new());
            };
            Ok(change_series(episode, c)
                .into_iter()
                .filter(|&(_, v)| match direction {
                    AcuteDirection::Drop => v <= thr,
                    AcuteDirection::Rise => v >= thr,
                    AcuteDirection::None => false,
                })
                .map(|(r, _)| r)
                .collect())
        }
        AcuityDefinition::CardiacArrest => {
            let Some(c) = episode.channel_index("heart_rate") else {
                return Ok(Vec::new());
            };
            let mut out = Vec::new();
            let mut prev: Option<f64> = None;
            for r in 0..episode.n_rows() {
                if !episode.is_charted(r, c) {
                    continue;
                }
                let v = episode.values.get(r, c);
                if v == 0.0 && prev.is_some_and(|p| p > 0.0) {
                    out.push(r);
                }
                prev = Some(v);
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Outcome;
    use crate::linalg::Matrix;
    use crate::rng::Rng;

    /// Single-channel episode; `None` entries are uncharted.
    fn episode(channel: &str, values: &[Option<f64>]) -> EpisodeMatrix {
        let n = values.len();
        EpisodeMatrix {
            patient_id: "p".into(),
            episode_id: "e".into(),
            channels: vec![channel.to_string()],
            times: (0..n).map(|i| 15.0 * i as f64).collect(),
            values: Matrix::from_vec(n, 1, values.iter().map(|v| v.unwrap_or(0.0)).collect())
                .unwrap(),
            charted: values.iter().map(|v| v.is_some()).collect(),
            outcome: Outcome::Survived,
            injected_events: vec![],
        }
    }

    fn def(channel: &str, direction: AcuteDirection, x: Percentile) -> AcuityDefinition {
        AcuityDefinition::Change {
            channel: channel.into(),
            direction,
            x,
        }
    }

    #[test]
    fn percent_changes() {
        assert_eq!(
            change_series(&episode("hr", &[Some(100.0), Some(80.0)]), 0),
            vec![(1, -20.0)]
        );
        assert_eq!(
            change_series(&episode("hr", &[Some(5.0), Some(5.0)]), 0),
            vec![(1, 0.0)]
        );
        let ep = episode("hr", &[Some(100.0), None, Some(80.0)]);
        assert_eq!(change_series(&ep, 0), vec![(2, -20.0)]);
        assert!(change_series(&episode("hr", &[Some(1.0)]), 0).is_empty());
        // zero predecessor is skipped
        let ep = episode("hr", &[Some(80.0), Some(0.0), Some(50.0)]);
        assert_eq!(change_series(&ep, 0), vec![(1, -100.0)]);
    }

    #[test]
    fn nearest_rank_examples() {
        let pool: Vec<f64> = (1..=100).map(|i| -(i as f64)).collect();
        assert_eq!(
            nearest_rank(&pool, AcuteDirection::Drop, Percentile::P5),
            Some(-96.0)
        );
        assert_eq!(
            nearest_rank(&pool, AcuteDirection::Drop, Percentile::P1),
            Some(-100.0)
        );
        assert_eq!(
            nearest_rank(&pool, AcuteDirection::Rise, Percentile::P5),
            Some(-5.0)
        );
        assert_eq!(
            nearest_rank(&[3.0; 17], AcuteDirection::Rise, Percentile::P05),
            Some(3.0)
        );
        assert_eq!(
            nearest_rank(&[], AcuteDirection::Drop, Percentile::P5),
            None
        );
        // tiny pool: rank clamps to the extreme
        assert_eq!(
            nearest_rank(&[1.0, -2.0], AcuteDirection::Drop, Percentile::P05),
            Some(-2.0)
        );
    }

    #[test]
    fn nearest_rank_matches_order_statistics() {
        let mut rng = Rng::new(31);
        for _ in 0..200 {
            let n = 1 + rng.below(400);
            let pool: Vec<f64> = (0..n)
                .map(|_| (rng.normal(0.0, 20.0) * 10.0).round() / 10.0)
                .collect();
            for x in Percentile::ALL {
                // smallest value v such that at least ceil(X% n) entries are <= v
                let need = (x.per_mille() as f64 / 1000.0 * n as f64 - 1e-9)
                    .ceil()
                    .max(1.0) as usize;
                let drop = pool
                    .iter()
                    .copied()
                    .filter(|&v| pool.iter().filter(|&&w| w <= v).count() >= need)
                    .fold(f64::INFINITY, f64::min);
                let rise = pool
                    .iter()
                    .copied()
                    .filter(|&v| pool.iter().filter(|&&w| w >= v).count() >= need)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(nearest_rank(&pool, AcuteDirection::Drop, x), Some(drop));
                assert_eq!(nearest_rank(&pool, AcuteDirection::Rise, x), Some(rise));
            }
        }
    }

    #[test]
    fn reference_table_round_trips() {
        let t = reference_thresholds();
        assert_eq!(t.len(), 24);
        assert_eq!(
            t.get("heart_rate", Percentile::P5),
            Some((AcuteDirection::Drop, -18.8))
        );
        assert_eq!(
            t.get("mean_arterial_pressure", Percentile::P1),
            Some((AcuteDirection::Drop, -38.1))
        );
        assert_eq!(
            t.get("inotrope_score", Percentile::P5),
            Some((AcuteDirection::Rise, 66.7))
        );
        assert_eq!(
            t.get("glasgow_coma_score", Percentile::P1),
            t.get("glasgow_coma_score", Percentile::P05)
        );
        let mut buf = Vec::new();
        write_thresholds_csv(&mut buf, &t).unwrap();
        assert_eq!(
            parse_thresholds_csv(std::str::from_utf8(&buf).unwrap()).unwrap(),
            t
        );
        for (channel, _) in ACUITY_CHANNELS {
            let v: Vec<f64> = Percentile::ALL
                .iter()
                .map(|&x| t.get(channel, x).unwrap().1.abs())
                .collect();
            assert!(v[0] <= v[1] && v[1] <= v[2], "{channel}");
        }
    }

    #[test]
    fn malformed_threshold_files() {
        for bad in [
            "",
            "a,b,c,d\n",
            "channel,direction,x,threshold\nhr,sideways,5,1\n",
            "channel,direction,x,threshold\nhr,drop,7,1\n",
            "channel,direction,x,threshold\nhr,drop,5,abc\n",
            "channel,direction,x,threshold\nhr,drop,5,1\nhr,drop,5,2\n",
            "channel,direction,x,threshold\nhr,drop,5\n",
        ] {
            assert!(parse_thresholds_csv(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn detection_examples() {
        let t = reference_thresholds();
        let hr = episode("heart_rate", &[Some(100.0), Some(60.0)]);
        assert_eq!(
            detect_acute_events(
                &hr,
                &def("heart_rate", AcuteDirection::Drop, Percentile::P5),
                &t
            )
            .unwrap(),
            vec![1]
        );
        let cr = episode("creatinine", &[Some(1.0), Some(1.2)]);
        assert!(detect_acute_events(
            &cr,
            &def("creatinine", AcuteDirection::Rise, Percentile::P5),
            &t
        )
        .unwrap()
        .is_empty());
        let arrest = episode("heart_rate", &[Some(80.0), Some(0.0)]);
        assert_eq!(
            detect_acute_events(&arrest, &AcuityDefinition::CardiacArrest, &t).unwrap(),
            vec![1]
        );
        let flat_zero = episode("heart_rate", &[Some(0.0), Some(0.0)]);
        assert!(
            detect_acute_events(&flat_zero, &AcuityDefinition::CardiacArrest, &t)
                .unwrap()
                .is_empty()
        );
        assert!(
            detect_acute_events(&hr, &def("nope", AcuteDirection::Drop, Percentile::P5), &t)
                .is_err()
        );
    }

    #[test]
    fn definitions_enumerated() {
        let defs = all_definitions();
        assert_eq!(defs.len(), 25);
        assert_eq!(defs[0].label(), "heart_rate_drop_5");
        assert_eq!(defs[24].label(), "cardiac_arrest");
    }
}
