use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Survived,
    Died,
}

impl Outcome {
    /// Per-step training target: probability of survival.
    pub fn target(self) -> f64 {
        match self {
            Outcome::Survived => 1.0,
            Outcome::Died => 0.0,
        }
    }

    pub fn survived(self) -> bool {
        self == Outcome::Survived
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Survived => "survived",
            Outcome::Died => "died",
        }
    }
}

/// One ICU episode. Rows are observation times (minutes from admission),
/// columns are channels. `charted[r * n_channels + c]` is true where a value
/// was actually recorded; other entries are placeholders until imputed.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMatrix {
    pub patient_id: String,
    pub episode_id: String,
    pub channels: Vec<String>,
    pub times: Vec<f64>,
    pub values: Matrix,
    pub charted: Vec<bool>,
    pub outcome: Outcome,
    /// Rows at which the generator injected an acute severity jump.
    pub injected_events: Vec<usize>,
}

impl EpisodeMatrix {
    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn is_charted(&self, row: usize, channel: usize) -> bool {
        self.charted[row * self.channels.len() + channel]
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Minutes from admission to the last observation.
    pub fn duration_minutes(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::argument(format!("episode {}: {msg}", self.episode_id));
        let (rows, cols) = self.values.shape();
        if rows != self.times.len() || cols != self.channels.len() {
            return Err(ctx(format!(
                "values are {rows}x{cols} but there are {} times and {} channels",
                self.times.len(),
                self.channels.len()
            )));
        }
        if self.charted.len() != rows * cols {
            return Err(ctx(format!(
                "charted mask has {} entries, expected {}",
                self.charted.len(),
                rows * cols
            )));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(ctx("non-finite time".into()));
        }
        if let Some(w) = self.times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ctx(format!(
                "times not strictly increasing at row {}",
                w + 1
            )));
        }
        if !self.values.is_finite() {
            return Err(ctx("non-finite value".into()));
        }
        for r in 0..rows {
            if !self.charted[r * cols..(r + 1) * cols].iter().any(|&b| b) {
                return Err(ctx(format!("row {r} has no charted entry")));
            }
        }
        if let Some(&e) = self.injected_events.iter().find(|&&e| e >= rows) {
            return Err(ctx(format!("injected event row {e} out of range")));
        }
        Ok(())
    }
}
