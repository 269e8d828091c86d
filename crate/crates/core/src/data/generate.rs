//! Synthetic episode generator.
//!
//! Each episode carries a latent severity that mean-reverts towards an
//! admission level, diffuses, and jumps upward at Poisson-distributed
//! acute events. Channels are noisy affine readouts of severity, charted
//! sparsely on an irregular ~15 minute observation grid. Death is drawn
//! from a logistic function of peak severity.

use crate::data::episode::{EpisodeMatrix, Outcome};
use crate::data::schema::{default_schema, ChannelSchema};
use crate::error::{Error, Result};
use crate::kv::parse_key_values;
use crate::linalg::{sigmoid, Matrix};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub schema: Vec<ChannelSchema>,
    /// Mean gap between observation rows; gaps are uniform on [0.5, 1.5] of it.
    pub row_period_minutes: f64,
    pub median_hours: f64,
    pub hours_sigma: f64,
    pub min_hours: f64,
    pub max_hours: f64,
    pub jump_rate_per_day: f64,
    pub jump_mean: f64,
    /// Diffusion of severity per sqrt(hour).
    pub walk_sd: f64,
    pub reversion_per_hour: f64,
    pub admission_severity_sd: f64,
    pub max_severity: f64,
    /// Scales every channel's measurement noise and between-episode baseline spread.
    pub noise_scale: f64,
    pub mortality_intercept: f64,
    pub mortality_slope: f64,
    /// Fraction of deaths whose last row is a charted heart rate of zero.
    pub arrest_fraction: f64,
    pub max_episodes_per_patient: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            schema: default_schema(),
            row_period_minutes: 15.0,
            median_hours: 48.0,
            hours_sigma: 0.6,
            min_hours: 6.0,
            max_hours: 240.0,
            jump_rate_per_day: 0.5,
            jump_mean: 2.0,
            walk_sd: 0.2,
            reversion_per_hour: 0.04,
            admission_severity_sd: 1.0,
            max_severity: 8.0,
            noise_scale: 1.0,
            mortality_intercept: -8.0,
            mortality_slope: 1.1,
            arrest_fraction: 0.25,
            max_episodes_per_patient: 3,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("jump_rate_per_day", self.jump_rate_per_day),
            ("jump_mean", self.jump_mean),
            ("walk_sd", self.walk_sd),
            ("reversion_per_hour", self.reversion_per_hour),
            ("admission_severity_sd", self.admission_severity_sd),
            ("max_severity", self.max_severity),
            ("noise_scale", self.noise_scale),
            ("hours_sigma", self.hours_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::argument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        let positive = [
            ("row_period_minutes", self.row_period_minutes),
            ("median_hours", self.median_hours),
            ("min_hours", self.min_hours),
            ("max_hours", self.max_hours),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::argument(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.min_hours > self.max_hours {
            return Err(Error::argument("min_hours exceeds max_hours"));
        }
        if !(0.0..=1.0).contains(&self.arrest_fraction) {
            return Err(Error::argument("arrest_fraction must lie in [0, 1]"));
        }
        if self.max_episodes_per_patient == 0 {
            return Err(Error::argument("max_episodes_per_patient must be >= 1"));
        }
        if self.schema.is_empty() {
            return Err(Error::argument("schema has no channels"));
        }
        for ch in &self.schema {
            if !(ch.charting_period_mean > 0.0) {
                return Err(Error::argument(format!(
                    "{}: charting_period_mean must be > 0",
                    ch.name
                )));
            }
            if !(ch.noise_sd >= 0.0 && ch.baseline_sd >= 0.0) {
                return Err(Error::argument(format!("{}: negative spread", ch.name)));
            }
        }
        Ok(())
    }

    /// Applies `key = value` overrides on top of `self`.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for e in parse_key_values(text)? {
            match e.key.as_str() {
                "row_period_minutes" => self.row_period_minutes = e.as_f64()?,
                "median_hours" => self.median_hours = e.as_f64()?,
                "hours_sigma" => self.hours_sigma = e.as_f64()?,
                "min_hours" => self.min_hours = e.as_f64()?,
                "max_hours" => self.max_hours = e.as_f64()?,
                "jump_rate_per_day" => self.jump_rate_per_day = e.as_f64()?,
                "jump_mean" => self.jump_mean = e.as_f64()?,
                "walk_sd" => self.walk_sd = e.as_f64()?,
                "reversion_per_hour" => self.reversion_per_hour = e.as_f64()?,
                "admission_severity_sd" => self.admission_severity_sd = e.as_f64()?,
                "max_severity" => self.max_severity = e.as_f64()?,
                "noise_scale" => self.noise_scale = e.as_f64()?,
                "mortality_intercept" => self.mortality_intercept = e.as_f64()?,
                "mortality_slope" => self.mortality_slope = e.as_f64()?,
                "arrest_fraction" => self.arrest_fraction = e.as_f64()?,
                "max_episodes_per_patient" => self.max_episodes_per_patient = e.as_usize()?,
                _ => return Err(e.unknown()),
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = GeneratorConfig::default();
        cfg.apply_overrides(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generates `n_patients` patients with one to `max_episodes_per_patient`
/// episodes each. Patient `i` draws only from a generator derived from
/// `(rng seed, i)`, so patients are independent of each other.
pub fn generate_cohort(
    rng: &Rng,
    n_patients: usize,
    config: &GeneratorConfig,
) -> Result<Vec<EpisodeMatrix>> {
    if n_patients == 0 {
        return Err(Error::argument("n_patients must be >= 1"));
    }
    config.validate()?;
    let mut episodes = Vec::new();
    for p in 0..n_patients {
        let mut prng = Rng::derive(rng.seed(), p as u64);
        let n_episodes = 1 + prng.below(config.max_episodes_per_patient);
        let patient_id = format!("p{p:05}");
        for e in 0..n_episodes {
            let episode_id = format!("{patient_id}-e{e}");
            episodes.push(generate_episode(&mut prng, &patient_id, episode_id, config));
        }
    }
    Ok(episodes)
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

fn generate_episode(
    rng: &mut Rng,
    patient_id: &str,
    episode_id: String,
    cfg: &GeneratorConfig,
) -> EpisodeMatrix {
    let n_ch = cfg.schema.len();
    let hours = (cfg.median_hours.ln() + cfg.hours_sigma * rng.standard_normal())
        .exp()
        .clamp(cfg.min_hours, cfg.max_hours);
    let duration = hours * 60.0;

    let baselines: Vec<f64> = cfg
        .schema
        .iter()
        .map(|c| c.baseline_mean + cfg.noise_scale * c.baseline_sd * rng.standard_normal())
        .collect();
    let chart_prob: Vec<f64> = cfg
        .schema
        .iter()
        .map(|c| (cfg.row_period_minutes / c.charting_period_mean).min(1.0))
        .collect();

    let admission = (cfg.admission_severity_sd * rng.standard_normal()).abs();
    let mut severity = admission.min(cfg.max_severity);
    let mut peak = severity;

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut charted = Vec::new();
    let mut injected = Vec::new();
    let mut t = 0.0;
    let mut row = 0usize;
    let jump_rate_per_minute = cfg.jump_rate_per_day / 1440.0;

    loop {
        let mut jumped = false;
        if row > 0 {
            let gap = cfg.row_period_minutes * (0.5 + rng.next_f64());
            t += gap;
            if t > duration {
                break;
            }
            let dh = gap / 60.0;
            severity += cfg.reversion_per_hour * (admission - severity) * dh
                + cfg.walk_sd * dh.sqrt() * rng.standard_normal();
            let p_jump = 1.0 - (-jump_rate_per_minute * gap).exp();
            if rng.bernoulli(p_jump) {
                severity += cfg.jump_mean * (0.75 + 0.5 * rng.next_f64());
                jumped = true;
            }
            severity = severity.clamp(0.0, cfg.max_severity);
            peak = peak.max(severity);
        }

        let row_values: Vec<f64> = cfg
            .schema
            .iter()
            .zip(&baselines)
            .map(|(ch, base)| {
                let noise = cfg.noise_scale * ch.noise_sd * rng.standard_normal();
                let v = (base + ch.severity_coupling * severity + noise)
                    .clamp(ch.min_value, ch.max_value);
                round4(if ch.integer { v.round() } else { v })
            })
            .collect();
        // admission and acute-event rows get a full work-up
        let full = row == 0 || jumped;
        let mut row_charted: Vec<bool> = chart_prob
            .iter()
            .map(|&p| full || rng.bernoulli(p))
            .collect();
        if !row_charted.iter().any(|&b| b) {
            // every row is an observation of something: chart the most
            // frequently charted channel
            let c = (0..n_ch)
                .min_by(|&a, &b| {
                    cfg.schema[a]
                        .charting_period_mean
                        .total_cmp(&cfg.schema[b].charting_period_mean)
                })
                .unwrap_or(0);
            row_charted[c] = true;
        }
        for (v, &ok) in row_values.iter().zip(&row_charted) {
            values.push(if ok { *v } else { 0.0 });
        }
        charted.extend(row_charted);
        if jumped {
            injected.push(row);
        }
        times.push((t * 100.0_f64).round() / 100.0);
        row += 1;
    }

    let p_death = sigmoid(cfg.mortality_intercept + cfg.mortality_slope * peak);
    let outcome = if rng.bernoulli(p_death) {
        Outcome::Died
    } else {
        Outcome::Survived
    };

    if outcome == Outcome::Died && rng.bernoulli(cfg.arrest_fraction) {
        if let Some(hr) = cfg.schema.iter().position(|c| c.name == "heart_rate") {
            let last = *times.last().unwrap_or(&0.0);
            times.push(((last + cfg.row_period_minutes) * 100.0_f64).round() / 100.0);
            for c in 0..n_ch {
                charted.push(c == hr);
                values.push(0.0);
            }
        }
    }

    let n_rows = times.len();
    EpisodeMatrix {
        patient_id: patient_id.to_string(),
        episode_id,
        channels: cfg.schema.iter().map(|c| c.name.clone()).collect(),
        times,
        values: Matrix::from_vec(n_rows, n_ch, values).expect("row-major values"),
        charted,
        outcome,
        injected_events: injected,
    }
}
