use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcuteDirection {
    Drop,
    Rise,
    None,
}

impl AcuteDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            AcuteDirection::Drop => "drop",
            AcuteDirection::Rise => "rise",
            AcuteDirection::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "drop" => Some(AcuteDirection::Drop),
            "rise" => Some(AcuteDirection::Rise),
            "none" => Some(AcuteDirection::None),
            _ => None,
        }
    }
}

/// One generated variable. Values follow
/// `baseline + severity_coupling * severity + noise`, clamped to
/// `[min_value, max_value]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSchema {
    pub name: String,
    pub baseline_mean: f64,
    /// Between-episode spread of the baseline.
    pub baseline_sd: f64,
    pub severity_coupling: f64,
    pub acute_direction: AcuteDirection,
    pub charting_period_mean: f64,
    pub noise_sd: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub integer: bool,
}

/// The eight channels monitored for acute events, in report order.
pub const ACUITY_CHANNELS: [(&str, AcuteDirection); 8] = [
    ("heart_rate", AcuteDirection::Drop),
    ("mean_arterial_pressure", AcuteDirection::Drop),
    ("glasgow_coma_score", AcuteDirection::Drop),
    ("pulse_oximetry", AcuteDirection::Drop),
    ("abg_ph", AcuteDirection::Drop),
    ("vbg_ph", AcuteDirection::Drop),
    ("inotrope_score", AcuteDirection::Rise),
    ("creatinine", AcuteDirection::Rise),
];

#[allow(clippy::too_many_arguments)]
fn channel(
    name: &str,
    baseline_mean: f64,
    baseline_sd: f64,
    severity_coupling: f64,
    acute_direction: AcuteDirection,
    charting_period_mean: f64,
    noise_sd: f64,
    bounds: (f64, f64),
    integer: bool,
) -> ChannelSchema {
    ChannelSchema {
        name: name.to_string(),
        baseline_mean,
        baseline_sd,
        severity_coupling,
        acute_direction,
        charting_period_mean,
        noise_sd,
        min_value: bounds.0,
        max_value: bounds.1,
        integer,
    }
}

/// Eight acuity channels with pediatric-ICU-flavoured units. Vitals are
/// charted about every 15 minutes, labs every few hours.
pub fn default_schema() -> Vec<ChannelSchema> {
    use AcuteDirection::*;
    vec![
        channel(
            "heart_rate",
            110.0,
            12.0,
            -12.0,
            Drop,
            15.0,
            3.0,
            (20.0, 220.0),
            false,
        ),
        channel(
            "mean_arterial_pressure",
            70.0,
            8.0,
            -8.0,
            Drop,
            15.0,
            2.5,
            (20.0, 140.0),
            false,
        ),
        channel(
            "glasgow_coma_score",
            13.5,
            1.0,
            -2.0,
            Drop,
            60.0,
            0.4,
            (3.0, 15.0),
            true,
        ),
        channel(
            "pulse_oximetry",
            97.0,
            1.2,
            -2.5,
            Drop,
            15.0,
            0.7,
            (50.0, 100.0),
            false,
        ),
        channel(
            "abg_ph",
            7.38,
            0.03,
            -0.05,
            Drop,
            240.0,
            0.012,
            (6.6, 7.7),
            false,
        ),
        channel(
            "vbg_ph",
            7.35,
            0.03,
            -0.045,
            Drop,
            240.0,
            0.012,
            (6.6, 7.7),
            false,
        ),
        channel(
            "inotrope_score",
            4.0,
            1.5,
            6.0,
            Rise,
            60.0,
            0.4,
            (0.5, 200.0),
            false,
        ),
        channel(
            "creatinine",
            0.5,
            0.12,
            0.25,
            Rise,
            480.0,
            0.02,
            (0.1, 10.0),
            false,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_covers_acuity_channels() {
        let schema = default_schema();
        for (name, dir) in ACUITY_CHANNELS {
            let ch = schema.iter().find(|c| c.name == name).expect(name);
            assert_eq!(ch.acute_direction, dir);
            assert!(ch.charting_period_mean > 0.0);
            // rise channels rise with severity, drop channels fall
            match dir {
                AcuteDirection::Drop => assert!(ch.severity_coupling < 0.0),
                AcuteDirection::Rise => assert!(ch.severity_coupling > 0.0),
                AcuteDirection::None => unreachable!(),
            }
        }
    }
}
