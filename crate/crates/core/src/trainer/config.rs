use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv::parse_key_values;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub l2: f64,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub layers: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 32,
            learning_rate: 1e-5,
            rho: 0.9,
            epsilon: 1e-7,
            l2: 1e-4,
            dropout: 0.2,
            recurrent_dropout: 0.2,
            max_epochs: 30,
            seed: 1,
            layers: vec![128, 256, 128],
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be >= 1"));
        }
        let unit = [
            ("learning_rate", self.learning_rate),
            ("rho", self.rho),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::argument(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.l2) {
            return Err(Error::argument(format!(
                "l2 must lie in [0, 1], got {}",
                self.l2
            )));
        }
        for (name, v) in [
            ("dropout", self.dropout),
            ("recurrent_dropout", self.recurrent_dropout),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::argument(format!(
                    "{name} must lie in [0, 1), got {v}"
                )));
            }
        }
        if self.layers.is_empty() || self.layers.contains(&0) {
            return Err(Error::argument(format!(
                "invalid layer sizes {:?}",
                self.layers
            )));
        }
        Ok(())
    }

    /// Applies `key = value` lines; unknown keys are errors.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for e in parse_key_values(text)? {
            match e.key.as_str() {
                "batch_size" => self.batch_size = e.as_usize()?,
                "learning_rate" => self.learning_rate = e.as_f64()?,
                "rho" => self.rho = e.as_f64()?,
                "epsilon" => self.epsilon = e.as_f64()?,
                "l2" => self.l2 = e.as_f64()?,
                "dropout" => self.dropout = e.as_f64()?,
                "recurrent_dropout" => self.recurrent_dropout = e.as_f64()?,
                "max_epochs" => self.max_epochs = e.as_usize()?,
                "seed" => self.seed = e.as_u64()?,
                "layers" => self.layers = e.as_usize_list()?,
                _ => return Err(e.unknown()),
            }
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = TrainingConfig::default();
        c.apply_overrides(text)?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_table() {
        let c = TrainingConfig::default();
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.learning_rate, 1e-5);
        assert_eq!(c.l2, 1e-4);
        assert_eq!((c.dropout, c.recurrent_dropout), (0.2, 0.2));
        assert_eq!(c.layers, vec![128, 256, 128]);
        c.validate().unwrap();
    }

    #[test]
    fn overrides() {
        let c = TrainingConfig::from_text("# small\nlayers = 8, 8\nlearning_rate=0.01\nseed=9\n")
            .unwrap();
        assert_eq!(c.layers, vec![8, 8]);
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.seed, 9);
        assert!(TrainingConfig::from_text("momentum = 0.9").is_err());
        assert!(TrainingConfig::from_text("dropout = 1.0").is_err());
        assert!(TrainingConfig::from_text("batch_size = 0").is_err());
        assert!(TrainingConfig::from_text("learning_rate = -1").is_err());
    }
}
