use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the outcome and propensity losses are weighted against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `L_y + L_t`
    #[default]
    Unit,
    /// `alpha * L_y + (1 - alpha) * L_t`
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Weight of the squared-weight penalty.
    pub l2_lambda1: f64,
    /// Weight of the orthogonality loss plus its sum-to-one regulariser.
    pub ortho_lambda2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    pub lambda0: f64,
    pub gamma: u32,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            lr: 1e-4,
            l2_lambda1: 1e-4,
            ortho_lambda2: 0.01,
            max_epochs: 1000,
            patience: 50,
            val_fraction: 0.30,
            alpha_mode: AlphaMode::Unit,
            alpha: 0.5,
            lambda0: 1.0,
            gamma: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.gamma == 0 {
            return bad("gamma must be at least 1".into());
        }
        if !(self.lambda0 >= 0.0) || !(self.l2_lambda1 >= 0.0) || !(self.ortho_lambda2 >= 0.0) {
            return bad("lambda0, l2_lambda1 and ortho_lambda2 must be non-negative".into());
        }
        if self.alpha_mode == AlphaMode::Alpha && !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    /// Coefficients on (outcome loss, propensity loss).
    pub fn supervised_weights(&self) -> (f64, f64) {
        match self.alpha_mode {
            AlphaMode::Unit => (1.0, 1.0),
            AlphaMode::Alpha => (self.alpha, 1.0 - self.alpha),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batch_size, 100);
        assert_eq!(c.lr, 1e-4);
        assert_eq!(c.patience, 50);
        assert_eq!(c.max_epochs, 1000);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            TrainConfig { val_fraction: 1.0, ..TrainConfig::default() },
            TrainConfig { gamma: 0, ..TrainConfig::default() },
            TrainConfig { alpha_mode: AlphaMode::Alpha, alpha: 1.0, ..TrainConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c: TrainConfig = toml::from_str("lambda0 = 1.7\nalpha_mode = \"alpha\"\nalpha = 0.2").unwrap();
        assert_eq!(c.lambda0, 1.7);
        assert_eq!(c.supervised_weights(), (0.2, 0.8));
        assert_eq!(c.batch_size, 100);
    }
}
