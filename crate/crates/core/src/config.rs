use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training and prediction parameters.
///
/// `n_imp` is the impurity budget: how many points of the opposite label a
/// main-loop ellipsoid may contain when it is created. The remaining fields
/// are numerical tolerances and bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub n_imp: usize,
    /// Relative optimality target for minimum-volume ellipsoid fits.
    pub tol_fit: f64,
    /// Duality-gap target for the reduced-convex-hull QP.
    pub tol_qp: f64,
    /// Slack allowed in `‖Ax + b‖ <= 1` membership tests.
    pub tol_membership: f64,
    /// Predictions with `|posterior - 0.5| < abstain_band` abstain.
    pub abstain_band: f64,
    /// Half-width of the uniform jitter applied to constant features,
    /// as a fraction of `max(1, |value|)`.
    pub jitter_radius_frac: f64,
    pub seed: u64,
    /// Number of cross-validation folds; values below 2 select a single
    /// stratified split with `test_fraction`.
    pub folds: usize,
    pub test_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            n_imp: 0,
            tol_fit: 1e-7,
            tol_qp: 1e-9,
            tol_membership: 1e-9,
            abstain_band: 0.05,
            jitter_radius_frac: 0.01,
            seed: 0,
            folds: 0,
            test_fraction: 0.2,
        }
    }
}

impl Config {
    pub fn with_n_imp(mut self, n_imp: usize) -> Self {
        self.n_imp = n_imp;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_fit", self.tol_fit),
            ("tol_qp", self.tol_qp),
            ("tol_membership", self.tol_membership),
            ("jitter_radius_frac", self.jitter_radius_frac),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {value}")));
            }
        }
        if !(0.0..0.5).contains(&self.abstain_band) {
            return Err(Error::InvalidParam(format!(
                "abstain_band must lie in [0, 0.5), got {}",
                self.abstain_band
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParam(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}
