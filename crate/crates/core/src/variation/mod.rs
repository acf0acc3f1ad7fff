//! Process-variation maps over the DRAM floorplan and victim/target bank
//! classification.
//!
//! A map is a sample of a zero-mean Gaussian field: a spatially correlated
//! (systematic) part whose covariance follows the spherical correlation
//! function, plus independent per-cell (random) noise. Each `(rank, bank)`
//! owns a rectangular region of the grid; banks whose mean absolute
//! deviation is largest become victims and receive a derated tRAS.

mod classify;
mod field;
mod floorplan;
mod map;

pub use classify::{classify_banks, derate_timing, BankPair, DerateParams, VariationMatrix};
pub use field::{cell_distance, generate_variation_map, FieldSampler, MAX_FIELD_CELLS};
pub use floorplan::{Floorplan, Region};
pub use map::VariationMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Statistical description of within-die variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationParams {
    /// Nominal parameter value (1.0 = nominal).
    pub mean: f64,
    /// Ratio sigma / mu of the total within-die variation.
    pub sigma_over_mean: f64,
    /// Share of the variance that is spatially correlated.
    pub systematic_fraction: f64,
    /// Correlation range, in units of the chip edge (edge = 1.0).
    pub phi: f64,
    pub seed: u64,
}

impl Default for VariationParams {
    fn default() -> Self {
        Self {
            mean: 1.0,
            sigma_over_mean: 0.09,
            systematic_fraction: 0.5,
            phi: 0.3,
            seed: 42,
        }
    }
}

impl VariationParams {
    /// A zero `sigma_over_mean` is accepted and yields an all-zero map.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return bad(format!("mean must be positive, got {}", self.mean));
        }
        if !(self.sigma_over_mean.is_finite() && self.sigma_over_mean >= 0.0) {
            return bad(format!("sigma_over_mean must be >= 0, got {}", self.sigma_over_mean));
        }
        if !(0.0..=1.0).contains(&self.systematic_fraction) {
            return bad(format!(
                "systematic_fraction must lie in [0, 1], got {}",
                self.systematic_fraction
            ));
        }
        if !(self.phi > 0.0 && self.phi <= 1.0) {
            return bad(format!("phi must lie in (0, 1], got {}", self.phi));
        }
        Ok(())
    }

    /// Map values are deviations in multiples of the mean, so the total
    /// standard deviation of a cell is `sigma_over_mean`.
    fn sigma_rel(&self) -> f64 {
        self.sigma_over_mean
    }

    pub fn systematic_sigma(&self) -> f64 {
        self.sigma_rel() * self.systematic_fraction.sqrt()
    }

    pub fn random_sigma(&self) -> f64 {
        self.sigma_rel() * (1.0 - self.systematic_fraction).sqrt()
    }
}

/// Spherical correlation between two points `d` apart for range `phi`:
/// `1 - 3d/(2 phi) + d^3/(2 phi^3)` for `d <= phi`, zero beyond.
pub fn spherical_correlation(d: f64, phi: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be >= 0, got {d}")));
    }
    if !(phi > 0.0) {
        return Err(Error::InvalidParameter(format!("phi must be > 0, got {phi}")));
    }
    Ok(spherical(d, phi))
}

#[inline]
pub(crate) fn spherical(d: f64, phi: f64) -> f64 {
    if d <= phi {
        let r = d / phi;
        1.0 - 1.5 * r + 0.5 * r * r * r
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_examples() {
        assert_eq!(spherical_correlation(0.0, 0.3).unwrap(), 1.0);
        assert!(spherical_correlation(0.3, 0.3).unwrap().abs() < 1e-15);
        assert!((spherical_correlation(0.15, 0.3).unwrap() - 0.3125).abs() < 1e-15);
        assert_eq!(spherical_correlation(0.5, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn correlation_rejects_bad_inputs() {
        assert!(spherical_correlation(-0.1, 0.3).is_err());
        assert!(spherical_correlation(0.1, 0.0).is_err());
        assert!(spherical_correlation(f64::NAN, 0.3).is_err());
    }

    #[test]
    fn params_validation() {
        VariationParams::default().validate().unwrap();
        let p = VariationParams {
            systematic_fraction: 1.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = VariationParams {
            phi: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
