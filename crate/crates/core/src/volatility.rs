//! Local-volatility functions `σ(s)` of the discounted spot, with declared
//! bounds that are enforced on every evaluation.
//!
//! The grid spacing of the tree is `sigma_max·√h`, so an understated upper
//! bound would silently corrupt every probability. Bounds are therefore
//! checked each time the model is evaluated, and a violation is an error.
//! Lipschitz continuity of `ψ(z) = σ(e^z)` is the caller's obligation for
//! custom models; it is not checked.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type SigmaFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct VolatilityModel {
    sigma: Arc<SigmaFn>,
    sigma_min: f64,
    sigma_max: f64,
    description: String,
}

impl fmt::Debug for VolatilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VolatilityModel")
            .field("description", &self.description)
            .field("sigma_min", &self.sigma_min)
            .field("sigma_max", &self.sigma_max)
            .finish()
    }
}

impl VolatilityModel {
    /// A user-supplied model. `sigma` must stay within `[sigma_min, sigma_max]`
    /// wherever it is evaluated; violations surface as [`Error::BoundViolation`].
    pub fn custom<F>(sigma: F, sigma_min: f64, sigma_max: f64, description: impl Into<String>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(sigma_min > 0.0) || !sigma_max.is_finite() || sigma_min > sigma_max {
            return invalid(format!(
                "volatility bounds must satisfy 0 < min <= max < inf, got [{sigma_min}, {sigma_max}]"
            ));
        }
        Ok(Self {
            sigma: Arc::new(sigma),
            sigma_min,
            sigma_max,
            description: description.into(),
        })
    }

    /// `σ(s) = min(0.5, max(0.05, √s / 30))`.
    pub fn truncated_cev() -> Self {
        Self {
            sigma: Arc::new(|s: f64| (s.sqrt() / 30.0).clamp(0.05, 0.5)),
            sigma_min: 0.05,
            sigma_max: 0.5,
            description: "truncated CEV: min(0.5, max(0.05, sqrt(s)/30))".into(),
        }
    }

    pub fn constant(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return invalid(format!("constant volatility must be positive and finite, got {sigma}"));
        }
        Ok(Self {
            sigma: Arc::new(move |_| sigma),
            sigma_min: sigma,
            sigma_max: sigma,
            description: format!("constant {sigma}"),
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// The uniform upper bound `σ̄`; sets the grid spacing.
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Volatility at discounted spot `s`, bound-checked.
    pub fn sigma(&self, s: f64) -> Result<f64> {
        self.checked((self.sigma)(s), || s.ln())
    }

    /// Log-space volatility `ψ(z) = σ(e^z)`, bound-checked.
    pub fn psi(&self, z: f64) -> Result<f64> {
        self.checked((self.sigma)(z.exp()), || z)
    }

    fn checked(&self, value: f64, z: impl FnOnce() -> f64) -> Result<f64> {
        if value >= self.sigma_min && value <= self.sigma_max {
            Ok(value)
        } else {
            Err(Error::BoundViolation {
                z: z(),
                value,
                min: self.sigma_min,
                max: self.sigma_max,
            })
        }
    }
}

/// Config-level description of a built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    TruncatedCev,
    Constant { sigma: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<VolatilityModel> {
        match *self {
            ModelSpec::TruncatedCev => Ok(VolatilityModel::truncated_cev()),
            ModelSpec::Constant { sigma } => VolatilityModel::constant(sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cev_at_the_money() {
        let m = VolatilityModel::truncated_cev();
        assert_relative_eq!(m.psi(100f64.ln()).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cev_clips() {
        let m = VolatilityModel::truncated_cev();
        assert_eq!(m.psi(900f64.ln()).unwrap(), 0.5);
        assert_eq!(m.sigma(225.0).unwrap(), 0.5);
        assert_eq!(m.sigma(2.25).unwrap(), 0.05);
        assert_eq!(m.sigma(1e-6).unwrap(), 0.05);
    }

    #[test]
    fn cev_at_80() {
        // sqrt(80)/30 to 40 digits: 0.29814239699997195952...
        let m = VolatilityModel::truncated_cev();
        assert_relative_eq!(m.sigma(80.0).unwrap(), 0.298_142_396_999_971_96, max_relative = 1e-15);
    }

    #[test]
    fn constant_model() {
        let m = VolatilityModel::constant(0.3).unwrap();
        assert_eq!(m.sigma(1e6).unwrap(), 0.3);
        assert_eq!(m.psi(-40.0).unwrap(), 0.3);
        assert_eq!(m.sigma_max(), 0.3);
        assert_eq!(m.sigma_min(), 0.3);
    }

    #[test]
    fn constant_rejects_non_positive() {
        assert!(VolatilityModel::constant(0.0).unwrap_err().is_validation());
        assert!(VolatilityModel::constant(-0.1).is_err());
        assert!(VolatilityModel::constant(f64::NAN).is_err());
    }

    #[test]
    fn custom_bound_violation_carries_location() {
        let m = VolatilityModel::custom(|s| s / 100.0, 0.1, 0.5, "linear").unwrap();
        assert_eq!(m.sigma(30.0).unwrap(), 0.3);
        match m.psi(80f64.ln()) {
            Err(Error::BoundViolation { z, value, .. }) => {
                assert!((z - 80f64.ln()).abs() < 1e-15);
                assert!((value - 0.8).abs() < 1e-12);
            }
            other => panic!("expected bound violation, got {other:?}"),
        }
        assert!(m.sigma(1.0).is_err());
    }

    #[test]
    fn custom_rejects_bad_bounds() {
        assert!(VolatilityModel::custom(|_| 0.2, 0.0, 0.5, "x").is_err());
        assert!(VolatilityModel::custom(|_| 0.2, 0.3, 0.2, "x").is_err());
        assert!(VolatilityModel::custom(|_| 0.2, 0.1, f64::INFINITY, "x").is_err());
    }

    #[test]
    fn model_spec_builds() {
        let m = ModelSpec::Constant { sigma: 0.3 }.build().unwrap();
        assert_eq!(m.sigma_max(), 0.3);
        assert!(ModelSpec::Constant { sigma: 0.0 }.build().is_err());
        assert_eq!(ModelSpec::TruncatedCev.build().unwrap().sigma_max(), 0.5);
    }

    proptest! {
        #[test]
        fn cev_within_bounds(s in 1e-9f64..1e6) {
            let v = VolatilityModel::truncated_cev().sigma(s).unwrap();
            prop_assert!((0.05..=0.5).contains(&v));
        }

        #[test]
        fn psi_matches_sigma(s in 1e-6f64..1e6) {
            let m = VolatilityModel::truncated_cev();
            let a = m.psi(s.ln()).unwrap();
            let b = m.sigma(s).unwrap();
            // exp(ln s) can differ from s by an ulp or two
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }

        #[test]
        fn cev_monotone_between_clips(a in 2.25f64..225.0, b in 2.25f64..225.0) {
            let m = VolatilityModel::truncated_cev();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.sigma(lo).unwrap() <= m.sigma(hi).unwrap());
        }
    }
}
