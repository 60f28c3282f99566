//! Run configuration: one JSON document, optionally overridden by flags.

use std::path::Path;

use gamelattice::mc::{Mode, Monitoring};
use gamelattice::{ModelSpec, PayoffSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Every field has a default, so `{}` is a valid config; commands that need a
/// payoff reject a config without one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub payoff: Option<PayoffSpec>,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Initial spots for `converge`; defaults to `[s0]`.
    #[serde(default)]
    pub s0_list: Option<Vec<f64>>,
    /// Step counts for `converge`; defaults to `[n]`.
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo path count.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Euler step; defaults to `h/400` for `verify-embedding` and `T/n`
    /// for `mc-value`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Embedding time step for `verify-embedding`.
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub monitoring: Monitoring,
    /// Stop-flag tolerance, scaled by `1 + s0`.
    #[serde(default = "default_tolerance")]
    pub stop_tolerance: f64,
    /// Write the full value surface as `surface.csv` (`price`, `region`).
    #[serde(default)]
    pub keep_surface: bool,
    /// Write grid spots and probabilities as `lattice.csv` (`price`, `region`).
    #[serde(default)]
    pub dump_lattice: bool,
}

fn default_model() -> ModelSpec {
    ModelSpec::TruncatedCev
}

fn default_s0() -> f64 {
    100.0
}

fn default_n() -> usize {
    400
}

fn default_m() -> usize {
    100_000
}

fn default_h() -> f64 {
    0.01
}

fn default_tolerance() -> f64 {
    1e-9
}

impl RunConfig {
    /// Parse `source` as inline JSON if it starts with `{`, else as a path.
    /// `None` gives the all-default config.
    pub fn load(source: Option<&str>) -> Result<Self, CliError> {
        let text = match source {
            None => "{}".to_string(),
            Some(s) if s.trim_start().starts_with('{') => s.to_string(),
            Some(path) => std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?,
        };
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    /// Reject values that are out of range for any command.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return bad(format!("s0 must be positive, got {}", self.s0));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.stop_tolerance > 0.0) || !self.stop_tolerance.is_finite() {
            return bad(format!("stop_tolerance must be positive, got {}", self.stop_tolerance));
        }
        if let Some(list) = &self.s0_list {
            if list.is_empty() || list.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return bad("s0_list must be a nonempty list of positive spots".into());
            }
        }
        if let Some(list) = &self.n_list {
            if list.is_empty() || list.contains(&0) || list.windows(2).any(|w| w[0] >= w[1]) {
                return bad("n_list must be a nonempty, strictly ascending list of positive integers".into());
            }
        }
        if let Some(p) = &self.payoff {
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.model.build().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn payoff(&self) -> Result<&PayoffSpec, CliError> {
        self.payoff
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a \"payoff\" in the config".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_defaults() {
        let c = RunConfig::load(None).unwrap();
        assert_eq!(c.model, ModelSpec::TruncatedCev);
        assert_eq!(c.s0, 100.0);
        assert_eq!(c.n, 400);
        assert_eq!(c.m, 100_000);
        assert!(c.payoff.is_none());
        c.validate().unwrap();
        assert!(c.payoff().is_err());
    }

    #[test]
    fn inline_config_parses() {
        let c = RunConfig::load(Some(
            r#"{"model":{"kind":"constant","sigma":0.2},
                "payoff":{"kind":"game_put","strike":100,"penalty":5,"rate":0.05,"maturity":1},
                "s0":95,"n":50,"mode":"buyer_only"}"#,
        ))
        .unwrap();
        assert_eq!(c.model, ModelSpec::Constant { sigma: 0.2 });
        assert_eq!(c.payoff().unwrap().penalty, Some(5.0));
        assert_eq!(c.mode, Mode::BuyerOnly);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(Some(r#"{"s0":100,"strik":3}"#)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = RunConfig::load(Some(
            r#"{"payoff":{"kind":"game_call","strike":1,"rate":0,"maturity":1,"x":1}}"#,
        ))
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"s0":-1}"#,
            r#"{"n":0}"#,
            r#"{"m":0}"#,
            r#"{"dt":0}"#,
            r#"{"n_list":[10,5]}"#,
            r#"{"s0_list":[]}"#,
            r#"{"model":{"kind":"constant","sigma":-0.2}}"#,
            r#"{"payoff":{"kind":"game_call","strike":-100,"penalty":1,"rate":0,"maturity":1}}"#,
        ] {
            let c = RunConfig::load(Some(text)).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }
}
