use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    UniformRandom,
    RandomNoisy,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Socod,
    Mlsocod,
    Sampling,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Socod => "socod",
            Method::Mlsocod => "mlsocod",
            Method::Sampling => "sampling",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_r() -> f64 {
    1.0
}

fn default_zeta() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub d_x: usize,
    pub d_y: usize,
    /// Stream length.
    pub n: usize,
    /// Window length.
    #[serde(rename = "N")]
    pub n_window: u64,
    pub eps_grid: Vec<f64>,
    /// Squared-norm bound for the layered sketch.
    #[serde(rename = "R", default = "default_r")]
    pub r_bound: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub signal_dim: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Evaluate every `query_stride`-th timestamp; 0 or absent means `N / 10`.
    #[serde(default)]
    pub query_stride: u64,
}

impl ExperimentConfig {
    /// Uniform Random at desk scale.
    pub fn desk_uniform() -> Self {
        Self {
            generator: Generator::UniformRandom,
            d_x: 200,
            d_y: 100,
            n: 4000,
            n_window: 1000,
            eps_grid: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
            r_bound: 1.0,
            zeta: default_zeta(),
            signal_dim: 0,
            seed: 1,
            methods: vec![Method::Socod, Method::Sampling],
            query_stride: 0,
        }
    }

    /// Random Noisy at desk scale.
    pub fn desk_noisy() -> Self {
        Self {
            generator: Generator::RandomNoisy,
            signal_dim: 40,
            zeta: 100.0,
            ..Self::desk_uniform()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn stride(&self) -> u64 {
        if self.query_stride > 0 {
            self.query_stride
        } else {
            (self.n_window / 10).max(1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d_x == 0 || self.d_y == 0 {
            return bad("d_x and d_y must be positive".into());
        }
        if self.n_window == 0 || self.n_window > self.n as u64 {
            return bad(format!("need 1 <= N <= n, got N = {} and n = {}", self.n_window, self.n));
        }
        if self.eps_grid.is_empty() {
            return bad("eps_grid is empty".into());
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return bad(format!("eps {e} outside (0, 1]"));
        }
        if !(self.r_bound.is_finite() && self.r_bound >= 1.0) {
            return bad(format!("R must be at least 1, got {}", self.r_bound));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.generator == Generator::RandomNoisy {
            if !(self.zeta.is_finite() && self.zeta > 0.0) {
                return bad(format!("zeta must be positive, got {}", self.zeta));
            }
            if self.signal_dim == 0 || self.signal_dim > self.d_x.min(self.d_y) {
                return bad(format!(
                    "signal_dim must lie in [1, {}], got {}",
                    self.d_x.min(self.d_y),
                    self.signal_dim
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_uses_short_field_names() {
        let cfg = ExperimentConfig::desk_noisy();
        let json = cfg.to_json();
        for key in ["\"N\"", "\"R\"", "\"eps_grid\"", "\"random_noisy\"", "\"query_stride\""] {
            assert!(json.contains(key), "{key} missing from {json}");
        }
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn defaults_and_validation() {
        let text = r#"{"generator":"uniform_random","d_x":4,"d_y":3,"n":50,"N":20,
            "eps_grid":[0.5],"seed":3,"methods":["socod","oracle"]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.stride(), 2);
        assert_eq!(cfg.r_bound, 1.0);

        let too_long = text.replace("\"N\":20", "\"N\":60");
        assert!(matches!(ExperimentConfig::from_json(&too_long), Err(Error::Config(_))));
        let bad_eps = text.replace("[0.5]", "[0.0]");
        assert!(ExperimentConfig::from_json(&bad_eps).is_err());
        let unknown = text.replace("\"seed\"", "\"sead\"");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let noisy = text.replace("uniform_random", "random_noisy");
        assert!(ExperimentConfig::from_json(&noisy).is_err());
    }
}
