use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npt::Method;
use crate::shapes::StateFilter;

/// Regression windows for the width laws, as inclusive λ ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWindows {
    /// Upper end of the small-λ (erfc) window; its lower end is λ > 0.
    pub small_max: f64,
    pub linear: [f64; 2],
    /// `⟨N_p⟩/λ` against `√ln λ`.
    pub large: [f64; 2],
}

impl Default for FitWindows {
    fn default() -> Self {
        Self {
            small_max: 2.0,
            linear: [9.0, 30.0],
            large: [50.0, 500.0],
        }
    }
}

/// Monte Carlo sizes for the distribution study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistConfig {
    pub x_samples: usize,
    pub h_trials: usize,
    /// Bandwidths of the standard matrices; `m = max(5, 4b)`.
    pub h_bandwidths: Vec<usize>,
    /// Tail window for the Gaussian fit of `h(t)`, as CDF quantiles.
    pub h_tail_quantiles: [f64; 2],
    pub ladder_lambdas: Vec<f64>,
    /// Regions sampled for the block-estimate error histogram.
    pub error_samples: usize,
    pub error_lambda: f64,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self {
            x_samples: 200_000,
            h_trials: 100_000,
            h_bandwidths: vec![1, 8],
            h_tail_quantiles: [0.7, 0.999],
            ladder_lambdas: vec![10.0, 50.0, 200.0, 500.0],
            error_samples: 200,
            error_lambda: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub b: usize,
    pub lambda_grid: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Random subset size per realization drawn from the filtered states.
    #[serde(default = "default_cap")]
    pub states_per_realization: usize,
    #[serde(default)]
    pub state_filter: StateFilter,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub fit: FitWindows,
    #[serde(default)]
    pub dist: DistConfig,
}

fn default_cap() -> usize {
    100
}

fn default_method() -> Method {
    Method::Iterative
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl SweepConfig {
    pub fn new(n: usize, b: usize, lambda_grid: Vec<f64>, realizations: usize, master_seed: u64) -> Self {
        Self {
            n,
            b,
            lambda_grid,
            realizations,
            master_seed,
            states_per_realization: default_cap(),
            state_filter: StateFilter::default(),
            method: default_method(),
            output_dir: default_output_dir(),
            fit: FitWindows::default(),
            dist: DistConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.b < 1 || self.b >= self.n {
            return bad(format!("b = {} must satisfy 1 <= b < n = {}", self.b, self.n));
        }
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid is empty".into());
        }
        if self.lambda_grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return bad("lambda_grid entries must be finite and non-negative".into());
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("lambda_grid must be strictly increasing".into());
        }
        if self.realizations < 1 {
            return bad("realizations must be at least 1".into());
        }
        if self.states_per_realization < 1 {
            return bad("states_per_realization must be at least 1".into());
        }
        if self.method == Method::Recursion && self.b != 1 {
            return bad("the recursion method needs b = 1".into());
        }
        if self.dist.h_bandwidths.iter().any(|&b| b == 0) {
            return bad("dist.h_bandwidths entries must be positive".into());
        }
        let [q0, q1] = self.dist.h_tail_quantiles;
        if !(0.0..1.0).contains(&q0) || !(q0 < q1 && q1 <= 1.0) {
            return bad("dist.h_tail_quantiles must satisfy 0 <= lo < hi <= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n = 100\nb = 2\nlambda_grid = [0.5, 1.0]\nrealizations = 3\nmaster_seed = 9\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = SweepConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.states_per_realization, 100);
        assert_eq!(c.method, Method::Iterative);
        assert_eq!(c.state_filter, StateFilter::MiddleHalf);
        assert_eq!(c.fit, FitWindows::default());
        assert_eq!(SweepConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn filters_and_sections_parse() {
        let text = format!(
            "{MINIMAL}state_filter = {{ range = {{ start = 10, end = 20 }} }}\nmethod = \"oracle\"\n[fit]\nsmall_max = 1.5\n[dist]\nx_samples = 10\n"
        );
        let c = SweepConfig::from_toml(&text).unwrap();
        assert_eq!(c.state_filter, StateFilter::Range { start: 10, end: 20 });
        assert_eq!(c.fit.small_max, 1.5);
        assert_eq!(c.fit.linear, [9.0, 30.0]);
        assert_eq!(c.dist.x_samples, 10);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            format!("{MINIMAL}bogus = 1\n"),
            MINIMAL.replace("[0.5, 1.0]", "[1.0, 0.5]"),
            MINIMAL.replace("[0.5, 1.0]", "[1.0, 1.0]"),
            MINIMAL.replace("realizations = 3", "realizations = 0"),
            MINIMAL.replace("b = 2", "b = 100"),
            format!("{MINIMAL}method = \"recursion\"\n"),
            format!("{MINIMAL}[fit]\nwide = 3\n"),
        ] {
            assert!(SweepConfig::from_toml(&bad).is_err(), "{bad}");
        }
    }
}
