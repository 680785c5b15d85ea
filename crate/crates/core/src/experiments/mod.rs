//! Seeded Monte-Carlo harness.
//!
//! Each named experiment has a typed runner (`run_example_1_1`, ...) whose
//! result renders to a [`Report`]: a trials table, a summary table, optional
//! extra tables and a line plot. [`emit`] writes a report to
//! `<out>/<name>/<label>/` as CSV or JSON plus `plot.svg` and `config.json`.
//!
//! Trials run on the rayon pool. Every trial derives its own seed from the
//! base seed and its grid coordinates, and results are collected in trial
//! order, so output does not depend on scheduling.

mod emit;
mod runs;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emit::{
    emit, render_csv, render_json, render_svg, Cell, OutputFormat, Plot, Report, Series, Table,
};
pub use runs::{
    quantizer_grid, run_example_1_1, run_lower_bound, run_mom_scalar, run_scaling, run_uniform_qom,
    uniform_qom_truth, Example11Cell, Example11Report, LowerBoundCell, LowerBoundReport,
    MomScalarCell, MomScalarReport, Regression, ScalingCell, ScalingReport, UniformQomCell,
    UniformQomReport, SCALAR_DISTRIBUTIONS,
};
pub use stats::{linear_fit, mean, mean_se, quantile_sorted, sorted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentName {
    #[serde(rename = "example11")]
    Example11,
    #[serde(rename = "lowerbound")]
    LowerBound,
    #[serde(rename = "scaling")]
    Scaling,
    #[serde(rename = "momscalar")]
    MomScalar,
    #[serde(rename = "uniformqom")]
    UniformQom,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::Example11,
        ExperimentName::LowerBound,
        ExperimentName::Scaling,
        ExperimentName::MomScalar,
        ExperimentName::UniformQom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Example11 => "example11",
            ExperimentName::LowerBound => "lowerbound",
            ExperimentName::Scaling => "scaling",
            ExperimentName::MomScalar => "momscalar",
            ExperimentName::UniformQom => "uniformqom",
        }
    }

    /// Stable id mixed into every trial seed.
    fn seed_tag(&self) -> u64 {
        *self as u64 + 1
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|n| n.as_str()).collect();
                Error::InvalidParameter(format!(
                    "unknown experiment {s:?}; valid names: {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    pub trials: usize,
    pub n_grid: Vec<usize>,
    pub pmin_grid: Option<Vec<f64>>,
    /// Confidence parameter handed to block-count policies.
    pub delta: f64,
    /// Estimator labels (`erm`, `mom-m`, `mom-pmin`, `mom-free`); only the
    /// scaling experiment accepts more than its default.
    pub estimators: Vec<String>,
    pub base_seed: u64,
    /// Lloyd restarts for heuristic fits.
    pub restarts: usize,
    /// Quantile level for the uniform QOM check.
    pub alpha: f64,
    /// Overrides the family parameter `delta = 1 / sqrt(8 N p)` of the
    /// five-point family with a fixed value (lowerbound, scaling).
    #[serde(default)]
    pub family_delta: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults that reproduce the reference measurements.
    pub fn defaults(name: ExperimentName) -> Self {
        let base = Self {
            name,
            trials: 1000,
            n_grid: vec![1000],
            pmin_grid: None,
            delta: 0.05,
            estimators: vec!["erm".into()],
            base_seed: 0,
            restarts: 10,
            alpha: 0.5,
            family_delta: None,
        };
        match name {
            ExperimentName::Example11 => Self {
                trials: 10_000,
                n_grid: vec![50, 1000],
                ..base
            },
            ExperimentName::LowerBound => Self {
                trials: 5000,
                pmin_grid: Some(vec![0.05]),
                ..base
            },
            ExperimentName::Scaling => Self {
                trials: 400,
                n_grid: vec![500, 1000, 2000, 4000, 8000],
                pmin_grid: Some(vec![0.025, 0.05, 0.1]),
                delta: 0.25,
                estimators: vec!["mom-pmin".into()],
                ..base
            },
            ExperimentName::MomScalar => Self {
                trials: 2000,
                n_grid: vec![8000],
                delta: 0.01,
                estimators: vec!["mom".into(), "mean".into()],
                ..base
            },
            ExperimentName::UniformQom => Self {
                trials: 500,
                n_grid: vec![250, 1000, 4000],
                estimators: vec!["qom".into()],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_grid.is_empty() {
            return bad("n grid must be nonempty".into());
        }
        if self.n_grid.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimator list must be nonempty".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if let Some(d) = self.family_delta {
            if !(d > -0.5 && d < 0.5) {
                return bad(format!("family delta must lie in (-1/2, 1/2), got {d}"));
            }
        }
        match (&self.pmin_grid, self.name) {
            (None, ExperimentName::LowerBound | ExperimentName::Scaling) => {
                bad(format!("{} needs a p_min grid", self.name))
            }
            (Some(g), _) if g.is_empty() => bad("p_min grid must be nonempty".into()),
            (Some(g), _) if g.iter().any(|p| !(*p > 0.0 && *p < 0.125)) => {
                bad("p_min values must lie in (0, 1/8) so that p = 4 p_min < 1/2".into())
            }
            _ => Ok(()),
        }
    }
}

/// Runs the configured experiment and renders its report.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    match config.name {
        ExperimentName::Example11 => Ok(run_example_1_1(config)?.report()),
        ExperimentName::LowerBound => Ok(run_lower_bound(config)?.report()),
        ExperimentName::Scaling => Ok(run_scaling(config)?.report()),
        ExperimentName::MomScalar => Ok(run_mom_scalar(config)?.report()),
        ExperimentName::UniformQom => Ok(run_uniform_qom(config)?.report()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in ExperimentName::ALL {
            assert_eq!(n.as_str().parse::<ExperimentName>().unwrap(), n);
        }
        let err = "nope".parse::<ExperimentName>().unwrap_err().to_string();
        assert!(err.contains("example11") && err.contains("uniformqom"));
    }

    #[test]
    fn validation() {
        for n in ExperimentName::ALL {
            ExperimentConfig::defaults(n).validate().unwrap();
        }
        let mut c = ExperimentConfig::defaults(ExperimentName::Example11);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentName::Scaling);
        c.pmin_grid = None;
        assert!(c.validate().is_err());
        c.pmin_grid = Some(vec![]);
        assert!(c.validate().is_err());
        c.pmin_grid = Some(vec![0.2]);
        assert!(c.validate().is_err());
    }
}
