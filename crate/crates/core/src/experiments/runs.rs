use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emit::{Cell, Plot, Report, Series, Table};
use super::stats::{binomial_se, linear_fit, mean, mean_se, quantile_sorted, sorted};
use super::{ExperimentConfig, ExperimentName};
use crate::distributions::{
    example_1_1, lower_bound_family, optimal_quantizer_1d, sample, DiscreteDistribution,
    SamplerSpec,
};
use crate::error::{Error, Result};
use crate::estimators::{
    excess_against, fit, fit_with_candidates, EstimatorConfig, EstimatorKind, SearchStrategy,
};
use crate::geometry::{self, Quantizer};
use crate::mom::{self, make_partition, BlockPolicy, QuantileLevel};
use crate::rng::derive_seed;

/// Slack when comparing an exact excess with a closed-form value.
const EXACT_TOL: f64 = 1e-12;

fn check(config: &ExperimentConfig, expected: ExperimentName) -> Result<()> {
    if config.name != expected {
        return Err(Error::InvalidParameter(format!(
            "config is for {}, runner is {expected}",
            config.name
        )));
    }
    config.validate()
}

fn trial_seed(config: &ExperimentConfig, cell: &[u64], trial: usize) -> u64 {
    let mut path = vec![config.name.seed_tag()];
    path.extend_from_slice(cell);
    path.push(trial as u64);
    derive_seed(config.base_seed, &path)
}

/// Runs `f` for every trial index on the pool; results stay in trial order.
fn trials<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

/// Family parameters `(p, delta)` used for a given `(N, p_min)`.
fn family_params(config: &ExperimentConfig, n: usize, pmin: f64) -> Result<(f64, f64)> {
    if n as f64 * pmin <= 0.125 {
        return Err(Error::InvalidParameter(format!(
            "lower-bound family needs N * p_min > 1/8, got {n} * {pmin}"
        )));
    }
    let p = 4.0 * pmin;
    let delta = config
        .family_delta
        .unwrap_or_else(|| 1.0 / (8.0 * n as f64 * p).sqrt());
    Ok((p, delta))
}

fn plot(title: &str, x: &str, y: &str, log: bool, series: Vec<Series>) -> Plot {
    Plot {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x: log,
        log_y: log,
        series,
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example11Cell {
    pub n: usize,
    pub trials: usize,
    /// Trials whose exact excess distortion is 1.
    pub excess_one: usize,
    pub frequency: f64,
    /// Trials without the heavy atom. Differs from `excess_one` only by the
    /// all-heavy samples, which have probability `N^{-N}`.
    pub heavy_absent: usize,
    pub absent_frequency: f64,
    /// `(1 - 1/N)^N`, the probability that the heavy atom is absent.
    pub expected: f64,
    pub mc_se: f64,
    /// Trials with the heavy atom drawn at least twice, and their largest excess.
    pub repeated_heavy: usize,
    pub repeated_heavy_max_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example11Report {
    pub config: ExperimentConfig,
    pub cells: Vec<Example11Cell>,
    trials: Table,
}

/// ERM with `k = 2` (exact) on samples from the two-atom distribution
/// `{0, sqrt(N)}`; the heavy atom is missed with probability `(1 - 1/N)^N`,
/// and then the excess distortion is exactly 1.
pub fn run_example_1_1(config: &ExperimentConfig) -> Result<Example11Report> {
    check(config, ExperimentName::Example11)?;
    let mut rows = Table::new(&[
        "experiment",
        "seed",
        "n",
        "kind",
        "heavy_count",
        "excess",
        "raw_excess",
        "criterion",
        "feasible",
    ]);
    let mut cells = Vec::new();
    for &n in &config.n_grid {
        let truth = example_1_1(n)?;
        let spec = SamplerSpec::discrete(truth.clone());
        let heavy = (n as f64).sqrt();
        let est = EstimatorConfig::new(EstimatorKind::Erm, 2, config.delta)
            .with_search(SearchStrategy::exact());
        let results = trials(config.trials, |t| {
            let seed = trial_seed(config, &[n as u64], t);
            let data = sample(&spec, n, seed)?;
            let heavy_count = data.as_flat().iter().filter(|&&x| x == heavy).count();
            let fit = fit(&data, &est, seed)?;
            let excess = excess_against(&fit.quantizer, &truth, 0.0)?;
            Ok((seed, heavy_count, excess, fit.criterion_value, fit.feasible))
        })?;
        let mut excess_one = 0;
        let mut absent = 0;
        let mut repeated = 0;
        let mut repeated_max: f64 = 0.0;
        for (seed, heavy_count, excess, criterion, feasible) in &results {
            if (excess.value - 1.0).abs() <= EXACT_TOL {
                excess_one += 1;
            }
            absent += (*heavy_count == 0) as usize;
            if *heavy_count >= 2 {
                repeated += 1;
                repeated_max = repeated_max.max(excess.value);
            }
            rows.push(vec![
                "example11".into(),
                (*seed).into(),
                n.into(),
                "erm".into(),
                (*heavy_count).into(),
                excess.value.into(),
                excess.raw.into(),
                (*criterion).into(),
                (*feasible).into(),
            ]);
        }
        let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
        cells.push(Example11Cell {
            n,
            trials: config.trials,
            excess_one,
            frequency: excess_one as f64 / config.trials as f64,
            heavy_absent: absent,
            absent_frequency: absent as f64 / config.trials as f64,
            expected,
            mc_se: binomial_se(expected, config.trials),
            repeated_heavy: repeated,
            repeated_heavy_max_excess: repeated_max,
        });
    }
    Ok(Example11Report {
        config: config.clone(),
        cells,
        trials: rows,
    })
}

impl Example11Report {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(&[
            "experiment",
            "n",
            "trials",
            "excess_one",
            "frequency",
            "absent_frequency",
            "expected",
            "mc_se",
            "repeated_heavy",
            "repeated_heavy_max_excess",
        ]);
        for c in &self.cells {
            summary.push(vec![
                "example11".into(),
                c.n.into(),
                c.trials.into(),
                c.excess_one.into(),
                c.frequency.into(),
                c.absent_frequency.into(),
                c.expected.into(),
                c.mc_se.into(),
                c.repeated_heavy.into(),
                c.repeated_heavy_max_excess.into(),
            ]);
        }
        let series = vec![
            Series {
                label: "measured".into(),
                points: self
                    .cells
                    .iter()
                    .map(|c| (c.n as f64, c.frequency))
                    .collect(),
            },
            Series {
                label: "(1-1/N)^N".into(),
                points: self
                    .cells
                    .iter()
                    .map(|c| (c.n as f64, c.expected))
                    .collect(),
            },
        ];
        Report {
            config: self.config.clone(),
            trials: self.trials.clone(),
            summary,
            extra: vec![],
            plot: plot(
                "Frequency of excess distortion 1",
                "N",
                "frequency",
                false,
                series,
            ),
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCell {
    pub n: usize,
    pub pmin: f64,
    pub p: f64,
    pub family_delta: f64,
    /// `D(A*)` from the exact oracle.
    pub d_star: f64,
    /// `delta / 16`.
    pub threshold: f64,
    pub trials: usize,
    pub crossings: usize,
    pub frequency: f64,
    pub mc_se: f64,
    pub mean_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub config: ExperimentConfig,
    pub cells: Vec<LowerBoundCell>,
    trials: Table,
}

/// ERM (`k = 4`, exact) on the five-point family with `p = 4 p_min` and
/// `delta = 1 / sqrt(8 N p)`; counts trials whose excess reaches `delta / 16`.
pub fn run_lower_bound(config: &ExperimentConfig) -> Result<LowerBoundReport> {
    check(config, ExperimentName::LowerBound)?;
    let pmins = config.pmin_grid.as_deref().unwrap_or_default();
    let mut rows = Table::new(&[
        "experiment",
        "seed",
        "n",
        "pmin",
        "kind",
        "excess",
        "raw_excess",
        "criterion",
        "crosses",
    ]);
    let mut cells = Vec::new();
    for &n in &config.n_grid {
        for &pmin in pmins {
            let (p, family_delta) = family_params(config, n, pmin)?;
            let truth = lower_bound_family(p, family_delta)?;
            let d_star = optimal_quantizer_1d(&truth, 4)?.distortion;
            let threshold = family_delta / 16.0;
            let spec = SamplerSpec::discrete(truth.clone());
            let est = EstimatorConfig::new(EstimatorKind::Erm, 4, config.delta)
                .with_search(SearchStrategy::exact());
            let results = trials(config.trials, |t| {
                let seed = trial_seed(config, &[n as u64, pmin.to_bits()], t);
                let data = sample(&spec, n, seed)?;
                let fit = fit(&data, &est, seed)?;
                Ok((
                    seed,
                    excess_against(&fit.quantizer, &truth, d_star)?,
                    fit.criterion_value,
                ))
            })?;
            let mut crossings = 0;
            let mut excesses = Vec::with_capacity(results.len());
            for (seed, excess, criterion) in &results {
                let crosses = excess.value >= threshold - EXACT_TOL;
                crossings += crosses as usize;
                excesses.push(excess.value);
                rows.push(vec![
                    "lowerbound".into(),
                    (*seed).into(),
                    n.into(),
                    pmin.into(),
                    "erm".into(),
                    excess.value.into(),
                    excess.raw.into(),
                    (*criterion).into(),
                    crosses.into(),
                ]);
            }
            let frequency = crossings as f64 / config.trials as f64;
            cells.push(LowerBoundCell {
                n,
                pmin,
                p,
                family_delta,
                d_star,
                threshold,
                trials: config.trials,
                crossings,
                frequency,
                mc_se: binomial_se(frequency, config.trials),
                mean_excess: mean(&excesses),
            });
        }
    }
    Ok(LowerBoundReport {
        config: config.clone(),
        cells,
        trials: rows,
    })
}

impl LowerBoundReport {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(&[
            "experiment",
            "n",
            "pmin",
            "p",
            "family_delta",
            "d_star",
            "threshold",
            "trials",
            "crossings",
            "frequency",
            "mc_se",
            "mean_excess",
        ]);
        for c in &self.cells {
            summary.push(vec![
                "lowerbound".into(),
                c.n.into(),
                c.pmin.into(),
                c.p.into(),
                c.family_delta.into(),
                c.d_star.into(),
                c.threshold.into(),
                c.trials.into(),
                c.crossings.into(),
                c.frequency.into(),
                c.mc_se.into(),
                c.mean_excess.into(),
            ]);
        }
        let series = by_pmin(&self.cells, |c| c.pmin, |c| (c.n as f64, c.frequency));
        Report {
            config: self.config.clone(),
            trials: self.trials.clone(),
            summary,
            extra: vec![],
            plot: plot(
                "Frequency of excess >= delta/16 (ERM)",
                "N",
                "frequency",
                false,
                series,
            ),
        }
    }
}

/// One series per distinct p_min, in first-seen order.
fn by_pmin<C>(
    cells: &[C],
    pmin: impl Fn(&C) -> f64,
    point: impl Fn(&C) -> (f64, f64),
) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for c in cells {
        let label = format!("p_min = {}", pmin(c));
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point(c)),
            None => series.push(Series {
                label,
                points: vec![point(c)],
            }),
        }
    }
    series
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub n: usize,
    pub pmin: f64,
    pub kind: String,
    pub trials: usize,
    pub mean_excess: f64,
    pub median_excess: f64,
    pub q10: f64,
    pub q90: f64,
    pub mc_se: f64,
    pub infeasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub kind: String,
    /// Slope of `log(mean excess)` against `log(N p_min)`.
    pub slope: f64,
    pub intercept: f64,
    pub cells_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub config: ExperimentConfig,
    pub cells: Vec<ScalingCell>,
    pub regressions: Vec<Regression>,
    trials: Table,
}

impl ScalingReport {
    pub fn regression(&self, kind: &str) -> Option<&Regression> {
        self.regressions.iter().find(|r| r.kind == kind)
    }
}

/// Fits each configured estimator (`k = 4`) on the five-point family over
/// the `(N, p_min)` grid and regresses log mean excess on `log(N p_min)`.
/// The exact optimum is added to every candidate pool.
pub fn run_scaling(config: &ExperimentConfig) -> Result<ScalingReport> {
    check(config, ExperimentName::Scaling)?;
    let pmins = config.pmin_grid.as_deref().unwrap_or_default();
    let mut rows = Table::new(&[
        "experiment",
        "seed",
        "n",
        "pmin",
        "kind",
        "excess",
        "raw_excess",
        "criterion",
        "feasible",
        "candidates",
    ]);
    let mut cells = Vec::new();
    for (ki, label) in config.estimators.iter().enumerate() {
        for &n in &config.n_grid {
            for &pmin in pmins {
                let (p, family_delta) = family_params(config, n, pmin)?;
                let truth = lower_bound_family(p, family_delta)?;
                let oracle = optimal_quantizer_1d(&truth, 4)?;
                let kind = EstimatorKind::from_label(label, Some(oracle.magnitude_m), Some(pmin))?;
                let search = SearchStrategy {
                    restarts: config.restarts,
                    ..SearchStrategy::default()
                };
                let est = EstimatorConfig::new(kind, 4, config.delta).with_search(search);
                let spec = SamplerSpec::discrete(truth.clone());
                let injected = std::slice::from_ref(&oracle.optimal);
                let results = trials(config.trials, |t| {
                    let seed = trial_seed(config, &[ki as u64, n as u64, pmin.to_bits()], t);
                    let data = sample(&spec, n, seed)?;
                    let fit = fit_with_candidates(&data, &est, seed, injected)?;
                    let excess = excess_against(&fit.quantizer, &truth, oracle.distortion)?;
                    Ok((seed, excess, fit))
                })?;
                let mut excesses = Vec::with_capacity(results.len());
                let mut infeasible = 0;
                for (seed, excess, fit) in &results {
                    excesses.push(excess.value);
                    infeasible += (!fit.feasible) as usize;
                    rows.push(vec![
                        "scaling".into(),
                        (*seed).into(),
                        n.into(),
                        pmin.into(),
                        label.as_str().into(),
                        excess.value.into(),
                        excess.raw.into(),
                        fit.criterion_value.into(),
                        fit.feasible.into(),
                        fit.candidates_evaluated.into(),
                    ]);
                }
                let s = sorted(&excesses);
                cells.push(ScalingCell {
                    n,
                    pmin,
                    kind: label.clone(),
                    trials: config.trials,
                    mean_excess: mean(&s),
                    median_excess: quantile_sorted(&s, 0.5),
                    q10: quantile_sorted(&s, 0.1),
                    q90: quantile_sorted(&s, 0.9),
                    mc_se: mean_se(&s),
                    infeasible,
                });
            }
        }
    }
    let regressions = config
        .estimators
        .iter()
        .map(|label| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = cells
                .iter()
                .filter(|c| &c.kind == label && c.mean_excess > 0.0)
                .map(|c| ((c.n as f64 * c.pmin).ln(), c.mean_excess.ln()))
                .unzip();
            let (slope, intercept) = if xs.len() >= 2 {
                linear_fit(&xs, &ys)
            } else {
                (f64::NAN, f64::NAN)
            };
            Regression {
                kind: label.clone(),
                slope,
                intercept,
                cells_used: xs.len(),
            }
        })
        .collect();
    Ok(ScalingReport {
        config: config.clone(),
        cells,
        regressions,
        trials: rows,
    })
}

impl ScalingReport {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(&[
            "experiment",
            "n",
            "pmin",
            "kind",
            "trials",
            "mean_excess",
            "median_excess",
            "q10",
            "q90",
            "mc_se",
        ]);
        for c in &self.cells {
            summary.push(vec![
                "scaling".into(),
                c.n.into(),
                c.pmin.into(),
                c.kind.as_str().into(),
                c.trials.into(),
                c.mean_excess.into(),
                c.median_excess.into(),
                c.q10.into(),
                c.q90.into(),
                c.mc_se.into(),
            ]);
        }
        let mut regression =
            Table::new(&["experiment", "kind", "slope", "intercept", "cells_used"]);
        for r in &self.regressions {
            regression.push(vec![
                "scaling".into(),
                r.kind.as_str().into(),
                r.slope.into(),
                r.intercept.into(),
                r.cells_used.into(),
            ]);
        }
        let multi = self.config.estimators.len() > 1;
        let mut series: Vec<Series> = Vec::new();
        for label in &self.config.estimators {
            let cells: Vec<&ScalingCell> = self.cells.iter().filter(|c| &c.kind == label).collect();
            for mut s in by_pmin(&cells, |c| c.pmin, |c| (c.n as f64 * c.pmin, c.mean_excess)) {
                if multi {
                    s.label = format!("{label}, {}", s.label);
                }
                series.push(s);
            }
        }
        Report {
            config: self.config.clone(),
            trials: self.trials.clone(),
            summary,
            extra: vec![("regression".into(), regression)],
            plot: plot(
                "Mean excess distortion",
                "N p_min",
                "mean excess",
                true,
                series,
            ),
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomScalarCell {
    pub n: usize,
    pub distribution: String,
    pub estimator: String,
    pub trials: usize,
    pub failures: usize,
    pub frequency: f64,
    /// Binomial standard error at the nominal failure rate `delta`.
    pub mc_se: f64,
    /// `sigma * sqrt(32 log(1/delta) / N)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomScalarReport {
    pub config: ExperimentConfig,
    pub cells: Vec<MomScalarCell>,
    trials: Table,
}

impl MomScalarReport {
    pub fn cell(&self, n: usize, distribution: &str, estimator: &str) -> Option<&MomScalarCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.distribution == distribution && c.estimator == estimator)
    }
}

/// Names of the scalar test distributions.
pub const SCALAR_DISTRIBUTIONS: [&str; 3] = ["gaussian", "pareto(2.2)", "pareto(3)"];

fn scalar_distribution(name: &str) -> Result<SamplerSpec> {
    match name {
        "gaussian" => SamplerSpec::gaussian(vec![0.0], vec![1.0]),
        "pareto(2.2)" => SamplerSpec::pareto(2.2, 0.0, 1.0),
        "pareto(3)" => SamplerSpec::pareto(3.0, 0.0, 1.0),
        _ => Err(Error::InvalidParameter(format!(
            "unknown scalar distribution {name:?}"
        ))),
    }
}

/// Failure frequencies of the scalar MOM and of the sample mean against the
/// deviation bound `sigma * sqrt(32 log(1/delta) / N)`.
pub fn run_mom_scalar(config: &ExperimentConfig) -> Result<MomScalarReport> {
    check(config, ExperimentName::MomScalar)?;
    let mut rows = Table::new(&[
        "experiment",
        "seed",
        "n",
        "distribution",
        "mom_error",
        "mean_error",
        "bound",
        "mom_fails",
        "mean_fails",
    ]);
    let mut cells = Vec::new();
    for &n in &config.n_grid {
        for (di, name) in SCALAR_DISTRIBUTIONS.iter().enumerate() {
            let spec = scalar_distribution(name)?;
            let mu = spec.mean()[0];
            let sigma = spec.variance()[0].sqrt();
            let bound = sigma * (32.0 * (1.0 / config.delta).ln() / n as f64).sqrt();
            let results = trials(config.trials, |t| {
                let seed = trial_seed(config, &[n as u64, di as u64], t);
                let data = sample(&spec, n, seed)?;
                let xs = data.as_flat();
                let mom_err = (mom::mom_mean_estimate(xs, config.delta)? - mu).abs();
                let mean_err = (xs.iter().sum::<f64>() / n as f64 - mu).abs();
                Ok((seed, mom_err, mean_err))
            })?;
            let (mut mom_fail, mut mean_fail) = (0, 0);
            for (seed, mom_err, mean_err) in &results {
                mom_fail += (*mom_err > bound) as usize;
                mean_fail += (*mean_err > bound) as usize;
                rows.push(vec![
                    "momscalar".into(),
                    (*seed).into(),
                    n.into(),
                    (*name).into(),
                    (*mom_err).into(),
                    (*mean_err).into(),
                    bound.into(),
                    (*mom_err > bound).into(),
                    (*mean_err > bound).into(),
                ]);
            }
            for (estimator, failures) in [("mom", mom_fail), ("mean", mean_fail)] {
                cells.push(MomScalarCell {
                    n,
                    distribution: name.to_string(),
                    estimator: estimator.into(),
                    trials: config.trials,
                    failures,
                    frequency: failures as f64 / config.trials as f64,
                    mc_se: binomial_se(config.delta, config.trials),
                    bound,
                });
            }
        }
    }
    Ok(MomScalarReport {
        config: config.clone(),
        cells,
        trials: rows,
    })
}

impl MomScalarReport {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(&[
            "experiment",
            "n",
            "distribution",
            "estimator",
            "trials",
            "failures",
            "frequency",
            "delta",
            "mc_se",
            "bound",
        ]);
        for c in &self.cells {
            summary.push(vec![
                "momscalar".into(),
                c.n.into(),
                c.distribution.as_str().into(),
                c.estimator.as_str().into(),
                c.trials.into(),
                c.failures.into(),
                c.frequency.into(),
                self.config.delta.into(),
                c.mc_se.into(),
                c.bound.into(),
            ]);
        }
        let mut series: Vec<Series> = Vec::new();
        for c in &self.cells {
            let label = format!("{} {}", c.estimator, c.distribution);
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((c.n as f64, c.frequency)),
                None => series.push(Series {
                    label,
                    points: vec![(c.n as f64, c.frequency)],
                }),
            }
        }
        Report {
            config: self.config.clone(),
            trials: self.trials.clone(),
            summary,
            extra: vec![],
            plot: plot(
                "Failure frequency of the deviation bound",
                "N",
                "frequency",
                false,
                series,
            ),
        }
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformQomCell {
    pub n: usize,
    pub ell: usize,
    pub alpha: f64,
    /// Quantile level `1 - exp(-alpha^2 ell / 2)`.
    pub level: f64,
    pub trials: usize,
    /// Level-quantile of the sup-deviation across trials.
    pub quantile: f64,
    /// Half the spread between the order statistics one binomial standard
    /// deviation either side of the quantile.
    pub quantile_se: f64,
    pub mean_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformQomReport {
    pub config: ExperimentConfig,
    pub cells: Vec<UniformQomCell>,
    /// Grid size and the bounds that define it.
    pub grid_size: usize,
    pub magnitude: f64,
    pub min_norm_bound: f64,
    /// Successive quantiles never rise by more than two combined standard errors.
    pub non_increasing: bool,
    trials: Table,
}

/// Truth used by the uniform check.
pub fn uniform_qom_truth() -> Result<DiscreteDistribution> {
    lower_bound_family(0.2, 0.025)
}

/// Two-point quantizers on an evenly spaced grid of `points` values in
/// `[-magnitude, magnitude]`, keeping those whose smaller center norm is at
/// most `min_norm_bound`.
pub fn quantizer_grid(
    points: usize,
    magnitude: f64,
    min_norm_bound: f64,
) -> Result<Vec<Quantizer>> {
    let values: Vec<f64> = (0..points)
        .map(|i| -magnitude + 2.0 * magnitude * i as f64 / (points - 1) as f64)
        .collect();
    let mut grid = Vec::new();
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            if a.abs().min(b.abs()) <= min_norm_bound {
                grid.push(Quantizer::from_scalars(&[a, b])?);
            }
        }
    }
    Ok(grid)
}

/// `sup_A (E l_A - QOM_alpha(l_A))` over a fixed finite grid of two-point
/// quantizers, with exact expectations under a discrete truth.
pub fn run_uniform_qom(config: &ExperimentConfig) -> Result<UniformQomReport> {
    check(config, ExperimentName::UniformQom)?;
    let truth = uniform_qom_truth()?;
    let magnitude = truth.atoms().map(|a| a[0].abs()).fold(0.0, f64::max);
    let min_norm_bound = 4.0 * (2.0 * truth.second_moment()).sqrt();
    let grid = quantizer_grid(19, magnitude, min_norm_bound)?;
    let expected: Vec<f64> = grid
        .iter()
        .map(|a| {
            truth
                .atoms()
                .zip(truth.weights())
                .map(|(x, w)| w * geometry::loss_l(x, a).unwrap())
                .sum()
        })
        .collect();
    let level_alpha = QuantileLevel::new(config.alpha)?;
    let spec = SamplerSpec::discrete(truth.clone());

    let mut rows = Table::new(&["experiment", "seed", "n", "sup_deviation"]);
    let mut cells = Vec::new();
    for &n in &config.n_grid {
        let part = make_partition(n, &BlockPolicy::magnitude(config.delta))?;
        let ell = part.ell();
        let results = trials(config.trials, |t| {
            let seed = trial_seed(config, &[n as u64], t);
            let data = sample(&spec, n, seed)?;
            let mut sup = f64::NEG_INFINITY;
            for (a, e) in grid.iter().zip(&expected) {
                sup = sup.max(e - mom::qom(&geometry::losses(&data, a)?, &part, level_alpha)?);
            }
            Ok((seed, sup))
        })?;
        let sups: Vec<f64> = results.iter().map(|r| r.1).collect();
        for (seed, sup) in &results {
            rows.push(vec![
                "uniformqom".into(),
                (*seed).into(),
                n.into(),
                (*sup).into(),
            ]);
        }
        let s = sorted(&sups);
        let level = 1.0 - (-config.alpha * config.alpha * ell as f64 / 2.0).exp();
        let t = s.len() as f64;
        let spread = (t * level * (1.0 - level)).sqrt() / t;
        let quantile_se =
            (quantile_sorted(&s, level + spread) - quantile_sorted(&s, level - spread)) / 2.0;
        cells.push(UniformQomCell {
            n,
            ell,
            alpha: config.alpha,
            level,
            trials: config.trials,
            quantile: quantile_sorted(&s, level),
            quantile_se,
            mean_sup: mean(&s),
        });
    }
    let non_increasing = cells.windows(2).all(|w| {
        let tol = 2.0 * (w[0].quantile_se.powi(2) + w[1].quantile_se.powi(2)).sqrt();
        w[1].quantile <= w[0].quantile + tol
    });
    Ok(UniformQomReport {
        config: config.clone(),
        cells,
        grid_size: grid.len(),
        magnitude,
        min_norm_bound,
        non_increasing,
        trials: rows,
    })
}

impl UniformQomReport {
    pub fn report(&self) -> Report {
        let mut summary = Table::new(&[
            "experiment",
            "n",
            "ell",
            "alpha",
            "level",
            "trials",
            "quantile",
            "quantile_se",
            "mean_sup",
            "grid_size",
            "non_increasing",
        ]);
        for c in &self.cells {
            summary.push(vec![
                "uniformqom".into(),
                c.n.into(),
                c.ell.into(),
                c.alpha.into(),
                c.level.into(),
                c.trials.into(),
                c.quantile.into(),
                c.quantile_se.into(),
                c.mean_sup.into(),
                self.grid_size.into(),
                Cell::Bool(self.non_increasing),
            ]);
        }
        let series = vec![Series {
            label: format!("alpha = {}", self.config.alpha),
            points: self
                .cells
                .iter()
                .map(|c| (c.n as f64, c.quantile))
                .collect(),
        }];
        Report {
            config: self.config.clone(),
            trials: self.trials.clone(),
            summary,
            extra: vec![],
            plot: plot(
                "Uniform QOM deviation quantile",
                "N",
                "sup deviation quantile",
                true,
                series,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(name: ExperimentName) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(name);
        c.trials = 8;
        c
    }

    #[test]
    fn example_1_1_with_n_two() {
        let mut c = tiny(ExperimentName::Example11);
        c.n_grid = vec![2];
        c.trials = 400;
        let r = run_example_1_1(&c).unwrap();
        // the heavy atom is missed with probability 1/4; the excess is also 1
        // when only the heavy atom is drawn, another 1/4
        let cell = &r.cells[0];
        assert_eq!(cell.expected, 0.25);
        assert!((cell.absent_frequency - 0.25).abs() < 4.0 * cell.mc_se);
        assert!((cell.frequency - 0.5).abs() < 4.0 * 0.025);
        // with N = 2 a repeated heavy atom means no zero was drawn
        assert!((cell.repeated_heavy_max_excess - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_cell_values() {
        let r = run_lower_bound(&tiny(ExperimentName::LowerBound)).unwrap();
        let c = &r.cells[0];
        assert!((c.family_delta - 0.025).abs() < 1e-15);
        assert!((c.d_star - (1.0 - 0.025) / 32.0).abs() < 1e-12);
        assert_eq!(c.threshold, 0.025 / 16.0);

        let mut bad = tiny(ExperimentName::LowerBound);
        bad.n_grid = vec![2];
        bad.pmin_grid = Some(vec![0.05]);
        assert!(run_lower_bound(&bad).is_err());
    }

    #[test]
    fn runner_rejects_foreign_config() {
        assert!(run_scaling(&tiny(ExperimentName::Example11)).is_err());
    }

    #[test]
    fn scaling_columns_and_regression() {
        let mut c = tiny(ExperimentName::Scaling);
        c.n_grid = vec![500, 2000];
        c.pmin_grid = Some(vec![0.05, 0.1]);
        c.restarts = 2;
        let r = run_scaling(&c).unwrap();
        assert_eq!(r.cells.len(), 4);
        let rep = r.report();
        assert_eq!(
            rep.summary.header.join(","),
            "experiment,n,pmin,kind,trials,mean_excess,median_excess,q10,q90,mc_se"
        );
        assert_eq!(rep.trials.rows.len(), 32);
        assert!(r.regression("mom-pmin").unwrap().slope.is_finite());
        assert_eq!(rep.plot.series.len(), 2);
        for cell in &r.cells {
            assert!(cell.q10 <= cell.median_excess && cell.median_excess <= cell.q90);
        }
    }

    #[test]
    fn mom_scalar_cells() {
        let mut c = tiny(ExperimentName::MomScalar);
        c.n_grid = vec![500];
        let r = run_mom_scalar(&c).unwrap();
        assert_eq!(r.cells.len(), 6);
        assert!(r.cell(500, "gaussian", "mean").is_some());
    }

    #[test]
    fn uniform_grid_and_alpha_half() {
        let truth = uniform_qom_truth().unwrap();
        let m = 1.0 / 0.2f64.sqrt();
        let grid = quantizer_grid(19, m, 4.0 * (2.0 * truth.second_moment()).sqrt()).unwrap();
        assert_eq!(grid.len(), 171);
        assert!(grid.iter().all(|a| a.max_norm() <= m + 1e-12));
        let tight = quantizer_grid(19, m, 0.5).unwrap();
        assert!(tight.len() < grid.len());

        let mut c = tiny(ExperimentName::UniformQom);
        c.n_grid = vec![100, 400];
        let r = run_uniform_qom(&c).unwrap();
        assert_eq!(r.cells[0].ell, 33);
        assert!(r.cells.iter().all(|c| c.quantile.is_finite()));
    }

    #[test]
    fn deterministic_and_grid_order_free() {
        let mut c = tiny(ExperimentName::LowerBound);
        c.n_grid = vec![400, 800];
        let a = run_lower_bound(&c).unwrap();
        assert_eq!(a, run_lower_bound(&c).unwrap());
        c.n_grid = vec![800, 400];
        let b = run_lower_bound(&c).unwrap();
        assert_eq!(a.cells[0], b.cells[1]);
        assert_eq!(a.cells[1], b.cells[0]);
    }
}
