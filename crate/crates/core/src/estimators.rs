//! Empirical risk minimization and the three MOM estimators.
//!
//! The MOM estimators are argmins of a non-convex criterion. They are
//! approximated by scoring a pool of candidates: Lloyd fixed points from
//! several seeded restarts, MOM-monotone refinements of the same seeds, the
//! singleton at the coordinatewise MOM mean, and any caller-supplied
//! quantizers. Every scored candidate is kept in the result so the choice
//! can be replayed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::{exact_distortion, oracle_solve_1d, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::geometry::{self, nearest, sq_norm, Dataset, Quantizer};
use crate::mom::{self, make_partition, BlockPartition, BlockPolicy};
use crate::rng::{derive_seed, CounterRng};

/// Slack on the ball constraint of the magnitude estimator.
const BALL_TOL: f64 = 1e-12;
/// Raw excess distortions below this are treated as rounding noise.
pub const EXCESS_NOISE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorKind {
    /// Empirically optimal quantizer.
    Erm,
    /// MOM argmin over quantizers with all centers in the ball of radius `magnitude`.
    MomMagnitude { magnitude: f64 },
    /// MOM argmin over quantizers whose empirical cells all hold at least `pmin / 2`.
    MomPmin { pmin: f64 },
    /// Unconstrained MOM argmin.
    MomFree,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Erm => "erm",
            EstimatorKind::MomMagnitude { .. } => "mom-m",
            EstimatorKind::MomPmin { .. } => "mom-pmin",
            EstimatorKind::MomFree => "mom-free",
        }
    }

    /// Parses `erm`, `mom-m`, `mom-pmin` or `mom-free`; the constrained
    /// kinds need their parameter.
    pub fn from_label(label: &str, magnitude: Option<f64>, pmin: Option<f64>) -> Result<Self> {
        match label {
            "erm" => Ok(EstimatorKind::Erm),
            "mom-free" => Ok(EstimatorKind::MomFree),
            "mom-m" => magnitude
                .map(|magnitude| EstimatorKind::MomMagnitude { magnitude })
                .ok_or_else(|| {
                    Error::InvalidParameter("mom-m needs the center magnitude bound M".into())
                }),
            "mom-pmin" => pmin
                .map(|pmin| EstimatorKind::MomPmin { pmin })
                .ok_or_else(|| {
                    Error::InvalidParameter("mom-pmin needs the minimal cell mass p_min".into())
                }),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?}; valid: erm, mom-m, mom-pmin, mom-free"
            ))),
        }
    }

    pub fn is_mom(&self) -> bool {
        !matches!(self, EstimatorKind::Erm)
    }

    fn radius(&self) -> Option<f64> {
        match self {
            EstimatorKind::MomMagnitude { magnitude } => Some(*magnitude),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// k-means++ (squared-distance sampling).
    Kpp,
    /// `k` distinct sample points chosen uniformly.
    RandomPoints,
    /// Evenly spaced sample quantiles; one-dimensional data only.
    Grid1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStrategy {
    pub restarts: usize,
    pub max_iters: usize,
    pub seeding: Seeding,
    pub include_mom_mean_singleton: bool,
    /// Exact dynamic program on the empirical measure (ERM, d = 1 only).
    pub exact_1d: bool,
}

impl Default for SearchStrategy {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 100,
            seeding: Seeding::Kpp,
            include_mom_mean_singleton: true,
            exact_1d: false,
        }
    }
}

impl SearchStrategy {
    pub fn exact() -> Self {
        Self {
            exact_1d: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub k: usize,
    pub delta: f64,
    pub search: SearchStrategy,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, k: usize, delta: f64) -> Self {
        Self {
            kind,
            k,
            delta,
            search: SearchStrategy::default(),
        }
    }

    pub fn with_search(mut self, search: SearchStrategy) -> Self {
        self.search = search;
        self
    }

    /// Block-count policy implied by the estimator kind; `None` for ERM.
    pub fn block_policy(&self) -> Option<BlockPolicy> {
        match self.kind {
            EstimatorKind::Erm => None,
            EstimatorKind::MomMagnitude { .. } => Some(BlockPolicy::magnitude(self.delta)),
            EstimatorKind::MomPmin { .. } => Some(BlockPolicy::pmin(self.delta)),
            EstimatorKind::MomFree => Some(BlockPolicy::parameter_free(self.delta)),
        }
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if self.search.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        match self.kind {
            EstimatorKind::MomMagnitude { magnitude }
                if !(magnitude > 0.0 && magnitude.is_finite()) =>
            {
                return bad(format!("magnitude M must be positive, got {magnitude}"));
            }
            EstimatorKind::MomPmin { pmin } if !(pmin > 0.0 && pmin < 1.0) => {
                return bad(format!("p_min must lie in (0,1), got {pmin}"));
            }
            _ => {}
        }
        if self.search.exact_1d && (data.dim() != 1 || self.kind.is_mom()) {
            return bad("exact_1d search needs one-dimensional data and the erm estimator".into());
        }
        if self.search.seeding == Seeding::Grid1d && data.dim() != 1 {
            return bad("grid_1d seeding needs one-dimensional data".into());
        }
        if data.len() < self.k {
            return bad(format!(
                "need at least k = {} observations, got {}",
                self.k,
                data.len()
            ));
        }
        Ok(())
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub quantizer: Quantizer,
    pub criterion: f64,
    pub passes_constraint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub quantizer: Quantizer,
    pub criterion_value: f64,
    pub candidates_evaluated: usize,
    /// False only for constrained kinds when no candidate met the constraint;
    /// the quantizer is then the best unconstrained candidate.
    pub feasible: bool,
    pub warning: Option<String>,
    /// Number of MOM blocks, if any.
    pub ell: Option<usize>,
    /// `min_cell_mass`, `max_center_norm`, `min_center_norm`.
    pub diagnostics: BTreeMap<String, f64>,
    pub candidates: Vec<CandidateRecord>,
}

fn project(a: Quantizer, radius: Option<f64>) -> Quantizer {
    let Some(r) = radius else { return a };
    let dim = a.dim();
    let mut flat = a.as_flat().to_vec();
    for c in flat.chunks_exact_mut(dim) {
        let norm = sq_norm(c).sqrt();
        if norm > r {
            c.iter_mut().for_each(|x| *x *= r / norm);
        }
    }
    Quantizer::from_flat(dim, flat).expect("projection keeps shape")
}

fn seed_centers(data: &Dataset, k: usize, seeding: Seeding, seed: u64) -> Result<Quantizer> {
    let n = data.len();
    let dim = data.dim();
    let mut rng = CounterRng::new(seed);
    let picks: Vec<usize> = match seeding {
        Seeding::RandomPoints => rng.permutation(n).into_iter().take(k).collect(),
        Seeding::Grid1d => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| data.point(i)[0].total_cmp(&data.point(j)[0]));
            (0..k)
                .map(|j| order[(((j as f64 + 0.5) / k as f64) * n as f64) as usize])
                .collect()
        }
        Seeding::Kpp => {
            let mut picks = vec![rng.below(n)];
            let mut d2: Vec<f64> = data
                .points()
                .map(|x| geometry::sq_dist(x, data.point(picks[0])))
                .collect();
            while picks.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let target = rng.unit() * total;
                    let mut acc = 0.0;
                    let mut chosen = n - 1;
                    for (i, w) in d2.iter().enumerate() {
                        acc += w;
                        if acc > target && *w > 0.0 {
                            chosen = i;
                            break;
                        }
                    }
                    chosen
                } else {
                    rng.below(n)
                };
                picks.push(next);
                for (i, x) in data.points().enumerate() {
                    d2[i] = d2[i].min(geometry::sq_dist(x, data.point(next)));
                }
            }
            picks
        }
    };
    let flat = picks
        .iter()
        .flat_map(|&i| data.point(i).iter().copied())
        .collect();
    Quantizer::from_flat(dim, flat)
}

/// Cell sums and counts for the current assignment.
fn cell_means(data: &Dataset, a: &Quantizer) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let dim = data.dim();
    let mut sums = vec![0.0; a.len() * dim];
    let mut counts = vec![0usize; a.len()];
    let mut loss = Vec::with_capacity(data.len());
    for x in data.points() {
        let (j, d) = nearest(x, a);
        counts[j] += 1;
        loss.push(d);
        for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    (sums, counts, loss)
}

/// Classical Lloyd iterations. Empty cells are re-seeded at the point with
/// the largest current loss (ties to the smallest index).
fn lloyd(data: &Dataset, init: Quantizer, max_iters: usize, radius: Option<f64>) -> Quantizer {
    let dim = data.dim();
    let mut a = project(init, radius);
    for _ in 0..max_iters {
        let (sums, counts, loss) = cell_means(data, &a);
        let mut reseeded: Vec<usize> = Vec::new();
        let mut flat = Vec::with_capacity(a.as_flat().len());
        for j in 0..a.len() {
            if counts[j] > 0 {
                flat.extend(
                    sums[j * dim..(j + 1) * dim]
                        .iter()
                        .map(|s| s / counts[j] as f64),
                );
            } else {
                let far = (0..data.len())
                    .filter(|i| !reseeded.contains(i))
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if loss[b] >= loss[i] => Some(b),
                        _ => Some(i),
                    })
                    .unwrap_or(0);
                reseeded.push(far);
                flat.extend_from_slice(data.point(far));
            }
        }
        let next = project(
            Quantizer::from_flat(dim, flat).expect("finite means"),
            radius,
        );
        if next == a {
            break;
        }
        a = next;
    }
    a
}

/// Lloyd-style refinement that accepts a cell-mean update only when the
/// MOM criterion does not increase. Stops at `iters`, at a fixed point, or
/// at the first rejected update.
pub fn lloyd_mom_refine(
    data: &Dataset,
    a: &Quantizer,
    part: &BlockPartition,
    iters: usize,
) -> Result<Quantizer> {
    refine_with_radius(data, a.clone(), part, iters, None)
}

fn refine_with_radius(
    data: &Dataset,
    a: Quantizer,
    part: &BlockPartition,
    iters: usize,
    radius: Option<f64>,
) -> Result<Quantizer> {
    if a.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: a.dim(),
        });
    }
    let dim = data.dim();
    let mut current = a;
    let mut crit = mom::mom_criterion(data, &current, part)?;
    for _ in 0..iters {
        let (sums, counts, _) = cell_means(data, &current);
        let mut flat = current.as_flat().to_vec();
        for j in 0..current.len() {
            if counts[j] > 0 {
                for (c, s) in flat[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s / counts[j] as f64;
                }
            }
        }
        let next = project(Quantizer::from_flat(dim, flat)?, radius);
        if next == current {
            break;
        }
        let next_crit = mom::mom_criterion(data, &next, part)?;
        if next_crit > crit {
            break;
        }
        current = next;
        crit = next_crit;
    }
    Ok(current)
}

pub fn fit(data: &Dataset, config: &EstimatorConfig, seed: u64) -> Result<FitResult> {
    fit_with_candidates(data, config, seed, &[])
}

/// Like [`fit`], with extra quantizers (e.g. a known optimum) added to the
/// candidate pool.
pub fn fit_with_candidates(
    data: &Dataset,
    config: &EstimatorConfig,
    seed: u64,
    extra: &[Quantizer],
) -> Result<FitResult> {
    config.validate(data)?;
    if let Some(bad) = extra.iter().find(|q| q.dim() != data.dim()) {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: bad.dim(),
        });
    }
    let part = match config.block_policy() {
        Some(policy) => Some(make_partition(data.len(), &policy)?),
        None => None,
    };
    let radius = config.kind.radius();
    let search = &config.search;

    let mut pool: Vec<Quantizer> = Vec::new();
    if search.exact_1d {
        pool.push(oracle_solve_1d(
            &DiscreteDistribution::empirical(data),
            config.k,
        )?);
    } else {
        for r in 0..search.restarts {
            let init = seed_centers(
                data,
                config.k,
                search.seeding,
                derive_seed(seed, &[r as u64]),
            )?;
            pool.push(lloyd(data, init.clone(), search.max_iters, radius));
            if let Some(part) = &part {
                pool.push(refine_with_radius(
                    data,
                    project(init, radius),
                    part,
                    search.max_iters,
                    radius,
                )?);
            }
        }
        if search.include_mom_mean_singleton {
            let singleton_part = match &part {
                Some(p) => Some(p.clone()),
                None => make_partition(data.len(), &BlockPolicy::scalar_mom(config.delta)).ok(),
            };
            if let Some(p) = singleton_part {
                let center = mom::coordinatewise_mom(data, &p)?;
                pool.push(project(Quantizer::from_flat(data.dim(), center)?, radius));
            }
        }
    }
    pool.extend(extra.iter().cloned());

    let mut candidates = Vec::with_capacity(pool.len());
    for q in pool {
        let q = q.deduplicated();
        let criterion = match &part {
            Some(p) => mom::mom_criterion(data, &q, p)?,
            None => geometry::empirical_distortion(data, &q)?,
        };
        let passes_constraint = match config.kind {
            EstimatorKind::MomMagnitude { magnitude } => q.max_norm() <= magnitude + BALL_TOL,
            EstimatorKind::MomPmin { pmin } => {
                let masses = geometry::empirical_cell_masses(data, &q)?;
                masses.iter().all(|&m| m >= pmin / 2.0)
            }
            _ => true,
        };
        candidates.push(CandidateRecord {
            quantizer: q,
            criterion,
            passes_constraint,
        });
    }

    let best_of = |admissible: &dyn Fn(&CandidateRecord) -> bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in candidates.iter().enumerate() {
            if admissible(c) && best.is_none_or(|b| c.criterion < candidates[b].criterion) {
                best = Some(i);
            }
        }
        best
    };
    let (chosen, feasible) = match best_of(&|c| c.passes_constraint) {
        Some(i) => (i, true),
        None => (
            best_of(&|_| true).expect("candidate pool is never empty"),
            false,
        ),
    };
    let warning = (!feasible).then(|| {
        format!(
            "no candidate satisfies the {} constraint; returning the best unconstrained candidate",
            config.kind.label()
        )
    });

    let winner = candidates[chosen].clone();
    let masses = geometry::empirical_cell_masses(data, &winner.quantizer)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert(
        "min_cell_mass".to_string(),
        masses.iter().copied().fold(f64::INFINITY, f64::min),
    );
    diagnostics.insert("max_center_norm".to_string(), winner.quantizer.max_norm());
    diagnostics.insert("min_center_norm".to_string(), winner.quantizer.min_norm());

    Ok(FitResult {
        quantizer: winner.quantizer,
        criterion_value: winner.criterion,
        candidates_evaluated: candidates.len(),
        feasible,
        warning,
        ell: part.as_ref().map(BlockPartition::ell),
        diagnostics,
        candidates,
    })
}

/// Excess distortion `D(A) - D(A*)`, clamped at zero; `raw` keeps the
/// unclamped difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excess {
    pub value: f64,
    pub raw: f64,
}

pub fn excess_against(
    quantizer: &Quantizer,
    truth: &DiscreteDistribution,
    optimal_distortion: f64,
) -> Result<Excess> {
    let raw = exact_distortion(truth, quantizer)? - optimal_distortion;
    if raw < -EXCESS_NOISE {
        return Err(Error::OracleInconsistent(-raw));
    }
    Ok(Excess {
        value: raw.max(0.0),
        raw,
    })
}

/// Excess distortion of a fit against the exact optimum of a 1-D truth.
pub fn excess_distortion(
    fit: &FitResult,
    truth: &DiscreteDistribution,
    k: usize,
) -> Result<Excess> {
    let optimum = oracle_solve_1d(truth, k)?;
    let d_star = exact_distortion(truth, &optimum)?;
    excess_against(&fit.quantizer, truth, d_star)
}
