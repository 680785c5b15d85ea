//! Block partitions and the median-of-means / quantile-of-means criteria.
//!
//! Blocks are contiguous, equal-sized index ranges `[j*m, (j+1)*m)`; the
//! trailing `n - l*m` observations are left out. Block counts follow the
//! per-estimator formulas with natural logarithms, where `log x` is read
//! as `max(log x, 1)` before taking the ceiling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Dataset, Quantizer};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// `ceil(8 log(1/delta))`, bumped to the next odd number.
    ScalarMom,
    /// `8 ceil(log(2/delta)) + 1`, estimator with a known center magnitude.
    MagnitudeM,
    /// `12 ceil(log(6/delta)) + 1`, estimator with a known minimal cell mass.
    PminConstrained,
    /// `32 ceil(log(4/delta)) + 1`, parameter-free estimator.
    ParameterFree,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPolicy {
    pub kind: PolicyKind,
    pub delta: f64,
    pub explicit_ell: Option<usize>,
}

fn log_at_least_one(x: f64) -> f64 {
    x.ln().max(1.0)
}

impl BlockPolicy {
    pub fn scalar_mom(delta: f64) -> Self {
        Self {
            kind: PolicyKind::ScalarMom,
            delta,
            explicit_ell: None,
        }
    }

    pub fn magnitude(delta: f64) -> Self {
        Self {
            kind: PolicyKind::MagnitudeM,
            delta,
            explicit_ell: None,
        }
    }

    pub fn pmin(delta: f64) -> Self {
        Self {
            kind: PolicyKind::PminConstrained,
            delta,
            explicit_ell: None,
        }
    }

    pub fn parameter_free(delta: f64) -> Self {
        Self {
            kind: PolicyKind::ParameterFree,
            delta,
            explicit_ell: None,
        }
    }

    pub fn explicit(ell: usize) -> Self {
        Self {
            kind: PolicyKind::Explicit,
            delta: f64::NAN,
            explicit_ell: Some(ell),
        }
    }

    /// Number of blocks implied by the policy.
    pub fn ell(&self) -> Result<usize> {
        if self.kind == PolicyKind::Explicit {
            return match self.explicit_ell {
                Some(ell) if ell >= 1 => Ok(ell),
                _ => Err(Error::InvalidParameter(
                    "explicit block count must be >= 1".into(),
                )),
            };
        }
        let delta = self.delta;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        let ell = match self.kind {
            PolicyKind::ScalarMom => {
                let raw = (8.0 * log_at_least_one(1.0 / delta)).ceil() as usize;
                if raw % 2 == 0 {
                    raw + 1
                } else {
                    raw
                }
            }
            PolicyKind::MagnitudeM => 8 * log_at_least_one(2.0 / delta).ceil() as usize + 1,
            PolicyKind::PminConstrained => 12 * log_at_least_one(6.0 / delta).ceil() as usize + 1,
            PolicyKind::ParameterFree => 32 * log_at_least_one(4.0 / delta).ceil() as usize + 1,
            PolicyKind::Explicit => unreachable!(),
        };
        Ok(ell)
    }
}

/// `ell` disjoint blocks of `m = floor(n / ell)` indices each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    n: usize,
    ell: usize,
    m: usize,
    /// Optional pre-shuffle: block `j` holds `order[j*m..(j+1)*m]`.
    order: Option<Vec<usize>>,
}

pub fn make_partition(n: usize, policy: &BlockPolicy) -> Result<BlockPartition> {
    BlockPartition::new(n, policy.ell()?)
}

impl BlockPartition {
    pub fn new(n: usize, ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParameter("block count must be >= 1".into()));
        }
        if ell > n {
            return Err(Error::InfeasibleBlocks { ell, n });
        }
        Ok(Self {
            n,
            ell,
            m: n / ell,
            order: None,
        })
    }

    /// Assigns observations to blocks after a seeded shuffle instead of by
    /// position. Off unless requested.
    pub fn with_shuffle(mut self, seed: u64) -> Self {
        self.order = Some(CounterRng::new(seed).permutation(self.n));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    /// Number of observations that enter some block.
    pub fn covered(&self) -> usize {
        self.ell * self.m
    }

    pub fn is_shuffled(&self) -> bool {
        self.order.is_some()
    }

    /// Zero-based indices of block `j`.
    pub fn block(&self, j: usize) -> Vec<usize> {
        let range = j * self.m..(j + 1) * self.m;
        match &self.order {
            Some(order) => order[range].to_vec(),
            None => range.collect(),
        }
    }

    fn required_len(&self) -> usize {
        if self.order.is_some() {
            self.n
        } else {
            self.covered()
        }
    }
}

/// Quantile level `alpha` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidParameter(format!(
                "quantile level must lie in (0,1), got {alpha}"
            )))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }

    /// One-based rank `ceil(alpha * ell)`; rejects integer `alpha * ell`.
    pub fn rank(&self, ell: usize) -> Result<usize> {
        let t = ell as f64 * self.0;
        if t.fract() == 0.0 {
            return Err(Error::IntegerQuantileRank { alpha: self.0, ell });
        }
        Ok((t.ceil() as usize).clamp(1, ell))
    }
}

pub fn block_means(values: &[f64], part: &BlockPartition) -> Result<Vec<f64>> {
    if values.len() < part.required_len() {
        return Err(Error::LengthMismatch {
            needed: part.required_len(),
            found: values.len(),
        });
    }
    let m = part.m as f64;
    let means = match &part.order {
        None => values[..part.covered()]
            .chunks_exact(part.m)
            .map(|block| block.iter().sum::<f64>() / m)
            .collect(),
        Some(order) => order[..part.covered()]
            .chunks_exact(part.m)
            .map(|block| block.iter().map(|&i| values[i]).sum::<f64>() / m)
            .collect(),
    };
    Ok(means)
}

/// The `rank`-th smallest entry (one-based), by selection.
fn order_statistic(mut xs: Vec<f64>, rank: usize) -> f64 {
    let (_, v, _) = xs.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// Exact median of an odd-length list.
pub fn median_odd(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("median input"));
    }
    if xs.len() % 2 == 0 {
        return Err(Error::EvenBlocks(xs.len()));
    }
    Ok(order_statistic(xs.to_vec(), xs.len() / 2 + 1))
}

/// `Quant_alpha(x_1..x_l) = x_(ceil(alpha*l))`.
pub fn quantile(xs: &[f64], level: QuantileLevel) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("quantile input"));
    }
    let rank = level.rank(xs.len())?;
    Ok(order_statistic(xs.to_vec(), rank))
}

pub fn mom(values: &[f64], part: &BlockPartition) -> Result<f64> {
    if part.ell % 2 == 0 {
        return Err(Error::EvenBlocks(part.ell));
    }
    median_odd(&block_means(values, part)?)
}

pub fn qom(values: &[f64], part: &BlockPartition, level: QuantileLevel) -> Result<f64> {
    level.rank(part.ell)?;
    quantile(&block_means(values, part)?, level)
}

/// Scalar MOM mean estimate with `ceil(8 log(1/delta))` blocks (made odd).
pub fn mom_mean_estimate(values: &[f64], delta: f64) -> Result<f64> {
    let part = make_partition(values.len(), &BlockPolicy::scalar_mom(delta))?;
    mom(values, &part)
}

/// `MOM(l_A)` over the dataset.
pub fn mom_criterion(data: &Dataset, a: &Quantizer, part: &BlockPartition) -> Result<f64> {
    if part.n != data.len() {
        return Err(Error::LengthMismatch {
            needed: part.n,
            found: data.len(),
        });
    }
    mom(&geometry::losses(data, a)?, part)
}

/// Coordinatewise MOM of the data.
pub fn coordinatewise_mom(data: &Dataset, part: &BlockPartition) -> Result<Vec<f64>> {
    (0..data.dim())
        .map(|c| {
            let column: Vec<f64> = data.points().map(|p| p[c]).collect();
            mom(&column, part)
        })
        .collect()
}
