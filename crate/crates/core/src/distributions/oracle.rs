//! Exact optimal quantizers of one-dimensional discrete measures.
//!
//! Optimal squared-loss cells on the line are contiguous runs of sorted
//! atoms, so the problem is an interval partition solved by dynamic
//! programming over suffixes. Among partitions of equal cost the one whose
//! first boundary is leftmost wins, then the second, and so on.

use serde::{Deserialize, Serialize};

use super::{exact_distortion, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::geometry::Quantizer;

/// An optimal quantizer together with the quantities that govern the
/// excess-distortion rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Centers in increasing order.
    pub optimal: Quantizer,
    /// `D(A*)`.
    pub distortion: f64,
    /// Smallest cell mass of `A*`.
    pub pmin: f64,
    /// `inf_{A^{k-1}} D - inf_{A^k} D`; infinite for `k = 1`.
    pub delta_gap: f64,
    /// Smallest centered atom norm `R` with `E|X-mu|^2 1[|X-mu| > R] <= delta_gap / 64`.
    pub radius_r: f64,
    /// Largest center norm of `A*`.
    pub magnitude_m: f64,
}

/// Weighted running mean and scatter (West's update).
#[derive(Clone, Copy, Default)]
struct Scatter {
    weight: f64,
    mean: f64,
    ss: f64,
}

impl Scatter {
    fn push(&mut self, x: f64, w: f64) {
        let total = self.weight + w;
        let delta = x - self.mean;
        let mean = self.mean + delta * w / total;
        self.ss += w * delta * (x - mean);
        self.mean = mean;
        self.weight = total;
    }
}

/// Sorted atoms and weights of a 1-D measure.
fn sorted_support(dist: &DiscreteDistribution) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = dist
        .atoms()
        .map(|a| a[0])
        .zip(dist.weights().iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Boundaries of the optimal partition of sorted atoms into `k < s` cells,
/// as exclusive end indices.
fn optimal_partition(xs: &[f64], ws: &[f64], k: usize) -> Vec<usize> {
    let s = xs.len();
    // cost[r][i]: best cost of splitting xs[i..] into r cells
    let mut cost = vec![vec![f64::INFINITY; s + 1]; k + 1];
    let mut cut = vec![vec![0usize; s + 1]; k + 1];

    let mut tail = Scatter::default();
    for i in (0..s).rev() {
        tail.push(xs[i], ws[i]);
        cost[1][i] = tail.ss.max(0.0);
        cut[1][i] = s;
    }
    for r in 2..=k {
        for i in 0..=(s - r) {
            let mut run = Scatter::default();
            let mut best = f64::INFINITY;
            let mut best_end = i + 1;
            for end in (i + 1)..=(s - r + 1) {
                run.push(xs[end - 1], ws[end - 1]);
                let c = run.ss.max(0.0) + cost[r - 1][end];
                if c < best {
                    best = c;
                    best_end = end;
                }
            }
            cost[r][i] = best;
            cut[r][i] = best_end;
        }
    }

    let mut ends = Vec::with_capacity(k);
    let mut i = 0;
    for r in (1..=k).rev() {
        i = cut[r][i];
        ends.push(i);
    }
    ends
}

/// Optimal `k`-point quantizer of a 1-D measure, centers ascending.
pub(crate) fn solve_1d(dist: &DiscreteDistribution, k: usize) -> Result<Quantizer> {
    if dist.dim() != 1 {
        return Err(Error::NotOneDimensional(dist.dim()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let (xs, ws) = sorted_support(dist);
    if k >= xs.len() {
        return Quantizer::from_scalars(&xs);
    }
    let mut centers = Vec::with_capacity(k);
    let mut start = 0;
    for end in optimal_partition(&xs, &ws, k) {
        let w: f64 = ws[start..end].iter().sum();
        let first: f64 = xs[start..end]
            .iter()
            .zip(&ws[start..end])
            .map(|(x, w)| x * w)
            .sum();
        centers.push(first / w);
        start = end;
    }
    Quantizer::from_scalars(&centers)
}

/// Exact optimal quantizer plus `D(A*)`, `p_min`, `M`, the gap `Delta`
/// to the best `(k-1)`-quantizer and the tail radius `R`.
pub fn optimal_quantizer_1d(dist: &DiscreteDistribution, k: usize) -> Result<OracleReport> {
    let optimal = solve_1d(dist, k)?;
    let distortion = exact_distortion(dist, &optimal)?;
    let pmin = dist
        .cell_masses(&optimal)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let magnitude_m = optimal.max_norm();

    let delta_gap = if k == 1 {
        f64::INFINITY
    } else {
        let coarser = solve_1d(dist, k - 1)?;
        (exact_distortion(dist, &coarser)? - distortion).max(0.0)
    };
    let radius_r = tail_radius(dist, delta_gap);

    Ok(OracleReport {
        optimal,
        distortion,
        pmin,
        delta_gap,
        radius_r,
        magnitude_m,
    })
}

fn tail_radius(dist: &DiscreteDistribution, delta_gap: f64) -> f64 {
    let mu = dist.mean()[0];
    let mut norms: Vec<(f64, f64)> = dist
        .atoms()
        .zip(dist.weights())
        .map(|(a, &w)| ((a[0] - mu).abs(), w))
        .collect();
    norms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let budget = delta_gap / 64.0;
    for &(r, _) in &norms {
        let tail: f64 = norms
            .iter()
            .filter(|(x, _)| *x > r)
            .map(|(x, w)| w * x * x)
            .sum();
        if tail <= budget {
            return r;
        }
    }
    norms.last().map(|n| n.0).unwrap_or(0.0)
}
