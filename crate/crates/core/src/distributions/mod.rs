//! Finite-support measures with exact oracles, plus samplers for the
//! experiment families.

mod oracle;
pub(crate) use oracle::solve_1d as oracle_solve_1d;
mod sampler;
mod spec_file;

pub use oracle::{optimal_quantizer_1d, OracleReport};
pub use sampler::{sample, Family, SamplerSpec};
pub use spec_file::{builtin, parse_spec, BUILTIN_NAMES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{nearest, sq_dist, sq_norm, Dataset, Quantizer};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A probability measure on finitely many distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let dim = atoms
            .first()
            .ok_or_else(|| Error::InvalidDistribution("no atoms".into()))?
            .len();
        let mut flat = Vec::with_capacity(dim * atoms.len());
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.len(),
                });
            }
            flat.extend_from_slice(a);
        }
        Self::from_flat(dim, flat, weights)
    }

    pub fn from_scalars(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        Self::from_flat(1, atoms.to_vec(), weights.to_vec())
    }

    pub fn from_flat(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if atoms.len() != dim * weights.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} coordinates in dimension {dim}",
                weights.len(),
                atoms.len()
            )));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("distribution atoms"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDistribution(
                "weights must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let chunks: Vec<&[f64]> = atoms.chunks_exact(dim).collect();
        for (i, a) in chunks.iter().enumerate() {
            if chunks[..i].iter().any(|b| b == a) {
                return Err(Error::InvalidDistribution(format!("duplicate atom {a:?}")));
            }
        }
        Ok(Self {
            dim,
            atoms,
            weights,
        })
    }

    /// The empirical measure of a dataset: distinct points weighted by their
    /// frequency, listed in lexicographic order.
    pub fn empirical(data: &Dataset) -> Self {
        let d = data.dim();
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.sort_by(|&i, &j| {
            data.point(i)
                .iter()
                .zip(data.point(j))
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for i in idx {
            let p = data.point(i);
            match atoms.len().checked_sub(d) {
                Some(last) if &atoms[last..] == p => *counts.last_mut().unwrap() += 1,
                _ => {
                    atoms.extend_from_slice(p);
                    counts.push(1);
                }
            }
        }
        let n = data.len() as f64;
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        Self {
            dim: d,
            atoms,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.atoms.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        for (a, w) in self.atoms().zip(&self.weights) {
            for (m, x) in mu.iter_mut().zip(a) {
                *m += w * x;
            }
        }
        mu
    }

    /// `E|X|^2`.
    pub fn second_moment(&self) -> f64 {
        self.atoms()
            .zip(&self.weights)
            .map(|(a, w)| w * sq_norm(a))
            .sum()
    }

    /// `E|X - mu|^2`, the trace of the covariance.
    pub fn centered_second_moment(&self) -> f64 {
        let mu = self.mean();
        self.atoms()
            .zip(&self.weights)
            .map(|(a, w)| w * sq_dist(a, &mu))
            .sum()
    }

    /// `P(V_j(A))` for every cell.
    pub fn cell_masses(&self, a: &Quantizer) -> Result<Vec<f64>> {
        check_dims(self, a)?;
        let mut masses = vec![0.0; a.len()];
        for (x, w) in self.atoms().zip(&self.weights) {
            masses[nearest(x, a).0] += w;
        }
        Ok(masses)
    }
}

fn check_dims(dist: &DiscreteDistribution, a: &Quantizer) -> Result<()> {
    if dist.dim == a.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: dist.dim,
        })
    }
}

/// Two atoms `{0, sqrt(n)}` with masses `1 - 1/n` and `1/n`; `E X^2 = 1`.
pub fn example_1_1(n: usize) -> Result<DiscreteDistribution> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "example 1.1 needs n >= 2, got {n}"
        )));
    }
    let nf = n as f64;
    DiscreteDistribution::from_scalars(&[0.0, nf.sqrt()], &[1.0 - 1.0 / nf, 1.0 / nf])
}

/// The five-point family `P_{p,delta}` on `{-s, -s/2, 0, s/2, s}` with
/// `s = p^{-1/2}`; the negative pair carries `p(1-delta)/4` each and the
/// positive pair `p(1+delta)/4` each. `E X^2 = 5/8`.
pub fn lower_bound_family(p: f64, delta: f64) -> Result<DiscreteDistribution> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in (0, 1/2), got {p}"
        )));
    }
    if !(delta > -0.5 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (-1/2, 1/2), got {delta}"
        )));
    }
    let s = 1.0 / p.sqrt();
    let neg = p * (1.0 - delta) / 4.0;
    let pos = p * (1.0 + delta) / 4.0;
    DiscreteDistribution::from_scalars(
        &[-s, -0.5 * s, 0.0, 0.5 * s, s],
        &[neg, neg, 1.0 - p, pos, pos],
    )
}

/// `D(A) = sum_atoms w * min_a |x - a|^2`.
pub fn exact_distortion(dist: &DiscreteDistribution, a: &Quantizer) -> Result<f64> {
    check_dims(dist, a)?;
    Ok(dist
        .atoms()
        .zip(&dist.weights)
        .map(|(x, w)| w * nearest(x, a).1)
        .sum())
}

/// Largest distance between a center and the conditional mean of its cell,
/// over cells of positive mass.
pub fn centroid_check(dist: &DiscreteDistribution, a: &Quantizer) -> Result<f64> {
    check_dims(dist, a)?;
    let d = dist.dim;
    let mut mass = vec![0.0; a.len()];
    let mut first = vec![0.0; a.len() * d];
    for (x, w) in dist.atoms().zip(&dist.weights) {
        let j = nearest(x, a).0;
        mass[j] += w;
        for (acc, xi) in first[j * d..(j + 1) * d].iter_mut().zip(x) {
            *acc += w * xi;
        }
    }
    let worst = (0..a.len())
        .filter(|&j| mass[j] > 0.0)
        .map(|j| {
            let centroid: Vec<f64> = first[j * d..(j + 1) * d]
                .iter()
                .map(|s| s / mass[j])
                .collect();
            sq_dist(a.center(j), &centroid).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Checks `|a| <= sqrt(E|X|^2 / p_min)` for every optimal center.
pub fn magnitude_bound_check(report: &OracleReport, dist: &DiscreteDistribution) -> bool {
    let bound = (dist.second_moment() / report.pmin).sqrt() + 1e-9;
    report.optimal.centers().all(|c| sq_norm(c).sqrt() <= bound)
}
