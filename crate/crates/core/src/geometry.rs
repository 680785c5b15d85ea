//! Quantizer geometry: Voronoi assignment, the loss `l_A`, and empirical
//! distortion functionals.
//!
//! Points are stored row-major in flat buffers. Squared norms and inner
//! products accumulate coordinates left to right in plain `f64`, so results
//! are reproducible bit-for-bit for a fixed input order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_finite(coords: &[f64], what: &'static str) -> Result<()> {
    if coords.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point"));
        }
        check_finite(&coords, "point")?;
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// An ordered list of centers. Order matters: ties in the Voronoi
/// assignment go to the smallest index. Duplicate centers are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    dim: usize,
    centers: Vec<f64>,
}

impl Quantizer {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers.first().ok_or(Error::Empty("quantizer"))?.len();
        if dim == 0 {
            return Err(Error::Empty("quantizer center"));
        }
        let mut flat = Vec::with_capacity(dim * centers.len());
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
            flat.extend_from_slice(c);
        }
        Self::from_flat(dim, flat)
    }

    pub fn from_flat(dim: usize, centers: Vec<f64>) -> Result<Self> {
        if dim == 0 || centers.is_empty() {
            return Err(Error::Empty("quantizer"));
        }
        if centers.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: centers.len() % dim,
            });
        }
        check_finite(&centers, "quantizer")?;
        Ok(Quantizer { dim, centers })
    }

    /// One-dimensional quantizer from scalar centers.
    pub fn from_scalars(centers: &[f64]) -> Result<Self> {
        Self::from_flat(1, centers.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.centers
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.centers().map(<[f64]>::to_vec).collect()
    }

    /// Appends a copy of center `j` (padding up to `k` centers).
    pub fn with_duplicate(&self, j: usize) -> Quantizer {
        let mut centers = self.centers.clone();
        centers.extend_from_slice(self.center(j));
        Quantizer {
            dim: self.dim,
            centers,
        }
    }

    pub fn with_center(&self, c: &[f64]) -> Result<Quantizer> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.len(),
            });
        }
        check_finite(c, "quantizer")?;
        let mut centers = self.centers.clone();
        centers.extend_from_slice(c);
        Ok(Quantizer {
            dim: self.dim,
            centers,
        })
    }

    pub fn translated(&self, t: &[f64]) -> Quantizer {
        let centers = self
            .centers
            .chunks_exact(self.dim)
            .flat_map(|c| c.iter().zip(t).map(|(x, s)| x + s))
            .collect();
        Quantizer {
            dim: self.dim,
            centers,
        }
    }

    /// Drops exact duplicates, keeping the first occurrence of each center.
    pub fn deduplicated(&self) -> Quantizer {
        let mut centers: Vec<f64> = Vec::with_capacity(self.centers.len());
        for c in self.centers() {
            if !centers.chunks_exact(self.dim).any(|seen| seen == c) {
                centers.extend_from_slice(c);
            }
        }
        Quantizer {
            dim: self.dim,
            centers,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.centers()
            .map(|c| sq_norm(c).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn min_norm(&self) -> f64 {
        self.centers()
            .map(|c| sq_norm(c).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: d,
            })
        }
    }
}

/// N observations sharing one dimension, plus where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    coords: Vec<f64>,
    seed: Option<u64>,
    generator_tag: String,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::Empty("dataset"))?.len();
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(dim, flat)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        check_finite(&coords, "dataset")?;
        Ok(Dataset {
            dim,
            coords,
            seed: None,
            generator_tag: String::from("external"),
        })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    pub fn with_provenance(mut self, seed: Option<u64>, tag: impl Into<String>) -> Self {
        self.seed = seed;
        self.generator_tag = tag.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generator_tag(&self) -> &str {
        &self.generator_tag
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn translated(&self, t: &[f64]) -> Dataset {
        let coords = self
            .points()
            .flat_map(|p| p.iter().zip(t).map(|(x, s)| x + s))
            .collect();
        Dataset {
            dim: self.dim,
            coords,
            seed: self.seed,
            generator_tag: self.generator_tag.clone(),
        }
    }

    /// Reorders points by `perm` (point `i` of the result is `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Dataset {
        let coords = perm
            .iter()
            .flat_map(|&i| self.point(i).iter().copied())
            .collect();
        Dataset {
            dim: self.dim,
            coords,
            seed: self.seed,
            generator_tag: self.generator_tag.clone(),
        }
    }
}

/// Index of the nearest center and the squared distance to it; ties go to
/// the smallest index. Dimensions are not checked.
#[inline]
pub(crate) fn nearest(x: &[f64], a: &Quantizer) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in a.centers().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Zero-based Voronoi cell of `x`: the first center at minimal distance.
pub fn voronoi_index(x: &[f64], a: &Quantizer) -> Result<usize> {
    a.check_dim(x.len())?;
    Ok(nearest(x, a).0)
}

#[inline]
pub(crate) fn loss_unchecked(x: &[f64], a: &Quantizer) -> f64 {
    a.centers()
        .map(|c| sq_norm(c) - 2.0 * dot(x, c))
        .fold(f64::INFINITY, f64::min)
}

/// `l_A(x) = min_a (-2<x, a> + |a|^2)`, i.e. `min_a |x - a|^2 - |x|^2`.
pub fn loss_l(x: &[f64], a: &Quantizer) -> Result<f64> {
    a.check_dim(x.len())?;
    Ok(loss_unchecked(x, a))
}

/// Per-point losses `l_A(X_i)` in data order.
pub fn losses(data: &Dataset, a: &Quantizer) -> Result<Vec<f64>> {
    a.check_dim(data.dim())?;
    Ok(data.points().map(|x| loss_unchecked(x, a)).collect())
}

/// Cell index of every point.
pub fn assign(data: &Dataset, a: &Quantizer) -> Result<Vec<usize>> {
    a.check_dim(data.dim())?;
    Ok(data.points().map(|x| nearest(x, a).0).collect())
}

/// `(1/N) sum_i min_a |X_i - a|^2`.
pub fn empirical_distortion(data: &Dataset, a: &Quantizer) -> Result<f64> {
    a.check_dim(data.dim())?;
    let total: f64 = data.points().map(|x| nearest(x, a).1).sum();
    Ok(total / data.len() as f64)
}

/// Fraction of points falling in each cell.
pub fn empirical_cell_masses(data: &Dataset, a: &Quantizer) -> Result<Vec<f64>> {
    let counts = cell_counts(data, a)?;
    let n = data.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

pub fn cell_counts(data: &Dataset, a: &Quantizer) -> Result<Vec<usize>> {
    a.check_dim(data.dim())?;
    let mut counts = vec![0usize; a.len()];
    for x in data.points() {
        counts[nearest(x, a).0] += 1;
    }
    Ok(counts)
}

/// Empirical first and second moments of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    /// `(1/N) sum |X_i|^2`
    pub second_moment: f64,
    /// Trace of the empirical covariance (normalized by N).
    pub trace_cov: f64,
    /// Largest eigenvalue of the empirical covariance.
    pub lambda_max: f64,
}

const POWER_ITER_CAP: usize = 10_000;
const POWER_ITER_RTOL: f64 = 1e-9;
const POWER_ITER_SEED: u64 = 0x5EED_CAFE;

pub fn moment_summary(data: &Dataset) -> MomentSummary {
    let d = data.dim();
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for p in data.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let second_moment = data.points().map(sq_norm).sum::<f64>() / n;

    let mut cov = vec![0.0; d * d];
    for p in data.points() {
        for r in 0..d {
            let dr = p[r] - mean[r];
            for c in 0..d {
                cov[r * d + c] += dr * (p[c] - mean[c]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n);
    let trace_cov = (0..d).map(|i| cov[i * d + i]).sum();
    let lambda_max = top_eigenvalue(&cov, d);

    MomentSummary {
        mean,
        second_moment,
        trace_cov,
        lambda_max,
    }
}

/// Power iteration on a symmetric positive semidefinite `d x d` matrix.
fn top_eigenvalue(m: &[f64], d: usize) -> f64 {
    if d == 1 {
        return m[0].max(0.0);
    }
    let mut rng = CounterRng::new(POWER_ITER_SEED);
    let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let norm = sq_norm(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut lambda = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let w: Vec<f64> = (0..d).map(|r| dot(&m[r * d..(r + 1) * d], &v)).collect();
        let next = sq_norm(&w).sqrt();
        if next == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / next).collect();
        let converged = (next - lambda).abs() <= POWER_ITER_RTOL * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(c: &[f64]) -> Quantizer {
        Quantizer::from_scalars(c).unwrap()
    }

    fn ds(v: &[f64]) -> Dataset {
        Dataset::from_scalars(v).unwrap()
    }

    #[test]
    fn voronoi_examples() {
        assert_eq!(voronoi_index(&[0.0], &q(&[-1.0, 1.0])).unwrap(), 0);
        assert_eq!(voronoi_index(&[0.9], &q(&[0.0, 1.0])).unwrap(), 1);
        assert_eq!(voronoi_index(&[5.0], &q(&[5.0, 5.0, 7.0])).unwrap(), 0);
    }

    #[test]
    fn voronoi_rejects_dimension_mismatch() {
        let err = voronoi_index(&[0.0, 1.0], &q(&[0.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
        assert!(loss_l(&[0.0, 1.0], &q(&[0.0])).is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_l(&[3.0], &q(&[0.0])).unwrap(), 0.0);
        assert_eq!(loss_l(&[1.0], &q(&[1.0])).unwrap(), -1.0);
        // branches: a=0 -> 0, a=3 -> -12 + 9 = -3
        assert_eq!(loss_l(&[2.0], &q(&[0.0, 3.0])).unwrap(), -3.0);
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(
            empirical_distortion(&ds(&[0.0, 0.0, 2.0]), &q(&[0.0, 2.0])).unwrap(),
            0.0
        );
        assert_eq!(
            empirical_distortion(&ds(&[0.0, 1.0]), &q(&[0.0])).unwrap(),
            0.5
        );
        let d = empirical_distortion(&ds(&[0.0, 1.0, 2.0]), &q(&[0.5])).unwrap();
        assert!((d - 11.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn cell_mass_examples() {
        let m = empirical_cell_masses(&ds(&[-1.0, -1.0, 1.0]), &q(&[-1.0, 1.0])).unwrap();
        assert_eq!(m, vec![2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(
            empirical_cell_masses(&ds(&[0.0]), &q(&[0.0, 5.0])).unwrap(),
            vec![1.0, 0.0]
        );
        let m = empirical_cell_masses(&ds(&[0.0, 1.0, 2.0, 3.0]), &q(&[0.0, 3.0])).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
    }

    #[test]
    fn moment_examples() {
        let s = moment_summary(&ds(&[-1.0, 1.0]));
        assert_eq!(s.mean, vec![0.0]);
        assert_eq!(
            (s.second_moment, s.trace_cov, s.lambda_max),
            (1.0, 1.0, 1.0)
        );

        let s = moment_summary(&Dataset::new(vec![vec![3.0, -2.0]]).unwrap());
        assert_eq!(s.mean, vec![3.0, -2.0]);
        assert_eq!(s.trace_cov, 0.0);
        assert_eq!(s.lambda_max, 0.0);

        let cross = Dataset::new(vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let s = moment_summary(&cross);
        assert!((s.trace_cov - 1.0).abs() < 1e-15);
        assert!((s.lambda_max - 0.5).abs() < 1e-9);
    }

    #[test]
    fn lambda_max_of_anisotropic_cloud() {
        // covariance diag(4, 1) rotated by 45 degrees has the same spectrum
        let mut rng = CounterRng::new(9);
        let pts: Vec<Vec<f64>> = (0..20_000)
            .map(|_| {
                let (u, v) = (2.0 * rng.standard_normal(), rng.standard_normal());
                let s = std::f64::consts::FRAC_1_SQRT_2;
                vec![s * (u - v), s * (u + v)]
            })
            .collect();
        let s = moment_summary(&Dataset::new(pts).unwrap());
        assert!((s.lambda_max - 4.0).abs() < 0.15, "{}", s.lambda_max);
        assert!(s.lambda_max <= s.trace_cov);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Dataset::from_scalars(&[1.0, f64::INFINITY]).is_err());
        assert!(Quantizer::new(vec![vec![0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn dedup_keeps_first() {
        let a = q(&[1.0, 2.0, 1.0, 3.0, 2.0]).deduplicated();
        assert_eq!(a.as_flat(), &[1.0, 2.0, 3.0]);
    }

    fn cloud() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (1usize..4).prop_flat_map(|d| {
            (
                Just(d),
                prop::collection::vec(-50.0f64..50.0, d..=d * 30).prop_map(move |mut v| {
                    v.truncate(v.len() / d * d);
                    v
                }),
                prop::collection::vec(-50.0f64..50.0, d..=d * 5).prop_map(move |mut v| {
                    v.truncate(v.len() / d * d);
                    v
                }),
            )
        })
    }

    proptest! {
        #[test]
        fn partition_property((d, pts, cs) in cloud()) {
            let data = Dataset::from_flat(d, pts).unwrap();
            let a = Quantizer::from_flat(d, cs).unwrap();
            let counts = cell_counts(&data, &a).unwrap();
            prop_assert_eq!(counts.iter().sum::<usize>(), data.len());
            let masses = empirical_cell_masses(&data, &a).unwrap();
            prop_assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn loss_identity((d, pts, cs) in cloud()) {
            let data = Dataset::from_flat(d, pts).unwrap();
            let a = Quantizer::from_flat(d, cs).unwrap();
            for x in data.points() {
                let l = loss_l(x, &a).unwrap();
                let direct = a.centers().map(|c| sq_dist(x, c)).fold(f64::INFINITY, f64::min) - sq_norm(x);
                let scale = sq_norm(x).max(a.centers().map(sq_norm).fold(0.0, f64::max)).max(1.0);
                prop_assert!((l - direct).abs() <= 1e-12 * scale, "{} vs {}", l, direct);
            }
        }

        #[test]
        fn translation_covariance((d, pts, cs) in cloud(), shift in prop::collection::vec(-100.0f64..100.0, 3)) {
            let data = Dataset::from_flat(d, pts).unwrap();
            let a = Quantizer::from_flat(d, cs).unwrap();
            let t = &shift[..d];
            let base = empirical_distortion(&data, &a).unwrap();
            let moved = empirical_distortion(&data.translated(t), &a.translated(t)).unwrap();
            prop_assert!((base - moved).abs() <= 1e-10 * base.max(1.0));
        }

        #[test]
        fn adding_center_never_hurts((d, pts, cs) in cloud(), extra in prop::collection::vec(-50.0f64..50.0, 3)) {
            let data = Dataset::from_flat(d, pts).unwrap();
            let a = Quantizer::from_flat(d, cs).unwrap();
            let b = a.with_center(&extra[..d]).unwrap();
            prop_assert!(empirical_distortion(&data, &b).unwrap() <= empirical_distortion(&data, &a).unwrap());
        }

        #[test]
        fn padding_is_neutral((d, pts, cs) in cloud(), pick in 0usize..5) {
            let data = Dataset::from_flat(d, pts).unwrap();
            let a = Quantizer::from_flat(d, cs).unwrap();
            let padded = a.with_duplicate(pick % a.len());
            prop_assert_eq!(empirical_distortion(&data, &a).unwrap(), empirical_distortion(&data, &padded).unwrap());
            let m0 = empirical_cell_masses(&data, &a).unwrap();
            let m1 = empirical_cell_masses(&data, &padded).unwrap();
            prop_assert_eq!(&m0[..], &m1[..a.len()]);
            prop_assert_eq!(m1[a.len()], 0.0);
        }
    }
}
