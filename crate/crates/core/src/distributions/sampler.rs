use serde::{Deserialize, Serialize};

use super::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::geometry::Dataset;
use crate::rng::CounterRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Discrete(DiscreteDistribution),
    /// Independent coordinates with the given means and variances.
    Gaussian {
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    /// Independent coordinates `shift + scale * U^{-1/tail_index}`.
    /// A negative scale mirrors the tail.
    Pareto {
        tail_index: f64,
        shift: f64,
        scale: f64,
    },
    Mixture(Vec<(f64, SamplerSpec)>),
}

/// A distribution that can be sampled reproducibly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    family: Family,
    dim: usize,
}

impl SamplerSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        let spec = Self { family, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn discrete(dist: DiscreteDistribution) -> Self {
        let dim = dist.dim();
        Self {
            family: Family::Discrete(dist),
            dim,
        }
    }

    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let dim = mean.len();
        Self::new(Family::Gaussian { mean, var }, dim)
    }

    pub fn pareto(tail_index: f64, shift: f64, scale: f64) -> Result<Self> {
        Self::new(
            Family::Pareto {
                tail_index,
                shift,
                scale,
            },
            1,
        )
    }

    pub fn mixture(components: Vec<(f64, SamplerSpec)>) -> Result<Self> {
        let dim = components.first().map(|c| c.1.dim).unwrap_or(0);
        Self::new(Family::Mixture(components), dim)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_discrete(&self) -> Option<&DiscreteDistribution> {
        match &self.family {
            Family::Discrete(d) => Some(d),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        match &self.family {
            Family::Discrete(d) if d.dim() != self.dim => bad(format!(
                "discrete atoms have dimension {}, spec says {}",
                d.dim(),
                self.dim
            )),
            Family::Discrete(_) => Ok(()),
            Family::Gaussian { mean, var } => {
                if mean.len() != self.dim || var.len() != self.dim {
                    return bad("gaussian mean and var must have length dim".into());
                }
                if mean.iter().chain(var).any(|x| !x.is_finite()) || var.iter().any(|&v| v < 0.0) {
                    return bad("gaussian parameters must be finite with var >= 0".into());
                }
                Ok(())
            }
            Family::Pareto {
                tail_index,
                shift,
                scale,
            } => {
                if !(*tail_index > 2.0) || !tail_index.is_finite() {
                    return bad(format!(
                        "pareto tail index must exceed 2 (finite variance), got {tail_index}"
                    ));
                }
                if !shift.is_finite() || !scale.is_finite() || *scale == 0.0 {
                    return bad("pareto shift must be finite and scale nonzero".into());
                }
                Ok(())
            }
            Family::Mixture(parts) => {
                if parts.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                if parts.iter().any(|(w, _)| !(*w > 0.0)) {
                    return bad("mixture weights must be positive".into());
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("mixture weights sum to {total}"));
                }
                for (_, c) in parts {
                    if c.dim != self.dim {
                        return bad("mixture components must share the dimension".into());
                    }
                    c.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Short provenance label, e.g. `pareto(2.2)`.
    pub fn tag(&self) -> String {
        match &self.family {
            Family::Discrete(d) => format!("discrete({} atoms)", d.len()),
            Family::Gaussian { .. } => format!("gaussian(d={})", self.dim),
            Family::Pareto { tail_index, .. } => format!("pareto({tail_index})"),
            Family::Mixture(parts) => format!("mixture({} components)", parts.len()),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match &self.family {
            Family::Discrete(d) => d.mean(),
            Family::Gaussian { mean, .. } => mean.clone(),
            Family::Pareto {
                tail_index: a,
                shift,
                scale,
            } => vec![shift + scale * a / (a - 1.0); self.dim],
            Family::Mixture(parts) => {
                let mut mu = vec![0.0; self.dim];
                for (w, c) in parts {
                    for (m, x) in mu.iter_mut().zip(c.mean()) {
                        *m += w * x;
                    }
                }
                mu
            }
        }
    }

    /// Per-coordinate variances.
    pub fn variance(&self) -> Vec<f64> {
        match &self.family {
            Family::Discrete(d) => {
                let mu = d.mean();
                (0..self.dim)
                    .map(|c| {
                        d.atoms()
                            .zip(d.weights())
                            .map(|(a, w)| w * (a[c] - mu[c]).powi(2))
                            .sum()
                    })
                    .collect()
            }
            Family::Gaussian { var, .. } => var.clone(),
            Family::Pareto {
                tail_index: a,
                scale,
                ..
            } => {
                vec![scale * scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0)); self.dim]
            }
            Family::Mixture(parts) => {
                let mu = self.mean();
                let mut raw = vec![0.0; self.dim];
                for (w, c) in parts {
                    for ((r, v), m) in raw.iter_mut().zip(c.variance()).zip(c.mean()) {
                        *r += w * (v + m * m);
                    }
                }
                raw.iter().zip(&mu).map(|(r, m)| r - m * m).collect()
            }
        }
    }

    /// `E|X|^2`.
    pub fn second_moment(&self) -> f64 {
        self.mean()
            .iter()
            .zip(self.variance())
            .map(|(m, v)| v + m * m)
            .sum()
    }

    fn draw_into(&self, rng: &mut CounterRng, out: &mut Vec<f64>) {
        match &self.family {
            Family::Discrete(d) => {
                let i = pick(d.weights(), rng.unit());
                out.extend_from_slice(d.atom(i));
            }
            Family::Gaussian { mean, var } => {
                for (m, v) in mean.iter().zip(var) {
                    out.push(m + v.sqrt() * rng.standard_normal());
                }
            }
            Family::Pareto {
                tail_index,
                shift,
                scale,
            } => {
                for _ in 0..self.dim {
                    let u = rng.open01();
                    out.push(shift + scale * libm::pow(u, -1.0 / tail_index));
                }
            }
            Family::Mixture(parts) => {
                let u = rng.unit();
                let mut acc = 0.0;
                let mut chosen = parts.len() - 1;
                for (i, (w, _)) in parts.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                parts[chosen].1.draw_into(rng, out);
            }
        }
    }
}

/// Inverse-CDF choice of an index given weights and a uniform draw.
fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `n` i.i.d. draws. Identical `(spec, n, seed)` give identical datasets.
pub fn sample(spec: &SamplerSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be at least 1".into(),
        ));
    }
    spec.validate()?;
    let mut rng = CounterRng::new(seed);
    let mut coords = Vec::with_capacity(n * spec.dim);
    for _ in 0..n {
        spec.draw_into(&mut rng, &mut coords);
    }
    Ok(Dataset::from_flat(spec.dim, coords)?.with_provenance(Some(seed), spec.tag()))
}
