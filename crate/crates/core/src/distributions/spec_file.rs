//! JSON distribution specs.
//!
//! ```json
//! {"family": "discrete", "dim": 1,
//!  "params": {"atoms": [[0.0], [2.0]], "weights": [0.75, 0.25]}}
//! ```
//!
//! | family        | params                                                  |
//! |---------------|---------------------------------------------------------|
//! | `discrete`    | `atoms` (arrays of `dim` reals), `weights`              |
//! | `gaussian`    | `mean`, `var` (arrays of `dim` reals)                   |
//! | `pareto`      | `tail_index` (> 2), `shift` (default 0), `scale` (default 1) |
//! | `mixture`     | `components`: array of `{"weight": w, "spec": <spec>}`  |
//! | `example-1-1` | `n` (integer >= 2); `dim` must be 1                     |
//! | `lower-bound` | `p` in (0, 1/2), `delta` in (-1/2, 1/2); `dim` must be 1 |
//!
//! Unknown fields are rejected at every level.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;

use super::{example_1_1, lower_bound_family, DiscreteDistribution, Family, SamplerSpec};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: String,
    params: Value,
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteParams {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianParams {
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn zero() -> f64 {
    0.0
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParetoParams {
    tail_index: f64,
    #[serde(default = "zero")]
    shift: f64,
    #[serde(default = "one")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureComponent {
    weight: f64,
    spec: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureParams {
    components: Vec<MixtureComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Example11Params {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LowerBoundParams {
    p: f64,
    delta: f64,
}

fn params<T: for<'de> Deserialize<'de>>(family: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::SpecFile(format!("{family} params: {e}")))
}

fn require_1d(family: &str, dim: usize) -> Result<()> {
    if dim == 1 {
        Ok(())
    } else {
        Err(Error::SpecFile(format!(
            "{family} is one-dimensional, got dim {dim}"
        )))
    }
}

fn from_value(v: Value) -> Result<SamplerSpec> {
    let raw: RawSpec = serde_json::from_value(v)?;
    let dim = raw.dim;
    match raw.family.as_str() {
        "discrete" => {
            let p: DiscreteParams = params("discrete", raw.params)?;
            let dist = DiscreteDistribution::new(p.atoms, p.weights)?;
            SamplerSpec::new(Family::Discrete(dist), dim)
        }
        "gaussian" => {
            let p: GaussianParams = params("gaussian", raw.params)?;
            SamplerSpec::new(
                Family::Gaussian {
                    mean: p.mean,
                    var: p.var,
                },
                dim,
            )
        }
        "pareto" => {
            let p: ParetoParams = params("pareto", raw.params)?;
            SamplerSpec::new(
                Family::Pareto {
                    tail_index: p.tail_index,
                    shift: p.shift,
                    scale: p.scale,
                },
                dim,
            )
        }
        "mixture" => {
            let p: MixtureParams = params("mixture", raw.params)?;
            let parts = p
                .components
                .into_iter()
                .map(|c| Ok((c.weight, from_value(c.spec)?)))
                .collect::<Result<Vec<_>>>()?;
            SamplerSpec::new(Family::Mixture(parts), dim)
        }
        "example-1-1" => {
            require_1d("example-1-1", dim)?;
            let p: Example11Params = params("example-1-1", raw.params)?;
            Ok(SamplerSpec::discrete(example_1_1(p.n)?))
        }
        "lower-bound" => {
            require_1d("lower-bound", dim)?;
            let p: LowerBoundParams = params("lower-bound", raw.params)?;
            Ok(SamplerSpec::discrete(lower_bound_family(p.p, p.delta)?))
        }
        other => Err(Error::SpecFile(format!("unknown family {other:?}"))),
    }
}

/// Parses a JSON distribution spec.
pub fn parse_spec(text: &str) -> Result<SamplerSpec> {
    from_value(serde_json::from_str(text)?)
}

pub const BUILTIN_NAMES: &[&str] = &["example-1-1", "lower-bound", "pareto-mixture"];

/// Named distributions addressable without a spec file.
///
/// * `example-1-1`: `n` (default 1000)
/// * `lower-bound`: `p` (default 0.2), `delta` (default 0.025)
/// * `pareto-mixture`: two mirrored Pareto tails around `+-gap` (default 2)
///   with tail index `tail_index` (default 2.5), equal weights
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<SamplerSpec> {
    let allowed: &[&str] = match name {
        "example-1-1" => &["n"],
        "lower-bound" => &["p", "delta"],
        "pareto-mixture" => &["tail_index", "gap"],
        _ => {
            return Err(Error::SpecFile(format!(
                "unknown builtin {name:?}; valid names: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::SpecFile(format!(
            "builtin {name} has no parameter {bad:?}"
        )));
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    match name {
        "example-1-1" => {
            let n = get("n", 1000.0);
            if n.fract() != 0.0 || n < 0.0 {
                return Err(Error::SpecFile(format!("n must be an integer, got {n}")));
            }
            Ok(SamplerSpec::discrete(example_1_1(n as usize)?))
        }
        "lower-bound" => Ok(SamplerSpec::discrete(lower_bound_family(
            get("p", 0.2),
            get("delta", 0.025),
        )?)),
        _ => {
            let a = get("tail_index", 2.5);
            let gap = get("gap", 2.0);
            SamplerSpec::mixture(vec![
                (0.5, SamplerSpec::pareto(a, gap - 1.0, 1.0)?),
                (0.5, SamplerSpec::pareto(a, 1.0 - gap, -1.0)?),
            ])
        }
    }
}
