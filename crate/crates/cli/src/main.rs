//! `momquant`: fit quantizers on CSV data, query exact 1-D oracles and run
//! the Monte-Carlo experiments.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 fit completed but no
//! candidate satisfied the estimator's constraint.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use momquant::distributions::{builtin, optimal_quantizer_1d, parse_spec, BUILTIN_NAMES};
use momquant::estimators::{fit, EstimatorConfig, EstimatorKind, FitResult, SearchStrategy};
use momquant::experiments::{self, emit, ExperimentConfig, ExperimentName, OutputFormat};
use momquant::Dataset;

#[derive(Parser)]
#[command(
    name = "momquant",
    version,
    about = "Median-of-means robust k-means quantization"
)]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for experiment reports.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Erm,
    MomM,
    MomPmin,
    MomFree,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a quantizer to a headerless CSV of points.
    Quantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        estimator: Estimator,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Ball radius M (mom-m).
        #[arg(long)]
        magnitude: Option<f64>,
        /// Minimal optimal cell mass p_min (mom-pmin).
        #[arg(long)]
        pmin: Option<f64>,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Exact dynamic program (erm on 1-D data).
        #[arg(long)]
        exact: bool,
        /// Leave the coordinatewise MOM mean out of the candidate pool.
        #[arg(long)]
        no_singleton: bool,
    },
    /// Exact optimal quantizer of a 1-D discrete distribution.
    Oracle {
        /// JSON distribution spec.
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        dist: Option<PathBuf>,
        /// Named distribution: example-1-1, lower-bound, pareto-mixture.
        #[arg(long)]
        builtin: Option<String>,
        /// Builtin parameter as key=value; repeatable.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long)]
        k: usize,
    },
    /// Run a named Monte-Carlo experiment and write its report.
    Experiment {
        /// example11, lowerbound, scaling, momscalar or uniformqom.
        #[arg(long)]
        name: String,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Comma-separated p_min values.
        #[arg(long, value_delimiter = ',')]
        pmin_grid: Option<Vec<f64>>,
        #[arg(long)]
        delta: Option<f64>,
        /// Comma-separated estimator labels (scaling).
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Quantile level (uniformqom).
        #[arg(long)]
        alpha: Option<f64>,
        /// Fixed parameter delta of the five-point family (lowerbound, scaling);
        /// default 1/sqrt(8 N p).
        #[arg(long, allow_hyphen_values = true)]
        family_delta: Option<f64>,
        /// Report subdirectory name.
        #[arg(long, default_value = "run")]
        label: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Quantize {
            input,
            k,
            estimator,
            delta,
            magnitude,
            pmin,
            restarts,
            exact,
            no_singleton,
        } => {
            let kind = match estimator {
                Estimator::Erm => EstimatorKind::Erm,
                Estimator::MomFree => EstimatorKind::MomFree,
                Estimator::MomM => EstimatorKind::MomMagnitude {
                    magnitude: magnitude.ok_or_else(|| {
                        anyhow!("--estimator mom-m requires --magnitude (the center magnitude bound M)")
                    })?,
                },
                Estimator::MomPmin => EstimatorKind::MomPmin {
                    pmin: pmin.ok_or_else(|| {
                        anyhow!("--estimator mom-pmin requires --pmin (the minimal optimal cell mass p_min)")
                    })?,
                },
            };
            let data = read_points(input)?;
            let search = SearchStrategy {
                restarts: *restarts,
                exact_1d: *exact,
                include_mom_mean_singleton: !no_singleton,
                ..SearchStrategy::default()
            };
            let config = EstimatorConfig::new(kind, *k, *delta).with_search(search);
            let result = fit(&data, &config, cli.seed)?;
            print!("{}", render_fit(&result, cli.format)?);
            if let Some(w) = &result.warning {
                eprintln!("warning: {w}");
            }
            Ok(if result.feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Oracle {
            dist,
            builtin: name,
            params,
            k,
        } => {
            let spec = match (dist, name) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    parse_spec(&text)?
                }
                (None, Some(name)) => builtin(name, &parse_params(params)?)?,
                (None, None) => bail!("give --dist or --builtin ({})", BUILTIN_NAMES.join(", ")),
            };
            if spec.dim() != 1 {
                bail!("exact oracle is 1-D only (spec has dim {})", spec.dim());
            }
            let discrete = spec.as_discrete().ok_or_else(|| {
                anyhow!(
                    "exact oracle needs a discrete distribution, got {}",
                    spec.tag()
                )
            })?;
            let report = optimal_quantizer_1d(discrete, *k)?;
            let centers: Vec<Vec<f64>> = report.optimal.to_vecs();
            let fields = [
                ("distortion", report.distortion),
                ("pmin", report.pmin),
                ("M", report.magnitude_m),
                ("delta_gap", report.delta_gap),
                ("radius_R", report.radius_r),
            ];
            print!("{}", render_record(&centers, &fields, &[], cli.format)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment {
            name,
            trials,
            n_grid,
            pmin_grid,
            delta,
            estimators,
            restarts,
            alpha,
            family_delta,
            label,
        } => {
            let name: ExperimentName = name.parse()?;
            let mut config = ExperimentConfig::defaults(name);
            config.base_seed = cli.seed;
            if let Some(t) = trials {
                config.trials = *t;
            }
            if let Some(g) = n_grid {
                config.n_grid = g.clone();
            }
            if let Some(g) = pmin_grid {
                config.pmin_grid = Some(g.clone());
            }
            if let Some(d) = delta {
                config.delta = *d;
            }
            if let Some(e) = estimators {
                config.estimators = e.clone();
            }
            if let Some(r) = restarts {
                config.restarts = *r;
            }
            if let Some(a) = alpha {
                config.alpha = *a;
            }
            if family_delta.is_some() {
                config.family_delta = *family_delta;
            }
            config.validate()?;
            let report = experiments::run(&config)?;
            let format = match cli.format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
            let dir = emit(&report, &cli.out, label, format)?;
            print!(
                "{}",
                match format {
                    OutputFormat::Csv => experiments::render_csv(&report.summary)?,
                    OutputFormat::Json => experiments::render_json(&report.summary)?,
                }
            );
            eprintln!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_points(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let point = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: row {} is not a list of reals", path.display(), i + 1))?;
        points.push(point);
    }
    if points.is_empty() {
        bail!("{} holds no points", path.display());
    }
    Dataset::new(points).with_context(|| format!("reading {}", path.display()))
}

fn parse_params(params: &[String]) -> Result<BTreeMap<String, f64>> {
    params
        .iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| anyhow!("--param expects KEY=VALUE, got {p:?}"))?;
            let v: f64 = v
                .trim()
                .parse()
                .with_context(|| format!("--param {k}: not a real"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn render_fit(result: &FitResult, format: Format) -> Result<String> {
    let centers = result.quantizer.to_vecs();
    let mut fields = vec![("criterion", result.criterion_value)];
    fields.extend(result.diagnostics.iter().map(|(k, v)| (k.as_str(), *v)));
    let ell = result.ell.map(|l| l.to_string()).unwrap_or_default();
    let extra = [
        (
            "ell",
            ell.clone(),
            result.ell.map(Value::from).unwrap_or(Value::Null),
        ),
        (
            "feasible",
            result.feasible.to_string(),
            Value::from(result.feasible),
        ),
        (
            "candidates_evaluated",
            result.candidates_evaluated.to_string(),
            Value::from(result.candidates_evaluated),
        ),
    ];
    render_record(&centers, &fields, &extra, format)
}

/// CSV: one `center,x1,...,xd` line per center, then one `key,value` line
/// per field. JSON: an object with `centers` and the same keys.
fn render_record(
    centers: &[Vec<f64>],
    fields: &[(&str, f64)],
    extra: &[(&str, String, Value)],
    format: Format,
) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .flexible(true)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for c in centers {
                let mut row = vec!["center".to_string()];
                row.extend(c.iter().map(f64::to_string));
                w.write_record(&row)?;
            }
            for (k, v) in fields {
                w.write_record([k.to_string(), v.to_string()])?;
            }
            for (k, text, _) in extra {
                w.write_record([k.to_string(), text.clone()])?;
            }
            Ok(String::from_utf8(
                w.into_inner().map_err(|e| anyhow!("{e}"))?,
            )?)
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("centers".into(), json!(centers));
            for (k, v) in fields {
                obj.insert(k.to_string(), json!(v));
            }
            for (k, _, v) in extra {
                obj.insert(k.to_string(), v.clone());
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj))?;
            s.push('\n');
            Ok(s)
        }
    }
}
