//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed even
//! when an earlier criterion fails; exits nonzero if any criterion fails.
//! Set `UPDATE_GOLDEN=1` to regenerate the golden experiment outputs.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use momquant::distributions::{
    centroid_check, exact_distortion, lower_bound_family, magnitude_bound_check,
    optimal_quantizer_1d, DiscreteDistribution,
};
use momquant::experiments::{
    run_example_1_1, run_lower_bound, run_mom_scalar, run_scaling, ExperimentConfig, ExperimentName,
};
use momquant::mom::{median_odd, mom, qom, BlockPartition, BlockPolicy, QuantileLevel};
use momquant::rng::CounterRng;
use momquant::Quantizer;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(started: Instant, budget: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(
        took <= budget,
        format!("took {took:.1?}, budget {budget:?}"),
    )
}

// 1. Block counts for the three estimator policies.
fn block_counts() -> Outcome {
    let t = Instant::now();
    // hand-evaluated: ceil(ln 4)=2, ceil(ln 20)=3, ceil(ln 40)=4, ceil(ln 200)=6, ...
    let table: [(f64, usize, usize, usize); 4] = [
        (0.5, 17, 37, 97),
        (0.1, 25, 61, 129),
        (0.05, 33, 61, 161),
        (0.01, 49, 85, 193),
    ];
    for (delta, m, p, f) in table {
        let got = (
            BlockPolicy::magnitude(delta).ell().unwrap(),
            BlockPolicy::pmin(delta).ell().unwrap(),
            BlockPolicy::parameter_free(delta).ell().unwrap(),
        );
        ensure(
            got == (m, p, f),
            format!("delta {delta}: got {got:?}, want {:?}", (m, p, f)),
        )?;
    }
    within(t, Duration::from_secs(1))?;
    Ok("12 block counts exact".into())
}

// 2. Scalar MOM deviation bound and comparison with the sample mean.
fn scalar_mom() -> Outcome {
    let t = Instant::now();
    let r = run_mom_scalar(&ExperimentConfig::defaults(ExperimentName::MomScalar)).unwrap();
    let mut notes = Vec::new();
    for dist in ["gaussian", "pareto(2.2)", "pareto(3)"] {
        let c = r.cell(8000, dist, "mom").unwrap();
        let limit = 0.01 + 3.0 * c.mc_se;
        notes.push(format!("{dist} mom {}", c.frequency));
        ensure(
            c.frequency <= limit,
            format!("{dist}: MOM failure {} > {limit}", c.frequency),
        )?;
    }
    let mom22 = r.cell(8000, "pareto(2.2)", "mom").unwrap().frequency;
    let mean22 = r.cell(8000, "pareto(2.2)", "mean").unwrap().frequency;
    notes.push(format!("pareto(2.2) mean {mean22}"));
    ensure(
        mean22 > mom22,
        format!("pareto(2.2): sample-mean failure {mean22} does not exceed MOM {mom22}"),
    )?;
    within(t, Duration::from_secs(60))?;
    Ok(notes.join(", "))
}

// 3. Example 1.1: excess exactly 1 iff the heavy atom is missed.
fn example_1_1() -> Outcome {
    let t = Instant::now();
    let r = run_example_1_1(&ExperimentConfig::defaults(ExperimentName::Example11)).unwrap();
    let closed = [(50usize, 0.36417), (1000, 0.36770)];
    let mut notes = Vec::new();
    for ((n, approx), c) in closed.iter().zip(&r.cells) {
        ensure(c.n == *n, "grid order")?;
        ensure(
            (c.expected - approx).abs() < 5e-6,
            format!("closed form {} vs {approx}", c.expected),
        )?;
        ensure(
            (c.frequency - c.expected).abs() <= 0.015,
            format!("N={n}: frequency {} vs {}", c.frequency, c.expected),
        )?;
        ensure(
            c.repeated_heavy > 0 && c.repeated_heavy_max_excess == 0.0,
            format!(
                "N={n}: repeated heavy atom left excess {}",
                c.repeated_heavy_max_excess
            ),
        )?;
        notes.push(format!("N={n}: {} vs {:.5}", c.frequency, c.expected));
    }
    within(t, Duration::from_secs(120))?;
    Ok(notes.join(", "))
}

// 4. Lower-bound family: exact formulas and the ERM crossing frequency.
fn lower_bound() -> Outcome {
    let t = Instant::now();
    let delta = 0.025;
    let truth = lower_bound_family(0.2, delta).unwrap();
    let oracle = optimal_quantizer_1d(&truth, 4).unwrap();
    let want = (1.0 - delta) / 32.0;
    ensure(
        (oracle.distortion - want).abs() <= 1e-12,
        format!("D(A*) {} vs {want}", oracle.distortion),
    )?;
    let mirrored: Vec<f64> = oracle.optimal.as_flat().iter().rev().map(|x| -x).collect();
    let excess = exact_distortion(&truth, &Quantizer::from_scalars(&mirrored).unwrap()).unwrap()
        - oracle.distortion;
    ensure(
        (excess - delta / 16.0).abs() <= 1e-12,
        format!("mirrored excess {excess} vs {}", delta / 16.0),
    )?;

    let r = run_lower_bound(&ExperimentConfig::defaults(ExperimentName::LowerBound)).unwrap();
    let c = &r.cells[0];
    ensure(
        c.n == 1000 && c.pmin == 0.05 && (c.family_delta - delta).abs() < 1e-15,
        "cell parameters",
    )?;
    ensure(
        c.frequency >= 0.15,
        format!("crossing frequency {}", c.frequency),
    )?;
    within(t, Duration::from_secs(180))?;
    Ok(format!(
        "D(A*) exact, mirrored excess exact, crossing frequency {} (se {:.4})",
        c.frequency, c.mc_se
    ))
}

// 5. Log-log slope of mean excess of the p_min estimator against N p_min.
fn scaling() -> Outcome {
    let t = Instant::now();
    let r = run_scaling(&ExperimentConfig::defaults(ExperimentName::Scaling)).unwrap();
    let reg = r.regression("mom-pmin").unwrap();
    ensure(
        reg.cells_used == 15,
        format!("{} cells usable", reg.cells_used),
    )?;
    ensure(
        (-0.70..=-0.30).contains(&reg.slope),
        format!("slope {} outside [-0.70, -0.30]", reg.slope),
    )?;
    within(t, Duration::from_secs(15 * 60))?;
    Ok(format!("slope {}", reg.slope))
}

/// Best distortion over all set partitions into at most `k` groups.
fn exhaustive(xs: &[f64], ws: &[f64], k: usize) -> f64 {
    fn rec(
        i: usize,
        used: usize,
        k: usize,
        lab: &mut [usize],
        xs: &[f64],
        ws: &[f64],
        best: &mut f64,
    ) {
        if i == xs.len() {
            let (mut w, mut s, mut q) = (vec![0.0; used], vec![0.0; used], vec![0.0; used]);
            for j in 0..xs.len() {
                w[lab[j]] += ws[j];
                s[lab[j]] += ws[j] * xs[j];
                q[lab[j]] += ws[j] * xs[j] * xs[j];
            }
            *best = best.min((0..used).map(|g| q[g] - s[g] * s[g] / w[g]).sum());
            return;
        }
        for g in 0..=used.min(k - 1) {
            lab[i] = g;
            rec(i + 1, used.max(g + 1), k, lab, xs, ws, best);
        }
    }
    let mut best = f64::INFINITY;
    rec(0, 0, k, &mut vec![0; xs.len()], xs, ws, &mut best);
    best.max(0.0)
}

// 6. Oracle against exhaustive search, centroid condition, norm bound, gap.
fn oracle_properties() -> Outcome {
    let t = Instant::now();
    let mut rng = CounterRng::new(0xACCE_0006);
    let mut worst_diff: f64 = 0.0;
    let mut checked = 0;
    while checked < 200 {
        let s = 1 + rng.below(12);
        let k = 1 + rng.below(4);
        let xs: Vec<f64> = (0..s)
            .map(|_| (rng.standard_normal() * 4.0 * 1024.0).round() / 1024.0)
            .collect();
        let raw: Vec<f64> = (0..s).map(|_| 0.02 + rng.unit()).collect();
        let total: f64 = raw.iter().sum();
        let ws: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let Ok(dist) = DiscreteDistribution::from_scalars(&xs, &ws) else {
            continue;
        };
        let report = optimal_quantizer_1d(&dist, k).unwrap();
        let diff = (report.distortion - exhaustive(&xs, &ws, k)).abs();
        worst_diff = worst_diff.max(diff);
        ensure(diff <= 1e-10, format!("DP off by {diff} on {xs:?}"))?;
        let dev = centroid_check(&dist, &report.optimal).unwrap();
        ensure(dev <= 1e-10, format!("centroid deviation {dev}"))?;
        ensure(magnitude_bound_check(&report, &dist), "norm bound violated")?;
        ensure(report.delta_gap >= 0.0, "negative gap")?;
        checked += 1;
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!(
        "200 distributions, worst distortion gap {worst_diff:e}"
    ))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

// 7. MOM / QOM algebra on randomized inputs.
fn mom_algebra() -> Outcome {
    let t = Instant::now();
    let mut rng = CounterRng::new(0xACCE_0007);
    for case in 0..10_000 {
        let ell = 2 * rng.below(10) + 1;
        let m = 1 + rng.below(5);
        let n = ell * m + rng.below(ell);
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 10.0).collect();
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let part = BlockPartition::new(n, ell).unwrap();

        let mom_x = mom(&xs, &part).unwrap();
        ensure(
            mom(&neg, &part).unwrap() == -mom_x,
            format!("case {case}: median symmetry"),
        )?;

        let alpha = loop {
            let a = 0.01 + 0.98 * rng.unit();
            if ((ell as f64) * a).fract() != 0.0 && ((ell as f64) * (1.0 - a)).fract() != 0.0 {
                break a;
            }
        };
        let q = qom(&xs, &part, QuantileLevel::new(alpha).unwrap()).unwrap();
        let dual = -qom(&neg, &part, QuantileLevel::new(1.0 - alpha).unwrap()).unwrap();
        ensure(q == dual, format!("case {case}: duality {q} vs {dual}"))?;

        let half = qom(&xs, &part, QuantileLevel::new(0.5).unwrap()).unwrap();
        ensure(
            half == mom_x,
            format!("case {case}: QOM_1/2 {half} vs MOM {mom_x}"),
        )?;

        // shuffle inside each block; the tail outside the blocks is left alone
        let mut shuffled = xs.clone();
        for b in 0..ell {
            let block = &mut shuffled[b * m..(b + 1) * m];
            let perm = rng.permutation(m);
            let copy = block.to_vec();
            for (dst, &src) in block.iter_mut().zip(&perm) {
                *dst = copy[src];
            }
        }
        let after = mom(&shuffled, &part).unwrap();
        ensure(
            close(after, mom_x),
            format!("case {case}: permutation {after} vs {mom_x}"),
        )?;

        // independent median of block means
        let means: Vec<f64> = xs[..ell * m]
            .chunks(m)
            .map(|c| c.iter().sum::<f64>() / m as f64)
            .collect();
        let mut sorted = means.clone();
        sorted.sort_by(f64::total_cmp);
        ensure(
            close(sorted[ell / 2], mom_x) && median_odd(&means).unwrap() == sorted[ell / 2],
            format!("case {case}: median"),
        )?;
    }
    within(t, Duration::from_secs(30))?;
    Ok("10000 cases".into())
}

// 8. Quantile-ratio bound for Exponential(1) values, one value per block.
fn quantile_ratio() -> Outcome {
    let t = Instant::now();
    let trials = 20_000;
    let mut notes = Vec::new();
    for (alpha, ell) in [(0.25, 41usize), (0.75, 41)] {
        let part = BlockPartition::new(ell, ell).unwrap();
        let level = QuantileLevel::new(1.0 - alpha).unwrap();
        let mut rng = CounterRng::new(0xACCE_0008);
        let mut hits = 0usize;
        for _ in 0..trials {
            let xi: Vec<f64> = (0..ell).map(|_| rng.exponential()).collect();
            hits += (qom(&xi, &part, level).unwrap() >= 2.0 / alpha) as usize;
        }
        let p0 = (-alpha * ell as f64 / 6.0).exp();
        let limit = p0 + 3.0 * (p0 * (1.0 - p0) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        ensure(freq <= limit, format!("alpha {alpha}: {freq} > {limit}"))?;
        notes.push(format!("alpha {alpha}: {freq} <= {limit:.5}"));
    }
    within(t, Duration::from_secs(30))?;
    Ok(notes.join(", "))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_momquant")
}

const TINY: [(&str, &[&str]); 5] = [
    ("example11", &["--trials", "20", "--n-grid", "50,200"]),
    ("lowerbound", &["--trials", "20", "--n-grid", "400,1000"]),
    (
        "scaling",
        &[
            "--trials",
            "3",
            "--n-grid",
            "500,1000",
            "--pmin-grid",
            "0.05,0.1",
            "--restarts",
            "2",
        ],
    ),
    ("momscalar", &["--trials", "20", "--n-grid", "1000"]),
    ("uniformqom", &["--trials", "20", "--n-grid", "100,400"]),
];

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        out.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )?;
    Ok(out.stdout)
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn experiments_into(out: &Path) -> Result<(), String> {
    for (name, extra) in TINY {
        let mut args = vec![
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
            "experiment",
            "--name",
            name,
        ];
        args.extend_from_slice(extra);
        run_cli(&args)?;
    }
    let mut args = vec![
        "--seed",
        "7",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
        "experiment",
    ];
    args.extend_from_slice(&[
        "--name",
        "example11",
        "--trials",
        "10",
        "--n-grid",
        "50",
        "--label",
        "json",
    ]);
    run_cli(&args)?;
    Ok(())
}

// 9. Byte-identical outputs for repeated invocations, and against golden files.
fn determinism() -> Outcome {
    let t = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    experiments_into(a.path())?;
    experiments_into(b.path())?;
    let fa = files_under(a.path());
    let fb = files_under(b.path());
    ensure(fa.len() >= 25, format!("only {} files written", fa.len()))?;
    ensure(fa == fb, "repeated experiment runs differ")?;

    let points = a.path().join("points.csv");
    let rows: String = (0..200)
        .map(|i| {
            format!(
                "{},{}\n",
                (i % 7) as f64 * 0.5 - 1.0,
                if i % 13 == 0 { 1e3 } else { (i % 5) as f64 }
            )
        })
        .collect();
    fs::write(&points, rows).unwrap();
    let invocations: [&[&str]; 3] = [
        &[
            "--seed",
            "3",
            "quantize",
            "--input",
            points.to_str().unwrap(),
            "--k",
            "2",
            "--estimator",
            "mom-free",
            "--delta",
            "0.9",
        ],
        &[
            "oracle",
            "--builtin",
            "lower-bound",
            "--param",
            "p=0.2",
            "--param",
            "delta=0.025",
            "--k",
            "4",
        ],
        &[
            "--format",
            "json",
            "oracle",
            "--builtin",
            "example-1-1",
            "--param",
            "n=4",
            "--k",
            "2",
        ],
    ];
    for args in invocations {
        ensure(
            run_cli(args)? == run_cli(args)?,
            format!("{args:?} not repeatable"),
        )?;
    }

    let golden = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = fs::remove_dir_all(&golden);
        for (rel, bytes) in &fa {
            let p = golden.join(rel);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            fs::write(p, bytes).unwrap();
        }
    }
    let fg = files_under(&golden);
    ensure(fg.keys().eq(fa.keys()), "golden file set differs")?;
    for (rel, bytes) in &fa {
        ensure(
            &fg[rel] == bytes,
            format!("{} differs from golden", rel.display()),
        )?;
    }
    within(t, Duration::from_secs(120))?;
    Ok(format!(
        "{} files identical across runs and golden copies",
        fa.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("block counts", block_counts),
        ("scalar MOM bound", scalar_mom),
        ("Example 1.1 reproduction", example_1_1),
        ("lower-bound construction", lower_bound),
        ("scaling exponent", scaling),
        ("oracle properties", oracle_properties),
        ("MOM/QOM algebra", mom_algebra),
        ("quantile-ratio bound", quantile_ratio),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.1}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s) {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
