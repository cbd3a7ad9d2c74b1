//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use belief_dynamics::belief::{
    discount_factor_closed_form, discount_factor_numeric, evidence_scale, log_odds, log_odds_continuous,
    transition_point,
};
use belief_dynamics::cli::{self, Cli, CvFileReport, FitReport};
use belief_dynamics::data::{aggregate, simulate_grid, RecordLabels, SimulationMode};
use belief_dynamics::fit::{bin_weights, Objective};
use belief_dynamics::lrh::{
    cosine, embed, make_concept_space, readout_log_odds, simulate_caa, steer, verify_steering_shift,
    Readout, SpaceMode,
};
use belief_dynamics::{BeliefParams, GridAxes, InterventionPoint};
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn run(args: &[&str]) -> belief_dynamics::Result<cli::RunSummary> {
    let mut full = vec!["belief-dynamics"];
    full.extend_from_slice(args);
    cli::run(Cli::try_parse_from(full).expect("valid flags"))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

const TRUTH: [f64; 4] = [1.0, -4.0, 0.8, 0.3];

fn exact_recovery() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    run(&["simulate", "--exact", "--output-dir", d]).unwrap();
    let input = dir.path().join("records.csv");
    let started = Instant::now();
    run(&["fit", "--input", p(&input), "--output-dir", d]).unwrap();
    let elapsed = started.elapsed();
    let report: FitReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join(cli::FIT_REPORT_FILE)).unwrap()).unwrap();
    let fitted = report.grids[0].fit.params.to_array();
    let worst = fitted
        .iter()
        .zip(TRUTH)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-3 && elapsed < Duration::from_secs(60),
        format!("max |error| {worst:.2e} (< 1e-3), fit time {elapsed:.2?} (< 60 s)"),
    )
}

fn noisy_crossval() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    run(&["simulate", "--trials", "100", "--output-dir", d]).unwrap();
    let input = dir.path().join("records.csv");
    run(&["crossval", "--input", p(&input), "--folds", "10", "--output-dir", d]).unwrap();
    let report: CvFileReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join(cli::CV_REPORT_FILE)).unwrap()).unwrap();
    let grid = &report.grids[0];
    let mut sizes: Vec<usize> = grid.folds.iter().map(|f| f.held_out_magnitudes.len()).collect();
    sizes.sort_unstable();
    let shape_ok = grid.folds.len() == 10 && sizes.iter().all(|&s| s == 3 || s == 4);
    let r = grid.pooled_pearson_r.unwrap_or(f64::NAN);
    outcome(
        r >= 0.97 && shape_ok,
        format!("pooled held-out r {r:.5} (>= 0.97), fold sizes {sizes:?}"),
    )
}

fn bisect(params: &BeliefParams, m: f64) -> f64 {
    let f = |n: f64| log_odds_continuous(params, n, m);
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn transition_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_zero, mut worst_rel) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < 1000 {
        let params = BeliefParams::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-10.0..2.0),
            rng.random_range(0.05..3.0),
            rng.random_range(0.0..0.9),
        )
        .unwrap();
        let m = rng.random_range(-3.0..3.0);
        if params.a() * m + params.b() >= 0.0 {
            continue;
        }
        checked += 1;
        let n_star = transition_point(&params, m);
        worst_zero = worst_zero.max(log_odds_continuous(&params, n_star, m).abs());
        let root = bisect(&params, m);
        worst_rel = worst_rel.max((n_star - root).abs() / root);
    }
    outcome(
        worst_zero <= 1e-9 && worst_rel <= 1e-9,
        format!("1000 sets: max |log-odds at N*| {worst_zero:.1e}, max rel. gap to bisection {worst_rel:.1e}"),
    )
}

fn gradient_check() -> Outcome {
    let params = BeliefParams::new(1.0, -4.0, 0.8, 0.3).unwrap();
    let records = simulate_grid(&params, &GridAxes::standard(), 100, 5, SimulationMode::Binomial, &RecordLabels::default())
        .unwrap();
    let grid = aggregate(&records).into_values().next().unwrap();
    let objective = Objective::new(&grid, &bin_weights(&grid, 15)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = [
            rng.random_range(-2.0..2.0),
            rng.random_range(-6.0..2.0),
            rng.random_range(0.05..2.0),
            rng.random_range(0.05..0.9),
        ];
        let (_, g) = objective.loss_and_gradient(&x);
        for i in 0..4 {
            let (mut up, mut down) = (x, x);
            up[i] += h;
            down[i] -= h;
            let fd = (objective.loss(&up) - objective.loss(&down)) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0));
        }
    }
    outcome(worst < 1e-5, format!("100 points x 4 components: max relative error {worst:.1e} (< 1e-5)"))
}

fn discount_convergence() -> Outcome {
    let gap = |n: u64| {
        let closed = discount_factor_closed_form(n, 1.0, 0.5);
        (discount_factor_numeric(n, 1.0, 0.5) - closed).abs() / closed
    };
    let gaps: Vec<f64> = [100, 1_000, 10_000].map(gap).to_vec();
    outcome(
        gaps[0] < 0.10 && gaps[2] < 0.02 && gaps[0] > gaps[1] && gaps[1] > gaps[2],
        format!(
            "alpha 0.5: gap {:.4} at N=1e2 (< 0.10), {:.4} at 1e3, {:.4} at 1e4 (< 0.02), shrinking",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn steering_shift() -> Outcome {
    let magnitudes: Vec<f64> = (-40..=40).map(|i| f64::from(i) * 0.25).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_slope, mut worst_residual, mut worst_spread) = (0.0f64, 0.0f64, 0.0f64);
    for (dim, concepts, k) in [(16, 4, 1.0), (64, 10, 2.5), (128, 32, 0.3)] {
        let space = make_concept_space(dim, concepts, SpaceMode::ExactOrthogonal, dim as u64).unwrap();
        for concept in 0..concepts {
            let readout = Readout::new(&space, concept, k, -0.7).unwrap();
            let expected = k * readout.a_coeff;
            // Per-unit shift at every magnitude for each representation.
            let mut shifts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for rep_index in 0..100 {
                let betas: Vec<f64> = (0..concepts).map(|_| rng.random_range(-5.0..5.0)).collect();
                let rep = embed(&betas, &space).unwrap();
                if rep_index == 0 {
                    let fit = verify_steering_shift(&space, &readout, &rep, &magnitudes).unwrap();
                    worst_slope = worst_slope.max((fit.slope - expected).abs());
                    worst_residual = worst_residual.max(fit.max_residual);
                }
                let base = readout_log_odds(&rep, &readout, &space);
                for (j, &m) in magnitudes.iter().enumerate() {
                    let after = readout_log_odds(&steer(&rep, &space, concept, m).unwrap(), &readout, &space);
                    shifts.entry(j).or_default().push(after - base);
                }
            }
            for (j, values) in &shifts {
                let target = expected * magnitudes[*j];
                for v in values {
                    worst_spread = worst_spread.max((v - target).abs());
                }
            }
        }
    }
    outcome(
        worst_slope < 1e-10 && worst_residual < 1e-10 && worst_spread < 1e-10,
        format!(
            "m in [-10, 10]: slope error {worst_slope:.1e}, residual {worst_residual:.1e}, shift deviation over 100 inputs {worst_spread:.1e} (all < 1e-10)"
        ),
    )
}

fn caa_recovery() -> Outcome {
    let space = make_concept_space(64, 1, SpaceMode::ExactOrthogonal, 1).unwrap();
    let direction = space.direction(0);
    let estimate = simulate_caa(direction, 1.0, 1.0, 1_000_000, 12345).unwrap();
    let cos = cosine(&estimate, direction);
    outcome(cos >= 0.999, format!("dim 64, 1e6 samples: cosine {cos:.6} (>= 0.999)"))
}

fn additivity() -> Outcome {
    let axes = GridAxes::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_ulps = 0.0f64;
    let mut points = 0;
    for trial in 0..20 {
        let params = if trial == 0 {
            BeliefParams::from_array(TRUTH).unwrap()
        } else {
            BeliefParams::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(0.01..3.0),
                rng.random_range(0.0..0.95),
            )
            .unwrap()
        };
        for point in axes.points() {
            let z = log_odds(&params, point);
            let z0 = log_odds(&params, InterventionPoint::new(point.shots, 0.0));
            let am = params.a() * point.magnitude;
            // Rounding happens at the size of the largest summand, not of the result.
            let evidence = params.gamma() * evidence_scale(f64::from(point.shots), params.alpha());
            let scale = [z, z0, am, params.b(), evidence]
                .iter()
                .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
            worst_ulps = worst_ulps.max(((z - z0) - am).abs() / (scale * f64::EPSILON));
            points += 1;
        }
    }
    outcome(
        worst_ulps <= 4.0,
        format!("{points} grid points: max |(z(N,m) - z(N,0)) - a*m| = {worst_ulps:.1} ulp of the largest summand (<= 4)"),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = p(dir.path());
    let records = dir.path().join("records.csv");
    let report = dir.path().join(cli::FIT_REPORT_FILE);
    let quick = ["--basin-hops", "200", "--refine-top-k", "10"];
    let mut runs: Vec<(&str, Vec<String>)> = vec![
        ("simulate", vec!["simulate".into(), "--seed".into(), "3".into()]),
        ("fit", vec!["fit".into(), "--input".into(), p(&records).into()]),
        ("crossval", vec!["crossval".into(), "--input".into(), p(&records).into()]),
        ("boundary", vec!["boundary".into(), "--from-report".into(), p(&report).into()]),
        ("lrh-verify", vec!["lrh-verify".into(), "--caa-samples".into(), "100000".into()]),
    ];
    for (name, args) in &mut runs {
        if matches!(*name, "fit" | "crossval") {
            args.extend(quick.iter().map(|s| s.to_string()));
        }
        args.extend(["--output-dir".to_string(), d.to_string()]);
    }
    let mut mismatched = Vec::new();
    let mut files = 0;
    for (name, args) in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&args).unwrap();
        let first = snapshot(dir.path());
        run(&args).unwrap();
        let second = snapshot(dir.path());
        files = second.len();
        if first != second {
            mismatched.push(*name);
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("5 subcommands run twice, {files} files compared byte-for-byte, mismatches: {mismatched:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("parameter recovery, exact grid", exact_recovery),
        ("held-out correlation, binomial grid", noisy_crossval),
        ("transition-point consistency", transition_consistency),
        ("loss gradient vs finite differences", gradient_check),
        ("discount factor vs closed form", discount_convergence),
        ("steering shift is k*|d|^2 per unit", steering_shift),
        ("difference-of-means direction recovery", caa_recovery),
        ("steering is additive in log-odds", additivity),
        ("byte-identical reruns", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.passed {
            failures += 1;
        }
        println!(
            "{} {}. {}: {}",
            if result.passed { "PASS" } else { "FAIL" },
            i + 1,
            name,
            result.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
