//! Command-line workflows.
//!
//! Every subcommand reads an optional config file (TOML, or JSON by
//! extension), applies flag overrides, writes its outputs plus the fully
//! resolved config into the output directory, and prints a short summary.
//! Exit status: 0 on success, 2 for invalid input, 3 for numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::belief::BeliefParams;
use crate::data::{
    aggregate, emit_curves, emit_heatmap, load_records, simulate_grid, write_records, BehaviorGrid,
    GridAxes, GridId, IngestWarning, PhaseBoundary, RecordFormat, RecordLabels, SimulationMode,
};
use crate::error::{Error, Result};
use crate::fit::{cross_validate, fit, FitConfig, FitResult};
use crate::lrh::{
    cosine, embed, make_concept_space, readout_log_odds, simulate_caa, steer,
    verify_steering_shift, Readout, SpaceMode,
};

pub const OUTPUT_DIR_ENV: &str = "BELIEF_DYNAMICS_OUTPUT_DIR";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const CV_REPORT_FILE: &str = "crossval_report.json";
pub const LRH_REPORT_FILE: &str = "lrh_report.json";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const FIT_REPORT_SCHEMA: &str = "belief-dynamics/fit-report/v1";

/// Name of the resolved-config file a subcommand writes next to its outputs.
pub fn resolved_config_file(command: &str) -> String {
    format!("{command}.resolved.json")
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "belief-dynamics", version, about = "Fit and probe the belief-dynamics model of ICL and steering")]
pub struct Cli {
    /// Config file (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,

    /// Worker threads for fold and candidate evaluation; never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate behavioral records from known parameters.
    Simulate(SimulateFlags),
    /// Fit the model to every (dataset, model) grid in a record file.
    Fit(FitFlags),
    /// Cross-validate over contiguous magnitude folds.
    Crossval(CrossvalFlags),
    /// Tabulate the phase boundary N*(m).
    Boundary(BoundaryFlags),
    /// Check steering and difference-of-means estimation in a toy world.
    LrhVerify(LrhFlags),
}

#[derive(Debug, Args, Default)]
pub struct OptimizerFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of log2(N) bins for loss weighting.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub basin_hops: Option<usize>,
    #[arg(long)]
    pub refine_top_k: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateFlags {
    /// True parameters as `a,b,gamma,alpha`.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub magnitudes: Option<String>,
    #[arg(long)]
    pub shots: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write exact posterior means instead of binomial draws.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub jsonl: bool,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub layer: Option<i64>,
}

#[derive(Debug, Args)]
pub struct FitFlags {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
}

#[derive(Debug, Args)]
pub struct CrossvalFlags {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub optimizer: OptimizerFlags,
}

#[derive(Debug, Args)]
pub struct BoundaryFlags {
    /// Parameters as `a,b,gamma,alpha`.
    #[arg(long, conflicts_with = "from_report", allow_hyphen_values = true)]
    pub params: Option<String>,
    /// Take parameters from a fit report.
    #[arg(long)]
    pub from_report: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub magnitudes: Option<String>,
}

#[derive(Debug, Args)]
pub struct LrhFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub concepts: Option<usize>,
    /// Use random near-orthogonal directions instead of an orthonormal set.
    #[arg(long)]
    pub random: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub magnitudes: Option<String>,
    #[arg(long)]
    pub caa_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: [f64; 4],
    pub magnitudes: Vec<f64>,
    pub shots: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    pub exact: bool,
    pub format: RecordFormat,
    pub labels: RecordLabels,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let axes = GridAxes::standard();
        SimulateConfig {
            params: [1.0, -4.0, 0.8, 0.3],
            magnitudes: axes.magnitudes,
            shots: axes.shot_values,
            trials: 100,
            seed: 0,
            exact: false,
            format: RecordFormat::Csv,
            labels: RecordLabels::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitCommandConfig {
    pub input: Option<PathBuf>,
    pub optimizer: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalConfig {
    pub input: Option<PathBuf>,
    pub folds: usize,
    pub optimizer: FitConfig,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            input: None,
            folds: 10,
            optimizer: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub params: Option<[f64; 4]>,
    pub from_report: Option<PathBuf>,
    pub dataset_id: Option<String>,
    pub model_id: Option<String>,
    pub magnitudes: Vec<f64>,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            params: None,
            from_report: None,
            dataset_id: None,
            model_id: None,
            magnitudes: GridAxes::standard().magnitudes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrhConfig {
    pub dim: usize,
    pub concepts: usize,
    pub mode: SpaceMode,
    pub weight_scale: f64,
    pub bias: f64,
    pub magnitudes: Vec<f64>,
    /// Random representations used for the input-invariance check.
    pub representations: usize,
    pub shift_tolerance: f64,
    pub caa_dim: usize,
    pub caa_samples: usize,
    pub caa_noise: f64,
    pub caa_min_cosine: f64,
    pub seed: u64,
}

impl Default for LrhConfig {
    fn default() -> Self {
        LrhConfig {
            dim: 64,
            concepts: 8,
            mode: SpaceMode::ExactOrthogonal,
            weight_scale: 1.0,
            bias: -0.5,
            magnitudes: (-20..=20).map(|i| f64::from(i) / 2.0).collect(),
            representations: 100,
            shift_tolerance: 1e-10,
            caa_dim: 64,
            caa_samples: 1_000_000,
            caa_noise: 1.0,
            caa_min_cosine: 0.999,
            seed: 0,
        }
    }
}

/// Everything a run can be configured with; one section per subcommand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub simulate: SimulateConfig,
    pub fit: FitCommandConfig,
    pub crossval: CrossvalConfig,
    pub boundary: BoundaryConfig,
    pub lrh_verify: LrhConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))
        }
    }
}

/// Resolved configuration as written next to a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig<T> {
    pub command: String,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub settings: T,
}

pub fn parse_list<T: std::str::FromStr>(what: &'static str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Error::invalid(what, format!("{s:?}: {e}")))
        })
        .collect()
}

pub fn parse_params(raw: &str) -> Result<BeliefParams> {
    let values: Vec<f64> = parse_list("params", raw)?;
    let array: [f64; 4] = values.try_into().map_err(|v: Vec<f64>| {
        Error::invalid("params", format!("expected a,b,gamma,alpha; got {} values", v.len()))
    })?;
    BeliefParams::from_array(array)
}

fn apply_optimizer_flags(config: &mut FitConfig, flags: &OptimizerFlags) {
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if let Some(v) = flags.bins {
        config.n_bins = v;
    }
    if let Some(v) = flags.basin_hops {
        config.basin_hop_iterations = v;
    }
    if let Some(v) = flags.refine_top_k {
        config.refine_top_k = v;
    }
    if let Some(v) = flags.max_iterations {
        config.max_iterations = v;
    }
}

/// Outcome of a subcommand: files written and a human summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub lines: Vec<String>,
    /// False when a verification ran but did not pass.
    pub passed: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn slug(id: &GridId) -> String {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect()
    };
    format!("{}__{}", clean(&id.dataset_id), clean(&id.model_id))
}

struct Context {
    output_dir: PathBuf,
    workers: Option<usize>,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn write_resolved<T: Serialize>(&self, command: &str, settings: &T) -> Result<PathBuf> {
        let path = self.path(&resolved_config_file(command));
        write_json(
            &path,
            &ResolvedConfig {
                command: command.to_string(),
                output_dir: self.output_dir.clone(),
                workers: self.workers,
                settings,
            },
        )?;
        Ok(path)
    }
}

fn load_grids(input: Option<&Path>) -> Result<Vec<(GridId, BehaviorGrid)>> {
    let input = input.ok_or_else(|| Error::invalid("input", "no --input given"))?;
    let ingest = load_records(input, RecordFormat::from_path(input))?;
    if ingest.warnings.contains(&IngestWarning::EmptyFile) {
        return Err(Error::NoData("input file holds no records"));
    }
    Ok(aggregate(&ingest.records).into_iter().collect())
}

/// Per-grid entry of a fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFit {
    pub dataset_id: String,
    pub model_id: String,
    pub n_cells: usize,
    pub fit: FitResult,
    pub boundary: PhaseBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub grids: Vec<GridFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub held_out_magnitudes: Vec<f64>,
    pub params: BeliefParams,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCv {
    pub dataset_id: String,
    pub model_id: String,
    pub folds: Vec<FoldSummary>,
    pub fold_alphas: Vec<f64>,
    pub mean_alpha: f64,
    pub pooled_pearson_r: Option<f64>,
    pub n_held_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFileReport {
    pub grids: Vec<GridCv>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrhReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn cmd_simulate(ctx: &Context, config: &SimulateConfig) -> Result<RunSummary> {
    let params = BeliefParams::from_array(config.params)?;
    let axes = GridAxes::new(config.magnitudes.clone(), config.shots.clone())?;
    if axes.is_empty() {
        return Err(Error::invalid("grid axes", "need at least one magnitude and shot value"));
    }
    let mode = if config.exact {
        SimulationMode::Exact
    } else {
        SimulationMode::Binomial
    };
    let records = simulate_grid(&params, &axes, config.trials, config.seed, mode, &config.labels)?;
    let name = match config.format {
        RecordFormat::Csv => "records.csv",
        RecordFormat::JsonLines => "records.jsonl",
    };
    let path = ctx.path(name);
    write_records(&path, config.format, &records)?;
    let resolved = ctx.write_resolved("simulate", config)?;
    Ok(RunSummary {
        lines: vec![format!(
            "simulated {} cells ({} magnitudes x {} shot values, {})",
            records.len(),
            axes.magnitudes.len(),
            axes.shot_values.len(),
            if config.exact { "exact" } else { "binomial" }
        )],
        outputs: vec![path, resolved],
        passed: true,
    })
}

fn cmd_fit(ctx: &Context, config: &FitCommandConfig) -> Result<RunSummary> {
    config.optimizer.validate()?;
    let grids = load_grids(config.input.as_deref())?;
    let mut outputs = Vec::new();
    let mut lines = Vec::new();
    let mut report = FitReport {
        schema: FIT_REPORT_SCHEMA.into(),
        grids: Vec::new(),
    };
    for (id, grid) in grids {
        let result = fit(&grid, &config.optimizer)?;
        let boundary = PhaseBoundary::from_params(&result.params, grid.magnitudes())?;
        let axes = GridAxes::new(grid.magnitudes().to_vec(), grid.shot_values().to_vec())?;
        let stem = slug(&id);
        for (suffix, write) in [
            ("heatmap.csv", 0),
            ("curves.csv", 1),
            ("boundary.csv", 2),
        ] {
            let path = ctx.path(&format!("{stem}.{suffix}"));
            match write {
                0 => {
                    emit_heatmap(&result.params, &axes, &path)?;
                }
                1 => emit_curves(&result.params, &axes, &path)?,
                _ => boundary.write_csv(&path)?,
            }
            outputs.push(path);
        }
        let p = result.params;
        lines.push(format!(
            "{}/{}: a={:.6} b={:.6} gamma={:.6} alpha={:.6} loss={:.6} converged={}",
            id.dataset_id,
            id.model_id,
            p.a(),
            p.b(),
            p.gamma(),
            p.alpha(),
            result.final_loss,
            result.converged
        ));
        report.grids.push(GridFit {
            dataset_id: id.dataset_id,
            model_id: id.model_id,
            n_cells: grid.len(),
            fit: result,
            boundary,
        });
    }
    let path = ctx.path(FIT_REPORT_FILE);
    write_json(&path, &report)?;
    outputs.insert(0, path);
    outputs.push(ctx.write_resolved("fit", config)?);
    Ok(RunSummary {
        outputs,
        lines,
        passed: true,
    })
}

fn cmd_crossval(ctx: &Context, config: &CrossvalConfig) -> Result<RunSummary> {
    config.optimizer.validate()?;
    let grids = load_grids(config.input.as_deref())?;
    let mut outputs = Vec::new();
    let mut lines = Vec::new();
    let mut file_report = CvFileReport { grids: Vec::new() };
    for (id, grid) in grids {
        let report = cross_validate(&grid, &config.optimizer, config.folds)?;
        let held_path = ctx.path(&format!("{}.heldout.csv", slug(&id)));
        let mut text = String::from("magnitude,shots,observed,predicted\n");
        for cell in report.per_fold.iter().flat_map(|f| &f.cells) {
            text.push_str(&format!(
                "{},{},{},{}\n",
                cell.magnitude,
                cell.shots,
                crate::data::emit::render_real(cell.observed),
                crate::data::emit::render_real(cell.predicted)
            ));
        }
        fs::write(&held_path, text).map_err(|e| Error::io(&held_path, e))?;
        outputs.push(held_path);
        lines.push(format!(
            "{}/{}: pooled held-out r = {}, mean alpha = {:.6}",
            id.dataset_id,
            id.model_id,
            report
                .pooled_pearson_r
                .map_or("undefined (zero variance)".to_string(), |r| format!("{r:.6}")),
            report.mean_alpha
        ));
        file_report.grids.push(GridCv {
            dataset_id: id.dataset_id,
            model_id: id.model_id,
            fold_alphas: report.fold_alphas(),
            folds: report
                .per_fold
                .iter()
                .map(|f| FoldSummary {
                    held_out_magnitudes: f.held_out_magnitudes.clone(),
                    params: f.fit.params,
                    final_loss: f.fit.final_loss,
                    converged: f.fit.converged,
                })
                .collect(),
            mean_alpha: report.mean_alpha,
            pooled_pearson_r: report.pooled_pearson_r,
            n_held_out: report.per_fold.iter().map(|f| f.cells.len()).sum(),
        });
    }
    let path = ctx.path(CV_REPORT_FILE);
    write_json(&path, &file_report)?;
    outputs.insert(0, path);
    outputs.push(ctx.write_resolved("crossval", config)?);
    Ok(RunSummary {
        outputs,
        lines,
        passed: true,
    })
}

fn boundary_params(config: &BoundaryConfig) -> Result<BeliefParams> {
    match (&config.params, &config.from_report) {
        (Some(p), None) => BeliefParams::from_array(*p),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let report: FitReport = serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let matches = |g: &&GridFit| {
                config.dataset_id.as_ref().is_none_or(|d| &g.dataset_id == d)
                    && config.model_id.as_ref().is_none_or(|m| &g.model_id == m)
            };
            report
                .grids
                .iter()
                .find(matches)
                .map(|g| g.fit.params)
                .ok_or_else(|| Error::invalid("fit report", "no grid matches the requested dataset/model"))
        }
        (Some(_), Some(_)) => Err(Error::invalid("boundary", "give either params or a fit report, not both")),
        (None, None) => Err(Error::invalid("boundary", "need params or a fit report")),
    }
}

fn cmd_boundary(ctx: &Context, config: &BoundaryConfig) -> Result<RunSummary> {
    let params = boundary_params(config)?;
    if config.magnitudes.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("magnitudes", "must be finite"));
    }
    let path = ctx.path(BOUNDARY_FILE);
    let boundary = crate::data::emit_phase_boundary(&params, &config.magnitudes, &path)?;
    let resolved = ctx.write_resolved("boundary", config)?;
    let crossing = boundary.entries.iter().find(|e| e.n_star == 0.0);
    Ok(RunSummary {
        outputs: vec![path, resolved],
        lines: vec![format!(
            "{} magnitudes; belief in c dominates at zero context from m = {}",
            boundary.entries.len(),
            crossing.map_or("(none in range)".to_string(), |e| e.magnitude.to_string())
        )],
        passed: true,
    })
}

fn check(name: impl Into<String>, value: f64, threshold: f64, passed: bool) -> Check {
    Check {
        name: name.into(),
        value,
        threshold,
        passed,
    }
}

fn cmd_lrh_verify(ctx: &Context, config: &LrhConfig) -> Result<RunSummary> {
    if config.concepts == 0 || config.dim == 0 || config.caa_dim == 0 {
        return Err(Error::invalid("lrh config", "dimensions and concept count must be positive"));
    }
    if config.magnitudes.len() < 2 {
        return Err(Error::invalid("lrh config", "need at least two magnitudes"));
    }
    let space = make_concept_space(config.dim, config.concepts, config.mode, config.seed)?;
    let mut checks = Vec::new();

    let mut rng_seed = config.seed.wrapping_add(1);
    let mut random_betas = |n: usize| -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
        rng_seed = rng_seed.wrapping_add(1);
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    };

    let base = embed(&random_betas(space.len()), &space)?;
    let exact = config.mode == SpaceMode::ExactOrthogonal;
    let mut worst_slope: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for concept in 0..space.len() {
        let readout = Readout::new(&space, concept, config.weight_scale, config.bias)?;
        let fit = verify_steering_shift(&space, &readout, &base, &config.magnitudes)?;
        let expected = config.weight_scale * readout.a_coeff;
        worst_slope = worst_slope.max((fit.slope - expected).abs() / expected.abs().max(1.0));
        worst_residual = worst_residual.max(fit.max_residual);
    }
    checks.push(check(
        "slope equals k*|d|^2 (max relative error)",
        worst_slope,
        config.shift_tolerance,
        worst_slope <= config.shift_tolerance,
    ));
    checks.push(check(
        "linear in m (max residual)",
        worst_residual,
        config.shift_tolerance,
        worst_residual <= config.shift_tolerance,
    ));

    let readout = Readout::new(&space, 0, config.weight_scale, config.bias)?;
    let mut worst_shift: f64 = 0.0;
    for _ in 0..config.representations {
        let rep = embed(&random_betas(space.len()), &space)?;
        let before = readout_log_odds(&rep, &readout, &space);
        for &m in &config.magnitudes {
            let after = readout_log_odds(&steer(&rep, &space, 0, m)?, &readout, &space);
            let expected = config.weight_scale * m * readout.a_coeff;
            worst_shift = worst_shift.max(((after - before) - expected).abs() / expected.abs().max(1.0));
        }
    }
    checks.push(check(
        format!("shift independent of input over {} representations", config.representations),
        worst_shift,
        config.shift_tolerance,
        worst_shift <= config.shift_tolerance,
    ));

    let caa_space = make_concept_space(config.caa_dim, 1, SpaceMode::ExactOrthogonal, config.seed)?;
    let direction = caa_space.direction(0);
    let estimate = simulate_caa(direction, 1.0, config.caa_noise, config.caa_samples, config.seed)?;
    let cos = cosine(&estimate, direction);
    checks.push(check(
        format!("difference-of-means cosine ({} samples)", config.caa_samples),
        cos,
        config.caa_min_cosine,
        cos >= config.caa_min_cosine,
    ));

    let passed = checks.iter().all(|c| c.passed);
    let path = ctx.path(LRH_REPORT_FILE);
    write_json(
        &path,
        &LrhReport {
            checks: checks.clone(),
            passed,
        },
    )?;
    let resolved = ctx.write_resolved("lrh-verify", config)?;
    let mut lines: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "[{}] {}: {:e} (threshold {:e})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            )
        })
        .collect();
    if !exact {
        lines.push(format!("mutual coherence of directions: {:e}", space.max_abs_cosine()));
    }
    Ok(RunSummary {
        outputs: vec![path, resolved],
        lines,
        passed,
    })
}

/// Merges flags into the config and runs the subcommand.
pub fn run(cli: Cli) -> Result<RunSummary> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let output_dir = cli
        .output_dir
        .or(config.output_dir.take())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&output_dir).map_err(|e| Error::io(&output_dir, e))?;
    let workers = cli.workers.or(config.workers);
    let ctx = Context {
        output_dir,
        workers,
    };

    let job = move || match cli.command {
        Command::Simulate(flags) => {
            let mut c = config.simulate;
            if let Some(p) = &flags.params {
                c.params = parse_params(p)?.to_array();
            }
            if let Some(m) = &flags.magnitudes {
                c.magnitudes = parse_list("magnitudes", m)?;
            }
            if let Some(s) = &flags.shots {
                c.shots = parse_list("shots", s)?;
            }
            c.trials = flags.trials.unwrap_or(c.trials);
            c.seed = flags.seed.unwrap_or(c.seed);
            c.exact |= flags.exact;
            if flags.jsonl {
                c.format = RecordFormat::JsonLines;
            }
            if let Some(d) = flags.dataset {
                c.labels.dataset_id = d;
            }
            if let Some(m) = flags.model {
                c.labels.model_id = m;
            }
            c.labels.layer = flags.layer.unwrap_or(c.labels.layer);
            cmd_simulate(&ctx, &c)
        }
        Command::Fit(flags) => {
            let mut c = config.fit;
            c.input = flags.input.or(c.input);
            apply_optimizer_flags(&mut c.optimizer, &flags.optimizer);
            cmd_fit(&ctx, &c)
        }
        Command::Crossval(flags) => {
            let mut c = config.crossval;
            c.input = flags.input.or(c.input);
            c.folds = flags.folds.unwrap_or(c.folds);
            apply_optimizer_flags(&mut c.optimizer, &flags.optimizer);
            cmd_crossval(&ctx, &c)
        }
        Command::Boundary(flags) => {
            let mut c = config.boundary;
            if let Some(p) = &flags.params {
                c.params = Some(parse_params(p)?.to_array());
                c.from_report = None;
            }
            if let Some(r) = flags.from_report {
                c.from_report = Some(r);
                c.params = None;
            }
            c.dataset_id = flags.dataset.or(c.dataset_id);
            c.model_id = flags.model.or(c.model_id);
            if let Some(m) = &flags.magnitudes {
                c.magnitudes = parse_list("magnitudes", m)?;
            }
            cmd_boundary(&ctx, &c)
        }
        Command::LrhVerify(flags) => {
            let mut c = config.lrh_verify;
            c.dim = flags.dim.unwrap_or(c.dim);
            c.concepts = flags.concepts.unwrap_or(c.concepts);
            if flags.random {
                c.mode = SpaceMode::RandomNearOrthogonal;
            }
            if let Some(m) = &flags.magnitudes {
                c.magnitudes = parse_list("magnitudes", m)?;
            }
            c.caa_samples = flags.caa_samples.unwrap_or(c.caa_samples);
            c.seed = flags.seed.unwrap_or(c.seed);
            cmd_lrh_verify(&ctx, &c)
        }
    };

    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(job),
        None => job(),
    }
}

/// Exit status for a finished run.
pub fn exit_code(outcome: &Result<RunSummary>) -> i32 {
    match outcome {
        Ok(summary) if summary.passed => EXIT_OK,
        Ok(_) => EXIT_NUMERICAL,
        Err(e) if e.is_numerical() => EXIT_NUMERICAL,
        Err(_) => EXIT_VALIDATION,
    }
}

/// Parses the process arguments, runs, prints the summary, and returns the exit status.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let outcome = run(cli);
    // A closed stdout (e.g. piped into `head`) must not turn success into a panic.
    let mut out = std::io::stdout().lock();
    match &outcome {
        Ok(summary) => {
            for line in &summary.lines {
                let _ = writeln!(out, "{line}");
            }
            for path in &summary.outputs {
                let _ = writeln!(out, "wrote {}", path.display());
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    exit_code(&outcome)
}
