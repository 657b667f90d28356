//! Command orchestration behind the `erlab` binary.
//!
//! A run is described by a TOML file:
//!
//! ```toml
//! command = "sweep"        # sample | transform | sweep | few-trials | evolve | synthesize | fit | report
//! seed = 7                 # optional; falls back to $ERLAB_SEED, then 0
//! output = "runs/sweep"    # output directory
//!
//! [params]                 # command-specific keys, see the *Params structs
//! trials = 100
//! ```
//!
//! Every run writes its outputs, a resolved `config.toml` that reproduces the
//! run, and a `manifest.json` into the output directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    evolve, evolve_stepwise, prediction_stddev, trial_sensitivity, ErrorBudget, Generator, LinearPrediction,
};
use crate::invariance::{distribution_table, few_trials_report, grid_sweep, SweepSpec, Transform, STANDARD_P_GRID};
use crate::io::{self, write_atomic, GeneratorFile};
use crate::multinomial::{sample_trials, ExperimentConfig};
use crate::tomography::{
    default_training_times, fit, required_experiments, synthesize_dataset, BoxScenario, FitOptions,
};
use crate::transform::{transform_table, RealERParams, StateVector};

/// Environment variable consulted for the seed when neither the command
/// line nor the config sets one.
pub const SEED_ENV: &str = "ERLAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sample,
    Transform,
    Sweep,
    FewTrials,
    Evolve,
    Synthesize,
    Fit,
    Report,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Sample,
        Command::Transform,
        Command::Sweep,
        Command::FewTrials,
        Command::Evolve,
        Command::Synthesize,
        Command::Fit,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Transform => "transform",
            Command::Sweep => "sweep",
            Command::FewTrials => "few-trials",
            Command::Evolve => "evolve",
            Command::Synthesize => "synthesize",
            Command::Fit => "fit",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command '{s}'")))
    }
}

/// Process exit status for an error: 2 for input that fails validation, 3
/// for numeric or capacity limits, 4 for a fit that did not converge and 1
/// for I/O failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidProbabilities(_)
        | Error::DimensionMismatch { .. }
        | Error::CountSum { .. }
        | Error::InvalidParameter(_)
        | Error::Underdetermined { .. }
        | Error::Parse(_) => 2,
        Error::Domain { .. } | Error::Endpoint(_) | Error::Capacity(_) => 3,
        Error::NotConverged(_) => 4,
        Error::Io(_) => 1,
    }
}

/// One line: `erlab: error kind=<tag> exit=<code> message="<text>"`.
pub fn diagnostic(e: &Error) -> String {
    format!(
        "erlab: error kind={} exit={} message={:?}",
        e.kind(),
        exit_code(e),
        e.to_string()
    )
}

pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub output: PathBuf,
    /// Command-specific keys, validated when the command runs.
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    #[serde(default)]
    params: toml::Table,
}

impl RunConfig {
    /// A config with no parameters, the default seed and `<command>-out` as
    /// output directory.
    pub fn new(command: Command) -> Result<Self> {
        Ok(Self {
            command,
            seed: default_seed()?,
            output: PathBuf::from(format!("{}-out", command.name())),
            params: toml::Table::new(),
        })
    }

    /// Parses a config. `command` is required unless `expected` supplies it;
    /// when both are present they must agree.
    pub fn from_toml(text: &str, expected: Option<Command>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {}", e.message())))?;
        let command = match (raw.command, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Parse(format!("config is for '{a}' but '{b}' was requested")));
            }
            (Some(c), _) | (None, Some(c)) => c,
            (None, None) => return Err(Error::Parse("config has no `command`".into())),
        };
        let base = Self::new(command)?;
        Ok(Self {
            seed: raw.seed.unwrap_or(base.seed),
            output: raw.output.unwrap_or(base.output),
            params: raw.params,
            command,
        })
    }

    pub fn load(path: &Path, expected: Option<Command>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, expected)
    }

    fn params<T: DeserializeOwned>(&self) -> Result<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("[params] for {}: {}", self.command, e.message())))
    }
}

fn default_trials() -> u64 {
    100
}

fn default_grid() -> Vec<f64> {
    STANDARD_P_GRID.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub probabilities: Vec<f64>,
    pub trials: u64,
    /// Checked against the length of `probabilities` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformParams {
    pub points: usize,
    pub scale: f64,
    pub offset: f64,
    pub phase: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        let p = RealERParams::default();
        Self {
            points: 101,
            scale: p.scale(),
            offset: p.offset(),
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub transforms: Vec<String>,
    pub trials: u64,
    pub p_grid: Vec<f64>,
    /// Monte Carlo replications per cell; 0 skips the Monte Carlo column.
    pub replications: usize,
    /// Also write a `value,prob` table per real transform and grid point.
    pub distributions: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            transforms: ["frequency", "chi", "zeta", "psi", "naive_sqrt"]
                .map(String::from)
                .to_vec(),
            trials: default_trials(),
            p_grid: default_grid(),
            replications: 0,
            distributions: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FewTrialsParams {
    pub trials: u64,
    pub p_grid: Vec<f64>,
}

impl Default for FewTrialsParams {
    fn default() -> Self {
        Self {
            trials: 10,
            p_grid: default_grid(),
        }
    }
}

/// Where a command takes its generator from: inline row-major `[re, im]`
/// entries, or a file holding a generator or a fit result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_file: Option<PathBuf>,
}

impl GeneratorSource {
    pub fn resolve(&self) -> Result<Generator> {
        match (&self.generator, &self.generator_file) {
            (Some(entries), None) => {
                let k = (entries.len() as f64).sqrt().round() as usize;
                if k * k != entries.len() {
                    return Err(Error::InvalidParameter(format!(
                        "generator needs K^2 entries, got {}",
                        entries.len()
                    )));
                }
                GeneratorFile {
                    dimension: k,
                    entries: entries.clone(),
                    valid: true,
                }
                .generator()
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                match io::read_generator_json(&text) {
                    Ok(g) => Ok(g),
                    Err(Error::Parse(_)) => Ok(io::read_fit_json(&text)?.generator()),
                    Err(e) => Err(e),
                }
            }
            _ => Err(Error::InvalidParameter(
                "give exactly one of `generator` or `generator_file`".into(),
            )),
        }
    }
}

fn source(generator: &Option<Vec<[f64; 2]>>, generator_file: &Option<PathBuf>) -> GeneratorSource {
    GeneratorSource {
        generator: generator.clone(),
        generator_file: generator_file.clone(),
    }
}

fn state_from_pairs(pairs: &[[f64; 2]]) -> Result<StateVector> {
    StateVector::from_amplitudes(pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveMethod {
    Exact,
    Stepwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_file: Option<PathBuf>,
    pub initial: Vec<[f64; 2]>,
    /// Explicit output times; otherwise `steps + 1` points over `[0, t_end]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_method")]
    pub method: EvolveMethod,
    /// First-order steps per output time for the stepwise method.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_steps() -> usize {
    100
}

fn default_method() -> EvolveMethod {
    EvolveMethod::Exact
}

fn default_substeps() -> usize {
    1000
}

fn output_times(times: &Option<Vec<f64>>, t_end: Option<f64>, steps: usize) -> Result<Vec<f64>> {
    match (times, t_end) {
        (Some(t), None) => Ok(t.clone()),
        (None, Some(end)) if steps > 0 => Ok((0..=steps).map(|i| end * i as f64 / steps as f64).collect()),
        _ => Err(Error::InvalidParameter(
            "give either `times` or `t_end` (with steps >= 1)".into(),
        )),
    }
}

/// A single trial count for every record, or one per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trials {
    Each(u64),
    PerRecord(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_file: Option<PathBuf>,
    pub initial: Vec<[f64; 2]>,
    /// Delay times; otherwise `count` evenly spaced times over one period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Defaults to the minimum `K + 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    pub trials: Trials,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_box_width")]
    pub box_width: f64,
}

fn default_box_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub dataset: PathBuf,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_hops")]
    pub hops: usize,
    /// Times at which to predict from the fitted model.
    #[serde(default)]
    pub holdout: Vec<f64>,
}

fn default_restarts() -> usize {
    FitOptions::default().restarts
}

fn default_tolerance() -> f64 {
    FitOptions::default().tolerance
}

fn default_max_iterations() -> usize {
    FitOptions::default().max_iterations
}

fn default_hops() -> usize {
    FitOptions::default().hops
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_file: Option<PathBuf>,
    pub times: Vec<f64>,
    /// Trials behind the preparation the prediction starts from.
    #[serde(default = "default_trials")]
    pub trials: u64,
}

/// Files written by a run, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub output: PathBuf,
    pub files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    seed: u64,
    output: &'a Path,
    params: serde_json::Value,
    outputs: &'a [String],
    rerun: String,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs one command and writes its outputs, the resolved config and the
/// manifest.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let mut out = Outputs {
        dir: config.output.clone(),
        files: Vec::new(),
    };
    let resolved = match config.command {
        Command::Sample => run_sample(config, &mut out)?,
        Command::Transform => run_transform(config, &mut out)?,
        Command::Sweep => run_sweep(config, &mut out)?,
        Command::FewTrials => run_few_trials(config, &mut out)?,
        Command::Evolve => run_evolve(config, &mut out)?,
        Command::Synthesize => run_synthesize(config, &mut out)?,
        Command::Fit => run_fit(config, &mut out)?,
        Command::Report => run_report(config, &mut out)?,
    };
    finish(config, resolved, out)
}

fn finish(config: &RunConfig, resolved: serde_json::Value, mut out: Outputs) -> Result<RunSummary> {
    let params: toml::Table = serde_json::from_value(resolved.clone())
        .map_err(|e| Error::Io(format!("resolved params are not a table: {e}")))?;
    let echo = RunConfig {
        params,
        ..config.clone()
    };
    let text = toml::to_string(&echo).map_err(|e| Error::Io(e.to_string()))?;
    out.write("config.toml", text.as_bytes())?;
    let rerun = format!("erlab run --config {}", config.output.join("config.toml").display());
    out.files.push("manifest.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        seed: config.seed,
        output: &config.output,
        params: resolved,
        outputs: &out.files,
        rerun,
    };
    write_atomic(&out.dir.join("manifest.json"), &io::to_json(&manifest)?)?;
    info!(
        "{}: wrote {} files to {}",
        config.command,
        out.files.len(),
        out.dir.display()
    );
    Ok(RunSummary {
        output: out.dir,
        files: out.files,
    })
}

fn echo<T: Serialize>(p: &T) -> Result<serde_json::Value> {
    serde_json::to_value(p).map_err(|e| Error::Io(e.to_string()))
}

fn run_sample(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: SampleParams = config.params()?;
    if let Some(k) = p.order {
        if k != p.probabilities.len() {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: p.probabilities.len(),
            });
        }
    }
    let exp = ExperimentConfig::new(p.probabilities.clone(), p.trials, config.seed)?;
    out.write("counts.csv", &io::counts_csv(&sample_trials(&exp))?)?;
    echo(&p)
}

fn run_transform(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: TransformParams = config.params()?;
    let params = RealERParams::new(p.scale, p.offset)?;
    out.write(
        "transform.csv",
        &io::transform_csv(&transform_table(p.points, &params, p.phase)?)?,
    )?;
    echo(&p)
}

fn run_sweep(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: SweepParams = config.params()?;
    let transforms = p
        .transforms
        .iter()
        .map(|t| t.parse::<Transform>())
        .collect::<Result<Vec<_>>>()?;
    let reports = transforms
        .iter()
        .map(|&transform| {
            grid_sweep(&SweepSpec {
                p_grid: p.p_grid.clone(),
                trials: p.trials,
                transform,
                replications: p.replications,
                seed: config.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = reports.iter().collect();
    out.write("sweep.csv", &io::sweep_csv(&refs)?)?;
    if p.distributions {
        for t in transforms.iter().filter(|t| !matches!(t, Transform::Psi { .. })) {
            for &pv in &p.p_grid {
                let table = distribution_table(pv, p.trials, t)?;
                let name = format!("distributions/{}_p{}_N{}.csv", t.name(), pv, p.trials);
                out.write(&name, &io::distribution_csv(&table)?)?;
            }
        }
    }
    echo(&p)
}

fn run_few_trials(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: FewTrialsParams = config.params()?;
    let report = few_trials_report(&p.p_grid, p.trials)?;
    for (name, row) in report.flagged_rows() {
        warn!(
            "few-trials: transform={name} p={} N={} rel_departure={:.4} exceeds {}",
            row.p, p.trials, row.rel_departure, report.threshold
        );
    }
    out.write("few_trials.csv", &io::sweep_csv(&[&report.chi, &report.psi])?)?;
    echo(&p)
}

fn run_evolve(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: EvolveParams = config.params()?;
    let g = source(&p.generator, &p.generator_file).resolve()?;
    let psi = state_from_pairs(&p.initial)?;
    let times = output_times(&p.times, p.t_end, p.steps)?;
    let states = times
        .iter()
        .map(|&t| match p.method {
            EvolveMethod::Exact => evolve(&psi, &g, t),
            EvolveMethod::Stepwise => evolve_stepwise(&psi, &g, t, p.substeps.max(1)),
        })
        .collect::<Result<Vec<_>>>()?;
    out.write("generator.json", &io::generator_json(&g)?)?;
    out.write("trace.csv", &io::trace_csv(&states)?)?;
    echo(&p)
}

fn run_synthesize(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: SynthesizeParams = config.params()?;
    let g = source(&p.generator, &p.generator_file).resolve()?;
    let psi = state_from_pairs(&p.initial)?;
    let k = g.dimension();
    let times = match (&p.times, p.count) {
        (Some(t), None) => t.clone(),
        (None, count) => default_training_times(&g, count.unwrap_or(required_experiments(k)?)),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter("give `times` or `count`, not both".into()));
        }
    };
    let trials = match &p.trials {
        Trials::Each(n) => vec![*n; times.len()],
        Trials::PerRecord(v) => v.clone(),
    };
    let scenario = BoxScenario::new(g.clone(), psi, p.box_width, config.seed)?;
    let dataset = synthesize_dataset(&scenario, &times, &trials, p.noiseless)?;
    out.write("dataset.csv", &io::dataset_csv(&dataset)?)?;
    out.write("truth.json", &io::generator_json(&g)?)?;
    echo(&p)
}

fn run_fit(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: FitParams = config.params()?;
    let dataset = io::load_dataset(&p.dataset)?;
    let options = FitOptions {
        restarts: p.restarts,
        seed: config.seed,
        max_iterations: p.max_iterations,
        tolerance: p.tolerance,
        hops: p.hops,
        ..FitOptions::default()
    };
    let result = fit(&dataset, &options)?;
    out.write("fit.json", &io::fit_json(&result)?)?;
    out.write("generator.json", &io::generator_json(&result.generator())?)?;
    if !result.converged {
        return Err(Error::NotConverged(format!(
            "best restart {} stopped at loss {:e} after {} iterations; fit.json holds the unconverged estimate",
            result.restart, result.loss, result.iterations
        )));
    }
    if !p.holdout.is_empty() {
        let g = result.generator();
        let psi = result.initial_state();
        let states = p
            .holdout
            .iter()
            .map(|&t| evolve(&psi, &g, t))
            .collect::<Result<Vec<_>>>()?;
        out.write("holdout.csv", &io::trace_csv(&states)?)?;
    }
    echo(&p)
}

fn run_report(config: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let p: ReportParams = config.params()?;
    let g = source(&p.generator, &p.generator_file).resolve()?;
    let budget = ErrorBudget::new(vec![p.trials])?;
    let mut rows = Vec::new();
    for &t in &p.times {
        let prediction = LinearPrediction::from_propagator(&g, t);
        let sd = prediction_stddev(&prediction, &budget)?;
        let sens = trial_sensitivity(&prediction, &budget)?;
        for (s, (d, ds)) in sd.iter().zip(&sens).enumerate() {
            rows.push(vec![io::fmt_f64(t), s.to_string(), io::fmt_f64(*d), io::fmt_f64(ds[0])]);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "outcome_index", "delta_phi", "d_delta_phi_dN"])?;
    for r in rows {
        w.write_record(&r)?;
    }
    out.write("report.csv", &w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
    echo(&p)
}
