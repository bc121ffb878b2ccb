//! Experiment runner for ensemble error mitigation on a simulated annealer.
//!
//! Subcommands: `gen` writes benchmark instances, `run` executes one
//! configured scheme, `profile-precision` and `sweep-ensembles` produce the
//! precision and ensemble-size tables, and `report` joins result files.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! failures while running.

pub mod config;
pub mod experiment;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use equal_core::mitigate::PerturbationSigns;
use equal_core::topology::random_instance;
use equal_core::{cast_maxcut, chimera_graph, sk_maxcut_graph, ChimeraSpec, IsingModel, Scheme};

use config::{env_seed, Benchmark, ExperimentConfig, GroundTruthSpec};
use experiment::{attach_baseline, profile_csv, sweep_csv, write_outputs, Prepared, RunResult};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] equal_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Core(_) => 2,
        }
    }
}

/// Ensemble quantum-annealing error mitigation experiments
#[derive(Parser, Debug)]
#[command(name = "equal", version, about)]
pub struct Cli {
    /// Worker threads for parallel execution (default: one per core)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark instance as a model file
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Run one scheme on one instance and write its result JSON
    Run(RunArgs),
    /// Baseline ER at several precisions, relative to full precision
    ProfilePrecision(ProfileArgs),
    /// EQUAL ER for several ensemble sizes at a fixed trial budget
    SweepEnsembles(SweepArgs),
    /// Summarize result files per scheme
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Random N(0,1) fields and couplers on a Chimera C_m graph
    Chimera {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave every linear field at zero
        #[arg(long)]
        couplers_only: bool,
        /// Qubits to remove before drawing coefficients
        #[arg(long, value_delimiter = ',')]
        dead: Vec<usize>,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Max-Cut on a complete graph with N(0,1) weights, cast to Ising form
    Sk {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: equal_core::Error| e.to_string())
}

fn parse_ground(s: &str) -> Result<GroundTruthSpec, String> {
    match s {
        "exact" => Ok(GroundTruthSpec::Exact),
        "estimate" => Ok(GroundTruthSpec::default()),
        _ => Err(format!("expected exact or estimate, got {s:?}")),
    }
}

/// Experiment configuration: a JSON file plus per-field overrides.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// Experiment config JSON; omitted fields take defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark: random instance on Chimera C_M
    #[arg(long, value_name = "M", conflicts_with_all = ["sk", "model"])]
    pub chimera: Option<usize>,
    /// Benchmark: SK Max-Cut with N vertices
    #[arg(long, value_name = "N", conflicts_with = "model")]
    pub sk: Option<usize>,
    /// Benchmark: model file
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub instance_seed: Option<u64>,
    /// baseline, equal, equal_plus, sqc_only or srt
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    /// Ensemble size for equal and equal_plus
    #[arg(long)]
    pub m: Option<usize>,
    /// Gauge count for srt
    #[arg(long)]
    pub k_gauges: Option<usize>,
    /// Total trial budget shared by all QMIs
    #[arg(long)]
    pub trials: Option<u64>,
    /// Trial counts at which to record the ER curve
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    /// Overrides EQUAL_SEED and the config file
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long)]
    pub sigma_h: Option<f64>,
    #[arg(long)]
    pub sigma_j: Option<f64>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Inverse temperature at the first and last sweep
    #[arg(long, value_delimiter = ',', value_name = "START,END")]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub trial_correlation: Option<f64>,
    #[arg(long)]
    pub device_seed: Option<u64>,
    /// exact or estimate
    #[arg(long, value_parser = parse_ground)]
    pub ground: Option<GroundTruthSpec>,
    /// Perturb each coefficient by +r or -r at random instead of +r
    #[arg(long)]
    pub random_signs: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    /// Config file, then `EQUAL_SEED`, then explicit flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = env_seed()? {
            c.master_seed = seed;
        }
        if let Some(m) = self.chimera {
            c.benchmark = Benchmark::Chimera { m };
        }
        if let Some(n) = self.sk {
            c.benchmark = Benchmark::Sk { n };
        }
        if let Some(path) = &self.model {
            c.benchmark = Benchmark::File { path: path.clone() };
        }
        let d = &mut c.device;
        macro_rules! set {
            ($($field:expr => $value:expr),* $(,)?) => {
                $(if let Some(v) = $value.clone() { $field = v; })*
            };
        }
        set! {
            d.bits => self.bits,
            d.sigma_h => self.sigma_h,
            d.sigma_j => self.sigma_j,
            d.sweeps => self.sweeps,
            d.trial_correlation => self.trial_correlation,
            d.device_seed => self.device_seed,
        }
        match self.beta.as_deref() {
            Some(&[start, end]) => d.beta = (start, end),
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "--beta takes START,END, got {} values",
                    other.len()
                )))
            }
            None => {}
        }
        set! {
            c.instance_seed => self.instance_seed,
            c.scheme => self.scheme,
            c.total_trials => self.trials,
            c.checkpoints => self.checkpoints,
            c.master_seed => self.master_seed,
            c.ground_truth => self.ground,
            c.output_dir => self.output_dir,
        }
        if self.m.is_some() {
            c.m = self.m;
        }
        if self.k_gauges.is_some() {
            c.k_gauges = self.k_gauges;
        }
        if self.random_signs {
            c.perturbation_signs = PerturbationSigns::Random;
        }
        Ok(c)
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Paired baseline result; enables relative_er
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Run ensemble members one after another
    #[arg(long)]
    pub serial: bool,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Precisions to profile
    #[arg(long = "bits-list", value_delimiter = ',', required = true)]
    pub bits_list: Vec<u32>,
    /// CSV output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Ensemble sizes to sweep
    #[arg(long = "m-list", value_delimiter = ',', required = true)]
    pub m_list: Vec<usize>,
    /// CSV output (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Result JSON files
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Also write the summary as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, contents),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {t} threads: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Run(args) => cmd_run(args),
        Command::ProfilePrecision(args) => cmd_profile_precision(args),
        Command::SweepEnsembles(args) => cmd_sweep_ensembles(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn stats(values: impl Iterator<Item = f64>) -> String {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return "none".into();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("mean={mean:.4} std={std:.4} min={min:.4} max={max:.4}")
}

pub fn model_summary(model: &IsingModel) -> String {
    format!(
        "n={} couplers={}\nh: {}\nJ: {}\n",
        model.n(),
        model.num_couplers(),
        stats(model.linear().values().copied()),
        stats(model.quadratic().values().copied())
    )
}

fn cmd_gen(kind: GenKind) -> Result<(), CliError> {
    let (model, out) = match kind {
        GenKind::Chimera { m, seed, couplers_only, dead, out } => {
            let spec = ChimeraSpec::new(m).map_err(|e| CliError::Usage(e.to_string()))?;
            let graph = chimera_graph(spec)?;
            let graph = if dead.is_empty() {
                graph
            } else {
                graph.without_nodes(&dead).map_err(|e| CliError::Usage(e.to_string()))?
            };
            (random_instance(&graph, seed, couplers_only), out)
        }
        GenKind::Sk { n, seed, out } => {
            let graph = sk_maxcut_graph(n, seed).map_err(|e| CliError::Usage(e.to_string()))?;
            (cast_maxcut(&graph), out)
        }
    };
    let mut json = model.to_json();
    json.push('\n');
    let summary = model_summary(&model);
    match out {
        Some(path) => {
            write_file(&path, &json)?;
            print!("{summary}");
        }
        None => {
            print!("{json}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let baseline = args.baseline.as_deref().map(RunResult::load).transpose()?;
    let prepared = Prepared::new(config)?;
    let (mut result, curve) = prepared.execute(!args.serial)?;
    if let Some(b) = &baseline {
        attach_baseline(&mut result, b)?;
    }
    let path = write_outputs(&result, curve.as_deref())?;
    let rel = result.relative_er.map(|r| format!(" relative_er={r:.6}")).unwrap_or_default();
    println!(
        "{} instance={} n={} e_min={:.6} e_global={:.6} er={:.6}{rel} -> {}",
        result.scheme,
        result.instance_seed,
        result.n,
        result.e_min,
        result.e_global.energy,
        result.er,
        path.display()
    );
    Ok(())
}

fn cmd_profile_precision(args: ProfileArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let bad: Vec<String> = args
        .bits_list
        .iter()
        .filter(|&&b| b == 0 || b > equal_core::precision::MAX_BITS)
        .map(|b| format!("bits-list: {b} is outside 1..=53"))
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let prepared = Prepared::new(config)?;
    let profile = prepared.precision_profile(&args.bits_list)?;
    emit(args.out.as_deref(), &profile_csv(&profile.rows))
}

fn cmd_sweep_ensembles(args: SweepArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let bad: Vec<String> = args
        .m_list
        .iter()
        .filter(|&&m| m == 0 || m as u64 > config.total_trials)
        .map(|m| format!("m-list: {m} members cannot share {} trials", config.total_trials))
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let prepared = Prepared::new(config)?;
    let rows = prepared.ensemble_sweep(&args.m_list)?;
    emit(args.out.as_deref(), &sweep_csv(&rows))
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let results = args
        .files
        .iter()
        .map(|p| RunResult::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = report::summarize(&results)?;
    if let Some(path) = &args.csv {
        write_file(path, &report::summary_csv(&rows))?;
    }
    print!("{}", report::summary_text(&rows));
    Ok(())
}
