use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use silevy::config::RunConfig;
use silevy::flows::{even_mesh, shipped_flows, ElementaryFlow, ProjectionPlan};
use silevy::jumps::levy_ito_decompose;
use silevy::markov::{chapman_kolmogorov_check, semilattice_fdd, semilattice_product, TransitionKernel};
use silevy::simulate::{evaluate_batch, sample_path_at};
use silevy::stats::TestReport;
use silevy::verify::{run_suite, SuiteReport, SUITES};
use silevy::{batch, Error};

#[derive(Parser)]
#[command(name = "silevy", version, about = "Simulate and verify set-indexed Lévy processes")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SILEVY_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Increments over the configured regions, one CSV row per path and region.
    Simulate,
    /// m-standard projections on the configured flow (or the shipped ones).
    Project,
    /// Chapman–Kolmogorov and semilattice product checks of the kernel.
    KernelCheck,
    /// Lévy–Itô decomposition of sampled paths.
    Decompose,
    /// Run verification suites.
    Verify {
        /// Suite to run; repeatable. Defaults to the config list, then all.
        #[arg(long)]
        suite: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Project => "project",
            Command::KernelCheck => "kernel-check",
            Command::Decompose => "decompose",
            Command::Verify { .. } => "verify",
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::Alignment { .. }
            | Error::Dimension { .. }
            | Error::Range(_)
            | Error::Ordering { .. }
            | Error::NotIntersectionClosed(..)
            | Error::UnsupportedSet(_)
            | Error::UnsupportedRefinement { .. }
            | Error::DegenerateSet(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config_sha256: String,
    parallel: bool,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| io_failure(&path, e))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> Result<(), Failure> {
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            tool: "silevy",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config_sha256: config.hash(),
            parallel: cfg!(feature = "parallel"),
            files,
        };
        self.json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct IncrementRow {
    path: u64,
    region: usize,
    increment: f64,
}

#[derive(Serialize)]
struct ProjectionRow<'a> {
    flow: &'a str,
    path: u64,
    step: usize,
    s: f64,
    value: f64,
}

#[derive(Serialize)]
struct TailRow {
    path: u64,
    epsilon: f64,
    discrepancy: f64,
    sd_bound: f64,
}

#[derive(Serialize)]
struct CheckReport {
    pass: bool,
    tests: Vec<TestReport>,
}

const DEFAULT_PATHS: u64 = 1000;
const DEFAULT_MESH: usize = 16;
const DEFAULT_EPSILONS: [f64; 3] = [0.1, 0.01, 0.001];

fn simulate(config: &RunConfig, out: &mut Output) -> Result<bool, Failure> {
    let spec = config.process_spec()?;
    if config.regions.is_empty() {
        return Err(Failure::Config("`regions`: simulate needs at least one region".into()));
    }
    let rows = evaluate_batch(&spec, config.paths.unwrap_or(DEFAULT_PATHS), &config.regions)?;
    out.csv(
        "increments.csv",
        rows.iter().enumerate().flat_map(|(p, row)| {
            row.iter().enumerate().map(move |(region, &increment)| IncrementRow {
                path: p as u64,
                region,
                increment,
            })
        }),
    )?;
    Ok(true)
}

fn project(config: &RunConfig, out: &mut Output) -> Result<bool, Failure> {
    let spec = config.process_spec()?;
    let flows: Vec<(&str, ElementaryFlow)> = match &config.flow {
        Some(f) => vec![("configured", f.clone())],
        None => shipped_flows(),
    };
    let paths = config.paths.unwrap_or(DEFAULT_PATHS);
    let mut rows = Vec::new();
    for (name, flow) in &flows {
        let mesh = even_mesh(flow, config.mesh.unwrap_or(DEFAULT_MESH))?;
        let plan = ProjectionPlan::new(flow, &mesh, spec.dissection())?;
        if plan.gap > 0.0 {
            eprintln!("warning: flow {name} is approximated on the grid, measure gap {:e}", plan.gap);
        }
        let values = batch::map_indexed(0..paths, |r| plan.apply(&sample_path_at(&spec, r)?))
            .into_iter()
            .collect::<silevy::Result<Vec<_>>>()?;
        for (p, traj) in values.iter().enumerate() {
            for (step, (&s, &value)) in mesh.iter().zip(traj).enumerate() {
                rows.push(ProjectionRow {
                    flow: name,
                    path: p as u64,
                    step,
                    s,
                    value,
                });
            }
        }
    }
    out.csv("projection.csv", rows)?;
    Ok(true)
}

fn kernel_check(config: &RunConfig, out: &mut Output) -> Result<bool, Failure> {
    let process = config.require_process()?;
    let tol = config.tolerances.kernel_tol.unwrap_or(1e-5);
    let volumes = if config.volumes.is_empty() {
        vec![[0.0, 1.0], [0.5, 0.5], [0.3, 0.7]]
    } else {
        config.volumes.clone()
    };
    let max_volume = volumes.iter().map(|[a, b]| a + b).fold(1.0, f64::max);
    let kernel = TransitionKernel::new(&process.triplet, max_volume)?;
    let mut tests = Vec::new();
    for [v1, v2] in &volumes {
        let err = chapman_kolmogorov_check(&kernel, *v1, *v2)?;
        tests.push(TestReport::at_most(format!("chapman-kolmogorov/{v1}+{v2}"), err, tol));
    }
    if !config.semilattice.is_empty() {
        let chain = semilattice_fdd(&kernel, &config.semilattice, 64)?;
        let product = semilattice_product(&kernel, &config.semilattice, 64)?;
        tests.push(TestReport::at_most("product-collapse", chain.tv_distance(&product)?, tol));
    }
    let pass = tests.iter().all(|t| t.pass);
    out.csv("kernel-check.csv", &tests)?;
    out.json("kernel-check.json", &CheckReport { pass, tests })?;
    Ok(pass)
}

fn decompose(config: &RunConfig, out: &mut Output) -> Result<bool, Failure> {
    let spec = config.process_spec()?;
    let epsilons = if config.epsilons.is_empty() {
        DEFAULT_EPSILONS.to_vec()
    } else {
        config.epsilons.clone()
    };
    let paths = config.paths.unwrap_or(1);
    let reports = batch::map_indexed(0..paths, |r| {
        levy_ito_decompose(&sample_path_at(&spec, r)?, &spec.triplet, &epsilons)
    })
    .into_iter()
    .collect::<silevy::Result<Vec<_>>>()?;
    out.csv(
        "tail-curve.csv",
        reports.iter().enumerate().flat_map(|(p, rep)| {
            rep.epsilons
                .iter()
                .zip(&rep.tail_curve)
                .zip(&rep.tail_sd_bound)
                .map(move |((&epsilon, &discrepancy), &sd_bound)| TailRow {
                    path: p as u64,
                    epsilon,
                    discrepancy,
                    sd_bound,
                })
        }),
    )?;
    out.json("decompose.json", &reports)?;
    Ok(true)
}

fn verify(config: &RunConfig, requested: &[String], out: &mut Output) -> Result<bool, Failure> {
    let opts = config.suite_options()?;
    let names: Vec<String> = if !requested.is_empty() {
        requested.to_vec()
    } else if !config.suites.is_empty() {
        config.suites.clone()
    } else {
        SUITES.iter().map(|s| s.to_string()).collect()
    };
    let mut all = true;
    for name in &names {
        let report: SuiteReport = run_suite(name, &opts)?;
        eprintln!(
            "{}: {} ({}/{} checks passed)",
            report.suite,
            if report.pass { "pass" } else { "FAIL" },
            report.passed(),
            report.tests.len()
        );
        all &= report.pass;
        out.json(&format!("{name}.json"), &report)?;
    }
    Ok(all)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    if let Command::Verify { suite } = &cli.command {
        if let Some(bad) = suite.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(Failure::Config(format!(
                "`suite`: unknown suite `{bad}`; known: {}",
                SUITES.join(", ")
            )));
        }
    }
    config.validate()?;
    if config.threads == Some(0) {
        return Err(Failure::Config("`threads`: must be at least 1".into()));
    }
    batch::init_threads(config.threads);
    let dir = config
        .out
        .clone()
        .ok_or_else(|| Failure::Config("`out`: an output directory is required".into()))?;
    let mut out = Output::new(dir)?;
    let pass = match &cli.command {
        Command::Simulate => simulate(&config, &mut out)?,
        Command::Project => project(&config, &mut out)?,
        Command::KernelCheck => kernel_check(&config, &mut out)?,
        Command::Decompose => decompose(&config, &mut out)?,
        Command::Verify { suite } => verify(&config, suite, &mut out)?,
    };
    out.finish(cli.command.name(), &config)?;
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
