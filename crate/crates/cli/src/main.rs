//! `exact-opinf`: benchmark runner and file-level front end to the inference library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use opinf_core::benchmarks::{Benchmark, BenchmarkConfig, BenchmarkName};
use opinf_core::diagnostics::{fmt_f64, DiagnosticsReport};
use opinf_core::experiment::{run_experiment, ExperimentOptions};
use opinf_core::{io, Error};

/// Exit statuses.
mod exit {
    pub const THRESHOLD: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const RANK: u8 = 3;
    pub const RUNTIME: u8 = 4;
}

#[derive(Parser, Debug)]
#[command(name = "exact-opinf", version, about = "Exact operator inference for polynomial reduced-order models")]
struct Cli {
    /// Worker threads for the snapshot ensemble (default: all cores).
    #[arg(long, global = true, env = "EXACTOPINF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full sweep over n for a built-in benchmark; writes CSV tables.
    Experiment(ExperimentArgs),
    /// Infer the reduced operator from a built-in model or a stored ensemble.
    Infer(InferArgs),
    /// POD basis of a snapshot file.
    Pod(PodArgs),
    /// Compare an inferred operator file with a reference operator file.
    Diagnose(DiagnoseArgs),
    /// Simulate a built-in benchmark and write its snapshots.
    Snapshots(SnapshotArgs),
}

#[derive(Args, Debug, Clone)]
struct BenchArgs {
    /// Overrides in TOML `key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chafee-Infante right boundary: neumann | frozen.
    #[arg(long)]
    boundary: Option<String>,
    /// Shallow-ice flux form: divergence | literal.
    #[arg(long)]
    form: Option<String>,
}

impl BenchArgs {
    fn build(&self, name: BenchmarkName) -> opinf_core::Result<Benchmark> {
        let mut config = match &self.config {
            Some(path) => BenchmarkConfig::from_path(path)?,
            None => BenchmarkConfig::default(),
        };
        if self.boundary.is_some() {
            config.boundary = self.boundary.clone();
        }
        if self.form.is_some() {
            config.form = self.form.clone();
        }
        Benchmark::build(name, &config)
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    benchmark: BenchmarkName,
    #[arg(long)]
    n_max: Option<usize>,
    /// Inference step; estimated from the snapshots when omitted.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Also fit least-squares operator inference on trajectory data.
    #[arg(long)]
    baseline: bool,
    /// Check each extended ensemble against a fresh one.
    #[arg(long)]
    nested: bool,
    /// Skip the condition numbers of P.
    #[arg(long)]
    no_cond: bool,
    /// Allow n beyond the benchmark's documented range.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    bench: BenchArgs,
}

#[derive(Args, Debug)]
struct InferArgs {
    /// Built-in model to step; needs --basis.
    #[arg(long, conflicts_with = "ensemble", required_unless_present = "ensemble")]
    benchmark: Option<BenchmarkName>,
    #[arg(long, requires = "benchmark")]
    basis: Option<PathBuf>,
    /// Stored ensemble file (pair, x̄, ū, ẋ̄ rows).
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Expected degree set, e.g. "1,2,3"; checked against the model or file.
    #[arg(long)]
    degrees: Option<String>,
    /// Expected input count; checked against the model or file.
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the generated ensemble.
    #[arg(long)]
    ensemble_out: Option<PathBuf>,
    #[command(flatten)]
    bench: BenchArgs,
}

#[derive(Args, Debug)]
struct PodArgs {
    snapshots: PathBuf,
    #[arg(long, short)]
    n: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    inferred: PathBuf,
    reference: PathBuf,
    /// Condition number to record, if known.
    #[arg(long)]
    cond: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SnapshotArgs {
    benchmark: BenchmarkName,
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    bench: BenchArgs,
}

enum Outcome {
    Ok,
    Thresholds(usize),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(exit::RUNTIME);
        }
    }
    let result = match cli.command {
        Command::Experiment(a) => experiment(a),
        Command::Infer(a) => infer(a),
        Command::Pod(a) => pod(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Snapshots(a) => snapshots(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Thresholds(count)) => {
            eprintln!("{count} threshold check(s) failed");
            ExitCode::from(exit::THRESHOLD)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Parse { .. } | Error::DimensionMismatch { .. } | Error::InvalidArgument(_)) => exit::SCHEMA,
        Some(Error::RankDeficient { .. }) => exit::RANK,
        _ => exit::RUNTIME,
    }
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<Outcome> {
    let bench = a.bench.build(a.benchmark)?;
    let opts = ExperimentOptions {
        n_max: a.n_max,
        dt: a.dt,
        baseline: a.baseline,
        check_nested: a.nested,
        condition: !a.no_cond,
        force: a.force,
    };
    let result = run_experiment(&bench, &opts, &mut |m| eprintln!("{m}"))?;
    let files = result.write_csv(&a.out)?;
    eprintln!("wrote {} files to {}", files.len(), a.out.display());
    let failures = result.failures();
    for f in &failures {
        println!("FAIL {f}");
    }
    Ok(if failures.is_empty() {
        println!("PASS {}", a.benchmark);
        Outcome::Ok
    } else {
        Outcome::Thresholds(failures.len())
    })
}

fn schema_error(path: &Path, message: String) -> anyhow::Error {
    Error::Parse {
        path: path.display().to_string(),
        line: 1,
        message,
    }
    .into()
}

fn check_layout(basis: &opinf_core::MonomialBasis, a: &InferArgs, origin: &Path) -> anyhow::Result<()> {
    if let Some(d) = &a.degrees {
        let want = opinf_core::DegreeSet::parse(d)?;
        if &want != basis.degrees() {
            return Err(schema_error(origin, format!("degree set {d} does not match {:?}", basis.degrees().as_slice())));
        }
    }
    if let Some(m) = a.inputs {
        if m != basis.n_inputs() {
            return Err(schema_error(origin, format!("expected {m} inputs, found {}", basis.n_inputs())));
        }
    }
    Ok(())
}

fn infer(a: InferArgs) -> anyhow::Result<Outcome> {
    let ensemble = if let Some(path) = &a.ensemble {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        io::ensemble_from_str(&text, &path.display().to_string())?
    } else {
        let name = a.benchmark.expect("clap enforces benchmark or ensemble");
        let basis_path = a.basis.as_ref().context("--basis is required with --benchmark")?;
        let bench = a.bench.build(name)?;
        let basis = io::load_basis(basis_path)?;
        if basis.state_dim() != bench.spec.dim {
            return Err(schema_error(
                basis_path,
                format!("basis has {} rows but {} has N = {}", basis.state_dim(), name, bench.spec.dim),
            ));
        }
        let dt = match a.dt {
            Some(dt) => dt,
            None => {
                let snaps = bench.pod_snapshots()?;
                opinf_core::estimate_dt(&snaps, &basis.modes().columns(0, 1).into_owned(), &bench.spec.degrees)?
            }
        };
        let fom = bench.fom.as_ref();
        let pairs = opinf_core::rank_ensuring_pairs(basis.n(), fom.degrees(), fom.input_dim())?;
        opinf_core::generate_ensemble(fom, basis.modes(), pairs, dt)?
    };
    let origin = a.ensemble.clone().or(a.basis.clone()).unwrap_or_default();
    check_layout(&ensemble.basis, &a, &origin)?;
    let inference = opinf_core::infer(&ensemble)?;
    io::save_operator(&a.out, &inference.operator)?;
    if let Some(path) = &a.ensemble_out {
        std::fs::write(path, io::ensemble_to_string(&ensemble))?;
    }
    println!(
        "n={} n_f={} dt={} cond_P={} residual={}",
        ensemble.basis.n(),
        ensemble.len(),
        fmt_f64(ensemble.dt),
        fmt_f64(inference.cond_p),
        fmt_f64(inference.residual)
    );
    Ok(Outcome::Ok)
}

fn pod(a: PodArgs) -> anyhow::Result<Outcome> {
    let text = std::fs::read_to_string(&a.snapshots).with_context(|| format!("reading {}", a.snapshots.display()))?;
    let snaps = io::snapshots_from_str(&text, &a.snapshots.display().to_string())?;
    let basis = match opinf_core::pod_basis(&snaps, a.n) {
        Ok(b) => b,
        Err(e @ Error::RankDeficient { rank, .. }) => {
            println!("numerical_rank={rank}");
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    io::save_basis(&a.out, &basis)?;
    println!("n={} numerical_rank={} sigma_1={}", basis.n(), basis.numerical_rank(), fmt_f64(basis.singular_values()[0]));
    Ok(Outcome::Ok)
}

fn diagnose(a: DiagnoseArgs) -> anyhow::Result<Outcome> {
    let inferred = io::load_operator(&a.inferred)?;
    let reference = io::load_operator(&a.reference)?;
    let report = DiagnosticsReport::compute(&inferred, &reference, a.cond.unwrap_or(f64::NAN))?;
    let text = format!("{}\n{}\n", report.csv_header(), report.csv_row());
    match &a.out {
        Some(path) => {
            let versioned = format!("# exact-opinf diagnostics v{} {{}}\n{text}", io::FORMAT_VERSION);
            std::fs::write(path, versioned)?;
        }
        None => print!("{text}"),
    }
    Ok(Outcome::Ok)
}

fn snapshots(a: SnapshotArgs) -> anyhow::Result<Outcome> {
    let bench = a.bench.build(a.benchmark)?;
    let snaps = bench.pod_snapshots()?;
    std::fs::write(&a.out, io::snapshots_to_string(&snaps))?;
    println!("N={} K={}", snaps.state_dim(), snaps.len());
    Ok(Outcome::Ok)
}
