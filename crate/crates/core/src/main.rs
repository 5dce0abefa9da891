use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfns::harness::{self, ComparisonTarget, ExperimentPlan};
use mfns::noise::basis_check;
use mfns::reference::taylor_green;
use mfns::sde::{run, SimConfig};
use mfns::snapshot::Snapshot;
use mfns::Error;

/// Mean-field particle solver for the 2D incompressible Navier-Stokes
/// equations on the unit torus.
///
/// Exit status: 0 on success, 1 on invalid input (flags, config, files),
/// 2 on a runtime failure such as a blow-up.
#[derive(Parser, Debug)]
#[command(name = "mfns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the particle ensemble; writes diagnostics.csv and MFNS snapshots.
    Run(RunArgs),
    /// Run the deterministic vorticity-form solver for the same config.
    Reference(RunArgs),
    /// Enumerate the noise basis and check its identities.
    BasisCheck {
        /// Noise truncation K_W.
        #[arg(long)]
        k_max: usize,
    },
    /// Compare two MFNS snapshots with equal truncation.
    Compare { a: PathBuf, b: PathBuf },
    /// Sweep particle counts, time steps and seeds; report terminal errors.
    Convergence(ConvergenceArgs),
    /// Write the closed-form Taylor-Green velocity as an MFNS snapshot.
    TaylorGreen {
        /// Time at which to evaluate the solution.
        #[arg(long)]
        time: f64,
        /// Viscosity.
        #[arg(long)]
        eta: f64,
        /// Field truncation K_f (at least 1).
        #[arg(long)]
        k: usize,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config keys settable from the command line; a flag wins over the file.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Viscosity eta.
    #[arg(long)]
    eta: Option<String>,
    /// Time step.
    #[arg(long)]
    dt: Option<String>,
    /// Horizon T.
    #[arg(long = "T", id = "horizon")]
    horizon: Option<String>,
    /// Particle count N.
    #[arg(long = "N", id = "particles")]
    particles: Option<String>,
    /// Field truncation K_f.
    #[arg(long)]
    k_field: Option<String>,
    /// Noise truncation K_W.
    #[arg(long)]
    k_noise: Option<String>,
    /// ito-euler or strat-heun.
    #[arg(long)]
    scheme: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Initial condition: taylor-green, random-smooth:<seed>:<slope> or file:<path>.
    #[arg(long)]
    ic: Option<String>,
    /// Noise amplitude replacing the canonical sqrt(2 eta / c_K).
    #[arg(long)]
    nu_override: Option<String>,
    /// Write a mean snapshot every this many steps (0: final only).
    #[arg(long)]
    snapshot_every: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("eta", &self.eta),
            ("dt", &self.dt),
            ("T", &self.horizon),
            ("N", &self.particles),
            ("k_field", &self.k_field),
            ("k_noise", &self.k_noise),
            ("scheme", &self.scheme),
            ("seed", &self.seed),
            ("ic", &self.ic),
            ("nu_override", &self.nu_override),
            ("snapshot_every", &self.snapshot_every),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "mfns-out")]
    out: PathBuf,
    /// Worker threads for the particle updates (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Base configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated particle counts.
    #[arg(long = "n-list", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Comma-separated time steps.
    #[arg(long = "dt-list", value_delimiter = ',', required = true)]
    dt_list: Vec<f64>,
    /// Comma-separated master seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// reference, taylor-green or file:<path>.
    #[arg(long, default_value = "reference")]
    target: String,
    /// Directory for convergence.csv (the report is always printed).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the particle updates (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_runtime_failure() {
            Failure::Runtime(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn load(args: &RunArgs) -> Result<SimConfig, Failure> {
    Ok(SimConfig::load_with_overrides(&args.config, &args.overrides.pairs())?)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure>
where
    T: Send,
{
    match workers {
        None => Ok(f()),
        Some(0) => Err(Failure::Invalid("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Invalid(format!("cannot start {n} workers: {e}"))),
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let config = load(args)?;
    let out = run(config, args.workers)?;
    report_written(&out.write_to(&args.out)?);
    out.into_result()?;
    Ok(())
}

fn cmd_reference(args: &RunArgs) -> Result<(), Failure> {
    let config = load(args)?;
    let out = harness::run_reference(&config)?;
    report_written(&out.write_to(&args.out)?);
    out.into_result()?;
    Ok(())
}

fn cmd_basis_check(k_max: usize) -> Result<(), Failure> {
    let r = basis_check(k_max)?;
    println!("k_noise = {}", r.k_noise);
    println!("elements = {}", r.element_count);
    println!("c_K = {}", r.covariance_constant);
    println!("orthonormality_defect = {:e}", r.orthonormality_defect);
    println!("self_advection_defect = {:e}", r.self_advection_defect);
    println!("covariance_defect = {:e}", r.covariance_defect);
    if r.passed() {
        println!("all defects below tolerance");
        Ok(())
    } else {
        Err(Failure::Runtime("basis check failed: defect above tolerance".into()))
    }
}

fn cmd_compare(a: &Path, b: &Path) -> Result<(), Failure> {
    println!("{}", harness::compare(a, b)?);
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), Failure> {
    let base = SimConfig::load_with_overrides(&args.config, &args.overrides.pairs())?;
    let plan = ExperimentPlan {
        base,
        particle_counts: args.n_list.clone(),
        time_steps: args.dt_list.clone(),
        seeds: args.seeds.clone(),
        out_dir: args.out.clone(),
        target: args.target.parse::<ComparisonTarget>()?,
    };
    let report = with_workers(args.workers, || harness::run_convergence(&plan))??;
    print!("{}", report.csv());
    eprint!("{}", report.summary());
    if report.failures() > 0 {
        return Err(Failure::Runtime(format!(
            "{} convergence cell(s) failed",
            report.failures()
        )));
    }
    Ok(())
}

fn cmd_taylor_green(time: f64, eta: f64, k: usize, out: &Path) -> Result<(), Failure> {
    if !time.is_finite() || !eta.is_finite() || eta < 0.0 {
        return Err(Failure::Invalid(format!(
            "need finite --time and finite --eta >= 0, got {time} and {eta}"
        )));
    }
    Snapshot::new(time, taylor_green(time, eta, k)?).write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Reference(a) => cmd_reference(a),
        Command::BasisCheck { k_max } => cmd_basis_check(*k_max),
        Command::Compare { a, b } => cmd_compare(a, b),
        Command::Convergence(a) => cmd_convergence(a),
        Command::TaylorGreen { time, eta, k, out } => cmd_taylor_green(*time, *eta, *k, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
