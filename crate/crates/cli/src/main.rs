//! `hhx`: voxelize geometries, decompose fields, check the subdomain
//! zero-mean estimates and estimate the constants of the convex bounds.
//!
//! Exit codes: 0 success (warnings go to stderr), 2 input error,
//! 3 missing data, 4 solver failure.
//!
//! `HHX_THREADS` sets the size of the worker pool. Without it the tool runs
//! on one thread with fixed-order reductions.

mod commands;
mod report;
mod support;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use support::{CliError, CliResult, Runtime};

#[derive(Parser)]
#[command(name = "hhx", version, about = "Staggered-grid Helmholtz decompositions and constant estimates")]
struct Cli {
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Fixed-order reductions even with HHX_THREADS set.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a geometry spec into a mask file and a geometry sidecar.
    Voxelize {
        spec: PathBuf,
        /// Resolution; overrides the spec's `h`.
        #[arg(long)]
        h: Option<f64>,
        /// Mask file to write; the sidecar goes next to it with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-part Helmholtz decomposition of an edge or face field.
    Decompose {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        input: FieldArgs,
        #[arg(long, value_enum)]
        flavor: DecFlavor,
        /// Kind of the generated field.
        #[arg(long, value_enum, default_value = "face")]
        kind: VectorKindArg,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subdomain mean checks for divergence-free or rot-free fields.
    Zeromean {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        input: FieldArgs,
        #[arg(long, value_enum)]
        theorem: Theorem,
        /// Boundary flavor of the generated field.
        #[arg(long, value_enum, default_value = "essential")]
        field_flavor: FlavorArg,
        /// Slab axis (1-based, comma separated); all axes when absent.
        #[arg(long)]
        axis: Option<String>,
        /// Beam axis pair such as `1,2`; all pairs when absent.
        #[arg(long)]
        axes: Option<String>,
        /// Number of slabs per axis.
        #[arg(long = "n", visible_alias = "N")]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid estimates of the Poincare, Friedrichs and Maxwell constants.
    Constants {
        #[command(flatten)]
        domain: DomainArgs,
        /// Any of cp, cf, cm1, cm2, cmt, cmn, cpw.
        #[arg(long, default_value = "cp,cf,cm1,cm2,cmt,cmn")]
        which: String,
        /// Slab axis for cpw (1-based).
        #[arg(long, default_value = "1")]
        axis: String,
        /// Slab counts for cpw.
        #[arg(long = "n", visible_alias = "N", default_value = "1,2,4,8")]
        n: String,
        /// Eigen-residual target.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Seed of the start vectors.
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consolidate the reports under a run directory.
    Report {
        dir: PathBuf,
        /// Add two-grid extrapolations of every constant.
        #[arg(long)]
        richardson: bool,
        /// Destination; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DomainArgs {
    /// Geometry spec (.json) or mask file.
    #[arg(long)]
    domain: PathBuf,
    /// Resolution for geometry specs.
    #[arg(long)]
    h: Option<f64>,
    /// Declare a bare mask file convex.
    #[arg(long)]
    convex: bool,
}

#[derive(Args)]
struct FieldArgs {
    /// Field file to read.
    #[arg(long, conflicts_with = "generate")]
    field: Option<PathBuf>,
    /// Generate a seeded test field instead of reading one.
    #[arg(long, value_enum)]
    generate: Option<Generator>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecFlavor {
    Hd1,
    Hd2,
}

#[derive(Clone, Copy, ValueEnum)]
enum VectorKindArg {
    Edge,
    Face,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Essential,
    Natural,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    #[value(name = "D")]
    D,
    #[value(name = "R")]
    R,
    #[value(name = "remark")]
    Remark,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Generator {
    /// Uniform random values on the support.
    Random,
    /// A discrete gradient of a random potential.
    Gradient,
    /// A discrete rotation of a random potential.
    Solenoidal,
    /// The field `(-y, x, 0)/r²` around the vertical axis through the box center.
    Circulation,
}

fn runtime(force: bool, deterministic: bool) -> CliResult<Runtime> {
    let threads = match std::env::var("HHX_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => return Err(CliError::Input(format!("HHX_THREADS must be a positive integer, got {s:?}"))),
        },
        Err(_) => None,
    };
    let n = threads.unwrap_or(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    Ok(Runtime {
        threads: n,
        deterministic: deterministic || threads.is_none(),
        force,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let rt = runtime(cli.force, cli.deterministic)?;
    match cli.command {
        Command::Voxelize { spec, h, out } => commands::voxelize(&rt, &spec, h, &out),
        Command::Decompose {
            domain,
            input,
            flavor,
            kind,
            tol,
            out,
        } => commands::decompose(&rt, &domain, &input, flavor, kind, tol, &out),
        Command::Zeromean {
            domain,
            input,
            theorem,
            field_flavor,
            axis,
            axes,
            n,
            out,
        } => commands::zeromean(
            &rt,
            &domain,
            &input,
            commands::ZeromeanOpts {
                theorem,
                flavor: field_flavor,
                axis,
                axes,
                n,
            },
            &out,
        ),
        Command::Constants {
            domain,
            which,
            axis,
            n,
            tol,
            seed,
            out,
        } => commands::constants(&rt, &domain, &which, &axis, &n, tol, seed, &out),
        Command::Report { dir, richardson, out } => report::report(&rt, &dir, richardson, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
