//! Command-line front end for the lpcm pipeline: sparse-mode computation,
//! mesh segmentation, genus-0 patch refinement, spectral reconstruction and
//! the reference eigenbasis.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use config::OutputFormat;
use lpcm::operators::MassLumping;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "lpcm",
    version,
    about = "Compactly supported quasi-eigenfunctions of the Laplace-Beltrami operator, with mesh segmentation and patch-based partitioning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonArgsCli {
    /// Input mesh (OFF, OBJ, or PLY).
    input: PathBuf,

    /// Sparsity weight; alone it triggers the N-growing loop (Step 1a),
    /// together with --num-modes it requests one fixed solve.
    #[arg(long)]
    mu: Option<f64>,

    /// Mode count; alone it triggers the mu-growing loop (Step 1b).
    #[arg(long)]
    num_modes: Option<usize>,

    /// Sparsity exponent in (0, 1].
    #[arg(long)]
    p: Option<f64>,

    /// ADMM penalty parameter.
    #[arg(long)]
    rho: Option<f64>,

    /// Overlap-band tolerance for region growing.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Relative-change stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,

    #[arg(long)]
    max_iter: Option<usize>,

    /// RNG seed for the solver initializer.
    #[arg(long)]
    seed: Option<u64>,

    /// Mass lumping: full one-ring area or one third of it.
    #[arg(long, value_enum)]
    mass_lumping: Option<MassLumping>,

    /// Bound internal parallelism (thread count).
    #[arg(long)]
    jobs: Option<usize>,

    /// Output format for mesh payloads.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,

    /// JSON config file; CLI flags take precedence over its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for outputs (defaults to the input's directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Flag view shared with the config resolver.
pub struct CommonArgs {
    pub mu: Option<f64>,
    pub num_modes: Option<usize>,
    pub p: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub mass_lumping: Option<MassLumping>,
    pub jobs: Option<usize>,
    pub format: Option<OutputFormat>,
}

impl From<&CommonArgsCli> for CommonArgs {
    fn from(c: &CommonArgsCli) -> Self {
        CommonArgs {
            mu: c.mu,
            num_modes: c.num_modes,
            p: c.p,
            rho: c.rho,
            epsilon: c.epsilon,
            tol: c.tol,
            max_iter: c.max_iter,
            seed: c.seed,
            mass_lumping: c.mass_lumping,
            jobs: c.jobs,
            format: c.format,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute sparse modes (Step 1) and write them as scalar fields.
    Modes(CommonArgsCli),
    /// Modes plus region-growing segmentation (Step 2).
    Segment(CommonArgsCli),
    /// Segmentation refined to genus-0, at-most-two-boundary patches (Step 3).
    Patch(CommonArgsCli),
    /// Reconstruction error of vertex coordinates in a spectral basis.
    Reconstruct {
        #[command(flatten)]
        common: CommonArgsCli,
        /// Which basis to evaluate.
        #[arg(long, value_parser = ["mhb", "lpcm", "both"], default_value = "mhb")]
        basis: String,
        /// Comma-separated basis sizes, e.g. 8,15,30.
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
        /// Also write the reconstructed geometry per (basis, N).
        #[arg(long)]
        write_geometry: bool,
    },
    /// Reference manifold-harmonics eigenbasis.
    Eigs(CommonArgsCli),
}

/// An error carrying its process exit code: 2 usage, 3 solver, 4 topology.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }
}

impl From<lpcm::Error> for CliError {
    fn from(err: lpcm::Error) -> Self {
        use lpcm::Error as E;
        let code = match &err {
            E::InvalidParameter(_) => 2,
            E::RankDeficient(_)
            | E::FactorizationFailed { .. }
            | E::SolveResidual { .. }
            | E::EigenNonConvergence { .. }
            | E::DegenerateMode(_)
            | E::IncompleteCoverage { .. } => 3,
            E::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 4,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        let code = if err.kind() == std::io::ErrorKind::NotFound { 2 } else { 4 };
        CliError { code, message: err.to_string() }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LPCM_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Modes(c) | Command::Segment(c) | Command::Patch(c) | Command::Eigs(c) => c,
        Command::Reconstruct { common, .. } => common,
    };
    let file_cfg =
        config::load_file_config(common.config.as_deref()).map_err(CliError::usage)?;
    let resolved = config::resolve(&CommonArgs::from(common), &file_cfg);
    init_thread_pool(resolved.jobs);

    let out_dir = match &common.out_dir {
        Some(d) => d.clone(),
        None => common
            .input
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&out_dir)?;
    let job = commands::Job { input: &common.input, out_dir: &out_dir, resolved };

    match &cli.command {
        Command::Modes(_) => commands::cmd_modes(&job),
        Command::Segment(_) => commands::cmd_segment(&job),
        Command::Patch(_) => commands::cmd_patch(&job),
        Command::Reconstruct { basis, n_values, write_geometry, .. } => {
            if n_values.is_empty() {
                return Err(CliError::usage("--N requires at least one basis size"));
            }
            commands::cmd_reconstruct(&job, basis, n_values, *write_geometry)
        }
        Command::Eigs(_) => commands::cmd_eigs(&job),
    }
}

#[cfg(feature = "parallel")]
fn init_thread_pool(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn init_thread_pool(jobs: Option<usize>) {
    if jobs.is_some() {
        log::warn!("--jobs has no effect: built without the parallel feature");
    }
}
