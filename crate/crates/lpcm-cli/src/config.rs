//! Run configuration: defaults, optional JSON config file, CLI flags, in
//! increasing precedence. The fully resolved configuration is embedded in
//! the run manifest so any run can be reproduced from the manifest alone.

use lpcm::basis::{GrowMuConfig, GrowNConfig};
use lpcm::operators::MassLumping;
use lpcm::solver::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Ply,
    Vtk,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Ply => "ply",
            OutputFormat::Vtk => "vtk",
        }
    }
}

/// Optional JSON config file contents; every field can be overridden by a
/// CLI flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mu: Option<f64>,
    pub num_modes: Option<usize>,
    pub p: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub newton_iters: Option<usize>,
    pub seed: Option<u64>,
    pub mass_lumping: Option<MassLumping>,
    pub jobs: Option<usize>,
    pub format: Option<OutputFormat>,
    pub n_max: Option<usize>,
    pub mu_start: Option<f64>,
    pub mu_factor: Option<f64>,
    pub mu_max: Option<f64>,
    pub max_depth: Option<usize>,
}

/// The fully resolved configuration of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub mu: Option<f64>,
    pub num_modes: Option<usize>,
    pub p: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub newton_iters: usize,
    pub seed: u64,
    pub mass_lumping: MassLumping,
    pub jobs: Option<usize>,
    pub format: OutputFormat,
    pub grow_n: GrowNConfig,
    pub grow_mu: GrowMuConfig,
    pub max_depth: usize,
}

impl Resolved {
    /// Solver configuration for a fixed-mu solve (mu filled per round by the
    /// growing loops).
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            mu: self.mu.unwrap_or(SolverConfig::default().mu),
            p: self.p,
            rho: self.rho,
            tol_rel_change: self.tol,
            max_iter: self.max_iter,
            newton_iters: self.newton_iters,
            seed: self.seed,
        }
    }
}

/// Merge precedence: CLI flag, then config file, then default.
pub fn resolve(cli: &crate::CommonArgs, file: &FileConfig) -> Resolved {
    let grow_defaults_n = GrowNConfig::default();
    let grow_defaults_mu = GrowMuConfig::default();
    Resolved {
        mu: cli.mu.or(file.mu),
        num_modes: cli.num_modes.or(file.num_modes),
        p: cli.p.or(file.p).unwrap_or(0.8),
        rho: cli.rho.or(file.rho).unwrap_or(1.0),
        epsilon: cli.epsilon.or(file.epsilon).unwrap_or(0.01),
        tol: cli.tol.or(file.tol).unwrap_or(1e-3),
        max_iter: cli.max_iter.or(file.max_iter).unwrap_or(5000),
        newton_iters: file.newton_iters.unwrap_or(8),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        mass_lumping: cli.mass_lumping.or(file.mass_lumping).unwrap_or_default(),
        jobs: cli.jobs.or(file.jobs),
        format: cli.format.or(file.format).unwrap_or(OutputFormat::Ply),
        grow_n: GrowNConfig {
            n_start: grow_defaults_n.n_start,
            n_max: file.n_max.unwrap_or(grow_defaults_n.n_max),
        },
        grow_mu: GrowMuConfig {
            mu_start: file.mu_start.unwrap_or(grow_defaults_mu.mu_start),
            mu_factor: file.mu_factor.unwrap_or(grow_defaults_mu.mu_factor),
            mu_max: file.mu_max.unwrap_or(grow_defaults_mu.mu_max),
        },
        max_depth: file.max_depth.unwrap_or(8),
    }
}

pub fn load_file_config(path: Option<&std::path::Path>) -> Result<FileConfig, String> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))
        }
    }
}
