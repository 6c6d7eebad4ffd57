//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{BcKind, CaseKind, ProjectionKind, Settings, SolverName, TauLaw};

#[derive(Debug, Parser)]
#[command(name = "ncvd", version, about = "Variable-density natural convection solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One simulation; writes the final-time errors and optional VTK snapshots.
    Run(RunArgs),
    /// Runs on a sequence of halving mesh sizes and reports observed orders.
    Convergence(ConvergenceArgs),
    /// Source-free run checking the discrete density energy identity.
    Stability(StabilityArgs),
    /// Checks the manufactured forcings against finite differences.
    #[command(name = "validate-mms")]
    ValidateMms(ValidateArgs),
}

/// Flags shared by the simulation commands. Each one overrides the key of
/// the same name in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with default values for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Subdivisions per side of the unit square.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time step; replaces `--tau-law`.
    #[arg(long, conflicts_with = "tau_law")]
    pub tau: Option<f64>,
    /// Time step as a power of h = 1/n.
    #[arg(long, value_enum)]
    pub tau_law: Option<TauLaw>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, value_enum)]
    pub case: Option<CaseKind>,
    #[arg(long, value_enum)]
    pub bc: Option<BcKind>,
    #[arg(long, value_enum)]
    pub projection: Option<ProjectionKind>,
    #[arg(long)]
    pub quad_degree: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing CSV output.
    #[arg(long)]
    pub force: bool,
    /// Write the mesh as `mesh.vtk`.
    #[arg(long)]
    pub dump_mesh: bool,
    /// Write the first step's assembled systems as Matrix Market files.
    #[arg(long)]
    pub export_matrices: bool,
}

impl CommonArgs {
    pub fn settings(&self) -> Settings {
        Settings {
            n: self.n,
            tau: self.tau,
            tau_law: self.tau_law,
            mu: self.mu,
            kappa: self.kappa,
            t_final: self.t_final,
            case: self.case,
            bc: self.bc,
            projection: self.projection,
            quad_degree: self.quad_degree,
            solver: self.solver,
            out: self.out.clone(),
            ..Settings::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Write a VTK snapshot every K steps (and of the initial state).
    #[arg(long, value_name = "K")]
    pub vtk_every: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Subdivisions of each run, coarse to fine, each twice the previous.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Number of resolutions run at the same time.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Transport the density by the raw velocity instead of its projection.
    #[arg(long)]
    pub break_projection: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Sample points per coordinate, including the end points.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Add one to the first momentum forcing component.
    #[arg(long)]
    pub perturb_forcing: bool,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
}
