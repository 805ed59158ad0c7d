//! `uslice`: compare point clouds, compute barycenters and classify documents
//! with sliced unbalanced transport distances.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sliced unbalanced optimal transport (SUOT / USOT) tools.
///
/// Exit codes: 0 success, 2 usage or input error, 3 solver error.
/// Set USLICE_THREADS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "uslice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance between two point clouds (CSV with header x1,...,xd,w).
    Compare(CompareArgs),
    /// USOT barycenter of several measures on a fixed grid.
    Barycenter(BarycenterArgs),
    /// Pairwise distance matrix and k-NN classification of documents.
    Docclass(DocclassArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Sliced OT; both measures must have the same mass.
    Sot,
    /// Sliced unbalanced OT (per-slice marginal relaxation).
    Suot,
    /// Unbalanced sliced OT (one global marginal relaxation).
    Usot,
    /// USOT with fresh directions at every Frank-Wolfe iteration.
    UsotStochastic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sot => "sot",
            Mode::Suot => "suot",
            Mode::Usot => "usot",
            Mode::UsotStochastic => "usot-stochastic",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Ground cost exponent p in |x - y|^p (p >= 1).
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// KL penalty on the first marginal.
    #[arg(long, default_value_t = 1.0)]
    pub rho1: f64,
    /// KL penalty on the second marginal.
    #[arg(long, default_value_t = 1.0)]
    pub rho2: f64,
    /// Number of random projection directions K.
    #[arg(long, default_value_t = 500)]
    pub projections: usize,
    /// Frank-Wolfe iterations F [default: 20; 10 for docclass].
    #[arg(long)]
    pub fw_iters: Option<usize>,
    /// Stop Frank-Wolfe early once the dual objective changes by less than this.
    #[arg(long)]
    pub fw_tol: Option<f64>,
    /// Seed for the projection directions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First measure (source).
    pub alpha: PathBuf,
    /// Second measure (target).
    pub beta: PathBuf,
    /// Which distance to compute.
    #[arg(long, value_enum, default_value_t = Mode::Usot)]
    pub mode: Mode,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the optimal first marginal (on the atoms of ALPHA) to this CSV.
    /// For suot this is the average over slices.
    #[arg(long, value_name = "OUT.csv")]
    pub marginals: Option<PathBuf>,
    /// Write the optimal second marginal (on the atoms of BETA) to this CSV.
    #[arg(long, value_name = "OUT.csv")]
    pub marginals_beta: Option<PathBuf>,
    /// Write the dual objective after every Frank-Wolfe step (iter,dual_value).
    #[arg(long, value_name = "OUT.csv")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    /// Input measure: point-cloud CSV or USOTGRID raster. Repeat for several inputs.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Barycentric weights, comma separated, summing to 1 [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Support grid as ROWSxCOLS pixel centres in the unit square.
    #[arg(long, value_name = "ROWSxCOLS", conflicts_with = "template")]
    pub grid: Option<String>,
    /// Support taken from a raster (its size) or point-cloud CSV (its points
    /// and normalised weights as initialisation).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Output path; a .csv extension writes a point cloud, anything else a raster.
    #[arg(long)]
    pub out: PathBuf,
    /// Mirror-descent learning rate.
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// Outer mirror-descent iterations.
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Write the barycenter objective at every outer iteration (iter,objective).
    #[arg(long, value_name = "OUT.csv")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DocclassArgs {
    /// Directory with one point-cloud CSV per document, named <doc_id>.csv.
    #[arg(long)]
    pub docs: PathBuf,
    /// CSV with header doc_id,label,split where split is train or test.
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of neighbours.
    #[arg(long, default_value_t = 1)]
    pub knn: usize,
    /// Which distance to use.
    #[arg(long, value_enum, default_value_t = Mode::Usot)]
    pub mode: Mode,
    /// Write the full distance matrix to this CSV.
    #[arg(long, value_name = "OUT.csv")]
    pub matrix: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(raw) = std::env::var("USLICE_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            commands::Failure::input(format!("USLICE_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| commands::Failure::input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Compare(args) => commands::compare(&args),
        Command::Barycenter(args) => commands::barycenter(&args),
        Command::Docclass(args) => commands::docclass(&args),
    });
    match result {
        Ok(stdout) => {
            println!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
