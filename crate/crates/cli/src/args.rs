use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use elastica::Evaluator;

#[derive(Debug, Parser)]
#[command(name = "elastica", version, about = "Elastic shape analysis of spherically parameterized surfaces")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand; flags override `--config`.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON solver configuration used as the base for the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long = "pole-margin", global = true)]
    pub pole_margin: Option<usize>,
    /// Frames of the initial linear path.
    #[arg(long, global = true)]
    pub frames: Option<usize>,
    #[arg(long, global = true, value_parser = parse_evaluator)]
    pub evaluator: Option<Evaluator>,
    #[arg(long = "harmonics-degree", global = true)]
    pub harmonics_degree: Option<usize>,
    #[arg(long = "time-modes", global = true)]
    pub time_modes: Option<usize>,
    #[arg(long, global = true)]
    pub eps1: Option<f64>,
    #[arg(long, global = true)]
    pub eps2: Option<f64>,
    #[arg(long = "grad-tol", global = true)]
    pub grad_tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Skip rigid alignment of the endpoints.
    #[arg(long = "no-align", global = true)]
    pub no_align: bool,
    /// Assert that no entropy is consumed; every command already honors this.
    #[arg(long, global = true)]
    pub seedless: bool,
}

fn parse_evaluator(s: &str) -> Result<Evaluator, String> {
    s.parse().map_err(|e: elastica::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a shape or path recipe (JSON) onto a grid.
    Gen(GenArgs),
    /// Normalize two surfaces and rotate the second onto the first.
    Align(AlignArgs),
    /// Path energy of a GIP1 path or of GIS1 frames given in order.
    Energy(EnergyArgs),
    /// Straighten the linear path between two surfaces.
    Geodesic(GeodesicArgs),
    /// Pairwise geodesic distances between the GIS1 files of a directory.
    Distmat(DistmatArgs),
    /// Per-node curvature table of a surface.
    Curvature(CurvatureArgs),
    /// Triangle mesh of a surface (or of every frame of a path).
    ExportObj(ExportObjArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Recipe file, or inline JSON when the argument starts with `{`.
    pub recipe: String,
    /// Grid size (rows and columns).
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Column count when different from `--grid`.
    #[arg(long = "n-v")]
    pub n_v: Option<usize>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Output for the normalized first surface.
    #[arg(long = "out-first")]
    pub out_first: PathBuf,
    /// Output for the aligned second surface.
    #[arg(long = "out-second")]
    pub out_second: PathBuf,
    /// JSON report of volumes, centers, axes and sign hypotheses.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// One GIP1 path, or two or more GIS1 frames.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Evaluate all four evaluators.
    #[arg(long = "all-evaluators")]
    pub all_evaluators: bool,
    /// JSON output; printed to stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// Output GIP1 path.
    #[arg(long, short)]
    pub out: PathBuf,
    /// JSON optimizer trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Directory for one OBJ mesh per frame.
    #[arg(long = "obj-dir")]
    pub obj_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistmatArgs {
    /// Directory of `.gis1` files; rows follow file-name order.
    pub dir: PathBuf,
    /// Output CSV.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Direct,
    Polyfit,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    pub surface: PathBuf,
    #[arg(long, value_enum, default_value_t = Estimator::Direct)]
    pub estimator: Estimator,
    /// Ring size of the polynomial-fit neighborhood.
    #[arg(long, default_value_t = 3)]
    pub neighborhood: usize,
    /// Output CSV.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scalar {
    None,
    K1,
    K2,
    Mean,
    Gauss,
    /// Euclidean distance to the north-pole point.
    PoleDistance,
}

#[derive(Debug, Args)]
pub struct ExportObjArgs {
    /// GIS1 surface or GIP1 path.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Scalar::None)]
    pub scalar: Scalar,
    /// Output file for a surface, directory for a path.
    #[arg(long, short)]
    pub out: PathBuf,
}
