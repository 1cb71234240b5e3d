//! The `spinlab` command line: every subcommand reads its inputs, calls into
//! `spinlab-core`, and writes one JSON or CSV document that embeds its
//! configuration.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
pub mod input;
mod output;

pub use output::Output;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or malformed input files.
    Usage(String),
    /// A computation refused its inputs.
    Domain(spinlab_core::Error),
    Io(String),
}

impl From<spinlab_core::Error> for CliError {
    fn from(e: spinlab_core::Error) -> Self {
        CliError::Domain(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug, Serialize)]
#[command(name = "spinlab", version, about = "Correlation decay experiments for colorings and the antiferromagnetic Potts model")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    #[serde(skip)]
    pub threads: usize,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Exact conditional marginals of every vertex.
    Marginals(MarginalsArgs),
    /// Sample the Jacobian norm of the tree recursion over capped inputs.
    Certify(CertifyArgs),
    /// Influence matrix spectrum and per-distance influence sums.
    Influence(InfluenceArgs),
    /// Glauber dynamics: exact mixing, coalescence, autocorrelation or sampling.
    Glauber(GlauberArgs),
    /// Local coupling of two conditionings of one vertex.
    Couple(CoupleArgs),
    /// Spatial mixing and influence decay profiles on trees.
    Decay(DecayArgs),
    /// Decay constants for a regime, and the resulting radius and girth.
    Constants(ConstantsArgs),
    /// Random graph of bounded degree and large girth.
    GenGraph(GenGraphArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    /// Built-in graph: bintree:h, dary:d:h, path:n or cycle:n.
    #[arg(long)]
    pub tree: Option<String>,
    /// Graph file: `n m` then one `u v` line per edge.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Potts inverse temperature; colorings when absent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Instance file with `q`, optional `lists` and optional `beta`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Pinning file: JSON map from vertex to color.
    #[arg(long)]
    pub pin_file: Option<PathBuf>,
    /// Inline pins `vertex:color`; may repeat.
    #[arg(long = "pin")]
    pub pins: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Tree engine on forests, enumeration otherwise.
    Auto,
    Tree,
    Oracle,
}

#[derive(Args, Debug, Serialize)]
pub struct MarginalsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Engine::Auto)]
    pub engine: Engine,
    #[arg(long, default_value_t = 2_000_000)]
    pub state_cap: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyArg {
    /// Weighted norm with the coloring weights.
    Coloring,
    /// Plain norm with children capped by 1/(q - delta).
    Unweighted,
    Potts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Strong,
    Weak,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub q: usize,
    /// Maximum degree.
    #[arg(long)]
    pub delta_max: usize,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Strong)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2_000_000)]
    pub state_cap: u64,
    /// Source vertex for per-distance influence sums.
    #[arg(long)]
    pub source: Option<usize>,
    /// Distances for the sums, `a:b` or a list.
    #[arg(long, default_value = "1:3")]
    pub depths: String,
    /// Also check the sum-of-influences inequality at radii R < K.
    #[arg(long, requires = "source")]
    pub check_radius: Option<usize>,
    #[arg(long, requires = "check_radius")]
    pub check_k: Option<usize>,
    /// Include the full influence matrix in JSON output.
    #[arg(long)]
    pub matrix: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlauberMethod {
    /// Worst-start total variation by evolving the exact transition matrix.
    Exact,
    /// Grand-coupling coalescence times.
    Coalescence,
    /// Integrated autocorrelation time of a color-count observable.
    Autocorrelation,
    /// Empirical vertex marginals along one chain.
    Sample,
}

#[derive(Args, Debug, Serialize)]
pub struct GlauberArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = GlauberMethod::Exact)]
    pub method: GlauberMethod,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 5000)]
    pub state_cap: u64,
    /// Step limit for exact mixing, coalescence and sampling.
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Burn-in, in steps for sampling and in sweeps for autocorrelation.
    #[arg(long, default_value_t = 1000)]
    pub burnin: u64,
    #[arg(long, default_value_t = 4000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 50)]
    pub max_lag: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Vertex whose color differs between the two laws.
    #[arg(long)]
    pub u: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub c: usize,
    #[arg(long = "radius", visible_alias = "R", default_value_t = 2)]
    pub radius: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = spinlab_core::coupling::DEFAULT_DEPTH_CAP)]
    pub depth_cap: usize,
    #[arg(long, default_value_t = 2_000_000)]
    pub state_cap: u64,
    /// Compare with the exact Wasserstein distance from enumeration.
    #[arg(long)]
    pub exact_w1: bool,
    /// Emit one JSON line per trial instead of a summary document.
    #[arg(long)]
    pub lines: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    Ssm,
    Wsm,
    Tid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Auto,
    Exact,
    Heuristic,
}

#[derive(Args, Debug, Serialize)]
pub struct DecayArgs {
    #[arg(long, value_enum)]
    pub kind: DecayKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Vertex the profile is measured at; the tree root when absent.
    #[arg(long)]
    pub root: Option<usize>,
    #[arg(long, default_value = "1:6")]
    pub depths: String,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 200)]
    pub random_pairs: usize,
    #[arg(long, default_value_t = 2)]
    pub flip_passes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2_000_000)]
    pub state_cap: u64,
    /// Contraction rate parameter for a dominance check against the constants.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    Coloring,
    Potts,
    EpsDelta,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstantsArgs {
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub delta_max: usize,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Contraction rate parameter; taken from the certifier when absent.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also search the radius, the second radius and the girth.
    #[arg(long)]
    pub search: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct GenGraphArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub max_degree: usize,
    #[arg(long, default_value_t = 3)]
    pub min_girth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit the plain edge-list format instead of JSON.
    #[arg(long)]
    pub text: bool,
}

/// Parses `argv`, runs the command and writes its output; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spinlab: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build().map_err(|e| CliError::Io(e.to_string()))?;
    let out = pool.install(|| commands::dispatch(cli))?;
    let bytes = out.render(cli.format, &serde_json::to_value(cli).expect("arguments serialize"))?;
    match &cli.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}
