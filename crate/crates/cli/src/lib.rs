//! The `esai` command line.
//!
//! Every subcommand reads `key=value` configs and dataset directories, writes
//! only to the paths it is given, and maps failures to exit codes:
//! 0 success, 1 usage, 2 data or format, 3 numeric (divergence, coarse
//! simulation sampling). `ESAI_THREADS` caps the worker pool (0 = all cores).

mod commands;
mod inputs;
pub mod report;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(esai_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(esai_core::Error::Divergence { .. } | esai_core::Error::SamplingTooCoarse { .. }) => {
                EXIT_NUMERIC
            }
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<esai_core::Error> for CliError {
    fn from(e: esai_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "esai", version, about = "Event-based synthetic aperture imaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an occluded scene into a dataset directory
    Simulate(SimulateArgs),
    /// Warp events onto the target plane and write them as an event file
    Refocus(RefocusArgs),
    /// Render one row of an event stream as an epipolar-plane image
    Epi(EpiArgs),
    /// Accumulation baseline: count refocused events, min-max normalize
    Acc(AccArgs),
    /// Train the spiking encoder and convolutional decoder
    Train(TrainArgs),
    /// Reconstruct an image with a trained checkpoint
    Infer(InferArgs),
    /// Compute PSNR, SSIM or APSE
    Eval(EvalArgs),
    /// Summarize sweep runs into a CSV table and a plot
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene configuration (`key=value` lines)
    #[arg(long)]
    pub scene: PathBuf,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
    /// Noise seed, overriding the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config key
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Where events come from: a dataset directory or an event file.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["sample", "events"])))]
pub struct EventSource {
    /// Dataset directory
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// Event file (`.bin` or `.csv`)
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PsiArgs {
    /// `auto`, `from-meta` or `PX,PY` in px/s
    #[arg(long, default_value = "auto")]
    pub psi: String,
    /// Horizontal search bounds for `auto`, `LO:HI`
    #[arg(long, default_value = "-200:200", allow_hyphen_values = true)]
    pub bounds: String,
    /// Vertical search bounds for `auto`; the axis is pinned at 0 without it
    #[arg(long, allow_hyphen_values = true)]
    pub y_bounds: Option<String>,
    /// Focus metric for `auto`: combined, variance or density
    #[arg(long, default_value = "combined")]
    pub metric: String,
    /// Reference time in µs (default: the sample's reference frame, else the stream midpoint)
    #[arg(long)]
    pub t_ref: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RefocusArgs {
    #[command(flatten)]
    pub source: EventSource,
    #[command(flatten)]
    pub psi: PsiArgs,
    /// Refocused event file; coordinates are rounded and off-frame events dropped
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the warp rate used, as `key=value`
    #[arg(long)]
    pub psi_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EpiArgs {
    /// Event file, usually refocused
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub row: usize,
    /// Viewpoint (time) bins
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// merged or signed
    #[arg(long, default_value = "merged")]
    pub mode: String,
    /// `.pgm` (min-max scaled) or `.f32`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AccArgs {
    /// Refocused event file
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `.pgm` or `.f32`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("data_source").required(true).args(["data", "sample"])))]
pub struct TrainArgs {
    /// Directory whose subdirectories are dataset samples
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Individual dataset directories
    #[arg(long, num_args = 1..)]
    pub sample: Vec<PathBuf>,
    /// Validation samples (directory of samples), scored after every epoch
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Training configuration (`key=value` lines)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint to write
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch CSV `epoch,loss,psnr_val`
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub source: EventSource,
    #[command(flatten)]
    pub psi: PsiArgs,
    /// Skip refocusing: the event file is already refocused
    #[arg(long)]
    pub refocused: bool,
    #[arg(long)]
    pub model: PathBuf,
    /// Time intervals per stack; must match training
    #[arg(long, default_value_t = 30)]
    pub intervals: usize,
    /// `.pgm` or `.f32`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// psnr, ssim or apse
    #[arg(long)]
    pub metric: String,
    /// Reconstruction (`.pgm` or `.f32`)
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Reference image (`.pgm` or `.f32`)
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Dataset directory (APSE events and ground truth; scene info for `--record`)
    #[arg(long)]
    pub sample: Option<PathBuf>,
    /// Estimated warp rate for APSE: a file written by `refocus --psi-out`, or `PX,PY`
    #[arg(long)]
    pub psi: Option<String>,
    /// Ground-truth warp rate: `from-meta` or `PX,PY`
    #[arg(long, default_value = "from-meta")]
    pub gt_psi: String,
    /// Merge the result into this `key=value` run file
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of run subdirectories, each holding `run.txt`
    #[arg(long)]
    pub runs: PathBuf,
    /// CSV table
    #[arg(long)]
    pub out: PathBuf,
    /// PGM panel: PSNR against r_o and against r_t
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("ESAI_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("ESAI_THREADS={raw:?} is not a thread count")))?;
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|()| commands::dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("esai: {e}");
            e.exit_code()
        }
    }
}
