//! Command-line front end.

mod commands;

use std::ffi::OsString;
use std::fmt::Display;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "octmargin", version, about = "Tumor-margin patch classification for OCT volumes")]
pub struct Cli {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom volume with a ground-truth mask.
    Synth(SynthArgs),
    /// Detect the tissue surface in every frame of a volume.
    Detect(DetectArgs),
    /// Cut a volume into labeled 32×32×3 patches.
    Extract(ExtractArgs),
    /// Train a classifier on a patch set.
    Train(TrainArgs),
    /// Cross-validate a method's hyperparameter grid.
    Select(SelectArgs),
    /// Score trained models on test patch sets listed in a roster.
    Eval(EvalArgs),
    /// Render per-slice prediction overlays.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// flat, tilted or sinusoidal.
    #[arg(long)]
    pub surface: Option<String>,
    #[arg(long)]
    pub surface_row: Option<f64>,
    /// Rows per column for a tilted surface.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub surface_period: Option<f64>,
    /// Comma-separated column bands, e.g. `normal,tumor`.
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub texture_period: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub ball_radius: Option<f64>,
    #[arg(long)]
    pub shift: Option<f64>,
    /// Absolute floor on the edge threshold.
    #[arg(long)]
    pub edge_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub volume: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub volume: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// train (disjoint blocks) or test (overlapping blocks).
    #[arg(long)]
    pub mode: Option<String>,
    /// tumor, normal, mask or none.
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainingArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub method: Option<String>,
    /// Epochs; anything other than 45 compresses the learning-rate phases.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_scale: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Unlabeled patch set used by FN-DD.
    #[arg(long)]
    pub fn_set: Option<String>,
    /// Slice samples per epoch for FN-SS (default: training set size).
    #[arg(long)]
    pub fn_samples: Option<usize>,
    #[arg(long)]
    pub sampler_burn_in: Option<usize>,
    #[arg(long)]
    pub sampler_thin: Option<usize>,
    #[arg(long)]
    pub sampler_coords: Option<usize>,
    #[arg(long)]
    pub sampler_chains: Option<usize>,
    /// Convolution widths, e.g. `16,32,64`.
    #[arg(long)]
    pub filters: Option<String>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub patches: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// max or avg.
    #[arg(long)]
    pub pooling: Option<String>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub patches: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Concurrent training jobs (also `OCTMARGIN_WORKERS`).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Restrict the grid to these λ values (comma-separated).
    #[arg(long)]
    pub lambdas: Option<String>,
    /// Restrict the grid to these poolings (comma-separated).
    #[arg(long)]
    pub poolings: Option<String>,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Lines of `name model.octm test.octp`; paths relative to the roster.
    #[arg(long)]
    pub roster: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// Vertically averaged ROC output.
    #[arg(long)]
    pub roc: Option<String>,
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub volume: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// `all` or comma-separated frame indices.
    #[arg(long)]
    pub slices: Option<String>,
    #[arg(long)]
    pub min_pixels: Option<usize>,
    /// Also write each prediction field as OCTV.
    #[arg(long)]
    pub field: bool,
    #[command(flatten)]
    pub surface: SurfaceArgs,
}

/// Resolves options from flags, then the configuration file, and records
/// every resolved value for the echo.
pub(crate) struct Resolver {
    file: ConfigFile,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    fn new(file: ConfigFile) -> Self {
        Resolver { file, resolved: Vec::new() }
    }

    pub(crate) fn opt<T: FromStr + Display>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        let v = self.file.resolve(flag, key)?;
        if let Some(v) = &v {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(v)
    }

    pub(crate) fn or<T: FromStr + Display>(&mut self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match self.file.resolve(flag, key)? {
            Some(v) => {
                self.resolved.push((key.to_string(), v.to_string()));
                Ok(v)
            }
            None => {
                self.resolved.push((key.to_string(), format!("{default} (default)")));
                Ok(default)
            }
        }
    }

    pub(crate) fn req<T: FromStr + Display>(&mut self, flag: Option<T>, key: &str) -> Result<T> {
        self.opt(flag, key)?.ok_or_else(|| Error::Config(format!("missing required option --{key}")))
    }

    pub(crate) fn note(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    /// Prints the resolved configuration; commands call this once all
    /// options are resolved and before any work starts.
    pub(crate) fn echo(&self, command: &str) {
        eprintln!("octmargin {command}");
        for (k, v) in &self.resolved {
            eprintln!("  {k} = {v}");
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "out", "seed", "rows", "cols", "frames", "surface", "surface-row", "slope", "amplitude", "surface-period",
    "layout", "texture-period", "noise", "ball-radius", "shift", "edge-floor", "volume", "mode", "label", "method",
    "epochs", "lr-scale", "batch-size", "momentum", "fn-set", "fn-samples", "sampler-burn-in", "sampler-thin",
    "sampler-coords", "sampler-chains", "filters", "hidden", "patches", "lambda", "dropout", "pooling", "folds",
    "workers", "lambdas", "poolings", "roster", "roc", "model", "out-dir", "slices", "min-pixels",
];

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(std::path::Path::new(p))?,
        None => ConfigFile::default(),
    };
    file.check_keys(KNOWN_KEYS)?;
    let mut r = Resolver::new(file);
    match cli.command {
        Command::Synth(a) => commands::synth(&mut r, a),
        Command::Detect(a) => commands::detect(&mut r, a),
        Command::Extract(a) => commands::extract(&mut r, a),
        Command::Train(a) => commands::train(&mut r, a),
        Command::Select(a) => commands::select(&mut r, a),
        Command::Eval(a) => commands::eval(&mut r, a),
        Command::Overlay(a) => commands::overlay(&mut r, a),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit status. Failures print one `error[code]: message` line.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            e.exit_code()
        }
    }
}
