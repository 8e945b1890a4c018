use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use seqmatch_cli::{commands, RunConfig};

/// Sequence-based place recognition over low-resolution, patch-normalized
/// images.
#[derive(Parser, Debug)]
#[command(name = "seqmatch", version, about, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build template stores from frame directories.
    Preprocess(Common),
    /// Match a query traverse against a reference traverse.
    Match(Common),
    /// Match temporally blurred copies of the query at several exposures.
    BlurSweep {
        #[command(flatten)]
        common: Common,
        /// Do not write the blurred frames to the run directory.
        #[arg(long)]
        no_frames: bool,
    },
    /// Rank the true match under the four normalization variants.
    RankAnalysis(Common),
    /// Score an existing matches CSV against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        matches: PathBuf,
        /// Query frames in the run, warm-up included; defaults to the frame
        /// count of the query directory.
        #[arg(long)]
        total_frames: Option<usize>,
    },
}

/// Run directory, config file and per-key overrides. Flags win over the
/// file.
#[derive(Args, Debug)]
struct Common {
    /// Run directory for all outputs.
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    reference_dir: Option<String>,
    #[arg(long)]
    query_dir: Option<String>,
    #[arg(long)]
    reference_store: Option<String>,
    #[arg(long)]
    ground_truth: Option<String>,
    /// Crop as x0,y0,width,height.
    #[arg(long)]
    reference_crop: Option<String>,
    #[arg(long)]
    query_crop: Option<String>,
    #[arg(long)]
    rx: Option<String>,
    #[arg(long)]
    ry: Option<String>,
    #[arg(long)]
    n_p: Option<String>,
    /// Sequence length in query frames.
    #[arg(long, short = 'n')]
    sequence_length: Option<String>,
    #[arg(long)]
    half_window: Option<String>,
    #[arg(long)]
    v_min: Option<String>,
    #[arg(long)]
    v_max: Option<String>,
    #[arg(long)]
    v_step: Option<String>,
    #[arg(long)]
    v_av: Option<String>,
    /// Acceptance threshold on the sequence score.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    #[arg(long)]
    fp_tolerance: Option<String>,
    #[arg(long)]
    reference_spacing: Option<String>,
    #[arg(long)]
    query_spacing: Option<String>,
    /// Exposures in milliseconds, comma separated.
    #[arg(long)]
    exposures_ms: Option<String>,
    #[arg(long)]
    source_fps: Option<String>,
    #[arg(long)]
    histogram_bins: Option<String>,
    /// Learn the query as it runs and match it against itself.
    #[arg(long)]
    online: bool,
    /// Run every kernel on the calling thread.
    #[arg(long)]
    serial: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("reference_dir", &self.reference_dir),
            ("query_dir", &self.query_dir),
            ("reference_store", &self.reference_store),
            ("ground_truth", &self.ground_truth),
            ("reference_crop", &self.reference_crop),
            ("query_crop", &self.query_crop),
            ("rx", &self.rx),
            ("ry", &self.ry),
            ("n_p", &self.n_p),
            ("sequence_length", &self.sequence_length),
            ("half_window", &self.half_window),
            ("v_min", &self.v_min),
            ("v_max", &self.v_max),
            ("v_step", &self.v_step),
            ("v_av", &self.v_av),
            ("threshold", &self.threshold),
            ("fp_tolerance", &self.fp_tolerance),
            ("reference_spacing", &self.reference_spacing),
            ("query_spacing", &self.query_spacing),
            ("exposures_ms", &self.exposures_ms),
            ("source_fps", &self.source_fps),
            ("histogram_bins", &self.histogram_bins),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        cfg.online |= self.online;
        cfg.serial |= self.serial;
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(c) => commands::preprocess(&c.resolve()?, &c.out),
        Command::Match(c) => commands::run_match(&c.resolve()?, &c.out).map(drop),
        Command::BlurSweep { common, no_frames } => {
            commands::run_blur_sweep(&common.resolve()?, &common.out, !no_frames).map(drop)
        }
        Command::RankAnalysis(c) => commands::run_rank_analysis(&c.resolve()?, &c.out).map(drop),
        Command::Eval {
            common,
            matches,
            total_frames,
        } => commands::evaluate(&common.resolve()?, &matches, total_frames, &common.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
