//! Command-line surface for the page-graph pipeline: `transcribe`, `order`,
//! `evaluate`, `mine` and `synth` subcommands over page-graph files.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_file_config, RunConfig, CONFIG_ENV_VAR};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARTIAL_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "magi-pipe",
    version,
    about = "Turn manga page graphs into ordered, diarised transcripts and evaluate them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonOpts {
    /// Character matching threshold
    #[arg(long)]
    tau: Option<f64>,
    /// Speaker predictions below this confidence become the placeholder
    #[arg(long)]
    confidence_cutoff: Option<f64>,
    /// Strictness slack, as a fraction of the page diagonal
    #[arg(long)]
    epsilon: Option<f64>,
    /// Erosion step, as a fraction of the shorter page side
    #[arg(long)]
    erosion_step: Option<f64>,
    /// IoU threshold for detection matching
    #[arg(long)]
    iou: Option<f64>,
    /// Detections kept per page and class
    #[arg(long)]
    top_k: Option<usize>,
    /// Base seed for generators
    #[arg(long)]
    seed: Option<u64>,
    /// Config file (TOML); defaults to $MAGI_PIPE_CONFIG when set
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep the clustering threshold over 0.05..0.95
    #[arg(long)]
    sweep_tau: bool,
    /// Interleave panel marker comments in transcripts
    #[arg(long)]
    panel_markers: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate diarised transcripts from page-graph files
    Transcribe {
        /// Page-graph files or directories of *.page.json
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Print panel and text reading order per page
    Order {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate page graphs against ground-truth annotations
    Evaluate {
        /// Page-graph files or directories of *.page.json
        #[arg(long = "pred", required = true, num_args = 1..)]
        pred: Vec<PathBuf>,
        /// Annotation files or directories of *.ann.json
        #[arg(long = "gt", required = true, num_args = 1..)]
        gt: Vec<PathBuf>,
        /// Score speakers by nearest character distance instead of the
        /// text-character scores
        #[arg(long)]
        speaker_baseline: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Mine pseudo-annotation pairs per page
    Mine {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Generate a synthetic dataset with known ground truth
    Synth {
        /// Number of pages
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Maximum split depth of generated layouts
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Score noise level; 0 agrees exactly with the ground truth
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn effective_config(common: &CommonOpts) -> Result<RunConfig, String> {
    let mut config = RunConfig::default();
    let file_path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from));
    if let Some(path) = file_path {
        config.apply_file(&load_file_config(&path)?);
    }
    macro_rules! flag {
        ($opt:expr, $field:ident) => {
            if let Some(v) = $opt {
                config.$field = v;
            }
        };
    }
    flag!(common.tau, tau);
    flag!(common.confidence_cutoff, confidence_cutoff);
    flag!(common.epsilon, epsilon_fraction);
    flag!(common.erosion_step, erosion_step_fraction);
    flag!(common.iou, iou_threshold);
    flag!(common.top_k, top_k);
    flag!(common.seed, seed);
    if common.sweep_tau {
        config.threshold_sweep = true;
    }
    if common.panel_markers {
        config.emit_panel_markers = true;
    }
    config.validate()?;
    Ok(config)
}

impl Command {
    fn common(&self) -> &CommonOpts {
        match self {
            Command::Transcribe { common, .. }
            | Command::Order { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Mine { common, .. }
            | Command::Synth { common, .. } => common,
        }
    }
}

fn out_dir(common: &CommonOpts) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn dispatch(command: &Command, config: &RunConfig) -> Result<bool, String> {
    match command {
        Command::Transcribe { inputs, common } => {
            let files = commands::collect_inputs(inputs, ".page.json")?;
            Ok(commands::cmd_transcribe(&files, &out_dir(common), config))
        }
        Command::Order { inputs, common } => {
            let files = commands::collect_inputs(inputs, ".page.json")?;
            Ok(commands::cmd_order(&files, common.out.as_deref(), config))
        }
        Command::Evaluate {
            pred,
            gt,
            speaker_baseline,
            common,
        } => {
            let pred_files = commands::collect_inputs(pred, ".page.json")?;
            let gt_files = commands::collect_inputs(gt, ".ann.json")?;
            Ok(commands::cmd_evaluate(
                &pred_files,
                &gt_files,
                &out_dir(common),
                config,
                *speaker_baseline,
            ))
        }
        Command::Mine { inputs, common } => {
            let files = commands::collect_inputs(inputs, ".page.json")?;
            Ok(commands::cmd_mine(&files, &out_dir(common), config))
        }
        Command::Synth {
            count,
            depth,
            noise,
            common,
        } => Ok(commands::cmd_synth(
            &out_dir(common),
            config,
            *count,
            *depth,
            *noise,
        )),
    }
}

/// Parse arguments and run. Exit code 0 when every input was processed,
/// 1 on partial failure, 2 on usage errors.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let config = match effective_config(cli.command.common()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match dispatch(&cli.command, &config) {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => ExitCode::from(EXIT_PARTIAL_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PARTIAL_FAILURE)
        }
    }
}
