//! `jaitts`: train the toy generator, synthesize latent trajectories and run
//! the evaluation harness. Results go to stdout or files, logs to stderr.

mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jaitts_core::pipeline::{DEFAULT_CFG_SCALE, DEFAULT_SAMPLING_STEPS};

pub use error::{exit, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "jaitts", version, about = "Tokenizer-free speech-latent generator toolkit")]
pub struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the synthetic oracle; writes a checkpoint and a loss CSV.
    Train(TrainArgs),
    /// Generate a latent trajectory from a checkpoint.
    Synth(SynthArgs),
    /// Evaluation tools.
    Eval {
        #[command(subcommand)]
        target: EvalCommand,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key=value file with model and training fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    #[arg(long)]
    pub loss_csv: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training steps (overrides the file).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Override any config field, e.g. `--set batch_size=4` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated token ids.
    #[arg(long, allow_hyphen_values = true)]
    pub tokens: String,
    /// Reference trajectory that primes the patch history.
    #[arg(long)]
    pub ref_latents: Option<PathBuf>,
    /// Classifier-free guidance scale.
    #[arg(long, default_value_t = DEFAULT_CFG_SCALE)]
    pub cfg: f64,
    /// Euler steps per patch.
    #[arg(long, default_value_t = DEFAULT_SAMPLING_STEPS)]
    pub steps: usize,
    /// Cap on the patch history, at most the model's own cap.
    #[arg(long)]
    pub max_patches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Output trajectory (JLAT).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Character error rate over `id<TAB>reference<TAB>hypothesis` rows.
    Cer {
        #[arg(long)]
        input: PathBuf,
        /// `latin<TAB>thai` transliteration table.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cosine similarity over `id<TAB>reference.jemb<TAB>hypothesis.jemb` rows.
    Sim {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Real-time factor, from a given wall time and trajectory or by timing a synthesis.
    Rtf(RtfArgs),
    /// Wins, ties and losses from `model_a,model_b,outcome` votes.
    Tally {
        #[arg(long)]
        votes: PathBuf,
        /// Name of the system the counts are reported for.
        #[arg(long)]
        ours: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["wall_seconds", "checkpoint"])))]
pub struct RtfArgs {
    /// Synthesis wall-clock time in seconds.
    #[arg(long, requires = "latents", conflicts_with = "checkpoint")]
    pub wall_seconds: Option<f64>,
    /// Trajectory whose duration is the denominator.
    #[arg(long)]
    pub latents: Option<PathBuf>,
    #[arg(long, requires = "tokens")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub tokens: Option<String>,
    #[arg(long)]
    pub ref_latents: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CFG_SCALE)]
    pub cfg: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_STEPS)]
    pub steps: usize,
    #[arg(long)]
    pub max_patches: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn log_level(cli: &Cli) -> log::LevelFilter {
    match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    }
}

/// Runs one invocation, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => commands::train(args, out),
        Command::Synth(args) => commands::synth(args, out),
        Command::Eval { target } => commands::eval(target, out),
    }
}
