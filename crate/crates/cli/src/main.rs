//! `rpf`: train, evaluate, replay and plot reinforced potential field planners.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rpf_core::eval::PlannerKind;

#[derive(Parser, Debug)]
#[command(name = "rpf", version, about = "Reinforced potential field multi-robot planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a planner with PPO; writes train_log.csv and checkpoints.
    Train(TrainArgs),
    /// Compare planners on paired seeds; writes comparison.csv and traces.
    Eval(EvalArgs),
    /// Export a trace (or replay CSV) as a flat per-step CSV.
    Replay(ReplayArgs),
    /// Render a trace or comparison CSV as SVG.
    Plot(PlotArgs),
}

/// Settings shared by `train` and `eval`. Flags override the config file.
#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset (circle4, circle6, circle8, circle8_wide, cluttered) or scenario file.
    #[arg(long)]
    scenario: Option<String>,
    /// Robot count for presets.
    #[arg(long)]
    robots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Episode horizon in steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// rpf_attention, rpf_mean_embed or ppo_steer.
    #[arg(long)]
    planner: Option<PlannerKind>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Environment steps between updates.
    #[arg(long)]
    batch_interval: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Hidden widths of the actor and critic trunks, e.g. 256,256.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Episodes between periodic checkpoints.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Suppress per-episode lines.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated planner names.
    #[arg(long, value_delimiter = ',')]
    planners: Option<Vec<PlannerKind>>,
    /// Checkpoint as `planner=path`, or a bare path when one learned planner is listed.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<String>,
    /// Number of paired seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// First evaluation seed.
    #[arg(long)]
    seed_start: Option<u64>,
    /// Skip writing per-episode trace files.
    #[arg(long)]
    no_traces: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Trace JSON or replay CSV.
    input: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Trace JSON or comparison CSV.
    input: PathBuf,
    /// Output SVG; defaults to the input path with an .svg extension.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Replay(a) => commands::replay(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
