//! `endorse-dyn`: simulate, analyse and fit endorsement dynamics.
//!
//! Every command takes its settings from an optional `--config` file
//! (`key=value` lines, or a previous `run.json`) with flags taking
//! precedence. Exit codes: 0 success, 1 numeric or convergence failure,
//! 2 usage or format error.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use endorse_core::Result;

use settings::Settings;

#[derive(Parser)]
#[command(name = "endorse-dyn", version, about = "Endorsement dynamics of emergent social hierarchy")]
struct Cli {
    /// `key=value` file or a previous `run.json`; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory.
    Simulate(SimulateArgs),
    /// Rank variance over a (beta1, beta2) grid.
    Sweep(SweepArgs),
    /// Analytic equilibrium branches over a beta1 grid.
    Bifurcate(BifurcateArgs),
    /// Maximum-likelihood fit of one score function.
    Fit(FitArgs),
    /// Fit several score functions and pick the best.
    Compare(CompareArgs),
    /// Convert rankings, placements or contests to the edge-list format.
    Convert(ConvertArgs),
}

#[derive(Args, Default)]
struct ModelArgs {
    /// rootdegree | pagerank | springrank
    #[arg(long)]
    score: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Endorsements per step.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    alpha_p: Option<String>,
    #[arg(long)]
    alpha_s: Option<String>,
    #[arg(long)]
    mask_diagonal: Option<String>,
    /// uniform | random_sparse
    #[arg(long)]
    init: Option<String>,
    /// Steps averaged for long-run summaries.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

impl ModelArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("score", &self.score);
        s.set_opt("n", &self.n);
        s.set_opt("m", &self.m);
        s.set_opt("lambda", &self.lambda);
        s.set_opt("beta2", &self.beta2);
        s.set_opt("seed", &self.seed);
        s.set_opt("alpha-p", &self.alpha_p);
        s.set_opt("alpha-s", &self.alpha_s);
        s.set_opt("mask-diagonal", &self.mask_diagonal);
        s.set_opt("init", &self.init);
        s.set_opt("window", &self.window);
        s.set_opt("out", &self.out);
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Also store score histories in trajectory.json.
    #[arg(long)]
    record_scores: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long, value_name = "START:STOP:NUM", allow_hyphen_values = true)]
    grid_beta1: Option<String>,
    #[arg(long, value_name = "START:STOP:NUM", allow_hyphen_values = true)]
    grid_beta2: Option<String>,
}

#[derive(Args)]
struct BifurcateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_name = "START:STOP:NUM", allow_hyphen_values = true)]
    grid_beta1: Option<String>,
    /// Elite group sizes, comma separated (default all).
    #[arg(long)]
    k: Option<String>,
    /// Add simulated long-run rank vectors at each grid point.
    #[arg(long)]
    overlay: bool,
    #[arg(long)]
    steps: Option<String>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_name = "PATH")]
    data: Option<String>,
    #[arg(long, value_name = "PATH")]
    warm_start: Option<String>,
    #[arg(long, value_name = "R")]
    restarts: Option<String>,
    /// Name used in the parameter table (default: file stem).
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    alpha_p: Option<String>,
    #[arg(long)]
    alpha_s: Option<String>,
    #[arg(long)]
    mask_diagonal: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

impl DataArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("data", &self.data);
        s.set_opt("warm-start", &self.warm_start);
        s.set_opt("restarts", &self.restarts);
        s.set_opt("dataset", &self.dataset);
        s.set_opt("alpha-p", &self.alpha_p);
        s.set_opt("alpha-s", &self.alpha_s);
        s.set_opt("mask-diagonal", &self.mask_diagonal);
        s.set_opt("out", &self.out);
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    score: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated score functions (default all three).
    #[arg(long)]
    scores: Option<String>,
}

#[derive(Args)]
struct ConvertArgs {
    /// edges | rankings | placements | contests
    #[arg(long)]
    from: Option<String>,
    #[arg(long, value_name = "PATH")]
    input: Option<String>,
    /// Rankings: how many top-ranked peers count as endorsed.
    #[arg(long)]
    top_k: Option<String>,
    /// Placements: hiring_to_degree | degree_to_hiring
    #[arg(long)]
    direction: Option<String>,
    /// Keep only this many most-endorsed nodes.
    #[arg(long)]
    restrict: Option<String>,
    /// Periods counted for --restrict, as START:END labels.
    #[arg(long)]
    period_window: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ENDORSE_DYN_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| endorse_core::Error::Config(format!("ENDORSE_DYN_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| endorse_core::Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut s = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Simulate(a) => {
            a.model.apply(&mut s);
            s.set_opt("beta1", &a.beta1);
            s.set_opt("steps", &a.steps);
            s.set_opt("record-scores", &a.record_scores);
            commands::simulate(&s)
        }
        Command::Sweep(a) => {
            a.model.apply(&mut s);
            s.set_opt("steps", &a.steps);
            s.set_opt("grid-beta1", &a.grid_beta1);
            s.set_opt("grid-beta2", &a.grid_beta2);
            commands::sweep(&s)
        }
        Command::Bifurcate(a) => {
            a.model.apply(&mut s);
            s.set_opt("grid-beta1", &a.grid_beta1);
            s.set_opt("k", &a.k);
            s.set_opt("steps", &a.steps);
            if a.overlay {
                s.set("overlay", true);
            }
            commands::bifurcate(&s)
        }
        Command::Fit(a) => {
            a.data.apply(&mut s);
            s.set_opt("score", &a.score);
            commands::fit_cmd(&s)
        }
        Command::Compare(a) => {
            a.data.apply(&mut s);
            s.set_opt("scores", &a.scores);
            commands::compare(&s)
        }
        Command::Convert(a) => {
            s.set_opt("from", &a.from);
            s.set_opt("input", &a.input);
            s.set_opt("top-k", &a.top_k);
            s.set_opt("direction", &a.direction);
            s.set_opt("restrict", &a.restrict);
            s.set_opt("period-window", &a.period_window);
            s.set_opt("out", &a.out);
            commands::convert(&s)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 1 } else { 2 })
        }
    }
}
