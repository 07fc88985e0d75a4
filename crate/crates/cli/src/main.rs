//! `werewolf`: simulation, tournaments, preference selection, KTO evaluation,
//! ratings, analysis, replay checking and the lobby service.
//!
//! Exit status is 0 on success, 1 for invalid input or usage, 2 for runtime
//! failures such as I/O or network errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "werewolf", version, about = "Multi-agent Werewolf toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play seeded matches and write a run directory.
    Simulate(SimulateArgs),
    /// Run a head-to-head or random-competition tournament from a plan file.
    Tournament(TournamentArgs),
    /// Build a labelled preference dataset from game logs.
    Select(SelectArgs),
    /// Evaluate the KTO objective over a CSV of `r,kl,label` rows.
    KtoEval(KtoArgs),
    /// TrueSkill ratings over game logs.
    Rate(RateArgs),
    /// Win-rate matrix, behavioral metrics and offline evaluation.
    Analyze(AnalyzeArgs),
    /// Replay and audit recorded games.
    Replay(ReplayArgs),
    /// Serve the lobby API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "swg9")]
    setup: String,
    /// A kind (`random`, `informed`, `greedy`), a `village:wolf` pair, or a TOML plan file.
    #[arg(long, default_value = "random")]
    agents: String,
    #[arg(long, default_value_t = 1)]
    games: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    concurrency: usize,
    #[arg(long)]
    predict_roles: bool,
    #[arg(long)]
    no_transcripts: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Head2head,
    Random,
}

#[derive(Debug, Args)]
struct TournamentArgs {
    #[arg(value_enum)]
    mode: Mode,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// A directory of `*.jsonl` logs or a single log file.
    #[arg(long)]
    logs: PathBuf,
    #[arg(long, default_value = "heuristic,vote,verifier")]
    selectors: String,
    #[arg(long)]
    out: PathBuf,
    /// Chat-completions URL for the speech verifier; the structural check is used otherwise.
    #[arg(long)]
    verifier_endpoint: Option<String>,
    #[arg(long, default_value = "verifier")]
    verifier_model: String,
}

#[derive(Debug, Args)]
struct KtoArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    #[arg(long, default_value_t = 0.7)]
    lambda_d: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_u: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateMode {
    Individual,
    Team,
}

#[derive(Debug, Args)]
struct RateArgs {
    #[arg(long)]
    logs: PathBuf,
    #[arg(long, value_enum, default_value = "individual")]
    mode: RateMode,
    /// Write the table as CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    logs: PathBuf,
    /// Annotated games to evaluate an agent against offline.
    #[arg(long)]
    offline: Option<PathBuf>,
    /// Agent kind for offline evaluation, or a TOML agent spec file.
    #[arg(long, default_value = "random")]
    agent: String,
    /// Restrict behavioral metrics to one participant.
    #[arg(long)]
    participant: Option<String>,
    /// Directory for CSV tables; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// TOML with `[[participants]]` agent specs and optional `[deadlines]`.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Tournament(a) => commands::tournament(a),
        Command::Select(a) => commands::select(a),
        Command::KtoEval(a) => commands::kto_eval(a),
        Command::Rate(a) => commands::rate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Replay(a) => commands::replay(a),
        Command::Serve(a) => commands::serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
