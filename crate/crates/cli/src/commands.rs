use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use werewolf_core::agents::{AgentKind, AgentSpec, RemoteSpec, TemplateSet};
use werewolf_core::analytics::{
    behavior_csv, behavioral_metrics, offline_eval, rate_games, rated_games, rating_table,
    ratings_csv, win_matrix, win_matrix_csv, RatingMode, TrueSkillParams,
};
use werewolf_core::arena::{
    head_to_head, random_competition, simulate as run_simulation, unix_now, write_run, AgentPlan,
    ArenaError, Manifest, SimulationPlan, TournamentMode, TournamentPlan,
};
use werewolf_core::engine::{audit, read_dir, read_jsonl, replay as replay_log, GameLog, LogError, SetupVariant};
use werewolf_core::ktomath::{evaluate, read_examples_csv, KtoError, KtoParams};
use werewolf_core::selection::{emit_dataset, select_all, SelectionError, Selector, Verifier};
use werewolf_service::ServiceConfig;

use crate::{
    AnalyzeArgs, KtoArgs, Mode, RateArgs, RateMode, ReplayArgs, SelectArgs, ServeArgs, SimulateArgs,
    TournamentArgs,
};

/// Command failure, split by exit status.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

type Outcome = Result<(), Failure>;

fn invalid(m: impl fmt::Display) -> Failure {
    Failure::Invalid(m.to_string())
}

fn runtime(m: impl fmt::Display) -> Failure {
    Failure::Runtime(m.to_string())
}

impl From<ArenaError> for Failure {
    fn from(e: ArenaError) -> Self {
        match e {
            ArenaError::Io(_) => runtime(e),
            _ => invalid(e),
        }
    }
}

impl From<LogError> for Failure {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io(_) => runtime(e),
            LogError::Parse { .. } => invalid(e),
        }
    }
}

impl From<SelectionError> for Failure {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Io(_) => runtime(e),
            _ => invalid(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        runtime(e)
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    writeln!(io::stdout(), "{text}")?;
    Ok(())
}

/// A directory of `*.jsonl` files or one log file.
fn load_logs(path: &Path) -> Result<Vec<GameLog>, Failure> {
    let logs = if path.is_dir() {
        read_dir(path)?
    } else {
        read_jsonl(path).map_err(|e| match e {
            LogError::Io(io) => runtime(format!("{}: {io}", path.display())),
            other => other.into(),
        })?
    };
    Ok(logs)
}

fn agent_plan(text: &str) -> Result<AgentPlan, Failure> {
    let path = Path::new(text);
    if path.is_file() {
        Ok(AgentPlan::from_toml(&read_text(path)?)?)
    } else {
        Ok(AgentPlan::from_kinds(text)?)
    }
}

fn agent_spec(text: &str) -> Result<AgentSpec, Failure> {
    let path = Path::new(text);
    if path.is_file() {
        let spec: AgentSpec = toml::from_str(&read_text(path)?).map_err(invalid)?;
        spec.validate().map_err(invalid)?;
        Ok(spec)
    } else {
        let kind: AgentKind = text.parse().map_err(invalid)?;
        let spec = AgentSpec::scripted(text.trim(), kind);
        spec.validate().map_err(invalid)?;
        Ok(spec)
    }
}

pub fn simulate(a: SimulateArgs) -> Outcome {
    let setup: SetupVariant = a.setup.parse().map_err(invalid)?;
    let mut plan = SimulationPlan::new(setup, a.games, a.seed, agent_plan(&a.agents)?);
    plan.concurrency = a.concurrency;
    plan.predict_roles = a.predict_roles;
    plan.record_transcripts = !a.no_transcripts;
    let started = unix_now();
    let logs = run_simulation(&plan)?;
    let path = write_run(&a.out, &logs, Manifest::new("simulate", plan.hash(), started))?;
    let village = logs
        .iter()
        .filter(|l| l.winner == Some(werewolf_core::engine::Winner::Village))
        .count();
    println!(
        "{} games, village wins {village}, written to {}",
        logs.len(),
        path.display()
    );
    Ok(())
}

pub fn tournament(a: TournamentArgs) -> Outcome {
    let plan = TournamentPlan::from_toml(&read_text(&a.plan)?)?;
    let wanted = match a.mode {
        Mode::Head2head => TournamentMode::Head2head,
        Mode::Random => TournamentMode::Random,
    };
    if plan.mode != wanted {
        return Err(invalid(format!("plan declares mode {:?}, command asked for {wanted:?}", plan.mode)));
    }
    let started = unix_now();
    let (kind, logs, summary) = match a.mode {
        Mode::Head2head => {
            let r = head_to_head(&plan)?;
            let summary = serde_json::json!({
                "result": &r,
                "average_a": r.average_a(),
                "average_b": r.average_b(),
            });
            ("head2head", r.logs, summary)
        }
        Mode::Random => {
            let r = random_competition(&plan)?;
            let table: Vec<_> = r
                .participants
                .iter()
                .map(|p| serde_json::json!({ "stats": p, "seat_win_rate": p.formatted() }))
                .collect();
            let summary = serde_json::json!({ "games": r.games, "participants": table });
            ("random", r.logs, summary)
        }
    };
    let mut manifest = Manifest::new(kind, plan.hash(), started);
    manifest.summary = Some(summary.clone());
    write_run(&a.out, &logs, manifest)?;
    print_json(&summary)
}

pub fn select(a: SelectArgs) -> Outcome {
    let selectors = a
        .selectors
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse::<Selector>)
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    if selectors.is_empty() {
        return Err(invalid("no selectors given"));
    }
    let verifier = match a.verifier_endpoint {
        Some(endpoint) => Verifier::Remote(RemoteSpec::new(endpoint, a.verifier_model)),
        None => Verifier::Structural,
    };
    let logs = load_logs(&a.logs)?;
    let records = select_all(&logs, &selectors, &verifier, &TemplateSet::default())?;
    let stats = emit_dataset(&records, &a.out)?;
    print_json(&stats)
}

pub fn kto_eval(a: KtoArgs) -> Outcome {
    fs::File::open(&a.data).map_err(|e| runtime(format!("{}: {e}", a.data.display())))?;
    let params = KtoParams {
        beta: a.beta,
        lambda_d: a.lambda_d,
        lambda_u: a.lambda_u,
    };
    let kto = |e: KtoError| match &e {
        KtoError::Csv(inner) if inner.is_io_error() => runtime(e),
        _ => invalid(e),
    };
    let batch = read_examples_csv(&a.data).map_err(kto)?;
    let report = evaluate(&batch, &params).map_err(kto)?;
    print_json(&report)
}

pub fn rate(a: RateArgs) -> Outcome {
    let logs = load_logs(&a.logs)?;
    let mode = match a.mode {
        RateMode::Individual => RatingMode::Individual,
        RateMode::Team => RatingMode::Team,
    };
    let table = rate_games(&rated_games(&logs), mode, &TrueSkillParams::default()).map_err(invalid)?;
    let rows = rating_table(&table);
    match a.out {
        Some(path) => ratings_csv(&rows, fs::File::create(&path)?).map_err(runtime)?,
        None => ratings_csv(&rows, io::stdout().lock()).map_err(runtime)?,
    }
    Ok(())
}

fn csv_to(dir: Option<&PathBuf>, name: &str, write: impl FnOnce(&mut dyn Write) -> csv::Result<()>) -> Outcome {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut f = fs::File::create(dir.join(name))?;
            write(&mut f).map_err(runtime)
        }
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "# {name}")?;
            write(&mut out).map_err(runtime)
        }
    }
}

pub fn analyze(a: AnalyzeArgs) -> Outcome {
    let logs = load_logs(&a.logs)?;
    let matrix = win_matrix(&logs);
    csv_to(a.out.as_ref(), "win_matrix.csv", |w| win_matrix_csv(&matrix, w))?;
    let behavior = behavioral_metrics(&logs, a.participant.as_deref());
    csv_to(a.out.as_ref(), "behavior.csv", |w| behavior_csv(&behavior, w))?;
    if let Some(path) = &a.offline {
        let games = load_logs(path)?;
        let spec = agent_spec(&a.agent)?;
        let report = offline_eval(&games, &spec).map_err(invalid)?;
        match &a.out {
            Some(dir) => {
                let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
                fs::write(dir.join("offline.json"), text + "\n")?;
            }
            None => print_json(&report)?,
        }
    }
    Ok(())
}

pub fn replay(a: ReplayArgs) -> Outcome {
    let logs = load_logs(&a.log)?;
    if logs.is_empty() {
        return Err(invalid(format!("{}: no games", a.log.display())));
    }
    let many = logs.len() > 1;
    for log in &logs {
        replay_log(log).map_err(|e| invalid(format!("{}: replay diverged: {e}", log.game_id)))?;
        audit(log).map_err(|problems| invalid(format!("{}: {}", log.game_id, problems.join("; "))))?;
        let winner = log
            .winner
            .map(|w| format!("{w:?}"))
            .unwrap_or_else(|| "none".into());
        let line = format!("winner: {winner}, rounds: {}", log.rounds());
        if many {
            println!("{}: {line}", log.game_id);
        } else {
            println!("{line}");
        }
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Outcome {
    let config = match &a.plan {
        Some(path) => ServiceConfig::from_toml(&read_text(path)?).map_err(invalid)?,
        None => ServiceConfig::default(),
    };
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| invalid(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(werewolf_service::serve(addr, config))?;
    Ok(())
}
