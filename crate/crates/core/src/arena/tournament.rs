use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_match, ArenaError, MatchOptions, Pool, SeatAssignment};
use crate::agents::{AgentKind, AgentSpec};
use crate::engine::{
    write_jsonl, Faction, GameLog, GameState, Seat, Setup, SetupVariant, Winner,
    LOG_SCHEMA_VERSION,
};
use crate::exec::{map_indexed, Execution};

/// Seed for game `index` of a plan, independent of scheduling order.
pub fn derive_seed(plan_seed: u64, index: u64, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(plan_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.update(stream.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TournamentMode {
    #[serde(alias = "head_to_head", alias = "headtohead")]
    Head2head,
    Random,
}

impl std::str::FromStr for TournamentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "head2head" | "headtohead" => Ok(TournamentMode::Head2head),
            "random" => Ok(TournamentMode::Random),
            other => Err(format!("unknown mode `{other}` (expected head2head or random)")),
        }
    }
}

/// How the second game of a head-to-head pair is seeded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapSeed {
    /// Each game gets its own seed.
    #[default]
    Fresh,
    /// Both games of a pair share the deal; only the faction owners swap.
    Mirrored,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TournamentPlan {
    pub mode: TournamentMode,
    pub setup: SetupVariant,
    pub games: u32,
    pub seed: u64,
    /// Matches in flight at once; 0 lets the pool decide.
    #[serde(default)]
    pub concurrency: usize,
    #[serde(default)]
    pub swap_seed: SwapSeed,
    #[serde(default)]
    pub predict_roles: bool,
    #[serde(default = "default_true")]
    pub record_transcripts: bool,
    pub participants: Vec<AgentSpec>,
}

impl TournamentPlan {
    pub fn from_toml(text: &str) -> Result<TournamentPlan, ArenaError> {
        let plan: TournamentPlan =
            toml::from_str(text).map_err(|e| ArenaError::Plan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<TournamentPlan, ArenaError> {
        TournamentPlan::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ArenaError> {
        let pool = Pool::new(self.participants.iter().cloned())?;
        match self.mode {
            TournamentMode::Head2head => {
                if pool.names().len() != 2 {
                    return Err(ArenaError::Plan(format!(
                        "head2head needs exactly 2 participants, got {}",
                        self.participants.len()
                    )));
                }
                if !self.games.is_multiple_of(2) {
                    return Err(ArenaError::Plan(format!(
                        "head2head needs an even game count, got {}",
                        self.games
                    )));
                }
            }
            TournamentMode::Random => {
                if self.participants.is_empty() {
                    return Err(ArenaError::Plan("random mode needs participants".into()));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(canonical))
    }

    fn options(&self) -> MatchOptions {
        MatchOptions {
            record_transcripts: self.record_transcripts,
            predict_roles: self.predict_roles,
            ..MatchOptions::default()
        }
    }

    fn execution(&self) -> Execution {
        if self.concurrency == 0 {
            Execution::default()
        } else {
            Execution::with_threads(self.concurrency)
        }
    }
}

/// Win record for one participant on one side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactionTally {
    pub games: u32,
    pub wins: u32,
    pub draws: u32,
}

impl FactionTally {
    pub fn rate(&self) -> Option<f64> {
        (self.games > 0).then(|| f64::from(self.wins) / f64::from(self.games))
    }

    fn record(&mut self, winner: Option<Winner>, side: Faction) {
        self.games += 1;
        match winner {
            Some(w) if w.faction() == Some(side) => self.wins += 1,
            Some(Winner::Draw) | None => self.draws += 1,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadToHeadResult {
    pub a: String,
    pub b: String,
    pub games: u32,
    pub a_as_village: FactionTally,
    pub a_as_wolf: FactionTally,
    pub b_as_village: FactionTally,
    pub b_as_wolf: FactionTally,
    #[serde(skip)]
    pub logs: Vec<GameLog>,
}

impl HeadToHeadResult {
    /// Combined win rate of `a` over both sides; `None` when no games ran.
    pub fn average_a(&self) -> Option<f64> {
        (self.games > 0).then(|| {
            f64::from(self.a_as_village.wins + self.a_as_wolf.wins) / f64::from(self.games)
        })
    }

    pub fn average_b(&self) -> Option<f64> {
        (self.games > 0).then(|| {
            f64::from(self.b_as_village.wins + self.b_as_wolf.wins) / f64::from(self.games)
        })
    }
}

fn faction_assignment(setup: &Setup, village: &str, wolf: &str) -> Result<SeatAssignment, ArenaError> {
    let state = GameState::new_game(setup.clone())?;
    Ok(state
        .roles()
        .into_iter()
        .map(|(seat, role)| {
            let owner = match role.faction() {
                Faction::Village => village,
                Faction::Wolf => wolf,
            };
            (seat, owner.to_string())
        })
        .collect())
}

/// Paired games with every participant playing each faction `games / 2` times.
pub fn head_to_head(plan: &TournamentPlan) -> Result<HeadToHeadResult, ArenaError> {
    if plan.mode != TournamentMode::Head2head {
        return Err(ArenaError::Plan("plan mode is not head2head".into()));
    }
    plan.validate()?;
    let pool = Pool::new(plan.participants.iter().cloned())?;
    let a = plan.participants[0].name.clone();
    let b = plan.participants[1].name.clone();
    let opts = plan.options();
    let logs = map_indexed(plan.games as usize, plan.execution(), |i| {
        let i = i as u64;
        let seed = match plan.swap_seed {
            SwapSeed::Fresh => derive_seed(plan.seed, i, "match"),
            SwapSeed::Mirrored => derive_seed(plan.seed, i / 2, "match"),
        };
        let setup = Setup::new(plan.setup, seed);
        let (village, wolf) = if i.is_multiple_of(2) { (&a, &b) } else { (&b, &a) };
        let assignment = faction_assignment(&setup, village, wolf)?;
        let id = format!("h2h-{i:05}");
        run_match(setup, &assignment, &pool, &id, &opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut result = HeadToHeadResult {
        a: a.clone(),
        b: b.clone(),
        games: plan.games,
        a_as_village: FactionTally::default(),
        a_as_wolf: FactionTally::default(),
        b_as_village: FactionTally::default(),
        b_as_wolf: FactionTally::default(),
        logs: Vec::new(),
    };
    for (i, log) in logs.iter().enumerate() {
        if i % 2 == 0 {
            result.a_as_village.record(log.winner, Faction::Village);
            result.b_as_wolf.record(log.winner, Faction::Wolf);
        } else {
            result.b_as_village.record(log.winner, Faction::Village);
            result.a_as_wolf.record(log.winner, Faction::Wolf);
        }
    }
    result.logs = logs;
    Ok(result)
}

/// Per-participant statistics from a random competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantStats {
    pub name: String,
    /// Seats occupied over all games.
    pub seats: u32,
    /// Seats that ended on the winning faction.
    pub seat_wins: u32,
    /// Games with at least one seat.
    pub games: u32,
    /// Games where at least one of its seats was on the winning faction.
    pub game_wins: u32,
}

impl ParticipantStats {
    pub fn seat_win_rate(&self) -> Option<f64> {
        (self.seats > 0).then(|| f64::from(self.seat_wins) / f64::from(self.seats))
    }

    /// Binomial standard error of [`seat_win_rate`](Self::seat_win_rate).
    pub fn standard_error(&self) -> Option<f64> {
        let p = self.seat_win_rate()?;
        Some((p * (1.0 - p) / f64::from(self.seats)).sqrt())
    }

    pub fn game_win_rate(&self) -> Option<f64> {
        (self.games > 0).then(|| f64::from(self.game_wins) / f64::from(self.games))
    }

    /// `rate±stderr` with three decimals, or `n/a`.
    pub fn formatted(&self) -> String {
        match (self.seat_win_rate(), self.standard_error()) {
            (Some(p), Some(se)) => format!("{p:.3}±{se:.3}"),
            _ => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomResult {
    pub games: u32,
    pub participants: Vec<ParticipantStats>,
    #[serde(skip)]
    pub logs: Vec<GameLog>,
}

/// Uniform seeded seat assignment for game `index`.
pub fn random_assignment(plan_seed: u64, index: u64, seats: u8, names: &[String]) -> SeatAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan_seed, index, "assign"));
    (1..=seats)
        .map(|s| (Seat(s), names[rng.random_range(0..names.len())].clone()))
        .collect()
}

/// Every seat of every game independently drawn from the pool.
pub fn random_competition(plan: &TournamentPlan) -> Result<RandomResult, ArenaError> {
    if plan.mode != TournamentMode::Random {
        return Err(ArenaError::Plan("plan mode is not random".into()));
    }
    plan.validate()?;
    let pool = Pool::new(plan.participants.iter().cloned())?;
    let names: Vec<String> = plan.participants.iter().map(|p| p.name.clone()).collect();
    let opts = plan.options();
    let logs = map_indexed(plan.games as usize, plan.execution(), |i| {
        let i = i as u64;
        let setup = Setup::new(plan.setup, derive_seed(plan.seed, i, "match"));
        let assignment = random_assignment(plan.seed, i, plan.setup.seats(), &names);
        run_match(setup, &assignment, &pool, &format!("rnd-{i:05}"), &opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let participants = tally_participants(&names, &logs);
    Ok(RandomResult {
        games: plan.games,
        participants,
        logs,
    })
}

/// Seat-level and game-level wins per participant over tagged logs.
pub fn tally_participants(names: &[String], logs: &[GameLog]) -> Vec<ParticipantStats> {
    let mut stats: BTreeMap<&str, ParticipantStats> = names
        .iter()
        .map(|n| {
            (
                n.as_str(),
                ParticipantStats {
                    name: n.clone(),
                    seats: 0,
                    seat_wins: 0,
                    games: 0,
                    game_wins: 0,
                },
            )
        })
        .collect();
    for log in logs {
        let winning = log.winner.and_then(Winner::faction);
        let mut seen: BTreeMap<&str, bool> = BTreeMap::new();
        for (seat, who) in &log.participants {
            let Some(entry) = stats.get_mut(who.as_str()) else {
                continue;
            };
            let won = log
                .roles
                .get(seat)
                .is_some_and(|r| Some(r.faction()) == winning);
            entry.seats += 1;
            entry.seat_wins += u32::from(won);
            *seen.entry(who.as_str()).or_default() |= won;
        }
        for (who, won) in seen {
            let entry = stats.get_mut(who).expect("seen names are tracked");
            entry.games += 1;
            entry.game_wins += u32::from(won);
        }
    }
    names
        .iter()
        .map(|n| stats[n.as_str()].clone())
        .collect()
}

/// Which agents drive which seats in a plain simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentPlan {
    ByFaction { village: AgentSpec, wolf: AgentSpec },
    Uniform { all: AgentSpec },
}

impl AgentPlan {
    /// A bare kind name (`random`, `informed`, `greedy`) for every seat.
    pub fn uniform(kind: AgentKind) -> AgentPlan {
        let name = serde_json::to_value(kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_else(|| "agent".into());
        AgentPlan::Uniform {
            all: AgentSpec::scripted(name, kind),
        }
    }

    /// Parses a kind name or a `village:wolf` pair of kind names.
    pub fn from_kinds(text: &str) -> Result<AgentPlan, ArenaError> {
        let kind = |s: &str| s.parse::<AgentKind>().map_err(ArenaError::Plan);
        match text.split_once(':') {
            None => Ok(AgentPlan::uniform(kind(text)?)),
            Some((v, w)) => {
                let (vk, wk) = (kind(v)?, kind(w)?);
                Ok(AgentPlan::ByFaction {
                    village: AgentSpec::scripted(format!("village-{}", v.trim()), vk),
                    wolf: AgentSpec::scripted(format!("wolf-{}", w.trim()), wk),
                })
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<AgentPlan, ArenaError> {
        toml::from_str(text).map_err(|e| ArenaError::Plan(e.to_string()))
    }

    fn specs(&self) -> Vec<AgentSpec> {
        match self {
            AgentPlan::ByFaction { village, wolf } if village.name == wolf.name => {
                vec![village.clone()]
            }
            AgentPlan::ByFaction { village, wolf } => vec![village.clone(), wolf.clone()],
            AgentPlan::Uniform { all } => vec![all.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub setup: SetupVariant,
    pub games: u32,
    pub seed: u64,
    pub agents: AgentPlan,
    #[serde(default)]
    pub concurrency: usize,
    #[serde(default)]
    pub predict_roles: bool,
    #[serde(default = "default_true")]
    pub record_transcripts: bool,
}

impl SimulationPlan {
    pub fn new(setup: SetupVariant, games: u32, seed: u64, agents: AgentPlan) -> SimulationPlan {
        SimulationPlan {
            setup,
            games,
            seed,
            agents,
            concurrency: 0,
            predict_roles: false,
            record_transcripts: true,
        }
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("plan serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

/// Runs `plan.games` independent matches under the plan's agents.
pub fn simulate(plan: &SimulationPlan) -> Result<Vec<GameLog>, ArenaError> {
    let pool = Pool::new(plan.agents.specs())?;
    let opts = MatchOptions {
        record_transcripts: plan.record_transcripts,
        predict_roles: plan.predict_roles,
        ..MatchOptions::default()
    };
    let exec = if plan.concurrency == 0 {
        Execution::default()
    } else {
        Execution::with_threads(plan.concurrency)
    };
    map_indexed(plan.games as usize, exec, |i| {
        let setup = Setup::new(plan.setup, derive_seed(plan.seed, i as u64, "match"));
        let assignment = match &plan.agents {
            AgentPlan::Uniform { all } => (1..=plan.setup.seats())
                .map(|s| (Seat(s), all.name.clone()))
                .collect(),
            AgentPlan::ByFaction { village, wolf } => {
                faction_assignment(&setup, &village.name, &wolf.name)?
            }
        };
        run_match(setup, &assignment, &pool, &format!("sim-{i:05}"), &opts)
    })
    .into_iter()
    .collect()
}

/// Run metadata written next to `games.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub plan_hash: String,
    pub crate_version: String,
    pub log_schema_version: u32,
    pub games: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(kind: &str, plan_hash: String, started_unix: u64) -> Manifest {
        Manifest {
            kind: kind.into(),
            plan_hash,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            log_schema_version: LOG_SCHEMA_VERSION,
            games: 0,
            started_unix,
            finished_unix: started_unix,
            files: Vec::new(),
            summary: None,
        }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `games.jsonl` and `manifest.json` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, logs: &[GameLog], mut manifest: Manifest) -> Result<PathBuf, ArenaError> {
    fs::create_dir_all(dir)?;
    let games = dir.join("games.jsonl");
    write_jsonl(&games, logs).map_err(|e| ArenaError::Io(std::io::Error::other(e.to_string())))?;
    manifest.games = logs.len();
    manifest.finished_unix = unix_now();
    manifest.files = vec!["games.jsonl".into()];
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(std::io::Error::other)?;
    f.write_all(b"\n")?;
    Ok(games)
}
