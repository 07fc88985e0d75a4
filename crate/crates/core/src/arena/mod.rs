//! Match driver and tournament orchestration.

mod tournament;

use std::collections::{BTreeMap, BTreeSet};

use crate::agents::{
    build_observation, build_witch_observation, check_action, render_prompt, render_response,
    Action, Agent, AgentSpec, Attempt, Decision, DecisionRecord, NightAction, Observation,
    PredictionRecord, SpeechPayload, Stage, TemplateSet,
};
use crate::engine::{
    consensus_victim, EngineError, GameLog, GameState, NightPacket, Phase, Role, Seat, Setup,
};

pub use tournament::{
    derive_seed, head_to_head, random_assignment, random_competition, simulate, tally_participants,
    unix_now, write_run, AgentPlan, FactionTally, HeadToHeadResult, Manifest, ParticipantStats,
    RandomResult, SimulationPlan, SwapSeed, TournamentMode, TournamentPlan,
};

/// Seat to participant id.
pub type SeatAssignment = BTreeMap<Seat, String>;

#[derive(Debug, thiserror::Error)]
pub enum ArenaError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct MatchOptions {
    /// Keep prompts, attempts and raw responses for every decision.
    pub record_transcripts: bool,
    /// Ask every surviving seat for role predictions at the end of each day.
    pub predict_roles: bool,
    pub templates: TemplateSet,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            record_transcripts: true,
            predict_roles: true,
            templates: TemplateSet::default(),
        }
    }
}

impl MatchOptions {
    /// No transcripts and no predictions; what bulk fuzzing wants.
    pub fn bare() -> MatchOptions {
        MatchOptions {
            record_transcripts: false,
            predict_roles: false,
            templates: TemplateSet::default(),
        }
    }
}

/// Builds the agent that plays `seat` for `participant`.
pub trait AgentFactory: Sync {
    fn build(
        &self,
        seat: Seat,
        participant: &str,
        truth: &BTreeMap<Seat, Role>,
        match_seed: u64,
    ) -> Result<Box<dyn Agent>, ArenaError>;
}

/// Participants resolved by name from agent specs.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    specs: BTreeMap<String, AgentSpec>,
}

impl Pool {
    pub fn new(specs: impl IntoIterator<Item = AgentSpec>) -> Result<Pool, ArenaError> {
        let mut map = BTreeMap::new();
        for spec in specs {
            spec.validate().map_err(ArenaError::Plan)?;
            if map.insert(spec.name.clone(), spec.clone()).is_some() {
                return Err(ArenaError::Plan(format!(
                    "participant `{}` listed twice",
                    spec.name
                )));
            }
        }
        Ok(Pool { specs: map })
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.specs.contains_key(name)
    }
}

impl AgentFactory for Pool {
    fn build(
        &self,
        seat: Seat,
        participant: &str,
        truth: &BTreeMap<Seat, Role>,
        match_seed: u64,
    ) -> Result<Box<dyn Agent>, ArenaError> {
        let spec = self
            .specs
            .get(participant)
            .ok_or_else(|| ArenaError::Assignment(format!("unknown participant `{participant}`")))?;
        Ok(spec.build(seat, match_seed, truth))
    }
}

/// Deals the setup, builds one agent per seat and plays the match to the end.
pub fn run_match(
    setup: Setup,
    assignment: &SeatAssignment,
    factory: &dyn AgentFactory,
    game_id: &str,
    opts: &MatchOptions,
) -> Result<GameLog, ArenaError> {
    let state = GameState::new_game(setup)?;
    let seats: BTreeSet<Seat> = state.all_seats().collect();
    let assigned: BTreeSet<Seat> = assignment.keys().copied().collect();
    if seats != assigned {
        return Err(ArenaError::Assignment(format!(
            "assignment covers seats {assigned:?}, expected 1..={}",
            state.seats()
        )));
    }
    let truth = state.roles();
    let mut agents = Vec::with_capacity(seats.len());
    for seat in &seats {
        agents.push(factory.build(*seat, &assignment[seat], &truth, state.setup().seed)?);
    }
    play(state, &mut agents, assignment, game_id, opts)
}

struct Recorder<'a> {
    opts: &'a MatchOptions,
    transcripts: Vec<DecisionRecord>,
    predictions: Vec<PredictionRecord>,
    degraded: BTreeSet<Seat>,
}

impl Recorder<'_> {
    /// Validates a decision, substituting the fallback when it is unusable, and logs it.
    fn accept(&mut self, obs: &Observation, mut decision: Decision) -> Action {
        if let Err(problem) = check_action(obs, &decision.action) {
            log::warn!("seat {} gave an unusable {} action: {problem}", obs.seat, obs.stage.key());
            decision.attempts.push(Attempt {
                raw: render_response(&decision.action),
                error: Some(problem.message),
            });
            decision.action = crate::agents::fallback_action(obs);
            decision.fallback = true;
        }
        if decision.degraded {
            self.degraded.insert(obs.seat);
        }
        if obs.stage == Stage::RolePrediction {
            if let Action::RolePrediction(roles) = &decision.action {
                self.predictions.push(PredictionRecord {
                    round: obs.round,
                    seat: obs.seat,
                    roles: roles.clone(),
                    fallback: decision.fallback,
                });
            }
        }
        if self.opts.record_transcripts {
            let messages = if decision.messages.is_empty() {
                render_prompt(obs, &self.opts.templates).unwrap_or_default()
            } else {
                decision.messages
            };
            let response = match decision.attempts.last() {
                Some(a) if !decision.fallback && a.error.is_none() => a.raw.clone(),
                _ => render_response(&decision.action),
            };
            let attempts = if decision.attempts.is_empty() && !decision.fallback {
                vec![Attempt {
                    raw: response.clone(),
                    error: None,
                }]
            } else {
                decision.attempts
            };
            self.transcripts.push(DecisionRecord {
                round: obs.round,
                seat: obs.seat,
                stage: obs.stage,
                ballot_index: obs.ballot_index,
                messages,
                attempts,
                response,
                action: decision.action.clone(),
                fallback: decision.fallback,
            });
        }
        decision.action
    }
}

/// Asks several seats at once; interactive agents are queried on their own threads.
fn decide_many(
    agents: &mut [Box<dyn Agent>],
    requests: Vec<Observation>,
) -> Vec<(Observation, Decision)> {
    let concurrent = requests
        .iter()
        .filter(|o| agents[o.seat.index()].interactive())
        .count()
        > 1;
    if !concurrent {
        return requests
            .into_iter()
            .map(|obs| {
                let d = agents[obs.seat.index()].decide(&obs);
                (obs, d)
            })
            .collect();
    }
    let mut by_seat: BTreeMap<Seat, Observation> =
        requests.into_iter().map(|o| (o.seat, o)).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = agents
            .iter_mut()
            .enumerate()
            .filter_map(|(i, agent)| {
                let obs = by_seat.remove(&Seat(i as u8 + 1))?;
                Some(scope.spawn(move || {
                    let d = agent.decide(&obs);
                    (obs, d)
                }))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("agent thread panicked"))
            .collect()
    })
}

fn night_target(action: &Action) -> (Option<Seat>, bool) {
    match action {
        Action::Night(NightAction { target, save, .. }) => (*target, *save),
        _ => (None, false),
    }
}

/// Drives an already dealt state with the given agents (indexed by seat − 1).
pub fn play(
    state: GameState,
    agents: &mut [Box<dyn Agent>],
    participants: &SeatAssignment,
    game_id: &str,
    opts: &MatchOptions,
) -> Result<GameLog, ArenaError> {
    play_observed(state, agents, participants, game_id, opts, &mut |_| {})
}

/// [`play`], calling `observer` before every decision step and once at the end.
pub fn play_observed(
    mut state: GameState,
    agents: &mut [Box<dyn Agent>],
    participants: &SeatAssignment,
    game_id: &str,
    opts: &MatchOptions,
    observer: &mut dyn FnMut(&GameState),
) -> Result<GameLog, ArenaError> {
    if agents.len() != usize::from(state.seats()) {
        return Err(ArenaError::Assignment(format!(
            "{} agents for {} seats",
            agents.len(),
            state.seats()
        )));
    }
    let mut rec = Recorder {
        opts,
        transcripts: Vec::new(),
        predictions: Vec::new(),
        degraded: BTreeSet::new(),
    };
    let mut day: Option<u32> = None;
    loop {
        observer(&state);
        match state.phase() {
            Phase::Terminal { .. } => break,
            Phase::NightActions => {
                let first: Vec<Observation> = state
                    .night_actors()
                    .into_iter()
                    .filter(|s| state.role(*s) != Role::Witch)
                    .map(|s| build_observation(&state, s, Stage::NightAction))
                    .collect::<Result<_, _>>()?;
                let mut packet = NightPacket::default();
                for (obs, decision) in decide_many(agents, first) {
                    let (target, _) = night_target(&rec.accept(&obs, decision));
                    match obs.role {
                        Role::Werewolf => {
                            packet.wolf_proposals.insert(obs.seat, target);
                        }
                        Role::Seer => packet.seer_target = target,
                        Role::Guard => packet.guard_target = target,
                        _ => {}
                    }
                }
                if let Some(witch) = state.living_with_role(Role::Witch) {
                    let victim = consensus_victim(&packet.wolf_proposals);
                    let obs = build_witch_observation(&state, witch, victim)?;
                    let decision = agents[witch.index()].decide(&obs);
                    let (target, save) = night_target(&rec.accept(&obs, decision));
                    packet.witch_save = save;
                    packet.witch_poison = if save { None } else { target };
                }
                state.resolve_night(packet)?;
            }
            Phase::DaySpeech => {
                day = Some(state.round());
                let seat = state.next_speaker().expect("speech phase has a speaker");
                let obs = build_observation(&state, seat, Stage::Speech)?;
                let decision = agents[seat.index()].decide(&obs);
                let payload = match rec.accept(&obs, decision) {
                    Action::Speech(p) => p,
                    _ => SpeechPayload::silent(),
                };
                if let Err(e) = state.submit_speech(seat, payload) {
                    log::warn!("speech by seat {seat} rejected: {e}");
                    state.submit_speech(seat, SpeechPayload::silent())?;
                }
            }
            Phase::DayVote { .. } => {
                day = Some(state.round());
                let requests: Vec<Observation> = state
                    .alive()
                    .iter()
                    .map(|s| build_observation(&state, *s, Stage::Vote))
                    .collect::<Result<_, _>>()?;
                let mut ballots = BTreeMap::new();
                for (obs, decision) in decide_many(agents, requests) {
                    let target = match rec.accept(&obs, decision) {
                        Action::Vote(v) => v.target,
                        _ => None,
                    };
                    ballots.insert(obs.seat, target);
                }
                state.apply_ballot(&ballots)?;
            }
            Phase::HunterWindow { .. } => {
                let hunter = state.pending_hunter().expect("hunter window has a hunter");
                let obs = build_observation(&state, hunter, Stage::HunterShot)?;
                let decision = agents[hunter.index()].decide(&obs);
                let target = match rec.accept(&obs, decision) {
                    Action::HunterShot(h) => h.target,
                    _ => None,
                };
                state.hunter_shoot(hunter, target)?;
            }
        }
        if let Some(round) = day {
            let day_over = state.phase() == Phase::NightActions && state.round() != round;
            if day_over {
                day = None;
                if opts.predict_roles {
                    let requests: Vec<Observation> = state
                        .alive()
                        .iter()
                        .map(|s| {
                            let mut obs = build_observation(&state, *s, Stage::RolePrediction)?;
                            obs.round = round;
                            Ok(obs)
                        })
                        .collect::<Result<_, EngineError>>()?;
                    for (obs, decision) in decide_many(agents, requests) {
                        rec.accept(&obs, decision);
                    }
                }
            } else if state.winner().is_some() {
                day = None;
            }
        }
    }
    let mut log = GameLog::from_state(game_id, &state);
    log.participants = participants.clone();
    log.transcripts = rec.transcripts;
    log.predictions = rec.predictions;
    log.degraded = rec.degraded;
    Ok(log)
}
