//! Lobbies: seat plans, human seat sessions and the match driver thread.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use tokio::sync::watch;
use werewolf_core::agents::{
    build_observation, check_action, fallback_action, public_history, Action, Agent, AgentSpec,
    Decision, Observation, PublicEvent, Stage,
};
use werewolf_core::analytics::{detection_accuracy, JudgmentSheet, SeatIdentity};
use werewolf_core::arena::{derive_seed, play_observed, MatchOptions, SeatAssignment};
use werewolf_core::engine::{GameLog, GameState, Rule, Seat, Setup, SetupVariant};

use crate::config::{Deadlines, ServiceConfig};
use crate::wire::{
    Ack, ApiError, CreateLobby, Envelope, JudgmentAck, LobbyCreated, LobbyResult, SeatMessage,
    SeatPlan, SCHEMA_VERSION,
};

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn unix_ms(at: Instant) -> u64 {
    let now = Instant::now();
    let wall = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default();
    let wall = if at >= now {
        wall + (at - now)
    } else {
        wall.saturating_sub(now - at)
    };
    wall.as_millis() as u64
}

fn new_token() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

struct Pending {
    prompt_id: u64,
    obs: Observation,
    deadline: Instant,
    reply: mpsc::Sender<Action>,
}

#[derive(Default)]
struct SeatInner {
    token: Option<String>,
    messages: Vec<Envelope>,
    next_prompt: u64,
    pending: Option<Pending>,
    answered: BTreeMap<u64, (Action, Ack)>,
    expired: BTreeSet<u64>,
}

/// Session state of one human seat: its message log and the open prompt.
pub struct SeatChannel {
    seat: Seat,
    inner: Mutex<SeatInner>,
    notify: watch::Sender<usize>,
}

impl SeatChannel {
    fn new(seat: Seat) -> SeatChannel {
        SeatChannel {
            seat,
            inner: Mutex::new(SeatInner::default()),
            notify: watch::channel(0).0,
        }
    }

    fn push_locked(&self, inner: &mut SeatInner, message: SeatMessage) {
        let index = inner.messages.len();
        inner.messages.push(Envelope {
            schema_version: SCHEMA_VERSION,
            index,
            message,
        });
        self.notify.send_replace(index + 1);
    }

    fn push(&self, message: SeatMessage) {
        let mut inner = lock(&self.inner);
        self.push_locked(&mut inner, message);
    }

    fn authorize(&self, token: Option<&str>) -> Result<(), ApiError> {
        match (&lock(&self.inner).token, token) {
            (Some(expected), Some(given)) if expected == given => Ok(()),
            _ => Err(ApiError::Auth),
        }
    }

    /// Message `index` if it exists, otherwise whether the stream is over.
    fn message(&self, index: usize) -> Result<Envelope, bool> {
        let inner = lock(&self.inner);
        match inner.messages.get(index) {
            Some(e) => Ok(e.clone()),
            None => Err(inner.messages.last().is_some_and(|e| e.message.is_final())),
        }
    }

    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.notify.subscribe()
    }

    fn submit(&self, prompt_id: u64, action: Action) -> Result<Ack, ApiError> {
        let mut inner = lock(&self.inner);
        if let Some((previous, ack)) = inner.answered.get(&prompt_id) {
            return if *previous == action {
                Ok(ack.clone())
            } else {
                Err(ApiError::AlreadyAnswered)
            };
        }
        if inner.expired.contains(&prompt_id) {
            return Err(ApiError::DeadlineExpired);
        }
        let pending = match &inner.pending {
            Some(p) if p.prompt_id == prompt_id => p,
            _ => return Err(ApiError::NotYourTurn),
        };
        if Instant::now() > pending.deadline {
            return Err(ApiError::DeadlineExpired);
        }
        check_action(&pending.obs, &action).map_err(|v| ApiError::illegal(v.rule, v.message))?;
        let pending = inner.pending.take().expect("checked above");
        if pending.reply.send(action.clone()).is_err() {
            return Err(ApiError::DeadlineExpired);
        }
        let ack = Ack {
            prompt_id,
            stage: pending.obs.stage,
            accepted: true,
        };
        inner.answered.insert(prompt_id, (action, ack.clone()));
        self.push_locked(&mut inner, SeatMessage::Acknowledged { prompt_id });
        Ok(ack)
    }
}

/// Plays a human seat by publishing prompts and waiting for submissions.
struct HumanSeat {
    channel: Arc<SeatChannel>,
    deadlines: Deadlines,
}

impl Agent for HumanSeat {
    fn decide(&mut self, obs: &Observation) -> Decision {
        let (tx, rx) = mpsc::channel();
        let deadline = Instant::now() + self.deadlines.for_stage(obs.stage);
        let prompt_id = {
            let mut inner = lock(&self.channel.inner);
            let prompt_id = inner.next_prompt;
            inner.next_prompt += 1;
            inner.pending = Some(Pending {
                prompt_id,
                obs: obs.clone(),
                deadline,
                reply: tx,
            });
            self.channel.push_locked(&mut inner, SeatMessage::Prompt {
                prompt_id,
                stage: obs.stage,
                deadline_unix_ms: unix_ms(deadline),
                observation: obs.clone(),
            });
            prompt_id
        };
        let wait = deadline.saturating_duration_since(Instant::now());
        if let Ok(action) = rx.recv_timeout(wait) {
            return Decision::scripted(action);
        }
        let mut inner = lock(&self.channel.inner);
        if let Ok(action) = rx.try_recv() {
            return Decision::scripted(action);
        }
        inner.pending = None;
        inner.expired.insert(prompt_id);
        let applied = fallback_action(obs);
        log::info!("seat {} missed the {} deadline", self.channel.seat, obs.stage.key());
        self.channel.push_locked(&mut inner, SeatMessage::Expired {
            prompt_id,
            applied: applied.clone(),
        });
        let mut decision = Decision::scripted(applied);
        decision.fallback = true;
        decision
    }

    fn interactive(&self) -> bool {
        true
    }
}

enum Status {
    Waiting,
    Running,
    Finished { log: Box<GameLog>, judgments_close: Instant },
    Failed(String),
}

struct LobbyState {
    status: Status,
    sheets: BTreeMap<Seat, JudgmentSheet>,
}

pub struct Lobby {
    pub id: String,
    operator_token: String,
    setup: Setup,
    plan: BTreeMap<Seat, SeatPlan>,
    specs: BTreeMap<String, AgentSpec>,
    deadlines: Deadlines,
    humans: BTreeMap<Seat, Arc<SeatChannel>>,
    state: Mutex<LobbyState>,
}

fn seat_plan(req: &CreateLobby, config: &ServiceConfig, variant: SetupVariant) -> Result<Vec<SeatPlan>, ApiError> {
    let n = variant.seats();
    match (&req.seats, req.humans) {
        (Some(seats), None) => {
            if seats.len() != usize::from(n) {
                return Err(ApiError::InvalidRequest(format!("{} seat entries for {n} seats", seats.len())));
            }
            Ok(seats.clone())
        }
        (None, Some(humans)) => {
            if humans > n {
                return Err(ApiError::InvalidRequest(format!("{humans} humans for {n} seats")));
            }
            let pool: Vec<String> = match &req.agents {
                Some(names) => names.clone(),
                None => config.participants.iter().map(|p| p.name.clone()).collect(),
            };
            if pool.is_empty() && humans < n {
                return Err(ApiError::InvalidRequest("no agents available for the remaining seats".into()));
            }
            let mut order: Vec<u8> = (1..=n).collect();
            order.sort_by_key(|s| derive_seed(req.seed, u64::from(*s), "human-seat"));
            let human: BTreeSet<u8> = order[..usize::from(humans)].iter().copied().collect();
            Ok((1..=n)
                .map(|s| {
                    if human.contains(&s) {
                        SeatPlan::Human
                    } else {
                        let pick = derive_seed(req.seed, u64::from(s), "seat-agent") % pool.len() as u64;
                        SeatPlan::Agent(pool[pick as usize].clone())
                    }
                })
                .collect())
        }
        _ => Err(ApiError::InvalidRequest("give exactly one of `seats` or `humans`".into())),
    }
}

impl Lobby {
    pub fn create(req: CreateLobby, config: &ServiceConfig) -> Result<Arc<Lobby>, ApiError> {
        let variant = req.variant.unwrap_or(SetupVariant::Swg9);
        let plan = seat_plan(&req, config, variant)?;
        let mut specs = BTreeMap::new();
        for entry in &plan {
            if let SeatPlan::Agent(name) = entry {
                let spec = config
                    .participant(name)
                    .ok_or_else(|| ApiError::InvalidRequest(format!("unknown agent `{name}`")))?;
                specs.insert(name.clone(), spec.clone());
            }
        }
        let deadlines = req.deadlines.unwrap_or(config.deadlines);
        deadlines.validate().map_err(ApiError::InvalidRequest)?;
        let mut setup = Setup::new(variant, req.seed);
        setup.explicit_roles = req.roles.clone();
        GameState::new_game(setup.clone()).map_err(|e| ApiError::InvalidRequest(e.to_string()))?;
        let plan: BTreeMap<Seat, SeatPlan> = (1..=variant.seats()).map(Seat).zip(plan).collect();
        let humans = plan
            .iter()
            .filter(|(_, p)| **p == SeatPlan::Human)
            .map(|(s, _)| (*s, Arc::new(SeatChannel::new(*s))))
            .collect();
        let lobby = Arc::new(Lobby {
            id: new_token(),
            operator_token: new_token(),
            setup,
            plan,
            specs,
            deadlines,
            humans,
            state: Mutex::new(LobbyState {
                status: Status::Waiting,
                sheets: BTreeMap::new(),
            }),
        });
        if lobby.humans.is_empty() {
            lobby.clone().start();
        }
        Ok(lobby)
    }

    pub fn created(&self) -> LobbyCreated {
        LobbyCreated {
            schema_version: SCHEMA_VERSION,
            lobby_id: self.id.clone(),
            operator_token: self.operator_token.clone(),
            seats: self.setup.variant.seats(),
            human_seats: self.humans.len() as u8,
            variant: self.setup.variant,
        }
    }

    pub fn variant(&self) -> SetupVariant {
        self.setup.variant
    }

    /// Claims the lowest free human seat; play starts once every human seat is claimed.
    pub fn join(self: &Arc<Lobby>) -> Result<(Seat, String), ApiError> {
        let mut claimed = None;
        let mut all_taken = true;
        for (seat, channel) in &self.humans {
            let mut inner = lock(&channel.inner);
            if inner.token.is_none() {
                if claimed.is_none() {
                    let token = new_token();
                    inner.token = Some(token.clone());
                    claimed = Some((*seat, token));
                } else {
                    all_taken = false;
                }
            }
        }
        let claimed = claimed.ok_or(ApiError::LobbyFull)?;
        if all_taken {
            self.clone().start();
        }
        Ok(claimed)
    }

    pub fn seat(&self, seat: Seat) -> Result<&Arc<SeatChannel>, ApiError> {
        self.humans.get(&seat).ok_or(ApiError::UnknownSeat)
    }

    pub fn authorize_seat(&self, seat: Seat, token: Option<&str>) -> Result<&Arc<SeatChannel>, ApiError> {
        let channel = self.seat(seat)?;
        channel.authorize(token)?;
        Ok(channel)
    }

    pub fn next_message(channel: &SeatChannel, index: usize) -> Result<Envelope, bool> {
        channel.message(index)
    }

    pub fn submit_action(&self, seat: Seat, token: Option<&str>, prompt_id: u64, action: Action) -> Result<Ack, ApiError> {
        self.authorize_seat(seat, token)?.submit(prompt_id, action)
    }

    fn start(self: Arc<Lobby>) {
        {
            let mut state = lock(&self.state);
            if !matches!(state.status, Status::Waiting) {
                return;
            }
            state.status = Status::Running;
        }
        std::thread::spawn(move || {
            let outcome = self.drive();
            let mut state = lock(&self.state);
            match outcome {
                Ok(log) => {
                    let close = Instant::now() + self.deadlines.judgment_window();
                    let round = log.rounds();
                    state.status = Status::Finished {
                        log: Box::new(log),
                        judgments_close: close,
                    };
                    for channel in self.humans.values() {
                        channel.push(SeatMessage::GameEnded {
                            round,
                            judgment_deadline_unix_ms: unix_ms(close),
                        });
                    }
                }
                Err(reason) => {
                    log::error!("lobby {} aborted: {reason}", self.id);
                    state.status = Status::Failed(reason.clone());
                    for channel in self.humans.values() {
                        channel.push(SeatMessage::Aborted { reason: reason.clone() });
                    }
                }
            }
        });
    }

    fn drive(&self) -> Result<GameLog, String> {
        let state = GameState::new_game(self.setup.clone()).map_err(|e| e.to_string())?;
        let truth = state.roles();
        let mut agents: Vec<Box<dyn Agent>> = Vec::new();
        let mut participants = SeatAssignment::new();
        for (seat, entry) in &self.plan {
            match entry {
                SeatPlan::Human => {
                    agents.push(Box::new(HumanSeat {
                        channel: self.humans[seat].clone(),
                        deadlines: self.deadlines,
                    }));
                    participants.insert(*seat, "human".into());
                }
                SeatPlan::Agent(name) => {
                    agents.push(self.specs[name].build(*seat, self.setup.seed, &truth));
                    participants.insert(*seat, name.clone());
                }
            }
        }
        let opts = MatchOptions {
            record_transcripts: true,
            predict_roles: false,
            ..MatchOptions::default()
        };
        let mut carded = false;
        let mut published = 0;
        let mut observer = |state: &GameState| {
            if !carded {
                carded = true;
                for (seat, channel) in &self.humans {
                    if let Ok(obs) = build_observation(state, *seat, Stage::Speech) {
                        channel.push(SeatMessage::RoleCard {
                            seat: *seat,
                            role: obs.role,
                            teammates: obs.teammates,
                            variant: obs.variant,
                            seats: obs.seats,
                        });
                    }
                }
            }
            let public = public_history(state.events());
            for event in public.iter().skip(published) {
                if matches!(event, PublicEvent::GameOver { .. }) {
                    continue;
                }
                for channel in self.humans.values() {
                    channel.push(SeatMessage::Public { event: event.clone() });
                }
            }
            published = public.len();
        };
        play_observed(state, &mut agents, &participants, &self.id, &opts, &mut observer).map_err(|e| e.to_string())
    }

    fn identities(&self) -> BTreeMap<Seat, SeatIdentity> {
        self.plan
            .iter()
            .map(|(seat, entry)| {
                let identity = match entry {
                    SeatPlan::Human => SeatIdentity::Human,
                    SeatPlan::Agent(name) => SeatIdentity::Ai(name.clone()),
                };
                (*seat, identity)
            })
            .collect()
    }

    pub fn submit_judgments(
        &self,
        seat: Seat,
        token: Option<&str>,
        judgments: BTreeMap<Seat, werewolf_core::analytics::Judgment>,
    ) -> Result<JudgmentAck, ApiError> {
        self.authorize_seat(seat, token)?;
        let mut state = lock(&self.state);
        let close = match &state.status {
            Status::Finished { judgments_close, .. } => *judgments_close,
            _ => return Err(ApiError::NotYourTurn),
        };
        let sheet = JudgmentSheet {
            game_id: self.id.clone(),
            judge: format!("seat-{seat}"),
            judge_seat: seat,
            judgments,
        };
        let ack = JudgmentAck {
            seat,
            judged: sheet.judgments.len(),
        };
        if let Some(previous) = state.sheets.get(&seat) {
            return if *previous == sheet {
                Ok(ack)
            } else {
                Err(ApiError::AlreadyAnswered)
            };
        }
        if Instant::now() > close {
            return Err(ApiError::DeadlineExpired);
        }
        let seats = self.setup.variant.seats();
        if let Some(bad) = sheet.judgments.keys().find(|s| s.0 == 0 || s.0 > seats || **s == seat) {
            return Err(ApiError::illegal(Rule::SeatRange, format!("cannot judge seat {bad}")));
        }
        let missing = sheet.missing(seats);
        if !missing.is_empty() {
            let list: Vec<String> = missing.iter().map(|s| s.to_string()).collect();
            return Err(ApiError::IllegalAction {
                rule: "judgment-incomplete".into(),
                message: format!("no verdict for seats {}", list.join(", ")),
            });
        }
        state.sheets.insert(seat, sheet);
        Ok(ack)
    }

    /// The result as visible to the holder of `token`.
    pub fn result(&self, token: Option<&str>) -> Result<LobbyResult, ApiError> {
        let operator = token == Some(self.operator_token.as_str());
        let judge = match operator {
            true => None,
            false => Some(
                self.humans
                    .iter()
                    .find(|(_, c)| c.authorize(token).is_ok())
                    .map(|(s, _)| *s)
                    .ok_or(ApiError::Auth)?,
            ),
        };
        let state = lock(&self.state);
        let (log, close) = match &state.status {
            Status::Finished { log, judgments_close } => (log, *judgments_close),
            Status::Failed(reason) => return Err(ApiError::InvalidRequest(format!("lobby aborted: {reason}"))),
            _ => return Err(ApiError::GameInProgress),
        };
        let revealed = match judge {
            Some(seat) => state.sheets.contains_key(&seat),
            None => state.sheets.len() == self.humans.len() || Instant::now() > close,
        };
        if !revealed {
            return Err(ApiError::JudgmentsPending);
        }
        let identities = self.identities();
        let sheets: Vec<JudgmentSheet> = state.sheets.values().cloned().collect();
        let truth = BTreeMap::from([(self.id.clone(), identities.clone())]);
        let detection = detection_accuracy(&sheets, &truth).map_err(|e| ApiError::InvalidRequest(e.to_string()))?;
        Ok(LobbyResult {
            schema_version: SCHEMA_VERSION,
            lobby_id: self.id.clone(),
            winner: log.winner,
            rounds: log.rounds(),
            roles: log.roles.clone(),
            identities,
            judgments_received: sheets.len(),
            human_seats: self.humans.len(),
            detection,
            log: operator.then(|| (**log).clone()),
        })
    }

    /// Blocks until play has finished or `timeout` passes; true when finished.
    pub fn wait_finished(&self, timeout: Duration) -> bool {
        let end = Instant::now() + timeout;
        while Instant::now() < end {
            if matches!(lock(&self.state).status, Status::Finished { .. } | Status::Failed(_)) {
                return true;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        false
    }
}
