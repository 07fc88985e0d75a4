//! Agent protocol: observations, actions, scripted baselines, prompt codecs and
//! the chat-completion adapter.

mod codec;
mod observation;
mod remote;
mod scripted;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Role, Rule, Seat};

pub use codec::{
    extract_object, fill_template, parse_action, render_prompt, render_response, ParseError, TemplateMissing,
    TemplateSet,
};
pub use observation::{
    build_observation, build_witch_observation, public_history, PrivateEvent, PublicEvent,
    WitchView,
};
pub use remote::{RemoteAgent, RemoteSpec, TransportError};
pub use scripted::{GreedyWolf, InformedVillager, RandomLegal};

/// Text used when a speech has to be substituted.
pub const NO_STATEMENT: &str = "(no statement)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    NightAction,
    Speech,
    Vote,
    HunterShot,
    RolePrediction,
}

impl Stage {
    pub fn key(self) -> &'static str {
        match self {
            Stage::NightAction => "night_action",
            Stage::Speech => "speech",
            Stage::Vote => "vote",
            Stage::HunterShot => "hunter_shot",
            Stage::RolePrediction => "role_prediction",
        }
    }
}

/// The role-filtered view one seat gets at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub seat: Seat,
    pub role: Role,
    pub round: u32,
    pub stage: Stage,
    pub variant: crate::engine::SetupVariant,
    pub seats: u8,
    pub alive: BTreeSet<Seat>,
    pub teammates: BTreeSet<Seat>,
    pub private_history: Vec<PrivateEvent>,
    pub public_history: Vec<PublicEvent>,
    pub speaking_order: Vec<Seat>,
    pub legal_targets: BTreeSet<Seat>,
    /// Whether "no target" (pass, abstain, no shot) is acceptable.
    pub may_pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witch: Option<WitchView>,
    #[serde(default)]
    pub ballot_index: u8,
}

/// A structured assertion about an earlier public event, checkable against the log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Claim {
    /// `seat` was announced dead at dawn after night `round`.
    Died { round: u32, seat: Seat },
    /// Night `round` ended without deaths.
    Peaceful { round: u32 },
    VotedOut { round: u32, seat: Seat },
    /// `voter` cast `target` in the final ballot of day `round`.
    Voted {
        round: u32,
        voter: Seat,
        target: Option<Seat>,
    },
    Shot {
        round: u32,
        shooter: Seat,
        target: Option<Seat>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechPayload {
    pub identity_to_present: String,
    #[serde(default)]
    pub identity_tags: BTreeMap<Seat, String>,
    #[serde(default)]
    pub vote_intent: Option<Seat>,
    #[serde(rename = "speech", alias = "text")]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub claims: Vec<Claim>,
}

impl SpeechPayload {
    pub fn silent() -> SpeechPayload {
        SpeechPayload {
            identity_to_present: String::new(),
            identity_tags: BTreeMap::new(),
            vote_intent: None,
            text: NO_STATEMENT.to_string(),
            claims: Vec::new(),
        }
    }
}

/// A night choice. For the witch, `save` uses the antidote and `target` is the poison target.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NightAction {
    pub target: Option<Seat>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub save: bool,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotePayload {
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub reason: String,
    /// `None` abstains.
    #[serde(rename = "vote")]
    pub target: Option<Seat>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunterAction {
    pub target: Option<Seat>,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", content = "action", rename_all = "snake_case")]
pub enum Action {
    Night(NightAction),
    Speech(SpeechPayload),
    Vote(VotePayload),
    HunterShot(HunterAction),
    RolePrediction(BTreeMap<Seat, Role>),
}

impl Action {
    pub fn stage(&self) -> Stage {
        match self {
            Action::Night(_) => Stage::NightAction,
            Action::Speech(_) => Stage::Speech,
            Action::Vote(_) => Stage::Vote,
            Action::HunterShot(_) => Stage::HunterShot,
            Action::RolePrediction(_) => Stage::RolePrediction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Message {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// One request/response exchange with an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// What an agent returns for one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Prompt actually sent, if the agent used one.
    pub messages: Vec<Message>,
    pub attempts: Vec<Attempt>,
    pub fallback: bool,
    /// Transport failure: the seat could not be reached at all.
    pub degraded: bool,
}

impl Decision {
    pub fn scripted(action: Action) -> Decision {
        Decision {
            action,
            messages: Vec::new(),
            attempts: Vec::new(),
            fallback: false,
            degraded: false,
        }
    }

    pub fn fallback(obs: &Observation) -> Decision {
        Decision {
            action: fallback_action(obs),
            messages: Vec::new(),
            attempts: Vec::new(),
            fallback: true,
            degraded: false,
        }
    }
}

/// Logged form of one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub round: u32,
    pub seat: Seat,
    pub stage: Stage,
    #[serde(default)]
    pub ballot_index: u8,
    pub messages: Vec<Message>,
    pub attempts: Vec<Attempt>,
    /// Raw structured output the action was taken from.
    pub response: String,
    pub action: Action,
    #[serde(default)]
    pub fallback: bool,
}

/// End-of-day role guesses by one seat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub round: u32,
    pub seat: Seat,
    pub roles: BTreeMap<Seat, Role>,
    #[serde(default)]
    pub fallback: bool,
}

pub trait Agent: Send {
    fn decide(&mut self, obs: &Observation) -> Decision;

    /// True when calls block on something external and benefit from running concurrently.
    fn interactive(&self) -> bool {
        false
    }
}

/// Deterministic substitute used after retries are exhausted or a deadline passes.
pub fn fallback_action(obs: &Observation) -> Action {
    match obs.stage {
        Stage::NightAction => {
            let target = if obs.may_pass {
                None
            } else {
                obs.legal_targets.iter().next().copied()
            };
            Action::Night(NightAction {
                target,
                save: false,
                reason: String::new(),
            })
        }
        Stage::Speech => Action::Speech(SpeechPayload::silent()),
        Stage::Vote => Action::Vote(VotePayload::default()),
        Stage::HunterShot => Action::HunterShot(HunterAction::default()),
        Stage::RolePrediction => Action::RolePrediction(
            (1..=obs.seats)
                .map(|s| (Seat(s), Role::SimpleVillager))
                .collect(),
        ),
    }
}

/// Why an action was refused, with the rule it broke.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

impl Violation {
    fn new(rule: Rule, message: impl Into<String>) -> Violation {
        Violation {
            rule,
            message: message.into(),
        }
    }
}

fn illegal_target_rule(obs: &Observation, s: Seat) -> Rule {
    if s.0 == 0 || s.0 > obs.seats {
        return Rule::SeatRange;
    }
    if !obs.alive.contains(&s) {
        return Rule::TargetAlive;
    }
    match (obs.stage, obs.role) {
        (Stage::Vote, _) if s == obs.seat => Rule::SelfVote,
        (Stage::Vote, _) => Rule::NotACandidate,
        (Stage::NightAction, Role::Guard) => Rule::ConsecutiveGuard,
        (Stage::NightAction, Role::Seer) => Rule::SeerSelfCheck,
        (Stage::NightAction, Role::Witch) if s == obs.seat => Rule::WitchSelfPoison,
        (Stage::NightAction, Role::Witch) => Rule::PoisonUsed,
        _ => Rule::SeatRange,
    }
}

/// Checks an action against the observation it answers.
pub fn check_action(obs: &Observation, action: &Action) -> Result<(), Violation> {
    if action.stage() != obs.stage {
        return Err(Violation::new(
            Rule::WrongPhase,
            format!("expected a {} response, got {}", obs.stage.key(), action.stage().key()),
        ));
    }
    let target_ok = |t: Option<Seat>| match t {
        None if obs.may_pass => Ok(()),
        None => Err(Violation::new(Rule::TargetRequired, "a target is required")),
        Some(s) if obs.legal_targets.contains(&s) => Ok(()),
        Some(s) => Err(Violation::new(
            illegal_target_rule(obs, s),
            format!("player {s} is not a legal choice; choose from {}", seat_list(&obs.legal_targets)),
        )),
    };
    match action {
        Action::Night(n) => {
            if n.save {
                let Some(witch) = &obs.witch else {
                    return Err(Violation::new(Rule::RoleAbsent, "only the witch holds an antidote"));
                };
                if !witch.can_save {
                    return Err(Violation::new(Rule::AntidoteUsed, "the antidote cannot be used now"));
                }
                if n.target.is_some() {
                    return Err(Violation::new(Rule::DoublePotion, "both potions cannot be used in the same night"));
                }
                Ok(())
            } else {
                target_ok(n.target)
            }
        }
        Action::Speech(s) => {
            if let Some(bad) = s.identity_tags.keys().find(|k| k.0 == 0 || k.0 > obs.seats) {
                return Err(Violation::new(Rule::TagSeatRange, format!("identity tag for nonexistent player {bad}")));
            }
            match s.vote_intent {
                Some(v) if !obs.alive.contains(&v) => Err(Violation::new(
                    Rule::TargetAlive,
                    format!("vote intent {v} is not a surviving player"),
                )),
                _ => Ok(()),
            }
        }
        Action::Vote(v) => target_ok(v.target),
        Action::HunterShot(h) => target_ok(h.target),
        Action::RolePrediction(map) => {
            let expected: BTreeSet<Seat> = (1..=obs.seats).map(Seat).collect();
            let got: BTreeSet<Seat> = map.keys().copied().collect();
            if got != expected {
                Err(Violation::new(Rule::SeatRange, format!("predict a role for every player 1 to {}", obs.seats)))
            } else {
                Ok(())
            }
        }
    }
}

pub(crate) fn seat_list(seats: &BTreeSet<Seat>) -> String {
    if seats.is_empty() {
        return "none".into();
    }
    seats
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Which built-in policy or adapter drives a seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    RandomLegal,
    InformedVillager,
    GreedyWolf,
    Remote,
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" | "random_legal" => Ok(AgentKind::RandomLegal),
            "informed" | "informed_villager" => Ok(AgentKind::InformedVillager),
            "greedy" | "greedy_wolf" => Ok(AgentKind::GreedyWolf),
            "remote" => Ok(AgentKind::Remote),
            other => Err(format!("unknown agent kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteSpec>,
}

impl AgentSpec {
    pub fn scripted(name: impl Into<String>, kind: AgentKind) -> AgentSpec {
        AgentSpec {
            name: name.into(),
            kind,
            remote: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match (self.kind, &self.remote) {
            (AgentKind::Remote, None) => {
                Err(format!("agent `{}`: remote kind needs a [remote] table", self.name))
            }
            (AgentKind::Remote, Some(r)) => r.validate().map_err(|e| format!("agent `{}`: {e}", self.name)),
            (_, Some(_)) => Err(format!(
                "agent `{}`: only remote agents take a [remote] table",
                self.name
            )),
            _ => Ok(()),
        }
    }

    /// Instantiates the agent for one seat of one match.
    ///
    /// `truth` reaches only the informed oracle; no other policy sees it.
    pub fn build(&self, seat: Seat, match_seed: u64, truth: &BTreeMap<Seat, Role>) -> Box<dyn Agent> {
        match self.kind {
            AgentKind::RandomLegal => Box::new(RandomLegal::new(match_seed, seat)),
            AgentKind::InformedVillager => {
                Box::new(InformedVillager::new(truth.clone(), match_seed, seat))
            }
            AgentKind::GreedyWolf => Box::new(GreedyWolf::new(match_seed, seat)),
            AgentKind::Remote => Box::new(RemoteAgent::new(
                self.remote.clone().expect("validated remote spec"),
                TemplateSet::default(),
            )),
        }
    }
}
