use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::SpeechPayload;

/// A 1-based seat number.
///
/// Deserializes from an integer or a decimal string, since JSON object keys
/// are strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Seat(pub u8);

impl<'de> Deserialize<'de> for Seat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Seat, D::Error> {
        struct SeatVisitor;

        impl serde::de::Visitor<'_> for SeatVisitor {
            type Value = Seat;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a seat number")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Seat, E> {
                u8::try_from(v).map(Seat).map_err(|_| E::custom(format!("seat {v} out of range")))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Seat, E> {
                u8::try_from(v).map(Seat).map_err(|_| E::custom(format!("seat {v} out of range")))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Seat, E> {
                v.parse::<u8>().map(Seat).map_err(|_| E::custom(format!("invalid seat `{v}`")))
            }
        }

        d.deserialize_any(SeatVisitor)
    }
}

impl Seat {
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u8> for Seat {
    fn from(n: u8) -> Self {
        Seat(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Faction {
    Village,
    Wolf,
}

impl fmt::Display for Faction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Faction::Village => "Village",
            Faction::Wolf => "Wolf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Werewolf,
    SimpleVillager,
    Seer,
    Witch,
    Guard,
    Hunter,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Werewolf,
        Role::SimpleVillager,
        Role::Seer,
        Role::Witch,
        Role::Guard,
        Role::Hunter,
    ];

    pub fn faction(self) -> Faction {
        match self {
            Role::Werewolf => Faction::Wolf,
            _ => Faction::Village,
        }
    }

    /// True for the villager roles that carry an ability ("gods").
    pub fn is_special(self) -> bool {
        matches!(self, Role::Seer | Role::Witch | Role::Guard | Role::Hunter)
    }

    pub fn is_wolf(self) -> bool {
        self == Role::Werewolf
    }

    pub fn has_night_action(self) -> bool {
        matches!(self, Role::Werewolf | Role::Seer | Role::Witch | Role::Guard)
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Werewolf => "Werewolf",
            Role::SimpleVillager => "Villager",
            Role::Seer => "Seer",
            Role::Witch => "Witch",
            Role::Guard => "Guard",
            Role::Hunter => "Hunter",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the four supported compositions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SetupVariant {
    /// Seer, Witch, Guard; 9 seats.
    #[serde(rename = "SWG9", alias = "swg9")]
    Swg9,
    /// Seer, Witch, Hunter; 9 seats.
    #[serde(rename = "SWH9", alias = "swh9")]
    Swh9,
    /// Seer, Guard; 7 seats.
    #[serde(rename = "SG7", alias = "sg7")]
    Sg7,
    /// Seer, Witch; 7 seats.
    #[serde(rename = "SW7", alias = "sw7")]
    Sw7,
}

impl SetupVariant {
    pub const ALL: [SetupVariant; 4] = [
        SetupVariant::Swg9,
        SetupVariant::Swh9,
        SetupVariant::Sg7,
        SetupVariant::Sw7,
    ];

    pub fn seats(self) -> u8 {
        match self {
            SetupVariant::Swg9 | SetupVariant::Swh9 => 9,
            SetupVariant::Sg7 | SetupVariant::Sw7 => 7,
        }
    }

    /// The role multiset, in a fixed canonical order.
    pub fn composition(self) -> Vec<Role> {
        use Role::*;
        match self {
            SetupVariant::Swg9 => vec![
                Werewolf,
                Werewolf,
                Werewolf,
                SimpleVillager,
                SimpleVillager,
                SimpleVillager,
                Seer,
                Witch,
                Guard,
            ],
            SetupVariant::Swh9 => vec![
                Werewolf,
                Werewolf,
                Werewolf,
                SimpleVillager,
                SimpleVillager,
                SimpleVillager,
                Seer,
                Witch,
                Hunter,
            ],
            SetupVariant::Sg7 => vec![
                Werewolf,
                Werewolf,
                SimpleVillager,
                SimpleVillager,
                SimpleVillager,
                Seer,
                Guard,
            ],
            SetupVariant::Sw7 => vec![
                Werewolf,
                Werewolf,
                SimpleVillager,
                SimpleVillager,
                SimpleVillager,
                Seer,
                Witch,
            ],
        }
    }

    pub fn has_role(self, role: Role) -> bool {
        self.composition().contains(&role)
    }

    pub fn label(self) -> &'static str {
        match self {
            SetupVariant::Swg9 => "swg9",
            SetupVariant::Swh9 => "swh9",
            SetupVariant::Sg7 => "sg7",
            SetupVariant::Sw7 => "sw7",
        }
    }
}

impl fmt::Display for SetupVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetupVariant::Swg9 => "SWG9",
            SetupVariant::Swh9 => "SWH9",
            SetupVariant::Sg7 => "SG7",
            SetupVariant::Sw7 => "SW7",
        })
    }
}

impl std::str::FromStr for SetupVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "swg9" => Ok(SetupVariant::Swg9),
            "swh9" => Ok(SetupVariant::Swh9),
            "sg7" => Ok(SetupVariant::Sg7),
            "sw7" => Ok(SetupVariant::Sw7),
            other => Err(format!("unknown setup `{other}` (expected swg9, swh9, sg7 or sw7)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Setup {
    pub variant: SetupVariant,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_roles: Option<BTreeMap<Seat, Role>>,
    /// Overrides the seeded day-1 speaking start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_day_start: Option<Seat>,
}

impl Setup {
    pub fn new(variant: SetupVariant, seed: u64) -> Self {
        Setup {
            variant,
            seed,
            explicit_roles: None,
            explicit_day_start: None,
        }
    }

    pub fn seats(&self) -> u8 {
        self.variant.seats()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeathCause {
    WolfKill,
    Poison,
    Vote,
    HunterShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Winner {
    Village,
    Wolf,
    Draw,
}

impl Winner {
    pub fn faction(self) -> Option<Faction> {
        match self {
            Winner::Village => Some(Faction::Village),
            Winner::Wolf => Some(Faction::Wolf),
            Winner::Draw => None,
        }
    }
}

impl fmt::Display for Winner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Winner::Village => "Village",
            Winner::Wolf => "Wolf",
            Winner::Draw => "Draw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    NightActions,
    DaySpeech,
    DayVote { ballot_index: u8 },
    HunterWindow { cause: DeathCause },
    Terminal { winner: Winner },
}

/// Everything decided during one night, submitted as a unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NightPacket {
    #[serde(default)]
    pub guard_target: Option<Seat>,
    #[serde(default)]
    pub wolf_proposals: BTreeMap<Seat, Option<Seat>>,
    #[serde(default)]
    pub witch_save: bool,
    #[serde(default)]
    pub witch_poison: Option<Seat>,
    #[serde(default)]
    pub seer_target: Option<Seat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub eliminated: Option<Seat>,
    pub revote_among: Option<BTreeSet<Seat>>,
}

/// One entry of the append-only match record.
///
/// `NightSubmitted`, `Speech`, `Ballot` and `HunterShot` carry decisions; every
/// other variant is derived by the engine and checked during replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GameEvent {
    RolesDealt {
        roles: BTreeMap<Seat, Role>,
        day_start_seat: Seat,
    },
    NightSubmitted {
        round: u32,
        packet: NightPacket,
    },
    WitchInformed {
        round: u32,
        victim: Option<Seat>,
    },
    SeerResult {
        round: u32,
        seer: Seat,
        target: Seat,
        is_wolf: bool,
    },
    NightResolved {
        round: u32,
        deaths: BTreeSet<Seat>,
    },
    Eliminated {
        round: u32,
        seat: Seat,
        cause: DeathCause,
    },
    Speech {
        round: u32,
        seat: Seat,
        payload: SpeechPayload,
    },
    Ballot {
        round: u32,
        ballot_index: u8,
        votes: BTreeMap<Seat, Option<Seat>>,
    },
    HunterShot {
        round: u32,
        shooter: Seat,
        target: Option<Seat>,
    },
    GameEnded {
        round: u32,
        winner: Winner,
    },
}

impl GameEvent {
    pub fn is_decision(&self) -> bool {
        matches!(
            self,
            GameEvent::NightSubmitted { .. }
                | GameEvent::Speech { .. }
                | GameEvent::Ballot { .. }
                | GameEvent::HunterShot { .. }
        )
    }

    pub fn round(&self) -> Option<u32> {
        match self {
            GameEvent::RolesDealt { .. } => None,
            GameEvent::NightSubmitted { round, .. }
            | GameEvent::WitchInformed { round, .. }
            | GameEvent::SeerResult { round, .. }
            | GameEvent::NightResolved { round, .. }
            | GameEvent::Eliminated { round, .. }
            | GameEvent::Speech { round, .. }
            | GameEvent::Ballot { round, .. }
            | GameEvent::HunterShot { round, .. }
            | GameEvent::GameEnded { round, .. } => Some(*round),
        }
    }
}

/// Identifier of the rule an action violated. Rendered kebab-case on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    WrongPhase,
    SeatRange,
    DeadActor,
    TargetAlive,
    NotAWolf,
    RoleAbsent,
    ConsecutiveGuard,
    SeerSelfCheck,
    WitchSelfPoison,
    DoublePotion,
    AntidoteUsed,
    PoisonUsed,
    NoVictim,
    NotYourTurn,
    NotPendingHunter,
    SelfVote,
    NotACandidate,
    TagSeatRange,
    TargetRequired,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::WrongPhase => "wrong-phase",
            Rule::SeatRange => "seat-range",
            Rule::DeadActor => "dead-actor",
            Rule::TargetAlive => "target-alive",
            Rule::NotAWolf => "not-a-wolf",
            Rule::RoleAbsent => "role-absent",
            Rule::ConsecutiveGuard => "consecutive-guard",
            Rule::SeerSelfCheck => "seer-self-check",
            Rule::WitchSelfPoison => "witch-self-poison",
            Rule::DoublePotion => "double-potion",
            Rule::AntidoteUsed => "antidote-used",
            Rule::PoisonUsed => "poison-used",
            Rule::NoVictim => "no-victim",
            Rule::NotYourTurn => "not-your-turn",
            Rule::NotPendingHunter => "not-pending-hunter",
            Rule::SelfVote => "self-vote",
            Rule::NotACandidate => "not-a-candidate",
            Rule::TagSeatRange => "tag-seat-range",
            Rule::TargetRequired => "target-required",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error("illegal action by seat {seat:?}: {rule}")]
    IllegalAction { seat: Option<Seat>, rule: Rule },
    #[error("illegal vote by seat {voter}: {rule}")]
    IllegalVote { voter: Seat, rule: Rule },
    #[error("replay diverged at event {index}: {detail}")]
    ReplayDivergence { index: usize, detail: String },
}

impl EngineError {
    pub(crate) fn illegal(seat: impl Into<Option<Seat>>, rule: Rule) -> Self {
        EngineError::IllegalAction {
            seat: seat.into(),
            rule,
        }
    }

    pub fn rule(&self) -> Option<Rule> {
        match self {
            EngineError::IllegalAction { rule, .. } | EngineError::IllegalVote { rule, .. } => {
                Some(*rule)
            }
            _ => None,
        }
    }
}
