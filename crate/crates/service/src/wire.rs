//! Message schema shared by the HTTP endpoints and the per-seat event stream.

use std::collections::{BTreeMap, BTreeSet};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use werewolf_core::agents::{Action, Observation, PublicEvent, Stage};
use werewolf_core::analytics::{Judgment, Rate, SeatIdentity};
use werewolf_core::engine::{GameLog, Role, Rule, Seat, SetupVariant, Winner};

use crate::config::Deadlines;

pub const SCHEMA_VERSION: u32 = 1;

/// One seat in a lobby plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatPlan {
    Human,
    Agent(String),
}

/// Body of `POST /lobbies`. Either `seats` lists every seat, or `humans`
/// places that many human seats at seeded positions and fills the rest from
/// `agents` (default: the whole configured pool).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateLobby {
    pub variant: Option<SetupVariant>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seats: Option<Vec<SeatPlan>>,
    #[serde(default)]
    pub humans: Option<u8>,
    #[serde(default)]
    pub agents: Option<Vec<String>>,
    #[serde(default)]
    pub roles: Option<BTreeMap<Seat, Role>>,
    #[serde(default)]
    pub deadlines: Option<Deadlines>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobbyCreated {
    pub schema_version: u32,
    pub lobby_id: String,
    pub operator_token: String,
    pub seats: u8,
    pub human_seats: u8,
    pub variant: SetupVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joined {
    pub schema_version: u32,
    pub lobby_id: String,
    pub seat: Seat,
    pub token: String,
    pub seats: u8,
    pub variant: SetupVariant,
}

/// Body of `POST .../actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSubmission {
    pub prompt_id: u64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub prompt_id: u64,
    pub stage: Stage,
    pub accepted: bool,
}

/// Body of `POST .../judgments`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSubmission {
    pub judgments: BTreeMap<Seat, Judgment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub seat: Seat,
    pub judged: usize,
}

/// Revealed outcome of a finished lobby.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobbyResult {
    pub schema_version: u32,
    pub lobby_id: String,
    pub winner: Option<Winner>,
    pub rounds: u32,
    pub roles: BTreeMap<Seat, Role>,
    pub identities: BTreeMap<Seat, SeatIdentity>,
    pub judgments_received: usize,
    pub human_seats: usize,
    /// Per AI participant: share of judgments that identified it as an AI.
    pub detection: BTreeMap<String, Rate>,
    /// The full log; operator only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<GameLog>,
}

/// Everything pushed to one seat, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeatMessage {
    RoleCard {
        seat: Seat,
        role: Role,
        teammates: BTreeSet<Seat>,
        variant: SetupVariant,
        seats: u8,
    },
    Public {
        event: PublicEvent,
    },
    Prompt {
        prompt_id: u64,
        stage: Stage,
        deadline_unix_ms: u64,
        observation: Observation,
    },
    Acknowledged {
        prompt_id: u64,
    },
    /// The deadline passed and `applied` was played for the seat.
    Expired {
        prompt_id: u64,
        applied: Action,
    },
    /// Play is over; judgments are due by the deadline and results follow them.
    GameEnded {
        round: u32,
        judgment_deadline_unix_ms: u64,
    },
    /// The match could not be completed.
    Aborted {
        reason: String,
    },
}

impl SeatMessage {
    pub fn is_final(&self) -> bool {
        matches!(self, SeatMessage::GameEnded { .. } | SeatMessage::Aborted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub index: usize,
    pub message: SeatMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApiError {
    #[error("missing or invalid token")]
    Auth,
    #[error("no such lobby")]
    UnknownLobby,
    #[error("no such seat")]
    UnknownSeat,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("every human seat is taken")]
    LobbyFull,
    #[error("nothing is awaiting this seat")]
    NotYourTurn,
    #[error("the deadline has passed")]
    DeadlineExpired,
    #[error("{message}")]
    IllegalAction { rule: String, message: String },
    #[error("a different answer was already recorded")]
    AlreadyAnswered,
    #[error("the game is still running")]
    GameInProgress,
    #[error("results are revealed after judgments are stored")]
    JudgmentsPending,
}

impl ApiError {
    pub fn illegal(rule: Rule, message: impl Into<String>) -> ApiError {
        ApiError::IllegalAction {
            rule: rule.id().to_string(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::Auth => "AuthError",
            ApiError::UnknownLobby => "UnknownLobby",
            ApiError::UnknownSeat => "UnknownSeat",
            ApiError::InvalidRequest(_) => "InvalidRequest",
            ApiError::LobbyFull => "LobbyFull",
            ApiError::NotYourTurn => "NotYourTurn",
            ApiError::DeadlineExpired => "DeadlineExpired",
            ApiError::IllegalAction { .. } => "IllegalAction",
            ApiError::AlreadyAnswered => "AlreadyAnswered",
            ApiError::GameInProgress => "GameInProgress",
            ApiError::JudgmentsPending => "JudgmentsPending",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Auth => StatusCode::UNAUTHORIZED,
            ApiError::UnknownLobby | ApiError::UnknownSeat => StatusCode::NOT_FOUND,
            ApiError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::LobbyFull
            | ApiError::NotYourTurn
            | ApiError::AlreadyAnswered
            | ApiError::GameInProgress => StatusCode::CONFLICT,
            ApiError::DeadlineExpired => StatusCode::GONE,
            ApiError::IllegalAction { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::JudgmentsPending => StatusCode::FORBIDDEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    pub message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind().to_string(),
            rule: match &self {
                ApiError::IllegalAction { rule, .. } => Some(rule.clone()),
                _ => None,
            },
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
