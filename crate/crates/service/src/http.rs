use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use werewolf_core::engine::Seat;

use crate::config::ServiceConfig;
use crate::lobby::Lobby;
use crate::wire::{
    Ack, ActionSubmission, ApiError, CreateLobby, JudgmentAck, JudgmentSubmission, Joined,
    LobbyCreated, LobbyResult, SCHEMA_VERSION,
};

/// Shared state behind every route.
pub struct Service {
    config: ServiceConfig,
    lobbies: Mutex<HashMap<String, Arc<Lobby>>>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Arc<Service> {
        Arc::new(Service {
            config,
            lobbies: Mutex::new(HashMap::new()),
        })
    }

    pub fn lobby(&self, id: &str) -> Result<Arc<Lobby>, ApiError> {
        self.lobbies
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or(ApiError::UnknownLobby)
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct TokenQuery {
    token: Option<String>,
    from: Option<usize>,
}

fn bearer(headers: &HeaderMap, query: &TokenQuery) -> Option<String> {
    headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|v| v.trim().to_string())
        .or_else(|| query.token.clone())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/lobbies", post(create_lobby))
        .route("/lobbies/{id}/join", post(join))
        .route("/lobbies/{id}/seats/{seat}/events", get(events))
        .route("/lobbies/{id}/seats/{seat}/actions", post(submit_action))
        .route("/lobbies/{id}/seats/{seat}/judgments", post(submit_judgments))
        .route("/lobbies/{id}/result", get(result))
        .with_state(service)
}

async fn create_lobby(
    State(service): State<Arc<Service>>,
    body: Result<Json<CreateLobby>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<LobbyCreated>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::InvalidRequest(e.body_text()))?;
    let lobby = Lobby::create(req, &service.config)?;
    let created = lobby.created();
    service
        .lobbies
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .insert(lobby.id.clone(), lobby);
    Ok(Json(created))
}

async fn join(State(service): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<Joined>, ApiError> {
    let lobby = service.lobby(&id)?;
    let (seat, token) = lobby.join()?;
    Ok(Json(Joined {
        schema_version: SCHEMA_VERSION,
        lobby_id: id,
        seat,
        token,
        seats: lobby.variant().seats(),
        variant: lobby.variant(),
    }))
}

async fn events(
    State(service): State<Arc<Service>>,
    Path((id, seat)): Path<(String, u8)>,
    Query(query): Query<TokenQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let lobby = service.lobby(&id)?;
    let token = bearer(&headers, &query);
    let channel = lobby.authorize_seat(Seat(seat), token.as_deref())?.clone();
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok())
        .map(|last| last + 1);
    let from = resume.or(query.from).unwrap_or(0);
    let rx = channel.subscribe();
    let stream = stream::unfold((channel, rx, from), |(channel, mut rx, cursor)| async move {
        loop {
            match Lobby::next_message(&channel, cursor) {
                Ok(envelope) => {
                    let data = serde_json::to_string(&envelope).expect("envelopes serialize");
                    let event = Event::default().id(cursor.to_string()).data(data);
                    return Some((Ok(event), (channel, rx, cursor + 1)));
                }
                Err(true) => return None,
                Err(false) => {
                    if rx.changed().await.is_err() {
                        return None;
                    }
                }
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}

async fn submit_action(
    State(service): State<Arc<Service>>,
    Path((id, seat)): Path<(String, u8)>,
    Query(query): Query<TokenQuery>,
    headers: HeaderMap,
    body: Result<Json<ActionSubmission>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Ack>, ApiError> {
    let lobby = service.lobby(&id)?;
    let token = bearer(&headers, &query);
    lobby.authorize_seat(Seat(seat), token.as_deref())?;
    let Json(sub) = body.map_err(|e| ApiError::InvalidRequest(e.body_text()))?;
    lobby
        .submit_action(Seat(seat), token.as_deref(), sub.prompt_id, sub.action)
        .map(Json)
}

async fn submit_judgments(
    State(service): State<Arc<Service>>,
    Path((id, seat)): Path<(String, u8)>,
    Query(query): Query<TokenQuery>,
    headers: HeaderMap,
    body: Result<Json<JudgmentSubmission>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<JudgmentAck>, ApiError> {
    let lobby = service.lobby(&id)?;
    let token = bearer(&headers, &query);
    lobby.authorize_seat(Seat(seat), token.as_deref())?;
    let Json(sub) = body.map_err(|e| ApiError::InvalidRequest(e.body_text()))?;
    lobby
        .submit_judgments(Seat(seat), token.as_deref(), sub.judgments)
        .map(Json)
}

async fn result(
    State(service): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(query): Query<TokenQuery>,
    headers: HeaderMap,
) -> Result<Json<LobbyResult>, ApiError> {
    let lobby = service.lobby(&id)?;
    lobby.result(bearer(&headers, &query).as_deref()).map(Json)
}
