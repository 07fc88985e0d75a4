use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::time::Duration;

use serde_json::{json, Value};
use werewolf_core::agents::{
    Action, AgentKind, AgentSpec, HunterAction, NightAction, SpeechPayload, Stage, VotePayload,
    NO_STATEMENT,
};
use werewolf_core::engine::{audit, replay, GameEvent, GameLog, Role, Seat};
use werewolf_service::wire::{Envelope, ErrorBody, Joined, LobbyCreated, LobbyResult};
use werewolf_service::{Deadlines, SeatMessage, ServiceConfig};

const BOTS: [&str; 3] = ["bot-alpha", "bot-beta", "bot-gamma"];

struct Server {
    _runtime: tokio::runtime::Runtime,
    base: String,
    http: ureq::Agent,
}

impl Server {
    fn start() -> Server {
        let config = ServiceConfig {
            deadlines: Deadlines::default(),
            participants: vec![
                AgentSpec::scripted(BOTS[0], AgentKind::RandomLegal),
                AgentSpec::scripted(BOTS[1], AgentKind::GreedyWolf),
                AgentSpec::scripted(BOTS[2], AgentKind::InformedVillager),
            ],
        };
        let runtime = tokio::runtime::Runtime::new().unwrap();
        let addr = runtime.block_on(werewolf_service::spawn(config)).unwrap();
        let http: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Server {
            _runtime: runtime,
            base: format!("http://{addr}"),
            http,
        }
    }

    fn post(&self, path: &str, token: Option<&str>, body: Value) -> (u16, Value) {
        let mut req = self.http.post(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    fn get(&self, path: &str, token: Option<&str>) -> (u16, Value) {
        let mut req = self.http.get(format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        let mut resp = req.call().unwrap();
        (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
    }

    /// Reads the seat's event stream until it closes, handing each envelope to `on`.
    fn stream(&self, lobby: &str, seat: Seat, token: &str, from: usize, mut on: impl FnMut(&str, &Envelope)) {
        let url = format!("{}/lobbies/{lobby}/seats/{seat}/events?token={token}&from={from}", self.base);
        let resp = self.http.get(url).call().unwrap();
        assert_eq!(resp.status().as_u16(), 200);
        let reader = BufReader::new(resp.into_body().into_reader());
        for line in reader.lines() {
            let line = line.unwrap();
            if let Some(data) = line.strip_prefix("data: ").or_else(|| line.strip_prefix("data:")) {
                let envelope: Envelope = serde_json::from_str(data).unwrap();
                on(data, &envelope);
            }
        }
    }
}

fn error(body: &Value) -> ErrorBody {
    serde_json::from_value(body.clone()).unwrap()
}

fn witch_table() -> Value {
    // the human plays the witch in seat 9
    json!({"1": "SimpleVillager", "2": "Werewolf", "3": "Werewolf", "4": "Seer", "5": "SimpleVillager",
           "6": "SimpleVillager", "7": "Werewolf", "8": "Guard", "9": "Witch"})
}

fn bot_seats() -> Vec<Value> {
    let mut seats: Vec<Value> = (0..8).map(|i| json!({"agent": BOTS[i % 3]})).collect();
    seats.push(json!("human"));
    seats
}

fn create(server: &Server, body: Value) -> LobbyCreated {
    let (status, created) = server.post("/lobbies", None, body);
    assert_eq!(status, 200, "{created}");
    serde_json::from_value(created).unwrap()
}

fn join(server: &Server, lobby: &str) -> Joined {
    let (status, joined) = server.post(&format!("/lobbies/{lobby}/join"), None, json!({}));
    assert_eq!(status, 200, "{joined}");
    serde_json::from_value(joined).unwrap()
}

fn action_body(prompt_id: u64, action: &Action) -> Value {
    json!({"prompt_id": prompt_id, "action": action})
}

/// Walks `value` outside speech payloads and collects every string.
fn strings_outside_speech(value: &Value, out: &mut Vec<String>) {
    match value {
        Value::String(s) => out.push(s.clone()),
        Value::Array(items) => items.iter().for_each(|v| strings_outside_speech(v, out)),
        Value::Object(map) => {
            for (k, v) in map {
                if k != "payload" {
                    strings_outside_speech(v, out);
                }
            }
        }
        _ => {}
    }
}

#[test]
fn full_game_with_one_human_seat() {
    let server = Server::start();
    let created = create(&server, json!({"variant": "swg9", "seed": 31, "seats": bot_seats(), "roles": witch_table(),
                                         "deadlines": {"night_action": 20, "speech": 20, "vote": 20, "hunter_shot": 20, "judgments": 60}}));
    assert_eq!(created.human_seats, 1);
    let lobby = created.lobby_id.clone();
    let joined = join(&server, &lobby);
    assert_eq!(joined.seat, Seat(9));
    let (status, body) = server.post(&format!("/lobbies/{lobby}/join"), None, json!({}));
    assert_eq!((status, error(&body).error.as_str()), (409, "LobbyFull"));

    let token = joined.token.clone();
    let actions = format!("/lobbies/{lobby}/seats/9/actions");
    let mut raw = Vec::new();
    let mut envelopes = Vec::new();
    let mut checked_vote_errors = false;
    server.stream(&lobby, Seat(9), &token, 0, |data, envelope| {
        raw.push(data.to_string());
        envelopes.push(envelope.clone());
        let SeatMessage::Prompt { prompt_id, stage, observation, .. } = &envelope.message else {
            return;
        };
        let action = match stage {
            Stage::NightAction if observation.round == 1 => Action::Night(NightAction {
                target: Some(Seat(5)),
                ..NightAction::default()
            }),
            Stage::NightAction => Action::Night(NightAction::default()),
            Stage::Speech => Action::Speech(SpeechPayload {
                identity_to_present: "Villager".into(),
                identity_tags: BTreeMap::new(),
                vote_intent: None,
                text: "Nothing to report.".into(),
                claims: Vec::new(),
            }),
            Stage::Vote => Action::Vote(VotePayload {
                target: observation.legal_targets.iter().next().copied(),
                ..VotePayload::default()
            }),
            Stage::HunterShot => Action::HunterShot(HunterAction::default()),
            Stage::RolePrediction => unreachable!("lobbies do not ask for predictions"),
        };
        if *stage == Stage::Vote && !checked_vote_errors {
            checked_vote_errors = true;
            assert!(!observation.alive.contains(&Seat(5)));
            let dead = Action::Vote(VotePayload {
                target: Some(Seat(5)),
                ..VotePayload::default()
            });
            let (status, body) = server.post(&actions, Some(&token), action_body(*prompt_id, &dead));
            let err = error(&body);
            assert_eq!((status, err.error.as_str(), err.rule.as_deref()), (422, "IllegalAction", Some("target-alive")));
            let (status, body) = server.post(&actions, Some(&token), action_body(prompt_id + 100, &action));
            assert_eq!((status, error(&body).error.as_str()), (409, "NotYourTurn"));
            let (status, body) = server.post(&actions, Some("forged"), action_body(*prompt_id, &action));
            assert_eq!((status, error(&body).error.as_str()), (401, "AuthError"));

            let (status, first) = server.post(&actions, Some(&token), action_body(*prompt_id, &action));
            assert_eq!(status, 200, "{first}");
            let (status, again) = server.post(&actions, Some(&token), action_body(*prompt_id, &action));
            assert_eq!((status, &again), (200, &first));
            let other = Action::Vote(VotePayload::default());
            let (status, body) = server.post(&actions, Some(&token), action_body(*prompt_id, &other));
            assert_eq!((status, error(&body).error.as_str()), (409, "AlreadyAnswered"));
            return;
        }
        let (status, body) = server.post(&actions, Some(&token), action_body(*prompt_id, &action));
        assert_eq!(status, 200, "{body}");
    });
    assert!(checked_vote_errors, "the human never reached a vote");
    assert!(matches!(envelopes.last().unwrap().message, SeatMessage::GameEnded { .. }));
    for (i, e) in envelopes.iter().enumerate() {
        assert_eq!(e.index, i);
    }

    // nothing the witch was not entitled to ever crossed the wire
    let names: Vec<String> = ["Werewolf", "Seer", "Guard", "Hunter", "SimpleVillager"].map(String::from).to_vec();
    for data in &raw {
        let value: Value = serde_json::from_str(data).unwrap();
        let mut strings = Vec::new();
        strings_outside_speech(&value, &mut strings);
        assert!(!strings.iter().any(|s| names.contains(s)), "hidden role leaked: {data}");
        for bot in BOTS {
            assert!(!data.contains(bot), "participant name leaked: {data}");
        }
        assert!(!data.contains("\"teammates\":[1") && !data.contains("is_wolf"), "{data}");
    }
    assert!(envelopes.iter().any(|e| matches!(&e.message, SeatMessage::RoleCard { role: Role::Witch, seat: Seat(9), .. })));

    // resuming from an index replays the same tail
    let mut resumed = Vec::new();
    server.stream(&lobby, Seat(9), &token, 5, |_, e| resumed.push(e.clone()));
    assert_eq!(resumed, envelopes[5..]);

    let result_path = format!("/lobbies/{lobby}/result");
    let (status, body) = server.get(&result_path, Some(&token));
    assert_eq!((status, error(&body).error.as_str()), (403, "JudgmentsPending"));
    let (status, body) = server.get(&result_path, Some(&created.operator_token));
    assert_eq!((status, error(&body).error.as_str()), (403, "JudgmentsPending"));

    let judgments = format!("/lobbies/{lobby}/seats/9/judgments");
    let (status, body) = server.post(&judgments, Some(&token), json!({"judgments": {"1": "ai"}}));
    let err = error(&body);
    assert_eq!((status, err.rule.as_deref()), (422, Some("judgment-incomplete")));
    let sheet: BTreeMap<String, &str> = (1..=8).map(|s| (s.to_string(), if s == 1 { "human" } else { "ai" })).collect();
    let (status, body) = server.post(&judgments, Some(&token), json!({ "judgments": sheet }));
    assert_eq!(status, 200, "{body}");

    let (status, body) = server.get(&result_path, Some(&token));
    assert_eq!(status, 200, "{body}");
    let result: LobbyResult = serde_json::from_value(body).unwrap();
    assert!(result.winner.is_some());
    assert!(result.log.is_none());
    assert_eq!(result.judgments_received, 1);
    assert_eq!(result.detection.values().map(|r| r.total).sum::<u32>(), 8);
    assert_eq!(result.detection.values().map(|r| r.hits).sum::<u32>(), 7);
    assert_eq!(result.detection[BOTS[0]].total, 3);
    assert_eq!(result.detection[BOTS[0]].hits, 2);

    let (status, body) = server.get(&result_path, Some(&created.operator_token));
    assert_eq!(status, 200);
    let result: LobbyResult = serde_json::from_value(body).unwrap();
    let log: GameLog = result.log.unwrap();
    replay(&log).unwrap();
    audit(&log).unwrap();
    assert_eq!(log.participants[&Seat(9)], "human");
    assert!(log.events.iter().any(|e| matches!(e, GameEvent::NightSubmitted { round: 1, packet } if packet.witch_poison == Some(Seat(5)))));
}

#[test]
fn missed_deadlines_apply_the_fallback() {
    let server = Server::start();
    let quick = json!({"night_action": 0.2, "speech": 0.2, "vote": 0.2, "hunter_shot": 0.2, "judgments": 0.5});
    let created = create(&server, json!({"seed": 4, "seats": bot_seats(), "roles": witch_table(), "deadlines": quick}));
    let lobby = created.lobby_id.clone();
    let joined = join(&server, &lobby);
    let mut envelopes = Vec::new();
    server.stream(&lobby, joined.seat, &joined.token, 0, |_, e| envelopes.push(e.clone()));

    let expired_speech = envelopes.iter().find_map(|e| match &e.message {
        SeatMessage::Expired {
            prompt_id,
            applied: Action::Speech(p),
        } => Some((*prompt_id, p.clone())),
        _ => None,
    });
    let (prompt_id, payload) = expired_speech.expect("a speech deadline was missed");
    assert_eq!(payload.text, NO_STATEMENT);
    let late = Action::Speech(SpeechPayload::silent());
    let (status, body) = server.post(
        &format!("/lobbies/{lobby}/seats/9/actions"),
        Some(&joined.token),
        action_body(prompt_id, &late),
    );
    assert_eq!((status, error(&body).error.as_str()), (410, "DeadlineExpired"));

    std::thread::sleep(Duration::from_millis(700));
    let (status, body) = server.post(
        &format!("/lobbies/{lobby}/seats/9/judgments"),
        Some(&joined.token),
        json!({"judgments": (1..=8).map(|s| (s.to_string(), "ai")).collect::<BTreeMap<_, _>>()}),
    );
    assert_eq!((status, error(&body).error.as_str()), (410, "DeadlineExpired"));
    let (status, body) = server.get(&format!("/lobbies/{lobby}/result"), Some(&joined.token));
    assert_eq!((status, error(&body).error.as_str()), (403, "JudgmentsPending"));

    let (status, body) = server.get(&format!("/lobbies/{lobby}/result"), Some(&created.operator_token));
    assert_eq!(status, 200);
    let result: LobbyResult = serde_json::from_value(body).unwrap();
    assert!(result.detection.is_empty());
    let log = result.log.unwrap();
    replay(&log).unwrap();
    let human_speeches: Vec<_> = log
        .transcripts
        .iter()
        .filter(|d| d.seat == Seat(9) && d.stage == Stage::Speech)
        .collect();
    assert!(!human_speeches.is_empty());
    assert!(human_speeches.iter().all(|d| d.fallback));
    assert!(log.events.iter().any(|e| matches!(e,
        GameEvent::Speech { seat: Seat(9), payload, .. } if payload.text == NO_STATEMENT)));
}

#[test]
fn lobby_validation_and_seat_placement() {
    let server = Server::start();
    let (status, body) = server.post("/lobbies", None, json!({"seed": 1, "humans": 2, "agents": ["nobody"]}));
    assert_eq!((status, error(&body).error.as_str()), (400, "InvalidRequest"));
    let (status, _) = server.post("/lobbies", None, json!({"seed": 1, "humans": 2, "deadlines": {"vote": 0}}));
    assert_eq!(status, 400);
    let (status, _) = server.post("/lobbies", None, json!({"seed": 1}));
    assert_eq!(status, 400);
    let (status, _) = server.post("/lobbies", None, json!({"seed": 1, "humans": 1, "bogus": true}));
    assert_eq!(status, 400);
    let (status, body) = server.post("/lobbies/none/join", None, json!({}));
    assert_eq!((status, error(&body).error.as_str()), (404, "UnknownLobby"));

    let created = create(&server, json!({"variant": "sg7", "seed": 3, "humans": 2}));
    assert_eq!((created.seats, created.human_seats), (7, 2));
    let a = join(&server, &created.lobby_id);
    let b = join(&server, &created.lobby_id);
    assert_ne!(a.seat, b.seat);
    let (status, body) = server.post(
        &format!("/lobbies/{}/seats/{}/judgments", created.lobby_id, b.seat),
        Some(&a.token),
        json!({"judgments": {}}),
    );
    assert_eq!((status, error(&body).error.as_str()), (401, "AuthError"));
    let (status, body) = server.get(&format!("/lobbies/{}/result", created.lobby_id), Some(&a.token));
    assert_eq!((status, error(&body).error.as_str()), (409, "GameInProgress"));
    let (status, _) = server.get(&format!("/lobbies/{}/result", created.lobby_id), None);
    assert_eq!(status, 401);
}

#[test]
fn plan_files_parse() {
    let config = ServiceConfig::from_toml(
        r#"
        [deadlines]
        speech = 90

        [[participants]]
        name = "r"
        kind = "random_legal"
        "#,
    )
    .unwrap();
    assert_eq!(config.deadlines.speech, 90.0);
    assert_eq!(config.deadlines.vote, 45.0);
    assert!(ServiceConfig::from_toml("[deadlines]\nvote = -1\n").is_err());
}
