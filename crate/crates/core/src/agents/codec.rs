use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use super::{
    seat_list, Action, Claim, HunterAction, Message, NightAction, Observation, PrivateEvent,
    PublicEvent, SpeechPayload, Stage, VotePayload,
};
use crate::engine::{Role, Seat};

const DEFAULT_TEMPLATES: [(&str, &str); 16] = [
    ("system", include_str!("templates/system.txt")),
    ("user", include_str!("templates/user.txt")),
    ("role_werewolf", include_str!("templates/role_werewolf.txt")),
    ("role_villager", include_str!("templates/role_villager.txt")),
    ("role_seer", include_str!("templates/role_seer.txt")),
    ("role_witch", include_str!("templates/role_witch.txt")),
    ("role_guard", include_str!("templates/role_guard.txt")),
    ("role_hunter", include_str!("templates/role_hunter.txt")),
    ("night_werewolf", include_str!("templates/night_werewolf.txt")),
    ("night_seer", include_str!("templates/night_seer.txt")),
    ("night_witch", include_str!("templates/night_witch.txt")),
    ("night_guard", include_str!("templates/night_guard.txt")),
    ("speech", include_str!("templates/speech.txt")),
    ("vote", include_str!("templates/vote.txt")),
    ("hunter", include_str!("templates/hunter.txt")),
    ("prediction", include_str!("templates/prediction.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template `{0}` is missing from the template set")]
pub struct TemplateMissing(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("could not parse response: {reason}")]
pub struct ParseError {
    pub reason: String,
}

fn parse_err(reason: impl Into<String>) -> ParseError {
    ParseError {
        reason: reason.into(),
    }
}

/// Named prompt templates with `{placeholder}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: DEFAULT_TEMPLATES
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl TemplateSet {
    pub fn empty() -> TemplateSet {
        TemplateSet {
            templates: BTreeMap::new(),
        }
    }

    /// Loads every `NAME.txt` in `dir` as template `NAME`.
    pub fn from_dir(dir: &Path) -> std::io::Result<TemplateSet> {
        let mut templates = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "txt") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    templates.insert(stem.to_string(), std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(TemplateSet { templates })
    }

    pub fn insert(&mut self, name: impl Into<String>, body: impl Into<String>) {
        self.templates.insert(name.into(), body.into());
    }

    pub fn remove(&mut self, name: &str) {
        self.templates.remove(name);
    }

    pub fn get(&self, name: &str) -> Result<&str, TemplateMissing> {
        self.templates
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| TemplateMissing(name.to_string()))
    }
}

/// Replaces each `{name}` with its value; unknown names are left as written.
pub fn fill_template(template: &str, vars: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if vars.contains_key(&after[..close]) => {
                out.push_str(&vars[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn role_key(role: Role) -> &'static str {
    match role {
        Role::Werewolf => "werewolf",
        Role::SimpleVillager => "villager",
        Role::Seer => "seer",
        Role::Witch => "witch",
        Role::Guard => "guard",
        Role::Hunter => "hunter",
    }
}

fn players(seats: impl IntoIterator<Item = Seat>) -> String {
    let list: Vec<String> = seats.into_iter().map(|s| s.to_string()).collect();
    match list.len() {
        0 => "none".into(),
        1 => list[0].clone(),
        n => format!("{} and {}", list[..n - 1].join(", "), list[n - 1]),
    }
}

fn composition_text(obs: &Observation) -> String {
    let mut counts: BTreeMap<Role, usize> = BTreeMap::new();
    for r in obs.variant.composition() {
        *counts.entry(r).or_default() += 1;
    }
    counts
        .iter()
        .map(|(r, n)| {
            let name = if *r == Role::SimpleVillager {
                "ordinary Villager"
            } else {
                r.name()
            };
            if *n == 1 {
                format!("1 {name}")
            } else {
                format!("{n} {name}s")
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn action_record(obs: &Observation) -> String {
    let lines: Vec<String> = obs
        .private_history
        .iter()
        .map(|e| match e {
            PrivateEvent::SeerCheck {
                round,
                target,
                is_wolf,
            } => format!(
                "In round {round} you checked player {target}: {}.",
                if *is_wolf { "a werewolf" } else { "not a werewolf" }
            ),
            PrivateEvent::WitchNight {
                round,
                victim,
                saved,
                poisoned,
            } => {
                let attacked = match victim {
                    Some(v) => format!("player {v} was attacked"),
                    None => "nobody was attacked".to_string(),
                };
                let used = match (saved, poisoned) {
                    (true, _) => "you used the antidote".to_string(),
                    (false, Some(p)) => format!("you poisoned player {p}"),
                    (false, None) => "you used no potion".to_string(),
                };
                format!("In round {round} {attacked} and {used}.")
            }
            PrivateEvent::GuardNight { round, target } => match target {
                Some(t) => format!("In round {round} you protected player {t}."),
                None => format!("In round {round} you protected nobody."),
            },
            PrivateEvent::WolfNight {
                round, victim, ..
            } => match victim {
                Some(v) => format!("In round {round} the pack attacked player {v}."),
                None => format!("In round {round} the pack attacked nobody."),
            },
        })
        .collect();
    if lines.is_empty() {
        "none yet".into()
    } else {
        lines.join(" ")
    }
}

fn night_info(obs: &Observation) -> String {
    let lines: Vec<String> = obs
        .public_history
        .iter()
        .filter_map(|e| match e {
            PublicEvent::Dawn { round, deaths } if deaths.is_empty() => {
                Some(format!("In round {round} nobody died."))
            }
            PublicEvent::Dawn { round, deaths } => Some(format!(
                "In round {round} player {} died.",
                players(deaths.iter().copied())
            )),
            _ => None,
        })
        .collect();
    if lines.is_empty() {
        "none yet".into()
    } else {
        lines.join(" ")
    }
}

fn hunter_record(obs: &Observation) -> String {
    let lines: Vec<String> = obs
        .public_history
        .iter()
        .filter_map(|e| match e {
            PublicEvent::HunterShot {
                round,
                shooter,
                target: Some(t),
            } => Some(format!(
                "In round {round} player {shooter} (Hunter) shot player {t}."
            )),
            PublicEvent::HunterShot {
                round,
                shooter,
                target: None,
            } => Some(format!(
                "In round {round} player {shooter} (Hunter) did not shoot."
            )),
            _ => None,
        })
        .collect();
    if lines.is_empty() {
        "none".into()
    } else {
        lines.join(" ")
    }
}

fn voting_record(obs: &Observation) -> String {
    let mut out = Vec::new();
    for e in &obs.public_history {
        match e {
            PublicEvent::Ballot {
                round,
                ballot_index,
                votes,
            } => {
                let label = if *ballot_index == 0 { "" } else { " (revote)" };
                out.push(format!("\nRound {round} voting record{label}:"));
                for (voter, target) in votes {
                    match target {
                        Some(t) => out.push(format!("Player {voter} voted for: Player {t}")),
                        None => out.push(format!("Player {voter} abstained")),
                    }
                }
            }
            PublicEvent::VotedOut { seat, .. } => {
                out.push(format!("Result: Player {seat} was voted out."))
            }
            _ => {}
        }
    }
    if out.is_empty() {
        "none yet".into()
    } else {
        out.join("\n")
    }
}

fn speeches(obs: &Observation) -> String {
    let mut out = Vec::new();
    let mut current = 0;
    for e in &obs.public_history {
        if let PublicEvent::Speech {
            round,
            seat,
            payload,
        } = e
        {
            if *round != current {
                current = *round;
                out.push(format!("Round {round} speeches:"));
            }
            out.push(format!("Player {seat}: {}", payload.text));
        }
    }
    if out.is_empty() {
        "No speeches yet.".into()
    } else {
        out.join("\n")
    }
}

/// Renders the system and user messages for a decision point.
pub fn render_prompt(obs: &Observation, templates: &TemplateSet) -> Result<Vec<Message>, TemplateMissing> {
    let mut vars: BTreeMap<&str, String> = BTreeMap::new();
    vars.insert("seat", obs.seat.to_string());
    vars.insert("seats", obs.seats.to_string());
    vars.insert("role", obs.role.name().to_string());
    vars.insert("round", obs.round.to_string());
    vars.insert("composition", composition_text(obs));
    vars.insert("alive", players(obs.alive.iter().copied()));
    vars.insert("legal_targets", seat_list(&obs.legal_targets));
    vars.insert(
        "teammates_line",
        if obs.role.is_wolf() {
            let mut pack = obs.teammates.clone();
            pack.insert(obs.seat);
            format!("The werewolves are: players {}.\n", players(pack))
        } else {
            String::new()
        },
    );
    vars.insert("action_record", action_record(obs));
    vars.insert(
        "speaking_order",
        if obs.speaking_order.is_empty() {
            "not yet set".into()
        } else {
            obs.speaking_order
                .iter()
                .map(|s| format!("Player {s}"))
                .collect::<Vec<_>>()
                .join("; ")
        },
    );
    vars.insert("night_info", night_info(obs));
    vars.insert("hunter_record", hunter_record(obs));
    vars.insert("voting_record", voting_record(obs));
    vars.insert("speeches", speeches(obs));
    let (victim_line, potion_line) = match &obs.witch {
        Some(w) => (
            match w.victim {
                Some(v) => format!("Tonight player {v} was attacked by the werewolves."),
                None => "Nobody was attacked tonight.".to_string(),
            },
            format!(
                "Antidote: {}. Poison: {}.",
                if w.can_save { "available" } else { "unavailable" },
                if w.can_poison { "available" } else { "unavailable" }
            ),
        ),
        None => (String::new(), String::new()),
    };
    vars.insert(
        "current_night",
        if obs.witch.is_some() {
            format!("{victim_line}\n")
        } else {
            String::new()
        },
    );
    vars.insert("victim_line", victim_line);
    vars.insert("potion_line", potion_line);

    let mut role_rules = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in obs.variant.composition() {
        if r.is_special() && seen.insert(r) {
            let body = templates.get(&format!("role_{}", role_key(r)))?;
            role_rules.push(format!("{}: {}", r.name(), body.trim()));
        }
    }
    vars.insert("role_rules", role_rules.join("\n"));
    vars.insert(
        "role_description",
        templates
            .get(&format!("role_{}", role_key(obs.role)))?
            .trim()
            .to_string(),
    );

    let instruction_name = match obs.stage {
        Stage::NightAction => format!("night_{}", role_key(obs.role)),
        Stage::Speech => "speech".into(),
        Stage::Vote => "vote".into(),
        Stage::HunterShot => "hunter".into(),
        Stage::RolePrediction => "prediction".into(),
    };
    let instruction = fill_template(templates.get(&instruction_name)?, &vars);
    vars.insert("instruction", instruction.trim().to_string());

    let system = fill_template(templates.get("system")?, &vars);
    let user = fill_template(templates.get("user")?, &vars);
    Ok(vec![
        Message::system(system.trim()),
        Message::user(user.trim()),
    ])
}

fn seat_value(seat: Option<Seat>, none: &str) -> Value {
    match seat {
        Some(s) => Value::String(s.to_string()),
        None => Value::String(none.to_string()),
    }
}

/// The canonical JSON reply that encodes `action`.
pub fn render_response(action: &Action) -> String {
    let mut obj = Map::new();
    match action {
        Action::Night(n) => {
            if n.save {
                obj.insert("save".into(), Value::Bool(true));
            }
            obj.insert("target".into(), seat_value(n.target, "none"));
            obj.insert("reason".into(), Value::String(n.reason.clone()));
        }
        Action::Speech(s) => {
            obj.insert(
                "identity_to_present".into(),
                Value::String(s.identity_to_present.clone()),
            );
            let tags: Map<String, Value> = s
                .identity_tags
                .iter()
                .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
                .collect();
            obj.insert("identity_tags".into(), Value::Object(tags));
            obj.insert("vote_intent".into(), seat_value(s.vote_intent, "none"));
            obj.insert("speech".into(), Value::String(s.text.clone()));
            if !s.claims.is_empty() {
                obj.insert(
                    "claims".into(),
                    serde_json::to_value(&s.claims).expect("claims serialize"),
                );
            }
        }
        Action::Vote(v) => {
            obj.insert("notes".into(), Value::String(v.notes.clone()));
            obj.insert("reason".into(), Value::String(v.reason.clone()));
            obj.insert("vote".into(), seat_value(v.target, "abstain"));
        }
        Action::HunterShot(h) => {
            obj.insert("target".into(), seat_value(h.target, "none"));
            obj.insert("reason".into(), Value::String(h.reason.clone()));
        }
        Action::RolePrediction(map) => {
            for (s, r) in map {
                obj.insert(s.to_string(), Value::String(r.name().to_string()));
            }
        }
    }
    Value::Object(obj).to_string()
}

/// Rewrites Python-style literals (single quotes, True/False/None) as JSON.
fn relax(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        match quote {
            Some(q) => match c {
                '\\' => {
                    out.push('\\');
                    if let Some(n) = chars.next() {
                        out.push(n);
                    }
                }
                '"' if q == '\'' => out.push_str("\\\""),
                c if c == q => {
                    out.push('"');
                    quote = None;
                }
                '\n' => out.push_str("\\n"),
                c => out.push(c),
            },
            None => match c {
                '\'' | '"' => {
                    out.push('"');
                    quote = Some(c);
                }
                c if c.is_ascii_alphabetic() => {
                    let mut word = String::from(c);
                    while let Some(n) = chars.peek().copied().filter(|n| n.is_ascii_alphanumeric()) {
                        word.push(n);
                        chars.next();
                    }
                    out.push_str(match word.as_str() {
                        "True" => "true",
                        "False" => "false",
                        "None" => "null",
                        other => other,
                    });
                }
                c => out.push(c),
            },
        }
    }
    out
}

fn first_object_in(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

/// The first well-formed object embedded in `raw`, tolerating prose and code fences.
pub fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    first_object_in(raw).or_else(|| first_object_in(&relax(raw)))
}

fn norm_key(k: &str) -> String {
    k.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

fn lookup<'a>(obj: &'a Map<String, Value>, aliases: &[&str]) -> Option<&'a Value> {
    aliases.iter().find_map(|alias| {
        obj.iter()
            .find(|(k, _)| norm_key(k) == *alias)
            .map(|(_, v)| v)
    })
}

const PASS_MARKERS: [&str; 14] = [
    "", "none", "abstain", "弃票", "pass", "no one", "nobody", "null", "skip", "no", "无", "不使用",
    "空", "不投",
];

fn first_number(text: &str) -> Option<u64> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

fn parse_seat(v: &Value) -> Result<Option<Seat>, ParseError> {
    let n = match v {
        Value::Null | Value::Bool(false) => return Ok(None),
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| parse_err(format!("`{n}` is not a player number")))?,
        Value::String(s) => {
            let t = s.trim().to_lowercase();
            if PASS_MARKERS.contains(&t.as_str()) {
                return Ok(None);
            }
            first_number(&t).ok_or_else(|| parse_err(format!("`{s}` is not a player number")))?
        }
        other => return Err(parse_err(format!("`{other}` is not a player number"))),
    };
    u8::try_from(n)
        .ok()
        .filter(|n| *n >= 1)
        .map(|n| Some(Seat(n)))
        .ok_or_else(|| parse_err(format!("{n} is not a player number")))
}

fn key_seat(k: &str) -> Result<Seat, ParseError> {
    first_number(k)
        .and_then(|n| u8::try_from(n).ok())
        .filter(|n| *n >= 1)
        .map(Seat)
        .ok_or_else(|| parse_err(format!("`{k}` does not name a player")))
}

pub fn parse_role_label(label: &str) -> Option<Role> {
    let l = norm_key(label);
    match l.as_str() {
        "werewolf" | "wolf" | "狼人" | "狼" => Some(Role::Werewolf),
        "villager" | "simple_villager" | "simplevillager" | "ordinary_villager" | "普通村民"
        | "村民" | "平民" => Some(Role::SimpleVillager),
        "seer" | "预言家" => Some(Role::Seer),
        "witch" | "女巫" => Some(Role::Witch),
        "guard" | "守卫" => Some(Role::Guard),
        "hunter" | "猎人" => Some(Role::Hunter),
        _ => None,
    }
}

fn text_of(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        Value::String(s) => matches!(
            s.trim().to_lowercase().as_str(),
            "true" | "yes" | "save" | "是" | "使用" | "救"
        ),
        _ => false,
    }
}

const TARGET_KEYS: [&str; 16] = [
    "target", "check", "查验", "kill", "击杀", "attack", "刀", "protect", "守护", "保护", "poison",
    "毒", "毒药", "shoot", "开枪", "player",
];
const REASON_KEYS: [&str; 4] = ["reason", "原因", "理由", "投票原因"];

/// Decodes an agent reply for `stage`. Accepts canonical keys and the Chinese and
/// English aliases used by the reference prompt formats.
pub fn parse_action(raw: &str, stage: Stage) -> Result<Action, ParseError> {
    let obj = extract_object(raw).ok_or_else(|| parse_err("no JSON object found in the reply"))?;
    match stage {
        Stage::NightAction => {
            let save = lookup(&obj, &["save", "解药", "救", "antidote", "use_antidote"])
                .is_some_and(truthy);
            let target = match lookup(&obj, &TARGET_KEYS) {
                Some(v) => parse_seat(v)?,
                None if save => None,
                None => return Err(parse_err("missing key \"target\"")),
            };
            Ok(Action::Night(NightAction {
                target,
                save,
                reason: text_of(lookup(&obj, &REASON_KEYS)),
            }))
        }
        Stage::Speech => {
            let text = lookup(&obj, &["speech", "发言", "text"])
                .ok_or_else(|| parse_err("missing key \"speech\""))?;
            let mut identity_tags = BTreeMap::new();
            match lookup(&obj, &["identity_tags", "身份标签", "tags"]) {
                None | Some(Value::Null) => {}
                Some(Value::Object(tags)) => {
                    for (k, v) in tags {
                        identity_tags.insert(key_seat(k)?, text_of(Some(v)));
                    }
                }
                Some(_) => return Err(parse_err("\"identity_tags\" must be an object")),
            }
            let vote_intent = match lookup(&obj, &["vote_intent", "归票", "vote_for", "vote"]) {
                Some(v) => parse_seat(v)?,
                None => None,
            };
            let claims: Vec<Claim> = match lookup(&obj, &["claims"]) {
                None | Some(Value::Null) => Vec::new(),
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| parse_err(format!("bad \"claims\": {e}")))?,
            };
            Ok(Action::Speech(SpeechPayload {
                identity_to_present: text_of(lookup(
                    &obj,
                    &["identity_to_present", "想要展示的身份", "identity"],
                )),
                identity_tags,
                vote_intent,
                text: text_of(Some(text)),
                claims,
            }))
        }
        Stage::Vote => {
            let v = lookup(
                &obj,
                &["vote", "投票玩家", "voting_player", "vote_for", "target"],
            )
            .ok_or_else(|| parse_err("missing key \"vote\""))?;
            Ok(Action::Vote(VotePayload {
                notes: text_of(lookup(&obj, &["notes", "笔记", "note"])),
                reason: text_of(lookup(&obj, &["reason", "投票原因", "voting_reason", "原因"])),
                target: parse_seat(v)?,
            }))
        }
        Stage::HunterShot => {
            let v = lookup(&obj, &TARGET_KEYS).ok_or_else(|| parse_err("missing key \"target\""))?;
            Ok(Action::HunterShot(HunterAction {
                target: parse_seat(v)?,
                reason: text_of(lookup(&obj, &REASON_KEYS)),
            }))
        }
        Stage::RolePrediction => {
            let mut map = BTreeMap::new();
            for (k, v) in &obj {
                let seat = key_seat(k)?;
                let label = text_of(Some(v));
                let role = parse_role_label(&label)
                    .ok_or_else(|| parse_err(format!("unknown role `{label}` for player {seat}")))?;
                map.insert(seat, role);
            }
            if map.is_empty() {
                return Err(parse_err("no role predictions found"));
            }
            Ok(Action::RolePrediction(map))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relax_handles_python_dicts() {
        let raw = "{'Check': '2', 'Reason': 'he said \"hi\"', 'ok': True}";
        let obj = extract_object(raw).unwrap();
        assert_eq!(obj["Check"], "2");
        assert_eq!(obj["ok"], true);
    }

    #[test]
    fn fill_leaves_unknown_slots() {
        let mut vars = BTreeMap::new();
        vars.insert("a", "x".to_string());
        assert_eq!(fill_template("{a} {b} {", &vars), "x {b} {");
    }

    #[test]
    fn seat_strings() {
        assert_eq!(parse_seat(&Value::String("Player 3".into())).unwrap(), Some(Seat(3)));
        assert_eq!(parse_seat(&Value::String("5号".into())).unwrap(), Some(Seat(5)));
        assert_eq!(parse_seat(&Value::String("弃票".into())).unwrap(), None);
        assert!(parse_seat(&Value::String("someone".into())).is_err());
        assert!(parse_seat(&Value::from(0)).is_err());
    }
}
