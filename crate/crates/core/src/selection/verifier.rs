use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Criterion, PreferenceRecord, SpeechMoment, Walk};
use crate::agents::{
    extract_object, Claim, Message, PublicEvent, RemoteAgent, RemoteSpec, SpeechPayload, Stage,
    TemplateSet,
};
use crate::engine::{GameEvent, Seat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Conflict,
}

/// Speech checker. `Remote` falls back to the structural check when the endpoint fails.
#[derive(Debug, Clone, Default)]
pub enum Verifier {
    #[default]
    Structural,
    Remote(RemoteSpec),
}

/// Machine-decidable consistency of a speech with the public record.
///
/// Returns the first conflict found.
pub fn verify_speech(
    payload: &SpeechPayload,
    seats: u8,
    alive: &BTreeSet<Seat>,
    public: &[PublicEvent],
) -> Result<(), String> {
    for seat in payload.identity_tags.keys() {
        if seat.0 == 0 || seat.0 > seats {
            return Err(format!("identity tag for nonexistent seat {seat}"));
        }
    }
    if let Some(v) = payload.vote_intent {
        if !alive.contains(&v) {
            return Err(format!("vote intent names seat {v}, who is not alive"));
        }
    }
    for claim in &payload.claims {
        if !claim_holds(claim, public) {
            return Err(format!("claim {claim:?} contradicts the public record"));
        }
    }
    Ok(())
}

fn claim_holds(claim: &Claim, public: &[PublicEvent]) -> bool {
    match claim {
        Claim::Died { round, seat } => public.iter().any(|e| {
            matches!(e, PublicEvent::Dawn { round: r, deaths } if r == round && deaths.contains(seat))
        }),
        Claim::Peaceful { round } => public.iter().any(|e| {
            matches!(e, PublicEvent::Dawn { round: r, deaths } if r == round && deaths.is_empty())
        }),
        Claim::VotedOut { round, seat } => public.iter().any(|e| {
            matches!(e, PublicEvent::VotedOut { round: r, seat: s } if r == round && s == seat)
        }),
        Claim::Voted {
            round,
            voter,
            target,
        } => public
            .iter()
            .rev()
            .find_map(|e| match e {
                PublicEvent::Ballot { round: r, votes, .. } if r == round => Some(votes),
                _ => None,
            })
            .is_some_and(|votes| {
                votes.contains_key(voter) && votes.get(voter).copied().flatten() == *target
            }),
        Claim::Shot {
            round,
            shooter,
            target,
        } => public.iter().any(|e| {
            matches!(e, PublicEvent::HunterShot { round: r, shooter: s, target: t }
                if r == round && s == shooter && t == target)
        }),
    }
}

fn transcript(public: &[PublicEvent]) -> String {
    public
        .iter()
        .map(|e| serde_json::to_string(e).unwrap_or_default())
        .collect::<Vec<_>>()
        .join("\n")
}

const VERIFIER_SYSTEM: &str = "You check statements made in a Werewolf game against the public record. \
Reply with one JSON object: {\"verdict\": \"consistent\" or \"conflict\", \"evidence\": \"...\"}.";

/// Asks the remote judge; `None` when it cannot give a usable verdict.
fn remote_verdict(agent: &RemoteAgent, payload: &SpeechPayload, moment: &SpeechMoment) -> Option<Verdict> {
    let speech = serde_json::to_string(payload).ok()?;
    let messages = vec![
        Message::system(VERIFIER_SYSTEM),
        Message::user(format!(
            "Public record so far:\n{}\n\nSpeech:\n{speech}",
            transcript(&moment.public)
        )),
    ];
    let raw = match agent.complete(&messages) {
        Ok(raw) => raw,
        Err(e) => {
            log::warn!("verifier unavailable: {e}");
            return None;
        }
    };
    let obj = extract_object(&raw)?;
    match obj.get("verdict").and_then(Value::as_str)?.trim().to_ascii_lowercase().as_str() {
        "consistent" => Some(Verdict::Consistent),
        "conflict" | "conflicts" | "inconsistent" => Some(Verdict::Conflict),
        _ => None,
    }
}

pub(crate) fn select(walk: &Walk<'_>, verifier: &Verifier) -> Vec<PreferenceRecord> {
    let remote = match verifier {
        Verifier::Structural => None,
        Verifier::Remote(spec) => Some(RemoteAgent::new(spec.clone(), TemplateSet::empty())),
    };
    let seats = walk.log.setup.seats();
    let mut out = Vec::new();
    for (index, event) in walk.log.events.iter().enumerate() {
        let GameEvent::Speech {
            round,
            seat,
            payload,
        } = event
        else {
            continue;
        };
        let moment = &walk.speeches[&index];
        let structural = || match verify_speech(payload, seats, &moment.alive, &moment.public) {
            Ok(()) => Verdict::Consistent,
            Err(_) => Verdict::Conflict,
        };
        let (verdict, annotation) = match &remote {
            None => (structural(), None),
            Some(agent) => match remote_verdict(agent, payload, moment) {
                Some(v) => (v, None),
                None => (structural(), Some("structural_fallback".to_string())),
            },
        };
        let criterion = match verdict {
            Verdict::Consistent => Criterion::SpeechConsistent,
            Verdict::Conflict => Criterion::SpeechConflict,
        };
        let mut record = walk.record(*seat, *round, Stage::Speech, 0, criterion);
        record.annotation = annotation;
        out.push(record);
    }
    out
}
