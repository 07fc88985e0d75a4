use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;

use werewolf_core::agents::{RemoteSpec, TemplateSet};
use werewolf_core::engine::Seat;
use werewolf_core::fixtures::{golden_game, selection_corpus, witch_suspect_game};
use werewolf_core::selection::{
    check_unique, dataset_stats, emit_dataset, read_dataset, select_all, select_heuristic,
    select_staged_voting, select_verifier, Criterion, DecisionPhase, Label, PreferenceRecord,
    Selector, Verifier,
};

const ALL: [Selector; 3] = [Selector::Heuristic, Selector::StagedVoting, Selector::Verifier];

fn find(records: &[PreferenceRecord], round: u32, seat: u8, phase: DecisionPhase) -> Option<Criterion> {
    records
        .iter()
        .find(|r| r.round == round && r.seat == Seat(seat) && r.phase == phase)
        .map(|r| r.criterion)
}

#[test]
fn golden_night_and_vote_labels() {
    let recs = select_heuristic(&golden_game()).unwrap();
    use DecisionPhase::*;
    assert_eq!(find(&recs, 1, 8, NightAction), Some(Criterion::WitchSavesNight1));
    assert_eq!(find(&recs, 3, 8, NightAction), Some(Criterion::WitchPoisonsWolf));
    assert_eq!(find(&recs, 2, 1, NightAction), Some(Criterion::GuardProtectsSpecial));
    assert_eq!(find(&recs, 1, 6, Vote), Some(Criterion::VoteEliminatesVillager));
    assert_eq!(find(&recs, 1, 4, Vote), Some(Criterion::SpecialVotesWolf));
    assert_eq!(find(&recs, 2, 9, Vote), Some(Criterion::VoteEliminatesWolf));
    // night-1 wolves targeting a fellow wolf earn no label
    assert_eq!(find(&recs, 1, 2, NightAction), None);
    assert_eq!(find(&recs, 1, 5, Vote), None);
}

#[test]
fn golden_speech_labels() {
    let recs = select_staged_voting(&golden_game()).unwrap();
    use DecisionPhase::Speech;
    // three of six village ballots is not a majority
    assert_eq!(find(&recs, 1, 7, Speech), Some(Criterion::WolfSpeechSurvives));
    assert_eq!(find(&recs, 2, 7, Speech), Some(Criterion::WolfSpeechEliminated));
    assert_eq!(find(&recs, 1, 4, Speech), Some(Criterion::VillagerSpeechEliminated));
    assert_eq!(find(&recs, 1, 5, Speech), Some(Criterion::VillagerNoVotes));
    assert_eq!(find(&recs, 2, 9, Speech), None);

    let verified = select_verifier(&golden_game(), &Verifier::Structural).unwrap();
    assert!(verified.iter().all(|r| r.criterion == Criterion::SpeechConsistent));
}

#[test]
fn witch_fixture_fires_the_witch_and_conflict_rows() {
    let recs = select_all(&[witch_suspect_game()], &ALL, &Verifier::Structural, &TemplateSet::default()).unwrap();
    use DecisionPhase::Speech;
    let staged: Vec<_> = recs.iter().filter(|r| r.selector == Selector::StagedVoting).cloned().collect();
    assert_eq!(find(&staged, 1, 8, Speech), Some(Criterion::WitchSpeechSuspected));
    assert_eq!(find(&staged, 1, 4, Speech), Some(Criterion::SeerNoVillagerVotes));
    let verified: Vec<_> = recs.iter().filter(|r| r.selector == Selector::Verifier).cloned().collect();
    assert_eq!(find(&verified, 1, 9, Speech), Some(Criterion::SpeechConflict));
    assert_eq!(find(&verified, 1, 8, Speech), Some(Criterion::SpeechConsistent));
}

#[test]
fn corpus_covers_every_row_with_matching_labels() {
    let recs = select_all(&selection_corpus(40), &ALL, &Verifier::Structural, &TemplateSet::default()).unwrap();
    let fired: BTreeSet<Criterion> = recs.iter().map(|r| r.criterion).collect();
    let missing: Vec<_> = Criterion::ALL.iter().filter(|c| !fired.contains(c)).collect();
    assert!(missing.is_empty(), "never fired: {missing:?}");
    for r in &recs {
        assert_eq!(r.label, r.criterion.label());
        assert_eq!(r.selector, r.criterion.selector());
        assert_eq!(r.phase, r.criterion.phase());
        assert!(!r.context.is_empty() && !r.response.is_empty());
    }
    check_unique(&recs).unwrap();
}

#[test]
fn emitted_datasets_are_byte_identical_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let logs = selection_corpus(10);
    let run = |name: &str| {
        let recs = select_all(&logs, &ALL, &Verifier::Structural, &TemplateSet::default()).unwrap();
        let path = dir.path().join(name);
        let stats = emit_dataset(&recs, &path).unwrap();
        (std::fs::read(&path).unwrap(), stats, recs)
    };
    let (a, stats, recs) = run("a.jsonl");
    let (b, _, _) = run("b.jsonl");
    assert_eq!(a, b);
    assert_eq!(stats, dataset_stats(&recs));
    assert_eq!(stats.total, recs.len());
    assert_eq!(read_dataset(&dir.path().join("a.jsonl")).unwrap(), recs);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"label\":\"unacceptable\""));
    assert!(text.contains("\"label\":\"desirable\""));
}

#[test]
fn duplicate_keys_are_rejected() {
    let mut recs = select_heuristic(&golden_game()).unwrap();
    recs.push(recs[0].clone());
    assert!(check_unique(&recs).is_err());
}

#[test]
fn labels_serialize_with_wire_names() {
    assert_eq!(serde_json::to_string(&Label::Undesirable).unwrap(), "\"unacceptable\"");
    assert_eq!(serde_json::from_str::<Label>("\"undesirable\"").unwrap(), Label::Undesirable);
    assert_eq!("vote".parse::<Selector>().unwrap(), Selector::StagedVoting);
}

/// Serves `requests` chat completions that all carry `content`.
fn stub_endpoint(content: &'static str, requests: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming().take(requests) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let reply = serde_json::json!({"choices": [{"message": {"content": content}}]}).to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    format!("http://{addr}/v1/chat/completions")
}

#[test]
fn remote_verifier_verdicts_are_used() {
    let log = witch_suspect_game();
    let speeches = select_verifier(&log, &Verifier::Structural).unwrap().len();
    let endpoint = stub_endpoint(r#"{"verdict": "conflict", "evidence": "stub"}"#, speeches);
    let recs = select_verifier(&log, &Verifier::Remote(RemoteSpec::new(endpoint, "judge"))).unwrap();
    assert_eq!(recs.len(), speeches);
    assert!(recs.iter().all(|r| r.criterion == Criterion::SpeechConflict && r.annotation.is_none()));
}

#[test]
fn unreachable_verifier_falls_back_to_the_structural_check() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    drop(listener);
    let mut spec = RemoteSpec::new(endpoint, "judge");
    spec.timeout_secs = 2.0;
    let recs = select_verifier(&witch_suspect_game(), &Verifier::Remote(spec)).unwrap();
    let structural = select_verifier(&witch_suspect_game(), &Verifier::Structural).unwrap();
    for (r, s) in recs.iter().zip(&structural) {
        assert_eq!(r.criterion, s.criterion);
        assert_eq!(r.annotation.as_deref(), Some("structural_fallback"));
    }
}
