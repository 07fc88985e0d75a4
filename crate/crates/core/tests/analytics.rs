use std::collections::BTreeMap;

use werewolf_core::agents::{AgentKind, AgentSpec};
use werewolf_core::analytics::{
    behavior_csv, behavioral_metrics, detection_accuracy, offline_eval, ratings_csv, row_average,
    score_prediction, win_matrix, win_matrix_csv, Confusion, DetectionError, Judgment,
    JudgmentSheet, Rate, RatingRow, SeatIdentity, WinMatrix,
};
use werewolf_core::arena::{simulate, AgentPlan, SimulationPlan};
use werewolf_core::engine::{GameLog, Role, Seat, SetupVariant, Winner};
use werewolf_core::fixtures::{behavior_fixture, golden_game};

fn rate(hits: u32, total: u32) -> Option<Rate> {
    Some(Rate { hits, total })
}

#[test]
fn published_row_average() {
    let row = [0.88, 0.65, 0.62, 0.53, 0.51, 0.58, 0.50].map(Some);
    let avg = row_average(&row).unwrap();
    assert!((avg - 0.610).abs() < 1e-12, "{avg}");
    assert_eq!(format!("{avg:.3}"), "0.610");
}

#[test]
fn single_participant_matrix() {
    let m = WinMatrix::single("solo");
    assert_eq!(m.cells, vec![vec![Some(0.5)]]);
    assert_eq!(m.row_average, vec![Some(0.5)]);
}

fn tagged_logs() -> Vec<GameLog> {
    let names = ["x", "y", "z"];
    let mut plan = SimulationPlan::new(SetupVariant::Swg9, 60, 77, AgentPlan::from_kinds("random").unwrap());
    plan.record_transcripts = false;
    let mut logs = simulate(&plan).unwrap();
    for (i, log) in logs.iter_mut().enumerate() {
        let village = names[i % 3];
        let wolf = names[(i / 3 + i % 3 + 1) % 3];
        let wolf = if wolf == village { names[(i % 3 + 2) % 3] } else { wolf };
        log.participants = log
            .roles
            .iter()
            .map(|(s, r)| (*s, if r.is_wolf() { wolf } else { village }.to_string()))
            .collect();
    }
    logs
}

#[test]
fn matrix_cells_equal_brute_force_counts() {
    let logs = tagged_logs();
    let m = win_matrix(&logs);
    assert_eq!(m.participants, vec!["x", "y", "z"]);
    for (i, a) in m.participants.iter().enumerate() {
        for (j, b) in m.participants.iter().enumerate() {
            if i == j {
                assert_eq!(m.cells[i][j], Some(0.5));
                continue;
            }
            let mut played = 0;
            let mut won = 0;
            for log in &logs {
                let side_of = |name: &str| {
                    log.roles
                        .iter()
                        .find(|(s, _)| log.participants[*s] == name)
                        .map(|(_, r)| r.faction())
                };
                let (Some(fa), Some(fb)) = (side_of(a), side_of(b)) else {
                    continue;
                };
                if fa == fb {
                    continue;
                }
                played += 1;
                won += u32::from(log.winner.and_then(Winner::faction) == Some(fa));
            }
            assert_eq!(m.games[i][j], played);
            if played > 0 {
                assert_eq!(m.cells[i][j], Some(f64::from(won) / f64::from(played)));
                let mirror = m.cells[j][i].unwrap();
                assert!((m.cells[i][j].unwrap() + mirror - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn hand_counted_behavior() {
    let report = behavioral_metrics(&[behavior_fixture()], None);
    let v = &report.village;
    assert_eq!(v.vote_accuracy, rate(7, 9));
    assert_eq!(v.abstention, rate(1, 10));
    assert_eq!(v.werewolf_check, rate(1, 1));
    assert_eq!(v.save_night1, rate(0, 1));
    assert_eq!(v.correct_poison, rate(0, 1));
    assert_eq!(v.mispoison, rate(1, 1));
    assert_eq!(v.protect_special, rate(1, 2));
    assert_eq!(v.misprotect, rate(0, 2));
    assert!((v.vote_accuracy.unwrap().value() - 7.0 / 9.0).abs() < 1e-15);
}

#[test]
fn golden_game_behavior() {
    let report = behavioral_metrics(&[golden_game()], None);
    let v = &report.village;
    assert_eq!(v.vote_accuracy, rate(13, 16));
    assert_eq!(v.abstention, rate(0, 16));
    assert_eq!(v.save_night1, rate(1, 1));
    assert_eq!(v.correct_poison, rate(1, 1));
    assert_eq!(v.protect_special, rate(2, 2));
    assert_eq!(v.werewolf_check, None);
}

#[test]
fn empty_denominators_are_absent() {
    let mut log = golden_game();
    log.events.retain(|e| {
        !matches!(e, werewolf_core::engine::GameEvent::NightSubmitted { packet, .. } if packet.witch_poison.is_some())
    });
    let report = behavioral_metrics(&[log], None);
    assert_eq!(report.village.correct_poison, None);
    for (_, r) in report.rows() {
        if let Some(r) = r {
            assert!(r.total > 0);
        }
    }
}

#[test]
fn participant_filter_and_degraded_seats() {
    let mut log = behavior_fixture();
    log.participants = (1..=9).map(|s| (Seat(s), if s <= 4 { "a" } else { "b" }.to_string())).collect();
    let a = behavioral_metrics(std::slice::from_ref(&log), Some("a"));
    // seats 1 and 4 vote on wolves on both days
    assert_eq!(a.village.vote_accuracy, rate(4, 4));
    assert_eq!(a.village.protect_special, rate(1, 2));
    assert_eq!(a.village.mispoison, None);
    assert!(a.opponent.abstention.is_some());
    log.degraded.insert(Seat(1));
    let a = behavioral_metrics(&[log], Some("a"));
    assert_eq!(a.village.vote_accuracy, rate(2, 2));
    assert_eq!(a.village.protect_special, None);
}

#[test]
fn degenerate_predictor_scores() {
    let truth = golden_game().roles;
    let everyone_villager: BTreeMap<Seat, Role> = truth.keys().map(|s| (*s, Role::SimpleVillager)).collect();
    let (mut aligned, mut total, mut confusion) = (0, 0, Confusion::default());
    score_prediction(&everyone_villager, &truth, &mut aligned, &mut total, &mut confusion);
    assert_eq!((aligned, total), (6, 9));
    assert_eq!(confusion.f1(), Some(0.0));
}

#[test]
fn confusion_arithmetic() {
    let c = Confusion {
        tp: 2,
        fp: 1,
        fn_: 1,
        tn: 5,
    };
    assert!((c.f1().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(Confusion::default().f1(), None);
}

#[test]
fn informed_oracle_is_perfect_offline() {
    let oracle = AgentSpec::scripted("oracle", AgentKind::InformedVillager);
    let report = offline_eval(&[golden_game(), behavior_fixture()], &oracle).unwrap();
    assert!(report.voting_events > 0);
    assert_eq!(report.vote_accuracy, Some(1.0));
    assert_eq!(report.alignment_accuracy, Some(1.0));
    assert_eq!(report.wolf_f1, Some(1.0));
    assert_eq!(report.identity_predictions, report.voting_events * 9);
}

#[test]
fn offline_eval_rejects_incomplete_annotations() {
    let mut log = golden_game();
    log.roles.remove(&Seat(9));
    let oracle = AgentSpec::scripted("oracle", AgentKind::InformedVillager);
    assert!(offline_eval(&[log], &oracle).is_err());
}

fn sheet(judge_seat: u8, verdicts: &[(u8, Judgment)]) -> JudgmentSheet {
    JudgmentSheet {
        game_id: "g".into(),
        judge: format!("human-{judge_seat}"),
        judge_seat: Seat(judge_seat),
        judgments: verdicts.iter().map(|(s, j)| (Seat(*s), *j)).collect(),
    }
}

#[test]
fn detection_rates() {
    use Judgment::*;
    let truth: BTreeMap<String, BTreeMap<Seat, SeatIdentity>> = [(
        "g".to_string(),
        [
            (Seat(1), SeatIdentity::Human),
            (Seat(2), SeatIdentity::Human),
            (Seat(3), SeatIdentity::Ai("model-x".into())),
            (Seat(4), SeatIdentity::Ai("model-y".into())),
        ]
        .into_iter()
        .collect(),
    )]
    .into_iter()
    .collect();
    let sheets: Vec<JudgmentSheet> = (0..5)
        .flat_map(|k| {
            let verdict = if k % 2 == 0 { Ai } else { Human };
            [sheet(1, &[(2, Human), (3, verdict), (4, Ai)]), sheet(2, &[(1, Human), (3, verdict.flip()), (4, Ai)])]
        })
        .collect();
    let rates = detection_accuracy(&sheets, &truth).unwrap();
    assert_eq!(rates["model-x"], Rate { hits: 5, total: 10 });
    assert_eq!(rates["model-y"].value(), 1.0);
    assert!(!rates.contains_key("human"));

    let stray = sheet(1, &[(5, Ai)]);
    assert!(matches!(
        detection_accuracy(&[stray], &truth),
        Err(DetectionError::MissingGroundTruth { .. })
    ));
    assert_eq!(sheet(1, &[(2, Ai)]).missing(4), vec![Seat(3), Seat(4)]);
}

trait Flip {
    fn flip(self) -> Self;
}

impl Flip for Judgment {
    fn flip(self) -> Judgment {
        match self {
            Judgment::Ai => Judgment::Human,
            Judgment::Human => Judgment::Ai,
        }
    }
}

#[test]
fn csv_tables() {
    let mut buf = Vec::new();
    ratings_csv(
        &[RatingRow {
            participant: "p".into(),
            mu: 25.0,
            sigma: 8.0,
            conservative: 1.0,
            games: 3,
        }],
        &mut buf,
    )
    .unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "participant,mu,sigma,conservative,games\np,25.0000,8.0000,1.0000,3\n");

    let mut buf = Vec::new();
    win_matrix_csv(&WinMatrix::single("solo"), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "participant,solo,average,as_village,as_wolf\nsolo,0.5000,0.5000,,\n");

    let mut buf = Vec::new();
    behavior_csv(&behavioral_metrics(&[behavior_fixture()], None), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("vote_accuracy,0.7778,7,9\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn faction_rates_break_out_sides() {
    let m = win_matrix(&tagged_logs());
    for i in 0..m.participants.len() {
        assert!(m.village_rate[i].is_some() && m.wolf_rate[i].is_some());
    }
}
