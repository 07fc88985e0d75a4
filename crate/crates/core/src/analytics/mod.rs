//! Ratings, win-rate matrices, behavioral metrics, offline evaluation and
//! detectability scoring over game logs.

mod behavior;
mod detection;
mod offline;
mod trueskill;
mod winrate;

use std::io::Write;

pub use behavior::{behavioral_metrics, BehaviorReport, OpponentMetrics, Rate, VillageMetrics};
pub use detection::{detection_accuracy, DetectionError, Judgment, JudgmentSheet, SeatIdentity};
pub use offline::{offline_eval, score_prediction, Confusion, OfflineReport, SchemaError};
pub use trueskill::{
    rate_games, rate_games_with, rated_games, rating_table, trueskill_update, RatedGame, Rating,
    RatingError, RatingMode, RatingRow, TeamOutcome, TrueSkillParams,
};
pub use winrate::{faction_owners, row_average, win_matrix, WinMatrix};

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn ratings_csv(rows: &[RatingRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["participant", "mu", "sigma", "conservative", "games"])?;
    for r in rows {
        w.write_record([
            r.participant.clone(),
            format!("{:.4}", r.mu),
            format!("{:.4}", r.sigma),
            format!("{:.4}", r.conservative),
            r.games.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn win_matrix_csv(m: &WinMatrix, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["participant".to_string()];
    header.extend(m.participants.iter().cloned());
    header.extend(["average", "as_village", "as_wolf"].map(String::from));
    w.write_record(&header)?;
    for (i, name) in m.participants.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(m.cells[i].iter().map(|c| cell(*c)));
        row.push(cell(m.row_average[i]));
        row.push(cell(m.village_rate[i]));
        row.push(cell(m.wolf_rate[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn behavior_csv(report: &BehaviorReport, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value", "hits", "total"])?;
    for (name, rate) in report.rows() {
        match rate {
            Some(r) => w.write_record([
                name.to_string(),
                format!("{:.4}", r.value()),
                r.hits.to_string(),
                r.total.to_string(),
            ])?,
            None => w.write_record([name, "", "", ""])?,
        }
    }
    w.flush()?;
    Ok(())
}
