//! Two-team TrueSkill with an optional draw margin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::engine::{Faction, GameLog, Winner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

impl Rating {
    pub fn new(mu: f64, sigma: f64) -> Rating {
        Rating { mu, sigma }
    }

    /// `mu − 3·sigma`.
    pub fn conservative(&self) -> f64 {
        self.mu - 3.0 * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSkillParams {
    pub mu0: f64,
    pub sigma0: f64,
    /// Performance noise per player.
    pub beta: f64,
    /// Dynamics noise added before each update.
    pub tau: f64,
    pub draw_probability: f64,
}

impl Default for TrueSkillParams {
    fn default() -> Self {
        TrueSkillParams {
            mu0: 25.0,
            sigma0: 25.0 / 3.0,
            beta: 25.0 / 6.0,
            tau: 25.0 / 300.0,
            draw_probability: 0.0,
        }
    }
}

impl TrueSkillParams {
    pub fn fresh(&self) -> Rating {
        Rating::new(self.mu0, self.sigma0)
    }

    pub fn validate(&self) -> Result<(), RatingError> {
        let positive = [self.sigma0, self.beta]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        let positive = positive && self.tau.is_finite() && self.tau >= 0.0;
        let draw_ok = (0.0..1.0).contains(&self.draw_probability);
        if positive && self.mu0.is_finite() && draw_ok {
            Ok(())
        } else {
            Err(RatingError::InvalidParams)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatingError {
    #[error("a team has no members")]
    EmptyTeam,
    #[error("rating parameters out of range")]
    InvalidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TeamOutcome {
    A,
    B,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Additive mean correction for a win with margin `eps`.
fn v_win(t: f64, eps: f64) -> f64 {
    let n = std_normal();
    let x = t - eps;
    let denom = n.cdf(x);
    if denom < 1e-300 {
        // asymptote of φ(x)/Φ(x) for very negative x
        return -x;
    }
    n.pdf(x) / denom
}

fn w_win(t: f64, eps: f64) -> f64 {
    let v = v_win(t, eps);
    (v * (v + t - eps)).clamp(0.0, 1.0)
}

/// Updates both teams after a decisive result.
pub fn trueskill_update(
    team_a: &[Rating],
    team_b: &[Rating],
    winner: TeamOutcome,
    p: &TrueSkillParams,
) -> Result<(Vec<Rating>, Vec<Rating>), RatingError> {
    if team_a.is_empty() || team_b.is_empty() {
        return Err(RatingError::EmptyTeam);
    }
    p.validate()?;
    let (win, lose) = match winner {
        TeamOutcome::A => (team_a, team_b),
        TeamOutcome::B => (team_b, team_a),
    };
    let tau2 = p.tau * p.tau;
    let n = (win.len() + lose.len()) as f64;
    let c2: f64 = win
        .iter()
        .chain(lose)
        .map(|r| r.sigma * r.sigma + tau2)
        .sum::<f64>()
        + n * p.beta * p.beta;
    let c = c2.sqrt();
    let eps = if p.draw_probability > 0.0 {
        std_normal().inverse_cdf((p.draw_probability + 1.0) / 2.0) * n.sqrt() * p.beta
    } else {
        0.0
    };
    let delta = (win.iter().map(|r| r.mu).sum::<f64>() - lose.iter().map(|r| r.mu).sum::<f64>()) / c;
    let v = v_win(delta, eps / c);
    let w = w_win(delta, eps / c);
    let update = |r: &Rating, sign: f64| {
        let sd = r.sigma.hypot(p.tau);
        let var = sd * sd;
        let mu = r.mu + sign * var / c * v;
        let sigma = sd * (1.0 - var / c2 * w).max(f64::MIN_POSITIVE).sqrt();
        Rating::new(mu, sigma)
    };
    let won: Vec<Rating> = win.iter().map(|r| update(r, 1.0)).collect();
    let lost: Vec<Rating> = lose.iter().map(|r| update(r, -1.0)).collect();
    Ok(match winner {
        TeamOutcome::A => (won, lost),
        TeamOutcome::B => (lost, won),
    })
}

/// How seats map onto rated players.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingMode {
    /// Every seat is a team member carrying its participant's rating.
    #[default]
    Individual,
    /// Each side is the set of distinct participants on it.
    Team,
}

/// Outcome of one match in rating form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatedGame {
    pub village: Vec<String>,
    pub wolf: Vec<String>,
    pub winner: Winner,
}

impl RatedGame {
    /// `None` for untagged logs or logs without a winner.
    pub fn from_log(log: &GameLog) -> Option<RatedGame> {
        let winner = log.winner?;
        if log.participants.is_empty() {
            return None;
        }
        let mut village = Vec::new();
        let mut wolf = Vec::new();
        for (seat, role) in &log.roles {
            let who = log.participants.get(seat)?.clone();
            match role.faction() {
                Faction::Village => village.push(who),
                Faction::Wolf => wolf.push(who),
            }
        }
        Some(RatedGame {
            village,
            wolf,
            winner,
        })
    }
}

/// Logs in rating order: by match seed, then game id.
pub fn rated_games(logs: &[GameLog]) -> Vec<RatedGame> {
    let mut ordered: Vec<&GameLog> = logs.iter().collect();
    ordered.sort_by(|a, b| (a.seed, &a.game_id).cmp(&(b.seed, &b.game_id)));
    ordered.into_iter().filter_map(RatedGame::from_log).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub participant: String,
    pub mu: f64,
    pub sigma: f64,
    pub conservative: f64,
    pub games: u32,
}

/// Applies every decisive game in order. Draws leave ratings untouched.
pub fn rate_games(
    games: &[RatedGame],
    mode: RatingMode,
    p: &TrueSkillParams,
) -> Result<BTreeMap<String, (Rating, u32)>, RatingError> {
    rate_games_with(games, mode, p, |_, _, _| {})
}

/// [`rate_games`], reporting `(participant, before, after)` for every change.
pub fn rate_games_with(
    games: &[RatedGame],
    mode: RatingMode,
    p: &TrueSkillParams,
    mut observe: impl FnMut(&str, Rating, Rating),
) -> Result<BTreeMap<String, (Rating, u32)>, RatingError> {
    p.validate()?;
    let mut table: BTreeMap<String, (Rating, u32)> = BTreeMap::new();
    for g in games {
        for name in g.village.iter().chain(&g.wolf) {
            table.entry(name.clone()).or_insert((p.fresh(), 0));
        }
        let outcome = match g.winner {
            Winner::Village => TeamOutcome::A,
            Winner::Wolf => TeamOutcome::B,
            Winner::Draw => continue,
        };
        let (a_names, b_names): (Vec<String>, Vec<String>) = match mode {
            RatingMode::Individual => (g.village.clone(), g.wolf.clone()),
            RatingMode::Team => {
                let dedup = |v: &[String]| {
                    let mut v = v.to_vec();
                    v.sort();
                    v.dedup();
                    v
                };
                let (va, wb) = (dedup(&g.village), dedup(&g.wolf));
                (
                    va.iter().filter(|n| !wb.contains(n)).cloned().collect(),
                    wb.iter().filter(|n| !va.contains(n)).cloned().collect(),
                )
            }
        };
        if a_names.is_empty() || b_names.is_empty() {
            continue;
        }
        let team = |names: &[String]| names.iter().map(|n| table[n].0).collect::<Vec<_>>();
        let (new_a, new_b) = trueskill_update(&team(&a_names), &team(&b_names), outcome, p)?;
        // several seats of one participant accumulate as independent evidence
        let mut acc: BTreeMap<&String, (f64, f64, f64)> = BTreeMap::new();
        for (name, r) in a_names.iter().zip(&new_a).chain(b_names.iter().zip(&new_b)) {
            let prior = table[name].0;
            let sd0 = prior.sigma.hypot(p.tau);
            let var0 = sd0 * sd0;
            let e = acc.entry(name).or_insert((prior.mu, 1.0 / var0, sd0));
            e.0 += r.mu - prior.mu;
            e.1 += (1.0 / (r.sigma * r.sigma) - 1.0 / var0).max(0.0);
        }
        for (name, (mu, precision, sd0)) in acc {
            let entry = table.get_mut(name).expect("registered above");
            let before = entry.0;
            entry.0 = Rating::new(mu, precision.recip().sqrt().min(sd0));
            entry.1 += 1;
            observe(name, before, entry.0);
        }
    }
    Ok(table)
}

/// Rating table sorted by conservative score, best first.
pub fn rating_table(table: &BTreeMap<String, (Rating, u32)>) -> Vec<RatingRow> {
    let mut rows: Vec<RatingRow> = table
        .iter()
        .map(|(name, (r, games))| RatingRow {
            participant: name.clone(),
            mu: r.mu,
            sigma: r.sigma,
            conservative: r.conservative(),
            games: *games,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.conservative
            .total_cmp(&a.conservative)
            .then_with(|| a.participant.cmp(&b.participant))
    });
    rows
}
