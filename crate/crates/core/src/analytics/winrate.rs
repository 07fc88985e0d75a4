use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Faction, GameLog, Winner};

/// Head-to-head win rates; `cells[i][j]` is row `i`'s rate against column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinMatrix {
    pub participants: Vec<String>,
    /// `None` where the pair never met. The diagonal is fixed at 0.5.
    pub cells: Vec<Vec<Option<f64>>>,
    pub games: Vec<Vec<u32>>,
    /// Mean over the played cells of each row, diagonal included.
    pub row_average: Vec<Option<f64>>,
    pub village_rate: Vec<Option<f64>>,
    pub wolf_rate: Vec<Option<f64>>,
}

/// Mean of a row of cells, skipping unplayed pairs.
pub fn row_average(cells: &[Option<f64>]) -> Option<f64> {
    let played: Vec<f64> = cells.iter().flatten().copied().collect();
    (!played.is_empty()).then(|| played.iter().sum::<f64>() / played.len() as f64)
}

/// The single participant on each side, if the log is a faction-vs-faction match.
pub fn faction_owners(log: &GameLog) -> Option<(String, String)> {
    let mut village = BTreeSet::new();
    let mut wolf = BTreeSet::new();
    for (seat, role) in &log.roles {
        let who = log.participants.get(seat)?;
        match role.faction() {
            Faction::Village => village.insert(who.clone()),
            Faction::Wolf => wolf.insert(who.clone()),
        };
    }
    if village.len() == 1 && wolf.len() == 1 && village != wolf {
        Some((village.pop_first()?, wolf.pop_first()?))
    } else {
        None
    }
}

/// Builds the matrix from head-to-head logs; mixed or untagged logs are skipped.
pub fn win_matrix(logs: &[GameLog]) -> WinMatrix {
    let mut names = BTreeSet::new();
    let mut wins: BTreeMap<(String, String), u32> = BTreeMap::new();
    let mut played: BTreeMap<(String, String), u32> = BTreeMap::new();
    let mut side: BTreeMap<(String, Faction), (u32, u32)> = BTreeMap::new();
    for log in logs {
        let (Some((village, wolf)), Some(winner)) = (faction_owners(log), log.winner) else {
            continue;
        };
        names.insert(village.clone());
        names.insert(wolf.clone());
        for (me, other, faction) in [
            (&village, &wolf, Faction::Village),
            (&wolf, &village, Faction::Wolf),
        ] {
            let won = winner != Winner::Draw && winner.faction() == Some(faction);
            *played.entry((me.clone(), other.clone())).or_default() += 1;
            *wins.entry((me.clone(), other.clone())).or_default() += u32::from(won);
            let s = side.entry((me.clone(), faction)).or_default();
            s.0 += u32::from(won);
            s.1 += 1;
        }
    }
    let participants: Vec<String> = names.into_iter().collect();
    let n = participants.len();
    let mut cells = vec![vec![None; n]; n];
    let mut games = vec![vec![0; n]; n];
    for (i, a) in participants.iter().enumerate() {
        for (j, b) in participants.iter().enumerate() {
            if i == j {
                cells[i][j] = Some(0.5);
                continue;
            }
            let key = (a.clone(), b.clone());
            let g = played.get(&key).copied().unwrap_or(0);
            games[i][j] = g;
            if g > 0 {
                cells[i][j] = Some(f64::from(wins.get(&key).copied().unwrap_or(0)) / f64::from(g));
            }
        }
    }
    let rate = |name: &String, f: Faction| {
        side.get(&(name.clone(), f))
            .filter(|(_, g)| *g > 0)
            .map(|(w, g)| f64::from(*w) / f64::from(*g))
    };
    WinMatrix {
        row_average: cells.iter().map(|r| row_average(r)).collect(),
        village_rate: participants.iter().map(|p| rate(p, Faction::Village)).collect(),
        wolf_rate: participants.iter().map(|p| rate(p, Faction::Wolf)).collect(),
        participants,
        cells,
        games,
    }
}

impl WinMatrix {
    /// Matrix for a single participant with no opponents.
    pub fn single(name: &str) -> WinMatrix {
        WinMatrix {
            participants: vec![name.to_string()],
            cells: vec![vec![Some(0.5)]],
            games: vec![vec![0]],
            row_average: vec![Some(0.5)],
            village_rate: vec![None],
            wolf_rate: vec![None],
        }
    }
}
