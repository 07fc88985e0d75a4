//! Rules engine: dealing, night resolution, speeches, ballots, the hunter
//! window and win detection, plus the replayable match log.

mod audit;
mod log;
mod state;
mod types;

pub use audit::audit;
pub use log::{
    read_dir, read_jsonl, replay, replay_with, write_jsonl, GameLog, LogError, LOG_SCHEMA_VERSION,
};
pub use state::{consensus_victim, GameState, NightOptions, ROUND_CAP};
pub use types::*;
