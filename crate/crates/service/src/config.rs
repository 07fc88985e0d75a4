use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use werewolf_core::agents::{AgentSpec, Stage};

/// Seconds allowed per stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Deadlines {
    pub night_action: f64,
    pub speech: f64,
    pub vote: f64,
    pub hunter_shot: f64,
    pub judgments: f64,
}

impl Default for Deadlines {
    fn default() -> Self {
        Deadlines {
            night_action: 60.0,
            speech: 180.0,
            vote: 45.0,
            hunter_shot: 45.0,
            judgments: 120.0,
        }
    }
}

impl Deadlines {
    pub fn validate(&self) -> Result<(), String> {
        for (name, secs) in [
            ("night_action", self.night_action),
            ("speech", self.speech),
            ("vote", self.vote),
            ("hunter_shot", self.hunter_shot),
            ("judgments", self.judgments),
        ] {
            if !(secs.is_finite() && secs > 0.0) {
                return Err(format!("deadline `{name}` must be a positive number of seconds"));
            }
        }
        Ok(())
    }

    pub fn for_stage(&self, stage: Stage) -> Duration {
        let secs = match stage {
            Stage::NightAction => self.night_action,
            Stage::Speech => self.speech,
            Stage::Vote => self.vote,
            Stage::HunterShot => self.hunter_shot,
            Stage::RolePrediction => self.vote,
        };
        Duration::from_secs_f64(secs)
    }

    pub fn judgment_window(&self) -> Duration {
        Duration::from_secs_f64(self.judgments)
    }
}

/// The agent pool lobbies draw from and the default pacing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub deadlines: Deadlines,
    #[serde(default)]
    pub participants: Vec<AgentSpec>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<ServiceConfig, String> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ServiceConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ServiceConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.deadlines.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.participants {
            spec.validate()?;
            if !seen.insert(spec.name.as_str()) {
                return Err(format!("participant `{}` listed twice", spec.name));
            }
        }
        Ok(())
    }

    pub fn participant(&self, name: &str) -> Option<&AgentSpec> {
        self.participants.iter().find(|p| p.name == name)
    }
}
