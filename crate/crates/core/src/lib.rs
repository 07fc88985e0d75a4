//! Multi-agent Werewolf: rules engine, agent protocol, tournament arena,
//! preference-data selection, the KTO kernel and analytics.

pub mod agents;
pub mod engine;
pub mod ktomath;
pub mod arena;
pub mod exec;
pub mod selection;
pub mod analytics;
pub mod fixtures;
