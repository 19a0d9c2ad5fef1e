//! Regression analysis over program versions: trace a base version under a
//! goal-driven monitor plan, mine likely properties, prune them by bounded
//! exhaustive verification, classify them against an upgrade and use the
//! survivors to explain failing tests and find unrevealed faults.

pub mod analysis;
pub mod cli;
pub mod lang;
pub mod miner;
pub mod property;
pub mod report;
pub mod scope;
pub mod trace;
pub mod verify;
