//! Targeted concolic execution for SQL injection in event-driven mini-apps.
//!
//! The pipeline parses a mini-app ([`ir`]), synthesizes drivers and
//! vulnerable-path stacks ([`analysis`]), explores the app concolically
//! ([`engine`]) over a bounded solver ([`symbolic`]), flags source-to-sink-to-leak
//! chains ([`taint`]) and confirms them by replaying an attack ([`replay`]).

pub mod analysis;
pub mod error;
pub mod ir;
pub mod symbolic;
pub mod engine;
pub mod taint;
pub mod replay;
pub mod pipeline;
