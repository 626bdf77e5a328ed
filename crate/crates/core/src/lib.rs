//! Hierarchical multi-agent desktop automation over a deterministic simulated
//! desktop.

pub mod action_space;
pub mod backends;
pub mod perception;
pub mod prompts;
pub mod sim;
pub mod agents;
pub mod orchestrator;
pub mod trace;
pub mod harness;
