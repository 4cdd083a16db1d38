//! Scenario files, deterministic execution and JSONL transcripts.
//!
//! A scenario names a spacetime layout, protocol parameters, users,
//! presentation sets and a script of actions, each bound to a point. The
//! engine runs the script against one bank with a single seeded generator,
//! so a scenario and seed always produce the same transcript bytes.

mod engine;
pub mod fixtures;
mod scenario;
mod transcript;

pub use engine::{
    effective_seed, run_scenario, scenario_digest, verify_transcript, ExpectationMismatch, Run, VerifyError,
};
pub use scenario::{Action, Expect, Scenario, ScenarioError, ScenarioParams, Step, UserSpec};
pub use transcript::{
    first_divergence, ActionRecord, BroadcastRecord, Divergence, Header, Record, TokenOutcome, Transcript,
    TRANSCRIPT_FORMAT,
};
