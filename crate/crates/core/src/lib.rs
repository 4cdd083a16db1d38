//! Flexible S-money: relativistic quantum tokens backed by precommitted
//! BB84 bit-string coordination.
//!
//! - [`spacetime`]: events, causal order and boosts.
//! - [`bb84`]: pulse preparation, loss, honest and adversarial measurement.
//! - [`coordination`]: commit-by-measurement and γ-threshold unveil checks.
//! - [`token`]: pools, acquisition, (staged) decisions, transfer, presentation.
//! - [`adversary`]: double-spend strategies and reference probabilities.
//! - [`harness`]: scenario files, deterministic execution and transcripts.

pub mod adversary;
pub mod bb84;
pub mod bits;
pub mod coordination;
pub mod harness;
pub mod spacetime;
pub mod token;

pub use bits::{BitPattern, BitString};
