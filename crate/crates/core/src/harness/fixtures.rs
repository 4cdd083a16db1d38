//! Scenario files shipped with the crate.

use super::scenario::{Scenario, ScenarioError};

pub const FIG1: &str = include_str!("../../scenarios/fig1.json");
pub const FIG2: &str = include_str!("../../scenarios/fig2.json");
pub const TRANSFER_CHAIN: &str = include_str!("../../scenarios/transfer_chain.json");

pub const ALL: [(&str, &str); 3] = [("fig1", FIG1), ("fig2", FIG2), ("transfer_chain", TRANSFER_CHAIN)];

pub fn fixture(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text))
}
