use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bb84::ChannelModel;
use crate::bits::{BitPattern, BitString};
use crate::coordination::{CoordinationParams, DEFAULT_MIN_RECEIVED_FRACTION};
use crate::spacetime::NetworkLayout;
use crate::token::{HmacKey, PresentationSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub n: usize,
    pub gamma: f64,
    #[serde(default = "default_min_received")]
    pub min_received_fraction: f64,
}

fn default_min_received() -> f64 {
    DEFAULT_MIN_RECEIVED_FRACTION
}

impl ScenarioParams {
    /// Coordination parameters for a one-bit instance; setup widens `m` to
    /// the pool size.
    pub fn coordination(&self) -> Result<CoordinationParams, ScenarioError> {
        CoordinationParams::new(self.n, 1, self.gamma)
            .and_then(|p| p.with_min_received_fraction(self.min_received_fraction))
            .map_err(|e| ScenarioError::invalid("params", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: String,
    /// Hex HMAC key; derived from the seed and id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

/// Expected outcome of a step: `accept`, `reject` or `reject:<code>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Expect {
    Accept,
    Reject(Option<String>),
}

impl TryFrom<String> for Expect {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.as_str() {
            "accept" => Ok(Expect::Accept),
            "reject" => Ok(Expect::Reject(None)),
            _ => match s.strip_prefix("reject:") {
                Some(code) if !code.is_empty() => Ok(Expect::Reject(Some(code.to_string()))),
                _ => Err(format!("expect must be accept, reject or reject:<code>, got {s:?}")),
            },
        }
    }
}

impl From<Expect> for String {
    fn from(e: Expect) -> String {
        match e {
            Expect::Accept => "accept".into(),
            Expect::Reject(None) => "reject".into(),
            Expect::Reject(Some(code)) => format!("reject:{code}"),
        }
    }
}

impl Expect {
    /// Whether a transcript verdict (`ok`, `accept` or `reject:<code>`) meets this expectation.
    pub fn matches(&self, verdict: &str) -> bool {
        match self {
            Expect::Accept => verdict == "ok" || verdict == "accept",
            Expect::Reject(None) => verdict.starts_with("reject:"),
            Expect::Reject(Some(code)) => verdict.strip_prefix("reject:") == Some(code.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// Precommit `pool_bits` bits, uniformly random unless `x` is given.
    Setup {
        user: String,
        pool_bits: usize,
        at: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<BitString>,
    },
    Acquire {
        user: String,
        token: String,
        set: String,
        at: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        memo: Option<String>,
    },
    Decide {
        user: String,
        token: String,
        b: BitString,
        at: String,
    },
    DecidePartial {
        user: String,
        token: String,
        bits: BitPattern,
        at: String,
    },
    Transfer {
        token: String,
        from: String,
        to: String,
        at: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        memo: Option<String>,
        /// Flip one bit of the signature before sending.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        tamper: bool,
    },
    Present {
        user: String,
        token: String,
        at: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Setup { .. } => "setup",
            Action::Acquire { .. } => "acquire",
            Action::Decide { .. } => "decide",
            Action::DecidePartial { .. } => "decide_partial",
            Action::Transfer { .. } => "transfer",
            Action::Present { .. } => "present",
        }
    }

    pub fn at(&self) -> &str {
        match self {
            Action::Setup { at, .. }
            | Action::Acquire { at, .. }
            | Action::Decide { at, .. }
            | Action::DecidePartial { at, .. }
            | Action::Transfer { at, .. }
            | Action::Present { at, .. } => at,
        }
    }

    /// The user performing the action.
    pub fn actor(&self) -> &str {
        match self {
            Action::Setup { user, .. }
            | Action::Acquire { user, .. }
            | Action::Decide { user, .. }
            | Action::DecidePartial { user, .. }
            | Action::Present { user, .. } => user,
            Action::Transfer { from, .. } => from,
        }
    }

    pub fn token(&self) -> Option<&str> {
        match self {
            Action::Setup { .. } => None,
            Action::Acquire { token, .. }
            | Action::Decide { token, .. }
            | Action::DecidePartial { token, .. }
            | Action::Transfer { token, .. }
            | Action::Present { token, .. } => Some(token),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub layout: NetworkLayout,
    pub params: ScenarioParams,
    #[serde(default)]
    pub channel: ChannelModel,
    pub users: Vec<UserSpec>,
    pub presentation_sets: BTreeMap<String, PresentationSet>,
    pub script: Vec<Step>,
}

impl Scenario {
    /// Parses and validates a scenario file.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks that the script only refers to declared users, points, sets
    /// and previously acquired tokens.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params.coordination()?;
        let mut users = BTreeSet::new();
        for (i, u) in self.users.iter().enumerate() {
            if u.id.is_empty() {
                return Err(ScenarioError::invalid(format!("users[{i}].id"), "empty user id"));
            }
            if !users.insert(u.id.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("users[{i}].id"),
                    format!("duplicate user {:?}", u.id),
                ));
            }
            if let Some(k) = &u.key {
                HmacKey::from_hex(k).map_err(|e| ScenarioError::invalid(format!("users[{i}].key"), e))?;
            }
        }
        for (name, set) in &self.presentation_sets {
            set.check_layout(&self.layout)
                .map_err(|e| ScenarioError::invalid(format!("presentation_sets.{name}"), e.to_string()))?;
        }

        let mut tokens: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, step) in self.script.iter().enumerate() {
            let field = |f: &str| format!("script[{i}].{f}");
            let user = |f: &str, id: &str| {
                if users.contains(id) {
                    Ok(())
                } else {
                    Err(ScenarioError::invalid(field(f), format!("unknown user {id:?}")))
                }
            };
            if !self.layout.contains(step.action.at()) {
                return Err(ScenarioError::invalid(
                    field("at"),
                    format!("unknown point {:?}", step.action.at()),
                ));
            }
            let known_token = |name: &str| {
                tokens.get(name).copied().ok_or_else(|| {
                    ScenarioError::invalid(field("token"), format!("token {name:?} is not acquired earlier"))
                })
            };
            match &step.action {
                Action::Setup {
                    user: u, pool_bits, x, ..
                } => {
                    user("user", u)?;
                    if *pool_bits == 0 {
                        return Err(ScenarioError::invalid(
                            field("pool_bits"),
                            "pool must hold at least one bit",
                        ));
                    }
                    if let Some(x) = x {
                        if x.len() != *pool_bits {
                            return Err(ScenarioError::invalid(
                                field("x"),
                                format!("{} bits given for a {pool_bits}-bit pool", x.len()),
                            ));
                        }
                    }
                }
                Action::Acquire {
                    user: u, token, set, ..
                } => {
                    user("user", u)?;
                    let set = self.presentation_sets.get(set).ok_or_else(|| {
                        ScenarioError::invalid(field("set"), format!("unknown presentation set {set:?}"))
                    })?;
                    if tokens.insert(token, set.m()).is_some() {
                        return Err(ScenarioError::invalid(
                            field("token"),
                            format!("token {token:?} acquired twice"),
                        ));
                    }
                }
                Action::Decide { user: u, token, b, .. } => {
                    user("user", u)?;
                    let m = known_token(token)?;
                    if b.len() != m {
                        return Err(ScenarioError::invalid(
                            field("b"),
                            format!("{} bits for an {m}-bit label", b.len()),
                        ));
                    }
                }
                Action::DecidePartial {
                    user: u, token, bits, ..
                } => {
                    user("user", u)?;
                    let m = known_token(token)?;
                    if bits.len() != m {
                        return Err(ScenarioError::invalid(
                            field("bits"),
                            format!("{} positions for an {m}-bit label", bits.len()),
                        ));
                    }
                }
                Action::Transfer { token, from, to, .. } => {
                    user("from", from)?;
                    user("to", to)?;
                    known_token(token)?;
                }
                Action::Present { user: u, token, .. } => {
                    user("user", u)?;
                    known_token(token)?;
                }
            }
        }
        Ok(())
    }
}
