//! Flexible S-money tokens.
//!
//! A user first runs a long coordination instance with the bank, committing
//! to a private random string (their pool). Acquiring a token only needs
//! classical messages: the parties agree a presentation set and an unused
//! `M`-bit segment `x` of the pool. The owner later fixes the presentation
//! label `b` by sending the mask `m = x ⊕ b`, either all at once or in
//! stages, and presents at `Q_b` by unveiling `x`. Undecided tokens can be
//! handed to another user with a signed transfer message, after which the
//! recipient's own segment takes the place of `x`.
//!
//! The bank is a set of agents at network points. Everything the bank learns
//! at a point is rebroadcast, and an agent at `Q` only sees notices sent from
//! points in its causal past.

pub mod auth;
mod bank;
mod flow;
mod user;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitPattern, BitString, BitsError};
use crate::coordination::{CoordinationError, InstanceId, UnveilMessage, UnveilRejection};
use crate::spacetime::{NetworkLayout, SpacetimeError};

pub use auth::{Authenticator, HmacKey, Tag};
pub use bank::{AgentView, Bank, IssuerKnowledge, Notice, NoticeKind};
pub use flow::{
    acquire_token, decide, decide_partial, present, setup_user, setup_user_with, transfer, validate_presentation,
};
pub use user::{PoolEntry, User};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(UserId);
string_id!(PointId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u64);

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TokenError {
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error(transparent)]
    Coordination(#[from] CoordinationError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("causal precondition violated: {from} does not precede {to}")]
    Causal { from: PointId, to: PointId },
    #[error("user {user} has {available} free pool bits usable here, {needed} needed")]
    PoolExhausted {
        user: UserId,
        needed: usize,
        available: usize,
    },
    #[error("pool bits {positions:?} of instance {instance} are already allocated")]
    SegmentReused {
        instance: InstanceId,
        positions: Vec<usize>,
    },
    #[error("bit {bit} of token {token} is already decided")]
    AlreadyDecided { token: TokenId, bit: usize },
    #[error("token {token} is not fully decided")]
    Undecided { token: TokenId },
    #[error("token {token} has decided bits and can no longer be transferred")]
    TransferAfterDecision { token: TokenId },
    #[error("token {0} is spent")]
    Spent(TokenId),
    #[error("{user} is not the owner of token {token} (owner: {owner})")]
    NotOwner {
        token: TokenId,
        user: UserId,
        owner: UserId,
    },
    #[error("label {0} is not in the presentation set")]
    LabelNotInSet(String),
    #[error("decision must fix at least one bit")]
    EmptyDecision,
    #[error("expected a {expected}-bit label, got {got} bits")]
    LabelLength { expected: usize, got: usize },
    #[error("transfer signature does not verify")]
    Authentication,
    #[error("message does not match token or parties: {0}")]
    MessageMismatch(String),
    #[error("invalid presentation set: {0}")]
    BadPresentationSet(String),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
}

impl TokenError {
    /// Short stable code used in transcripts.
    pub fn code(&self) -> &'static str {
        match self {
            TokenError::Spacetime(_) => "spacetime",
            TokenError::Coordination(_) => "coordination",
            TokenError::Bits(_) => "bits",
            TokenError::Causal { .. } => "causal",
            TokenError::PoolExhausted { .. } => "pool_exhausted",
            TokenError::SegmentReused { .. } => "segment_reused",
            TokenError::AlreadyDecided { .. } => "already_decided",
            TokenError::Undecided { .. } => "undecided",
            TokenError::TransferAfterDecision { .. } => "transfer_after_decision",
            TokenError::Spent(_) => "spent",
            TokenError::NotOwner { .. } => "not_owner",
            TokenError::LabelNotInSet(_) => "label_not_in_set",
            TokenError::EmptyDecision => "empty_decision",
            TokenError::LabelLength { .. } => "label_length",
            TokenError::Authentication => "authentication",
            TokenError::MessageMismatch(_) => "message_mismatch",
            TokenError::BadPresentationSet(_) => "bad_presentation_set",
            TokenError::UnknownUser(_) => "unknown_user",
            TokenError::UnknownToken(_) => "unknown_token",
            TokenError::UnknownInstance(_) => "unknown_instance",
        }
    }
}

/// Presentation points labelled by `M`-bit strings, `2^(M−1) < |S| ≤ 2^M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<BitString, PointId>", into = "BTreeMap<BitString, PointId>")]
pub struct PresentationSet {
    m: usize,
    labeling: BTreeMap<BitString, PointId>,
}

impl TryFrom<BTreeMap<BitString, PointId>> for PresentationSet {
    type Error = TokenError;

    fn try_from(labeling: BTreeMap<BitString, PointId>) -> Result<Self, Self::Error> {
        PresentationSet::new(labeling)
    }
}

impl From<PresentationSet> for BTreeMap<BitString, PointId> {
    fn from(set: PresentationSet) -> Self {
        set.labeling
    }
}

impl PresentationSet {
    pub fn new(labeling: BTreeMap<BitString, PointId>) -> Result<Self, TokenError> {
        let bad = |s: String| Err(TokenError::BadPresentationSet(s));
        let Some(m) = labeling.keys().next().map(BitString::len) else {
            return bad("empty labeling".into());
        };
        if m == 0 || m >= 32 {
            return bad(format!("label length {m} out of range"));
        }
        if let Some(l) = labeling.keys().find(|l| l.len() != m) {
            return bad(format!("label {l} has length {}, expected {m}", l.len()));
        }
        let size = labeling.len();
        if !(size > 1 << (m - 1) && size <= 1 << m) {
            return bad(format!("|S| = {size} violates 2^(M-1) < |S| <= 2^M for M = {m}"));
        }
        let mut points: Vec<&PointId> = labeling.values().collect();
        points.sort();
        points.dedup();
        if points.len() != size {
            return bad("two labels share a presentation point".into());
        }
        Ok(PresentationSet { m, labeling })
    }

    /// The full set `{0,1}^M` mapped to points named `<prefix><label>`.
    pub fn full(m: usize, prefix: &str) -> Result<Self, TokenError> {
        PresentationSet::new(
            BitString::enumerate(m)
                .map(|b| {
                    let name = format!("{prefix}{b}");
                    (b, PointId(name))
                })
                .collect(),
        )
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.labeling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeling.is_empty()
    }

    pub fn point(&self, label: &BitString) -> Option<&PointId> {
        self.labeling.get(label)
    }

    pub fn label_of(&self, point: &PointId) -> Option<&BitString> {
        self.labeling.iter().find(|(_, p)| *p == point).map(|(l, _)| l)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitString, &PointId)> {
        self.labeling.iter()
    }

    pub fn points(&self) -> impl Iterator<Item = &PointId> {
        self.labeling.values()
    }

    /// Labels agreeing with every `(index, bit)` in `fixed`.
    pub fn consistent<'a>(
        &'a self,
        fixed: &'a BTreeMap<usize, bool>,
    ) -> impl Iterator<Item = (&'a BitString, &'a PointId)> + 'a {
        self.labeling
            .iter()
            .filter(move |(label, _)| fixed.iter().all(|(&j, &b)| label.get(j) == Some(b)))
    }

    pub fn check_layout(&self, layout: &NetworkLayout) -> Result<(), TokenError> {
        for p in self.points() {
            layout.event(p.as_str())?;
        }
        Ok(())
    }
}

/// Pool bits backing a token: 1-based positions of one coordination instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRef {
    pub instance: InstanceId,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ownership {
    pub user: UserId,
    pub point: PointId,
    /// Digest of the signed transfer message; `None` for the acquirer.
    pub transfer_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub bit: bool,
    /// Where the mask bit was sent.
    pub point: PointId,
}

/// The owner's handle on a token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: TokenId,
    pub owners: Vec<Ownership>,
    pub presentation_set: PresentationSet,
    pub segment: SegmentRef,
    /// Keyed by 0-based token bit index.
    pub masks: BTreeMap<usize, MaskEntry>,
    /// Decision points in the order they were used.
    pub decision_points: Vec<PointId>,
    pub spent: bool,
    pub acquired_at: PointId,
}

impl Token {
    pub fn m(&self) -> usize {
        self.presentation_set.m()
    }

    pub fn owner(&self) -> &UserId {
        &self.owners.last().expect("token always has an owner").user
    }

    /// Point of the latest acquisition or transfer.
    pub fn custody_point(&self) -> &PointId {
        &self.owners.last().expect("token always has an owner").point
    }

    pub fn last_decision_point(&self) -> Option<&PointId> {
        self.decision_points.last()
    }

    pub fn is_undecided(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn is_fully_decided(&self) -> bool {
        self.masks.len() == self.m()
    }

    /// The full mask `m`, once every bit is decided.
    pub fn mask(&self) -> Option<BitString> {
        self.is_fully_decided()
            .then(|| self.masks.values().map(|e| e.bit).collect())
    }

    /// Decided label bits `b_j = m_j ⊕ x_j`, given the owner's segment `x`.
    pub fn decided_bits(&self, x: &BitString) -> BTreeMap<usize, bool> {
        self.masks
            .iter()
            .map(|(&j, e)| (j, e.bit ^ x.get(j).unwrap_or(false)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquireMessage {
    pub token: TokenId,
    pub user: UserId,
    pub point: PointId,
    pub presentation_set: PresentationSet,
    pub segment: SegmentRef,
    pub memo: Option<String>,
}

/// Mask bits `m_j = x_j ⊕ b_j` for the fixed positions of one decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionMessage {
    pub token: TokenId,
    pub from: UserId,
    pub point: PointId,
    pub masks: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPayload {
    pub token: TokenId,
    pub from: UserId,
    pub to: UserId,
    pub point: PointId,
    pub memo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferMessage {
    #[serde(flatten)]
    pub payload: TransferPayload,
    pub signature: Tag,
}

impl TransferMessage {
    pub fn signing_bytes(&self) -> Vec<u8> {
        auth::canonical_bytes(&self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentMessage {
    pub token: TokenId,
    pub presenter: UserId,
    pub point: PointId,
    pub unveil: UnveilMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum PresentationRejection {
    /// This agent has not (yet) heard of the token.
    InsufficientData,
    NotPresentationPoint,
    NotOwner {
        owner: UserId,
    },
    Undecided {
        missing: Vec<usize>,
    },
    ConflictingMask {
        bit: usize,
    },
    AlreadySpent,
    SegmentMismatch,
    Unveil {
        rejection: UnveilRejection,
    },
    MaskMismatch {
        label: BitString,
    },
}

impl PresentationRejection {
    pub fn code(&self) -> &'static str {
        match self {
            PresentationRejection::InsufficientData => "insufficient_data",
            PresentationRejection::NotPresentationPoint => "not_presentation_point",
            PresentationRejection::NotOwner { .. } => "not_owner",
            PresentationRejection::Undecided { .. } => "undecided",
            PresentationRejection::ConflictingMask { .. } => "conflicting_mask",
            PresentationRejection::AlreadySpent => "already_spent",
            PresentationRejection::SegmentMismatch => "segment_mismatch",
            PresentationRejection::Unveil { .. } => "unveil",
            PresentationRejection::MaskMismatch { .. } => "mask_mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PresentationVerdict {
    Accept,
    Reject(PresentationRejection),
}

impl PresentationVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, PresentationVerdict::Accept)
    }

    pub fn code(&self) -> String {
        match self {
            PresentationVerdict::Accept => "accept".into(),
            PresentationVerdict::Reject(r) => format!("reject:{}", r.code()),
        }
    }
}

pub(crate) fn check_label_len(expected: usize, got: usize) -> Result<(), TokenError> {
    if expected != got {
        return Err(TokenError::LabelLength { expected, got });
    }
    Ok(())
}

pub(crate) fn pattern_fixed(pattern: &BitPattern) -> BTreeMap<usize, bool> {
    pattern.fixed().collect()
}
