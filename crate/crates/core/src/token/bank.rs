use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bb84::{Label, PulseDescription};
use crate::bits::BitString;
use crate::coordination::{self, CoordinationParams, InstanceId, IssuerRecord, UnveilVerdict};
use crate::spacetime::{causal_precedes, NetworkLayout};

use super::auth::{self, Authenticator, HmacKey};
use super::{
    AcquireMessage, DecisionMessage, PointId, PresentMessage, PresentationRejection, PresentationSet,
    PresentationVerdict, SegmentRef, TokenError, TokenId, TransferMessage, UserId,
};

#[derive(Debug, Clone)]
struct BankInstance {
    record: IssuerRecord,
    owner: UserId,
    setup_point: PointId,
    allocated: BTreeSet<usize>,
}

#[derive(Debug, Clone)]
struct BankToken {
    presentation_set: PresentationSet,
}

/// A message one bank agent rebroadcasts to the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub token: TokenId,
    pub sent_at: PointId,
    pub kind: NoticeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "notice", rename_all = "snake_case")]
pub enum NoticeKind {
    Issued {
        owner: UserId,
        presentation_set: PresentationSet,
        segment: SegmentRef,
        memo: Option<String>,
    },
    Transferred {
        from: UserId,
        to: UserId,
        segment: SegmentRef,
        transfer_digest: String,
        memo: Option<String>,
    },
    Mask {
        from: UserId,
        masks: Vec<(usize, bool)>,
    },
    Spent {
        presenter: UserId,
    },
}

/// What the bank agent at one point knows about one token.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentView {
    pub known: bool,
    pub owner: Option<UserId>,
    pub segment: Option<SegmentRef>,
    pub masks: BTreeMap<usize, bool>,
    pub conflicting: BTreeSet<usize>,
    pub spent: bool,
}

/// Everything the issuer holds about a token before presentation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssuerKnowledge<'a> {
    pub records: Vec<&'a IssuerRecord>,
    pub notices: Vec<&'a Notice>,
}

/// The issuer: a network of mutually trusting agents sharing a layout.
#[derive(Debug, Clone)]
pub struct Bank {
    layout: NetworkLayout,
    keys: BTreeMap<UserId, HmacKey>,
    instances: BTreeMap<InstanceId, BankInstance>,
    tokens: BTreeMap<TokenId, BankToken>,
    notices: Vec<Notice>,
    next_instance: u64,
    next_token: u64,
}

fn require_precedes(layout: &NetworkLayout, from: &PointId, to: &PointId) -> Result<(), TokenError> {
    if layout.precedes(from.as_str(), to.as_str())? {
        Ok(())
    } else {
        Err(TokenError::Causal {
            from: from.clone(),
            to: to.clone(),
        })
    }
}

pub(crate) fn require_before_all<'a>(
    layout: &NetworkLayout,
    from: &PointId,
    targets: impl IntoIterator<Item = &'a PointId>,
) -> Result<(), TokenError> {
    targets.into_iter().try_for_each(|q| require_precedes(layout, from, q))
}

impl Bank {
    pub fn new(layout: NetworkLayout) -> Self {
        Bank {
            layout,
            keys: BTreeMap::new(),
            instances: BTreeMap::new(),
            tokens: BTreeMap::new(),
            notices: Vec::new(),
            next_instance: 1,
            next_token: 1,
        }
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub(crate) fn precedes(&self, from: &PointId, to: &PointId) -> Result<(), TokenError> {
        require_precedes(&self.layout, from, to)
    }

    pub fn register_user(&mut self, id: UserId, key: HmacKey) {
        self.keys.insert(id, key);
    }

    pub fn is_registered(&self, id: &UserId) -> bool {
        self.keys.contains_key(id)
    }

    /// Starts a coordination instance for `owner` at `at`; returns the pulses to send.
    pub fn issue_instance<R: Rng + ?Sized>(
        &mut self,
        owner: &UserId,
        params: CoordinationParams,
        at: &PointId,
        rng: &mut R,
    ) -> Result<(InstanceId, Vec<PulseDescription>), TokenError> {
        if !self.is_registered(owner) {
            return Err(TokenError::UnknownUser(owner.clone()));
        }
        self.layout.event(at.as_str())?;
        let id = InstanceId(self.next_instance);
        self.next_instance += 1;
        let (record, pulses) = coordination::issuer_init(id, params, rng);
        self.instances.insert(
            id,
            BankInstance {
                record,
                owner: owner.clone(),
                setup_point: at.clone(),
                allocated: BTreeSet::new(),
            },
        );
        Ok((id, pulses))
    }

    pub fn register_receipt(&mut self, instance: InstanceId, labels: BTreeSet<Label>) -> Result<(), TokenError> {
        let entry = self
            .instances
            .get_mut(&instance)
            .ok_or(TokenError::UnknownInstance(instance))?;
        entry.record.register_receipt(labels)?;
        Ok(())
    }

    pub fn issuer_record(&self, instance: InstanceId) -> Option<&IssuerRecord> {
        self.instances.get(&instance).map(|i| &i.record)
    }

    pub fn presentation_set(&self, token: TokenId) -> Option<&PresentationSet> {
        self.tokens.get(&token).map(|t| &t.presentation_set)
    }

    pub fn notices(&self) -> &[Notice] {
        &self.notices
    }

    /// Whether `notice` reaches the agent at `point`.
    pub fn delivered(&self, notice: &Notice, point: &PointId) -> Result<bool, TokenError> {
        Ok(self.layout.precedes(notice.sent_at.as_str(), point.as_str())?)
    }

    fn check_segment(&self, user: &UserId, segment: &SegmentRef, m: usize, at: &PointId) -> Result<(), TokenError> {
        let inst = self
            .instances
            .get(&segment.instance)
            .ok_or(TokenError::UnknownInstance(segment.instance))?;
        if &inst.owner != user {
            return Err(TokenError::MessageMismatch(format!(
                "instance {} belongs to {}, not {user}",
                segment.instance, inst.owner
            )));
        }
        if inst.record.received_labels().is_none() {
            return Err(TokenError::UnknownInstance(segment.instance));
        }
        self.precedes(&inst.setup_point, at)?;
        let distinct: BTreeSet<usize> = segment.positions.iter().copied().collect();
        let in_range = segment.positions.iter().all(|&p| p >= 1 && p <= inst.record.params.m());
        if segment.positions.len() != m || distinct.len() != m || !in_range {
            return Err(TokenError::MessageMismatch(format!(
                "segment {:?} is not {m} distinct positions of instance {}",
                segment.positions, segment.instance
            )));
        }
        let reused: Vec<usize> = distinct.intersection(&inst.allocated).copied().collect();
        if !reused.is_empty() {
            return Err(TokenError::SegmentReused {
                instance: segment.instance,
                positions: reused,
            });
        }
        Ok(())
    }

    fn allocate(&mut self, segment: &SegmentRef) {
        if let Some(inst) = self.instances.get_mut(&segment.instance) {
            inst.allocated.extend(segment.positions.iter().copied());
        }
    }

    /// Agent at `at` registers a new token backed by `segment` of `user`'s pool.
    pub fn register_acquisition(
        &mut self,
        user: &UserId,
        presentation_set: PresentationSet,
        segment: SegmentRef,
        at: &PointId,
        memo: Option<String>,
    ) -> Result<AcquireMessage, TokenError> {
        if !self.is_registered(user) {
            return Err(TokenError::UnknownUser(user.clone()));
        }
        presentation_set.check_layout(&self.layout)?;
        require_before_all(&self.layout, at, presentation_set.points())?;
        self.check_segment(user, &segment, presentation_set.m(), at)?;

        let id = TokenId(self.next_token);
        self.next_token += 1;
        self.allocate(&segment);
        self.tokens.insert(
            id,
            BankToken {
                presentation_set: presentation_set.clone(),
            },
        );
        self.notices.push(Notice {
            token: id,
            sent_at: at.clone(),
            kind: NoticeKind::Issued {
                owner: user.clone(),
                presentation_set: presentation_set.clone(),
                segment: segment.clone(),
                memo: memo.clone(),
            },
        });
        Ok(AcquireMessage {
            token: id,
            user: user.clone(),
            point: at.clone(),
            presentation_set,
            segment,
            memo,
        })
    }

    pub fn receive_decision(&mut self, msg: &DecisionMessage) -> Result<(), TokenError> {
        let m = self
            .presentation_set(msg.token)
            .ok_or(TokenError::UnknownToken(msg.token))?
            .m();
        let view = self.view_at(msg.token, &msg.point)?;
        self.check_custody(msg.token, &view, &msg.from, &msg.point)?;
        if msg.masks.is_empty() {
            return Err(TokenError::EmptyDecision);
        }
        let mut seen = BTreeSet::new();
        for &(j, _) in &msg.masks {
            if j >= m {
                return Err(TokenError::LabelLength {
                    expected: m,
                    got: j + 1,
                });
            }
            if view.masks.contains_key(&j) || !seen.insert(j) {
                return Err(TokenError::AlreadyDecided {
                    token: msg.token,
                    bit: j,
                });
            }
        }
        self.notices.push(Notice {
            token: msg.token,
            sent_at: msg.point.clone(),
            kind: NoticeKind::Mask {
                from: msg.from.clone(),
                masks: msg.masks.clone(),
            },
        });
        Ok(())
    }

    fn check_custody(&self, token: TokenId, view: &AgentView, user: &UserId, at: &PointId) -> Result<(), TokenError> {
        if !view.known {
            let first = self
                .notices
                .iter()
                .find(|n| n.token == token)
                .map(|n| n.sent_at.clone())
                .unwrap_or_else(|| at.clone());
            return Err(TokenError::Causal {
                from: first,
                to: at.clone(),
            });
        }
        match &view.owner {
            Some(owner) if owner == user => Ok(()),
            owner => Err(TokenError::NotOwner {
                token,
                user: user.clone(),
                owner: owner.clone().unwrap_or_else(|| UserId::from("?")),
            }),
        }
    }

    /// Registers a signed transfer and re-points the token at `segment` of the recipient's pool.
    pub fn register_transfer(&mut self, msg: &TransferMessage, segment: SegmentRef) -> Result<(), TokenError> {
        let p = &msg.payload;
        let key = self
            .keys
            .get(&p.from)
            .ok_or_else(|| TokenError::UnknownUser(p.from.clone()))?;
        if !key.verify(&msg.signing_bytes(), &msg.signature) {
            return Err(TokenError::Authentication);
        }
        if !self.is_registered(&p.to) {
            return Err(TokenError::UnknownUser(p.to.clone()));
        }
        let set = self
            .presentation_set(p.token)
            .ok_or(TokenError::UnknownToken(p.token))?
            .clone();
        let view = self.view_at(p.token, &p.point)?;
        self.check_custody(p.token, &view, &p.from, &p.point)?;
        if !view.masks.is_empty() {
            return Err(TokenError::TransferAfterDecision { token: p.token });
        }
        if view.spent {
            return Err(TokenError::Spent(p.token));
        }
        require_before_all(&self.layout, &p.point, set.points())?;
        self.check_segment(&p.to, &segment, set.m(), &p.point)?;

        self.allocate(&segment);
        self.notices.push(Notice {
            token: p.token,
            sent_at: p.point.clone(),
            kind: NoticeKind::Transferred {
                from: p.from.clone(),
                to: p.to.clone(),
                segment,
                transfer_digest: auth::digest(msg),
                memo: p.memo.clone(),
            },
        });
        Ok(())
    }

    /// Folds every notice about `token` that reaches `at`, in issue order.
    pub fn view_at(&self, token: TokenId, at: &PointId) -> Result<AgentView, TokenError> {
        let here = self.layout.event(at.as_str())?;
        let mut view = AgentView::default();
        for notice in self.notices.iter().filter(|n| n.token == token) {
            let sent = self.layout.event(notice.sent_at.as_str())?;
            if !causal_precedes(sent, here)? {
                continue;
            }
            match &notice.kind {
                NoticeKind::Issued { owner, segment, .. } => {
                    view.known = true;
                    view.owner = Some(owner.clone());
                    view.segment = Some(segment.clone());
                }
                NoticeKind::Transferred { to, segment, .. } => {
                    view.owner = Some(to.clone());
                    view.segment = Some(segment.clone());
                }
                NoticeKind::Mask { masks, .. } => {
                    for &(j, bit) in masks {
                        if let Some(&prev) = view.masks.get(&j) {
                            if prev != bit {
                                view.conflicting.insert(j);
                            }
                        } else {
                            view.masks.insert(j, bit);
                        }
                    }
                }
                NoticeKind::Spent { .. } => view.spent = true,
            }
        }
        Ok(view)
    }

    /// Validation by the agent at `at`. Accepting broadcasts a spent notice from `at`.
    pub fn validate_presentation(
        &mut self,
        token: TokenId,
        at: &PointId,
        msg: &PresentMessage,
    ) -> Result<PresentationVerdict, TokenError> {
        use PresentationRejection as R;
        let reject = |r: PresentationRejection| Ok(PresentationVerdict::Reject(r));

        let set = self
            .presentation_set(token)
            .ok_or(TokenError::UnknownToken(token))?
            .clone();
        if msg.token != token || &msg.point != at {
            return Err(TokenError::MessageMismatch(format!(
                "presentation of {} at {} handed to agent for {token} at {at}",
                msg.token, msg.point
            )));
        }
        let Some(here_label) = set.label_of(at).cloned() else {
            return reject(R::NotPresentationPoint);
        };
        let view = self.view_at(token, at)?;
        if !view.known {
            return reject(R::InsufficientData);
        }
        let owner = view.owner.clone().expect("known token has an owner");
        if owner != msg.presenter {
            return reject(R::NotOwner { owner });
        }
        if let Some(&bit) = view.conflicting.iter().next() {
            return reject(R::ConflictingMask { bit });
        }
        let missing: Vec<usize> = (0..set.m()).filter(|j| !view.masks.contains_key(j)).collect();
        if !missing.is_empty() {
            return reject(R::Undecided { missing });
        }
        if view.spent {
            return reject(R::AlreadySpent);
        }
        let segment = view.segment.clone().expect("known token has a segment");
        if msg.unveil.instance != segment.instance || msg.unveil.positions != segment.positions {
            return reject(R::SegmentMismatch);
        }
        let record = self
            .issuer_record(segment.instance)
            .ok_or(TokenError::UnknownInstance(segment.instance))?;
        if let UnveilVerdict::Reject(rejection) = coordination::validate_unveil(record, &msg.unveil)? {
            return reject(R::Unveil { rejection });
        }
        let mask: BitString = view.masks.values().copied().collect();
        let label = mask.xor(&msg.unveil.claimed_x)?;
        if label != here_label {
            return reject(R::MaskMismatch { label });
        }

        self.notices.push(Notice {
            token,
            sent_at: at.clone(),
            kind: NoticeKind::Spent {
                presenter: msg.presenter.clone(),
            },
        });
        Ok(PresentationVerdict::Accept)
    }

    /// Issuer-visible data tied to `token`: the coordination records behind
    /// every segment it has used and all notices about it.
    pub fn knowledge(&self, token: TokenId) -> IssuerKnowledge<'_> {
        let notices: Vec<&Notice> = self.notices.iter().filter(|n| n.token == token).collect();
        let instances: BTreeSet<InstanceId> = notices
            .iter()
            .filter_map(|n| match &n.kind {
                NoticeKind::Issued { segment, .. } | NoticeKind::Transferred { segment, .. } => Some(segment.instance),
                _ => None,
            })
            .collect();
        IssuerKnowledge {
            records: instances.iter().filter_map(|i| self.issuer_record(*i)).collect(),
            notices,
        }
    }
}
