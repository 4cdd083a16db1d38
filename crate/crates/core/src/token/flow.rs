//! Protocol steps, each checking the acting user's preconditions before the
//! bank agent at the same point checks its own.

use std::collections::BTreeMap;

use rand::Rng;

use crate::bb84::{self, ChannelModel};
use crate::bits::{BitPattern, BitString};
use crate::coordination::{self, CoordinationParams, InstanceId};

use super::bank::{require_before_all, Bank};
use super::{
    check_label_len, pattern_fixed, AcquireMessage, DecisionMessage, MaskEntry, Ownership, PointId, PresentMessage,
    PresentationSet, PresentationVerdict, Token, TokenError, TokenId, TransferMessage, User,
};

/// Precommits `user` to a fresh uniform string of `pool_bits` bits.
#[allow(clippy::too_many_arguments)]
pub fn setup_user<R: Rng + ?Sized>(
    bank: &mut Bank,
    user: &mut User,
    pool_bits: usize,
    params: CoordinationParams,
    channel: &ChannelModel,
    at: &PointId,
    rng: &mut R,
) -> Result<InstanceId, TokenError> {
    let x = BitString::random(pool_bits, rng);
    setup_user_with(bank, user, &x, params, channel, at, rng)
}

/// [`setup_user`] with a caller-chosen committed string.
pub fn setup_user_with<R: Rng + ?Sized>(
    bank: &mut Bank,
    user: &mut User,
    x: &BitString,
    params: CoordinationParams,
    channel: &ChannelModel,
    at: &PointId,
    rng: &mut R,
) -> Result<InstanceId, TokenError> {
    let params = params.with_m(x.len())?;
    let (instance, pulses) = bank.issue_instance(user.id(), params, at, rng)?;
    let received = bb84::transmit(&pulses, channel, rng);
    let commit = coordination::user_commit(
        instance,
        pulses.iter().filter(|p| received.contains(&p.label)),
        x,
        channel,
        rng,
    )?;
    bank.register_receipt(instance, commit.received_labels.clone())?;
    user.add_commitment(commit, at.clone());
    Ok(instance)
}

pub fn acquire_token(
    bank: &mut Bank,
    user: &mut User,
    presentation_set: PresentationSet,
    at: &PointId,
    memo: Option<String>,
) -> Result<(Token, AcquireMessage), TokenError> {
    presentation_set.check_layout(bank.layout())?;
    require_before_all(bank.layout(), at, presentation_set.points())?;
    let m = presentation_set.m();
    let layout = bank.layout();
    let segment = user
        .reserve(m, |setup| layout.precedes(setup.as_str(), at.as_str()).unwrap_or(false))
        .map_err(|available| TokenError::PoolExhausted {
            user: user.id().clone(),
            needed: m,
            available,
        })?;
    let msg = bank.register_acquisition(user.id(), presentation_set.clone(), segment.clone(), at, memo)?;
    user.mark_allocated(&segment);
    let token = Token {
        id: msg.token,
        owners: vec![Ownership {
            user: user.id().clone(),
            point: at.clone(),
            transfer_digest: None,
        }],
        presentation_set,
        segment,
        masks: BTreeMap::new(),
        decision_points: Vec::new(),
        spent: false,
        acquired_at: at.clone(),
    };
    Ok((token, msg))
}

fn require_owner(token: &Token, user: &User) -> Result<(), TokenError> {
    if token.owner() != user.id() {
        return Err(TokenError::NotOwner {
            token: token.id,
            user: user.id().clone(),
            owner: token.owner().clone(),
        });
    }
    Ok(())
}

fn owner_segment(token: &Token, user: &User) -> Result<BitString, TokenError> {
    user.segment_bits(&token.segment)
        .ok_or(TokenError::UnknownInstance(token.segment.instance))
}

/// Fixes the whole label `b` at once by sending `m = x ⊕ b`.
pub fn decide(
    bank: &mut Bank,
    user: &User,
    token: &mut Token,
    b: &BitString,
    at: &PointId,
) -> Result<DecisionMessage, TokenError> {
    check_label_len(token.m(), b.len())?;
    if token.presentation_set.point(b).is_none() {
        return Err(TokenError::LabelNotInSet(b.to_string()));
    }
    if let Some((&bit, _)) = token.masks.iter().next() {
        return Err(TokenError::AlreadyDecided { token: token.id, bit });
    }
    decide_partial(bank, user, token, &BitPattern::from(b), at)
}

/// Fixes the bits set in `pattern`. The decision point must lie in the
/// causal past of every presentation point still consistent with the bits
/// decided so far.
pub fn decide_partial(
    bank: &mut Bank,
    user: &User,
    token: &mut Token,
    pattern: &BitPattern,
    at: &PointId,
) -> Result<DecisionMessage, TokenError> {
    check_label_len(token.m(), pattern.len())?;
    require_owner(token, user)?;
    if token.spent {
        return Err(TokenError::Spent(token.id));
    }
    let fixed = pattern_fixed(pattern);
    if fixed.is_empty() {
        return Err(TokenError::EmptyDecision);
    }
    if let Some(&bit) = fixed.keys().find(|j| token.masks.contains_key(j)) {
        return Err(TokenError::AlreadyDecided { token: token.id, bit });
    }
    bank.precedes(token.custody_point(), at)?;
    if let Some(prev) = token.last_decision_point() {
        bank.precedes(prev, at)?;
    }

    let x = owner_segment(token, user)?;
    let mut decided = token.decided_bits(&x);
    require_before_all(
        bank.layout(),
        at,
        token.presentation_set.consistent(&decided).map(|(_, q)| q),
    )?;
    decided.extend(fixed.iter().map(|(&j, &b)| (j, b)));
    if token.presentation_set.consistent(&decided).next().is_none() {
        return Err(TokenError::LabelNotInSet(pattern.to_string()));
    }

    let masks: Vec<(usize, bool)> = fixed
        .iter()
        .map(|(&j, &b)| (j, b ^ x.get(j).expect("segment has M bits")))
        .collect();
    let msg = DecisionMessage {
        token: token.id,
        from: user.id().clone(),
        point: at.clone(),
        masks,
    };
    bank.receive_decision(&msg)?;
    for &(j, bit) in &msg.masks {
        token.masks.insert(j, MaskEntry { bit, point: at.clone() });
    }
    token.decision_points.push(at.clone());
    Ok(msg)
}

/// Hands an undecided token to `to`, who backs it with fresh bits of their own pool.
pub fn transfer(bank: &mut Bank, token: &mut Token, msg: &TransferMessage, to: &mut User) -> Result<(), TokenError> {
    let p = &msg.payload;
    if p.token != token.id || &p.from != token.owner() || &p.to != to.id() {
        return Err(TokenError::MessageMismatch(format!(
            "transfer of {} from {} to {} does not match token {} owned by {} / recipient {}",
            p.token,
            p.from,
            p.to,
            token.id,
            token.owner(),
            to.id()
        )));
    }
    if token.spent {
        return Err(TokenError::Spent(token.id));
    }
    if !token.is_undecided() {
        return Err(TokenError::TransferAfterDecision { token: token.id });
    }
    bank.precedes(token.custody_point(), &p.point)?;
    require_before_all(bank.layout(), &p.point, token.presentation_set.points())?;

    let m = token.m();
    let layout = bank.layout();
    let segment = to
        .reserve(m, |setup| {
            layout.precedes(setup.as_str(), p.point.as_str()).unwrap_or(false)
        })
        .map_err(|available| TokenError::PoolExhausted {
            user: to.id().clone(),
            needed: m,
            available,
        })?;
    bank.register_transfer(msg, segment.clone())?;
    to.mark_allocated(&segment);
    token.owners.push(Ownership {
        user: to.id().clone(),
        point: p.point.clone(),
        transfer_digest: Some(super::auth::digest(msg)),
    });
    token.segment = segment;
    Ok(())
}

/// Unveils the token's segment at `at`. Presenting anywhere other than `Q_b`
/// is allowed here; the bank will reject it.
pub fn present(user: &User, token: &mut Token, at: &PointId) -> Result<PresentMessage, TokenError> {
    require_owner(token, user)?;
    if !token.is_fully_decided() {
        return Err(TokenError::Undecided { token: token.id });
    }
    let commit = user
        .commitment(token.segment.instance)
        .ok_or(TokenError::UnknownInstance(token.segment.instance))?;
    let msg = PresentMessage {
        token: token.id,
        presenter: user.id().clone(),
        point: at.clone(),
        unveil: commit.unveil(&token.segment.positions),
    };
    token.spent = true;
    Ok(msg)
}

pub fn validate_presentation(
    bank: &mut Bank,
    token: TokenId,
    at: &PointId,
    msg: &PresentMessage,
) -> Result<PresentationVerdict, TokenError> {
    bank.validate_presentation(token, at, msg)
}
