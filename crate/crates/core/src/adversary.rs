//! Double-spend attacks and reference probabilities.
//!
//! Every attack runs end to end: the bank issues pulses, the adversary
//! measures them according to its strategy, acquires a token, sends one mask
//! and then presents at two spacelike-separated points with two different
//! claimed segments. A trial succeeds only if the bank's own validation
//! accepts both presentations.
//!
//! Adversaries measure each qubit individually and keep only classical data.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bb84::{self, Basis, ChannelModel, Label, PulseDescription};
use crate::bits::BitString;
use crate::coordination::{self, CommitRecord, CoordinationParams, InstanceId, UnveilMessage};
use crate::spacetime::{Event, NetworkLayout};
use crate::token::{self, Bank, HmacKey, PointId, PresentMessage, PresentationSet, User};

/// Claimed measurement outcome per received pulse.
type Outcomes = BTreeMap<Label, bool>;

/// Largest `k` accepted by [`exact_binomial_tail`].
pub const MAX_TAIL_TRIALS: usize = 10_000;

/// Same slack as the validator's threshold comparison.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("invalid claim pair: {0}")]
    Claims(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Token(#[from] token::TokenError),
    #[error(transparent)]
    Coordination(#[from] coordination::CoordinationError),
    #[error(transparent)]
    Bb84(#[from] bb84::Bb84Error),
}

/// Two different strings the adversary will try to unveil.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimPair {
    first: BitString,
    second: BitString,
}

impl ClaimPair {
    pub fn new(first: BitString, second: BitString) -> Result<Self, AdversaryError> {
        if first.len() != second.len() || first.is_empty() {
            return Err(AdversaryError::Claims(format!(
                "claims {first} and {second} must be non-empty and of equal length"
            )));
        }
        if first == second {
            return Err(AdversaryError::Claims(format!("claims must differ, both are {first}")));
        }
        Ok(ClaimPair { first, second })
    }

    /// `0…0` against `0…01`.
    pub fn single_bit(m: usize) -> Result<Self, AdversaryError> {
        let first = BitString::zeros(m);
        let mut second = vec![false; m];
        if let Some(last) = second.last_mut() {
            *last = true;
        }
        ClaimPair::new(first, BitString::new(second))
    }

    pub fn first(&self) -> &BitString {
        &self.first
    }

    pub fn second(&self) -> &BitString {
        &self.second
    }

    pub fn m(&self) -> usize {
        self.first.len()
    }

    pub fn differing_bits(&self) -> usize {
        (&self.first ^ &self.second).count_ones()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheatStrategy {
    /// Measure honestly for the first claim; guess outcomes for the second.
    SingleBasis { claims: ClaimPair },
    /// Measure the contested bits in the basis at angle `theta` and report
    /// the outcome for both claims.
    IntermediateBasis { theta: f64, claims: ClaimPair },
    /// No measurement at all.
    RandomGuess { claims: ClaimPair },
    /// Measure honestly for the first claim and resend the same outcomes
    /// for the second.
    DoubleUnveilSameY { claims: ClaimPair },
}

impl CheatStrategy {
    pub fn claims(&self) -> &ClaimPair {
        match self {
            CheatStrategy::SingleBasis { claims }
            | CheatStrategy::IntermediateBasis { claims, .. }
            | CheatStrategy::RandomGuess { claims }
            | CheatStrategy::DoubleUnveilSameY { claims } => claims,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CheatStrategy::SingleBasis { .. } => "single_basis",
            CheatStrategy::IntermediateBasis { .. } => "intermediate_basis",
            CheatStrategy::RandomGuess { .. } => "random_guess",
            CheatStrategy::DoubleUnveilSameY { .. } => "double_unveil_same_y",
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            CheatStrategy::IntermediateBasis { theta, .. } => Some(*theta),
            _ => None,
        }
    }

    /// Builds a strategy from its name, as used on the command line.
    pub fn from_name(name: &str, claims: ClaimPair, theta: f64) -> Result<Self, AdversaryError> {
        Ok(match name {
            "single_basis" => CheatStrategy::SingleBasis { claims },
            "intermediate_basis" => {
                if !(0.0..PI).contains(&theta) {
                    return Err(AdversaryError::Param(format!("theta {theta} outside [0, π)")));
                }
                CheatStrategy::IntermediateBasis { theta, claims }
            }
            "random_guess" => CheatStrategy::RandomGuess { claims },
            "double_unveil_same_y" => CheatStrategy::DoubleUnveilSameY { claims },
            other => return Err(AdversaryError::Param(format!("unknown strategy {other:?}"))),
        })
    }

    /// Outcome strings for the two claims over the received pulses.
    fn measure<R: Rng + ?Sized>(
        &self,
        received: &[&PulseDescription],
        channel: &ChannelModel,
        rng: &mut R,
    ) -> Result<(Outcomes, Outcomes), AdversaryError> {
        let claims = self.claims();
        let mut y = BTreeMap::new();
        let mut z = BTreeMap::new();
        for pulse in received {
            let j = pulse.label.k - 1;
            let a = claims.first.get(j).expect("claim covers every bit");
            let b = claims.second.get(j).expect("claim covers every bit");
            let (oy, oz) = match self {
                CheatStrategy::RandomGuess { .. } => {
                    let oy = rng.random::<bool>();
                    (oy, if a == b { oy } else { rng.random::<bool>() })
                }
                _ if a == b => {
                    let o = bb84::measure_bb84(pulse, Basis::from_bit(a), channel, rng);
                    (o, o)
                }
                CheatStrategy::SingleBasis { .. } => {
                    let o = bb84::measure_bb84(pulse, Basis::from_bit(a), channel, rng);
                    (o, rng.random::<bool>())
                }
                CheatStrategy::DoubleUnveilSameY { .. } => {
                    let o = bb84::measure_bb84(pulse, Basis::from_bit(a), channel, rng);
                    (o, o)
                }
                CheatStrategy::IntermediateBasis { theta, .. } => {
                    let o = bb84::measure_projective(&bb84::statevector(pulse), *theta, rng)?;
                    (o, o)
                }
            };
            y.insert(pulse.label, oy);
            z.insert(pulse.label, oz);
        }
        Ok((y, z))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub strategy: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical_probability: f64,
    pub analytical_bound: f64,
    pub bound_kind: String,
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub theta: Option<f64>,
    pub p_loss: f64,
    pub p_err: f64,
    pub differing_bits: usize,
    pub seed: u64,
}

impl AttackReport {
    /// Three binomial standard errors at the reference probability.
    pub fn slack(&self) -> f64 {
        three_sigma(self.analytical_bound, self.trials)
    }

    /// `empirical ≤ bound + 3σ`.
    pub fn within_bound(&self) -> bool {
        self.empirical_probability <= self.analytical_bound + self.slack()
    }
}

pub fn three_sigma(p: f64, trials: u64) -> f64 {
    3.0 * (p * (1.0 - p) / trials.max(1) as f64).sqrt()
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Start point, acquisition and decision points, and `2^M` mutually
/// spacelike presentation points `Q_<label>` in their common future.
pub fn attack_layout(m: usize) -> Result<(NetworkLayout, PresentationSet), AdversaryError> {
    if m == 0 || m > 10 {
        return Err(AdversaryError::Param(format!("M = {m} outside 1..=10")));
    }
    let mut layout = NetworkLayout::new(1).expect("1 spatial dimension");
    layout.insert("P", Event::at(0.0, 0.0)).expect("fresh layout");
    layout.insert("P_A", Event::at(1.0, 0.0)).expect("fresh layout");
    layout.insert("P_D", Event::at(2.0, 0.0)).expect("fresh layout");
    let count = 1usize << m;
    for (i, label) in BitString::enumerate(m).enumerate() {
        let x = if count == 1 {
            0.0
        } else {
            -7.0 + 14.0 * i as f64 / (count - 1) as f64
        };
        layout
            .insert(format!("Q_{label}"), Event::at(10.0, x))
            .expect("distinct labels");
    }
    let set = PresentationSet::full(m, "Q_")?;
    Ok((layout, set))
}

fn pid(s: &str) -> PointId {
    PointId::from(s)
}

/// One double-spend attempt through the bank's own validation path.
pub fn double_spend_trial<R: Rng + ?Sized>(
    strategy: &CheatStrategy,
    params: &CoordinationParams,
    channel: &ChannelModel,
    layout: &NetworkLayout,
    set: &PresentationSet,
    rng: &mut R,
) -> Result<bool, AdversaryError> {
    let claims = strategy.claims();
    if claims.m() != params.m() || set.m() != params.m() {
        return Err(AdversaryError::Claims(format!(
            "claims of length {} for M = {}",
            claims.m(),
            params.m()
        )));
    }
    let mut bank = Bank::new(layout.clone());
    let mut adversary = User::new("adversary", HmacKey::new([7; 32]));
    bank.register_user(adversary.id().clone(), adversary.key().clone());

    let setup = pid("P");
    let (instance, pulses) = bank.issue_instance(adversary.id(), *params, &setup, rng)?;
    let received_labels = bb84::transmit(&pulses, channel, rng);
    let received: Vec<&PulseDescription> = pulses.iter().filter(|p| received_labels.contains(&p.label)).collect();
    let (y, z) = strategy.measure(&received, channel, rng)?;
    bank.register_receipt(instance, received_labels.clone())?;
    adversary.add_commitment(
        CommitRecord {
            instance,
            x: claims.first.clone(),
            y,
            received_labels: received_labels.clone(),
        },
        setup,
    );

    let (mut token, _) = token::acquire_token(&mut bank, &mut adversary, set.clone(), &pid("P_A"), None)?;
    // any label works; the mask fixes which two points the claims point to
    let b_first = BitString::zeros(params.m());
    token::decide(&mut bank, &adversary, &mut token, &b_first, &pid("P_D"))?;
    let mask = token.mask().expect("fully decided");
    let b_second = &mask ^ &claims.second;

    let q_first = set.point(&b_first).expect("full set").clone();
    let q_second = set.point(&b_second).expect("full set").clone();
    let first = token::present(&adversary, &mut token, &q_first)?;
    let second = PresentMessage {
        token: token.id,
        presenter: adversary.id().clone(),
        point: q_second.clone(),
        unveil: forged_unveil(instance, &first.unveil, &claims.second, z, &received_labels),
    };
    let ok_first = bank.validate_presentation(token.id, &q_first, &first)?.is_accept();
    let ok_second = bank.validate_presentation(token.id, &q_second, &second)?.is_accept();
    Ok(ok_first && ok_second)
}

fn forged_unveil(
    instance: InstanceId,
    honest: &UnveilMessage,
    claim: &BitString,
    z: BTreeMap<Label, bool>,
    received: &BTreeSet<Label>,
) -> UnveilMessage {
    UnveilMessage {
        instance,
        positions: honest.positions.clone(),
        claimed_x: claim.clone(),
        y: z.into_iter().filter(|(l, _)| received.contains(l)).collect(),
    }
}

/// Monte Carlo estimate of the double-spend success probability.
pub fn run_double_spend(
    strategy: &CheatStrategy,
    params: &CoordinationParams,
    channel: &ChannelModel,
    trials: u64,
    seed: u64,
) -> Result<AttackReport, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::Param("trials must be at least 1".into()));
    }
    let (layout, set) = attack_layout(params.m())?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            double_spend_trial(strategy, params, channel, &layout, &set, &mut rng).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (bound, kind) = reference_probability(strategy, params, channel)?;
    Ok(AttackReport {
        strategy: strategy.name().to_string(),
        trials,
        successes,
        empirical_probability: successes as f64 / trials as f64,
        analytical_bound: bound,
        bound_kind: kind.to_string(),
        n: params.n(),
        m: params.m(),
        gamma: params.gamma(),
        theta: strategy.theta(),
        p_loss: channel.p_loss(),
        p_err: channel.p_err(),
        differing_bits: strategy.claims().differing_bits(),
        seed,
    })
}

/// Reference success probability for `strategy` and how it was obtained.
pub fn reference_probability(
    strategy: &CheatStrategy,
    params: &CoordinationParams,
    channel: &ChannelModel,
) -> Result<(f64, &'static str), AdversaryError> {
    let claims = strategy.claims();
    let d = claims.differing_bits();
    match strategy {
        CheatStrategy::IntermediateBasis { theta, .. } => {
            let (n, g, f, loss) = (
                params.n(),
                params.gamma(),
                params.min_received_fraction(),
                channel.p_loss(),
            );
            let contested = predicted_pair_pass(n, g, f, loss, theta.sin().powi(2), (FRAC_PI_4 - theta).sin().powi(2))?;
            let agreed = predicted_group_pass(n, g, f, loss, channel.p_err())?;
            Ok((
                contested.powi(d as i32) * agreed.powi((claims.m() - d) as i32),
                "exact_individual",
            ))
        }
        _ => Ok((
            (d as f64 * binding_bound(params.n(), params.gamma())).min(1.0),
            "chernoff_heuristic",
        )),
    }
}

/// `exp(−2·⌊n/2⌋·(1/2 − γ)²)`: Hoeffding tail for passing a wrong-basis
/// group of the expected size by guessing. A heuristic for one strategy,
/// not a security proof.
pub fn binding_bound(n: usize, gamma: f64) -> f64 {
    let half = (n / 2) as f64;
    let gap = (0.5 - gamma).max(0.0);
    (-2.0 * half * gap * gap).exp()
}

/// `ln C(k, j)` for every `j ∈ 0..=k`, by the ratio recurrence.
fn ln_binomials(k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    out.push(acc);
    for j in 0..k {
        acc += ((k - j) as f64).ln() - ((j + 1) as f64).ln();
        out.push(acc);
    }
    out
}

/// Binomial probabilities `P(X = j)`, `X ~ Bin(k, p)`, for `j ∈ 0..=k`.
pub fn binomial_pmf(k: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        let mut v = vec![0.0; k + 1];
        v[0] = 1.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![0.0; k + 1];
        v[k] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    ln_binomials(k)
        .into_iter()
        .enumerate()
        .map(|(j, lc)| (lc + j as f64 * lp + (k - j) as f64 * lq).exp())
        .collect()
}

/// Largest error count the validator tolerates on a group of size `k`.
pub fn allowed_errors(k: usize, gamma: f64) -> usize {
    (gamma * k as f64 + THRESHOLD_SLACK).floor() as usize
}

/// `Σ_{j ≤ ⌊γk⌋} C(k,j) p^j (1−p)^(k−j)`, summed in log space.
pub fn exact_binomial_tail(k: usize, gamma: f64, p: f64) -> Result<f64, AdversaryError> {
    if k > MAX_TAIL_TRIALS {
        return Err(AdversaryError::Param(format!("k = {k} exceeds {MAX_TAIL_TRIALS}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(AdversaryError::Param(format!("p = {p} outside [0, 1]")));
    }
    let limit = allowed_errors(k, gamma).min(k);
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(if limit >= k { 1.0 } else { 0.0 });
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let logs: Vec<f64> = ln_binomials(k)
        .into_iter()
        .take(limit + 1)
        .enumerate()
        .map(|(j, lc)| lc + j as f64 * lp + (k - j) as f64 * lq)
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((max + sum.ln()).exp().min(1.0))
}

fn group_pass(size: usize, min_group: f64, gamma: f64, error_rate: f64) -> Result<f64, AdversaryError> {
    if (size as f64) < min_group {
        return Ok(0.0);
    }
    exact_binomial_tail(size, gamma, error_rate)
}

/// Probability that one claimed bit passes validation when each pulse of the
/// matching-basis group is wrong independently with `error_rate`. The group
/// size is `Bin(n, (1 − p_loss)/2)`.
pub fn predicted_group_pass(
    n: usize,
    gamma: f64,
    min_received_fraction: f64,
    p_loss: f64,
    error_rate: f64,
) -> Result<f64, AdversaryError> {
    let min_group = min_received_fraction * n as f64 / 2.0;
    binomial_pmf(n, (1.0 - p_loss) / 2.0)
        .into_iter()
        .enumerate()
        .map(|(w, pw)| Ok(pw * group_pass(w, min_group, gamma, error_rate)?))
        .sum()
}

/// Probability that both claims for one contested bit pass: the two basis
/// groups are disjoint, with error rates `e_comp` and `e_had`.
pub fn predicted_pair_pass(
    n: usize,
    gamma: f64,
    min_received_fraction: f64,
    p_loss: f64,
    e_comp: f64,
    e_had: f64,
) -> Result<f64, AdversaryError> {
    let min_group = min_received_fraction * n as f64 / 2.0;
    let q = (1.0 - p_loss) / 2.0;
    // given w0 pulses in the computational group, each of the remaining
    // n − w0 lands in the Hadamard group with probability q / (1 − q)
    let q_rest = q / (1.0 - q);
    let comp: Vec<f64> = (0..=n)
        .map(|w| group_pass(w, min_group, gamma, e_comp))
        .collect::<Result<_, _>>()?;
    let had: Vec<f64> = (0..=n)
        .map(|w| group_pass(w, min_group, gamma, e_had))
        .collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for (w0, p0) in binomial_pmf(n, q).into_iter().enumerate() {
        if comp[w0] == 0.0 || p0 == 0.0 {
            continue;
        }
        let inner: f64 = binomial_pmf(n - w0, q_rest)
            .into_iter()
            .enumerate()
            .map(|(w1, p1)| p1 * had[w1])
            .sum();
        total += p0 * comp[w0] * inner;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateReport {
    pub trials: u64,
    pub passes: u64,
    pub empirical: f64,
    pub predicted: f64,
}

impl PassRateReport {
    pub fn standard_error(&self) -> f64 {
        (self.predicted * (1.0 - self.predicted) / self.trials as f64).sqrt()
    }
}

/// Pass rate of a single one-bit claim when every received pulse is measured
/// at angle `theta`, against the exact prediction.
pub fn run_single_claim(
    theta: f64,
    claim: bool,
    params: &CoordinationParams,
    channel: &ChannelModel,
    trials: u64,
    seed: u64,
) -> Result<PassRateReport, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::Param("trials must be at least 1".into()));
    }
    let params = params.with_m(1)?;
    let claimed: BitString = [claim].into_iter().collect();
    let passes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64, AdversaryError> {
            let mut rng = trial_rng(seed, t);
            let (mut issuer, pulses) = coordination::issuer_init(InstanceId(t), params, &mut rng);
            let received = bb84::transmit(&pulses, channel, &mut rng);
            let mut y = BTreeMap::new();
            for p in pulses.iter().filter(|p| received.contains(&p.label)) {
                y.insert(
                    p.label,
                    bb84::measure_projective(&bb84::statevector(p), theta, &mut rng)?,
                );
            }
            issuer.register_receipt(received)?;
            let unveil = UnveilMessage {
                instance: issuer.instance,
                positions: vec![1],
                claimed_x: claimed.clone(),
                y,
            };
            Ok(coordination::validate_unveil(&issuer, &unveil)?.is_accept() as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let error_rate = if claim {
        (FRAC_PI_4 - theta).sin().powi(2)
    } else {
        theta.sin().powi(2)
    };
    let predicted = predicted_group_pass(
        params.n(),
        params.gamma(),
        params.min_received_fraction(),
        channel.p_loss(),
        error_rate,
    )?;
    Ok(PassRateReport {
        trials,
        passes,
        empirical: passes as f64 / trials as f64,
        predicted,
    })
}
