//! Bit-string coordination by BB84 commit-by-measurement.
//!
//! The issuer prepares `n` pulses per committed bit. The user commits to `x`
//! by measuring every received pulse `(k, l)` in basis `x_k`, and unveils by
//! sending `x` with the outcomes. For each unveiled position `k` the issuer
//! checks the outcomes on `Ω_k`, the received pulses it prepared in basis
//! `x_k`, and accepts when no more than `γ·|Ω_k|` of them disagree with the
//! prepared bits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bb84::{self, Basis, ChannelModel, Label, PulseDescription};
use crate::bits::BitString;

/// Slack on the `errors ≤ γ·|Ω|` comparison so that exact products such as
/// `0.15 · 20` are not lost to rounding.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordinationError {
    #[error("n and M must be at least 1 (n = {n}, M = {m})")]
    EmptyInstance { n: usize, m: usize },
    #[error("gamma must lie in (0, 1/2), got {0}")]
    BadGamma(f64),
    #[error("min_received_fraction must lie in (0, 1], got {0}")]
    BadMinReceived(f64),
    #[error("committed string has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("label {0} refers to a bit position outside the committed string")]
    LabelOutOfRange(Label),
    #[error("unveil for instance {got} presented to instance {expected}")]
    InstanceMismatch { expected: InstanceId, got: InstanceId },
    #[error("received labels for instance {0} were already registered")]
    ReceiptFrozen(InstanceId),
    #[error(transparent)]
    Bb84(#[from] bb84::Bb84Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.0)
    }
}

pub const DEFAULT_MIN_RECEIVED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct CoordinationParams {
    n: usize,
    m: usize,
    gamma: f64,
    min_received_fraction: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    m: usize,
    gamma: f64,
    #[serde(default = "default_min_received")]
    min_received_fraction: f64,
}

fn default_min_received() -> f64 {
    DEFAULT_MIN_RECEIVED_FRACTION
}

impl TryFrom<RawParams> for CoordinationParams {
    type Error = CoordinationError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        CoordinationParams::new(raw.n, raw.m, raw.gamma)?.with_min_received_fraction(raw.min_received_fraction)
    }
}

impl From<CoordinationParams> for RawParams {
    fn from(p: CoordinationParams) -> Self {
        RawParams {
            n: p.n,
            m: p.m,
            gamma: p.gamma,
            min_received_fraction: p.min_received_fraction,
        }
    }
}

impl CoordinationParams {
    pub fn new(n: usize, m: usize, gamma: f64) -> Result<Self, CoordinationError> {
        if n == 0 || m == 0 {
            return Err(CoordinationError::EmptyInstance { n, m });
        }
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(CoordinationError::BadGamma(gamma));
        }
        Ok(CoordinationParams {
            n,
            m,
            gamma,
            min_received_fraction: DEFAULT_MIN_RECEIVED_FRACTION,
        })
    }

    pub fn with_min_received_fraction(mut self, f: f64) -> Result<Self, CoordinationError> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(CoordinationError::BadMinReceived(f));
        }
        self.min_received_fraction = f;
        Ok(self)
    }

    /// Same parameters with a different committed-string length.
    pub fn with_m(mut self, m: usize) -> Result<Self, CoordinationError> {
        if m == 0 {
            return Err(CoordinationError::EmptyInstance { n: self.n, m });
        }
        self.m = m;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn min_received_fraction(&self) -> f64 {
        self.min_received_fraction
    }

    /// Smallest acceptable `|Ω_k|`, as a real threshold.
    pub fn min_group_size(&self) -> f64 {
        self.min_received_fraction * self.n as f64 / 2.0
    }
}

/// Issuer side of one coordination instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuerRecord {
    pub instance: InstanceId,
    pub params: CoordinationParams,
    pub r: BitString,
    pub s: BitString,
    received_labels: Option<BTreeSet<Label>>,
}

impl IssuerRecord {
    /// Freezes the labels the user reported as received. Can only happen once.
    pub fn register_receipt(&mut self, labels: BTreeSet<Label>) -> Result<(), CoordinationError> {
        if self.received_labels.is_some() {
            return Err(CoordinationError::ReceiptFrozen(self.instance));
        }
        let (n, m) = (self.params.n, self.params.m);
        if let Some(bad) = labels.iter().find(|l| l.k == 0 || l.k > m || l.l == 0 || l.l > n) {
            return Err(CoordinationError::LabelOutOfRange(*bad));
        }
        self.received_labels = Some(labels);
        Ok(())
    }

    pub fn received_labels(&self) -> Option<&BTreeSet<Label>> {
        self.received_labels.as_ref()
    }

    pub fn prepared(&self, label: Label) -> (bool, Basis) {
        let i = label.flat_index(self.params.n);
        (
            self.r.get(i).expect("label within instance"),
            Basis::from_bit(self.s.get(i).expect("label within instance")),
        )
    }
}

/// User side of one coordination instance. `x` is private until unveiled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub instance: InstanceId,
    pub x: BitString,
    pub y: BTreeMap<Label, bool>,
    pub received_labels: BTreeSet<Label>,
}

impl CommitRecord {
    /// Unveil of the 1-based `positions` of the committed string.
    pub fn unveil(&self, positions: &[usize]) -> UnveilMessage {
        let wanted: BTreeSet<usize> = positions.iter().copied().collect();
        UnveilMessage {
            instance: self.instance,
            positions: positions.to_vec(),
            claimed_x: positions
                .iter()
                .map(|&k| self.x.get(k.wrapping_sub(1)).unwrap_or(false))
                .collect(),
            y: self
                .y
                .iter()
                .filter(|(label, _)| wanted.contains(&label.k))
                .map(|(l, b)| (*l, *b))
                .collect(),
        }
    }

    pub fn unveil_all(&self) -> UnveilMessage {
        let positions: Vec<usize> = (1..=self.x.len()).collect();
        self.unveil(&positions)
    }
}

/// Claimed bits for the 1-based `positions` of an instance, with outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnveilMessage {
    pub instance: InstanceId,
    pub positions: Vec<usize>,
    pub claimed_x: BitString,
    pub y: BTreeMap<Label, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UnveilRejection {
    Malformed {
        detail: String,
    },
    /// The user never reported receipt for this instance.
    NoReceipt,
    InsufficientData {
        k: usize,
        group_size: usize,
        required: f64,
    },
    ThresholdExceeded {
        k: usize,
        errors: usize,
        group_size: usize,
        error_fraction: f64,
    },
}

impl UnveilRejection {
    pub fn code(&self) -> &'static str {
        match self {
            UnveilRejection::Malformed { .. } => "malformed",
            UnveilRejection::NoReceipt => "no_receipt",
            UnveilRejection::InsufficientData { .. } => "insufficient_data",
            UnveilRejection::ThresholdExceeded { .. } => "threshold_exceeded",
        }
    }

    /// Error fraction on the failing group, if the failure was a threshold one.
    pub fn error_fraction(&self) -> Option<f64> {
        match self {
            UnveilRejection::ThresholdExceeded { error_fraction, .. } => Some(*error_fraction),
            _ => None,
        }
    }
}

impl fmt::Display for UnveilRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnveilRejection::Malformed { detail } => write!(f, "malformed unveil: {detail}"),
            UnveilRejection::NoReceipt => f.write_str("no receipt registered"),
            UnveilRejection::InsufficientData {
                k,
                group_size,
                required,
            } => {
                write!(f, "bit {k}: |Ω| = {group_size} below required {required}")
            }
            UnveilRejection::ThresholdExceeded {
                k,
                errors,
                group_size,
                error_fraction,
            } => write!(
                f,
                "bit {k}: {errors}/{group_size} mismatches (fraction {error_fraction:.4})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum UnveilVerdict {
    Accept,
    Reject(UnveilRejection),
}

impl UnveilVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, UnveilVerdict::Accept)
    }
}

/// Fresh instance with uniformly random `r`, `s`, and its pulses.
pub fn issuer_init<R: Rng + ?Sized>(
    instance: InstanceId,
    params: CoordinationParams,
    rng: &mut R,
) -> (IssuerRecord, Vec<PulseDescription>) {
    let len = params.n * params.m;
    let r = BitString::random(len, rng);
    let s = BitString::random(len, rng);
    let pulses = bb84::prepare_pulses(&r, &s, params.n, params.m).expect("lengths match by construction");
    (
        IssuerRecord {
            instance,
            params,
            r,
            s,
            received_labels: None,
        },
        pulses,
    )
}

/// Measures each received pulse `(k, l)` in basis `x_k`.
pub fn user_commit<'a, I, R>(
    instance: InstanceId,
    pulses_received: I,
    x: &BitString,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<CommitRecord, CoordinationError>
where
    I: IntoIterator<Item = &'a PulseDescription>,
    R: Rng + ?Sized,
{
    let mut y = BTreeMap::new();
    for pulse in pulses_received {
        let bit = x
            .get(pulse.label.k.wrapping_sub(1))
            .ok_or(CoordinationError::LabelOutOfRange(pulse.label))?;
        y.insert(
            pulse.label,
            bb84::measure_bb84(pulse, Basis::from_bit(bit), channel, rng),
        );
    }
    Ok(CommitRecord {
        instance,
        x: x.clone(),
        received_labels: y.keys().copied().collect(),
        y,
    })
}

/// Per-position γ-threshold check of an unveil against the issuer's record.
pub fn validate_unveil(issuer: &IssuerRecord, unveil: &UnveilMessage) -> Result<UnveilVerdict, CoordinationError> {
    if unveil.instance != issuer.instance {
        return Err(CoordinationError::InstanceMismatch {
            expected: issuer.instance,
            got: unveil.instance,
        });
    }
    let malformed = |detail: String| Ok(UnveilVerdict::Reject(UnveilRejection::Malformed { detail }));
    let Some(received) = issuer.received_labels() else {
        return Ok(UnveilVerdict::Reject(UnveilRejection::NoReceipt));
    };
    let params = &issuer.params;
    if unveil.positions.len() != unveil.claimed_x.len() {
        return malformed(format!(
            "{} positions but {} claimed bits",
            unveil.positions.len(),
            unveil.claimed_x.len()
        ));
    }
    let positions: BTreeSet<usize> = unveil.positions.iter().copied().collect();
    if positions.len() != unveil.positions.len() {
        return malformed("repeated position".into());
    }
    if let Some(&k) = positions.iter().find(|&&k| k == 0 || k > params.m) {
        return malformed(format!("position {k} outside 1..={}", params.m));
    }
    if let Some(label) = unveil
        .y
        .keys()
        .find(|l| !received.contains(l) || !positions.contains(&l.k))
    {
        return malformed(format!("outcome for unexpected label {label}"));
    }

    for (&k, claimed) in unveil.positions.iter().zip(unveil.claimed_x.iter()) {
        let basis = Basis::from_bit(claimed);
        let mut group_size = 0usize;
        let mut errors = 0usize;
        for label in received.range(Label::new(k, 1)..=Label::new(k, params.n)) {
            let (r, s) = issuer.prepared(*label);
            if s != basis {
                continue;
            }
            group_size += 1;
            // a missing outcome counts against the user
            if unveil.y.get(label) != Some(&r) {
                errors += 1;
            }
        }
        let required = params.min_group_size();
        if (group_size as f64) < required {
            return Ok(UnveilVerdict::Reject(UnveilRejection::InsufficientData {
                k,
                group_size,
                required,
            }));
        }
        if errors as f64 > params.gamma * group_size as f64 + THRESHOLD_SLACK {
            return Ok(UnveilVerdict::Reject(UnveilRejection::ThresholdExceeded {
                k,
                errors,
                group_size,
                error_fraction: errors as f64 / group_size as f64,
            }));
        }
    }
    Ok(UnveilVerdict::Accept)
}

/// True iff both unveils are accepted and claim different strings.
pub fn double_unveil_check(
    issuer: &IssuerRecord,
    a: &UnveilMessage,
    b: &UnveilMessage,
) -> Result<bool, CoordinationError> {
    let differ = a.positions != b.positions || a.claimed_x != b.claimed_x;
    Ok(differ && validate_unveil(issuer, a)?.is_accept() && validate_unveil(issuer, b)?.is_accept())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn honest_run(
        params: CoordinationParams,
        x: &BitString,
        channel: &ChannelModel,
        seed: u64,
    ) -> (IssuerRecord, CommitRecord) {
        let mut rng = rng(seed);
        let (mut issuer, pulses) = issuer_init(InstanceId(1), params, &mut rng);
        let received = bb84::transmit(&pulses, channel, &mut rng);
        let commit = user_commit(
            issuer.instance,
            pulses.iter().filter(|p| received.contains(&p.label)),
            x,
            channel,
            &mut rng,
        )
        .unwrap();
        issuer.register_receipt(commit.received_labels.clone()).unwrap();
        (issuer, commit)
    }

    #[test]
    fn params_validation() {
        assert!(CoordinationParams::new(0, 1, 0.1).is_err());
        assert!(CoordinationParams::new(1, 0, 0.1).is_err());
        assert!(CoordinationParams::new(1, 1, 0.0).is_err());
        assert!(CoordinationParams::new(1, 1, 0.5).is_err());
        let p = CoordinationParams::new(4, 2, 0.1).unwrap();
        assert!(p.with_min_received_fraction(0.0).is_err());
        assert!(p.with_min_received_fraction(1.5).is_err());
        assert_eq!(p.min_received_fraction(), DEFAULT_MIN_RECEIVED_FRACTION);
        let json = r#"{"n":8,"m":2,"gamma":0.1}"#;
        let p: CoordinationParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.min_received_fraction(), 0.5);
        assert!(serde_json::from_str::<CoordinationParams>(r#"{"n":8,"m":2,"gamma":0.7}"#).is_err());
    }

    #[test]
    fn init_sizes() {
        let p = CoordinationParams::new(1, 1, 0.1).unwrap();
        let (rec, pulses) = issuer_init(InstanceId(0), p, &mut rng(1));
        assert_eq!((rec.r.len(), rec.s.len(), pulses.len()), (1, 1, 1));

        let p = CoordinationParams::new(64, 3, 0.1).unwrap();
        let (_, pulses) = issuer_init(InstanceId(0), p, &mut rng(1));
        let labels: BTreeSet<_> = pulses.iter().map(|p| p.label).collect();
        assert_eq!((pulses.len(), labels.len()), (192, 192));
    }

    #[test]
    fn init_bits_are_fair() {
        // Bin(10⁴, 1/2) has σ = 0.005 in fraction; ±0.02 is a 4σ band.
        let p = CoordinationParams::new(1, 1, 0.1).unwrap();
        let mut rng = rng(7);
        let ones = (0..10_000)
            .filter(|_| issuer_init(InstanceId(0), p, &mut rng).0.r.get(0).unwrap())
            .count();
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn commit_measures_in_x_basis() {
        let p = CoordinationParams::new(32, 2, 0.1).unwrap();
        let x: BitString = "01".parse().unwrap();
        let (issuer, commit) = honest_run(p, &x, &ChannelModel::noiseless(), 3);
        for (label, &y) in &commit.y {
            let (r, s) = issuer.prepared(*label);
            if s.bit() == x.get(label.k - 1).unwrap() {
                assert_eq!(y, r, "eigenstate outcome at {label}");
            }
        }
        assert_eq!(commit.received_labels.len(), 64);
        assert!(user_commit(
            InstanceId(1),
            &[bb84::PulseDescription {
                label: Label::new(3, 1),
                r: false,
                s: Basis::Computational,
            }],
            &x,
            &ChannelModel::noiseless(),
            &mut rng(0)
        )
        .is_err());
    }

    #[test]
    fn commit_loss_concentrates() {
        // nM = 1000, p_loss = 0.2: mean 800, σ ≈ 12.6; ±50 is ~4σ.
        let p = CoordinationParams::new(250, 4, 0.1).unwrap();
        let ch = ChannelModel::new(0.2, 0.0).unwrap();
        let (_, commit) = honest_run(p, &BitString::zeros(4), &ch, 11);
        let got = commit.received_labels.len() as i64;
        assert!((got - 800).abs() <= 50, "received {got}");
    }

    #[test]
    fn honest_noiseless_accepts_for_every_x() {
        let p = CoordinationParams::new(64, 3, 0.1).unwrap();
        for (i, x) in BitString::enumerate(3).enumerate() {
            let (issuer, commit) = honest_run(p, &x, &ChannelModel::noiseless(), i as u64);
            assert_eq!(
                validate_unveil(&issuer, &commit.unveil_all()).unwrap(),
                UnveilVerdict::Accept
            );
        }
    }

    /// Hand-built record: n = 8, M = 1, every pulse received, the first four
    /// prepared in the computational basis with r = 0.
    fn fixed_record(gamma: f64) -> IssuerRecord {
        let params = CoordinationParams::new(8, 1, gamma).unwrap();
        let mut rec = IssuerRecord {
            instance: InstanceId(9),
            params,
            r: "00001111".parse().unwrap(),
            s: "00001111".parse().unwrap(),
            received_labels: None,
        };
        rec.register_receipt((1..=8).map(|l| Label::new(1, l)).collect())
            .unwrap();
        rec
    }

    fn unveil_with(claim: &str, y: &[(usize, bool)]) -> UnveilMessage {
        UnveilMessage {
            instance: InstanceId(9),
            positions: vec![1],
            claimed_x: claim.parse().unwrap(),
            y: y.iter().map(|&(l, b)| (Label::new(1, l), b)).collect(),
        }
    }

    #[test]
    fn threshold_arithmetic() {
        let rec = fixed_record(0.25);
        // Ω = labels 1..4, one mismatch: 1 ≤ 0.25·4.
        let one = unveil_with("0", &[(1, true), (2, false), (3, false), (4, false)]);
        assert!(validate_unveil(&rec, &one).unwrap().is_accept());
        let two = unveil_with("0", &[(1, true), (2, true), (3, false), (4, false)]);
        match validate_unveil(&rec, &two).unwrap() {
            UnveilVerdict::Reject(UnveilRejection::ThresholdExceeded {
                k,
                errors,
                group_size,
                error_fraction,
            }) => {
                assert_eq!((k, errors, group_size), (1, 2, 4));
                assert_eq!(error_fraction, 0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        // missing outcomes count as mismatches
        let sparse = unveil_with("0", &[(1, false), (2, false)]);
        assert!(!validate_unveil(&rec, &sparse).unwrap().is_accept());
    }

    #[test]
    fn malformed_and_protocol_errors() {
        let rec = fixed_record(0.25);
        let mut bad = unveil_with("0", &[(1, false)]);
        bad.y.insert(Label::new(2, 1), false);
        assert!(matches!(
            validate_unveil(&rec, &bad).unwrap(),
            UnveilVerdict::Reject(UnveilRejection::Malformed { .. })
        ));
        let mut other = unveil_with("0", &[]);
        other.instance = InstanceId(10);
        assert!(validate_unveil(&rec, &other).is_err());

        let mut unreceived = fixed_record(0.25);
        unreceived.received_labels = None;
        unreceived
            .register_receipt((1..=4).map(|l| Label::new(1, l)).collect())
            .unwrap();
        let y5 = unveil_with("0", &[(5, true)]);
        assert!(matches!(
            validate_unveil(&unreceived, &y5).unwrap(),
            UnveilVerdict::Reject(UnveilRejection::Malformed { .. })
        ));
        assert!(unreceived.register_receipt(BTreeSet::new()).is_err());
    }

    #[test]
    fn insufficient_data() {
        let params = CoordinationParams::new(8, 1, 0.25).unwrap();
        let mut rec = IssuerRecord {
            instance: InstanceId(9),
            params,
            r: BitString::zeros(8),
            s: "00001111".parse().unwrap(),
            received_labels: None,
        };
        // only one computational pulse received; need ≥ 0.5·8/2 = 2
        rec.register_receipt([Label::new(1, 1), Label::new(1, 5)].into_iter().collect())
            .unwrap();
        let u = unveil_with("0", &[(1, false), (5, false)]);
        assert!(matches!(
            validate_unveil(&rec, &u).unwrap(),
            UnveilVerdict::Reject(UnveilRejection::InsufficientData {
                k: 1,
                group_size: 1,
                ..
            })
        ));
    }

    #[test]
    fn wrong_claim_rejected_near_half() {
        let p = CoordinationParams::new(128, 2, 0.1).unwrap();
        let x: BitString = "10".parse().unwrap();
        let mut fractions = Vec::new();
        for seed in 0..50 {
            let (issuer, commit) = honest_run(p, &x, &ChannelModel::noiseless(), seed);
            let mut forged = commit.unveil_all();
            forged.claimed_x = "00".parse().unwrap();
            match validate_unveil(&issuer, &forged).unwrap() {
                UnveilVerdict::Reject(r @ UnveilRejection::ThresholdExceeded { k: 1, .. }) => {
                    fractions.push(r.error_fraction().unwrap())
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn double_unveil_examples() {
        let p = CoordinationParams::new(128, 1, 0.1).unwrap();
        let x: BitString = "0".parse().unwrap();
        let (issuer, commit) = honest_run(p, &x, &ChannelModel::noiseless(), 5);
        let honest = commit.unveil_all();
        assert!(!double_unveil_check(&issuer, &honest, &honest).unwrap());
        let mut forged = honest.clone();
        forged.claimed_x = "1".parse().unwrap();
        assert!(!double_unveil_check(&issuer, &honest, &forged).unwrap());
    }

    #[test]
    fn validation_is_deterministic() {
        let p = CoordinationParams::new(32, 2, 0.1).unwrap();
        let (issuer, commit) = honest_run(p, &"11".parse().unwrap(), &ChannelModel::new(0.1, 0.05).unwrap(), 8);
        let u = commit.unveil_all();
        assert_eq!(
            validate_unveil(&issuer, &u).unwrap(),
            validate_unveil(&issuer, &u).unwrap()
        );
    }

    #[test]
    fn segment_unveil_reveals_only_segment() {
        let p = CoordinationParams::new(16, 4, 0.1).unwrap();
        let (issuer, commit) = honest_run(p, &"0110".parse().unwrap(), &ChannelModel::noiseless(), 2);
        let u = commit.unveil(&[2, 3]);
        assert_eq!(u.claimed_x.to_string(), "11");
        assert!(u.y.keys().all(|l| l.k == 2 || l.k == 3));
        assert!(validate_unveil(&issuer, &u).unwrap().is_accept());
    }
}
