//! BB84 state preparation, lossy transmission and measurement.
//!
//! Honest parties only ever prepare and measure in the two BB84 bases, so the
//! honest path is simulated classically: matching-basis outcomes reproduce the
//! prepared bit (up to the channel's flip probability) and mismatched-basis
//! outcomes are fair coins. Adversaries that measure in other bases go through
//! the single-qubit statevector path ([`statevector`], [`measure_projective`]).

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Bb84Error {
    #[error("preparation strings must have length n·M = {expected}, got r: {r}, s: {s}")]
    LengthMismatch { expected: usize, r: usize, s: usize },
    #[error("loss probability must lie in [0, 1), got {0}")]
    BadLoss(f64),
    #[error("flip probability must lie in [0, 0.5), got {0}")]
    BadFlip(f64),
    #[error("amplitudes are not normalised (norm² = {0})")]
    NotNormalised(f64),
    #[error("measurement angle must lie in [0, π), got {0}")]
    BadAngle(f64),
}

/// Measurement/preparation basis; the bit value doubles as the committed bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Computational,
    Hadamard,
}

impl Basis {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Basis::Hadamard
        } else {
            Basis::Computational
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, Basis::Hadamard)
    }
}

/// Pulse label `(k, l)`: committed-bit position `k ∈ 1..=M` and repetition
/// `l ∈ 1..=n`. Ordering is k-major. Serialized as `"(k,l)"` so labels can
/// key JSON maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label {
    pub k: usize,
    pub l: usize,
}

impl Label {
    pub fn new(k: usize, l: usize) -> Self {
        Label { k, l }
    }

    /// Position of this label in the flattened k-major preparation strings.
    pub fn flat_index(self, n: usize) -> usize {
        (self.k - 1) * n + (self.l - 1)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k, self.l)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| format!("label {s:?} is not of the form (k,l)"))?;
        let (k, l) = inner
            .split_once(',')
            .ok_or_else(|| format!("label {s:?} is not of the form (k,l)"))?;
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("label {s:?}: {e}"));
        let (k, l) = (num(k)?, num(l)?);
        if k == 0 || l == 0 {
            return Err(format!("label {s:?}: indices start at 1"));
        }
        Ok(Label { k, l })
    }
}

impl TryFrom<String> for Label {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseDescription {
    pub label: Label,
    pub r: bool,
    pub s: Basis,
}

/// Independent per-pulse loss plus a symmetric outcome flip on matching-basis
/// measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct ChannelModel {
    p_loss: f64,
    p_err: f64,
}

#[derive(Serialize, Deserialize)]
struct RawChannel {
    #[serde(default)]
    p_loss: f64,
    #[serde(default)]
    p_err: f64,
}

impl TryFrom<RawChannel> for ChannelModel {
    type Error = Bb84Error;

    fn try_from(raw: RawChannel) -> Result<Self, Self::Error> {
        ChannelModel::new(raw.p_loss, raw.p_err)
    }
}

impl From<ChannelModel> for RawChannel {
    fn from(c: ChannelModel) -> Self {
        RawChannel {
            p_loss: c.p_loss,
            p_err: c.p_err,
        }
    }
}

impl ChannelModel {
    pub fn new(p_loss: f64, p_err: f64) -> Result<Self, Bb84Error> {
        if !(0.0..1.0).contains(&p_loss) {
            return Err(Bb84Error::BadLoss(p_loss));
        }
        if !(0.0..0.5).contains(&p_err) {
            return Err(Bb84Error::BadFlip(p_err));
        }
        Ok(ChannelModel { p_loss, p_err })
    }

    pub fn noiseless() -> Self {
        ChannelModel {
            p_loss: 0.0,
            p_err: 0.0,
        }
    }

    pub fn p_loss(&self) -> f64 {
        self.p_loss
    }

    pub fn p_err(&self) -> f64 {
        self.p_err
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::noiseless()
    }
}

/// One pulse per label, bits read from `r`, `s` in k-major order.
pub fn prepare_pulses(r: &BitString, s: &BitString, n: usize, m: usize) -> Result<Vec<PulseDescription>, Bb84Error> {
    let expected = n * m;
    if r.len() != expected || s.len() != expected {
        return Err(Bb84Error::LengthMismatch {
            expected,
            r: r.len(),
            s: s.len(),
        });
    }
    let pulses = (1..=m)
        .flat_map(|k| (1..=n).map(move |l| Label::new(k, l)))
        .zip(r.iter().zip(s.iter()))
        .map(|(label, (r, s))| PulseDescription {
            label,
            r,
            s: Basis::from_bit(s),
        })
        .collect();
    Ok(pulses)
}

/// Labels that survive the channel.
pub fn transmit<R: Rng + ?Sized>(pulses: &[PulseDescription], channel: &ChannelModel, rng: &mut R) -> BTreeSet<Label> {
    pulses
        .iter()
        .filter(|_| !rng.random_bool(channel.p_loss))
        .map(|p| p.label)
        .collect()
}

/// Honest BB84-basis measurement of a received pulse.
pub fn measure_bb84<R: Rng + ?Sized>(
    pulse: &PulseDescription,
    basis: Basis,
    channel: &ChannelModel,
    rng: &mut R,
) -> bool {
    if basis == pulse.s {
        pulse.r ^ rng.random_bool(channel.p_err)
    } else {
        rng.random::<bool>()
    }
}

/// Normalised single-qubit state `a0|0⟩ + a1|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    a0: Complex64,
    a1: Complex64,
}

const NORM_TOLERANCE: f64 = 1e-9;

impl QubitState {
    pub fn new(a0: Complex64, a1: Complex64) -> Result<Self, Bb84Error> {
        let norm = a0.norm_sqr() + a1.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Bb84Error::NotNormalised(norm));
        }
        Ok(QubitState { a0, a1 })
    }

    pub fn real(a0: f64, a1: f64) -> Result<Self, Bb84Error> {
        QubitState::new(Complex64::new(a0, 0.0), Complex64::new(a1, 0.0))
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.a0, self.a1)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }
}

pub fn statevector(pulse: &PulseDescription) -> QubitState {
    let (a0, a1) = match (pulse.r, pulse.s) {
        (false, Basis::Computational) => (1.0, 0.0),
        (true, Basis::Computational) => (0.0, 1.0),
        (false, Basis::Hadamard) => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (true, Basis::Hadamard) => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    };
    QubitState {
        a0: Complex64::new(a0, 0.0),
        a1: Complex64::new(a1, 0.0),
    }
}

/// Outcome probabilities `(p0, p1)` for the basis
/// `{cos θ|0⟩ + sin θ|1⟩, −sin θ|0⟩ + cos θ|1⟩}`.
pub fn projective_probabilities(state: &QubitState, theta: f64) -> (f64, f64) {
    let (c, s) = (theta.cos(), theta.sin());
    let amp0 = state.a0 * c + state.a1 * s;
    let amp1 = state.a0 * (-s) + state.a1 * c;
    (amp0.norm_sqr(), amp1.norm_sqr())
}

pub fn measure_projective<R: Rng + ?Sized>(state: &QubitState, theta: f64, rng: &mut R) -> Result<bool, Bb84Error> {
    if !(0.0..PI).contains(&theta) {
        return Err(Bb84Error::BadAngle(theta));
    }
    let (p0, _) = projective_probabilities(state, theta);
    Ok(!rng.random_bool(p0.clamp(0.0, 1.0)))
}
