//! Minkowski spacetime events and causal order.
//!
//! Units have the speed of light equal to one. Protocol sites are modelled as
//! points; an event `a` causally precedes `b` (`a ⪯ b`) when a signal at or
//! below light speed can travel from `a` to `b`. The relation is reflexive and
//! includes the light cone itself.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute slack applied to the light-cone inequality.
pub const LIGHT_CONE_SLACK: f64 = 1e-9;

/// Largest supported spatial dimension.
pub const MAX_SPATIAL_DIMENSION: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpacetimeError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("spatial dimension must be 1..=3, got {0}")]
    BadDimension(usize),
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("boost velocity must satisfy |v| < 1, got {0}")]
    Superluminal(f64),
    #[error("boosts are only defined for one spatial dimension, got {0}")]
    BoostDimension(usize),
    #[error("empty set of target events")]
    EmptyTargets,
    #[error("duplicate point identifier {0:?}")]
    DuplicatePoint(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
}

/// A spacetime event `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    t: f64,
    x: Vec<f64>,
}

impl Event {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self, SpacetimeError> {
        if x.is_empty() || x.len() > MAX_SPATIAL_DIMENSION {
            return Err(SpacetimeError::BadDimension(x.len()));
        }
        if !t.is_finite() || x.iter().any(|c| !c.is_finite()) {
            return Err(SpacetimeError::NonFinite);
        }
        Ok(Event { t, x })
    }

    /// Event in 1+1 dimensions.
    pub fn at(t: f64, x: f64) -> Self {
        Event::new(t, vec![x]).expect("finite 1+1 event")
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// `t² − |x|²` relative to the origin.
    pub fn interval(&self) -> f64 {
        self.t * self.t - self.x.iter().map(|c| c * c).sum::<f64>()
    }

    /// `[t, x...]`, the on-disk form.
    pub fn coordinates(&self) -> Vec<f64> {
        std::iter::once(self.t).chain(self.x.iter().copied()).collect()
    }

    pub fn from_coordinates(coords: &[f64]) -> Result<Self, SpacetimeError> {
        match coords.split_first() {
            Some((&t, x)) => Event::new(t, x.to_vec()),
            None => Err(SpacetimeError::BadDimension(0)),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}", self.t)?;
        for c in &self.x {
            write!(f, ", {c}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coordinates().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        Event::from_coordinates(&coords).map_err(serde::de::Error::custom)
    }
}

/// `a ⪯ b`: `t_b ≥ t_a` and `|x_b − x_a| ≤ t_b − t_a`, up to [`LIGHT_CONE_SLACK`].
pub fn causal_precedes(a: &Event, b: &Event) -> Result<bool, SpacetimeError> {
    if a.dimension() != b.dimension() {
        return Err(SpacetimeError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let dt = b.t - a.t;
    let dist = a.x.iter().zip(&b.x).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
    Ok(dt >= -LIGHT_CONE_SLACK && dist <= dt + LIGHT_CONE_SLACK)
}

/// Whether `p` lies in the intersection of the causal pasts of all `qs`.
pub fn in_common_causal_past<'a, I>(p: &Event, qs: I) -> Result<bool, SpacetimeError>
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut any = false;
    for q in qs {
        any = true;
        if !causal_precedes(p, q)? {
            return Ok(false);
        }
    }
    if any {
        Ok(true)
    } else {
        Err(SpacetimeError::EmptyTargets)
    }
}

/// Lorentz boost along x with velocity `v` (1+1 dimensions only).
pub fn boost(e: &Event, v: f64) -> Result<Event, SpacetimeError> {
    if v.is_nan() || v.abs() >= 1.0 {
        return Err(SpacetimeError::Superluminal(v));
    }
    if e.dimension() != 1 {
        return Err(SpacetimeError::BoostDimension(e.dimension()));
    }
    let gamma = 1.0 / (1.0 - v * v).sqrt();
    let (t, x) = (e.t, e.x[0]);
    Event::new(gamma * (t - v * x), vec![gamma * (x - v * t)])
}

/// Named protocol points sharing one spatial dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout", into = "RawLayout")]
pub struct NetworkLayout {
    dimension: usize,
    points: BTreeMap<String, Event>,
}

#[derive(Serialize, Deserialize)]
struct RawLayout {
    dimension: usize,
    points: BTreeMap<String, Event>,
}

impl TryFrom<RawLayout> for NetworkLayout {
    type Error = SpacetimeError;

    fn try_from(raw: RawLayout) -> Result<Self, Self::Error> {
        let mut layout = NetworkLayout::new(raw.dimension)?;
        for (name, event) in raw.points {
            layout.insert(name, event)?;
        }
        Ok(layout)
    }
}

impl From<NetworkLayout> for RawLayout {
    fn from(layout: NetworkLayout) -> Self {
        RawLayout {
            dimension: layout.dimension,
            points: layout.points,
        }
    }
}

impl NetworkLayout {
    pub fn new(dimension: usize) -> Result<Self, SpacetimeError> {
        if dimension == 0 || dimension > MAX_SPATIAL_DIMENSION {
            return Err(SpacetimeError::BadDimension(dimension));
        }
        Ok(NetworkLayout {
            dimension,
            points: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, name: impl Into<String>, event: Event) -> Result<(), SpacetimeError> {
        let name = name.into();
        if event.dimension() != self.dimension {
            return Err(SpacetimeError::DimensionMismatch(self.dimension, event.dimension()));
        }
        if self.points.contains_key(&name) {
            return Err(SpacetimeError::DuplicatePoint(name));
        }
        self.points.insert(name, event);
        Ok(())
    }

    /// Builder-style insert.
    pub fn with(mut self, name: impl Into<String>, event: Event) -> Result<Self, SpacetimeError> {
        self.insert(name, event)?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, name: &str) -> Option<&Event> {
        self.points.get(name)
    }

    pub fn event(&self, name: &str) -> Result<&Event, SpacetimeError> {
        self.get(name)
            .ok_or_else(|| SpacetimeError::UnknownPoint(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.points.contains_key(name)
    }

    pub fn points(&self) -> impl Iterator<Item = (&str, &Event)> {
        self.points.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `causal_precedes` on named points.
    pub fn precedes(&self, a: &str, b: &str) -> Result<bool, SpacetimeError> {
        causal_precedes(self.event(a)?, self.event(b)?)
    }
}
