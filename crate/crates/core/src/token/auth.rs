//! Message authentication for transfer messages.
//!
//! The reference scheme is HMAC-SHA256 with per-user keys shared with the
//! issuer over its authenticated links. Anything implementing
//! [`Authenticator`] can stand in for it.

use std::fmt;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

type HmacSha256 = Hmac<Sha256>;

/// Authentication tag over a payload.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tag(pub Vec<u8>);

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({})", hex::encode(&self.0))
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map(Tag).map_err(serde::de::Error::custom)
    }
}

pub trait Authenticator {
    fn sign(&self, payload: &[u8]) -> Tag;
    fn verify(&self, payload: &[u8], tag: &Tag) -> bool;
}

#[derive(Clone, PartialEq, Eq)]
pub struct HmacKey([u8; 32]);

impl fmt::Debug for HmacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HmacKey(..)")
    }
}

impl HmacKey {
    pub fn new(bytes: [u8; 32]) -> Self {
        HmacKey(bytes)
    }

    /// Deterministic key for simulations: `SHA-256(domain ‖ seed ‖ name)`.
    pub fn derive(seed: u64, name: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"smoney/user-key/v1");
        h.update(seed.to_le_bytes());
        h.update(name.as_bytes());
        HmacKey(h.finalize().into())
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        let bytes = hex::decode(s).map_err(|e| e.to_string())?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| format!("key must be 32 bytes, got {}", b.len()))?;
        Ok(HmacKey(arr))
    }
}

impl Authenticator for HmacKey {
    fn sign(&self, payload: &[u8]) -> Tag {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        mac.update(payload);
        Tag(mac.finalize().into_bytes().to_vec())
    }

    fn verify(&self, payload: &[u8], tag: &Tag) -> bool {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("HMAC accepts any key length");
        mac.update(payload);
        mac.verify_slice(&tag.0).is_ok()
    }
}

pub fn sign<A: Authenticator + ?Sized>(key: &A, payload: &[u8]) -> Tag {
    key.sign(payload)
}

pub fn verify<A: Authenticator + ?Sized>(key: &A, payload: &[u8], tag: &Tag) -> bool {
    key.verify(payload, tag)
}

/// Canonical byte encoding of a message (compact JSON, fixed field order).
pub fn canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("protocol messages serialize to JSON")
}

/// Hex SHA-256 of the canonical encoding.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_bytes(value)))
}
