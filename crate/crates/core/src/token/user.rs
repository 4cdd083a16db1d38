use crate::bits::BitString;
use crate::coordination::{CommitRecord, InstanceId};

use super::auth::{self, Authenticator, HmacKey};
use super::{PointId, SegmentRef, Token, TransferMessage, TransferPayload, UserId};

/// One precommitted coordination instance in a user's pool.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub commit: CommitRecord,
    pub setup_point: PointId,
    allocated: Vec<bool>,
}

impl PoolEntry {
    pub fn free_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.allocated
            .iter()
            .enumerate()
            .filter(|(_, a)| !**a)
            .map(|(i, _)| i + 1)
    }

    pub fn is_allocated(&self, position: usize) -> bool {
        self.allocated.get(position.wrapping_sub(1)).copied().unwrap_or(true)
    }
}

/// A user: identity, authentication key and precommitted pool.
#[derive(Debug, Clone)]
pub struct User {
    id: UserId,
    key: HmacKey,
    pool: Vec<PoolEntry>,
}

impl User {
    pub fn new(id: impl Into<UserId>, key: HmacKey) -> Self {
        User {
            id: id.into(),
            key,
            pool: Vec::new(),
        }
    }

    pub fn id(&self) -> &UserId {
        &self.id
    }

    pub fn key(&self) -> &HmacKey {
        &self.key
    }

    pub fn pool(&self) -> &[PoolEntry] {
        &self.pool
    }

    pub fn add_commitment(&mut self, commit: CommitRecord, setup_point: PointId) {
        let len = commit.x.len();
        self.pool.push(PoolEntry {
            commit,
            setup_point,
            allocated: vec![false; len],
        });
    }

    pub fn commitment(&self, instance: InstanceId) -> Option<&CommitRecord> {
        self.entry(instance).map(|e| &e.commit)
    }

    fn entry(&self, instance: InstanceId) -> Option<&PoolEntry> {
        self.pool.iter().find(|e| e.commit.instance == instance)
    }

    pub fn free_bits(&self) -> usize {
        self.pool.iter().map(|e| e.free_positions().count()).sum()
    }

    /// First `m` free positions of the first instance that has enough of them
    /// and whose setup point passes `usable`. Nothing is marked yet.
    pub(crate) fn reserve(&self, m: usize, mut usable: impl FnMut(&PointId) -> bool) -> Result<SegmentRef, usize> {
        let mut available = 0;
        for entry in &self.pool {
            if !usable(&entry.setup_point) {
                continue;
            }
            let free: Vec<usize> = entry.free_positions().take(m).collect();
            available = available.max(entry.free_positions().count());
            if free.len() == m {
                return Ok(SegmentRef {
                    instance: entry.commit.instance,
                    positions: free,
                });
            }
        }
        Err(available)
    }

    pub(crate) fn mark_allocated(&mut self, segment: &SegmentRef) {
        if let Some(entry) = self.pool.iter_mut().find(|e| e.commit.instance == segment.instance) {
            for &p in &segment.positions {
                if let Some(slot) = entry.allocated.get_mut(p - 1) {
                    *slot = true;
                }
            }
        }
    }

    /// The committed bits `x` behind a segment.
    pub fn segment_bits(&self, segment: &SegmentRef) -> Option<BitString> {
        let commit = self.commitment(segment.instance)?;
        let zero_based: Vec<usize> = segment.positions.iter().map(|p| p.wrapping_sub(1)).collect();
        commit.x.select(&zero_based)
    }

    /// Signed message handing `token` to `to` at `point`.
    pub fn sign_transfer(&self, token: &Token, to: &UserId, point: &PointId, memo: Option<String>) -> TransferMessage {
        let payload = TransferPayload {
            token: token.id,
            from: self.id.clone(),
            to: to.clone(),
            point: point.clone(),
            memo,
        };
        let signature = self.key.sign(&auth::canonical_bytes(&payload));
        TransferMessage { payload, signature }
    }
}
