//! Polymorphic variants: per-position key pools, the size of the variant
//! space, and seeded resampling of protected blobs.

use alloc::vec::Vec;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cipher::{sco, Chunk, CipherKey, CipherSpec};
use crate::keysearch::KeyPool;
use crate::packer::{KeySource, ProtectedBlob};

/// Uniform index in `0..n` for chunk `position`, from a counter-based stream:
/// the same `(seed, position)` always picks the same index.
pub fn pick_index(seed: u64, position: usize, n: usize) -> usize {
    assert!(n > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(position as u64);
    rng.random_range(0..n)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("pool set is empty")]
    NoPools,
    #[error("pool for chunk {0} is empty")]
    EmptyPool(usize),
    #[error("no pool covers chunk {0}")]
    Uncovered(usize),
    #[error("pool {position} targets {pool} but the blob's chunk is {blob}")]
    TargetMismatch { position: usize, pool: Chunk, blob: Chunk },
}

/// Key pools for chunk positions `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PoolSet {
    entries: Vec<KeyPool>,
}

impl PoolSet {
    pub fn new(entries: Vec<KeyPool>) -> Result<Self, MutationError> {
        if let Some(i) = entries.iter().position(KeyPool::is_empty) {
            return Err(MutationError::EmptyPool(i));
        }
        Ok(PoolSet { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, position: usize) -> Option<&KeyPool> {
        self.entries.get(position)
    }

    pub fn pools(&self) -> &[KeyPool] {
        &self.entries
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.entries.iter().map(|p| p.len() as u64).collect()
    }
}

impl KeySource for PoolSet {
    fn candidates(&mut self, position: usize, chunk: Chunk) -> Option<Vec<CipherKey>> {
        self.get(position).filter(|p| p.target == chunk).map(|p| p.keys().to_vec())
    }

    fn fixed_chunk(&self, position: usize) -> Option<Chunk> {
        self.get(position).map(|p| p.target)
    }
}

/// Exact size of a variant space, with its base-2 logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantCount {
    pub exact: BigUint,
    pub log2: f64,
}

pub fn count_variant_sizes(sizes: &[u64]) -> Result<VariantCount, MutationError> {
    if sizes.is_empty() {
        return Err(MutationError::NoPools);
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(MutationError::EmptyPool(i));
    }
    let exact = sizes.iter().fold(BigUint::from(1u32), |acc, &s| acc * s);
    let log2 = sizes.iter().map(|&s| libm::log2(s as f64)).sum();
    Ok(VariantCount { exact, log2 })
}

pub fn count_variants(pools: &PoolSet) -> Result<VariantCount, MutationError> {
    count_variant_sizes(&pools.sizes())
}

/// One key per pool, each chosen independently and uniformly.
pub fn sample_variant(pools: &PoolSet, seed: u64) -> Vec<CipherKey> {
    pools
        .entries
        .iter()
        .enumerate()
        .map(|(i, p)| p.keys()[pick_index(seed, i, p.len())])
        .collect()
}

/// Resamples every key of `blob` from `pools`. The pools must cover each
/// chunk position and target the chunk the existing key decodes to.
pub fn mutate_blob(
    blob: &ProtectedBlob,
    pools: &PoolSet,
    spec: &CipherSpec,
    seed: u64,
) -> Result<ProtectedBlob, MutationError> {
    for (position, &key) in blob.keys.iter().enumerate() {
        let pool = pools.get(position).ok_or(MutationError::Uncovered(position))?;
        let chunk = sco(CipherKey(key), spec);
        if pool.target != chunk {
            return Err(MutationError::TargetMismatch { position, pool: pool.target, blob: chunk });
        }
    }
    let keys = sample_variant(pools, seed).into_iter().take(blob.keys.len()).map(|k| k.0).collect();
    Ok(ProtectedBlob { keys, ..blob.clone() })
}
