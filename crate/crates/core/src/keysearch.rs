//! Preimage search: every key whose keystream equals a target chunk.
//!
//! Whenever two register outputs agree the majority output is forced, and
//! whenever they differ it equals the third register's output. Both attacks
//! below exploit this: guessing registers turns the rest of the problem
//! into linear algebra over GF(2).

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cipher::{sco, Chunk, CipherKey, CipherSpec};
use crate::entropy::byte_entropy;
use crate::gf2::Echelon;

/// Largest key length accepted by [`brute_force_keys`].
pub const MAX_BRUTE_FORCE_BITS: u32 = 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("{bits}-bit key space too large for exhaustive enumeration (max {max})")]
    TooLarge { bits: u32, max: u32 },
    #[error("invalid slice {index}/{total}")]
    BadSlice { index: u64, total: u64 },
}

/// All keys found for one target chunk, ascending and distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPool {
    pub target: Chunk,
    pub spec_id: String,
    keys: Vec<CipherKey>,
}

impl KeyPool {
    pub fn new(target: Chunk, spec_id: impl Into<String>, mut keys: Vec<CipherKey>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        KeyPool { target, spec_id: spec_id.into(), keys }
    }

    pub fn keys(&self) -> &[CipherKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// True when every key re-encodes to the target.
    pub fn verify(&self, spec: &CipherSpec) -> bool {
        self.keys.iter().all(|&k| k.is_valid_for(spec) && sco(k, spec) == self.target)
    }

    /// At most `max` keys chosen uniformly without replacement, seeded.
    pub fn subsample(mut self, max: usize, seed: u64) -> KeyPool {
        if self.keys.len() > max {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.target.0);
            self.keys.partial_shuffle(&mut rng, max);
            self.keys.truncate(max);
            self.keys.sort_unstable();
        }
        self
    }

    /// Union with another pool for the same target.
    pub fn merge(mut self, other: KeyPool) -> KeyPool {
        debug_assert_eq!(self.target, other.target);
        self.keys.extend(other.keys);
        KeyPool::new(self.target, self.spec_id, self.keys)
    }
}

/// Slice `index` of `total` equal, disjoint parts of a guess space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slice {
    index: u64,
    total: u64,
}

impl Slice {
    pub const FULL: Slice = Slice { index: 0, total: 1 };

    pub fn new(index: u64, total: u64) -> Result<Self, SearchError> {
        if total == 0 || index >= total {
            return Err(SearchError::BadSlice { index, total });
        }
        Ok(Slice { index, total })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Half-open range of guesses covered in a space of `space` guesses.
    pub fn range(&self, space: u64) -> core::ops::Range<u64> {
        let at = |i: u64| ((space as u128 * i as u128) / self.total as u128) as u64;
        at(self.index)..at(self.index + 1)
    }

    /// The slice of `total` containing guess `guess`.
    pub fn containing(guess: u64, space: u64, total: u64) -> Result<Self, SearchError> {
        if guess >= space {
            return Err(SearchError::BadSlice { index: guess, total });
        }
        let mut index = ((guess as u128 * total as u128) / space as u128) as u64;
        while Slice::new(index, total)?.range(space).end <= guess {
            index += 1;
        }
        Slice::new(index, total)
    }
}

/// How much of the `(r1, r2)` guess space [`attack_keys`] examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    pub max_guesses: Option<u64>,
    pub partition: Slice,
}

impl SearchBudget {
    pub fn full() -> Self {
        SearchBudget { max_guesses: None, partition: Slice::FULL }
    }

    pub fn slice(partition: Slice) -> Self {
        SearchBudget { max_guesses: None, partition }
    }
}

/// Size of the `(r1, r2)` guess space: `2^(d1 + d2)`.
///
/// Guess `g` stands for `r1 = g mod 2^d1`, `r2 = g >> d1`, so a key's guess
/// index is simply its low `d1 + d2` bits.
pub fn pair_guess_space(spec: &CipherSpec) -> u64 {
    let [d1, d2, _] = spec.degrees();
    1u64 << (d1 + d2)
}

/// Exhaustive enumeration of the whole key space.
pub fn brute_force_keys(target: Chunk, spec: &CipherSpec) -> Result<KeyPool, SearchError> {
    let bits = spec.key_bits();
    if bits > MAX_BRUTE_FORCE_BITS {
        return Err(SearchError::TooLarge { bits, max: MAX_BRUTE_FORCE_BITS });
    }
    let keys = (0..1u64 << bits)
        .map(CipherKey)
        .filter(|&k| sco(k, spec) == target)
        .collect();
    Ok(KeyPool::new(target, spec.id(), keys))
}

#[inline]
fn target_bit(target: Chunk, n: u32, t: usize) -> u8 {
    (target.0 >> (n as usize - 1 - t) & 1) as u8
}

#[inline]
fn parity(x: u64) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Guess `(r1, r2)`, solve for `r3`.
///
/// Steps where R1 and R2 agree are checked against the target in order and
/// abort the guess on the first mismatch; steps where they differ each
/// contribute one linear equation on R3's initial state.
pub fn attack_keys(target: Chunk, spec: &CipherSpec, budget: SearchBudget) -> KeyPool {
    let [reg1, reg2, reg3] = *spec.registers();
    let d1 = reg1.degree();
    let n = spec.chunk_bits();
    let forms3 = reg3.output_linear_forms(n as usize);
    let mut range = budget.partition.range(pair_guess_space(spec));
    if let Some(max) = budget.max_guesses {
        range.end = range.end.min(range.start.saturating_add(max));
    }

    let mut keys = Vec::new();
    'guess: for g in range {
        let r1 = g & reg1.state_mask();
        let r2 = g >> d1;
        let (mut s1, mut s2) = (r1, r2);
        let mut ech = Echelon::new(reg3.degree());
        for (t, &form) in forms3.iter().enumerate() {
            let (n1, a) = reg1.step(s1);
            let (n2, b) = reg2.step(s2);
            s1 = n1;
            s2 = n2;
            let z = target_bit(target, n, t);
            if a == b {
                if a != z {
                    continue 'guess;
                }
            } else if ech.insert(form, z == 1).is_err() {
                continue 'guess;
            }
        }
        let sol = ech.solve();
        keys.extend(sol.iter().map(|r3| CipherKey::from_parts([r1, r2, r3], spec)));
    }
    KeyPool::new(target, spec.id(), keys)
}

/// Guess `r1` only, solve for `r2` and `r3`.
///
/// Where R1 disagrees with the target bit both other registers must produce
/// the target bit, giving one equation on each. For every surviving `r2`,
/// steps where R1 matches but R2 does not force R3 to match. Searches the
/// slice of the `2^d1` guesses for `r1` and returns the same set as
/// [`attack_keys`] over the matching keys, in `2^d1` rather than
/// `2^(d1 + d2)` guesses.
pub fn attack_keys_by_r1(target: Chunk, spec: &CipherSpec, partition: Slice) -> KeyPool {
    let [reg1, reg2, reg3] = *spec.registers();
    let n = spec.chunk_bits() as usize;
    let forms2 = reg2.output_linear_forms(n);
    let forms3 = reg3.output_linear_forms(n);
    let zbits: Vec<u8> = (0..n).map(|t| target_bit(target, n as u32, t)).collect();

    let mut keys = Vec::new();
    let mut agree = Vec::with_capacity(n);
    'guess: for r1 in partition.range(1u64 << reg1.degree()) {
        let mut ech2 = Echelon::new(reg2.degree());
        let mut ech3 = Echelon::new(reg3.degree());
        agree.clear();
        let mut s1 = r1;
        for t in 0..n {
            let (next, a) = reg1.step(s1);
            s1 = next;
            let z = zbits[t];
            if a == z {
                agree.push(t);
            } else if ech2.insert(forms2[t], z == 1).is_err()
                || ech3.insert(forms3[t], z == 1).is_err()
            {
                continue 'guess;
            }
        }
        let sol2 = ech2.solve();
        'r2: for r2 in sol2.iter() {
            let mut ech = ech3.clone();
            for &t in &agree {
                let z = zbits[t];
                if parity(forms2[t] & r2) != z && ech.insert(forms3[t], z == 1).is_err() {
                    continue 'r2;
                }
            }
            let sol3 = ech.solve();
            keys.extend(sol3.iter().map(|r3| CipherKey::from_parts([r1, r2, r3], spec)));
        }
    }
    KeyPool::new(target, spec.id(), keys)
}

/// Keeps keys whose serialized byte entropy is within `tolerance` bits per
/// byte of the target chunk's. Keys and chunks are measured as 8-byte
/// little-endian words.
pub fn filter_keys_entropy(pool: &KeyPool, tolerance: f64) -> KeyPool {
    let reference = byte_entropy(&pool.target.0.to_le_bytes()).unwrap_or(0.0);
    let keys = pool
        .keys
        .iter()
        .copied()
        .filter(|k| {
            let h = byte_entropy(&k.0.to_le_bytes()).unwrap_or(0.0);
            libm::fabs(h - reference) <= tolerance
        })
        .collect();
    KeyPool::new(pool.target, pool.spec_id.clone(), keys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_keeps_a_seeded_subset() {
        let keys: Vec<_> = (0..100).map(CipherKey).collect();
        let pool = KeyPool::new(Chunk(9), "x", keys);
        let a = pool.clone().subsample(10, 1);
        assert_eq!(a.len(), 10);
        assert!(a.keys().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, pool.clone().subsample(10, 1));
        assert_ne!(a, pool.clone().subsample(10, 2));
        assert_eq!(pool.clone().subsample(500, 1), pool);
    }

    #[test]
    fn slices_cover_space() {
        for total in [1u64, 3, 7, 64] {
            let mut next = 0;
            for i in 0..total {
                let r = Slice::new(i, total).unwrap().range(1000);
                assert_eq!(r.start, next);
                next = r.end;
            }
            assert_eq!(next, 1000);
        }
        assert!(Slice::new(3, 3).is_err());
        assert!(Slice::new(0, 0).is_err());
    }

    #[test]
    fn brute_force_contains_generator() {
        let spec = CipherSpec::scaled_234();
        for k in [0x1FFu64, 0x0A5, 0x13C] {
            let key = CipherKey(k);
            let pool = brute_force_keys(sco(key, &spec), &spec).unwrap();
            assert!(pool.keys().contains(&key));
        }
    }

    #[test]
    fn brute_force_zero_target_contains_double_zero_keys() {
        let spec = CipherSpec::scaled_234();
        let pool = brute_force_keys(Chunk(0), &spec).unwrap();
        for k in 0..1u64 << 9 {
            let parts = CipherKey(k).parts(&spec);
            if parts.iter().filter(|&&p| p == 0).count() >= 2 {
                assert!(pool.keys().contains(&CipherKey(k)));
            }
        }
    }

    #[test]
    fn brute_force_rejects_wide_spec() {
        let err = brute_force_keys(Chunk(0), &CipherSpec::default_59()).unwrap_err();
        assert_eq!(err, SearchError::TooLarge { bits: 59, max: MAX_BRUTE_FORCE_BITS });
    }

    #[test]
    fn zero_target_zero_guess_is_unconstrained() {
        let spec = CipherSpec::scaled_579();
        let budget = SearchBudget { max_guesses: Some(1), partition: Slice::FULL };
        let pool = attack_keys(Chunk(0), &spec, budget);
        assert_eq!(pool.len(), 1 << 9);
    }

    #[test]
    fn attacks_agree_with_brute_force_on_toy_spec() {
        let spec = CipherSpec::scaled_234();
        for k in 0..1u64 << 9 {
            let target = sco(CipherKey(k), &spec);
            let brute = brute_force_keys(target, &spec).unwrap();
            assert_eq!(attack_keys(target, &spec, SearchBudget::full()), brute);
            assert_eq!(attack_keys_by_r1(target, &spec, Slice::FULL), brute);
        }
    }

    #[test]
    fn entropy_filter_bounds() {
        let spec = CipherSpec::scaled_579();
        let target = sco(CipherKey(0x15_5555), &spec);
        let pool = brute_force_keys(target, &spec).unwrap();
        assert_eq!(filter_keys_entropy(&pool, 8.0), pool);
        let single = KeyPool::new(Chunk(0x0102), "x", alloc::vec![CipherKey(0x0201)]);
        assert_eq!(filter_keys_entropy(&single, 0.0), single);
        let drop = KeyPool::new(Chunk(0), "x", alloc::vec![CipherKey(0x0807_0605_0403_0201)]);
        assert!(filter_keys_entropy(&drop, 0.5).is_empty());
    }
}
