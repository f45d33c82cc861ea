//! Alternative reproducible generators: linear congruential presets and an
//! iterated hash chain.

use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LcgParams {
    pub a: u64,
    pub b: u64,
    /// Up to 2^64 inclusive.
    pub modulus: u128,
    /// Right shift applied to emitted outputs.
    pub post_shift: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcgPreset {
    Minstd,
    /// Multiplier 16645 as listed in the source table; the usual
    /// Marsaglia constant is 69069.
    VaxMarsaglia,
    LavauxJenssens,
    Haynes,
    KnuthBorland,
}

impl LcgPreset {
    pub const ALL: [LcgPreset; 5] = [
        LcgPreset::Minstd,
        LcgPreset::VaxMarsaglia,
        LcgPreset::LavauxJenssens,
        LcgPreset::Haynes,
        LcgPreset::KnuthBorland,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LcgPreset::Minstd => "minstd",
            LcgPreset::VaxMarsaglia => "vax-marsaglia",
            LcgPreset::LavauxJenssens => "lavaux-jenssens",
            LcgPreset::Haynes => "haynes",
            LcgPreset::KnuthBorland => "knuth-borland",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn params(self) -> LcgParams {
        let (a, b, modulus, post_shift) = match self {
            LcgPreset::Minstd => (16_807, 0, (1u128 << 31) - 1, 0),
            LcgPreset::VaxMarsaglia => (16_645, 0, 1u128 << 32, 0),
            LcgPreset::LavauxJenssens => (31_167_285, 0, 1u128 << 48, 0),
            LcgPreset::Haynes => (6_364_136_223_846_793_005, 0, 1u128 << 64, 0),
            LcgPreset::KnuthBorland => (22_695_477, 1, 1u128 << 32, 16),
        };
        LcgParams { a, b, modulus, post_shift }
    }
}

/// `(a * x + b) mod N`, exact for any modulus up to 2^64.
pub fn lcg_next(x: u64, p: &LcgParams) -> u64 {
    ((p.a as u128 * x as u128 + p.b as u128) % p.modulus) as u64
}

/// State after `n` steps from `x`, by squaring the affine step map.
pub fn lcg_jump(x: u64, p: &LcgParams, mut n: u64) -> u64 {
    let m = p.modulus;
    // (mul, add) accumulates the composed map; (a, b) is the step map squared
    let (mut mul, mut add) = (1u128 % m, 0u128);
    let (mut a, mut b) = (p.a as u128 % m, p.b as u128 % m);
    while n > 0 {
        if n & 1 == 1 {
            mul = mul * a % m;
            add = (add * a + b) % m;
        }
        b = (a * b + b) % m;
        a = a * a % m;
        n >>= 1;
    }
    ((mul * x as u128 + add) % m) as u64
}

/// Iterator over emitted outputs (`state >> post_shift`) after each step.
#[derive(Debug, Clone)]
pub struct Lcg {
    params: LcgParams,
    state: u64,
}

impl Lcg {
    pub fn new(params: LcgParams, seed: u64) -> Self {
        Lcg { params, state: (seed as u128 % params.modulus) as u64 }
    }

    pub fn state(&self) -> u64 {
        self.state
    }
}

impl Iterator for Lcg {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        self.state = lcg_next(self.state, &self.params);
        Some(self.state >> self.params.post_shift)
    }
}

/// Iterations per chain element are capped at this value.
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashId {
    /// FNV-1a 64 over the message; test use only.
    Toy,
    Sha256,
}

impl HashId {
    pub fn output_bytes(self) -> usize {
        match self {
            HashId::Toy => 8,
            HashId::Sha256 => 32,
        }
    }

    pub fn digest(self, msg: &[u8]) -> Vec<u8> {
        match self {
            HashId::Toy => toy_hash(msg).to_be_bytes().to_vec(),
            HashId::Sha256 => Sha256::digest(msg).to_vec(),
        }
    }
}

pub fn toy_hash(msg: &[u8]) -> u64 {
    msg.iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashChainSpec {
    pub hash: HashId,
    /// Message (input) width in bytes.
    pub m_bytes: usize,
    /// Element (output) width in bits; a multiple of 8.
    pub n_bits: u32,
    /// `m_bytes` long.
    pub iv: Vec<u8>,
    pub padding_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HashChainError {
    #[error("output width {0} bits must be a positive multiple of 8 within the hash output")]
    OutputWidth(u32),
    #[error("message width must exceed the output width plus one length byte")]
    MessageWidth,
    #[error("IV must be exactly {expected} bytes, got {got}")]
    IvLength { expected: usize, got: usize },
}

/// Sequence `e0 = H(IV)`, `e1 = F^|d0|(e0)`, `e(k+1) = F^|e(k)|(e(k))`,
/// where `F(v) = H(v || padding || |v|)` truncated to the leading `n` bits
/// and `|.|` is a byte length. The padding is drawn once at construction.
#[derive(Debug, Clone)]
pub struct HashChain {
    spec: HashChainSpec,
    padding: Vec<u8>,
    current: Option<Vec<u8>>,
    next_count: usize,
    capped: bool,
}

pub fn hash_chain(spec: &HashChainSpec, d0: &[u8]) -> Result<HashChain, HashChainError> {
    let n = spec.n_bits as usize / 8;
    if spec.n_bits == 0 || spec.n_bits % 8 != 0 || n > spec.hash.output_bytes() || n > 255 {
        return Err(HashChainError::OutputWidth(spec.n_bits));
    }
    if spec.m_bytes < n + 2 {
        return Err(HashChainError::MessageWidth);
    }
    if spec.iv.len() != spec.m_bytes {
        return Err(HashChainError::IvLength { expected: spec.m_bytes, got: spec.iv.len() });
    }
    let mut padding = vec![0u8; spec.m_bytes - n - 1];
    ChaCha8Rng::seed_from_u64(spec.padding_seed).fill_bytes(&mut padding);
    let (next_count, capped) = cap(d0.len());
    Ok(HashChain { spec: spec.clone(), padding, current: None, next_count, capped })
}

fn cap(count: usize) -> (usize, bool) {
    (count.min(MAX_ITERATIONS), count > MAX_ITERATIONS)
}

impl HashChain {
    fn truncate(&self, mut digest: Vec<u8>) -> Vec<u8> {
        digest.truncate(self.spec.n_bits as usize / 8);
        digest
    }

    /// One application of the framed hash.
    pub fn step(&self, v: &[u8]) -> Vec<u8> {
        let mut msg = Vec::with_capacity(self.spec.m_bytes);
        msg.extend_from_slice(v);
        msg.extend_from_slice(&self.padding);
        msg.push(v.len() as u8);
        self.truncate(self.spec.hash.digest(&msg))
    }

    pub fn padding(&self) -> &[u8] {
        &self.padding
    }

    /// True once any element needed more than [`MAX_ITERATIONS`] hashes.
    pub fn capped(&self) -> bool {
        self.capped
    }
}

impl Iterator for HashChain {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        let next = match self.current.take() {
            None => self.truncate(self.spec.hash.digest(&self.spec.iv)),
            Some(prev) => {
                let mut v = prev;
                for _ in 0..self.next_count {
                    v = self.step(&v);
                }
                let (count, capped) = cap(v.len());
                self.next_count = count;
                self.capped |= capped;
                v
            }
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minstd_first_step() {
        assert_eq!(lcg_next(1, &LcgPreset::Minstd.params()), 16_807);
    }

    #[test]
    fn jump_matches_stepping() {
        for preset in LcgPreset::ALL {
            let p = preset.params();
            let mut x = (987_654_321u128 % p.modulus) as u64;
            let start = x;
            for n in 1..200u64 {
                x = lcg_next(x, &p);
                assert_eq!(lcg_jump(start, &p, n), x, "{} after {n}", preset.name());
            }
        }
    }

    #[test]
    fn minstd_period_divides_group_order() {
        let p = LcgPreset::Minstd.params();
        assert_eq!(lcg_jump(1, &p, (1 << 31) - 2), 1);
    }

    #[test]
    fn knuth_borland_shift() {
        let mut g = Lcg::new(LcgPreset::KnuthBorland.params(), 0);
        assert_eq!(g.next(), Some(0));
        assert_eq!(g.state(), 1);
    }

    #[test]
    fn state_stays_below_modulus() {
        for preset in LcgPreset::ALL {
            let p = preset.params();
            let mut g = Lcg::new(p, 12345);
            for _ in 0..1000 {
                g.next();
                assert!((g.state() as u128) < p.modulus);
            }
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in LcgPreset::ALL {
            assert_eq!(LcgPreset::from_name(p.name()), Some(p));
        }
        assert_eq!(LcgPreset::VaxMarsaglia.params().a, 16_645);
    }

    fn toy_spec() -> HashChainSpec {
        HashChainSpec { hash: HashId::Toy, m_bytes: 12, n_bits: 32, iv: vec![7; 12], padding_seed: 3 }
    }

    #[test]
    fn chain_validation() {
        let mut s = toy_spec();
        s.n_bits = 12;
        assert!(matches!(hash_chain(&s, b""), Err(HashChainError::OutputWidth(12))));
        let mut s = toy_spec();
        s.m_bytes = 5;
        s.iv = vec![0; 5];
        assert_eq!(hash_chain(&s, b"").unwrap_err(), HashChainError::MessageWidth);
        let mut s = toy_spec();
        s.iv = vec![0; 3];
        assert!(matches!(hash_chain(&s, b""), Err(HashChainError::IvLength { .. })));
    }

    #[test]
    fn chain_is_deterministic() {
        let a: Vec<_> = hash_chain(&toy_spec(), b"data").unwrap().take(5).collect();
        let b: Vec<_> = hash_chain(&toy_spec(), b"data").unwrap().take(5).collect();
        assert_eq!(a, b);
        assert_eq!(a[0], toy_hash(&[7; 12]).to_be_bytes()[..4]);
    }

    #[test]
    fn sha256_chain_runs() {
        let spec = HashChainSpec {
            hash: HashId::Sha256,
            m_bytes: 64,
            n_bits: 128,
            iv: vec![0; 64],
            padding_seed: 1,
        };
        let v: Vec<_> = hash_chain(&spec, b"abc").unwrap().take(3).collect();
        assert_eq!(v[0], Sha256::digest([0u8; 64])[..16]);
        assert!(v.iter().all(|e| e.len() == 16));
    }
}
