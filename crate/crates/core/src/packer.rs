//! Codecs between bytecode words and 59-bit chunks, and whole-program
//! protect/reveal on top of key sources and a decode oracle.
//!
//! Concatenated mode packs the five words of one instruction into three
//! chunks (160 of 177 bits used, M1's top 17 bits are zero padding). Direct
//! mode spends one chunk per word and fills the bits above 32 with noise.

use alloc::string::String;
use alloc::vec::Vec;
use core::convert::Infallible;

use thiserror::Error;

use crate::cipher::{sco, Chunk, CipherKey, CipherSpec};
use crate::keysearch::{attack_keys_by_r1, KeyPool, Slice};
use crate::mutation::pick_index;

/// Chunk width of the concatenated layout.
pub const CONCAT_CHUNK_BITS: u32 = 59;
const M1_PAYLOAD_BITS: u32 = 42;
const MASK32: u64 = 0xFFFF_FFFF;

/// The five words of one encoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WordGroup(pub [u32; 5]);

pub fn pack_concat(g: &WordGroup) -> [Chunk; 3] {
    let [x1, x2, x3, x4, x5] = g.0.map(u64::from);
    let m1 = x1 << 10 | x2 >> 22;
    let m2 = (x2 & 0x3F_FFFF) << 37 | x3 << 5 | x4 >> 27;
    let m3 = (x4 & 0x7FF_FFFF) << 32 | x5;
    [Chunk(m1), Chunk(m2), Chunk(m3)]
}

pub fn unpack_concat(m: [Chunk; 3]) -> Result<WordGroup, PackError> {
    let [m1, m2, m3] = m.map(|c| c.0);
    let wide = (1u64 << CONCAT_CHUNK_BITS) - 1;
    if m1 >> M1_PAYLOAD_BITS != 0 || m2 & !wide != 0 || m3 & !wide != 0 {
        return Err(PackError::Padding(Chunk(m1)));
    }
    Ok(WordGroup([
        (m1 >> 10 & MASK32) as u32,
        ((m2 >> 37 | m1 << 22) & MASK32) as u32,
        (m2 >> 5 & MASK32) as u32,
        ((m3 >> 32 | m2 << 27) & MASK32) as u32,
        (m3 & MASK32) as u32,
    ]))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One word in the low 32 bits of a `chunk_bits`-wide chunk, noise above.
pub fn pack_direct_bits(x: u32, noise_seed: u64, chunk_bits: u32) -> Chunk {
    debug_assert!((32..=63).contains(&chunk_bits));
    let noise_mask = (1u64 << (chunk_bits - 32)) - 1;
    Chunk((splitmix64(noise_seed) & noise_mask) << 32 | x as u64)
}

pub fn pack_direct(x: u32, noise_seed: u64) -> Chunk {
    pack_direct_bits(x, noise_seed, CONCAT_CHUNK_BITS)
}

pub fn unpack_direct(m: Chunk) -> u32 {
    (m.0 & MASK32) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PackMode {
    Concat,
    Direct,
}

impl PackMode {
    pub fn byte(self) -> u8 {
        match self {
            PackMode::Concat => 0x01,
            PackMode::Direct => 0x02,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(PackMode::Concat),
            0x02 => Some(PackMode::Direct),
            _ => None,
        }
    }

    /// Chunks (and keys) per five-word instruction.
    pub fn chunks_per_instr(self) -> usize {
        match self {
            PackMode::Concat => 3,
            PackMode::Direct => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackError {
    #[error("chunk {0} has nonzero padding bits")]
    Padding(Chunk),
    #[error("word count {0} is not a multiple of 5")]
    WordCount(usize),
    #[error("{mode:?} mode cannot use {bits}-bit chunks")]
    ChunkWidth { mode: PackMode, bits: u32 },
    #[error("no key available for chunk {position} ({chunk})")]
    MissingPool { position: usize, chunk: Chunk },
    #[error("key {key} does not decode to chunk {position}")]
    BadKey { position: usize, key: CipherKey },
    #[error("blob holds {keys} keys, not a multiple of {per_instr}")]
    KeyCount { keys: usize, per_instr: usize },
    #[error("blob file: {0}")]
    Format(&'static str),
    #[error("live search is limited to {max}-bit keys, spec has {bits}")]
    LiveSearchTooWide { bits: u32, max: u32 },
}

#[derive(Debug, Error)]
pub enum RevealError<E> {
    #[error("decode oracle failed: {0}")]
    Oracle(E),
    #[error(transparent)]
    Pack(#[from] PackError),
}

/// Serialized protected program: key values only, never chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedBlob {
    pub mode: PackMode,
    pub spec_id: String,
    pub keys: Vec<u64>,
    /// Generation-profile seed, when it travels with the blob in memory.
    /// Never written to blob files.
    pub profile_seed: Option<u64>,
}

pub const BLOB_MAGIC: &[u8; 5] = b"ARMR1";

impl ProtectedBlob {
    pub fn chunk_count(&self) -> usize {
        self.keys.len()
    }

    /// `ARMR1`, mode byte, spec-id length byte and bytes, big-endian u32 key
    /// count, then each key as 8 little-endian bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(11 + self.spec_id.len() + 8 * self.keys.len());
        out.extend_from_slice(BLOB_MAGIC);
        out.push(self.mode.byte());
        out.push(self.spec_id.len() as u8);
        out.extend_from_slice(self.spec_id.as_bytes());
        out.extend_from_slice(&(self.keys.len() as u32).to_be_bytes());
        for k in &self.keys {
            out.extend_from_slice(&k.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PackError> {
        let rest = bytes.strip_prefix(BLOB_MAGIC).ok_or(PackError::Format("bad magic"))?;
        let (&mode, rest) = rest.split_first().ok_or(PackError::Format("truncated"))?;
        let mode = PackMode::from_byte(mode).ok_or(PackError::Format("unknown mode"))?;
        let (&id_len, rest) = rest.split_first().ok_or(PackError::Format("truncated"))?;
        if rest.len() < id_len as usize + 4 {
            return Err(PackError::Format("truncated"));
        }
        let (id, rest) = rest.split_at(id_len as usize);
        let spec_id = core::str::from_utf8(id).map_err(|_| PackError::Format("spec id not UTF-8"))?;
        let (count, rest) = rest.split_at(4);
        let count = u32::from_be_bytes(count.try_into().unwrap()) as usize;
        if rest.len() != count * 8 {
            return Err(PackError::Format("key count does not match payload"));
        }
        let keys = rest.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let blob = ProtectedBlob { mode, spec_id: spec_id.into(), keys, profile_seed: None };
        blob.check_shape()?;
        Ok(blob)
    }

    pub fn check_shape(&self) -> Result<(), PackError> {
        let per_instr = self.mode.chunks_per_instr();
        if self.keys.len() % per_instr != 0 {
            return Err(PackError::KeyCount { keys: self.keys.len(), per_instr });
        }
        Ok(())
    }
}

/// Supplies candidate keys for chunk `position` of a program.
pub trait KeySource {
    fn candidates(&mut self, position: usize, chunk: Chunk) -> Option<Vec<CipherKey>>;

    /// The chunk this source was built for at `position`, if fixed. Direct
    /// mode takes its noise bits from it when the low 32 bits match.
    fn fixed_chunk(&self, _position: usize) -> Option<Chunk> {
        None
    }
}

/// Pools looked up by their target chunk, whatever the position.
#[derive(Debug, Clone, Default)]
pub struct PoolsByTarget {
    pools: alloc::collections::BTreeMap<Chunk, KeyPool>,
}

impl PoolsByTarget {
    pub fn new(pools: impl IntoIterator<Item = KeyPool>) -> Self {
        let mut out = PoolsByTarget::default();
        for p in pools {
            out.insert(p);
        }
        out
    }

    pub fn insert(&mut self, pool: KeyPool) {
        match self.pools.remove(&pool.target) {
            Some(old) => self.pools.insert(pool.target, old.merge(pool)),
            None => self.pools.insert(pool.target, pool),
        };
    }

    pub fn get(&self, target: Chunk) -> Option<&KeyPool> {
        self.pools.get(&target)
    }
}

impl KeySource for PoolsByTarget {
    fn candidates(&mut self, _position: usize, chunk: Chunk) -> Option<Vec<CipherKey>> {
        self.pools.get(&chunk).filter(|p| !p.is_empty()).map(|p| p.keys().to_vec())
    }
}

/// Largest key length for which [`LiveSearch`] runs.
pub const MAX_LIVE_SEARCH_BITS: u32 = 59;

/// Searches keys on demand with [`attack_keys_by_r1`], caching per target.
#[derive(Debug, Clone)]
pub struct LiveSearch {
    spec: CipherSpec,
    cache: PoolsByTarget,
    limit: Option<(usize, u64)>,
}

impl LiveSearch {
    pub fn new(spec: CipherSpec) -> Result<Self, PackError> {
        let bits = spec.key_bits();
        if bits > MAX_LIVE_SEARCH_BITS {
            return Err(PackError::LiveSearchTooWide { bits, max: MAX_LIVE_SEARCH_BITS });
        }
        Ok(LiveSearch { spec, cache: PoolsByTarget::default(), limit: None })
    }

    /// Keeps at most `max` keys per pool, subsampled with `seed`. The pool
    /// of the zero chunk alone holds millions of keys at full width.
    pub fn with_max_keys(mut self, max: usize, seed: u64) -> Self {
        self.limit = Some((max, seed));
        self
    }

    /// The pool for `chunk`, searching it on first use.
    pub fn pool(&mut self, chunk: Chunk) -> &KeyPool {
        if self.cache.get(chunk).is_none() {
            let mut pool = attack_keys_by_r1(chunk, &self.spec, Slice::FULL);
            if let Some((max, seed)) = self.limit {
                pool = pool.subsample(max, seed);
            }
            self.cache.insert(pool);
        }
        self.cache.get(chunk).unwrap()
    }

    pub fn pools(&self) -> &PoolsByTarget {
        &self.cache
    }
}

impl KeySource for LiveSearch {
    fn candidates(&mut self, position: usize, chunk: Chunk) -> Option<Vec<CipherKey>> {
        self.pool(chunk);
        self.cache.candidates(position, chunk)
    }
}

/// Noise draws tried per word in direct mode before giving up. About a
/// third of random chunks have no preimage at all.
pub const DIRECT_NOISE_ATTEMPTS: u64 = 32;

fn direct_noise_seed(seed: u64, position: usize, attempt: u64) -> u64 {
    splitmix64(splitmix64(seed ^ attempt.rotate_left(32)) ^ position as u64)
}

fn check_layout(words: &[u32], mode: PackMode, spec: &CipherSpec) -> Result<(), PackError> {
    if words.len() % 5 != 0 {
        return Err(PackError::WordCount(words.len()));
    }
    let bits = spec.chunk_bits();
    match mode {
        PackMode::Concat if bits != CONCAT_CHUNK_BITS => Err(PackError::ChunkWidth { mode, bits }),
        PackMode::Direct if bits < 32 => Err(PackError::ChunkWidth { mode, bits }),
        _ => Ok(()),
    }
}

/// The chunk stream a program packs into. In direct mode this is the
/// first noise draw for every word.
pub fn program_chunks(
    words: &[u32],
    mode: PackMode,
    spec: &CipherSpec,
    seed: u64,
) -> Result<Vec<Chunk>, PackError> {
    check_layout(words, mode, spec)?;
    Ok(match mode {
        PackMode::Concat => words
            .chunks_exact(5)
            .flat_map(|g| pack_concat(&WordGroup(g.try_into().unwrap())))
            .collect(),
        PackMode::Direct => words
            .iter()
            .enumerate()
            .map(|(i, &w)| pack_direct_bits(w, direct_noise_seed(seed, i, 0), spec.chunk_bits()))
            .collect(),
    })
}

/// Replaces every chunk of the packed program by a key that decodes to it.
/// Keys are drawn uniformly from each chunk's candidates, deterministically in
/// `seed`. In direct mode the noise bits of a word are redrawn until some key
/// reaches the chunk.
pub fn protect_program(
    words: &[u32],
    mode: PackMode,
    spec: &CipherSpec,
    source: &mut dyn KeySource,
    seed: u64,
) -> Result<ProtectedBlob, PackError> {
    let chunks = program_chunks(words, mode, spec, seed)?;
    let mut keys = Vec::with_capacity(chunks.len());
    for (position, &first) in chunks.iter().enumerate() {
        let mut found = None;
        match mode {
            PackMode::Concat => found = source.candidates(position, first).map(|c| (first, c)),
            PackMode::Direct => {
                let word = words[position];
                let fixed = source.fixed_chunk(position).filter(|c| unpack_direct(*c) == word);
                let draws = (0..DIRECT_NOISE_ATTEMPTS).map(|a| {
                    pack_direct_bits(word, direct_noise_seed(seed, position, a), spec.chunk_bits())
                });
                for chunk in fixed.into_iter().chain(draws) {
                    if let Some(c) = source.candidates(position, chunk).filter(|c| !c.is_empty()) {
                        found = Some((chunk, c));
                        break;
                    }
                }
            }
        }
        let (chunk, cands) = found
            .filter(|(_, c)| !c.is_empty())
            .ok_or(PackError::MissingPool { position, chunk: first })?;
        let key = cands[pick_index(seed, position, cands.len())];
        if sco(key, spec) != chunk {
            return Err(PackError::BadKey { position, key });
        }
        keys.push(key.0);
    }
    Ok(ProtectedBlob { mode, spec_id: spec.id(), keys, profile_seed: None })
}

/// Anything that maps a key to its chunk: the cipher itself or a remote part
/// holding it.
pub trait DecodeOracle {
    type Error;
    fn decode(&mut self, key: CipherKey) -> Result<Chunk, Self::Error>;
}

/// In-process oracle.
#[derive(Debug, Clone, Copy)]
pub struct LocalOracle(pub CipherSpec);

impl DecodeOracle for LocalOracle {
    type Error = Infallible;

    fn decode(&mut self, key: CipherKey) -> Result<Chunk, Infallible> {
        Ok(sco(key, &self.0))
    }
}

/// Recovers the word stream by decoding every key through `oracle`.
/// Nothing is returned unless every key decodes.
pub fn reveal_program<O: DecodeOracle>(
    blob: &ProtectedBlob,
    oracle: &mut O,
) -> Result<Vec<u32>, RevealError<O::Error>> {
    blob.check_shape()?;
    let chunks = blob
        .keys
        .iter()
        .map(|&k| oracle.decode(CipherKey(k)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(RevealError::Oracle)?;
    let mut words = Vec::with_capacity(blob.keys.len() / blob.mode.chunks_per_instr() * 5);
    match blob.mode {
        PackMode::Concat => {
            for m in chunks.chunks_exact(3) {
                words.extend(unpack_concat([m[0], m[1], m[2]])?.0);
            }
        }
        PackMode::Direct => words.extend(chunks.into_iter().map(unpack_direct)),
    }
    Ok(words)
}
