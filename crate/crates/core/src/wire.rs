//! Nine-byte frames spoken between the oracle part (holding the cipher and
//! pools) and the client part (holding only keys).
//!
//! A frame is one opcode byte followed by an 8-byte little-endian payload.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cipher::{sco, CipherKey, CipherSpec};
use crate::mutation::PoolSet;

pub const FRAME_LEN: usize = 9;

pub const OP_DECODE: u8 = 0x01;
pub const OP_MUTATE: u8 = 0x02;
pub const OP_DECODE_OK: u8 = 0x81;
pub const OP_MUTATE_OK: u8 = 0x82;
pub const OP_ERROR: u8 = 0xFF;

pub const REASON_UNKNOWN_OPCODE: u8 = 0x01;
pub const REASON_POOL_INDEX: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireFrame {
    Decode(u64),
    /// Pool index travels in the low four payload bytes.
    Mutate(u32),
    DecodeOk(u64),
    MutateOk(u64),
    Error(u8),
    Unknown { opcode: u8, payload: [u8; 8] },
}

impl WireFrame {
    pub fn encode(&self) -> [u8; FRAME_LEN] {
        let (op, payload) = match *self {
            WireFrame::Decode(k) => (OP_DECODE, k.to_le_bytes()),
            WireFrame::Mutate(i) => (OP_MUTATE, (i as u64).to_le_bytes()),
            WireFrame::DecodeOk(c) => (OP_DECODE_OK, c.to_le_bytes()),
            WireFrame::MutateOk(k) => (OP_MUTATE_OK, k.to_le_bytes()),
            WireFrame::Error(reason) => (OP_ERROR, (reason as u64).to_le_bytes()),
            WireFrame::Unknown { opcode, payload } => (opcode, payload),
        };
        let mut out = [0u8; FRAME_LEN];
        out[0] = op;
        out[1..].copy_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8; FRAME_LEN]) -> Self {
        let payload: [u8; 8] = bytes[1..].try_into().unwrap();
        let word = u64::from_le_bytes(payload);
        match bytes[0] {
            OP_DECODE => WireFrame::Decode(word),
            OP_MUTATE if word >> 32 == 0 => WireFrame::Mutate(word as u32),
            OP_DECODE_OK => WireFrame::DecodeOk(word),
            OP_MUTATE_OK => WireFrame::MutateOk(word),
            OP_ERROR if word >> 8 == 0 => WireFrame::Error(word as u8),
            opcode => WireFrame::Unknown { opcode, payload },
        }
    }
}

/// The oracle's request handler, independent of any transport.
#[derive(Debug, Clone)]
pub struct OracleState {
    spec: CipherSpec,
    pools: PoolSet,
    rng: ChaCha8Rng,
}

impl OracleState {
    pub fn new(spec: CipherSpec, pools: PoolSet, seed: u64) -> Self {
        OracleState { spec, pools, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn spec(&self) -> &CipherSpec {
        &self.spec
    }

    /// Response to one request frame. Response opcodes and malformed
    /// payloads sent as requests count as unknown.
    pub fn respond(&mut self, request: WireFrame) -> WireFrame {
        use rand::Rng;
        match request {
            WireFrame::Decode(key) => {
                WireFrame::DecodeOk(sco(CipherKey(key & self.spec.key_mask()), &self.spec).0)
            }
            WireFrame::Mutate(index) => match self.pools.get(index as usize) {
                Some(pool) => {
                    let i = self.rng.random_range(0..pool.len());
                    WireFrame::MutateOk(pool.keys()[i].0)
                }
                None => WireFrame::Error(REASON_POOL_INDEX),
            },
            _ => WireFrame::Error(REASON_UNKNOWN_OPCODE),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_decode_zero() {
        let req = WireFrame::Decode(0).encode();
        assert_eq!(req, [0x01, 0, 0, 0, 0, 0, 0, 0, 0]);
        let mut st = OracleState::new(CipherSpec::default_59(), PoolSet::default(), 0);
        let resp = st.respond(WireFrame::decode(&req)).encode();
        assert_eq!(resp, [0x81, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn error_frames() {
        let mut st = OracleState::new(CipherSpec::default_59(), PoolSet::default(), 0);
        let unknown = WireFrame::decode(&[0x33, 1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(st.respond(unknown).encode(), [0xFF, 0x01, 0, 0, 0, 0, 0, 0, 0]);
        let oob = WireFrame::Mutate(999);
        assert_eq!(st.respond(oob).encode(), [0xFF, 0x02, 0, 0, 0, 0, 0, 0, 0]);
        // a response opcode sent as a request
        assert_eq!(st.respond(WireFrame::DecodeOk(5)), WireFrame::Error(REASON_UNKNOWN_OPCODE));
    }

    #[test]
    fn mutate_payload_must_fit_u32() {
        let mut bytes = WireFrame::Mutate(7).encode();
        assert_eq!(WireFrame::decode(&bytes), WireFrame::Mutate(7));
        bytes[6] = 1;
        assert!(matches!(WireFrame::decode(&bytes), WireFrame::Unknown { opcode: 0x02, .. }));
    }
}
