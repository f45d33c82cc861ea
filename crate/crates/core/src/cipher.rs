//! Three-register LFSR stream cipher filtered by the majority function.
//!
//! Registers are Fibonacci LFSRs: the output bit is state bit 0, the feedback
//! bit (parity of the tapped positions) is shifted in at bit `degree - 1`.
//! A key is split across the registers with R1 in the low bits and R3 in the
//! high bits. The keystream is written into the chunk most significant bit
//! first, with no warm-up clocking.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use thiserror::Error;

/// Errors raised while building or parsing cipher parameters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("register degree {0} outside 1..=63")]
    BadDegree(u32),
    #[error("register of degree {degree} has tap {tap} out of range")]
    TapOutOfRange { degree: u32, tap: u32 },
    #[error("register taps must include position 0")]
    MissingConstantTap,
    #[error("total key length {0} exceeds 63 bits")]
    KeyTooWide(u32),
    #[error("expected exactly three registers, found {0}")]
    RegisterCount(usize),
    #[error("cannot parse register line {line:?}")]
    Parse { line: String },
    #[error("unknown cipher spec id {0:?}")]
    UnknownId(String),
}

/// One linear feedback shift register: its degree and feedback taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LfsrSpec {
    degree: u32,
    taps: u64,
}

impl LfsrSpec {
    /// Builds a register from the exponents of its feedback polynomial below
    /// the leading term.
    pub fn new(degree: u32, taps: &[u32]) -> Result<Self, SpecError> {
        if degree == 0 || degree > 63 {
            return Err(SpecError::BadDegree(degree));
        }
        let mut mask = 0u64;
        for &tap in taps {
            if tap >= degree {
                return Err(SpecError::TapOutOfRange { degree, tap });
            }
            mask |= 1 << tap;
        }
        if mask & 1 == 0 {
            return Err(SpecError::MissingConstantTap);
        }
        Ok(LfsrSpec { degree, taps: mask })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Tap positions as a bit mask.
    pub fn tap_mask(&self) -> u64 {
        self.taps
    }

    pub fn taps(&self) -> Vec<u32> {
        (0..self.degree).rev().filter(|t| self.taps >> t & 1 == 1).collect()
    }

    pub fn state_mask(&self) -> u64 {
        (1u64 << self.degree) - 1
    }

    /// Clocks the register once, returning the new state and the output bit.
    #[inline]
    pub fn step(&self, state: u64) -> (u64, u8) {
        let out = (state & 1) as u8;
        let feedback = (state & self.taps).count_ones() as u64 & 1;
        ((state >> 1) | (feedback << (self.degree - 1)), out)
    }

    /// Output bits as linear forms over the initial state.
    ///
    /// Row `t` has bit `j` set when initial state bit `j` contributes to the
    /// output at step `t`.
    pub fn output_linear_forms(&self, steps: usize) -> Vec<u64> {
        let d = self.degree as usize;
        // cell j currently holds the linear form stored in forms[j]
        let mut forms: Vec<u64> = (0..d).map(|j| 1u64 << j).collect();
        let mut rows = Vec::with_capacity(steps);
        for _ in 0..steps {
            rows.push(forms[0]);
            let feedback = (0..d)
                .filter(|&j| self.taps >> j & 1 == 1)
                .fold(0u64, |acc, j| acc ^ forms[j]);
            forms.rotate_left(1);
            forms[d - 1] = feedback;
        }
        rows
    }
}

/// Free-function form of [`LfsrSpec::step`].
pub fn lfsr_step(state: u64, spec: &LfsrSpec) -> (u64, u8) {
    spec.step(state)
}

/// Free-function form of [`LfsrSpec::output_linear_forms`].
pub fn output_linear_forms(spec: &LfsrSpec, steps: usize) -> Vec<u64> {
    spec.output_linear_forms(steps)
}

/// 1 iff at least two of the inputs are 1.
#[inline]
pub fn majority(b1: u8, b2: u8, b3: u8) -> u8 {
    (b1 & b2) ^ (b1 & b3) ^ (b2 & b3)
}

/// Full parameter set of the three-register majority cipher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CipherSpec {
    registers: [LfsrSpec; 3],
}

const DEFAULT_ID: &str = "default-59";
const SCALED_579_ID: &str = "scaled-579";
const SCALED_234_ID: &str = "scaled-234";

impl CipherSpec {
    pub fn new(registers: [LfsrSpec; 3]) -> Result<Self, SpecError> {
        let bits: u32 = registers.iter().map(|r| r.degree).sum();
        if bits > 63 {
            return Err(SpecError::KeyTooWide(bits));
        }
        Ok(CipherSpec { registers })
    }

    /// The 59-bit cipher with register degrees 17, 19 and 23.
    pub fn default_59() -> Self {
        CipherSpec {
            registers: [
                LfsrSpec::new(17, &[15, 14, 13, 11, 10, 9, 8, 6, 5, 4, 2, 0]).unwrap(),
                LfsrSpec::new(19, &[18, 16, 15, 11, 10, 5, 3, 2, 1, 0]).unwrap(),
                LfsrSpec::new(23, &[22, 21, 20, 17, 16, 15, 12, 10, 8, 7, 1, 0]).unwrap(),
            ],
        }
    }

    /// 21-bit scaled cipher (degrees 5, 7, 9, primitive trinomials).
    pub fn scaled_579() -> Self {
        CipherSpec {
            registers: [
                LfsrSpec::new(5, &[2, 0]).unwrap(),
                LfsrSpec::new(7, &[1, 0]).unwrap(),
                LfsrSpec::new(9, &[4, 0]).unwrap(),
            ],
        }
    }

    /// 9-bit toy cipher (degrees 2, 3, 4).
    pub fn scaled_234() -> Self {
        CipherSpec {
            registers: [
                LfsrSpec::new(2, &[1, 0]).unwrap(),
                LfsrSpec::new(3, &[1, 0]).unwrap(),
                LfsrSpec::new(4, &[1, 0]).unwrap(),
            ],
        }
    }

    pub fn registers(&self) -> &[LfsrSpec; 3] {
        &self.registers
    }

    pub fn degrees(&self) -> [u32; 3] {
        self.registers.map(|r| r.degree)
    }

    pub fn key_bits(&self) -> u32 {
        self.registers.iter().map(|r| r.degree).sum()
    }

    /// Keystream length per key; equal to the key length.
    pub fn chunk_bits(&self) -> u32 {
        self.key_bits()
    }

    pub fn key_mask(&self) -> u64 {
        (1u64 << self.key_bits()) - 1
    }

    /// Stable identifier: a preset name, or the one-line text form.
    pub fn id(&self) -> String {
        if *self == Self::default_59() {
            DEFAULT_ID.into()
        } else if *self == Self::scaled_579() {
            SCALED_579_ID.into()
        } else if *self == Self::scaled_234() {
            SCALED_234_ID.into()
        } else {
            self.to_text().trim_end().replace('\n', "/")
        }
    }

    pub fn from_id(id: &str) -> Result<Self, SpecError> {
        match id {
            DEFAULT_ID | "default" => Ok(Self::default_59()),
            SCALED_579_ID => Ok(Self::scaled_579()),
            SCALED_234_ID => Ok(Self::scaled_234()),
            other if other.contains(':') => Self::parse_text(&other.replace('/', "\n")),
            other => Err(SpecError::UnknownId(other.into())),
        }
    }

    /// `degree:tap,tap,...`, one register per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.registers {
            let taps: Vec<String> = r.taps().iter().map(|t| alloc::format!("{t}")).collect();
            let _ = writeln!(out, "{}:{}", r.degree, taps.join(","));
        }
        out
    }

    /// Parses the text form; blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self, SpecError> {
        let mut regs = Vec::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || SpecError::Parse { line: line.into() };
            let (deg, taps) = line.split_once(':').ok_or_else(bad)?;
            let degree: u32 = deg.trim().parse().map_err(|_| bad())?;
            let taps = taps
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()?;
            regs.push(LfsrSpec::new(degree, &taps)?);
        }
        let registers: [LfsrSpec; 3] = regs
            .try_into()
            .map_err(|v: Vec<LfsrSpec>| SpecError::RegisterCount(v.len()))?;
        Self::new(registers)
    }
}

impl fmt::Display for CipherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// A cipher key; the register initial states packed R1 (low) to R3 (high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CipherKey(pub u64);

impl CipherKey {
    pub fn from_parts(parts: [u64; 3], spec: &CipherSpec) -> Self {
        let [d1, d2, _] = spec.degrees();
        CipherKey(parts[0] | (parts[1] << d1) | (parts[2] << (d1 + d2)))
    }

    pub fn parts(&self, spec: &CipherSpec) -> [u64; 3] {
        let [r1, r2, r3] = spec.registers;
        let (d1, d2) = (r1.degree, r2.degree);
        [
            self.0 & r1.state_mask(),
            (self.0 >> d1) & r2.state_mask(),
            (self.0 >> (d1 + d2)) & r3.state_mask(),
        ]
    }

    pub fn is_valid_for(&self, spec: &CipherSpec) -> bool {
        self.0 & !spec.key_mask() == 0
    }
}

impl fmt::Display for CipherKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:015X}", self.0)
    }
}

/// One keystream output word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Chunk(pub u64);

impl fmt::Display for Chunk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:015X}", self.0)
    }
}

/// Runs the cipher on `key` and returns the `chunk_bits`-wide keystream.
pub fn sco(key: CipherKey, spec: &CipherSpec) -> Chunk {
    let [s1, s2, s3] = key.parts(spec);
    let [r1, r2, r3] = spec.registers;
    let (mut s1, mut s2, mut s3) = (s1, s2, s3);
    let mut out = 0u64;
    for _ in 0..spec.chunk_bits() {
        let (n1, b1) = r1.step(s1);
        let (n2, b2) = r2.step(s2);
        let (n3, b3) = r3.step(s3);
        s1 = n1;
        s2 = n2;
        s3 = n3;
        out = (out << 1) | majority(b1, b2, b3) as u64;
    }
    Chunk(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_truth_table() {
        assert_eq!(majority(0, 0, 0), 0);
        assert_eq!(majority(1, 1, 0), 1);
        assert_eq!(majority(1, 0, 0), 0);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert_eq!(majority(a, b, c), u8::from(a + b + c >= 2));
                }
            }
        }
    }

    #[test]
    fn step_zero_is_fixed() {
        let spec = CipherSpec::default_59();
        for r in spec.registers() {
            assert_eq!(lfsr_step(0, r), (0, 0));
        }
    }

    #[test]
    fn step_single_bit_r1() {
        let r1 = CipherSpec::default_59().registers()[0];
        assert_eq!(lfsr_step(1, &r1), (1 << 16, 1));
    }

    #[test]
    fn lfsr_spec_rejects_bad_input() {
        assert_eq!(LfsrSpec::new(0, &[0]), Err(SpecError::BadDegree(0)));
        assert_eq!(LfsrSpec::new(5, &[2]), Err(SpecError::MissingConstantTap));
        assert_eq!(
            LfsrSpec::new(5, &[5, 0]),
            Err(SpecError::TapOutOfRange { degree: 5, tap: 5 })
        );
        let big = LfsrSpec::new(30, &[0]).unwrap();
        assert_eq!(CipherSpec::new([big, big, big]), Err(SpecError::KeyTooWide(90)));
    }

    #[test]
    fn default_spec_matches_polynomials() {
        let spec = CipherSpec::default_59();
        assert_eq!(spec.key_bits(), 59);
        assert_eq!(spec.degrees(), [17, 19, 23]);
        assert_eq!(spec.registers()[1].taps(), [18, 16, 15, 11, 10, 5, 3, 2, 1, 0]);
    }

    #[test]
    fn zero_key_and_single_active_register() {
        let spec = CipherSpec::default_59();
        assert_eq!(sco(CipherKey(0), &spec), Chunk(0));
        for i in 0..3 {
            let mut parts = [0u64; 3];
            parts[i] = 0x1_2345 & spec.registers()[i].state_mask();
            assert_eq!(sco(CipherKey::from_parts(parts, &spec), &spec), Chunk(0));
        }
    }

    #[test]
    fn linear_forms_first_rows() {
        let r = CipherSpec::default_59().registers()[2];
        let rows = r.output_linear_forms(3);
        assert_eq!(rows[0], 1);
        assert_eq!(rows[1], 2);
        assert_eq!(rows[2], 4);
    }

    #[test]
    fn text_round_trip_and_ids() {
        for spec in [CipherSpec::default_59(), CipherSpec::scaled_579(), CipherSpec::scaled_234()] {
            assert_eq!(CipherSpec::parse_text(&spec.to_text()).unwrap(), spec);
            assert_eq!(CipherSpec::from_id(&spec.id()).unwrap(), spec);
        }
        let custom = CipherSpec::parse_text("# test\n3:1,0\n4:1,0\n5:2,0\n").unwrap();
        assert_eq!(custom.id(), "3:1,0/4:1,0/5:2,0");
        assert_eq!(CipherSpec::from_id(&custom.id()).unwrap(), custom);
        assert!(matches!(
            CipherSpec::parse_text("3:1,0\n"),
            Err(SpecError::RegisterCount(1))
        ));
        assert!(matches!(CipherSpec::parse_text("x:1\n"), Err(SpecError::Parse { .. })));
    }
}
