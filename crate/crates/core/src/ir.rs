//! REIL-like three-operand IR, its five-word bytecode form and the
//! per-build generation profile that randomizes opcodes and register offsets.
//!
//! Word layout of one instruction:
//!
//! ```text
//! word0 = opcode << 24 | optype1 << 16 | optype2 << 8 | optype3
//! word1 = size1 << 16 | size2 << 8 | size3
//! word2..word4 = operand values (register operands hold the context offset)
//! ```
//!
//! Integers have optype 0x01, registers 0x00. Unused slots are all zero
//! (optype 0x00, size 0, value 0), which is what tells them apart from
//! registers.

use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Bytes in the register context area.
pub const CONTEXT_SIZE: usize = 256;
/// Bytes in one register cell.
pub const CELL_SIZE: usize = 4;

const OPTYPE_INT: u8 = 0x01;
const OPTYPE_REG: u8 = 0x00;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstrKind {
    Str,
    Add,
    Xor,
    Cmp,
    Jcc,
    Nop,
    Halt,
}

impl InstrKind {
    pub const ALL: [InstrKind; 7] = [
        InstrKind::Str,
        InstrKind::Add,
        InstrKind::Xor,
        InstrKind::Cmp,
        InstrKind::Jcc,
        InstrKind::Nop,
        InstrKind::Halt,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            InstrKind::Str => "STR",
            InstrKind::Add => "ADD",
            InstrKind::Xor => "XOR",
            InstrKind::Cmp => "CMP",
            InstrKind::Jcc => "JCC",
            InstrKind::Nop => "NOP",
            InstrKind::Halt => "HALT",
        }
    }

    fn signature(self) -> [Slot; 3] {
        use Slot::*;
        match self {
            InstrKind::Str => [Source, None, Register],
            InstrKind::Add | InstrKind::Xor => [Register, Source, Register],
            InstrKind::Cmp => [Register, Source, None],
            InstrKind::Jcc => [Integer, None, None],
            InstrKind::Nop | InstrKind::Halt => [None, None, None],
        }
    }
}

#[derive(Clone, Copy)]
enum Slot {
    None,
    Integer,
    Register,
    Source,
}

impl Slot {
    fn admits(self, op: &Operand) -> bool {
        matches!(
            (self, op),
            (Slot::None, Operand::Empty)
                | (Slot::Integer, Operand::Int { .. })
                | (Slot::Register, Operand::Reg { .. })
                | (Slot::Source, Operand::Int { .. } | Operand::Reg { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Register {
    Eax,
    Ebx,
    Ecx,
    Edx,
}

impl Register {
    pub const ALL: [Register; 4] = [Register::Eax, Register::Ebx, Register::Ecx, Register::Edx];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Register::Eax => "EAX",
            Register::Ebx => "EBX",
            Register::Ecx => "ECX",
            Register::Edx => "EDX",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Register::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Empty,
    Int { value: u32, size: u8 },
    Reg { reg: Register, size: u8 },
}

impl Operand {
    pub fn int(value: u32) -> Self {
        Operand::Int { value, size: 4 }
    }

    pub fn reg(reg: Register) -> Self {
        Operand::Reg { reg, size: 4 }
    }

    fn size(&self) -> u8 {
        match *self {
            Operand::Empty => 0,
            Operand::Int { size, .. } | Operand::Reg { size, .. } => size,
        }
    }

    fn optype(&self) -> u8 {
        match self {
            Operand::Int { .. } => OPTYPE_INT,
            _ => OPTYPE_REG,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Empty => f.write_str("-"),
            Operand::Int { value, size } => write!(f, "0x{value:X}:{size}"),
            Operand::Reg { reg, size } => write!(f, "{reg}:{size}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("operands do not match the {0:?} signature")]
    BadOperands(InstrKind),
    #[error("operand size {0} not in {{1, 2, 4}}")]
    BadSize(u8),
    #[error("opcode byte 0x{0:02X} not in the generation profile")]
    UnknownOpcode(u8),
    #[error("no register at context offset 0x{0:X}")]
    UnknownRegister(u32),
    #[error("malformed bytecode word 0x{0:08X}")]
    Malformed(u32),
    #[error("invalid generation profile: {0}")]
    BadProfile(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instruction {
    kind: InstrKind,
    operands: [Operand; 3],
}

impl Instruction {
    pub fn new(kind: InstrKind, operands: [Operand; 3]) -> Result<Self, IrError> {
        for op in &operands {
            let size = op.size();
            match op {
                Operand::Empty => {}
                _ if matches!(size, 1 | 2 | 4) => {}
                _ => return Err(IrError::BadSize(size)),
            }
        }
        let sig = kind.signature();
        if !sig.iter().zip(&operands).all(|(slot, op)| slot.admits(op)) {
            return Err(IrError::BadOperands(kind));
        }
        Ok(Instruction { kind, operands })
    }

    pub fn kind(&self) -> InstrKind {
        self.kind
    }

    pub fn operands(&self) -> &[Operand; 3] {
        &self.operands
    }

    /// `STR src, -, dst`
    pub fn store(src: Operand, dst: Register) -> Self {
        Self::new(InstrKind::Str, [src, Operand::Empty, Operand::reg(dst)]).unwrap()
    }

    pub fn halt() -> Self {
        Self::new(InstrKind::Halt, [Operand::Empty; 3]).unwrap()
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = &self.operands;
        write!(f, "{} {a}, {b}, {c}", self.kind.mnemonic())
    }
}

/// One encoded instruction: five 32-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BytecodeInstr(pub [u32; 5]);

/// Per-build opcode bytes and register offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GenerationProfile {
    opcodes: [u8; 7],
    offsets: [u8; 4],
    seed: Option<u64>,
}

impl GenerationProfile {
    /// Deterministic profile drawn from `seed`.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bytes: [u8; 256] = core::array::from_fn(|i| i as u8);
        for i in 0..7 {
            let j = rng.random_range(i..256);
            bytes.swap(i, j);
        }
        let mut opcodes = [0u8; 7];
        opcodes.copy_from_slice(&bytes[..7]);

        // cells must not overlap, otherwise registers alias each other
        let mut offsets = [0u8; 4];
        let mut placed = 0;
        while placed < 4 {
            let cand = rng.random_range(0..=(CONTEXT_SIZE - CELL_SIZE) as u8);
            if offsets[..placed].iter().all(|&o| o.abs_diff(cand) as usize >= CELL_SIZE) {
                offsets[placed] = cand;
                placed += 1;
            }
        }
        GenerationProfile { opcodes, offsets, seed: Some(seed) }
    }

    /// Explicit tables, indexed in [`InstrKind::ALL`] and [`Register::ALL`] order.
    pub fn from_tables(opcodes: [u8; 7], offsets: [u8; 4]) -> Result<Self, IrError> {
        for i in 0..7 {
            if opcodes[..i].contains(&opcodes[i]) {
                return Err(IrError::BadProfile("opcode bytes must be distinct"));
            }
        }
        for i in 0..4 {
            if offsets[i] as usize + CELL_SIZE > CONTEXT_SIZE {
                return Err(IrError::BadProfile("register cell outside the context"));
            }
            if offsets[..i].iter().any(|&o| (o.abs_diff(offsets[i]) as usize) < CELL_SIZE) {
                return Err(IrError::BadProfile("register cells overlap"));
            }
        }
        Ok(GenerationProfile { opcodes, offsets, seed: None })
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn opcode(&self, kind: InstrKind) -> u8 {
        self.opcodes[kind.index()]
    }

    pub fn offset(&self, reg: Register) -> u8 {
        self.offsets[reg.index()]
    }

    pub fn kind_of(&self, opcode: u8) -> Option<InstrKind> {
        InstrKind::ALL.into_iter().find(|&k| self.opcode(k) == opcode)
    }

    pub fn register_at(&self, offset: u32) -> Option<Register> {
        Register::ALL.into_iter().find(|&r| self.offset(r) as u32 == offset)
    }
}

pub fn encode_instr(ins: &Instruction, profile: &GenerationProfile) -> BytecodeInstr {
    let [a, b, c] = &ins.operands;
    let value = |op: &Operand| match *op {
        Operand::Empty => 0,
        Operand::Int { value, .. } => value,
        Operand::Reg { reg, .. } => profile.offset(reg) as u32,
    };
    BytecodeInstr([
        (profile.opcode(ins.kind) as u32) << 24
            | (a.optype() as u32) << 16
            | (b.optype() as u32) << 8
            | c.optype() as u32,
        (a.size() as u32) << 16 | (b.size() as u32) << 8 | c.size() as u32,
        value(a),
        value(b),
        value(c),
    ])
}

pub fn decode_instr(
    words: &BytecodeInstr,
    profile: &GenerationProfile,
) -> Result<Instruction, IrError> {
    let [w0, w1, ..] = words.0;
    if w1 >> 24 != 0 {
        return Err(IrError::Malformed(w1));
    }
    let opcode = (w0 >> 24) as u8;
    let kind = profile.kind_of(opcode).ok_or(IrError::UnknownOpcode(opcode))?;
    let mut operands = [Operand::Empty; 3];
    for (slot, op) in operands.iter_mut().enumerate() {
        let shift = 16 - 8 * slot;
        let optype = (w0 >> shift) as u8;
        let size = (w1 >> shift) as u8;
        let value = words.0[2 + slot];
        *op = match (optype, size) {
            (OPTYPE_INT, _) => Operand::Int { value, size },
            (OPTYPE_REG, 0) if value == 0 => Operand::Empty,
            (OPTYPE_REG, 0) => return Err(IrError::Malformed(value)),
            (OPTYPE_REG, _) => Operand::Reg {
                reg: profile.register_at(value).ok_or(IrError::UnknownRegister(value))?,
                size,
            },
            _ => return Err(IrError::Malformed(w0)),
        };
    }
    Instruction::new(kind, operands)
}
