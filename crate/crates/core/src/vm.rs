//! Interpreter for encoded programs. Registers live in a byte context area at
//! the offsets chosen by the generation profile; cells are little-endian.

use thiserror::Error;

use crate::ir::{
    decode_instr, BytecodeInstr, GenerationProfile, InstrKind, IrError, Operand, Register,
    CONTEXT_SIZE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VmError {
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(u64),
    #[error("access of {size} bytes at offset 0x{offset:X} leaves the context area")]
    OutOfBounds { offset: usize, size: usize },
    #[error("jump to {target} outside a program of {len} instructions")]
    BadJump { target: u32, len: usize },
    #[error("instruction {pc}: {source}")]
    Decode { pc: usize, source: IrError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VmContext {
    pub area: [u8; CONTEXT_SIZE],
    pub pc: usize,
    pub zero_flag: bool,
}

impl Default for VmContext {
    fn default() -> Self {
        VmContext { area: [0; CONTEXT_SIZE], pc: 0, zero_flag: false }
    }
}

impl VmContext {
    fn read(&self, offset: usize, size: usize) -> Result<u32, VmError> {
        let bytes = self.area.get(offset..offset + size).ok_or(VmError::OutOfBounds { offset, size })?;
        Ok(bytes.iter().rev().fold(0u32, |acc, &b| acc << 8 | b as u32))
    }

    fn write(&mut self, offset: usize, size: usize, value: u32) -> Result<(), VmError> {
        let cell = self
            .area
            .get_mut(offset..offset + size)
            .ok_or(VmError::OutOfBounds { offset, size })?;
        cell.copy_from_slice(&value.to_le_bytes()[..size]);
        Ok(())
    }

    /// The 32-bit cell of `reg` under `profile`.
    pub fn register(&self, reg: Register, profile: &GenerationProfile) -> u32 {
        self.read(profile.offset(reg) as usize, 4).unwrap_or(0)
    }

    pub fn registers(&self, profile: &GenerationProfile) -> [u32; 4] {
        Register::ALL.map(|r| self.register(r, profile))
    }
}

fn load(ctx: &VmContext, op: &Operand, profile: &GenerationProfile) -> Result<u32, VmError> {
    match *op {
        Operand::Empty => Ok(0),
        Operand::Int { value, size } => Ok(mask(value, size)),
        Operand::Reg { reg, size } => ctx.read(profile.offset(reg) as usize, size as usize),
    }
}

fn mask(value: u32, size: u8) -> u32 {
    if size >= 4 {
        value
    } else {
        value & ((1u32 << (8 * size)) - 1)
    }
}

fn store(
    ctx: &mut VmContext,
    op: &Operand,
    profile: &GenerationProfile,
    value: u32,
) -> Result<(), VmError> {
    match *op {
        Operand::Reg { reg, size } => ctx.write(profile.offset(reg) as usize, size as usize, value),
        // signatures guarantee register destinations
        _ => Ok(()),
    }
}

/// Runs `program` from a zeroed context until HALT, the end of the
/// program, or `fuel` executed instructions.
pub fn execute(
    program: &[BytecodeInstr],
    profile: &GenerationProfile,
    fuel: u64,
) -> Result<VmContext, VmError> {
    let mut ctx = VmContext::default();
    let mut steps = 0u64;
    while ctx.pc < program.len() {
        if steps == fuel {
            return Err(VmError::FuelExhausted(steps));
        }
        steps += 1;
        let pc = ctx.pc;
        let ins = decode_instr(&program[pc], profile).map_err(|source| VmError::Decode { pc, source })?;
        let [a, b, c] = ins.operands();
        let mut next = pc + 1;
        match ins.kind() {
            InstrKind::Str => {
                let v = load(&ctx, a, profile)?;
                store(&mut ctx, c, profile, v)?;
            }
            InstrKind::Add => {
                let v = load(&ctx, a, profile)?.wrapping_add(load(&ctx, b, profile)?);
                store(&mut ctx, c, profile, v)?;
            }
            InstrKind::Xor => {
                let v = load(&ctx, a, profile)? ^ load(&ctx, b, profile)?;
                store(&mut ctx, c, profile, v)?;
            }
            InstrKind::Cmp => {
                ctx.zero_flag = load(&ctx, a, profile)? == load(&ctx, b, profile)?;
            }
            InstrKind::Jcc => {
                let target = load(&ctx, a, profile)?;
                if target as usize > program.len() {
                    return Err(VmError::BadJump { target, len: program.len() });
                }
                if ctx.zero_flag {
                    next = target as usize;
                }
            }
            InstrKind::Nop => {}
            InstrKind::Halt => break,
        }
        ctx.pc = next;
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::assemble;
    use crate::ir::encode_instr;
    use alloc::vec::Vec;

    fn build(src: &str, profile: &GenerationProfile) -> Vec<BytecodeInstr> {
        assemble(src).unwrap().iter().map(|i| encode_instr(i, profile)).collect()
    }

    #[test]
    fn store_immediate() {
        let p = GenerationProfile::new(11);
        let ctx = execute(&build("MOV EAX, 0x3\nHALT", &p), &p, 100).unwrap();
        assert_eq!(ctx.register(Register::Eax, &p), 3);
        assert_eq!(ctx.area[p.offset(Register::Eax) as usize], 3);
        assert_eq!(ctx.pc, 1);
    }

    #[test]
    fn empty_program() {
        let p = GenerationProfile::new(1);
        let ctx = execute(&[], &p, 1).unwrap();
        assert_eq!(ctx, VmContext::default());
    }

    #[test]
    fn self_loop_runs_out_of_fuel() {
        let p = GenerationProfile::new(1);
        let prog = build("CMP EAX, 0\nl: JZ l", &p);
        assert_eq!(execute(&prog, &p, 10), Err(VmError::FuelExhausted(10)));
    }

    #[test]
    fn arithmetic_and_branch() {
        let p = GenerationProfile::new(5);
        let src = "MOV ECX, 5\nMOV EAX, 0\nloop: ADD EAX, 3\nADD ECX, -1\nCMP ECX, 0\nJZ end\nCMP EAX, EAX\nJZ loop\nend: XOR EAX, 0xFF\nHALT";
        let ctx = execute(&build(src, &p), &p, 1000).unwrap();
        assert_eq!(ctx.register(Register::Eax, &p), 15 ^ 0xFF);
        assert_eq!(ctx.register(Register::Ecx, &p), 0);
        assert!(ctx.zero_flag);
    }

    #[test]
    fn unknown_opcode_and_bad_jump() {
        let p = GenerationProfile::new(5);
        let other = GenerationProfile::from_tables(
            core::array::from_fn(|i| {
                (0u8..=255).filter(|b| p.kind_of(*b).is_none()).nth(i).unwrap()
            }),
            [0, 4, 8, 12],
        )
        .unwrap();
        let prog = build("NOP", &other);
        assert!(matches!(
            execute(&prog, &p, 10),
            Err(VmError::Decode { pc: 0, source: IrError::UnknownOpcode(_) })
        ));
        let jump = crate::ir::Instruction::new(
            InstrKind::Jcc,
            [Operand::int(9), Operand::Empty, Operand::Empty],
        )
        .unwrap();
        let prog = [encode_instr(&jump, &p)];
        assert_eq!(execute(&prog, &p, 10), Err(VmError::BadJump { target: 9, len: 1 }));
    }

    #[test]
    fn narrow_store_writes_only_its_bytes() {
        let p = GenerationProfile::new(3);
        let wide = encode_instr(&crate::ir::Instruction::store(Operand::int(0xAABB_CCDD), Register::Ebx), &p);
        let narrow = crate::ir::Instruction::new(
            InstrKind::Str,
            [Operand::int(0x11), Operand::Empty, Operand::Reg { reg: Register::Ebx, size: 1 }],
        )
        .unwrap();
        let ctx = execute(&[wide, encode_instr(&narrow, &p)], &p, 10).unwrap();
        assert_eq!(ctx.register(Register::Ebx, &p), 0xAABB_CC11);
    }
}
