//! Toy x86-flavoured assembler producing IR instructions.
//!
//! One instruction per line, `;` starts a comment, `name:` defines a label
//! (alone or in front of an instruction). Supported forms:
//!
//! ```text
//! MOV reg, imm|reg     ; STR src, -, reg
//! ADD reg, imm|reg     ; ADD reg, src, reg
//! XOR reg, imm|reg     ; XOR reg, src, reg
//! CMP reg, imm|reg     ; CMP reg, src, -
//! JZ label             ; JCC index, -, -
//! NOP
//! HALT
//! ```

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::ir::{InstrKind, Instruction, Operand, Register};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic {0:?}")]
    UnknownMnemonic(String),
    #[error("unknown register {0:?}")]
    UnknownRegister(String),
    #[error("undefined label {0:?}")]
    UndefinedLabel(String),
    #[error("label {0:?} defined twice")]
    DuplicateLabel(String),
    #[error("bad operand {0:?}")]
    BadOperand(String),
    #[error("{mnemonic} takes {expected} operand(s), found {found}")]
    OperandCount { mnemonic: String, expected: usize, found: usize },
}

struct Pending<'a> {
    line: usize,
    mnemonic: String,
    args: Vec<&'a str>,
}

pub fn assemble(source: &str) -> Result<Vec<Instruction>, AsmError> {
    let mut labels = BTreeMap::new();
    let mut pending = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut text = raw.split(';').next().unwrap_or("").trim();
        while let Some((label, rest)) = split_label(text) {
            if labels.insert(label.to_string(), pending.len()).is_some() {
                return Err(AsmError { line, kind: AsmErrorKind::DuplicateLabel(label.into()) });
            }
            text = rest.trim();
        }
        if text.is_empty() {
            continue;
        }
        let (mnemonic, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        let args: Vec<&str> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        pending.push(Pending { line, mnemonic: mnemonic.to_ascii_uppercase(), args });
    }

    pending.iter().map(|p| translate(p, &labels)).collect()
}

fn split_label(text: &str) -> Option<(&str, &str)> {
    let (head, rest) = text.split_once(':')?;
    let head = head.trim();
    let ok = !head.is_empty()
        && head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !head.starts_with(|c: char| c.is_ascii_digit());
    ok.then_some((head, rest))
}

fn translate(p: &Pending<'_>, labels: &BTreeMap<String, usize>) -> Result<Instruction, AsmError> {
    let err = |kind| AsmError { line: p.line, kind };
    let expect = |n: usize| {
        if p.args.len() == n {
            Ok(())
        } else {
            Err(err(AsmErrorKind::OperandCount {
                mnemonic: p.mnemonic.clone(),
                expected: n,
                found: p.args.len(),
            }))
        }
    };
    let reg = |s: &str| {
        Register::from_name(s).ok_or_else(|| err(AsmErrorKind::UnknownRegister(s.into())))
    };
    let source = |s: &str| match parse_imm(s) {
        Some(v) => Ok(Operand::int(v)),
        None if s.starts_with(|c: char| c.is_ascii_alphabetic()) => reg(s).map(Operand::reg),
        None => Err(err(AsmErrorKind::BadOperand(s.into()))),
    };

    let (kind, ops) = match p.mnemonic.as_str() {
        "MOV" => {
            expect(2)?;
            (InstrKind::Str, [source(p.args[1])?, Operand::Empty, Operand::reg(reg(p.args[0])?)])
        }
        "ADD" | "XOR" => {
            expect(2)?;
            let dst = Operand::reg(reg(p.args[0])?);
            let kind = if p.mnemonic == "ADD" { InstrKind::Add } else { InstrKind::Xor };
            (kind, [dst, source(p.args[1])?, dst])
        }
        "CMP" => {
            expect(2)?;
            (InstrKind::Cmp, [Operand::reg(reg(p.args[0])?), source(p.args[1])?, Operand::Empty])
        }
        "JZ" => {
            expect(1)?;
            let target = labels
                .get(p.args[0])
                .ok_or_else(|| err(AsmErrorKind::UndefinedLabel(p.args[0].into())))?;
            (InstrKind::Jcc, [Operand::int(*target as u32), Operand::Empty, Operand::Empty])
        }
        "NOP" | "HALT" => {
            expect(0)?;
            let kind = if p.mnemonic == "NOP" { InstrKind::Nop } else { InstrKind::Halt };
            (kind, [Operand::Empty; 3])
        }
        other => return Err(err(AsmErrorKind::UnknownMnemonic(other.into()))),
    };
    Instruction::new(kind, ops).map_err(|_| err(AsmErrorKind::BadOperand(p.args.join(", "))))
}

fn parse_imm(s: &str) -> Option<u32> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16).ok()?
    } else if body.starts_with(|c: char| c.is_ascii_digit()) {
        body.parse::<u32>().ok()?
    } else {
        return None;
    };
    Some(if neg { v.wrapping_neg() } else { v })
}
