//! Assemble, encode, pool and protect: the steps shared by the command line
//! and the tests.

use armoury_core::asm::{assemble, AsmError};
use armoury_core::ir::{encode_instr, GenerationProfile, Instruction};
use armoury_core::keysearch::KeyPool;
use armoury_core::mutation::MutationError;
use armoury_core::packer::{program_chunks, LiveSearch, PackError};
use armoury_core::{CipherSpec, PackMode};
use rayon::prelude::*;
use thiserror::Error;

/// Counts EAX up by fives while ECX goes from 0 to 4; ends with EAX = 23.
pub const DEMO_ASM: &str = include_str!("../demo.asm");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Asm(#[from] AsmError),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Pools(#[from] MutationError),
    #[error("no profile in {attempts} attempts gives every chunk {min} or more keys")]
    NoProfile { attempts: u64, min: usize },
}

pub fn encode_program(program: &[Instruction], profile: &GenerationProfile) -> Vec<u32> {
    program.iter().flat_map(|i| encode_instr(i, profile).0).collect()
}

/// Searches the pool for every chunk of `words`, in position order.
/// Pools above `max_keys` are subsampled with `seed`.
pub fn build_pools(
    words: &[u32],
    mode: PackMode,
    spec: &CipherSpec,
    max_keys: usize,
    seed: u64,
) -> Result<Vec<KeyPool>, PipelineError> {
    let chunks = program_chunks(words, mode, spec, seed)?;
    let mut distinct = chunks.clone();
    distinct.sort();
    distinct.dedup();
    let found: Vec<KeyPool> = distinct
        .par_iter()
        .map(|&c| LiveSearch::new(*spec).map(|s| s.with_max_keys(max_keys, seed)).map(|mut s| s.pool(c).clone()))
        .collect::<Result<_, _>>()?;
    Ok(chunks
        .iter()
        .map(|c| found[distinct.binary_search(c).unwrap()].clone())
        .collect())
}

/// First profile seed from `start` whose concatenated chunks all have at
/// least `min` keys, with the pools found for it.
pub fn choose_profile(
    source: &str,
    spec: &CipherSpec,
    min: usize,
    start: u64,
    attempts: u64,
    search: &mut LiveSearch,
) -> Result<(u64, Vec<u32>), PipelineError> {
    let program = assemble(source)?;
    for seed in (0..attempts).map(|a| start.wrapping_add(a)) {
        let words = encode_program(&program, &GenerationProfile::new(seed));
        let chunks = program_chunks(&words, PackMode::Concat, spec, 0)?;
        if chunks.iter().all(|&c| search.pool(c).len() >= min) {
            return Ok((seed, words));
        }
    }
    Err(PipelineError::NoProfile { attempts, min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use armoury_core::vm::execute;
    use armoury_core::ir::Register;

    #[test]
    fn demo_runs_to_23() {
        let p = GenerationProfile::new(0);
        let prog: Vec<_> = encode_program(&assemble(DEMO_ASM).unwrap(), &p)
            .chunks(5)
            .map(|c| armoury_core::ir::BytecodeInstr(c.try_into().unwrap()))
            .collect();
        let ctx = execute(&prog, &p, 1000).unwrap();
        assert_eq!(ctx.register(Register::Eax, &p), 23);
        assert_eq!(ctx.register(Register::Ecx, &p), 4);
    }
}
