//! Slice fan-out over threads, with finished slices checkpointed to disk so
//! an interrupted search resumes where it stopped.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use armoury_core::keysearch::pair_guess_space;
use armoury_core::{attack_keys, attack_keys_by_r1, Chunk, CipherSpec, KeyPool, SearchBudget, Slice};
use rayon::prelude::*;

use crate::formats::{pool_to_string, read_pool, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Guess R1, solve R2 and R3.
    R1,
    /// Guess R1 and R2, solve R3.
    Pairs,
}

impl Method {
    pub fn guess_space(self, spec: &CipherSpec) -> u64 {
        match self {
            Method::R1 => 1 << spec.degrees()[0],
            Method::Pairs => pair_guess_space(spec),
        }
    }

    fn run(self, target: Chunk, spec: &CipherSpec, slice: Slice) -> KeyPool {
        match self {
            Method::R1 => attack_keys_by_r1(target, spec, slice),
            Method::Pairs => attack_keys(target, spec, SearchBudget::slice(slice)),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "r1" => Ok(Method::R1),
            "pairs" => Ok(Method::Pairs),
            _ => Err(format!("unknown method {s:?} (r1, pairs)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchPlan {
    pub target: Chunk,
    pub spec: CipherSpec,
    pub method: Method,
    /// The part of the guess space to search.
    pub slice: Slice,
    /// Sub-slices the part is split into for threads and checkpoints.
    pub pieces: u64,
    pub checkpoint: Option<PathBuf>,
}

fn piece_path(dir: &Path, plan: &SearchPlan, piece: u64) -> PathBuf {
    let method = match plan.method {
        Method::R1 => "r1",
        Method::Pairs => "pairs",
    };
    dir.join(format!(
        "{}-{:015X}-{method}-{}of{}-{piece}of{}.pool",
        plan.spec.id().replace('/', "_"),
        plan.target.0,
        plan.slice.index(),
        plan.slice.total(),
        plan.pieces
    ))
}

/// Piece `piece` of `pieces` within `slice`, as a slice of the whole space.
fn sub_slice(slice: Slice, piece: u64, pieces: u64) -> Slice {
    let total = slice.total() * pieces;
    Slice::new(slice.index() * pieces + piece, total).unwrap()
}

/// Runs the plan; returns the merged pool and how many pieces came from
/// checkpoints.
pub fn run_search(plan: &SearchPlan) -> Result<(KeyPool, u64), FormatError> {
    if let Some(dir) = &plan.checkpoint {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.clone(), source })?;
    }
    let results: Vec<(KeyPool, bool)> = (0..plan.pieces)
        .into_par_iter()
        .map(|piece| {
            let path = plan.checkpoint.as_ref().map(|d| piece_path(d, plan, piece));
            if let Some(p) = path.as_ref().filter(|p| p.exists()) {
                let file = fs::File::open(p).map_err(|source| FormatError::Io { path: p.clone(), source })?;
                return Ok((read_pool(BufReader::new(file), &plan.spec, false)?, true));
            }
            let pool = plan.method.run(plan.target, &plan.spec, sub_slice(plan.slice, piece, plan.pieces));
            if let Some(p) = path {
                // written whole, then renamed, so a partial file never counts
                let tmp = p.with_extension("tmp");
                fs::write(&tmp, pool_to_string(&pool, &plan.spec))
                    .and_then(|_| fs::rename(&tmp, &p))
                    .map_err(|source| FormatError::Io { path: p.clone(), source })?;
            }
            Ok((pool, false))
        })
        .collect::<Result<_, FormatError>>()?;
    let resumed = results.iter().filter(|(_, r)| *r).count() as u64;
    let merged = results
        .into_iter()
        .fold(KeyPool::new(plan.target, plan.spec.id(), Vec::new()), |acc, (p, _)| acc.merge(p));
    Ok((merged, resumed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use armoury_core::{brute_force_keys, sco, CipherKey};

    #[test]
    fn pieces_and_checkpoints_agree_with_brute_force() {
        let spec = CipherSpec::scaled_579();
        let target = sco(CipherKey(0x15_5555), &spec);
        let want = brute_force_keys(target, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for method in [Method::R1, Method::Pairs] {
            let plan = SearchPlan {
                target,
                spec,
                method,
                slice: Slice::FULL,
                pieces: 8,
                checkpoint: Some(dir.path().into()),
            };
            let (pool, resumed) = run_search(&plan).unwrap();
            assert_eq!(pool.keys(), want.keys());
            assert_eq!(resumed, 0);
            let (again, resumed) = run_search(&plan).unwrap();
            assert_eq!(again, pool);
            assert_eq!(resumed, 8);
        }
    }

    #[test]
    fn slices_of_slices_cover_the_part() {
        let spec = CipherSpec::scaled_579();
        let target = sco(CipherKey(0x0A_BCDE), &spec);
        let whole = attack_keys(target, &spec, SearchBudget::full());
        let merged = (0..3)
            .map(|i| {
                let plan = SearchPlan {
                    target,
                    spec,
                    method: Method::Pairs,
                    slice: Slice::new(i, 3).unwrap(),
                    pieces: 5,
                    checkpoint: None,
                };
                run_search(&plan).unwrap().0
            })
            .fold(KeyPool::new(target, spec.id(), Vec::new()), KeyPool::merge);
        assert_eq!(merged.keys(), whole.keys());
    }
}
