//! Code armouring primitives.
//!
//! A three-register LFSR cipher filtered by the majority function maps keys
//! to 59-bit chunks. Bytecode words are packed into chunks, every chunk is
//! replaced by a precomputed key that decodes to it, and only a separate
//! oracle holding the cipher can turn the keys back into code. Because many
//! keys decode to the same chunk, every protected build can be resampled
//! into a different but equivalent variant.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, transports and
//! the command line live in the `armoury` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod altgen;
pub mod asm;
pub mod cipher;
pub mod entropy;
pub mod gf2;
pub mod ir;
pub mod keysearch;
pub mod mutation;
pub mod packer;
pub mod vm;
pub mod wire;

pub use cipher::{majority, sco, Chunk, CipherKey, CipherSpec, LfsrSpec};
pub use keysearch::{attack_keys, attack_keys_by_r1, brute_force_keys, KeyPool, SearchBudget, Slice};
pub use packer::{PackMode, ProtectedBlob};

/// Crate version, printed in reproducibility headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
