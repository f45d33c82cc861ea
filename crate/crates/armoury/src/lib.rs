//! Files, transports and the command line around `armoury-core`.

pub mod cli;
pub mod formats;
pub mod oracle;
pub mod pipeline;
pub mod search;
