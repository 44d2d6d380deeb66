//! Command implementations behind the `mcdenoise` binary.
//!
//! Every command is deterministic under `--seed`: mask streams, shuffles and
//! noise offsets are derived from it by fixed rules, and gradient and
//! Monte-Carlo reductions run in a fixed order whatever the thread count.

pub mod args;
pub mod commands;
pub mod echo;

pub use args::Cli;
pub use commands::run;
