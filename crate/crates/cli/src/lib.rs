//! Command-line harness for data-driven minimum-energy control: dataset
//! generation, one-shot solving and the two Monte Carlo sweeps.

pub mod bench;
pub mod commands;
