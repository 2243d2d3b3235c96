//! Command-line companion of `hbl-core`: system files, reports, and the
//! periodic pseudo-spectral simulator.

pub mod cli;
pub mod input;
pub mod output;
pub mod sim;
