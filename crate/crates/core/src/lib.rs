//! Link-level simulation of telegram-splitting LPWAN transmission under bursty
//! interference.
//!
//! The crate is organized along the receive chain:
//!
//! - [`fec`]: convolutional code, puncturing, interleaving and soft Viterbi decoding.
//! - [`telegram`]: splitting a codeword into sub-packets with embedded training.
//! - [`interference`]: Bernoulli interferer arrivals and received-sample synthesis.
//! - [`markov`]: interference Markov chains (full-state, reduced-state).
//! - [`detector`]: the BCJR engine plus MAP, genie, erasure and constant-variance detectors.
//! - [`scalable`]: blind variance-partition model learned from signal-free samples.
//! - [`perf`]: effective-SINR performance model and BCJR complexity figures.
//! - [`harness`]: scenario configuration and Monte Carlo experiments.

pub mod detector;
pub mod error;
pub mod fec;
pub mod harness;
pub mod interference;
pub mod llr;
pub mod markov;
pub mod perf;
pub mod rng;
pub mod scalable;
pub mod telegram;

pub use error::{Error, Result};
pub use llr::LlrFrame;
