//! Simulator and security-analysis toolkit for a reusable-key quantum
//! encryption protocol built on dormant-entanglement states.
//!
//! Modules, bottom up:
//! - [`qsim`]: dense state vectors, gates, measurement, partial trace, eigensystems.
//! - [`states`]: GHZ, `psi`, `psi_d`, `phi_d` and their structural checks.
//! - [`protocol`]: Phase-1 rounds, Phase-2 XOR pad, authentication, resource counts.
//! - [`adversary`]: eavesdropper strategies and the success-probability analysis.
//! - [`harness`]: seeded experiments, sweeps, tamper statistics, persistence.
//! - [`cli`]: command implementations behind the `psqe` binary.

pub mod qsim;
pub mod states;
pub mod protocol;
pub mod adversary;
pub mod harness;
pub mod cli;
