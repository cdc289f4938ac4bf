//! Configuration and command implementations behind the `lscheme` binary.

pub mod commands;
pub mod config;
pub mod custom;

pub use commands::{
    EXIT_TAU_INADMISSIBLE, InjectionOutcome, ProbeOutcome, TauOutcome, cmd_check_tau,
    cmd_convergence_study, cmd_injection, cmd_lscheme_probe, exit_code,
};
pub use config::{MobilityChoice, ProblemKind, ResolvedRun, RunConfig};
