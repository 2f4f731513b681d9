//! Closed-loop thermostat simulation (relay baseline and receding-horizon
//! disjunctive MPC), the open-loop optimality-gap study, and the pieces the
//! `gdp-sim` command line is built from.

pub mod closed_loop;
pub mod config;
pub mod gapstudy;
pub mod scenario;
pub mod selftest;
pub mod trace;

use gdp_core::pwa::PwaError;
use gdp_core::thermostat::ThermostatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("MPC solve at period {period} ended with status {status}")]
    Solve { period: usize, status: String },
    #[error(transparent)]
    Thermostat(#[from] ThermostatError),
    #[error(transparent)]
    Pwa(#[from] PwaError),
}

pub use closed_loop::{simulate_dmpc, simulate_rtc, DmpcConfig};
pub use gapstudy::{run_gap_study, GapStudyConfig, GapStudyReport};
pub use scenario::Scenario;
pub use trace::{audit_csv, ClosedLoopTrace};
