//! Generalized disjunctive programming toolkit.
//!
//! * [`model`] — GDP models: variables, global constraints, disjunctions of
//!   constraint blocks, and CNF logic over disjunct indicators.
//! * [`reformulate`] — big-M and convex-hull reformulations to MILP.
//! * [`lp`] — bounded-variable revised simplex.
//! * [`milp`] — branch-and-bound and MPS export.
//! * [`pwa`] — disjunctive MPC for piecewise-affine systems.
//! * [`thermostat`] — relay-thermostat building case.
//! * [`suite`] — seeded random GDP instances and formulation checks.

// Numeric kernels walk several parallel arrays by the same index.
#![allow(clippy::needless_range_loop)]

pub mod lp;
pub mod milp;
pub mod model;
pub mod problem;
pub mod pwa;
pub mod reformulate;
pub mod suite;
pub mod thermostat;
