//! Mixed-integer solving on top of the simplex relaxation, and MPS export.

mod bnb;
pub mod mps;

pub use bnb::{
    gap_percent, relaxation_bound, solve, Branching, NodeOrder, RelaxationError, SolveOptions,
    SolveResult, SolveStatus,
};
pub use mps::{export_mps, read_mps, to_mps_string, write_mps, MpsError};
