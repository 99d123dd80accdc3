//! Single-target placement through a convex lifting of the pair
//! differences, plus rounding back to a feasible geometry.

mod relaxation;
pub mod solver;

pub use relaxation::{
    build_relaxation, doa_spread, recover_geometry, rotate_solution, solve_sdp, place_single_target, RelaxationSolution,
    SdpProblem,
};
pub use solver::{ConeBlock, DualSdp, SdpError, SdpResult, SdpSettings};
