//! Exact collective-spin simulation of `N` spin-1/2 particles in the
//! symmetric subspace, and optimization of few-pulse one-axis-twisting
//! protocols that approach Heisenberg-limited squeezing.
//!
//! Time is measured in units of `1/chi`, the one-axis-twisting strength.

pub mod analysis;
pub mod bessel;
pub mod error;
pub mod optimize;
pub mod par;
pub mod propagator;
pub mod spin;
pub mod tridiag;

pub use error::{Error, Result};
pub use par::Execution;
pub use propagator::{
    evolve_tat, evolve_twist, protocol_to_pulses, rotate_x, run_protocol, run_pulses, Protocol, PulseSequence,
    TwistSegment,
};
pub use spin::{expectations, make_coherent_x, squeezing_parameter, DickeState, SqueezingReport};
