//! Open-loop broadcast control of ensembles driven by marked jump-diffusion SDEs.
//!
//! The crate computes a deterministic control signal shared by every agent of an
//! ensemble by alternating a one-step Monte Carlo backward recursion for the
//! costate field with gradient steps on the Hamiltonian functional. A 1D
//! finite-difference discretization of the forward and backward
//! Chapman-Kolmogorov operators is included to cross-check the Monte Carlo
//! estimators and the operator identities they rely on.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. With `std` enabled, node- and trajectory-level loops run on rayon;
//! results are bit-identical either way because every random stream is keyed
//! by its node, trajectory or time index rather than by worker.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cost;
pub mod costate;
pub mod density;
pub mod error;
pub mod gradient;
pub mod grid;
pub mod math;
pub mod par;
pub mod pide;
pub mod process;
pub mod rng;
pub mod schedule;
pub mod stats;

pub use cost::CostSpec;
pub use costate::{backstep, backward_sweep, full_horizon_costate, terminal_costate, CostateField};
pub use density::{
    evaluate_cost, evaluate_cost_conditional, histogram_density, sample_ensemble, simulate_density,
    DensityField, InitialDistribution,
};
pub use error::{Error, Result};
pub use gradient::{hamiltonian_gradient, run_ibc, update_control, IbcOptions, OptimizationResult};
pub use grid::{Field, Obstacle, SpaceTimeGrid};
pub use process::{
    make_example_model, simulate_path, step, JumpDiffusion, MarkDistribution, ProcessModel,
    Trajectory,
};
pub use rng::StreamSeed;
pub use schedule::{ControlSchedule, ScheduleKind};
pub use stats::Estimate;
