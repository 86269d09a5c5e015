#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coupling_engine;
pub mod error;
pub mod jump_sampler;
pub mod numerics;
pub mod pdmp_sim;
pub mod rate_model;
pub mod rng;
pub mod scaling_lab;
pub mod state;
pub mod stats;

pub use analysis::{BoundParams, BoundReport, DecayFit, EmpiricalLaw, TvCurve};
pub use coupling_engine::{CoupledPaths, CouplingOutcome};
pub use error::{Error, Result};
pub use pdmp_sim::{Event, EventKind, Trajectory, Walker};
pub use rate_model::{Potential, RatePair, RatePairSpec, RateSpec};
pub use scaling_lab::{InitialVelocity, ScalingFamily, TimeChange};
pub use state::{Flavor, State, Velocity};
