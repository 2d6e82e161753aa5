//! Weakly-compressible SPH: smoothing kernel, equation of state, particle
//! interaction kernels and the time integrator.

pub mod dynamics;
pub mod eos;
pub mod fluid;
pub mod kernel;
pub mod solver;

pub use dynamics::Diagnostics;
pub use eos::{eos_density, eos_pressure};
pub use fluid::{Constants, FluidVariables, ParticleSet, PhysicsParams};
pub use kernel::{kernel_grad_w, kernel_w, WendlandC2};
pub use solver::{compute_timestep, Energy, PhaseTimes, PhysicsError, Solver, SnapshotRow, StepInfo, TimeStep};
