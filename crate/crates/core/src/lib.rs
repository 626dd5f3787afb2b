//! Low-disturbance trajectory planning for a 7-joint arm on a free-floating
//! spacecraft.
//!
//! The pipeline has three stages:
//!
//! 1. [`demos`] produces demonstration trajectories with finite-horizon LQR in
//!    joint space, diversified by cost scaling, elastic-band deformation and
//!    process noise.
//! 2. [`promp`] encodes the demonstrations as a Gaussian over radial-basis
//!    weights (a probabilistic movement primitive).
//! 3. [`planner`] conditions the primitive on start and goal, samples
//!    candidate trajectories and keeps the one that disturbs the spacecraft
//!    least, using the zero-momentum kinematics of [`model`].
//!
//! [`dynamics`] provides the full free-floating equations of motion, used to
//! verify the momentum model.

pub mod demos;
pub mod dynamics;
mod error;
pub mod math;
pub mod model;
pub mod planner;
pub mod promp;

pub use error::{Error, Result};
pub use math::{GenMatrix, GenVector, JointVector, N_GEN, N_JOINTS};
pub use model::{home_configuration, Pose, RobotModel, SystemState};
