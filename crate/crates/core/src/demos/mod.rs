//! Synthetic demonstrations: finite-horizon LQR reaches in joint space, diversified
//! by cost scaling, elastic-band obstacles and process noise.

mod dataset;
mod elastic;
mod io;
mod lqr;

pub use dataset::{generate_dataset, DatasetConfig, DemoInfo, Strategy, StrategyDetail, TrajectoryDataset};
pub use elastic::{elastic_band_perturb, end_effector_path, ElasticBandOptions, Obstacle};
pub use io::{read_dataset, read_trajectory_csv, write_dataset, write_trajectory_csv, DATASET_MANIFEST};
pub use lqr::{
    dare, generate_demo, generate_demo_with_noise, rest_state, riccati_backward, rollout,
    zoh_double_integrator, DemoState, LqrConfig, LqrSetup, Rollout,
};

use crate::math::JointVector;
use crate::{Error, Result};

/// Time-stamped joint positions and velocities on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<JointVector>,
    pub q_dot: Vec<JointVector>,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time step, or 0 for trajectories with fewer than two points.
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Checks lengths, finiteness and uniform spacing.
    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n == 0 {
            return Err(Error::Parameter("trajectory is empty".into()));
        }
        if self.q.len() != n || self.q_dot.len() != n {
            return Err(Error::Parameter(format!(
                "trajectory has {n} times but {} positions and {} velocities",
                self.q.len(),
                self.q_dot.len()
            )));
        }
        if self.times.iter().any(|t| !t.is_finite())
            || self.q.iter().chain(&self.q_dot).any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Parameter("trajectory contains non-finite values".into()));
        }
        if n >= 2 {
            let dt = self.dt();
            if dt <= 0.0 {
                return Err(Error::Parameter("trajectory times must increase".into()));
            }
            for (k, w) in self.times.windows(2).enumerate() {
                if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
                    return Err(Error::Parameter(format!("non-uniform time step at index {k}")));
                }
            }
        }
        Ok(())
    }

    /// Replaces interior velocities by central differences of the positions.
    pub(crate) fn recompute_interior_velocities(&mut self) {
        let n = self.len();
        if n < 3 {
            return;
        }
        let dt = self.dt();
        for k in 1..n - 1 {
            self.q_dot[k] = (self.q[k + 1] - self.q[k - 1]) / (2.0 * dt);
        }
    }
}
