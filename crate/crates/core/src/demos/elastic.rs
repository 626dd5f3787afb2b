use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::JointTrajectory;
use crate::math::JointVector;
use crate::model::{generalized_jacobian_from, Kinematics, RobotModel};
use crate::{Error, Result};

/// Spherical task-space obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: Vector3<f64>, radius: f64) -> Self {
        Self {
            center: center.into(),
            radius,
        }
    }

    fn center_vec(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticBandOptions {
    /// Influence radius as a multiple of the obstacle radius.
    pub influence: f64,
    /// Joint displacement per unit of `J*^T f`.
    pub gain: f64,
    pub max_iterations: usize,
}

impl Default for ElasticBandOptions {
    fn default() -> Self {
        Self {
            influence: 2.0,
            gain: 0.05,
            max_iterations: 200,
        }
    }
}

/// End-effector positions along a joint trajectory with the spacecraft at zero
/// attitude and the system CoM at the origin.
pub fn end_effector_path(model: &RobotModel, traj: &JointTrajectory) -> Result<Vec<Vector3<f64>>> {
    traj.q
        .iter()
        .map(|q| Ok(Kinematics::new(model, &Vector3::zeros(), q)?.end_effector().position))
        .collect()
}

fn penetrates(path: &[Vector3<f64>], obstacles: &[Obstacle]) -> bool {
    path.iter()
        .any(|p| obstacles.iter().any(|o| (p - o.center_vec()).norm() < o.radius))
}

fn repulsion(p: &Vector3<f64>, obstacles: &[Obstacle], influence: f64) -> Vector3<f64> {
    let mut f = Vector3::zeros();
    for o in obstacles {
        let reach = influence * o.radius;
        let offset = p - o.center_vec();
        let d = offset.norm();
        if d < reach {
            let dir = if d > 1e-12 { offset / d } else { Vector3::z() };
            f += dir * (reach - d);
        }
    }
    f
}

/// Deforms the joint path so the end-effector clears `obstacles`.
///
/// Waypoints inside an influence sphere are pushed along `J*^T f` of the
/// repulsive vector, the displaced stretch is relaxed by a three-point moving
/// average, and the loop stops once no end-effector sample lies inside an
/// obstacle. Endpoints are never moved; interior velocities of the result are
/// central differences of the deformed positions.
pub fn elastic_band_perturb(
    traj: &JointTrajectory,
    obstacles: &[Obstacle],
    model: &RobotModel,
    opts: &ElasticBandOptions,
) -> Result<JointTrajectory> {
    let n = traj.len();
    let mut q: Vec<JointVector> = traj.q.clone();
    for iteration in 0..=opts.max_iterations {
        let current = JointTrajectory {
            times: Vec::new(),
            q: q.clone(),
            q_dot: Vec::new(),
        };
        let path = end_effector_path(model, &current)?;
        if !penetrates(&path, obstacles) {
            if iteration == 0 {
                return Ok(traj.clone());
            }
            let mut out = JointTrajectory {
                times: traj.times.clone(),
                q,
                q_dot: traj.q_dot.clone(),
            };
            out.recompute_interior_velocities();
            log::debug!("elastic band cleared after {iteration} iterations");
            return Ok(out);
        }
        if iteration == opts.max_iterations || n < 3 {
            break;
        }

        let mut displaced = q.clone();
        let mut span: Option<(usize, usize)> = None;
        for k in 1..n - 1 {
            let f = repulsion(&path[k], obstacles, opts.influence);
            if f == Vector3::zeros() {
                continue;
            }
            let kin = Kinematics::new(model, &Vector3::zeros(), &q[k])?;
            let j_star = generalized_jacobian_from(&kin)?;
            let j_pos = j_star.fixed_rows::<3>(0);
            displaced[k] += j_pos.transpose() * f * opts.gain;
            span = Some(span.map_or((k, k), |(a, _)| (a, k)));
        }
        let Some((first, last)) = span else { break };
        let lo = first.saturating_sub(1).max(1);
        let hi = (last + 1).min(n - 2);
        for k in lo..=hi {
            q[k] = (displaced[k - 1] + displaced[k] + displaced[k + 1]) / 3.0;
        }
    }
    Err(Error::DeformationFailure {
        iterations: opts.max_iterations,
    })
}
