use nalgebra::{Matrix6, Vector3, Vector6};

use super::kinematics::{Kinematics, Pose};
use super::momentum::coupling_from_kinematics;
use super::{RobotModel, SystemState};
use crate::math::{rotation_log, JointVector, N_JOINTS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub damping: f64,
    pub max_step: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            damping: 1e-2,
            max_step: 0.2,
            max_iterations: 500,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub phi_m: JointVector,
    /// Spacecraft attitude reached by following the solver's joint path under zero momentum.
    pub phi_s: Vector3<f64>,
    pub iterations: usize,
    pub position_residual: f64,
    pub orientation_residual: f64,
}

/// Damped-least-squares resolved-rate IK on the generalized Jacobian.
///
/// Each joint step is accompanied by the spacecraft attitude change it induces,
/// so the reported configuration is reachable by a zero-momentum motion from
/// `start`.
pub fn resolved_rate_ik(
    model: &RobotModel,
    start: &SystemState,
    target: &Pose,
    opts: &IkOptions,
) -> Result<IkSolution> {
    let mut phi_s = start.phi_s;
    let mut phi_m = start.phi_m;

    let base = Kinematics::new(model, &phi_s, &phi_m)?;
    let base_pos = base.r_s + base.origins[0];
    let distance = (target.position - base_pos).norm();
    if distance > model.arm_reach() * 1.1 {
        return Err(Error::UnreachableTarget {
            iterations: 0,
            position_residual: distance - model.arm_reach(),
            orientation_residual: f64::NAN,
        });
    }

    let damping_sq = opts.damping * opts.damping;
    let mut pos_res = f64::INFINITY;
    let mut ori_res = f64::INFINITY;
    for iteration in 0..=opts.max_iterations {
        let kin = Kinematics::new(model, &phi_s, &phi_m)?;
        let eef = kin.end_effector();
        let pos_err = target.position - eef.position;
        let ori_err = rotation_log(&(target.rotation * eef.rotation.transpose()));
        pos_res = pos_err.norm();
        ori_res = ori_err.norm();
        if pos_res <= opts.position_tolerance && ori_res <= opts.orientation_tolerance {
            return Ok(IkSolution {
                phi_m,
                phi_s,
                iterations: iteration,
                position_residual: pos_res,
                orientation_residual: ori_res,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }
        let coupling = coupling_from_kinematics(&kin)?.rate_coupling()?;
        let full = kin.end_effector_jacobian();
        let j_star = full.fixed_view::<6, N_JOINTS>(0, 3) + full.fixed_view::<6, 3>(0, 0) * coupling;
        let err = Vector6::new(pos_err.x, pos_err.y, pos_err.z, ori_err.x, ori_err.y, ori_err.z);
        let gram = j_star * j_star.transpose() + Matrix6::identity() * damping_sq;
        let Some(y) = gram.cholesky().map(|c| c.solve(&err)) else {
            break;
        };
        let mut step = j_star.transpose() * y;
        let largest = step.amax();
        if largest > opts.max_step {
            step *= opts.max_step / largest;
        }
        phi_s += coupling * step;
        phi_m += step;
    }
    Err(Error::UnreachableTarget {
        iterations: opts.max_iterations,
        position_residual: pos_res,
        orientation_residual: ori_res,
    })
}
