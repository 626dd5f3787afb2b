use nalgebra::{Matrix3, SMatrix, Vector3};

use super::kinematics::{arm_frames, Kinematics, N_BODIES};
use super::{RobotModel, SystemState};
use crate::math::{check_attitude, euler_rate_map, zyx_rotation, GenVector, JointVector, N_JOINTS};
use crate::{Error, Result};

/// Largest accepted condition number of the spacecraft coupling inertia.
pub const MAX_INERTIA_CONDITION: f64 = 1e12;

/// Blocks of the zero-momentum constraint `0 = I_s phi_s_dot + I_m phi_m_dot`.
///
/// The constraint is written for the momenta conjugate to the Euler rates, i.e.
/// `E^T L` with `L` the angular momentum about the system CoM and `E` the
/// Euler-rate map. `I_s = E^T I_lock E` is then symmetric positive definite and
/// the constraint is equivalent to `L = 0` wherever `E` is invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingInertias {
    /// `I_s`, 3x3.
    pub spacecraft: Matrix3<f64>,
    /// `I_m`, 3x7.
    pub arm: SMatrix<f64, 3, N_JOINTS>,
    /// Euler-rate map `E` (inertial angular velocity = `E phi_s_dot`).
    pub euler_map: Matrix3<f64>,
    /// Composite inertia of the system locked at this configuration, about the origin.
    pub locked_inertia: Matrix3<f64>,
}

impl CouplingInertias {
    /// Angular momentum `L` about the system CoM for the given rates.
    pub fn angular_momentum(&self, phi_s_dot: &Vector3<f64>, phi_m_dot: &JointVector) -> Vector3<f64> {
        let conjugate = self.spacecraft * phi_s_dot + self.arm * phi_m_dot;
        self.euler_map
            .transpose()
            .lu()
            .solve(&conjugate)
            .unwrap_or_else(|| Vector3::repeat(f64::NAN))
    }

    /// `-I_s^{-1} I_m`: joint rates to induced Euler rates.
    pub fn rate_coupling(&self) -> Result<SMatrix<f64, 3, N_JOINTS>> {
        let chol = self.spacecraft.cholesky().ok_or(Error::NearSingularInertia {
            condition: f64::INFINITY,
        })?;
        Ok(-chol.solve(&self.arm))
    }
}

pub(crate) fn coupling_from_kinematics(kin: &Kinematics) -> Result<CouplingInertias> {
    let map = kin.angular_momentum_map();
    let e_t = kin.euler_map.transpose();
    let conjugate = e_t * map;
    let spacecraft_raw = conjugate.fixed_view::<3, 3>(0, 0).into_owned();
    let spacecraft = (spacecraft_raw + spacecraft_raw.transpose()) * 0.5;
    let arm = conjugate.fixed_view::<3, N_JOINTS>(0, 3).into_owned();
    let locked = map.fixed_view::<3, 3>(0, 0).into_owned()
        * kin
            .euler_map
            .try_inverse()
            .ok_or(Error::AttitudeSingularity { pitch: kin.phi_s[1] })?;
    let eig = spacecraft.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_INERTIA_CONDITION {
        return Err(Error::NearSingularInertia { condition });
    }
    Ok(CouplingInertias {
        spacecraft,
        arm,
        euler_map: kin.euler_map,
        locked_inertia: (locked + locked.transpose()) * 0.5,
    })
}

pub fn coupling_inertias(model: &RobotModel, state: &SystemState) -> Result<CouplingInertias> {
    coupling_from_kinematics(&Kinematics::new(model, &state.phi_s, &state.phi_m)?)
}

/// Spacecraft rates induced by joint motion under zero momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacecraftRates {
    pub phi_s_dot: Vector3<f64>,
    pub v_s: Vector3<f64>,
}

pub(crate) fn rates_from_kinematics(kin: &Kinematics, phi_m_dot: &JointVector) -> Result<SpacecraftRates> {
    let coupling = coupling_from_kinematics(kin)?;
    let phi_s_dot = coupling.rate_coupling()? * phi_m_dot;
    let mut phi_dot = GenVector::zeros();
    phi_dot.fixed_rows_mut::<3>(0).copy_from(&phi_s_dot);
    phi_dot.fixed_rows_mut::<N_JOINTS>(3).copy_from(phi_m_dot);
    Ok(SpacecraftRates {
        phi_s_dot,
        v_s: kin.spacecraft_velocity_jacobian() * phi_dot,
    })
}

pub fn spacecraft_rates(
    model: &RobotModel,
    phi_s: &Vector3<f64>,
    phi_m: &JointVector,
    phi_m_dot: &JointVector,
) -> Result<SpacecraftRates> {
    rates_from_kinematics(&Kinematics::new(model, phi_s, phi_m)?, phi_m_dot)
}

pub(crate) fn generalized_jacobian_from(kin: &Kinematics) -> Result<SMatrix<f64, 6, N_JOINTS>> {
    let coupling = coupling_from_kinematics(kin)?;
    let g = coupling.rate_coupling()?;
    let full = kin.end_effector_jacobian();
    let j_s = full.fixed_view::<6, 3>(0, 0);
    let j_m = full.fixed_view::<6, N_JOINTS>(0, 3);
    Ok(j_m + j_s * g)
}

/// `J* = J_m - J_s I_s^{-1} I_m`, rows `[linear; angular]`.
pub fn generalized_jacobian(model: &RobotModel, state: &SystemState) -> Result<SMatrix<f64, 6, N_JOINTS>> {
    generalized_jacobian_from(&Kinematics::new(model, &state.phi_s, &state.phi_m)?)
}

/// Total linear momentum and angular momentum about the origin, summed body by
/// body from the state's own spacecraft twist and joint rates.
pub fn system_momentum(model: &RobotModel, state: &SystemState) -> Result<(Vector3<f64>, Vector3<f64>)> {
    check_attitude(&state.phi_s)?;
    let rot0 = zyx_rotation(&state.phi_s);
    let omega0 = euler_rate_map(&state.phi_s) * state.phi_s_dot;
    let (origins, frames) = arm_frames(model, &rot0, &state.phi_m);

    let principal = |p: [f64; 3]| Matrix3::from_diagonal(&Vector3::from(p));
    let mut linear = state.v_s * model.spacecraft.mass;
    let mut angular = rot0 * principal(model.spacecraft.inertia_principal) * rot0.transpose() * omega0
        + state.r_s.cross(&(state.v_s * model.spacecraft.mass));

    let mut omega = omega0;
    let mut origin_vel = state.v_s + omega0.cross(&origins[0]);
    for (i, link) in model.arm_links.iter().enumerate() {
        let b = i + 1;
        debug_assert!(b < N_BODIES);
        omega += frames[i].column(2) * state.phi_m_dot[i];
        let span = origins[b] - origins[i];
        let com_vel = origin_vel + omega.cross(&(span * link.com_offset_ratio));
        let com_pos = state.r_s + origins[i] + span * link.com_offset_ratio;
        let inertia = frames[b] * principal(link.inertia_principal) * frames[b].transpose();
        linear += com_vel * link.mass;
        angular += inertia * omega + com_pos.cross(&(com_vel * link.mass));
        origin_vel += omega.cross(&span);
    }
    Ok((linear, angular))
}
