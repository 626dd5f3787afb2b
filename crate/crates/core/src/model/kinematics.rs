use nalgebra::{Matrix3, SMatrix, Vector3};

use super::{RobotModel, SystemState};
use crate::math::{
    check_attitude, euler_rate_map, skew, zyx_rotation, GenMatrix, GenVector, JointVector,
    N_GEN, N_JOINTS,
};
use crate::Result;

/// Number of rigid bodies: spacecraft plus arm links.
pub(crate) const N_BODIES: usize = N_JOINTS + 1;

pub type BodyJacobian = SMatrix<f64, 3, N_GEN>;

/// Position and orientation in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// Output of [`forward_kinematics`].
#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    /// Body 0 is the spacecraft; body `i` is arm link `i` (CoM position, DH frame `i` orientation).
    pub link_poses: [Pose; N_BODIES],
    /// Joint origins: entry 0 is the arm base (frame 0), entry 7 the end-effector.
    pub joint_positions: [Vector3<f64>; N_BODIES],
    pub end_effector: Pose,
}

/// Kinematic quantities of one configuration, with the spacecraft placed so the
/// system CoM sits at the inertial origin.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub phi_s: Vector3<f64>,
    pub phi_m: JointVector,
    /// Euler-rate to angular-velocity map of the spacecraft.
    pub euler_map: Matrix3<f64>,
    pub r_s: Vector3<f64>,
    /// DH frame origins relative to the spacecraft CoM; 0 is the arm base, 7 the end-effector.
    pub(crate) origins: [Vector3<f64>; N_BODIES],
    /// DH frame orientations; frame 0 is the spacecraft orientation.
    pub(crate) frames: [Matrix3<f64>; N_BODIES],
    /// Body CoM positions relative to the spacecraft CoM (body 0 is the spacecraft).
    pub(crate) rel_com: [Vector3<f64>; N_BODIES],
    pub(crate) masses: [f64; N_BODIES],
    pub(crate) ratios: [f64; N_BODIES],
    pub(crate) inertia_world: [Matrix3<f64>; N_BODIES],
    /// Absolute CoM velocity Jacobians (include the induced spacecraft translation).
    pub(crate) lin_jac: [BodyJacobian; N_BODIES],
    pub(crate) ang_jac: [BodyJacobian; N_BODIES],
    pub(crate) eef_lin_jac: BodyJacobian,
    pub(crate) eef_ang_jac: BodyJacobian,
    pub(crate) total_mass: f64,
}

/// Frame origins and orientations of the arm relative to the spacecraft CoM.
pub(crate) fn arm_frames(
    model: &RobotModel,
    rot0: &Matrix3<f64>,
    phi_m: &JointVector,
) -> ([Vector3<f64>; N_BODIES], [Matrix3<f64>; N_BODIES]) {
    let mut origins = [Vector3::zeros(); N_BODIES];
    let mut frames = [Matrix3::identity(); N_BODIES];
    origins[0] = rot0 * model.mount_offset;
    frames[0] = *rot0;
    for (i, row) in model.dh.iter().enumerate() {
        let theta = phi_m[i] + row.theta_offset;
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = row.alpha.sin_cos();
        let local_rot = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
        let local_trans = Vector3::new(row.a * ct, row.a * st, row.d);
        origins[i + 1] = origins[i] + frames[i] * local_trans;
        frames[i + 1] = frames[i] * local_rot;
    }
    (origins, frames)
}

impl Kinematics {
    pub fn new(model: &RobotModel, phi_s: &Vector3<f64>, phi_m: &JointVector) -> Result<Self> {
        check_attitude(phi_s)?;
        let rot0 = zyx_rotation(phi_s);
        let euler_map = euler_rate_map(phi_s);
        let (origins, frames) = arm_frames(model, &rot0, phi_m);

        let mut masses = [model.spacecraft.mass; N_BODIES];
        let mut ratios = [0.0; N_BODIES];
        let mut rel_com = [Vector3::zeros(); N_BODIES];
        let mut inertia_world = [Matrix3::zeros(); N_BODIES];
        let principal = |p: [f64; 3]| Matrix3::from_diagonal(&Vector3::from(p));
        inertia_world[0] = rot0 * principal(model.spacecraft.inertia_principal) * rot0.transpose();
        for (i, link) in model.arm_links.iter().enumerate() {
            let b = i + 1;
            masses[b] = link.mass;
            ratios[b] = link.com_offset_ratio;
            rel_com[b] = origins[i] + (origins[b] - origins[i]) * link.com_offset_ratio;
            inertia_world[b] = frames[b] * principal(link.inertia_principal) * frames[b].transpose();
        }
        let total_mass = model.total_mass;
        let r_s = -rel_com
            .iter()
            .zip(masses.iter())
            .map(|(c, m)| c * *m)
            .sum::<Vector3<f64>>()
            / total_mass;

        let axes: [Vector3<f64>; N_JOINTS] = std::array::from_fn(|j| frames[j].column(2).into_owned());

        // Jacobian of a point relative to the spacecraft CoM that moves with body `upto`.
        let rel_point_jac = |p: &Vector3<f64>, upto: usize| -> BodyJacobian {
            let mut jac = BodyJacobian::zeros();
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(p) * euler_map));
            for j in 0..upto {
                jac.fixed_view_mut::<3, 1>(0, 3 + j)
                    .copy_from(&axes[j].cross(&(p - origins[j])));
            }
            jac
        };
        let ang_jac_of = |upto: usize| -> BodyJacobian {
            let mut jac = BodyJacobian::zeros();
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&euler_map);
            for j in 0..upto {
                jac.fixed_view_mut::<3, 1>(0, 3 + j).copy_from(&axes[j]);
            }
            jac
        };

        let rel_jac: [BodyJacobian; N_BODIES] = std::array::from_fn(|b| rel_point_jac(&rel_com[b], b));
        let spacecraft_jac = -rel_jac
            .iter()
            .zip(masses.iter())
            .map(|(j, m)| j * *m)
            .sum::<BodyJacobian>()
            / total_mass;
        let lin_jac: [BodyJacobian; N_BODIES] = std::array::from_fn(|b| rel_jac[b] + spacecraft_jac);
        let ang_jac: [BodyJacobian; N_BODIES] = std::array::from_fn(ang_jac_of);
        let eef_lin_jac = rel_point_jac(&origins[N_JOINTS], N_JOINTS) + spacecraft_jac;
        let eef_ang_jac = ang_jac[N_JOINTS];

        Ok(Self {
            phi_s: *phi_s,
            phi_m: *phi_m,
            euler_map,
            r_s,
            origins,
            frames,
            rel_com,
            masses,
            ratios,
            inertia_world,
            lin_jac,
            ang_jac,
            eef_lin_jac,
            eef_ang_jac,
            total_mass,
        })
    }

    pub fn spacecraft_rotation(&self) -> Matrix3<f64> {
        self.frames[0]
    }

    /// Absolute body CoM position (body 0 is the spacecraft).
    pub fn body_position(&self, body: usize) -> Vector3<f64> {
        self.r_s + self.rel_com[body]
    }

    pub fn end_effector(&self) -> Pose {
        Pose {
            position: self.r_s + self.origins[N_JOINTS],
            rotation: self.frames[N_JOINTS],
        }
    }

    /// Jacobian of the spacecraft CoM velocity with respect to the generalized rates.
    pub fn spacecraft_velocity_jacobian(&self) -> BodyJacobian {
        self.lin_jac[0]
    }

    /// End-effector 6x10 Jacobian, rows `[linear; angular]`.
    pub fn end_effector_jacobian(&self) -> SMatrix<f64, 6, N_GEN> {
        let mut jac = SMatrix::<f64, 6, N_GEN>::zeros();
        jac.fixed_view_mut::<3, N_GEN>(0, 0).copy_from(&self.eef_lin_jac);
        jac.fixed_view_mut::<3, N_GEN>(3, 0).copy_from(&self.eef_ang_jac);
        jac
    }

    /// Maps generalized rates to the angular momentum about the origin.
    pub fn angular_momentum_map(&self) -> BodyJacobian {
        (0..N_BODIES)
            .map(|b| {
                self.inertia_world[b] * self.ang_jac[b]
                    + skew(&self.body_position(b)) * self.lin_jac[b] * self.masses[b]
            })
            .sum()
    }

    pub fn mass_matrix(&self) -> GenMatrix {
        (0..N_BODIES)
            .map(|b| {
                self.lin_jac[b].transpose() * self.lin_jac[b] * self.masses[b]
                    + self.ang_jac[b].transpose() * self.inertia_world[b] * self.ang_jac[b]
            })
            .sum()
    }

    pub fn kinetic_energy(&self, phi_dot: &GenVector) -> f64 {
        (0..N_BODIES)
            .map(|b| {
                let v = self.lin_jac[b] * phi_dot;
                let w = self.ang_jac[b] * phi_dot;
                0.5 * self.masses[b] * v.norm_squared() + 0.5 * w.dot(&(self.inertia_world[b] * w))
            })
            .sum()
    }
}

/// Per-link and end-effector poses. The spacecraft position is taken from
/// `state.r_s` as given; use [`system_com_spacecraft_position`] to obtain the
/// CoM-consistent value.
pub fn forward_kinematics(model: &RobotModel, state: &SystemState) -> Result<FkResult> {
    check_attitude(&state.phi_s)?;
    let rot0 = zyx_rotation(&state.phi_s);
    let (origins, frames) = arm_frames(model, &rot0, &state.phi_m);
    let mut link_poses = [Pose {
        position: state.r_s,
        rotation: rot0,
    }; N_BODIES];
    for (i, link) in model.arm_links.iter().enumerate() {
        let b = i + 1;
        link_poses[b] = Pose {
            position: state.r_s + origins[i] + (origins[b] - origins[i]) * link.com_offset_ratio,
            rotation: frames[b],
        };
    }
    let joint_positions = origins.map(|o| o + state.r_s);
    Ok(FkResult {
        link_poses,
        joint_positions,
        end_effector: Pose {
            position: joint_positions[N_JOINTS],
            rotation: frames[N_JOINTS],
        },
    })
}

/// Spacecraft CoM position that keeps the system CoM at the inertial origin.
pub fn system_com_spacecraft_position(
    model: &RobotModel,
    phi_s: &Vector3<f64>,
    phi_m: &JointVector,
) -> Result<Vector3<f64>> {
    check_attitude(phi_s)?;
    let rot0 = zyx_rotation(phi_s);
    let (origins, _) = arm_frames(model, &rot0, phi_m);
    let weighted: Vector3<f64> = model
        .arm_links
        .iter()
        .enumerate()
        .map(|(i, l)| (origins[i] + (origins[i + 1] - origins[i]) * l.com_offset_ratio) * l.mass)
        .sum();
    Ok(-weighted / model.total_mass)
}

/// End-effector Jacobians `(J_s, J_m)` with `v_eef = J_s phi_s_dot + J_m phi_m_dot`,
/// rows `[linear; angular]`, including the base translation induced through the CoM constraint.
pub fn jacobians(
    model: &RobotModel,
    state: &SystemState,
) -> Result<(SMatrix<f64, 6, 3>, SMatrix<f64, 6, N_JOINTS>)> {
    let kin = Kinematics::new(model, &state.phi_s, &state.phi_m)?;
    let full = kin.end_effector_jacobian();
    Ok((
        full.fixed_view::<6, 3>(0, 0).into_owned(),
        full.fixed_view::<6, N_JOINTS>(0, 3).into_owned(),
    ))
}
