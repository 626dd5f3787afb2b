//! Equations of motion of the free-floating system in the generalized
//! coordinates `phi = [phi_s; phi_m]` (Euler attitude then joint angles).
//!
//! `M(phi) phi_ddot + C(phi, phi_dot) = [0; tau]`. The spacecraft translation
//! is eliminated through the CoM constraint, so the linear momentum is zero by
//! construction and the top three rows express angular momentum balance.

use nalgebra::Vector3;

use crate::math::{euler_rate_bias, GenMatrix, GenVector, JointVector, N_JOINTS};
use crate::model::{Kinematics, RobotModel, SystemState};
use crate::{Error, Result};

/// `phi = [phi_s; phi_m]` and its rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralizedCoords {
    pub phi: GenVector,
    pub phi_dot: GenVector,
}

impl GeneralizedCoords {
    pub fn from_state(state: &SystemState) -> Self {
        let mut phi = GenVector::zeros();
        let mut phi_dot = GenVector::zeros();
        phi.fixed_rows_mut::<3>(0).copy_from(&state.phi_s);
        phi.fixed_rows_mut::<N_JOINTS>(3).copy_from(&state.phi_m);
        phi_dot.fixed_rows_mut::<3>(0).copy_from(&state.phi_s_dot);
        phi_dot.fixed_rows_mut::<N_JOINTS>(3).copy_from(&state.phi_m_dot);
        Self { phi, phi_dot }
    }

    pub fn phi_s(&self) -> Vector3<f64> {
        self.phi.fixed_rows::<3>(0).into_owned()
    }

    pub fn phi_m(&self) -> JointVector {
        self.phi.fixed_rows::<N_JOINTS>(3).into_owned()
    }

    /// Full state with the spacecraft position and velocity from the CoM constraint.
    pub fn to_state(&self, model: &RobotModel) -> Result<SystemState> {
        let kin = Kinematics::new(model, &self.phi_s(), &self.phi_m())?;
        Ok(SystemState {
            phi_s: self.phi_s(),
            r_s: kin.r_s,
            phi_m: self.phi_m(),
            phi_s_dot: self.phi_dot.fixed_rows::<3>(0).into_owned(),
            v_s: kin.spacecraft_velocity_jacobian() * self.phi_dot,
            phi_m_dot: self.phi_dot.fixed_rows::<N_JOINTS>(3).into_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: GenMatrix,
    pub coriolis: GenVector,
    pub kinetic_energy: f64,
}

fn split(phi: &GenVector) -> (Vector3<f64>, JointVector) {
    (
        phi.fixed_rows::<3>(0).into_owned(),
        phi.fixed_rows::<N_JOINTS>(3).into_owned(),
    )
}

pub fn mass_matrix(model: &RobotModel, phi: &GenVector) -> Result<GenMatrix> {
    let (phi_s, phi_m) = split(phi);
    Ok(Kinematics::new(model, &phi_s, &phi_m)?.mass_matrix())
}

/// Kinetic energy summed over bodies, `sum(m v.v / 2 + w.I w / 2)`.
pub fn kinetic_energy(model: &RobotModel, coords: &GeneralizedCoords) -> Result<f64> {
    let (phi_s, phi_m) = split(&coords.phi);
    Ok(Kinematics::new(model, &phi_s, &phi_m)?.kinetic_energy(&coords.phi_dot))
}

fn coriolis_from(kin: &Kinematics, phi_dot: &GenVector) -> GenVector {
    let phi_s_dot = phi_dot.fixed_rows::<3>(0).into_owned();
    let omega0 = kin.euler_map * phi_s_dot;
    let alpha0 = euler_rate_bias(&kin.phi_s, &phi_s_dot);

    // Velocity-product accelerations (phi_ddot = 0), CoM positions relative to the spacecraft CoM.
    let mut omega = [omega0; N_JOINTS + 1];
    let mut alpha = [alpha0; N_JOINTS + 1];
    let mut rel_acc = [Vector3::zeros(); N_JOINTS + 1];
    let o0 = kin.origins[0];
    let mut origin_acc = alpha0.cross(&o0) + omega0.cross(&omega0.cross(&o0));
    for i in 0..N_JOINTS {
        let b = i + 1;
        let axis_rate = kin.frames[i].column(2) * phi_dot[3 + i];
        omega[b] = omega[i] + axis_rate;
        alpha[b] = alpha[i] + omega[i].cross(&axis_rate);
        let span = kin.origins[b] - kin.origins[i];
        let com = span * kin.ratios[b];
        rel_acc[b] = origin_acc + alpha[b].cross(&com) + omega[b].cross(&omega[b].cross(&com));
        origin_acc += alpha[b].cross(&span) + omega[b].cross(&omega[b].cross(&span));
    }
    let base_acc = -rel_acc
        .iter()
        .zip(kin.masses.iter())
        .map(|(a, m)| a * *m)
        .sum::<Vector3<f64>>()
        / kin.total_mass;

    (0..=N_JOINTS)
        .map(|b| {
            let force = (rel_acc[b] + base_acc) * kin.masses[b];
            let inertia = kin.inertia_world[b];
            let torque = inertia * alpha[b] + omega[b].cross(&(inertia * omega[b]));
            kin.lin_jac[b].transpose() * force + kin.ang_jac[b].transpose() * torque
        })
        .sum()
}

/// Centripetal and Coriolis vector `C(phi, phi_dot) = M_dot phi_dot - 1/2 d(phi_dot' M phi_dot)/d phi`,
/// evaluated exactly through the recursive velocity-product accelerations of every body.
pub fn coriolis_vector(model: &RobotModel, phi: &GenVector, phi_dot: &GenVector) -> Result<GenVector> {
    let (phi_s, phi_m) = split(phi);
    Ok(coriolis_from(&Kinematics::new(model, &phi_s, &phi_m)?, phi_dot))
}

/// The same vector assembled from central finite differences of the mass
/// matrix, step `1e-6 * max(1, |phi_k|)`.
pub fn coriolis_by_differentiation(
    model: &RobotModel,
    phi: &GenVector,
    phi_dot: &GenVector,
) -> Result<GenVector> {
    let mut m_dot_phi_dot = GenVector::zeros();
    let mut gradient = GenVector::zeros();
    for k in 0..phi.len() {
        let h = 1e-6 * phi[k].abs().max(1.0);
        let mut plus = *phi;
        let mut minus = *phi;
        plus[k] += h;
        minus[k] -= h;
        let dm = (mass_matrix(model, &plus)? - mass_matrix(model, &minus)?) / (2.0 * h);
        let dm_phi_dot = dm * phi_dot;
        m_dot_phi_dot += dm_phi_dot * phi_dot[k];
        gradient[k] = phi_dot.dot(&dm_phi_dot);
    }
    Ok(m_dot_phi_dot - gradient * 0.5)
}

pub fn dynamics_terms(model: &RobotModel, coords: &GeneralizedCoords) -> Result<DynamicsTerms> {
    let (phi_s, phi_m) = split(&coords.phi);
    let kin = Kinematics::new(model, &phi_s, &phi_m)?;
    Ok(DynamicsTerms {
        mass: kin.mass_matrix(),
        coriolis: coriolis_from(&kin, &coords.phi_dot),
        kinetic_energy: kin.kinetic_energy(&coords.phi_dot),
    })
}

fn accelerations(kin: &Kinematics, phi_dot: &GenVector, tau: &JointVector) -> Result<GenVector> {
    let mass = kin.mass_matrix();
    let mut rhs = -coriolis_from(kin, phi_dot);
    for (j, t) in tau.iter().enumerate() {
        rhs[3 + j] += t;
    }
    mass.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::DynamicsSingular)
}

/// Solves `M phi_ddot + C = [0; tau]` for `phi_ddot`.
pub fn forward_dynamics(
    model: &RobotModel,
    phi: &GenVector,
    phi_dot: &GenVector,
    tau: &JointVector,
) -> Result<GenVector> {
    let (phi_s, phi_m) = split(phi);
    accelerations(&Kinematics::new(model, &phi_s, &phi_m)?, phi_dot, tau)
}

/// Output of [`simulate`]: one state per step including the initial one.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
}

const DIVERGENCE_BOUND: f64 = 1e6;

/// Fixed-step RK4 integration of the free-floating dynamics.
///
/// The spacecraft position is reconstructed from the CoM constraint at every
/// step rather than integrated. `initial` should carry momentum-consistent
/// spacecraft rates (see [`SystemState::momentum_consistent`]).
pub fn simulate<F>(
    model: &RobotModel,
    initial: &SystemState,
    torque_fn: F,
    dt: f64,
    duration: f64,
) -> Result<Simulation>
where
    F: Fn(f64) -> JointVector,
{
    if !(dt > 0.0) || !(duration >= dt) {
        return Err(Error::Parameter(format!(
            "need dt > 0 and duration >= dt (dt = {dt}, duration = {duration})"
        )));
    }
    let steps = (duration / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);

    let start = GeneralizedCoords::from_state(initial);
    let mut phi = start.phi;
    let mut phi_dot = start.phi_dot;
    times.push(0.0);
    states.push(start.to_state(model)?);

    let deriv = |phi: &GenVector, phi_dot: &GenVector, t: f64| -> Result<(GenVector, GenVector)> {
        let (phi_s, phi_m) = split(phi);
        let kin = Kinematics::new(model, &phi_s, &phi_m)?;
        Ok((*phi_dot, accelerations(&kin, phi_dot, &torque_fn(t))?))
    };

    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        let fail = |e: Error| Error::IntegrationFailure {
            step,
            reason: e.to_string(),
        };
        let (k1p, k1v) = deriv(&phi, &phi_dot, t).map_err(fail)?;
        let (k2p, k2v) = deriv(&(phi + k1p * (dt / 2.0)), &(phi_dot + k1v * (dt / 2.0)), t + dt / 2.0)
            .map_err(fail)?;
        let (k3p, k3v) = deriv(&(phi + k2p * (dt / 2.0)), &(phi_dot + k2v * (dt / 2.0)), t + dt / 2.0)
            .map_err(fail)?;
        let (k4p, k4v) = deriv(&(phi + k3p * dt), &(phi_dot + k3v * dt), t + dt).map_err(fail)?;
        phi += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        phi_dot += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);

        let finite = phi.iter().chain(phi_dot.iter()).all(|v| v.is_finite());
        if !finite || phi_dot.amax() > DIVERGENCE_BOUND || phi.amax() > DIVERGENCE_BOUND {
            return Err(Error::IntegrationFailure {
                step,
                reason: "state is not finite or diverged".into(),
            });
        }
        times.push(step as f64 * dt);
        states.push(GeneralizedCoords { phi, phi_dot }.to_state(model).map_err(fail)?);
    }
    Ok(Simulation { times, states })
}
