//! Robot description and momentum-conserving kinematics of a free-floating
//! spacecraft carrying a 7-joint serial arm.
//!
//! The system center of mass is pinned to the inertial origin and the total
//! momentum is zero, so the spacecraft translation is never an independent
//! coordinate: it follows algebraically from the attitude and joint angles.

mod config;
mod ik;
mod kinematics;
mod momentum;

pub use config::{load_model, load_model_file, ModelConfig};
pub use ik::{resolved_rate_ik, IkOptions, IkSolution};
pub use kinematics::{
    forward_kinematics, jacobians, system_com_spacecraft_position, FkResult, Kinematics,
    Pose,
};
pub use momentum::{
    coupling_inertias, generalized_jacobian, spacecraft_rates, system_momentum,
    CouplingInertias, SpacecraftRates,
};
pub(crate) use momentum::{generalized_jacobian_from, rates_from_kinematics};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::math::{JointVector, N_JOINTS};
use crate::{Error, Result};

/// One Denavit-Hartenberg row (standard convention: `Rz(theta) Tz(d) Tx(a) Rx(alpha)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub alpha: f64,
    pub a: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

fn half() -> f64 {
    0.5
}

/// Mass properties of one rigid body. Principal inertias are expressed in the
/// body's own frame (the DH frame for arm links).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkInertial {
    pub mass: f64,
    pub inertia_principal: [f64; 3],
    /// Fraction of the link vector from joint `i` to joint `i+1` at which the CoM sits.
    #[serde(default = "half")]
    pub com_offset_ratio: f64,
}

impl LinkInertial {
    pub fn new(mass: f64, inertia_principal: [f64; 3]) -> Self {
        Self {
            mass,
            inertia_principal,
            com_offset_ratio: 0.5,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::validation(
                format!("{field}.mass"),
                format!("must be positive, got {}", self.mass),
            ));
        }
        for (k, &v) in self.inertia_principal.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("{field}.inertia_principal[{k}]"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        let [ix, iy, iz] = self.inertia_principal;
        let slack = 1e-12 * (ix + iy + iz);
        if ix + iy < iz - slack || iy + iz < ix - slack || iz + ix < iy - slack {
            return Err(Error::validation(
                format!("{field}.inertia_principal"),
                "violates the triangle inequality",
            ));
        }
        if !(0.0..=1.0).contains(&self.com_offset_ratio) {
            return Err(Error::validation(
                format!("{field}.com_offset_ratio"),
                format!("must lie in [0, 1], got {}", self.com_offset_ratio),
            ));
        }
        Ok(())
    }
}

/// Geometric and inertial description of the spacecraft and its arm.
///
/// Fields are public so that degenerate variants (massless arm, very heavy bus)
/// can be built for analysis; [`RobotModel::new`] and [`load_model`] validate.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub spacecraft: LinkInertial,
    pub arm_links: [LinkInertial; N_JOINTS],
    pub dh: [DhRow; N_JOINTS],
    /// Offset from the spacecraft CoM to the arm base joint, in the spacecraft frame.
    pub mount_offset: Vector3<f64>,
    pub total_mass: f64,
}

impl RobotModel {
    pub fn new(
        spacecraft: LinkInertial,
        arm_links: [LinkInertial; N_JOINTS],
        dh: [DhRow; N_JOINTS],
        mount_offset: Vector3<f64>,
    ) -> Result<Self> {
        let model = Self::new_unchecked(spacecraft, arm_links, dh, mount_offset);
        model.validate()?;
        Ok(model)
    }

    /// Builds a model without checking mass or inertia positivity.
    pub fn new_unchecked(
        spacecraft: LinkInertial,
        arm_links: [LinkInertial; N_JOINTS],
        dh: [DhRow; N_JOINTS],
        mount_offset: Vector3<f64>,
    ) -> Self {
        let total_mass = spacecraft.mass + arm_links.iter().map(|l| l.mass).sum::<f64>();
        Self {
            spacecraft,
            arm_links,
            dh,
            mount_offset,
            total_mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spacecraft.validate("spacecraft")?;
        for (i, link) in self.arm_links.iter().enumerate() {
            link.validate(&format!("links[{i}]"))?;
        }
        for (i, row) in self.dh.iter().enumerate() {
            for (name, v) in [
                ("alpha", row.alpha),
                ("a", row.a),
                ("d", row.d),
                ("theta_offset", row.theta_offset),
            ] {
                if !v.is_finite() {
                    return Err(Error::validation(format!("dh[{i}].{name}"), "must be finite"));
                }
            }
        }
        if !self.mount_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("mount_offset", "must be finite"));
        }
        Ok(())
    }

    /// The reference spacecraft and arm (DH table and mass properties) used
    /// throughout the examples, with the arm mounted at `(0.5, 0, 0.5)` m.
    pub fn reference() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let row = |alpha: f64, a: f64, d: f64| DhRow {
            alpha,
            a,
            d,
            theta_offset: 0.0,
        };
        let dh = [
            row(-FRAC_PI_2, 0.0, 0.5),
            row(FRAC_PI_2, 0.0, 0.0),
            row(FRAC_PI_2, 0.9, 0.0),
            row(-FRAC_PI_2, 0.9, 0.0),
            row(FRAC_PI_2, 0.8, 0.0),
            row(-FRAC_PI_2, 0.8, 0.0),
            row(FRAC_PI_2, 0.0, 0.8),
        ];
        let slender = [0.25, 25.0, 25.0];
        let links = [
            LinkInertial::new(20.0, [0.1, 0.1, 0.1]),
            LinkInertial::new(30.0, slender),
            LinkInertial::new(30.0, slender),
            LinkInertial::new(20.0, slender),
            LinkInertial::new(20.0, slender),
            LinkInertial::new(20.0, slender),
            LinkInertial::new(20.0, slender),
        ];
        Self::new_unchecked(
            LinkInertial::new(200.0, [1400.0, 1400.0, 2040.0]),
            links,
            dh,
            Vector3::new(0.5, 0.0, 0.5),
        )
    }

    /// Upper bound on the distance from the arm base to the end-effector.
    pub fn arm_reach(&self) -> f64 {
        self.dh.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }
}

/// Home joint configuration `(0, 5pi/4, 0, 0, pi/2, -pi/2, 0)`.
pub fn home_configuration() -> JointVector {
    use std::f64::consts::{FRAC_PI_2, PI};
    JointVector::from([0.0, 1.25 * PI, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0])
}

/// Spacecraft pose and twist plus joint positions and rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemState {
    /// ZYX Euler attitude `(yaw, pitch, roll)`.
    pub phi_s: Vector3<f64>,
    pub r_s: Vector3<f64>,
    pub phi_m: JointVector,
    pub phi_s_dot: Vector3<f64>,
    pub v_s: Vector3<f64>,
    pub phi_m_dot: JointVector,
}

impl SystemState {
    /// Stationary state at the given configuration with the spacecraft position
    /// placed so the system CoM sits at the origin.
    pub fn at_rest(model: &RobotModel, phi_s: Vector3<f64>, phi_m: JointVector) -> Result<Self> {
        let r_s = system_com_spacecraft_position(model, &phi_s, &phi_m)?;
        Ok(Self {
            phi_s,
            r_s,
            phi_m,
            ..Default::default()
        })
    }

    /// State whose spacecraft rates are the ones induced by `phi_m_dot` under zero momentum.
    pub fn momentum_consistent(
        model: &RobotModel,
        phi_s: Vector3<f64>,
        phi_m: JointVector,
        phi_m_dot: JointVector,
    ) -> Result<Self> {
        let rates = spacecraft_rates(model, &phi_s, &phi_m, &phi_m_dot)?;
        let r_s = system_com_spacecraft_position(model, &phi_s, &phi_m)?;
        Ok(Self {
            phi_s,
            r_s,
            phi_m,
            phi_s_dot: rates.phi_s_dot,
            v_s: rates.v_s,
            phi_m_dot,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_total_mass() {
        let m = RobotModel::reference();
        assert_eq!(m.total_mass, 360.0);
        m.validate().unwrap();
    }

    #[test]
    fn triangle_inequality_rejected() {
        let mut m = RobotModel::reference();
        m.arm_links[0].inertia_principal = [1.0, 1.0, 3.0];
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("links[0].inertia_principal"), "{err}");
    }

    #[test]
    fn reach_of_reference_arm() {
        assert!((RobotModel::reference().arm_reach() - 4.7).abs() < 1e-12);
    }
}
