use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Centers of the standard 10-function basis, in phase units.
pub const DEFAULT_CENTERS: [f64; 10] = [-0.142, 0.0, 0.142, 0.285, 0.428, 0.571, 0.714, 0.857, 1.0, 1.142];
/// Default bandwidth: the spacing of [`DEFAULT_CENTERS`].
pub const DEFAULT_BANDWIDTH: f64 = 0.1428;

/// Normalized Gaussian RBF basis over the phase `z = t / duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub centers: Vec<f64>,
    pub bandwidth: f64,
    pub duration: f64,
}

impl BasisConfig {
    pub fn new(centers: Vec<f64>, bandwidth: f64, duration: f64) -> Result<Self> {
        let b = Self {
            centers,
            bandwidth,
            duration,
        };
        b.validate()?;
        Ok(b)
    }

    /// The 10 standard centers with bandwidth 0.1428.
    pub fn standard(duration: f64) -> Result<Self> {
        Self::new(DEFAULT_CENTERS.to_vec(), DEFAULT_BANDWIDTH, duration)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::validation("centers", "at least one basis function is required"));
        }
        if self.centers.iter().any(|c| !c.is_finite()) || self.centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("centers", "must be finite and strictly increasing"));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::validation("bandwidth", "must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::validation("duration", "must be positive"));
        }
        Ok(())
    }

    pub fn n_bf(&self) -> usize {
        self.centers.len()
    }

    /// Unnormalized `exp(-(z - c_i)^2 / h^2)`.
    pub fn raw(&self, z: f64) -> DVector<f64> {
        let h2 = self.bandwidth * self.bandwidth;
        DVector::from_iterator(self.n_bf(), self.centers.iter().map(|c| (-(z - c).powi(2) / h2).exp()))
    }

    /// Normalized basis values and their phase derivatives at `z`.
    pub fn normalized(&self, z: f64) -> (DVector<f64>, DVector<f64>) {
        let h2 = self.bandwidth * self.bandwidth;
        let raw = self.raw(z);
        let d_raw = DVector::from_iterator(
            self.n_bf(),
            self.centers.iter().zip(raw.iter()).map(|(c, b)| -2.0 * (z - c) / h2 * b),
        );
        let sum = raw.sum();
        let d_sum = d_raw.sum();
        let phi = &raw / sum;
        let d_phi = (d_raw - &phi * d_sum) / sum;
        (phi, d_phi)
    }

    /// Phase of `t`, rejecting times outside `[0, duration]` (up to round-off).
    pub fn phase(&self, t: f64) -> Result<f64> {
        let slack = 1e-9 * self.duration;
        if !t.is_finite() || t < -slack || t > self.duration + slack {
            return Err(Error::PhaseDomain {
                t,
                duration: self.duration,
            });
        }
        Ok((t / self.duration).clamp(0.0, 1.0))
    }

    /// Position and velocity basis rows of one DoF at time `t`.
    pub fn rows_at(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let (phi, d_phi) = self.normalized(self.phase(t)?);
        Ok((phi, d_phi / self.duration))
    }
}

/// Block basis matrix at `t`: rows `[q_1..q_n; qd_1..qd_n]`, columns the weights
/// ordered DoF-major (`w[j * n_bf + i]`).
pub fn basis_row(basis: &BasisConfig, t: f64, n_dof: usize) -> Result<DMatrix<f64>> {
    let (phi, d_phi) = basis.rows_at(t)?;
    let n_bf = basis.n_bf();
    let mut psi = DMatrix::zeros(2 * n_dof, n_bf * n_dof);
    for j in 0..n_dof {
        psi.view_mut((j, j * n_bf), (1, n_bf)).copy_from(&phi.transpose());
        psi.view_mut((n_dof + j, j * n_bf), (1, n_bf)).copy_from(&d_phi.transpose());
    }
    Ok(psi)
}
