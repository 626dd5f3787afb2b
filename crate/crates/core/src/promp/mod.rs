//! Probabilistic movement primitive over joint trajectories: a Gaussian over the
//! weights of a normalized RBF basis shared by positions and velocities.

mod basis;
mod io;

pub use basis::{basis_row, BasisConfig, DEFAULT_BANDWIDTH, DEFAULT_CENTERS};
pub use io::{load_promp, save_promp};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::{JointTrajectory, TrajectoryDataset};
use crate::math::{psd_factor, symmetric_psd_floor, JointVector, N_JOINTS};
use crate::{Error, Result};

/// Largest accepted condition number of the conditioning system.
const MAX_CONDITIONING_CONDITION: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub ridge_lambda: f64,
    /// Observation noise variance.
    pub sigma_x: f64,
    /// Include the velocity rows in the regression.
    pub use_velocity: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge_lambda: 1e-6,
            sigma_x: 1e-4,
            use_velocity: true,
        }
    }
}

/// Gaussian weight distribution and the grid it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProMPModel {
    pub basis: BasisConfig,
    pub n_dof: usize,
    pub mu_w: DVector<f64>,
    pub sigma_w: DMatrix<f64>,
    /// Observation noise variance; the marginal adds `sigma_x * I`.
    pub sigma_x: f64,
    pub ridge_lambda: f64,
    pub dt: f64,
    pub n_steps: usize,
    /// Hash of the training dataset's provenance manifest, when known.
    pub dataset_hash: Option<String>,
}

impl ProMPModel {
    pub fn n_weights(&self) -> usize {
        self.basis.n_bf() * self.n_dof
    }

    pub fn validate(&self) -> Result<()> {
        self.basis.validate()?;
        let n = self.n_weights();
        if self.mu_w.len() != n {
            return Err(Error::validation("mu_w", format!("expected length {n}, found {}", self.mu_w.len())));
        }
        if self.sigma_w.shape() != (n, n) {
            return Err(Error::validation("sigma_w", format!("expected {n}x{n}")));
        }
        if self.mu_w.iter().chain(self.sigma_w.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("mu_w/sigma_w", "contain non-finite values"));
        }
        if crate::math::max_abs_asymmetry(&self.sigma_w) > 1e-10 {
            return Err(Error::validation("sigma_w", "not symmetric"));
        }
        if !(self.sigma_x >= 0.0) {
            return Err(Error::validation("sigma_x", "must be non-negative"));
        }
        if !(self.dt > 0.0) || self.n_steps == 0 {
            return Err(Error::validation("dt/n_steps", "time grid must be non-empty"));
        }
        Ok(())
    }

    /// Sample times on the training grid.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..self.n_steps).map(|k| k as f64 * self.dt).collect()
    }

    pub fn basis_row(&self, t: f64) -> Result<DMatrix<f64>> {
        basis_row(&self.basis, t, self.n_dof)
    }
}

/// Stacked per-DoF design matrix `[phi(z_k); phi'(z_k)/T]` over the time grid.
fn design_matrix(basis: &BasisConfig, times: &[f64], use_velocity: bool) -> Result<DMatrix<f64>> {
    let n = times.len();
    let rows = if use_velocity { 2 * n } else { n };
    let mut psi = DMatrix::zeros(rows, basis.n_bf());
    for (k, &t) in times.iter().enumerate() {
        let (phi, d_phi) = basis.rows_at(t)?;
        psi.row_mut(k).copy_from(&phi.transpose());
        if use_velocity {
            psi.row_mut(n + k).copy_from(&d_phi.transpose());
        }
    }
    Ok(psi)
}

fn check_duration(traj: &JointTrajectory, basis: &BasisConfig) -> Result<()> {
    traj.validate()?;
    if (traj.duration() - basis.duration).abs() > 1e-9 * basis.duration {
        return Err(Error::Parameter(format!(
            "trajectory lasts {} s but the basis spans {} s",
            traj.duration(),
            basis.duration
        )));
    }
    Ok(())
}

/// Ridge regression `w = (Psi' Psi + lambda I)^-1 Psi' X`. The design matrix is
/// block diagonal with one identical block per DoF, so the normal equations
/// are solved DoF by DoF with a single factorization.
pub fn fit_weights(traj: &JointTrajectory, basis: &BasisConfig, opts: &FitOptions) -> Result<DVector<f64>> {
    if !(opts.ridge_lambda > 0.0) {
        return Err(Error::Parameter(format!("ridge lambda must be positive, got {}", opts.ridge_lambda)));
    }
    check_duration(traj, basis)?;
    let psi = design_matrix(basis, &traj.times, opts.use_velocity)?;
    let n_bf = basis.n_bf();
    let gram = psi.transpose() * &psi + DMatrix::identity(n_bf, n_bf) * opts.ridge_lambda;
    let chol = gram.cholesky().ok_or(Error::ConditioningSingular)?;
    let n = traj.len();
    let mut w = DVector::zeros(n_bf * N_JOINTS);
    for j in 0..N_JOINTS {
        let mut x = DVector::zeros(psi.nrows());
        for k in 0..n {
            x[k] = traj.q[k][j];
            if opts.use_velocity {
                x[n + k] = traj.q_dot[k][j];
            }
        }
        let wj = chol.solve(&(psi.transpose() * x));
        w.rows_mut(j * n_bf, n_bf).copy_from(&wj);
    }
    Ok(w)
}

/// Fits every demo and estimates the weight mean and (population) covariance.
pub fn fit_promp(dataset: &TrajectoryDataset, basis: &BasisConfig, opts: &FitOptions) -> Result<ProMPModel> {
    let n = dataset.demos.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    if !(opts.sigma_x >= 0.0) {
        return Err(Error::Parameter(format!("sigma_x must be non-negative, got {}", opts.sigma_x)));
    }
    let weights: Vec<DVector<f64>> = dataset
        .demos
        .par_iter()
        .map(|d| fit_weights(d, basis, opts))
        .collect::<Result<_>>()?;
    let dim = weights[0].len();
    let mu = weights.iter().fold(DVector::zeros(dim), |acc, w| acc + w) / n as f64;
    let mut sigma = DMatrix::zeros(dim, dim);
    for w in &weights {
        let d = w - &mu;
        sigma += &d * d.transpose();
    }
    sigma /= n as f64;
    let model = ProMPModel {
        basis: basis.clone(),
        n_dof: N_JOINTS,
        mu_w: mu,
        sigma_w: symmetric_psd_floor(&sigma),
        sigma_x: opts.sigma_x,
        ridge_lambda: opts.ridge_lambda,
        dt: dataset.dt,
        n_steps: dataset.n_steps(),
        dataset_hash: None,
    };
    model.validate()?;
    Ok(model)
}

/// Mean and covariance of `[q; q_dot]` at `t`.
pub fn marginal(promp: &ProMPModel, t: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let psi = promp.basis_row(t)?;
    let mean = &psi * &promp.mu_w;
    let cov = &psi * &promp.sigma_w * psi.transpose();
    let dim = cov.nrows();
    let cov = (&cov + cov.transpose()) * 0.5 + DMatrix::identity(dim, dim) * promp.sigma_x;
    Ok((mean, cov))
}

/// Conditions on observing rows `rows` of `[q; q_dot]` at `t_star` with value
/// `x_star` and accuracy covariance `sigma_star`.
pub fn condition_rows(
    promp: &ProMPModel,
    t_star: f64,
    rows: &[usize],
    x_star: &DVector<f64>,
    sigma_star: &DMatrix<f64>,
) -> Result<ProMPModel> {
    let m = rows.len();
    if m == 0 || x_star.len() != m || sigma_star.shape() != (m, m) {
        return Err(Error::Parameter("conditioning dimensions do not match the selected rows".into()));
    }
    if rows.iter().any(|&r| r >= 2 * promp.n_dof) {
        return Err(Error::Parameter("conditioning row out of range".into()));
    }
    if crate::math::max_abs_asymmetry(sigma_star) > 1e-12 * sigma_star.abs().max().max(1.0)
        || sigma_star.clone().symmetric_eigen().eigenvalues.min() < 0.0
    {
        return Err(Error::validation("sigma_star", "must be symmetric positive semidefinite"));
    }
    let full = promp.basis_row(t_star)?;
    let h = full.select_rows(rows);
    let h_sigma = &h * &promp.sigma_w;
    let s = sigma_star + &h_sigma * h.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) || hi / lo > MAX_CONDITIONING_CONDITION {
        return Err(Error::ConditioningSingular);
    }
    let chol = s.cholesky().ok_or(Error::ConditioningSingular)?;
    // gain L = Sigma_w H' S^-1, kept transposed
    let gain_t = chol.solve(&h_sigma);
    let innovation = x_star - &h * &promp.mu_w;
    let mu = &promp.mu_w + gain_t.transpose() * innovation;
    let sigma = &promp.sigma_w - gain_t.transpose() * &h_sigma;
    Ok(ProMPModel {
        mu_w: mu,
        sigma_w: symmetric_psd_floor(&sigma),
        ..promp.clone()
    })
}

/// Conditions on the full state `[q; q_dot]` at `t_star`.
pub fn condition(
    promp: &ProMPModel,
    t_star: f64,
    x_star: &DVector<f64>,
    sigma_star: &DMatrix<f64>,
) -> Result<ProMPModel> {
    let rows: Vec<usize> = (0..2 * promp.n_dof).collect();
    condition_rows(promp, t_star, &rows, x_star, sigma_star)
}

/// Conditions on joint positions only at `t_star`.
pub fn condition_positions(
    promp: &ProMPModel,
    t_star: f64,
    q_star: &DVector<f64>,
    sigma_star: &DMatrix<f64>,
) -> Result<ProMPModel> {
    let rows: Vec<usize> = (0..promp.n_dof).collect();
    condition_rows(promp, t_star, &rows, q_star, sigma_star)
}

/// Joint trajectory generated by one weight vector on the model's time grid.
pub fn trajectory_from_weights(promp: &ProMPModel, w: &DVector<f64>) -> Result<JointTrajectory> {
    if promp.n_dof != N_JOINTS || w.len() != promp.n_weights() {
        return Err(Error::Parameter("weight vector does not match the primitive".into()));
    }
    let times = promp.time_grid();
    let n_bf = promp.basis.n_bf();
    let mut q = Vec::with_capacity(times.len());
    let mut q_dot = Vec::with_capacity(times.len());
    for &t in &times {
        let (phi, d_phi) = promp.basis.rows_at(t)?;
        q.push(JointVector::from_fn(|j, _| phi.dot(&w.rows(j * n_bf, n_bf))));
        q_dot.push(JointVector::from_fn(|j, _| d_phi.dot(&w.rows(j * n_bf, n_bf))));
    }
    Ok(JointTrajectory { times, q, q_dot })
}

/// Draws weight vectors `mu + A xi` with `A A' = Sigma_w`; draw `k` uses stream `k`
/// of a generator seeded with `seed`.
pub fn sample_weights(promp: &ProMPModel, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let factor = psd_factor(&promp.sigma_w);
    let dim = promp.n_weights();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let xi = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
            &promp.mu_w + &factor * xi
        })
        .collect()
}

/// Samples `n` trajectories on the training time grid.
pub fn sample_trajectories(promp: &ProMPModel, n: usize, seed: u64) -> Result<Vec<JointTrajectory>> {
    if n == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    sample_weights(promp, n, seed)
        .par_iter()
        .map(|w| trajectory_from_weights(promp, w))
        .collect()
}
