use nalgebra::{DMatrix, DVector, SVector};
use serde::{Deserialize, Serialize};

use super::JointTrajectory;
use crate::math::{JointVector, N_JOINTS};
use crate::{Error, Result};

/// Joint-space LQR state `[q; q_dot]`.
pub type DemoState = SVector<f64, { 2 * N_JOINTS }>;

/// Defaults of the joint-space reach problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrConfig {
    pub dt: f64,
    /// Number of control steps; trajectories have `horizon + 1` samples.
    pub horizon: usize,
    pub position_weight: f64,
    pub velocity_weight: f64,
    pub control_weight: f64,
    /// `P_T` is this multiple of the infinite-horizon Riccati solution.
    pub terminal_scale: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 500,
            position_weight: 10.0,
            velocity_weight: 1.0,
            control_weight: 0.1,
            terminal_scale: 10.0,
        }
    }
}

/// Discrete LQR problem `x+ = A x + B u` with cost
/// `sum_t (e_t' Q_t e_t + u_t' R_t u_t) + e_N' P_T e_N`, `e = x - x_goal`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrSetup {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    pub p_terminal: DMatrix<f64>,
    pub dt: f64,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min()
}

fn check_psd(name: &str, m: &DMatrix<f64>, strict: bool) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(name, "contains non-finite entries"));
    }
    if (m - m.transpose()).abs().max() > 1e-10 * m.abs().max().max(1.0) {
        return Err(Error::validation(name, "not symmetric"));
    }
    let lo = min_eigenvalue(m);
    let tol = 1e-12 * m.abs().max().max(1.0);
    if (strict && lo <= 0.0) || lo < -tol {
        let kind = if strict { "positive definite" } else { "positive semidefinite" };
        return Err(Error::validation(name, format!("not {kind} (min eigenvalue {lo:.3e})")));
    }
    Ok(())
}

/// Exact zero-order-hold discretization of `n` decoupled double integrators.
pub fn zoh_double_integrator(n: usize, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::identity(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        a[(j, n + j)] = dt;
        b[(j, j)] = 0.5 * dt * dt;
        b[(n + j, j)] = dt;
    }
    (a, b)
}

impl LqrSetup {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: Vec<DMatrix<f64>>,
        r: Vec<DMatrix<f64>>,
        p_terminal: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self> {
        let (nx, nu) = (a.nrows(), b.ncols());
        if !a.is_square() || b.nrows() != nx || p_terminal.shape() != (nx, nx) {
            return Err(Error::Parameter("inconsistent LQR matrix dimensions".into()));
        }
        if q.is_empty() || q.len() != r.len() {
            return Err(Error::Parameter(format!(
                "need one Q and one R per step (got {} and {})",
                q.len(),
                r.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive"));
        }
        for (t, (qt, rt)) in q.iter().zip(&r).enumerate() {
            if qt.shape() != (nx, nx) || rt.shape() != (nu, nu) {
                return Err(Error::Parameter(format!("step {t}: Q or R has the wrong shape")));
            }
            check_psd(&format!("Q[{t}]"), qt, false)?;
            check_psd(&format!("R[{t}]"), rt, true)?;
        }
        check_psd("P_T", &p_terminal, false)?;
        Ok(Self {
            a,
            b,
            q,
            r,
            p_terminal,
            dt,
        })
    }

    /// Time-invariant joint-space reach problem with per-joint diagonal weights;
    /// `P_T` is `cfg.terminal_scale` times the matching infinite-horizon solution.
    pub fn joint_space(
        cfg: &LqrConfig,
        position_weights: &JointVector,
        velocity_weights: &JointVector,
        control_weights: &JointVector,
    ) -> Result<Self> {
        if cfg.horizon == 0 {
            return Err(Error::validation("horizon", "must be at least 1"));
        }
        let (a, b) = zoh_double_integrator(N_JOINTS, cfg.dt);
        let mut q = DMatrix::zeros(2 * N_JOINTS, 2 * N_JOINTS);
        let mut r = DMatrix::zeros(N_JOINTS, N_JOINTS);
        for j in 0..N_JOINTS {
            q[(j, j)] = position_weights[j];
            q[(N_JOINTS + j, N_JOINTS + j)] = velocity_weights[j];
            r[(j, j)] = control_weights[j];
        }
        let p_inf = dare(&a, &b, &q, &r)?;
        let p_terminal = p_inf * cfg.terminal_scale;
        Self::new(
            a,
            b,
            vec![q; cfg.horizon],
            vec![r; cfg.horizon],
            p_terminal,
            cfg.dt,
        )
    }

    /// [`joint_space`](Self::joint_space) with the uniform weights of `cfg`.
    pub fn from_config(cfg: &LqrConfig) -> Result<Self> {
        Self::joint_space(
            cfg,
            &JointVector::repeat(cfg.position_weight),
            &JointVector::repeat(cfg.velocity_weight),
            &JointVector::repeat(cfg.control_weight),
        )
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Discretized cost of a state/control sequence relative to `goal`.
    pub fn cost(&self, states: &[DVector<f64>], controls: &[DVector<f64>], goal: &DVector<f64>) -> f64 {
        let mut j = 0.0;
        for (t, (x, u)) in states.iter().zip(controls).enumerate() {
            let e = x - goal;
            j += e.dot(&(&self.q[t] * &e)) + u.dot(&(&self.r[t] * u));
        }
        let e = &states[controls.len()] - goal;
        j + e.dot(&(&self.p_terminal * &e))
    }
}

/// Stabilizing solution of the discrete algebraic Riccati equation, by the
/// structure-preserving doubling iteration.
pub fn dare(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let r_chol = r.clone().cholesky().ok_or(Error::CostDegenerate { step: 0 })?;
    let mut ak = a.clone();
    let mut gk = b * r_chol.solve(&b.transpose());
    let mut hk = q.clone();
    let eye = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let w = (&eye + &gk * &hk).lu();
        let w_a = w.solve(&ak).ok_or(Error::CostDegenerate { step: 0 })?;
        let w_g = w.solve(&gk).ok_or(Error::CostDegenerate { step: 0 })?;
        let h_next = &hk + ak.transpose() * &hk * &w_a;
        let g_next = &gk + &ak * &w_g * ak.transpose();
        let a_next = &ak * &w_a;
        let change = (&h_next - &hk).abs().max();
        hk = (&h_next + h_next.transpose()) * 0.5;
        gk = (&g_next + g_next.transpose()) * 0.5;
        ak = a_next;
        if change <= 1e-13 * hk.abs().max().max(1.0) {
            return Ok(hk);
        }
    }
    Err(Error::CostDegenerate { step: 0 })
}

/// Backward Riccati recursion seeded at `P_T`; returns `K_0 .. K_{N-1}` for `u_t = -K_t e_t`.
pub fn riccati_backward(setup: &LqrSetup) -> Result<Vec<DMatrix<f64>>> {
    let n = setup.horizon();
    let mut gains = vec![DMatrix::zeros(setup.input_dim(), setup.state_dim()); n];
    let mut p = setup.p_terminal.clone();
    let bt = setup.b.transpose();
    for t in (0..n).rev() {
        let bt_p = &bt * &p;
        let s = &setup.r[t] + &bt_p * &setup.b;
        let chol = s.cholesky().ok_or(Error::CostDegenerate { step: t })?;
        let k = chol.solve(&(&bt_p * &setup.a));
        let next = &setup.q[t] + setup.a.transpose() * &p * (&setup.a - &setup.b * &k);
        p = (&next + next.transpose()) * 0.5;
        gains[t] = k;
    }
    Ok(gains)
}

/// Closed-loop states and controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

/// Runs `u_t = -K_t (x_t - goal)`, adding `noise[t]` to the input when given.
pub fn rollout(
    setup: &LqrSetup,
    gains: &[DMatrix<f64>],
    start: &DVector<f64>,
    goal: &DVector<f64>,
    noise: Option<&[DVector<f64>]>,
) -> Result<Rollout> {
    let n = gains.len();
    if n != setup.horizon() || start.len() != setup.state_dim() || goal.len() != setup.state_dim() {
        return Err(Error::Parameter("rollout dimensions do not match the setup".into()));
    }
    if noise.is_some_and(|w| w.len() < n) {
        return Err(Error::Parameter("noise sequence is shorter than the horizon".into()));
    }
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut x = start.clone();
    for (t, k) in gains.iter().enumerate() {
        let u = -(k * (&x - goal));
        let applied = match noise {
            Some(w) => &u + &w[t],
            None => u.clone(),
        };
        let next = &setup.a * &x + &setup.b * applied;
        states.push(x);
        controls.push(u);
        if next.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::RolloutDivergence { step: t + 1 });
        }
        x = next;
    }
    states.push(x);
    Ok(Rollout { states, controls })
}

fn split_state(x: &DVector<f64>) -> (JointVector, JointVector) {
    (
        JointVector::from_fn(|j, _| x[j]),
        JointVector::from_fn(|j, _| x[N_JOINTS + j]),
    )
}

fn to_trajectory(setup: &LqrSetup, r: &Rollout) -> JointTrajectory {
    let (q, q_dot) = r.states.iter().map(split_state).unzip();
    JointTrajectory {
        times: (0..r.states.len()).map(|k| k as f64 * setup.dt).collect(),
        q,
        q_dot,
    }
}

fn check_joint_setup(setup: &LqrSetup) -> Result<()> {
    if setup.state_dim() != 2 * N_JOINTS || setup.input_dim() != N_JOINTS {
        return Err(Error::Parameter("demo generation needs a 14-state, 7-input setup".into()));
    }
    Ok(())
}

/// Closed-loop reach from `start` to `goal` (both `[q; q_dot]`).
pub fn generate_demo(
    setup: &LqrSetup,
    gains: &[DMatrix<f64>],
    start: &DemoState,
    goal: &DemoState,
) -> Result<JointTrajectory> {
    check_joint_setup(setup)?;
    let r = rollout(setup, gains, &DVector::from_column_slice(start.as_slice()), &DVector::from_column_slice(goal.as_slice()), None)?;
    Ok(to_trajectory(setup, &r))
}

/// [`generate_demo`] with per-step joint-acceleration noise added to the input.
pub fn generate_demo_with_noise(
    setup: &LqrSetup,
    gains: &[DMatrix<f64>],
    start: &DemoState,
    goal: &DemoState,
    noise: &[JointVector],
) -> Result<JointTrajectory> {
    check_joint_setup(setup)?;
    let w: Vec<DVector<f64>> = noise.iter().map(|v| DVector::from_column_slice(v.as_slice())).collect();
    let r = rollout(
        setup,
        gains,
        &DVector::from_column_slice(start.as_slice()),
        &DVector::from_column_slice(goal.as_slice()),
        Some(&w),
    )?;
    Ok(to_trajectory(setup, &r))
}

/// `[q; 0]`.
pub fn rest_state(q: &JointVector) -> DemoState {
    let mut x = DemoState::zeros();
    x.fixed_rows_mut::<N_JOINTS>(0).copy_from(q);
    x
}
