//! Minimum-disturbance planning: condition the primitive on start and goal,
//! sample candidates, score each by the spacecraft motion it induces and keep
//! the cheapest.

mod export;

pub use export::{export_plan, read_costs_csv, COSTS_FILE, SPACECRAFT_FILE};

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demos::JointTrajectory;
use crate::math::{JointVector, N_JOINTS};
use crate::model::{rates_from_kinematics, resolved_rate_ik, IkOptions, Kinematics, Pose, RobotModel, SystemState};
use crate::promp::{condition, sample_trajectories, ProMPModel};
use crate::{Error, Result};

/// Accuracy covariance scale used when conditioning on start and goal.
pub const CONDITIONING_ACCURACY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Angular-to-linear conversion coefficient, m/rad.
    pub c: f64,
    /// Step of the summation, s.
    pub dt: f64,
}

impl CostConfig {
    pub fn new(c: f64, dt: f64) -> Result<Self> {
        let cfg = Self { c, dt };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::validation("c", "must be non-negative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive"));
        }
        Ok(())
    }
}

/// Spacecraft motion induced by one joint trajectory, one entry per sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpacecraftLog {
    pub times: Vec<f64>,
    /// ZYX Euler attitude `(yaw, pitch, roll)`.
    pub phi_s: Vec<Vector3<f64>>,
    pub r_s: Vec<Vector3<f64>>,
    pub phi_s_dot: Vec<Vector3<f64>>,
    /// Inertial angular velocity `E phi_s_dot`.
    pub omega: Vec<Vector3<f64>>,
    pub v_s: Vec<Vector3<f64>>,
    pub end_effector: Vec<Pose>,
}

impl SpacecraftLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |phi_s(t) - phi_s(0)|`.
    pub fn peak_attitude_excursion(&self) -> f64 {
        let Some(first) = self.phi_s.first() else {
            return 0.0;
        };
        self.phi_s.iter().map(|p| (p - first).norm()).fold(0.0, f64::max)
    }
}

/// Attitude-disturbance cost `c^2 sum |phi_s_dot|^2 + sum |v_s|^2` of a joint
/// trajectory, starting from zero attitude.
///
/// The attitude is propagated with explicit Euler at `cfg.dt`; the spacecraft
/// position follows from the CoM constraint at every step.
pub fn trajectory_cost(model: &RobotModel, traj: &JointTrajectory, cfg: &CostConfig) -> Result<(f64, SpacecraftLog)> {
    cfg.validate()?;
    traj.validate()?;
    if traj.len() > 1 && (traj.dt() - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(Error::Parameter(format!(
            "trajectory step {} s does not match the cost step {} s",
            traj.dt(),
            cfg.dt
        )));
    }
    let n = traj.len();
    let mut log = SpacecraftLog {
        times: traj.times.clone(),
        phi_s: Vec::with_capacity(n),
        r_s: Vec::with_capacity(n),
        phi_s_dot: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
        v_s: Vec::with_capacity(n),
        end_effector: Vec::with_capacity(n),
    };
    let c2 = cfg.c * cfg.c;
    let mut phi_s = Vector3::zeros();
    let mut cost = 0.0;
    for k in 0..n {
        let propagation = |source: Error| Error::CostPropagation {
            step: k,
            source: Box::new(source),
        };
        let kin = Kinematics::new(model, &phi_s, &traj.q[k]).map_err(propagation)?;
        let rates = rates_from_kinematics(&kin, &traj.q_dot[k]).map_err(propagation)?;
        cost += c2 * rates.phi_s_dot.norm_squared() + rates.v_s.norm_squared();
        log.phi_s.push(phi_s);
        log.r_s.push(kin.r_s);
        log.phi_s_dot.push(rates.phi_s_dot);
        log.omega.push(kin.euler_map * rates.phi_s_dot);
        log.v_s.push(rates.v_s);
        log.end_effector.push(kin.end_effector());
        phi_s += rates.phi_s_dot * cfg.dt;
    }
    Ok((cost, log))
}

/// Planning target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    Joints(JointVector),
    /// End-effector pose in the inertial frame, solved with [`resolved_rate_ik`].
    Pose(Pose),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub goal: Goal,
    /// Joint configuration at t = 0; the spacecraft starts at zero attitude, at rest.
    pub start: JointVector,
    pub n_samples: usize,
    pub seed: u64,
    pub cost: CostConfig,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub goal_joints: JointVector,
    /// Primitive after conditioning on start and goal.
    pub conditioned: ProMPModel,
    pub samples: Vec<JointTrajectory>,
    /// Per-sample cost; `INFINITY` for samples whose propagation failed.
    pub costs: Vec<f64>,
    pub selected_index: usize,
    /// Per-sample spacecraft logs; empty for failed samples.
    pub logs: Vec<SpacecraftLog>,
}

impl PlanResult {
    pub fn selected(&self) -> &JointTrajectory {
        &self.samples[self.selected_index]
    }

    pub fn selected_cost(&self) -> f64 {
        self.costs[self.selected_index]
    }

    pub fn spacecraft_log(&self) -> &SpacecraftLog {
        &self.logs[self.selected_index]
    }
}

/// Index of the smallest finite cost, lowest index on ties.
pub fn select_minimum(costs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in costs.iter().enumerate() {
        if c.is_finite() && best.is_none_or(|b| c < costs[b]) {
            best = Some(i);
        }
    }
    best
}

fn rest_target(q: &JointVector) -> DVector<f64> {
    let mut x = DVector::zeros(2 * N_JOINTS);
    x.rows_mut(0, N_JOINTS).copy_from(q);
    x
}

/// Conditions on the goal at rest at `T` and on the start at rest at `t = 0`.
pub fn condition_start_goal(promp: &ProMPModel, start: &JointVector, goal: &JointVector) -> Result<ProMPModel> {
    let accuracy = DMatrix::identity(2 * N_JOINTS, 2 * N_JOINTS) * CONDITIONING_ACCURACY;
    let at_goal = condition(promp, promp.basis.duration, &rest_target(goal), &accuracy)?;
    condition(&at_goal, 0.0, &rest_target(start), &accuracy)
}

pub fn plan(model: &RobotModel, promp: &ProMPModel, request: &PlanRequest) -> Result<PlanResult> {
    if request.n_samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    if promp.n_dof != N_JOINTS {
        return Err(Error::Parameter(format!("primitive has {} DoF, the arm has {N_JOINTS}", promp.n_dof)));
    }
    request.cost.validate()?;
    let goal_joints = match &request.goal {
        Goal::Joints(q) => *q,
        Goal::Pose(pose) => {
            let start = SystemState::at_rest(model, Vector3::zeros(), request.start)?;
            let sol = resolved_rate_ik(model, &start, pose, &IkOptions::default())?;
            log::info!(
                "goal pose solved in {} iterations (residual {:.2e} m, {:.2e} rad)",
                sol.iterations,
                sol.position_residual,
                sol.orientation_residual
            );
            sol.phi_m
        }
    };
    let conditioned = condition_start_goal(promp, &request.start, &goal_joints)?;
    let samples = sample_trajectories(&conditioned, request.n_samples, request.seed)?;
    let evaluated: Vec<(f64, SpacecraftLog)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, traj)| match trajectory_cost(model, traj, &request.cost) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("sample {i}: {e}");
                (f64::INFINITY, SpacecraftLog::default())
            }
        })
        .collect();
    let (costs, logs): (Vec<f64>, Vec<SpacecraftLog>) = evaluated.into_iter().unzip();
    let selected_index = select_minimum(&costs).ok_or(Error::PlanningFailed)?;
    log::info!("selected sample {selected_index} with cost {:.6e}", costs[selected_index]);
    Ok(PlanResult {
        goal_joints,
        conditioned,
        samples,
        costs,
        selected_index,
        logs,
    })
}
