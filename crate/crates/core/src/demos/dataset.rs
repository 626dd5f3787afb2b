use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elastic::{elastic_band_perturb, end_effector_path, ElasticBandOptions, Obstacle};
use super::lqr::{generate_demo, generate_demo_with_noise, rest_state, riccati_backward, LqrConfig, LqrSetup};
use super::JointTrajectory;
use crate::math::{JointVector, N_JOINTS};
use crate::model::RobotModel;
use crate::{Error, Result};

/// Diversification applied to one demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Default weights, no perturbation.
    Nominal,
    /// Per-joint log-uniform scaling of the state and control weights.
    CostScaling,
    /// Elastic-band deformation around a random obstacle on the end-effector path.
    ElasticBand,
    /// Gaussian joint-acceleration noise in the rollout.
    ProcessNoise,
}

/// Random draws behind one demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategyDetail {
    Nominal,
    CostScaling { scales: [f64; N_JOINTS] },
    ElasticBand { obstacle: Obstacle },
    ProcessNoise { std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoInfo {
    pub goal_index: usize,
    pub goal: JointVector,
    pub strategy: Strategy,
    pub detail: StrategyDetail,
    /// Draws needed before the demo was accepted (1 = first try).
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub lqr: LqrConfig,
    pub per_goal: usize,
    /// Strategies cycled over the demos of each goal.
    pub strategies: Vec<Strategy>,
    /// Range of the per-joint log-uniform weight scale.
    pub scale_range: [f64; 2],
    pub noise_std: f64,
    pub obstacle_radius: [f64; 2],
    /// Obstacles sit at this fraction range of the nominal end-effector path length.
    pub obstacle_fraction: [f64; 2],
    pub elastic: ElasticBandOptions,
    pub max_attempts: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            lqr: LqrConfig::default(),
            per_goal: 20,
            strategies: vec![Strategy::CostScaling, Strategy::ElasticBand, Strategy::ProcessNoise],
            scale_range: [0.1, 10.0],
            noise_std: 1e-3,
            obstacle_radius: [0.05, 0.15],
            obstacle_fraction: [0.3, 0.7],
            elastic: ElasticBandOptions::default(),
            max_attempts: 10,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_goal == 0 {
            return Err(Error::validation("per_goal", "must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(Error::validation("strategies", "must not be empty"));
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::validation("scale_range", "must satisfy 0 < lo <= hi"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::validation("noise_std", "must be non-negative"));
        }
        let [rlo, rhi] = self.obstacle_radius;
        if !(rlo > 0.0 && rhi >= rlo) {
            return Err(Error::validation("obstacle_radius", "must satisfy 0 < lo <= hi"));
        }
        let [flo, fhi] = self.obstacle_fraction;
        if !(0.0..=1.0).contains(&flo) || !(flo..=1.0).contains(&fhi) {
            return Err(Error::validation("obstacle_fraction", "must satisfy 0 <= lo <= hi <= 1"));
        }
        if self.max_attempts == 0 {
            return Err(Error::validation("max_attempts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Demonstrations sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub demos: Vec<JointTrajectory>,
    pub info: Vec<DemoInfo>,
    pub home: JointVector,
    pub goals: Vec<JointVector>,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl TrajectoryDataset {
    /// Checks that every demo is valid and shares the first demo's time vector.
    pub fn validate(&self) -> Result<()> {
        let first = self.demos.first().ok_or(Error::InsufficientData(0))?;
        if self.info.len() != self.demos.len() {
            return Err(Error::Parameter("demo metadata count mismatch".into()));
        }
        for (i, d) in self.demos.iter().enumerate() {
            d.validate()?;
            if d.times != first.times {
                return Err(Error::Parameter(format!("demo {i} has a different time grid")));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.demos.first().map_or(0, |d| d.len())
    }
}

struct Nominal {
    setup: LqrSetup,
    gains: Vec<DMatrix<f64>>,
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Point at fraction `u` of the polyline's arc length.
fn point_along(path: &[Vector3<f64>], u: f64) -> Vector3<f64> {
    let lengths: Vec<f64> = path.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let mut target = u * total;
    for (k, len) in lengths.iter().enumerate() {
        if target <= *len && *len > 0.0 {
            return path[k] + (path[k + 1] - path[k]) * (target / len);
        }
        target -= len;
    }
    *path.last().expect("non-empty path")
}

fn draw_demo(
    model: &RobotModel,
    cfg: &DatasetConfig,
    nominal: &Nominal,
    home: &JointVector,
    goal: &JointVector,
    strategy: Strategy,
    rng: &mut ChaCha8Rng,
) -> Result<(JointTrajectory, StrategyDetail)> {
    let start = rest_state(home);
    let target = rest_state(goal);
    match strategy {
        Strategy::Nominal => Ok((
            generate_demo(&nominal.setup, &nominal.gains, &start, &target)?,
            StrategyDetail::Nominal,
        )),
        Strategy::CostScaling => {
            let [lo, hi] = cfg.scale_range;
            let (llo, lhi) = (lo.ln(), hi.ln());
            let scales: [f64; N_JOINTS] = std::array::from_fn(|_| (llo + (lhi - llo) * rng.random::<f64>()).exp());
            let s = JointVector::from(scales);
            let root = s.map(f64::sqrt);
            let setup = LqrSetup::joint_space(
                &cfg.lqr,
                &root.map(|r| r * cfg.lqr.position_weight),
                &root.map(|r| r * cfg.lqr.velocity_weight),
                &root.map(|r| cfg.lqr.control_weight / r),
            )?;
            let gains = riccati_backward(&setup)?;
            Ok((
                generate_demo(&setup, &gains, &start, &target)?,
                StrategyDetail::CostScaling { scales },
            ))
        }
        Strategy::ElasticBand => {
            let base = generate_demo(&nominal.setup, &nominal.gains, &start, &target)?;
            let path = end_effector_path(model, &base)?;
            let radius = uniform(rng, cfg.obstacle_radius);
            let anchor = point_along(&path, uniform(rng, cfg.obstacle_fraction));
            let offset = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            ) * radius;
            let obstacle = Obstacle::new(anchor + offset, radius);
            Ok((
                elastic_band_perturb(&base, &[obstacle], model, &cfg.elastic)?,
                StrategyDetail::ElasticBand { obstacle },
            ))
        }
        Strategy::ProcessNoise => {
            let noise: Vec<JointVector> = (0..nominal.setup.horizon())
                .map(|_| JointVector::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal) * cfg.noise_std))
                .collect();
            Ok((
                generate_demo_with_noise(&nominal.setup, &nominal.gains, &start, &target, &noise)?,
                StrategyDetail::ProcessNoise { std: cfg.noise_std },
            ))
        }
    }
}

/// Random stream of one attempt at one demo; independent of scheduling.
fn demo_rng(seed: u64, demo: usize, attempt: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((demo as u64) << 8) | attempt as u64);
    rng
}

/// Generates `cfg.per_goal` demos from `home` to each goal, cycling through
/// `cfg.strategies`. Failed draws are retried with fresh randomness up to
/// `cfg.max_attempts` times. The result does not depend on the thread count.
pub fn generate_dataset(
    model: &RobotModel,
    home: &JointVector,
    goals: &[JointVector],
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<TrajectoryDataset> {
    cfg.validate()?;
    if goals.is_empty() {
        return Err(Error::validation("goals", "at least one goal is required"));
    }
    let setup = LqrSetup::from_config(&cfg.lqr)?;
    let gains = riccati_backward(&setup)?;
    let nominal = Nominal { setup, gains };

    let total = goals.len() * cfg.per_goal;
    let results: Vec<(JointTrajectory, DemoInfo)> = (0..total)
        .into_par_iter()
        .map(|demo| {
            let goal_index = demo / cfg.per_goal;
            let goal = goals[goal_index];
            let strategy = cfg.strategies[(demo % cfg.per_goal) % cfg.strategies.len()];
            let mut last = None;
            for attempt in 0..cfg.max_attempts {
                let mut rng = demo_rng(seed, demo, attempt);
                match draw_demo(model, cfg, &nominal, home, &goal, strategy, &mut rng) {
                    Ok((traj, detail)) => {
                        return Ok((
                            traj,
                            DemoInfo {
                                goal_index,
                                goal,
                                strategy,
                                detail,
                                attempts: attempt + 1,
                            },
                        ))
                    }
                    Err(e) => {
                        log::warn!("demo {demo} attempt {} discarded: {e}", attempt + 1);
                        last = Some(e);
                    }
                }
            }
            Err(Error::GenerationFailed {
                demo,
                attempts: cfg.max_attempts,
                last: Box::new(last.expect("at least one attempt")),
            })
        })
        .collect::<Result<_>>()?;

    let (demos, info): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let duration = demos[0].duration();
    let dataset = TrajectoryDataset {
        demos,
        info,
        home: *home,
        goals: goals.to_vec(),
        dt: cfg.lqr.dt,
        duration,
        seed,
    };
    dataset.validate()?;
    Ok(dataset)
}
