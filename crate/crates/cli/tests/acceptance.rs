//! End-to-end acceptance criteria. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; the process fails if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orbit_promp::demos::{
    generate_dataset, generate_demo, rest_state, riccati_backward, zoh_double_integrator,
    DatasetConfig, JointTrajectory, LqrConfig, LqrSetup,
};
use orbit_promp::dynamics::{kinetic_energy, simulate, GeneralizedCoords, Simulation};
use orbit_promp::math::rotation_log;
use orbit_promp::model::{forward_kinematics, generalized_jacobian, spacecraft_rates, system_momentum};
use orbit_promp::planner::{plan, read_costs_csv, CostConfig, Goal, PlanRequest, COSTS_FILE};
use orbit_promp::promp::{
    condition, fit_promp, fit_weights, load_promp, marginal, sample_trajectories, trajectory_from_weights,
    BasisConfig, FitOptions,
};
use orbit_promp::{home_configuration, JointVector, RobotModel, SystemState, N_JOINTS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const TORQUE_LIMIT: f64 = 5.0;
const SIM_DT: f64 = 1e-3;
const SIM_DURATION: f64 = 5.0;

/// Smooth random torque: per joint, three sinusoids whose amplitudes sum to at most 5 N m.
fn random_torque(seed: u64) -> impl Fn(f64) -> JointVector {
    let mut r = rng(seed);
    let terms: Vec<[(f64, f64, f64); 3]> = (0..N_JOINTS)
        .map(|_| {
            let w: [f64; 3] = [r.random(), r.random(), r.random()];
            let total: f64 = w.iter().sum();
            std::array::from_fn(|m| {
                let amp = TORQUE_LIMIT * w[m] / total;
                (amp, r.random_range(0.2..2.0), r.random_range(0.0..std::f64::consts::TAU))
            })
        })
        .collect();
    move |t| {
        JointVector::from_fn(|j, _| {
            terms[j]
                .iter()
                .map(|(a, f, p)| a * (std::f64::consts::TAU * f * t + p).sin())
                .sum()
        })
    }
}

fn criterion_1(model: &RobotModel, sim: &Simulation, elapsed: Duration, torque: &dyn Fn(f64) -> JointVector) -> Outcome {
    let mut worst_p: f64 = 0.0;
    let mut worst_l: f64 = 0.0;
    let mut worst_tau: f64 = 0.0;
    for (s, &t) in sim.states.iter().zip(&sim.times) {
        let (p, l) = system_momentum(model, s).unwrap();
        worst_p = worst_p.max(p.norm());
        worst_l = worst_l.max(l.norm());
        worst_tau = worst_tau.max(torque(t).amax());
    }
    let pass = worst_p <= 1e-6 && worst_l <= 1e-6 && worst_tau <= TORQUE_LIMIT && elapsed.as_secs_f64() <= 30.0;
    outcome(
        pass,
        format!(
            "{} steps, max |p| = {worst_p:.3e} kg m/s, max |L| = {worst_l:.3e} kg m^2/s, max |tau| = {worst_tau:.3} N m, {:.2} s",
            sim.states.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2(model: &RobotModel, sim: &Simulation) -> Outcome {
    let total_mass = model.spacecraft.mass + model.arm_links.iter().map(|l| l.mass).sum::<f64>();
    let bound = 1e-9 * total_mass * model.arm_reach();
    let mut worst: f64 = 0.0;
    for s in &sim.states {
        let fk = forward_kinematics(model, s).unwrap();
        let mut moment = fk.link_poses[0].position * model.spacecraft.mass;
        for (i, link) in model.arm_links.iter().enumerate() {
            moment += fk.link_poses[i + 1].position * link.mass;
        }
        worst = worst.max(moment.norm());
    }
    outcome(worst <= bound, format!("max |sum m_i r_i| = {worst:.3e} (bound {bound:.3e})"))
}

fn criterion_3(model: &RobotModel, sim: &Simulation, torque: &dyn Fn(f64) -> JointVector) -> Outcome {
    let energy: Vec<f64> = sim
        .states
        .iter()
        .map(|s| kinetic_energy(model, &GeneralizedCoords::from_state(s)).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    let mut worst_step = 0;
    for k in 2..energy.len() - 2 {
        let de = (energy[k - 2] - 8.0 * energy[k - 1] + 8.0 * energy[k + 1] - energy[k + 2]) / (12.0 * SIM_DT);
        let power = sim.states[k].phi_m_dot.dot(&torque(sim.times[k]));
        let rel = (de - power).abs() / power.abs().max(1e-12);
        if rel > worst {
            worst = rel;
            worst_step = k;
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.3e} at step {worst_step}"))
}

fn criterion_4(model: &RobotModel) -> Outcome {
    let mut r = rng(4);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let phi_s = Vector3::new(r.random_range(-3.0..3.0), r.random_range(-1.2..1.2), r.random_range(-3.0..3.0));
        let q = JointVector::from_fn(|_, _| r.random_range(-3.0..3.0));
        let qd = JointVector::from_fn(|_, _| r.random_range(-1.0..1.0));
        let rates = spacecraft_rates(model, &phi_s, &q, &qd).unwrap();
        let pose_at = |s: f64| {
            let state = SystemState::at_rest(model, phi_s + rates.phi_s_dot * s, q + qd * s).unwrap();
            forward_kinematics(model, &state).unwrap().end_effector
        };
        let (a, b) = (pose_at(-h), pose_at(h));
        let v_fd = (b.position - a.position) / (2.0 * h);
        let w_fd = rotation_log(&(b.rotation * a.rotation.transpose())) / (2.0 * h);
        let state = SystemState::momentum_consistent(model, phi_s, q, qd).unwrap();
        let twist = generalized_jacobian(model, &state).unwrap() * qd;
        let mut fd = twist;
        fd.fixed_rows_mut::<3>(0).copy_from(&v_fd);
        fd.fixed_rows_mut::<3>(3).copy_from(&w_fd);
        worst = worst.max((twist - fd).norm() / fd.norm());
    }
    outcome(worst <= 1e-4, format!("100 states, max relative error {worst:.3e}"))
}

/// Grid search over `[-range, range]` refined by a parabolic step.
fn grid_argmin(f: impl Fn(f64) -> f64, range: f64, step: f64) -> (f64, f64) {
    let n = (range / step).round() as i64;
    let (mut best_i, mut best) = (-n, f64::INFINITY);
    for i in -n..=n {
        let v = f(i as f64 * step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let u0 = best_i as f64 * step;
    let (fm, f0, fp) = (f(u0 - step), best, f(u0 + step));
    let u = u0 - step * (fp - fm) / (2.0 * (fp - 2.0 * f0 + fm));
    (u, f(u))
}

fn criterion_5() -> Outcome {
    let (a, b) = zoh_double_integrator(1, 0.1);
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
    let r = DMatrix::from_element(1, 1, 0.2);
    let p_t = DMatrix::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 1.0]);
    let s = LqrSetup::new(a, b, vec![q; 2], vec![r; 2], p_t, 0.1).unwrap();
    let quad = |p: &DMatrix<f64>, x: &DVector<f64>| x.dot(&(p * x));
    let stage = |t: usize, next: &DMatrix<f64>, x: &DVector<f64>| {
        let f = |u: f64| {
            let uv = DVector::from_element(1, u);
            quad(&s.q[t], x) + quad(&s.r[t], &uv) + quad(next, &(&s.a * x + &s.b * uv))
        };
        grid_argmin(f, 20.0, 1e-4)
    };
    let e = [DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
    let k1: Vec<f64> = e.iter().map(|x| -stage(1, &s.p_terminal, x).0).collect();
    let v = |x: &DVector<f64>| stage(1, &s.p_terminal, x).1;
    let (v1, v2, v12) = (v(&e[0]), v(&e[1]), v(&(&e[0] + &e[1])));
    let off = (v12 - v1 - v2) / 2.0;
    let p1 = DMatrix::from_row_slice(2, 2, &[v1, off, off, v2]);
    let k0: Vec<f64> = e.iter().map(|x| -stage(0, &p1, x).0).collect();
    let gains = riccati_backward(&s).unwrap();
    let mut gain_err: f64 = 0.0;
    for j in 0..2 {
        gain_err = gain_err.max((gains[1][(0, j)] - k1[j]).abs()).max((gains[0][(0, j)] - k0[j]).abs());
    }

    let setup = LqrSetup::from_config(&LqrConfig::default()).unwrap();
    let gains = riccati_backward(&setup).unwrap();
    let start = JointVector::zeros();
    let mut goal = JointVector::zeros();
    goal[0] = 1.0;
    let traj = generate_demo(&setup, &gains, &rest_state(&start), &rest_state(&goal)).unwrap();
    let terminal = (traj.q.last().unwrap() - goal).amax();
    outcome(
        gain_err <= 1e-6 && terminal <= 1e-2,
        format!("max gain error vs DP {gain_err:.3e}; 1 rad reach terminal error {terminal:.3e} rad"),
    )
}

fn mean_trajectory(demos: &[JointTrajectory]) -> JointTrajectory {
    let n = demos.len() as f64;
    let first = &demos[0];
    JointTrajectory {
        times: first.times.clone(),
        q: (0..first.len()).map(|k| demos.iter().map(|d| d.q[k]).sum::<JointVector>() / n).collect(),
        q_dot: (0..first.len()).map(|k| demos.iter().map(|d| d.q_dot[k]).sum::<JointVector>() / n).collect(),
    }
}

fn criterion_6(model: &RobotModel) -> Outcome {
    let home = home_configuration();
    let goal = home + JointVector::from([0.45, -0.4, 0.4, 0.45, -0.4, 0.45, -0.4]);
    let ds = generate_dataset(model, &home, &[goal], &DatasetConfig::default(), 6).unwrap();
    let basis = BasisConfig::standard(ds.duration).unwrap();
    let p = fit_promp(&ds, &basis, &FitOptions::default()).unwrap();
    let mean_demo = mean_trajectory(&ds.demos);
    let recon = trajectory_from_weights(&p, &p.mu_w).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..N_JOINTS {
        let values: Vec<f64> = mean_demo.q.iter().map(|q| q[j]).collect();
        let range = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mse = mean_demo.q.iter().zip(&recon.q).map(|(a, b)| (a[j] - b[j]).powi(2)).sum::<f64>() / values.len() as f64;
        worst = worst.max(mse.sqrt() / range);
    }

    let mut r = rng(66);
    let w = DVector::from_fn(p.n_weights(), |_, _| r.random_range(-1.0..1.0));
    let synthetic = trajectory_from_weights(&p, &w).unwrap();
    let opts = FitOptions {
        ridge_lambda: 1e-12,
        ..FitOptions::default()
    };
    let recovered = fit_weights(&synthetic, &basis, &opts).unwrap();
    let recovery = (recovered - w).amax();
    outcome(
        worst <= 0.02 && recovery <= 1e-6,
        format!(
            "{} demos, mean-trajectory RMS error {:.3}% of joint range; weight recovery error {recovery:.3e}",
            ds.demos.len(),
            100.0 * worst
        ),
    )
}

fn criterion_7(promp_file: &Path, goal: &JointVector) -> Outcome {
    let p = load_promp(promp_file).unwrap();
    let t_end = p.basis.duration;
    let mut target = DVector::zeros(2 * N_JOINTS);
    target.rows_mut(0, N_JOINTS).copy_from(goal);
    let tight = DMatrix::identity(2 * N_JOINTS, 2 * N_JOINTS) * 1e-10;
    let c = condition(&p, t_end, &target, &tight).unwrap();
    let samples = sample_trajectories(&c, 100, 77).unwrap();
    let end_err = samples
        .iter()
        .map(|s| (s.q.last().unwrap() - goal).amax())
        .fold(0.0, f64::max);
    let (_, before) = marginal(&p, t_end).unwrap();
    let (_, after) = marginal(&c, t_end).unwrap();
    let gap = (&before - &after).symmetric_eigen().eigenvalues.min();
    outcome(
        end_err <= 1e-3 && gap >= -1e-12,
        format!("100 samples, max terminal joint error {end_err:.3e} rad; min eig(before - after) {gap:.3e}"),
    )
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_orbit-promp"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn goals_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/goals.json")
}

const PLAN_SEED: &str = "2026";
const SAMPLES: usize = 20;

/// demos -> fit -> plan through the binary; returns the plan directory.
fn pipeline(root: &Path, jobs: Option<&str>) -> Result<(PathBuf, PathBuf), String> {
    let ds = root.join("dataset");
    let promp = root.join("promp.json");
    let plan_dir = root.join("plan");
    let goals = goals_file();
    let jobs: Vec<&str> = jobs.map(|j| vec!["--jobs", j]).unwrap_or_default();
    cli(&[&jobs[..], &["demos", "--goals", goals.to_str().unwrap(), "--per-goal", "20", "--seed", "42", "--out", ds.to_str().unwrap()]].concat())?;
    cli(&["fit", "--dataset", ds.to_str().unwrap(), "--out", promp.to_str().unwrap()])?;
    let goal = joint_list(&plan_goal());
    cli(&[&jobs[..], &[
        "plan", "--promp", promp.to_str().unwrap(), "--goal-joints", &goal, "--samples", &SAMPLES.to_string(),
        "--seed", PLAN_SEED, "--out", plan_dir.to_str().unwrap(),
    ]].concat())?;
    Ok((promp, plan_dir))
}

fn joint_list(q: &JointVector) -> String {
    q.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
}

/// A goal between two training goals, not itself demonstrated.
fn plan_goal() -> JointVector {
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(goals_file()).unwrap()).unwrap();
    let goal = |i: usize| {
        let v: Vec<f64> = doc["goals"][i].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        JointVector::from_column_slice(&v)
    };
    (goal(0) + goal(2)) / 2.0
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cost recomputed from scratch with only the public rate map.
fn brute_force_cost(model: &RobotModel, traj: &JointTrajectory, dt: f64) -> (f64, f64) {
    let mut phi_s = Vector3::zeros();
    let mut cost = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..traj.len() {
        let r = spacecraft_rates(model, &phi_s, &traj.q[k], &traj.q_dot[k]).unwrap();
        cost += r.phi_s_dot.norm_squared() + r.v_s.norm_squared();
        peak = peak.max(phi_s.norm());
        phi_s += r.phi_s_dot * dt;
    }
    (cost, peak)
}

fn criterion_8(model: &RobotModel, root: &Path) -> (Outcome, Option<(PathBuf, PathBuf)>) {
    let start = Instant::now();
    let (promp_file, plan_dir) = match pipeline(root, None) {
        Ok(v) => v,
        Err(e) => return (outcome(false, format!("pipeline failed: {e}")), None),
    };
    let elapsed = start.elapsed().as_secs_f64();

    let names: Vec<String> = fs::read_dir(&plan_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let eef_files = names.iter().filter(|n| n.starts_with("eef_") && n.ends_with(".csv")).count();
    let exported = eef_files == SAMPLES && names.iter().any(|n| n == COSTS_FILE) && names.iter().any(|n| n == "spacecraft.csv");

    // Replay the plan in-process and recompute every sample's cost independently.
    let promp = load_promp(&promp_file).unwrap();
    let request = PlanRequest {
        goal: Goal::Joints(plan_goal()),
        start: home_configuration(),
        n_samples: SAMPLES,
        seed: PLAN_SEED.parse().unwrap(),
        cost: CostConfig::new(1.0, promp.dt).unwrap(),
    };
    let result = plan(model, &promp, &request).unwrap();
    let recomputed: Vec<(f64, f64)> = result.samples.iter().map(|s| brute_force_cost(model, s, promp.dt)).collect();
    let exact_min = recomputed.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let file_costs = read_costs_csv(plan_dir.join(COSTS_FILE)).unwrap();
    let file_best = file_costs
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|c| c.0)
        .unwrap();
    let costs_agree = file_costs
        .iter()
        .zip(&recomputed)
        .all(|((_, f), (c, _))| (f - c).abs() <= 1e-8 * c);
    let selected_is_min = (result.selected_cost() - exact_min).abs() <= 1e-12 * exact_min
        && file_best == result.selected_index
        && recomputed[result.selected_index].0 == exact_min;

    let excursions: Vec<f64> = recomputed.iter().map(|c| c.1).collect();
    let selected_excursion = excursions[result.selected_index];
    let med = median(&excursions);
    let lib_excursion = result.spacecraft_log().peak_attitude_excursion();

    let pass = exported
        && costs_agree
        && selected_is_min
        && selected_excursion <= med
        && (lib_excursion - selected_excursion).abs() <= 1e-12
        && elapsed <= 60.0;
    let detail = format!(
        "{eef_files} eef CSVs; selected {} cost {:.6e} (exact min {:.6e}); peak attitude excursion {:.3e} rad vs median {:.3e} rad; {:.2} s",
        result.selected_index,
        result.selected_cost(),
        exact_min,
        selected_excursion,
        med,
        elapsed
    );
    (outcome(pass, detail), Some((promp_file, plan_dir)))
}

fn manifest_hash(dir: &Path) -> String {
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["manifest_hash"].as_str().unwrap_or_default().to_string()
}

fn criterion_9(first_plan: &Path, root: &Path) -> Outcome {
    let (_, second_plan) = match pipeline(root, Some("1")) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("second run failed: {e}")),
    };
    let mut csvs: Vec<String> = fs::read_dir(first_plan)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    csvs.sort();
    let differing: Vec<&String> = csvs
        .iter()
        .filter(|n| fs::read(first_plan.join(n)).ok() != fs::read(second_plan.join(n)).ok())
        .collect();
    let (ha, hb) = (manifest_hash(first_plan), manifest_hash(&second_plan));
    let datasets_match = manifest_hash(&first_plan.with_file_name("dataset")) == manifest_hash(&root.join("dataset"));
    outcome(
        differing.is_empty() && ha == hb && !ha.is_empty() && datasets_match,
        format!(
            "{} CSVs compared ({} differ); plan manifest {}...{}; second run used 1 worker",
            csvs.len(),
            differing.len(),
            &ha[..12.min(ha.len())],
            if ha == hb { " (identical)" } else { " (different)" }
        ),
    )
}

fn main() -> ExitCode {
    // libtest arguments such as --nocapture are accepted and ignored.
    let model = RobotModel::reference();
    let mut results: Vec<(usize, Outcome)> = Vec::new();

    let torque = random_torque(1);
    let s0 = SystemState::at_rest(&model, Vector3::zeros(), home_configuration()).unwrap();
    let t0 = Instant::now();
    let sim = simulate(&model, &s0, &torque, SIM_DT, SIM_DURATION).unwrap();
    let sim_time = t0.elapsed();
    results.push((1, criterion_1(&model, &sim, sim_time, &torque)));
    results.push((2, criterion_2(&model, &sim)));
    results.push((3, criterion_3(&model, &sim, &torque)));
    results.push((4, criterion_4(&model)));
    results.push((5, criterion_5()));
    results.push((6, criterion_6(&model)));

    let work = tempfile::tempdir().unwrap();
    let (c8, artifacts) = criterion_8(&model, &work.path().join("run1"));
    let promp_file = artifacts.as_ref().map(|a| a.0.clone());
    let plan_dir = artifacts.map(|a| a.1);
    match &promp_file {
        Some(p) => results.push((7, criterion_7(p, &plan_goal()))),
        None => results.push((7, outcome(false, "no fitted primitive".into()))),
    }
    results.push((8, c8));
    match plan_dir {
        Some(dir) => results.push((9, criterion_9(&dir, &work.path().join("run2")))),
        None => results.push((9, outcome(false, "criterion 8 run did not complete".into()))),
    }
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, o) in &results {
        println!("criterion {n}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
