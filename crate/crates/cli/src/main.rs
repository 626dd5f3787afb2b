mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::Deserialize;
use serde_json::json;

use manifest::{file_sha256, prepare_output_dir, sha256_hex, RunManifest};
use orbit_promp::demos::{generate_dataset, read_dataset, write_dataset, DatasetConfig};
use orbit_promp::model::{forward_kinematics, load_model_file, system_momentum, ModelConfig};
use orbit_promp::planner::{export_plan, plan, CostConfig, Goal, PlanRequest};
use orbit_promp::promp::{fit_promp, load_promp, save_promp, BasisConfig, FitOptions, DEFAULT_BANDWIDTH, DEFAULT_CENTERS};
use orbit_promp::{home_configuration, JointVector, Pose, RobotModel, SystemState, N_JOINTS};

#[derive(Parser)]
#[command(name = "orbit-promp", version, about = "Low-disturbance trajectory planning for a free-floating space manipulator")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate LQR demonstrations.
    Demos(DemosArgs),
    /// Fit a movement primitive to a demonstration dataset.
    Fit(FitArgs),
    /// Plan a minimum-disturbance trajectory.
    Plan(PlanArgs),
    /// Model utilities.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Validate a model file and print its main properties.
    Check(ModelArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model TOML (default: the built-in reference arm).
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct DemosArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// JSON file with `goals` (list of 7-vectors) and optional `home`.
    #[arg(long)]
    goals: PathBuf,
    #[arg(long, default_value_t = 20)]
    per_goal: usize,
    /// Generator settings (TOML); `per_goal` on the command line takes precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset directory written by `demos`.
    #[arg(long)]
    dataset: PathBuf,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Basis centers in phase units, comma separated.
    #[arg(long, value_delimiter = ',')]
    centers: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
    bandwidth: f64,
    #[arg(long, default_value_t = FitOptions::default().ridge_lambda)]
    lambda: f64,
    /// Observation noise variance.
    #[arg(long, default_value_t = FitOptions::default().sigma_x)]
    sigma_x: f64,
    /// Fit positions only.
    #[arg(long)]
    positions_only: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Movement primitive written by `fit`.
    #[arg(long)]
    promp: PathBuf,
    /// Joint goal, 7 comma-separated angles.
    #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "goal_pose", required_unless_present = "goal_pose")]
    goal_joints: Option<Vec<f64>>,
    /// End-effector goal `x,y,z,qw,qx,qy,qz` in the inertial frame.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    goal_pose: Option<Vec<f64>>,
    /// Start configuration (default: home).
    #[arg(long, value_delimiter = ',', num_args = 1)]
    start_joints: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Angular-to-linear cost coefficient, m/rad.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

fn load_model(args: &ModelArgs) -> Result<(RobotModel, String)> {
    let model = match &args.model {
        Some(path) => load_model_file(path)?,
        None => RobotModel::reference(),
    };
    let hash = sha256_hex(&serde_json::to_vec(&ModelConfig::from_model(&model))?);
    Ok((model, hash))
}

fn joint_vector(values: &[f64], what: &str) -> Result<JointVector> {
    if values.len() != N_JOINTS || values.iter().any(|v| !v.is_finite()) {
        bail!("{what}: expected {N_JOINTS} finite values, got {}", values.len());
    }
    Ok(JointVector::from_column_slice(values))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalsFile {
    home: Option<Vec<f64>>,
    goals: Vec<Vec<f64>>,
}

fn read_goals(path: &Path) -> Result<(JointVector, Vec<JointVector>)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read goals file {}", path.display()))?;
    let doc: GoalsFile = serde_json::from_str(&text).with_context(|| format!("{}: malformed goals file", path.display()))?;
    let home = match doc.home {
        Some(h) => joint_vector(&h, &format!("{}: home", path.display()))?,
        None => home_configuration(),
    };
    if doc.goals.is_empty() {
        bail!("{}: no goals listed", path.display());
    }
    let goals = doc
        .goals
        .iter()
        .enumerate()
        .map(|(i, g)| joint_vector(g, &format!("{}: goal {i}", path.display())))
        .collect::<Result<_>>()?;
    Ok((home, goals))
}

fn cmd_demos(args: &DemosArgs) -> Result<()> {
    let (model, model_hash) = load_model(&args.model)?;
    let (home, goals) = read_goals(&args.goals)?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str::<DatasetConfig>(&text).with_context(|| format!("{}: malformed generator settings", path.display()))?
        }
        None => DatasetConfig::default(),
    };
    cfg.per_goal = args.per_goal;
    prepare_output_dir(&args.out, args.overwrite)?;
    let dataset = generate_dataset(&model, &home, &goals, &cfg, args.seed)?;
    let files = write_dataset(&args.out, &dataset)?;
    let mut manifest = RunManifest::new("demos", Some(args.seed), Some(model_hash), json!({ "generator": cfg }));
    manifest.inputs.insert("goals".into(), file_sha256(&args.goals)?);
    let manifest = manifest.write(&args.out, &files)?;
    println!(
        "wrote {} demonstrations to {} (manifest {})",
        dataset.demos.len(),
        args.out.display(),
        manifest.manifest_hash
    );
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let dataset = read_dataset(&args.dataset)?;
    let manifest = RunManifest::verify(&args.dataset)?;
    if dataset.demos.len() < 2 {
        bail!("{}: need at least 2 demonstrations, found {}", args.dataset.display(), dataset.demos.len());
    }
    let centers = args.centers.clone().unwrap_or_else(|| DEFAULT_CENTERS.to_vec());
    let basis = BasisConfig::new(centers, args.bandwidth, dataset.duration)?;
    let opts = FitOptions {
        ridge_lambda: args.lambda,
        sigma_x: args.sigma_x,
        use_velocity: !args.positions_only,
    };
    let mut promp = fit_promp(&dataset, &basis, &opts)?;
    promp.dataset_hash = Some(manifest.manifest_hash);
    save_promp(&args.out, &promp)?;
    println!(
        "fitted {} weights from {} demonstrations to {}",
        promp.n_weights(),
        dataset.demos.len(),
        args.out.display()
    );
    Ok(())
}

fn pose_from(values: &[f64]) -> Result<Pose> {
    if values.len() != 7 || values.iter().any(|v| !v.is_finite()) {
        bail!("--goal-pose: expected x,y,z,qw,qx,qy,qz");
    }
    let q = Quaternion::new(values[3], values[4], values[5], values[6]);
    if q.norm() < 1e-12 {
        bail!("--goal-pose: quaternion has zero norm");
    }
    Ok(Pose {
        position: Vector3::new(values[0], values[1], values[2]),
        rotation: UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner(),
    })
}

fn cmd_plan(args: &PlanArgs) -> Result<()> {
    let (model, model_hash) = load_model(&args.model)?;
    let promp = load_promp(&args.promp)?;
    let goal = match (&args.goal_joints, &args.goal_pose) {
        (Some(q), _) => Goal::Joints(joint_vector(q, "--goal-joints")?),
        (None, Some(p)) => Goal::Pose(pose_from(p)?),
        (None, None) => bail!("one of --goal-joints or --goal-pose is required"),
    };
    let start = match &args.start_joints {
        Some(q) => joint_vector(q, "--start-joints")?,
        None => home_configuration(),
    };
    let request = PlanRequest {
        goal,
        start,
        n_samples: args.samples,
        seed: args.seed,
        cost: CostConfig::new(args.c, promp.dt)?,
    };
    prepare_output_dir(&args.out, args.overwrite)?;
    let result = plan(&model, &promp, &request)?;
    let files = export_plan(&result, &args.out, true)?;
    let parameters = json!({
        "goal_joints": args.goal_joints,
        "goal_pose": args.goal_pose,
        "start_joints": start.as_slice(),
        "samples": args.samples,
        "c": args.c,
        "dt": promp.dt,
    });
    let mut manifest = RunManifest::new("plan", Some(args.seed), Some(model_hash), parameters);
    manifest.inputs.insert("promp".into(), file_sha256(&args.promp)?);
    let manifest = manifest.write(&args.out, &files)?;
    println!(
        "selected sample {} with cost {:.6e} (manifest {})",
        result.selected_index,
        result.selected_cost(),
        manifest.manifest_hash
    );
    Ok(())
}

fn cmd_model_check(args: &ModelArgs) -> Result<()> {
    let (model, hash) = load_model(args)?;
    let state = SystemState::at_rest(&model, Vector3::zeros(), home_configuration())?;
    let fk = forward_kinematics(&model, &state)?;
    let (linear, angular) = system_momentum(&model, &state)?;
    let total_mass = model.spacecraft.mass + model.arm_links.iter().map(|l| l.mass).sum::<f64>();
    let p = fk.end_effector.position;
    println!("model ok (hash {hash})");
    println!("total mass {total_mass:.3} kg, arm reach bound {:.3} m", model.arm_reach());
    println!("home: spacecraft at [{:.4}, {:.4}, {:.4}] m, end-effector at [{:.4}, {:.4}, {:.4}] m", state.r_s.x, state.r_s.y, state.r_s.z, p.x, p.y, p.z);
    println!("home momentum: linear {:.3e}, angular {:.3e}", linear.norm(), angular.norm());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot configure the worker pool")?;
    }
    match &cli.command {
        Command::Demos(a) => cmd_demos(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Model(ModelCommand::Check(a)) => cmd_model_check(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORBIT_PROMP_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
