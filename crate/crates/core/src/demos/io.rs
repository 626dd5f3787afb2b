use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{DemoInfo, TrajectoryDataset};
use super::JointTrajectory;
use crate::math::{fmt_sig9, JointVector, N_JOINTS};
use crate::{Error, Result};

/// File name of the dataset description written next to the demo CSVs.
pub const DATASET_MANIFEST: &str = "dataset.json";

const N_COLUMNS: usize = 1 + 2 * N_JOINTS;

fn header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=N_JOINTS).map(|j| format!("q{j}")));
    h.extend((1..=N_JOINTS).map(|j| format!("qd{j}")));
    h
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Writes `t, q1..q7, qd1..qd7` with 9 significant digits.
pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &JointTrajectory) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header()).map_err(|e| csv_error(path, e))?;
    for k in 0..traj.len() {
        let row = std::iter::once(traj.times[k])
            .chain(traj.q[k].iter().copied())
            .chain(traj.q_dot[k].iter().copied())
            .map(fmt_sig9);
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<JointTrajectory> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(|s| s.trim().to_string()).collect();
    if found != header() {
        return Err(Error::format(path, format!("expected header `{}`", header().join(","))));
    }
    let mut traj = JointTrajectory {
        times: Vec::new(),
        q: Vec::new(),
        q_dot: Vec::new(),
    };
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != N_COLUMNS {
            return Err(Error::format(
                path,
                format!("row {}: expected {N_COLUMNS} columns, found {}", line + 1, record.len()),
            ));
        }
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", line + 1)))?;
        traj.times.push(values[0]);
        traj.q.push(JointVector::from_column_slice(&values[1..=N_JOINTS]));
        traj.q_dot.push(JointVector::from_column_slice(&values[1 + N_JOINTS..]));
    }
    traj.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(traj)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemoEntry {
    file: String,
    #[serde(flatten)]
    info: DemoInfo,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetDocument {
    dt: f64,
    tn: usize,
    duration: f64,
    seed: u64,
    home: JointVector,
    goals: Vec<JointVector>,
    demos: Vec<DemoEntry>,
}

fn demo_file_name(i: usize) -> String {
    format!("demo_{i:04}.csv")
}

/// Writes one CSV per demo plus [`DATASET_MANIFEST`]; returns the written paths.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &TrajectoryDataset) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(dataset.demos.len() + 1);
    let mut entries = Vec::with_capacity(dataset.demos.len());
    for (i, (demo, info)) in dataset.demos.iter().zip(&dataset.info).enumerate() {
        let file = demo_file_name(i);
        let path = dir.join(&file);
        write_trajectory_csv(&path, demo)?;
        written.push(path);
        entries.push(DemoEntry {
            file,
            info: info.clone(),
        });
    }
    let doc = DatasetDocument {
        dt: dataset.dt,
        tn: dataset.n_steps(),
        duration: dataset.duration,
        seed: dataset.seed,
        home: dataset.home,
        goals: dataset.goals.clone(),
        demos: entries,
    };
    let path = dir.join(DATASET_MANIFEST);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Reads a directory written by [`write_dataset`].
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let dir = dir.as_ref();
    let path = dir.join(DATASET_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: DatasetDocument = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    let mut demos = Vec::with_capacity(doc.demos.len());
    let mut info = Vec::with_capacity(doc.demos.len());
    for entry in doc.demos {
        let file = dir.join(&entry.file);
        let demo = read_trajectory_csv(&file)?;
        if demo.len() != doc.tn {
            return Err(Error::format(&file, format!("expected {} rows, found {}", doc.tn, demo.len())));
        }
        if (demo.dt() - doc.dt).abs() > 1e-9 * doc.dt {
            return Err(Error::format(&file, format!("time step {} does not match dataset dt {}", demo.dt(), doc.dt)));
        }
        demos.push(demo);
        info.push(entry.info);
    }
    let dataset = TrajectoryDataset {
        demos,
        info,
        home: doc.home,
        goals: doc.goals,
        dt: doc.dt,
        duration: doc.duration,
        seed: doc.seed,
    };
    if dataset.demos.is_empty() {
        return Ok(dataset);
    }
    dataset.validate().map_err(|e| Error::format(&path, e.to_string()))?;
    Ok(dataset)
}
