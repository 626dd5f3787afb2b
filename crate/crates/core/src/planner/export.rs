use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, UnitQuaternion};

use super::{PlanResult, SpacecraftLog};
use crate::math::fmt_sig9;
use crate::{Error, Result};

pub const COSTS_FILE: &str = "costs.csv";
pub const SPACECRAFT_FILE: &str = "spacecraft.csv";

const EEF_HEADER: [&str; 8] = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"];
const SPACECRAFT_HEADER: [&str; 13] = ["t", "yaw", "pitch", "roll", "x", "y", "z", "wx", "wy", "wz", "vx", "vy", "vz"];

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Unit quaternion `(w, x, y, z)` with `w >= 0`.
fn quaternion(rotation: &nalgebra::Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation));
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

fn eef_file_name(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(3);
    format!("eef_{index:0width$}.csv")
}

fn write_eef(path: &Path, log: &SpacecraftLog) -> Result<()> {
    let rows = log.times.iter().zip(&log.end_effector).map(|(t, pose)| {
        let q = quaternion(&pose.rotation);
        [*t, pose.position.x, pose.position.y, pose.position.z, q[0], q[1], q[2], q[3]].map(fmt_sig9)
    });
    write_rows(path, &EEF_HEADER, rows)
}

fn write_spacecraft(path: &Path, log: &SpacecraftLog) -> Result<()> {
    let rows = (0..log.len()).map(|k| {
        let mut row = vec![log.times[k]];
        for v in [&log.phi_s[k], &log.r_s[k], &log.omega[k], &log.v_s[k]] {
            row.extend(v.iter().copied());
        }
        row.into_iter().map(fmt_sig9)
    });
    write_rows(path, &SPACECRAFT_HEADER, rows)
}

fn is_plan_file(name: &str) -> bool {
    name == COSTS_FILE || name == SPACECRAFT_FILE || (name.starts_with("eef_") && name.ends_with(".csv"))
}

/// Writes one end-effector CSV per sample, the per-sample costs and the
/// spacecraft motion of the selected sample. Returns the written paths.
///
/// A non-empty `out_dir` is refused unless `overwrite` is set, in which case
/// plan files from an earlier export are removed first.
pub fn export_plan(result: &PlanResult, out_dir: impl AsRef<Path>, overwrite: bool) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let existing: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    if !existing.is_empty() {
        if !overwrite {
            return Err(Error::OutputNotEmpty { path: dir.to_path_buf() });
        }
        for path in existing {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if path.is_file() && is_plan_file(name) {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }

    let n = result.samples.len();
    let mut written = Vec::with_capacity(n + 2);
    for (i, log) in result.logs.iter().enumerate() {
        let path = dir.join(eef_file_name(i, n));
        write_eef(&path, log)?;
        written.push(path);
    }

    let path = dir.join(COSTS_FILE);
    let rows = result.costs.iter().enumerate().map(|(i, c)| [i.to_string(), fmt_sig9(*c)]);
    write_rows(&path, &["sample_index", "cost"], rows)?;
    written.push(path);

    let path = dir.join(SPACECRAFT_FILE);
    write_spacecraft(&path, result.spacecraft_log())?;
    written.push(path);
    Ok(written)
}

/// Reads a costs CSV back as `(sample_index, cost)` pairs in file order.
pub fn read_costs_csv(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if header != ["sample_index", "cost"] {
        return Err(Error::format(path, "expected header `sample_index,cost`"));
    }
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = || Error::format(path, format!("row {}: expected an index and a cost", line + 2));
        let index = record.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let cost = record.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        out.push((index, cost));
    }
    Ok(out)
}
