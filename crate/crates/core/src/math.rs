//! Small linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, Matrix3, Rotation3, SMatrix, SVector, Vector3};

/// Number of manipulator joints.
pub const N_JOINTS: usize = 7;
/// Number of generalized coordinates (spacecraft attitude + joints).
pub const N_GEN: usize = 3 + N_JOINTS;

pub type JointVector = SVector<f64, N_JOINTS>;
pub type GenVector = SVector<f64, N_GEN>;
pub type GenMatrix = SMatrix<f64, N_GEN, N_GEN>;
/// 6-vector ordered `[linear; angular]`.
pub type Twist = SVector<f64, 6>;

/// Half-width of the pitch band excluded around +-pi/2.
pub const PITCH_GUARD: f64 = 1e-3;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation `Rz(yaw) * Ry(pitch) * Rx(roll)` for `angles = (yaw, pitch, roll)`.
pub fn zyx_rotation(angles: &Vector3<f64>) -> Matrix3<f64> {
    let (yaw, pitch, roll) = (angles[0], angles[1], angles[2]);
    Rotation3::from_euler_angles(roll, pitch, yaw).into_inner()
}

/// Maps ZYX Euler rates `(yaw_dot, pitch_dot, roll_dot)` to the inertial angular velocity.
pub fn euler_rate_map(angles: &Vector3<f64>) -> Matrix3<f64> {
    let (yaw, pitch) = (angles[0], angles[1]);
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    // columns: ez, Rz(yaw) ey, Rz(yaw) Ry(pitch) ex
    Matrix3::new(0.0, -sy, cy * cp, 0.0, cy, sy * cp, 1.0, 0.0, -sp)
}

/// `d/dt(E(angles)) * rates`, the velocity-product part of the angular acceleration.
pub fn euler_rate_bias(angles: &Vector3<f64>, rates: &Vector3<f64>) -> Vector3<f64> {
    let e = euler_rate_map(angles);
    let col_yaw = e.column(0).into_owned();
    let col_pitch = e.column(1).into_owned();
    let col_roll = e.column(2).into_owned();
    let w_yaw = col_yaw * rates[0];
    let w_pitch = w_yaw + col_pitch * rates[1];
    w_yaw.cross(&col_pitch) * rates[1] + w_pitch.cross(&col_roll) * rates[2]
}

pub fn check_attitude(angles: &Vector3<f64>) -> crate::Result<()> {
    let pitch = angles[1];
    if !pitch.is_finite() || pitch.abs() >= std::f64::consts::FRAC_PI_2 - PITCH_GUARD {
        return Err(crate::Error::AttitudeSingularity { pitch });
    }
    Ok(())
}

/// Rotation vector `v` with `exp([v]x) = r`.
///
/// Uses `atan2` on the skew part so that small angles keep full relative
/// precision; angles near pi fall back to the axis extraction of nalgebra.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let w = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let sin = w.norm();
    let cos = (r.trace() - 1.0) * 0.5;
    if cos < -0.9 {
        return Rotation3::from_matrix_unchecked(*r).scaled_axis();
    }
    if sin == 0.0 {
        return Vector3::zeros();
    }
    w * (sin.atan2(cos) / sin)
}

/// Symmetrizes `m` and clips negative eigenvalues to zero.
pub fn symmetric_psd_floor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let floored = eig.eigenvalues.map(|v| v.max(0.0));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Factor `A` with `A A^T = m` for a symmetric PSD matrix, via an eigenvalue-floored decomposition.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

pub fn max_abs_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// Formats a float with 9 significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}
