//! Reference computations that share no code with the library: homogeneous
//! DH transforms, explicit base poses and finite-difference velocities.
#![allow(dead_code)]

use nalgebra::{Matrix3, Matrix4, Vector3};
use orbit_promp::{JointVector, RobotModel};

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn euler_zyx(phi_s: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(phi_s[0]) * rot_y(phi_s[1]) * rot_x(phi_s[2])
}

/// Rodrigues exponential of a rotation vector.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3<f64> {
    let angle = w.norm();
    if angle < 1e-300 {
        return Matrix3::identity();
    }
    let k = w / angle;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Rotation vector of a rotation matrix (valid away from angle pi).
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-12 {
        return v / 2.0;
    }
    v * (angle / (2.0 * angle.sin()))
}

fn homogeneous(rot: &Matrix3<f64>, pos: &Vector3<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(rot);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(pos);
    t
}

fn dh_transform(alpha: f64, a: f64, d: f64, theta: f64) -> Matrix4<f64> {
    let rz = homogeneous(&rot_z(theta), &Vector3::zeros());
    let tz = homogeneous(&Matrix3::identity(), &Vector3::new(0.0, 0.0, d));
    let tx = homogeneous(&Matrix3::identity(), &Vector3::new(a, 0.0, 0.0));
    let rx = homogeneous(&rot_x(alpha), &Vector3::zeros());
    rz * tz * tx * rx
}

/// Poses of all 8 bodies and the end-effector for an explicit base pose.
#[derive(Debug, Clone)]
pub struct Chain {
    pub body_pos: [Vector3<f64>; 8],
    pub body_rot: [Matrix3<f64>; 8],
    pub joints: [Vector3<f64>; 8],
    pub eef_pos: Vector3<f64>,
    pub eef_rot: Matrix3<f64>,
}

pub fn chain(model: &RobotModel, base_rot: &Matrix3<f64>, base_pos: &Vector3<f64>, q: &JointVector) -> Chain {
    let mut t = homogeneous(base_rot, base_pos) * homogeneous(&Matrix3::identity(), &model.mount_offset);
    let mut joints = [Vector3::zeros(); 8];
    let mut body_pos = [*base_pos; 8];
    let mut body_rot = [*base_rot; 8];
    joints[0] = t.fixed_view::<3, 1>(0, 3).into_owned();
    for i in 0..7 {
        let row = model.dh[i];
        t *= dh_transform(row.alpha, row.a, row.d, q[i] + row.theta_offset);
        joints[i + 1] = t.fixed_view::<3, 1>(0, 3).into_owned();
        body_rot[i + 1] = t.fixed_view::<3, 3>(0, 0).into_owned();
        let ratio = model.arm_links[i].com_offset_ratio;
        body_pos[i + 1] = joints[i] * (1.0 - ratio) + joints[i + 1] * ratio;
    }
    Chain {
        body_pos,
        body_rot,
        joints,
        eef_pos: joints[7],
        eef_rot: body_rot[7],
    }
}

fn masses(model: &RobotModel) -> [f64; 8] {
    let mut m = [model.spacecraft.mass; 8];
    for i in 0..7 {
        m[i + 1] = model.arm_links[i].mass;
    }
    m
}

fn inertias(model: &RobotModel) -> [Matrix3<f64>; 8] {
    let mut out = [Matrix3::from_diagonal(&Vector3::from(model.spacecraft.inertia_principal)); 8];
    for i in 0..7 {
        out[i + 1] = Matrix3::from_diagonal(&Vector3::from(model.arm_links[i].inertia_principal));
    }
    out
}

/// Chain placed so that the mass-weighted body positions sum to zero.
pub fn com_centered_chain(model: &RobotModel, base_rot: &Matrix3<f64>, q: &JointVector) -> Chain {
    let rel = chain(model, base_rot, &Vector3::zeros(), q);
    let m = masses(model);
    let total: f64 = m.iter().sum();
    let shift = -(0..8).map(|b| rel.body_pos[b] * m[b]).sum::<Vector3<f64>>() / total;
    chain(model, base_rot, &shift, q)
}

/// Body velocities `(linear, angular)` from central differences of a motion.
pub fn fd_body_velocities<F>(motion: F, h: f64) -> ([Vector3<f64>; 8], [Vector3<f64>; 8], Vector3<f64>, Vector3<f64>)
where
    F: Fn(f64) -> Chain,
{
    let plus = motion(h);
    let minus = motion(-h);
    let lin = std::array::from_fn(|b| (plus.body_pos[b] - minus.body_pos[b]) / (2.0 * h));
    let ang = std::array::from_fn(|b| log_so3(&(plus.body_rot[b] * minus.body_rot[b].transpose())) / (2.0 * h));
    let eef_lin = (plus.eef_pos - minus.eef_pos) / (2.0 * h);
    let eef_ang = log_so3(&(plus.eef_rot * minus.eef_rot.transpose())) / (2.0 * h);
    (lin, ang, eef_lin, eef_ang)
}

/// CoM-constrained motion along Euler rates and joint rates from `(phi_s, q)`.
pub fn euler_motion<'a>(
    model: &'a RobotModel,
    phi_s: Vector3<f64>,
    q: JointVector,
    phi_s_dot: Vector3<f64>,
    q_dot: JointVector,
) -> impl Fn(f64) -> Chain + 'a {
    move |t| com_centered_chain(model, &euler_zyx(&(phi_s + phi_s_dot * t)), &(q + q_dot * t))
}

/// Kinetic energy and momenta summed per body from the given velocities.
pub fn per_body_totals(
    model: &RobotModel,
    chain: &Chain,
    lin: &[Vector3<f64>; 8],
    ang: &[Vector3<f64>; 8],
) -> (f64, Vector3<f64>, Vector3<f64>) {
    let m = masses(model);
    let inertia = inertias(model);
    let mut energy = 0.0;
    let mut p = Vector3::zeros();
    let mut l = Vector3::zeros();
    for b in 0..8 {
        let iw = chain.body_rot[b] * inertia[b] * chain.body_rot[b].transpose();
        energy += 0.5 * m[b] * lin[b].norm_squared() + 0.5 * ang[b].dot(&(iw * ang[b]));
        p += lin[b] * m[b];
        l += iw * ang[b] + chain.body_pos[b].cross(&(lin[b] * m[b]));
    }
    (energy, p, l)
}

pub fn lcg_stream(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64)
    }
}

pub fn random_joints(next: &mut impl FnMut() -> f64, scale: f64) -> JointVector {
    JointVector::from_fn(|_, _| (next() * 2.0 - 1.0) * scale)
}

pub fn random_attitude(next: &mut impl FnMut() -> f64) -> Vector3<f64> {
    Vector3::new((next() * 2.0 - 1.0) * 3.0, (next() * 2.0 - 1.0) * 1.2, (next() * 2.0 - 1.0) * 3.0)
}
