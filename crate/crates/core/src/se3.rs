//! Poses, quaternions and the distance metrics used for path following.
//!
//! Quaternions are stored in `(w, x, y, z)` order everywhere, including every
//! file format in this crate.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Weight of the rotational distance relative to the translational one.
pub const ROT_WEIGHT: f64 = 0.17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(v: [f64; 4]) -> Self {
        Quat::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Builds a normalized quaternion. A zero input yields the identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Self::IDENTITY;
        }
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Quat {
            w: c,
            x: a.x * s,
            y: a.y * s,
            z: a.z * s,
        }
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotvec(v: &Vector3<f64>) -> Self {
        let angle = v.norm();
        if angle < 1e-12 {
            return Quat::new(1.0, 0.5 * v.x, 0.5 * v.y, 0.5 * v.z);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Logarithm map: rotation vector with angle in `[0, π]`.
    pub fn to_rotvec(&self) -> Vector3<f64> {
        let q = if self.w < 0.0 { self.neg() } else { *self };
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn neg(&self) -> Self {
        Quat {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn conjugate(&self) -> Self {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        let (a, b) = (self, rhs);
        Quat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let Quat { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[(2, 1)] - m[(1, 2)]) / s,
                y: (m[(0, 2)] - m[(2, 0)]) / s,
                z: (m[(1, 0)] - m[(0, 1)]) / s,
            }
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Quat {
                w: (m[(2, 1)] - m[(1, 2)]) / s,
                x: 0.25 * s,
                y: (m[(0, 1)] + m[(1, 0)]) / s,
                z: (m[(0, 2)] + m[(2, 0)]) / s,
            }
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Quat {
                w: (m[(0, 2)] - m[(2, 0)]) / s,
                x: (m[(0, 1)] + m[(1, 0)]) / s,
                y: 0.25 * s,
                z: (m[(1, 2)] + m[(2, 1)]) / s,
            }
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Quat {
                w: (m[(1, 0)] - m[(0, 1)]) / s,
                x: (m[(0, 2)] + m[(2, 0)]) / s,
                y: (m[(1, 2)] + m[(2, 1)]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    /// Rotation angle between `self` and `other` in `[0, π]`, sign-invariant.
    ///
    /// Equal to `2·acos(|⟨a, b⟩|)` for unit inputs; evaluated as
    /// `4·atan2(‖a − s·b‖, ‖a + s·b‖)` with `s = sign⟨a, b⟩`, which is exactly
    /// symmetric and stays accurate near zero where `acos` loses precision.
    pub fn angle_to(&self, other: &Quat) -> f64 {
        let s = if self.dot(other) >= 0.0 { 1.0 } else { -1.0 };
        let diff = Quat {
            w: self.w - s * other.w,
            x: self.x - s * other.x,
            y: self.y - s * other.y,
            z: self.z - s * other.z,
        };
        let sum = Quat {
            w: self.w + s * other.w,
            x: self.x + s * other.x,
            y: self.y + s * other.y,
            z: self.z + s * other.z,
        };
        4.0 * diff.norm().atan2(sum.norm())
    }

    /// Uniformly distributed random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * 2.0 * PI;
        let u3: f64 = rng.random::<f64>() * 2.0 * PI;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Quat::new(b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin())
    }
}

/// Spherical linear interpolation along the shortest arc.
///
/// When the inputs are (nearly) orthogonal, i.e. the two rotations are
/// 180° apart and the shortest arc is ambiguous, `b` is used with its stored
/// sign so the path is a fixed great circle.
pub fn slerp(a: &Quat, b: &Quat, t: f64) -> Quat {
    let mut d = a.dot(b);
    let mut b = *b;
    if d < 0.0 && d.abs() >= 1e-6 {
        b = b.neg();
        d = -d;
    }
    if d > 1.0 - 1e-12 {
        return Quat::new(
            a.w + t * (b.w - a.w),
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.z + t * (b.z - a.z),
        );
    }
    let theta = d.clamp(-1.0, 1.0).acos();
    let s = theta.sin();
    let wa = ((1.0 - t) * theta).sin() / s;
    let wb = (t * theta).sin() / s;
    Quat::new(
        wa * a.w + wb * b.w,
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
    )
}

/// First two columns of a rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn from_quat(q: &Quat) -> Self {
        let m = q.to_matrix();
        Rot6D([
            m[(0, 0)],
            m[(1, 0)],
            m[(2, 0)],
            m[(0, 1)],
            m[(1, 1)],
            m[(2, 1)],
        ])
    }

    /// Gram–Schmidt reconstruction of the full rotation matrix.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let a = Vector3::new(self.0[0], self.0[1], self.0[2]);
        let b = Vector3::new(self.0[3], self.0[4], self.0[5]);
        let c0 = a.normalize();
        let c1 = (b - c0 * c0.dot(&b)).normalize();
        let c2 = c0.cross(&c1);
        Matrix3::from_columns(&[c0, c1, c2])
    }

    pub fn to_quat(&self) -> Quat {
        Quat::from_matrix(&self.to_matrix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quat,
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(position: Vector3<f64>, orientation: Quat) -> Self {
        Pose {
            position,
            orientation: orientation.normalized(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Vector3::new(x, y, z), Quat::IDENTITY)
    }

    /// `self ∘ rhs`: apply `rhs` in the frame of `self`.
    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(&rhs.position),
            orientation: self.orientation.mul(&rhs.orientation).normalized(),
        }
    }

    pub fn inverse(&self) -> Pose {
        let qi = self.orientation.conjugate();
        Pose {
            position: -qi.rotate(&self.position),
            orientation: qi,
        }
    }

    /// `inverse(self) ∘ other`, i.e. `other` expressed in the frame of `self`.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation.rotate(p)
    }

    /// Position followed by the 6D rotation representation.
    pub fn to_repr9(&self) -> [f64; 9] {
        let r = Rot6D::from_quat(&self.orientation).0;
        [
            self.position.x,
            self.position.y,
            self.position.z,
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
        ]
    }

    pub fn from_repr9(v: &[f64; 9]) -> Pose {
        let r = Rot6D([v[3], v[4], v[5], v[6], v[7], v[8]]);
        Pose {
            position: Vector3::new(v[0], v[1], v[2]),
            orientation: r.to_quat(),
        }
    }
}

/// File representation of a pose: `{"p": [x, y, z], "q": [w, x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord {
            p: [p.position.x, p.position.y, p.position.z],
            q: p.orientation.into(),
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose::new(Vector3::from(r.p), Quat::from(r.q))
    }
}

pub fn pos_error(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm()
}

pub fn rot_error(a: &Pose, b: &Pose) -> f64 {
    a.orientation.angle_to(&b.orientation)
}

/// `pos_error + 0.17·rot_error`.
pub fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    pos_error(a, b) + ROT_WEIGHT * rot_error(a, b)
}
