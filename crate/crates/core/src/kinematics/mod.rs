//! Serial-chain robot model, forward kinematics and Jacobian algebra.

use crate::error::{Error, Result};
use crate::se3::{Pose, PoseRecord, Quat};
use nalgebra::{DMatrix, DVector, Matrix6, Matrix6xX, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;

mod ik;
pub use ik::{ik_first_valid, ik_sample, ik_solve, IkOptions};

pub type JointConfig = DVector<f64>;

/// Manipulability below this value marks a configuration singular.
pub const SINGULARITY_THRESHOLD: f64 = 0.005;

/// Damping used by the pseudoinverse when the Jacobian is near singular.
pub const PINV_DAMPING: f64 = 1e-6;

const DEFAULT_MODEL: &str = include_str!("../../assets/fetchlike7.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// Parent frame to joint frame, before the joint rotation.
    pub origin: PoseRecord,
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
    pub max_velocity: f64,
    #[serde(default)]
    pub spheres: Vec<Sphere>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndEffector {
    pub origin: PoseRecord,
    #[serde(default)]
    pub spheres: Vec<Sphere>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: u32,
    name: String,
    #[serde(default)]
    quaternion_order: Option<String>,
    joints: Vec<Joint>,
    end_effector: EndEffector,
    #[serde(default)]
    home_end_effector: Option<PoseRecord>,
}

/// Revolute serial chain. Link `i < d` moves with joint `i`; link `d` is the
/// end-effector frame.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    pub joints: Vec<Joint>,
    pub end_effector: EndEffector,
    /// Documented end-effector pose at the all-zero configuration.
    pub home_end_effector: Option<Pose>,
    origins: Vec<Pose>,
    axes: Vec<Vector3<f64>>,
    ee_origin: Pose,
}

impl RobotModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != 1 {
            return Err(Error::InvalidModel(format!(
                "unsupported format {}",
                file.format
            )));
        }
        if let Some(order) = &file.quaternion_order {
            if order != "wxyz" {
                return Err(Error::InvalidModel(format!("quaternion order {order}")));
            }
        }
        if file.joints.is_empty() {
            return Err(Error::InvalidModel("no joints".into()));
        }
        let mut axes = Vec::with_capacity(file.joints.len());
        for j in &file.joints {
            if j.lower.is_nan() || j.upper.is_nan() || j.lower >= j.upper {
                return Err(Error::InvalidModel(format!("joint {} limits", j.name)));
            }
            if j.max_velocity.is_nan() || j.max_velocity <= 0.0 {
                return Err(Error::InvalidModel(format!("joint {} velocity", j.name)));
            }
            let a = Vector3::from(j.axis);
            if a.norm() < 1e-9 {
                return Err(Error::InvalidModel(format!("joint {} axis", j.name)));
            }
            axes.push(a.normalize());
        }
        let all_spheres = file
            .joints
            .iter()
            .flat_map(|j| j.spheres.iter())
            .chain(file.end_effector.spheres.iter());
        for s in all_spheres {
            if s.radius.is_nan() || s.radius <= 0.0 {
                return Err(Error::InvalidModel("sphere radius must be positive".into()));
            }
        }
        let origins = file.joints.iter().map(|j| Pose::from(&j.origin)).collect();
        let ee_origin = Pose::from(&file.end_effector.origin);
        Ok(RobotModel {
            name: file.name,
            home_end_effector: file.home_end_effector.as_ref().map(Pose::from),
            joints: file.joints,
            end_effector: file.end_effector,
            origins,
            axes,
            ee_origin,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: 1,
            name: self.name.clone(),
            quaternion_order: Some("wxyz".into()),
            joints: self.joints.clone(),
            end_effector: self.end_effector.clone(),
            home_end_effector: self.home_end_effector.as_ref().map(PoseRecord::from),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// The shipped 7-DoF model.
    pub fn default_model() -> Self {
        Self::from_json(DEFAULT_MODEL).expect("bundled model is valid")
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn lower(&self) -> JointConfig {
        JointConfig::from_iterator(self.dof(), self.joints.iter().map(|j| j.lower))
    }

    pub fn upper(&self) -> JointConfig {
        JointConfig::from_iterator(self.dof(), self.joints.iter().map(|j| j.upper))
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        self.joints
            .iter()
            .zip(q.iter())
            .all(|(j, &v)| v >= j.lower && v <= j.upper)
    }

    pub fn clamp_to_limits(&self, q: &mut JointConfig) {
        for (j, v) in self.joints.iter().zip(q.iter_mut()) {
            *v = v.clamp(j.lower, j.upper);
        }
    }

    /// Collision spheres attached to link `link` (0..=d).
    pub fn link_spheres(&self, link: usize) -> &[Sphere] {
        if link < self.dof() {
            &self.joints[link].spheres
        } else {
            &self.end_effector.spheres
        }
    }

    pub fn num_links(&self) -> usize {
        self.dof() + 1
    }

    pub fn random_config<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> JointConfig {
        JointConfig::from_iterator(
            self.dof(),
            self.joints
                .iter()
                .map(|j| rng.random_range(j.lower..=j.upper)),
        )
    }

    fn check_dim(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }
}

/// Per-link base-frame poses: `d` joint frames followed by the end effector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPoses(pub Vec<Pose>);

impl LinkPoses {
    pub fn ee(&self) -> &Pose {
        self.0.last().expect("non-empty chain")
    }
}

/// Forward-kinematics result with the joint axes needed for Jacobians.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub links: LinkPoses,
    /// Base-frame position of each joint.
    pub joint_positions: Vec<Vector3<f64>>,
    /// Base-frame rotation axis of each joint.
    pub joint_axes: Vec<Vector3<f64>>,
}

impl ChainState {
    pub fn compute(m: &RobotModel, q: &JointConfig) -> Result<Self> {
        m.check_dim(q)?;
        let d = m.dof();
        let mut frames = Vec::with_capacity(d + 1);
        let mut joint_positions = Vec::with_capacity(d);
        let mut joint_axes = Vec::with_capacity(d);
        let mut t = Pose::identity();
        for i in 0..d {
            t = t.compose(&m.origins[i]);
            joint_positions.push(t.position);
            joint_axes.push(t.orientation.rotate(&m.axes[i]));
            t = Pose {
                position: t.position,
                orientation: t
                    .orientation
                    .mul(&Quat::from_axis_angle(&m.axes[i], q[i]))
                    .normalized(),
            };
            frames.push(t);
        }
        frames.push(t.compose(&m.ee_origin));
        Ok(ChainState {
            links: LinkPoses(frames),
            joint_positions,
            joint_axes,
        })
    }

    pub fn ee(&self) -> &Pose {
        self.links.ee()
    }

    /// Geometric end-effector Jacobian: linear rows then angular rows.
    pub fn jacobian(&self) -> Matrix6xX<f64> {
        let d = self.joint_axes.len();
        let p_ee = self.ee().position;
        let mut j = Matrix6xX::zeros(d);
        for (c, (axis, p)) in self.joint_axes.iter().zip(&self.joint_positions).enumerate() {
            let lin = axis.cross(&(p_ee - p));
            j.fixed_view_mut::<3, 1>(0, c).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, c).copy_from(axis);
        }
        j
    }

    /// Positional Jacobian (3×d) of a point rigidly attached to `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vector3<f64>) -> nalgebra::Matrix3xX<f64> {
        let d = self.joint_axes.len();
        let mut j = nalgebra::Matrix3xX::zeros(d);
        let last = link.min(d - 1);
        for c in 0..=last {
            let lin = self.joint_axes[c].cross(&(point - self.joint_positions[c]));
            j.set_column(c, &lin);
        }
        j
    }
}

pub fn fk(m: &RobotModel, q: &JointConfig) -> Result<LinkPoses> {
    Ok(ChainState::compute(m, q)?.links)
}

pub fn jacobian(m: &RobotModel, q: &JointConfig) -> Result<Matrix6xX<f64>> {
    Ok(ChainState::compute(m, q)?.jacobian())
}

/// Jacobian restricted to the joints flagged `true` in `active`.
pub fn jacobian_masked(m: &RobotModel, q: &JointConfig, active: &[bool]) -> Result<Matrix6xX<f64>> {
    let full = jacobian(m, q)?;
    let cols: Vec<usize> = (0..full.ncols())
        .filter(|&c| active.get(c).copied().unwrap_or(true))
        .collect();
    Ok(full.select_columns(cols.iter()))
}

/// Joints pinned at a limit (within `tol`) are inactive.
pub fn active_joints(m: &RobotModel, q: &JointConfig, tol: f64) -> Vec<bool> {
    m.joints
        .iter()
        .zip(q.iter())
        .map(|(j, &v)| v > j.lower + tol && v < j.upper - tol)
        .collect()
}

fn is_well_conditioned(singular_values: &DVector<f64>) -> bool {
    let max = singular_values.max();
    let min = singular_values.min();
    max > 0.0 && min > 1e-4 * max.max(1.0)
}

/// Moore–Penrose pseudoinverse (d×6). Falls back to damping with
/// `λ = 1e-6` when the Jacobian is near singular.
pub fn pinv(j: &Matrix6xX<f64>) -> DMatrix<f64> {
    let svd = DMatrix::from_column_slice(6, j.ncols(), j.as_slice()).svd(true, true);
    let lambda2 = if is_well_conditioned(&svd.singular_values) {
        0.0
    } else {
        PINV_DAMPING * PINV_DAMPING
    };
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let inv = svd.singular_values.map(|s| {
        let denom = s * s + lambda2;
        if denom > 0.0 {
            s / denom
        } else {
            0.0
        }
    });
    v_t.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// Null-space projector `I − J†J`, with the same damping rule as [`pinv`].
pub fn null_projector(j: &Matrix6xX<f64>) -> DMatrix<f64> {
    let d = j.ncols();
    let svd = DMatrix::from_column_slice(6, d, j.as_slice()).svd(false, true);
    let lambda2 = if is_well_conditioned(&svd.singular_values) {
        0.0
    } else {
        PINV_DAMPING * PINV_DAMPING
    };
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let gain = svd.singular_values.map(|s| {
        let s2 = s * s;
        if s2 + lambda2 > 0.0 {
            s2 / (s2 + lambda2)
        } else {
            0.0
        }
    });
    let range = v_t.transpose() * DMatrix::from_diagonal(&gain) * v_t;
    let p = DMatrix::identity(d, d) - range;
    (&p + p.transpose()) * 0.5
}

/// `det(J·Jᵀ)`, clamped at zero.
pub fn manipulability_of(j: &Matrix6xX<f64>) -> f64 {
    let jjt: Matrix6<f64> = j * j.transpose();
    jjt.determinant().max(0.0)
}

pub fn manipulability(m: &RobotModel, q: &JointConfig) -> Result<f64> {
    Ok(manipulability_of(&jacobian(m, q)?))
}

/// 6-dim task-space error from `current` to `target`: position difference
/// then the rotation vector of `target · current⁻¹`, both in the base frame.
pub fn pose_error_vector(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = target
        .orientation
        .mul(&current.orientation.conjugate())
        .to_rotvec();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}
