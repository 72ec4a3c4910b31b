//! Path-following objective: pose tracking, obstacle hinge and smoothness,
//! with its analytic gradient and the per-step constraint checks.

use crate::error::{Error, Result};
use crate::kinematics::{manipulability_of, ChainState, JointConfig, RobotModel, SINGULARITY_THRESHOLD};
use crate::paths::TargetPath;
use crate::se3::{pos_error, rot_error, Pose, ROT_WEIGHT};
use crate::world::World;
use nalgebra::{DMatrix, RowDVector, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_DT: f64 = 0.1;
/// Clearance below which obstacle cost is charged (m).
pub const OBSTACLE_MARGIN: f64 = 0.05;
pub const LAMBDA_OBS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    #[serde(with = "configs_serde")]
    pub configs: Vec<JointConfig>,
}

mod configs_serde {
    use super::JointConfig;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[JointConfig], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = v.iter().map(|q| q.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<JointConfig>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Ok(rows.into_iter().map(JointConfig::from_vec).collect())
    }
}

impl Trajectory {
    pub fn new(configs: Vec<JointConfig>) -> Self {
        Trajectory {
            dt: DEFAULT_DT,
            configs,
        }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Joint-space distance to another trajectory of the same shape.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.configs
            .iter()
            .zip(&other.configs)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub obs: f64,
    pub smooth: f64,
}

impl Weights {
    /// `λ₁ = 10`, `λ₂ = 5 / (N + 1)`.
    pub fn for_len(n: usize) -> Self {
        Weights {
            obs: LAMBDA_OBS,
            smooth: 5.0 / (n as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub pose: f64,
    pub obs: f64,
    pub smooth: f64,
    pub total: f64,
}

fn check_len(traj: &Trajectory, path: &TargetPath) -> Result<()> {
    if traj.len() != path.len() {
        return Err(Error::LengthMismatch {
            trajectory: traj.len(),
            path: path.len(),
        });
    }
    Ok(())
}

fn states(m: &RobotModel, traj: &Trajectory) -> Result<Vec<ChainState>> {
    traj.configs.iter().map(|q| ChainState::compute(m, q)).collect()
}

fn pose_term(ee: &Pose, x: &Pose) -> f64 {
    pos_error(ee, x) + ROT_WEIGHT * rot_error(ee, x)
}

pub fn u_pose(m: &RobotModel, traj: &Trajectory, path: &TargetPath) -> Result<f64> {
    check_len(traj, path)?;
    let mut sum = 0.0;
    for (q, x) in traj.configs.iter().zip(&path.poses) {
        sum += pose_term(ChainState::compute(m, q)?.ee(), x);
    }
    Ok(sum)
}

fn obs_of_state(m: &RobotModel, s: &ChainState, world: &World) -> f64 {
    let mut sum = 0.0;
    for link in 0..m.num_links() {
        let frame = &s.links.0[link];
        for sp in m.link_spheres(link) {
            let c = frame.transform_point(&sp.center());
            let d = world.sdf.query(&c) - sp.radius;
            sum += (OBSTACLE_MARGIN - d).max(0.0);
        }
    }
    sum
}

/// Sum over steps and collision spheres of `max(0, ε − (sdf(c) − r))`.
pub fn u_obs(m: &RobotModel, traj: &Trajectory, world: &World) -> Result<f64> {
    if !world.has_obstacles() {
        states(m, traj)?;
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for q in &traj.configs {
        sum += obs_of_state(m, &ChainState::compute(m, q)?, world);
    }
    Ok(sum)
}

/// `½ Σ ‖(q_{i+1} − q_i) / dt‖²`.
pub fn u_smooth(traj: &Trajectory) -> f64 {
    let inv = 1.0 / traj.dt;
    0.5 * traj
        .configs
        .windows(2)
        .map(|w| ((&w[1] - &w[0]) * inv).norm_squared())
        .sum::<f64>()
}

pub fn u_total(m: &RobotModel, traj: &Trajectory, path: &TargetPath, world: &World) -> Result<ObjectiveTerms> {
    evaluate(m, traj, path, world, &Weights::for_len(path.len()), false).map(|(t, _)| t)
}

pub fn grad_u(
    m: &RobotModel,
    traj: &Trajectory,
    path: &TargetPath,
    world: &World,
    weights: &Weights,
) -> Result<DMatrix<f64>> {
    evaluate(m, traj, path, world, weights, true).map(|(_, g)| g.expect("gradient requested"))
}

/// Objective terms and, optionally, the `N × d` gradient. Row 0 of the
/// gradient is zero because the start configuration is fixed.
pub fn evaluate(
    m: &RobotModel,
    traj: &Trajectory,
    path: &TargetPath,
    world: &World,
    weights: &Weights,
    with_grad: bool,
) -> Result<(ObjectiveTerms, Option<DMatrix<f64>>)> {
    check_len(traj, path)?;
    let n = traj.len();
    let d = m.dof();
    let mut grad = with_grad.then(|| DMatrix::zeros(n, d));
    let mut terms = ObjectiveTerms::default();
    let use_obs = world.has_obstacles();

    for (i, (q, x)) in traj.configs.iter().zip(&path.poses).enumerate() {
        let s = ChainState::compute(m, q)?;
        let ee = s.ee();
        terms.pose += pose_term(ee, x);
        if use_obs {
            terms.obs += obs_of_state(m, &s, world);
        }
        let Some(g) = grad.as_mut() else { continue };
        if i == 0 {
            continue;
        }
        let mut row = RowDVector::zeros(d);
        let j = s.jacobian();
        let dp = ee.position - x.position;
        let dn = dp.norm();
        if dn > 0.0 {
            let u = dp / dn;
            row += u.transpose() * j.fixed_rows::<3>(0);
        }
        // angle of R_x R_eeᵀ decreases along its own axis
        let err = x.orientation.mul(&ee.orientation.conjugate());
        let omega = err.to_rotvec();
        let theta = omega.norm();
        if theta > 1e-12 {
            let u: Vector3<f64> = omega / theta;
            row -= ROT_WEIGHT * u.transpose() * j.fixed_rows::<3>(3);
        }
        if use_obs {
            for link in 0..m.num_links() {
                let frame = &s.links.0[link];
                for sp in m.link_spheres(link) {
                    let c = frame.transform_point(&sp.center());
                    let (dist, gr) = world.sdf.query_with_gradient(&c);
                    if OBSTACLE_MARGIN - (dist - sp.radius) > 0.0 {
                        let jp = s.point_jacobian(link, &c);
                        row -= weights.obs * gr.transpose() * jp;
                    }
                }
            }
        }
        g.row_mut(i).copy_from(&row);
    }

    terms.smooth = u_smooth(traj);
    terms.total = terms.pose + weights.obs * terms.obs + weights.smooth * terms.smooth;

    if let Some(g) = grad.as_mut() {
        let k = weights.smooth / (traj.dt * traj.dt);
        for i in 1..n {
            let mut v = &traj.configs[i] - &traj.configs[i - 1];
            if i + 1 < n {
                v -= &traj.configs[i + 1] - &traj.configs[i];
            }
            let mut r = g.row_mut(i);
            r += (v * k).transpose();
        }
    }
    Ok((terms, grad))
}

/// Per-step tracking errors `(position m, rotation rad)`.
pub fn tracking_errors(m: &RobotModel, traj: &Trajectory, path: &TargetPath) -> Result<Vec<(f64, f64)>> {
    check_len(traj, path)?;
    traj.configs
        .iter()
        .zip(&path.poses)
        .map(|(q, x)| {
            let s = ChainState::compute(m, q)?;
            Ok((pos_error(s.ee(), x), rot_error(s.ee(), x)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub collision: bool,
    pub joint_limit: bool,
    pub velocity: bool,
    /// Manipulability below the singularity threshold; informational only.
    pub singular: bool,
}

impl StepFlags {
    pub fn violated(&self) -> bool {
        self.collision || self.joint_limit || self.velocity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub steps: Vec<StepFlags>,
}

impl ConstraintReport {
    pub fn violations(&self) -> usize {
        self.steps.iter().filter(|s| s.violated()).count()
    }

    /// Fraction of steps with a collision, joint-limit or velocity violation.
    pub fn violation_rate(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.violations() as f64 / self.steps.len() as f64
    }

    pub fn any_collision(&self) -> bool {
        self.steps.iter().any(|s| s.collision)
    }

    pub fn any_velocity(&self) -> bool {
        self.steps.iter().any(|s| s.velocity)
    }

    pub fn any_joint_limit(&self) -> bool {
        self.steps.iter().any(|s| s.joint_limit)
    }

    pub fn singular_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.singular).count()
    }
}

pub fn velocity_violated(m: &RobotModel, prev: &JointConfig, q: &JointConfig, dt: f64) -> bool {
    m.joints
        .iter()
        .enumerate()
        .any(|(k, j)| (q[k] - prev[k]).abs() / dt > j.max_velocity + 1e-9)
}

pub fn check_constraints(m: &RobotModel, traj: &Trajectory, world: &World) -> Result<ConstraintReport> {
    let mut steps = Vec::with_capacity(traj.len());
    for (i, q) in traj.configs.iter().enumerate() {
        let s = ChainState::compute(m, q)?;
        steps.push(StepFlags {
            collision: crate::world::any_collision(m, &s, world),
            joint_limit: !m.within_limits(q),
            velocity: i > 0 && velocity_violated(m, &traj.configs[i - 1], q, traj.dt),
            singular: manipulability_of(&s.jacobian()) < SINGULARITY_THRESHOLD,
        });
    }
    Ok(ConstraintReport { steps })
}
