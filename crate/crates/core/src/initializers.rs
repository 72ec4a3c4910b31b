//! Initial trajectories: linear joint interpolation, greedy segment-wise IK
//! selection, and deterministic policy rollout.

use crate::error::Result;
use crate::kinematics::{ik_sample, ChainState, JointConfig, RobotModel};
use crate::mdp::{build_state_from_chain, MAX_ACTION};
use crate::objective::{evaluate, Trajectory, Weights};
use crate::paths::{Problem, TargetPath};
use crate::policy::PolicyNet;
use crate::world::any_collision;
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

/// Sub-sampling interval of the greedy initializer.
pub const GREEDY_INTERVAL: usize = 10;
/// IK candidates drawn per greedy segment and for the linear goal.
pub const IK_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Linear,
    Greedy,
    Policy,
}

impl InitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Greedy => "greedy",
            Self::Policy => "policy",
        }
    }
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "greedy" => Ok(Self::Greedy),
            "policy" => Ok(Self::Policy),
            other => Err(format!("unknown initializer '{other}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitResult {
    pub trajectory: Trajectory,
    /// Wall-clock generation time (s).
    pub gen_time: f64,
    pub method: InitMethod,
    /// Set when a fallback was used (no goal IK, or a segment without
    /// candidates).
    pub degraded: bool,
}

fn lerp(a: &JointConfig, b: &JointConfig, t: f64) -> JointConfig {
    a + (b - a) * t
}

/// `q0 → q_goal` in `n` evenly spaced configurations.
pub fn interpolate(q0: &JointConfig, q_goal: &JointConfig, n: usize) -> Vec<JointConfig> {
    if n == 1 {
        return vec![q0.clone()];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                q0.clone()
            } else {
                lerp(q0, q_goal, i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Goal IK closest to `q0`, preferring collision-free solutions.
pub fn pick_goal<R: Rng + ?Sized>(m: &RobotModel, problem: &Problem, rng: &mut R) -> Option<JointConfig> {
    let goal = problem.path.poses.last()?;
    let sols = ik_sample(m, goal, IK_CANDIDATES, None, rng);
    let free = |q: &JointConfig| {
        let s = ChainState::compute(m, q).expect("dimension checked");
        !any_collision(m, &s, &problem.world)
    };
    let dist = |q: &JointConfig| (q - &problem.q0).norm();
    let closest = |it: &mut dyn Iterator<Item = &JointConfig>| {
        it.min_by(|a, b| dist(a).total_cmp(&dist(b))).cloned()
    };
    closest(&mut sols.iter().filter(|q| free(q))).or_else(|| closest(&mut sols.iter()))
}

pub fn linear_init<R: Rng + ?Sized>(m: &RobotModel, problem: &Problem, rng: &mut R) -> InitResult {
    let start = Instant::now();
    let n = problem.len();
    let (configs, degraded) = match pick_goal(m, problem, rng) {
        Some(goal) => (interpolate(&problem.q0, &goal, n), false),
        None => (vec![problem.q0.clone(); n], true),
    };
    InitResult {
        trajectory: Trajectory::new(configs),
        gen_time: start.elapsed().as_secs_f64(),
        method: InitMethod::Linear,
        degraded,
    }
}

/// Anchor indices: every `GREEDY_INTERVAL`-th pose plus the last one.
pub fn greedy_anchors(n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(GREEDY_INTERVAL).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

fn segment_cost(m: &RobotModel, problem: &Problem, a: usize, configs: &[JointConfig], w: &Weights) -> f64 {
    let sub_path = TargetPath {
        name: String::new(),
        seed: None,
        has_obstacles: problem.path.has_obstacles,
        poses: problem.path.poses[a..a + configs.len()].to_vec(),
    };
    let traj = Trajectory::new(configs.to_vec());
    evaluate(m, &traj, &sub_path, &problem.world, w, false)
        .map(|(t, _)| t.total)
        .unwrap_or(f64::INFINITY)
}

/// Walks the sub-sampled poses; each segment interpolates from the current
/// anchor to the IK candidate that minimizes the segment objective.
pub fn greedy_init<R: Rng + ?Sized>(m: &RobotModel, problem: &Problem, rng: &mut R) -> InitResult {
    let start = Instant::now();
    let n = problem.len();
    let w = Weights::for_len(n);
    let anchors = greedy_anchors(n);
    let mut configs = vec![problem.q0.clone()];
    let mut degraded = false;
    for seg in anchors.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let anchor = configs[a].clone();
        let candidates = ik_sample(m, &problem.path.poses[b], IK_CANDIDATES, Some(&problem.world), rng);
        let best = candidates
            .iter()
            .map(|c| {
                let seg_configs = interpolate(&anchor, c, b - a + 1);
                let cost = segment_cost(m, problem, a, &seg_configs, &w);
                (cost, seg_configs)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0));
        let seg_configs = match best {
            Some((_, s)) => s,
            None => {
                degraded = true;
                vec![anchor; b - a + 1]
            }
        };
        configs.extend(seg_configs.into_iter().skip(1));
    }
    InitResult {
        trajectory: Trajectory::new(configs),
        gen_time: start.elapsed().as_secs_f64(),
        method: InitMethod::Greedy,
        degraded,
    }
}

/// Deterministic rollout of the mean action for `N − 1` steps.
pub fn policy_init(m: &RobotModel, problem: &Problem, net: &PolicyNet) -> Result<InitResult> {
    let start = Instant::now();
    net.validate_for(m)?;
    let n = problem.len();
    let mut q = problem.q0.clone();
    let mut configs = Vec::with_capacity(n);
    configs.push(q.clone());
    for i in 0..n - 1 {
        let s = ChainState::compute(m, &q)?;
        let state = build_state_from_chain(&s, &q, &problem.path, &problem.world.feature, i);
        let a: DVector<f64> = net.forward(&state.flatten())?;
        q = &q + a.map(|v| v.clamp(-MAX_ACTION, MAX_ACTION));
        configs.push(q.clone());
    }
    Ok(InitResult {
        trajectory: Trajectory::new(configs),
        gen_time: start.elapsed().as_secs_f64(),
        method: InitMethod::Policy,
        degraded: false,
    })
}
