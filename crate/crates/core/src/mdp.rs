//! Path-conditioned MDP: state construction, rewards and the step
//! transition `q_{i+1} = q_i + Δq_i`.

use crate::error::{Error, Result};
use crate::kinematics::{manipulability_of, null_projector, ChainState, JointConfig, RobotModel};
use crate::objective::Trajectory;
use crate::paths::{Problem, TargetPath};
use crate::se3::{pos_error, rot_error, Pose, Rot6D};
use crate::world::{any_collision, SceneFeature, World, SCENE_FEATURE_DIM};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Number of upcoming target poses in the state.
pub const LOOKAHEAD: usize = 6;
/// Per-joint bound on a single action (rad).
pub const MAX_ACTION: f64 = 0.26;
pub const GAMMA: f64 = 0.99;

pub fn state_dim(dof: usize, lookahead: usize, scene_dim: usize) -> usize {
    dof + 9 * (dof + 1) + 9 * lookahead + scene_dim
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_pos: [f64; 3],
    pub w_rot: [f64; 3],
    pub w_im: [f64; 3],
    pub collision: f64,
    pub joint_limit: f64,
    pub singular: f64,
    pub deviation: f64,
    /// Rotational reward is active only within this positional distance.
    pub rot_gate: f64,
    /// Positional distance that ends the episode.
    pub terminate_dist: f64,
    pub singular_threshold: f64,
    pub gamma: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_pos: [2.0, 65.0, 30.0],
            w_rot: [2.0, 5.0, 0.0],
            w_im: [1.0, 15.0, 0.5],
            collision: -10.0,
            joint_limit: -1.0,
            singular: -0.1,
            deviation: -3.0,
            rot_gate: 0.05,
            terminate_dist: 0.20,
            singular_threshold: 0.005,
            gamma: GAMMA,
        }
    }
}

/// `w₀·exp(−w₁·e) − w₂·e²`.
pub fn normalize(e: f64, w: &[f64; 3]) -> f64 {
    w[0] * (-w[1] * e).exp() - w[2] * e * e
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpState {
    pub q: JointConfig,
    pub link_repr: Vec<[f64; 9]>,
    pub target_repr: Vec<[f64; 9]>,
    pub scene: SceneFeature,
}

impl MdpState {
    pub fn dim(&self) -> usize {
        self.q.len() + 9 * (self.link_repr.len() + self.target_repr.len()) + SCENE_FEATURE_DIM
    }

    /// `[q, links…, targets…, scene]`.
    pub fn flatten(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend(self.q.iter());
        for r in self.link_repr.iter().chain(&self.target_repr) {
            v.extend_from_slice(r);
        }
        v.extend_from_slice(&self.scene.0);
        DVector::from_vec(v)
    }
}

/// Target pose relative to the end effector: base-frame position offset
/// followed by the 6D form of `q_ee⁻¹ · q_x`.
pub fn relative_target(ee: &Pose, x: &Pose) -> [f64; 9] {
    let dp = x.position - ee.position;
    let rel = ee.orientation.conjugate().mul(&x.orientation);
    let r6 = Rot6D::from_quat(&rel).0;
    [dp.x, dp.y, dp.z, r6[0], r6[1], r6[2], r6[3], r6[4], r6[5]]
}

pub fn build_state_from_chain(
    s: &ChainState,
    q: &JointConfig,
    path: &TargetPath,
    scene: &SceneFeature,
    i: usize,
) -> MdpState {
    let n = path.len();
    let ee = s.ee();
    MdpState {
        q: q.clone(),
        link_repr: s.links.0.iter().map(|p| p.to_repr9()).collect(),
        target_repr: (0..LOOKAHEAD)
            .map(|k| relative_target(ee, &path.poses[(i + 1 + k).min(n - 1)]))
            .collect(),
        scene: scene.clone(),
    }
}

pub fn build_state(
    m: &RobotModel,
    path: &TargetPath,
    scene: &SceneFeature,
    q: &JointConfig,
    i: usize,
) -> Result<MdpState> {
    let s = ChainState::compute(m, q)?;
    Ok(build_state_from_chain(&s, q, path, scene, i))
}

fn task_reward_of(ee: &Pose, x: &Pose, w: &RewardWeights) -> (f64, f64) {
    let e_pos = pos_error(ee, x);
    let pos = normalize(e_pos, &w.w_pos);
    let rot = if e_pos <= w.rot_gate {
        normalize(rot_error(ee, x), &w.w_rot)
    } else {
        0.0
    };
    (pos, rot)
}

pub fn r_task(m: &RobotModel, q: &JointConfig, x: &Pose, w: &RewardWeights) -> Result<f64> {
    let s = ChainState::compute(m, q)?;
    let (p, r) = task_reward_of(s.ee(), x, w);
    Ok(p + r)
}

/// Norm of the demo offset projected onto the Jacobian null space.
pub fn null_space_error(s: &ChainState, q: &JointConfig, demo_q: &JointConfig) -> f64 {
    let p = null_projector(&s.jacobian());
    (p * (demo_q - q)).norm()
}

pub fn r_imitation(m: &RobotModel, q: &JointConfig, demo_q: &JointConfig, w: &RewardWeights) -> Result<f64> {
    let s = ChainState::compute(m, q)?;
    Ok(normalize(null_space_error(&s, q, demo_q), &w.w_im))
}

pub fn r_imitation_l2(q: &JointConfig, demo_q: &JointConfig, w: &RewardWeights) -> f64 {
    normalize((demo_q - q).norm(), &w.w_im)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintOutcome {
    pub collision: f64,
    pub joint_limit: f64,
    pub singular: f64,
    pub deviation: f64,
    pub terminate: bool,
}

impl ConstraintOutcome {
    pub fn total(&self) -> f64 {
        self.collision + self.joint_limit + self.singular + self.deviation
    }
}

fn constraint_of(m: &RobotModel, s: &ChainState, q: &JointConfig, world: &World, x: &Pose, w: &RewardWeights) -> ConstraintOutcome {
    let far = pos_error(s.ee(), x) > w.terminate_dist;
    ConstraintOutcome {
        collision: if any_collision(m, s, world) { w.collision } else { 0.0 },
        joint_limit: if m.within_limits(q) { 0.0 } else { w.joint_limit },
        singular: if manipulability_of(&s.jacobian()) < w.singular_threshold {
            w.singular
        } else {
            0.0
        },
        deviation: if far { w.deviation } else { 0.0 },
        terminate: far,
    }
}

pub fn r_constraint(
    m: &RobotModel,
    q_next: &JointConfig,
    world: &World,
    x: &Pose,
    w: &RewardWeights,
) -> Result<ConstraintOutcome> {
    let s = ChainState::compute(m, q_next)?;
    Ok(constraint_of(m, &s, q_next, world, x, w))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub pos: f64,
    pub rot: f64,
    pub task: f64,
    /// Absent when no demonstration is attached.
    pub imitation: Option<f64>,
    pub constraint: ConstraintOutcome,
    pub constraint_total: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    EndOfPath,
    Deviation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Index of the new state.
    pub index: usize,
    pub q: Vec<f64>,
    pub action: Vec<f64>,
    pub action_clamped: bool,
    pub state: Vec<f64>,
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub reason: Option<Termination>,
}

/// Anything that maps a flattened state to an action.
pub trait Actor {
    fn act(&self, state: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> Actor for F {
    fn act(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self(state))
    }
}

/// One episode over a problem. Rewards of a step are evaluated at the new
/// configuration against the new index's target (and demo entry).
pub struct Env<'a> {
    pub m: &'a RobotModel,
    pub path: &'a TargetPath,
    pub world: &'a World,
    pub demo: Option<&'a Trajectory>,
    pub weights: RewardWeights,
    q0: JointConfig,
    q: JointConfig,
    i: usize,
    done: bool,
}

impl<'a> Env<'a> {
    pub fn new(m: &'a RobotModel, problem: &'a Problem, demo: Option<&'a Trajectory>) -> Self {
        Self::with_parts(m, &problem.path, &problem.world, problem.q0.clone(), demo)
    }

    pub fn with_parts(
        m: &'a RobotModel,
        path: &'a TargetPath,
        world: &'a World,
        q0: JointConfig,
        demo: Option<&'a Trajectory>,
    ) -> Self {
        // imitation needs an index-aligned demo
        let demo = demo.filter(|d| d.len() == path.len());
        Env {
            m,
            path,
            world,
            demo,
            weights: RewardWeights::default(),
            q: q0.clone(),
            q0,
            i: 0,
            done: path.len() < 2,
        }
    }

    pub fn reset(&mut self) -> Result<MdpState> {
        self.q = self.q0.clone();
        self.i = 0;
        self.done = self.path.len() < 2;
        self.state()
    }

    pub fn state(&self) -> Result<MdpState> {
        build_state(self.m, self.path, &self.world.feature, &self.q, self.i)
    }

    pub fn index(&self) -> usize {
        self.i
    }

    pub fn q(&self) -> &JointConfig {
        &self.q
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &DVector<f64>) -> Result<StepOutcome> {
        let d = self.m.dof();
        if action.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: action.len(),
            });
        }
        let clamped = action.map(|a| a.clamp(-MAX_ACTION, MAX_ACTION));
        let action_clamped = clamped != *action;
        let q_next = &self.q + &clamped;
        let i_next = self.i + 1;
        let x = &self.path.poses[i_next];
        let s = ChainState::compute(self.m, &q_next)?;
        let w = &self.weights;

        let (pos, rot) = task_reward_of(s.ee(), x, w);
        let task = pos + rot;
        let imitation = self
            .demo
            .map(|demo| normalize(null_space_error(&s, &q_next, &demo.configs[i_next]), &w.w_im));
        let constraint = constraint_of(self.m, &s, &q_next, self.world, x, w);
        let constraint_total = constraint.total();
        let total = task + imitation.unwrap_or(0.0) + constraint_total;

        let reason = if constraint.terminate {
            Some(Termination::Deviation)
        } else if i_next + 1 >= self.path.len() {
            Some(Termination::EndOfPath)
        } else {
            None
        };
        let state = build_state_from_chain(&s, &q_next, self.path, &self.world.feature, i_next);
        self.q = q_next;
        self.i = i_next;
        self.done = reason.is_some();
        Ok(StepOutcome {
            index: i_next,
            q: self.q.iter().copied().collect(),
            action: clamped.iter().copied().collect(),
            action_clamped,
            state: state.flatten().iter().copied().collect(),
            reward: RewardBreakdown {
                pos,
                rot,
                task,
                imitation,
                constraint,
                constraint_total,
                total,
            },
            terminated: self.done,
            reason,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub outcomes: Vec<StepOutcome>,
    pub discounted_return: f64,
}

impl Episode {
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for o in &self.outcomes {
            serde_json::to_writer(&mut w, o)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs `actor` from the start configuration until the episode ends.
pub fn rollout(env: &mut Env, actor: &dyn Actor) -> Result<Episode> {
    let mut s = env.reset()?.flatten();
    let gamma = env.weights.gamma;
    let mut outcomes = Vec::new();
    let mut ret = 0.0;
    let mut discount = 1.0;
    while !env.done() {
        let a = actor.act(&s)?;
        let o = env.step(&a)?;
        ret += discount * o.reward.total;
        discount *= gamma;
        s = DVector::from_column_slice(&o.state);
        outcomes.push(o);
    }
    Ok(Episode {
        outcomes,
        discounted_return: ret,
    })
}

pub fn episode_return(env: &mut Env, actor: &dyn Actor) -> Result<f64> {
    rollout(env, actor).map(|e| e.discounted_return)
}
