use super::{pose_error_vector, ChainState, JointConfig, RobotModel};
use crate::error::{Error, Result};
use crate::se3::Pose;
use crate::world::{any_collision, World};
use nalgebra::{Matrix6, Vector6};
use rand::Rng;

/// Damped least-squares IK settings.
#[derive(Debug, Clone, Copy)]
pub struct IkOptions {
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub initial_damping: f64,
    pub max_damping: f64,
    /// Per-iteration cap on the translational part of the task error (m).
    pub max_pos_step: f64,
    /// Per-iteration cap on the rotational part of the task error (rad).
    pub max_rot_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            max_iters: 200,
            pos_tol: 1e-4,
            rot_tol: 1e-3,
            initial_damping: 1e-3,
            max_damping: 1e-1,
            max_pos_step: 0.2,
            max_rot_step: 0.6,
        }
    }
}

fn residual(m: &RobotModel, q: &JointConfig, target: &Pose) -> Result<(ChainState, Vector6<f64>)> {
    let s = ChainState::compute(m, q)?;
    let e = pose_error_vector(s.ee(), target);
    Ok((s, e))
}

fn cost(e: &Vector6<f64>) -> f64 {
    e.norm_squared()
}

fn converged(e: &Vector6<f64>, opts: &IkOptions) -> bool {
    e.fixed_rows::<3>(0).norm() <= opts.pos_tol && e.fixed_rows::<3>(3).norm() <= opts.rot_tol
}

/// Damped least-squares iteration from `seed`. The damping grows ×10 when a
/// step increases the error (capped) and relaxes after accepted steps.
/// Iterates stay inside the joint limits.
pub fn ik_solve(
    m: &RobotModel,
    target: &Pose,
    seed: &JointConfig,
    opts: &IkOptions,
) -> Result<JointConfig> {
    let mut q = seed.clone();
    m.clamp_to_limits(&mut q);
    let (mut state, mut e) = residual(m, &q, target)?;
    let mut lambda = opts.initial_damping;
    for _ in 0..opts.max_iters {
        if converged(&e, opts) {
            return Ok(q);
        }
        let mut step_err = e;
        let pn = step_err.fixed_rows::<3>(0).norm();
        if pn > opts.max_pos_step {
            step_err.fixed_rows_mut::<3>(0).scale_mut(opts.max_pos_step / pn);
        }
        let rn = step_err.fixed_rows::<3>(3).norm();
        if rn > opts.max_rot_step {
            step_err.fixed_rows_mut::<3>(3).scale_mut(opts.max_rot_step / rn);
        }
        let j = state.jacobian();
        let jjt: Matrix6<f64> = &j * j.transpose() + Matrix6::identity() * (lambda * lambda);
        let Some(y) = jjt.cholesky().map(|c| c.solve(&step_err)) else {
            return Err(Error::Diverged);
        };
        let mut q_new = &q + j.transpose() * y;
        m.clamp_to_limits(&mut q_new);
        let (s_new, e_new) = residual(m, &q_new, target)?;
        if !e_new.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged);
        }
        if cost(&e_new) < cost(&e) {
            q = q_new;
            state = s_new;
            e = e_new;
            lambda = (lambda * 0.1).max(1e-6);
        } else if lambda < opts.max_damping {
            lambda = (lambda * 10.0).min(opts.max_damping);
        } else {
            // no descent even at maximal damping: take the step to escape
            q = q_new;
            state = s_new;
            e = e_new;
        }
    }
    if converged(&e, opts) {
        Ok(q)
    } else {
        Err(Error::MaxIters(opts.max_iters))
    }
}

fn is_distinct(existing: &[JointConfig], q: &JointConfig) -> bool {
    existing.iter().all(|o| (o - q).amax() > 1e-3)
}

/// Up to `n` distinct IK solutions from uniform random seeds, spending at
/// most `10·n` attempts. With a world, only configurations free of world
/// and self collision are kept.
pub fn ik_sample<R: Rng + ?Sized>(
    m: &RobotModel,
    target: &Pose,
    n: usize,
    world: Option<&World>,
    rng: &mut R,
) -> Vec<JointConfig> {
    let opts = IkOptions::default();
    let mut out = Vec::with_capacity(n);
    for _ in 0..10 * n {
        if out.len() >= n {
            break;
        }
        let seed = m.random_config(rng);
        let Ok(q) = ik_solve(m, target, &seed, &opts) else {
            continue;
        };
        if let Some(w) = world {
            let state = ChainState::compute(m, &q).expect("dimension checked");
            if any_collision(m, &state, w) {
                continue;
            }
        }
        if is_distinct(&out, &q) {
            out.push(q);
        }
    }
    out
}

/// First collision-free IK solution, trying `warm` seeds before random ones;
/// `attempts` bounds the number of random seeds.
pub fn ik_first_valid<R: Rng + ?Sized>(
    m: &RobotModel,
    target: &Pose,
    world: &World,
    warm: &[JointConfig],
    attempts: usize,
    rng: &mut R,
) -> Option<JointConfig> {
    let opts = IkOptions::default();
    let valid = |q: &JointConfig| {
        let state = ChainState::compute(m, q).expect("dimension checked");
        !any_collision(m, &state, world)
    };
    for seed in warm {
        if let Ok(q) = ik_solve(m, target, seed, &opts) {
            if valid(&q) {
                return Some(q);
            }
        }
    }
    for _ in 0..attempts {
        let seed = m.random_config(rng);
        if let Ok(q) = ik_solve(m, target, &seed, &opts) {
            if valid(&q) {
                return Some(q);
            }
        }
    }
    None
}
