//! First-order trajectory optimizer: projected gradient descent with an
//! Armijo line search, stall-triggered restarts, and demo generation.

use crate::error::Result;
use crate::initializers::greedy_init;
use crate::kinematics::{JointConfig, RobotModel};
use crate::objective::{check_constraints, evaluate, tracking_errors, ConstraintReport, ObjectiveTerms, Trajectory, Weights};
use crate::paths::Problem;
use crate::se3::ROT_WEIGHT;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Wall-clock budget (s).
    pub time_budget: f64,
    /// Cap on gradient iterations across all restarts. With a cap that
    /// binds before the time budget, runs are reproducible.
    pub max_iters: Option<usize>,
    /// Stop once the mean pose distance drops to this value.
    pub target_error: f64,
    pub initial_step: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub grow: f64,
    pub max_backtracks: usize,
    pub restarts: bool,
    pub stall_iters: usize,
    pub stall_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            time_budget: 50.0,
            max_iters: None,
            target_error: 0.001,
            initial_step: 1e-3,
            armijo_c: 1e-4,
            shrink: 0.5,
            grow: 2.0,
            max_backtracks: 40,
            restarts: true,
            stall_iters: 50,
            stall_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    TimeBudget,
    IterationBudget,
    /// Line search failed and restarts are off.
    NoDescent,
}

/// Best-so-far values after an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time: f64,
    pub iteration: usize,
    pub total: f64,
    pub pose: f64,
    pub obs: f64,
    pub smooth: f64,
    pub avg_pose_error: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct OptRun {
    pub best: Trajectory,
    pub best_terms: ObjectiveTerms,
    pub best_avg_error: f64,
    pub trace: Vec<TracePoint>,
    pub restarts: usize,
    pub iterations: usize,
    pub reason: StopReason,
    pub elapsed: f64,
}

impl OptRun {
    pub fn trace_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.trace)?)
    }
}

fn project(m: &RobotModel, traj: &mut Trajectory) {
    for q in traj.configs.iter_mut().skip(1) {
        m.clamp_to_limits(q);
    }
}

fn step_along(m: &RobotModel, traj: &Trajectory, g: &DMatrix<f64>, alpha: f64) -> Trajectory {
    let mut out = traj.clone();
    for (i, q) in out.configs.iter_mut().enumerate().skip(1) {
        for k in 0..q.len() {
            q[k] -= alpha * g[(i, k)];
        }
    }
    project(m, &mut out);
    out
}

fn inner(g: &DMatrix<f64>, a: &Trajectory, b: &Trajectory) -> f64 {
    let mut s = 0.0;
    for (i, (qa, qb)) in a.configs.iter().zip(&b.configs).enumerate() {
        for k in 0..qa.len() {
            s += g[(i, k)] * (qa[k] - qb[k]);
        }
    }
    s
}

/// Mean over steps of `e_pos + 0.17·e_rot`.
pub fn avg_pose_error(m: &RobotModel, traj: &Trajectory, problem: &Problem) -> Result<f64> {
    let errs = tracking_errors(m, traj, &problem.path)?;
    Ok(errs.iter().map(|(p, r)| p + ROT_WEIGHT * r).sum::<f64>() / errs.len() as f64)
}

struct Incumbent {
    traj: Trajectory,
    terms: ObjectiveTerms,
    avg_error: f64,
}

/// Minimizes the objective from `init`. The start row is never modified and
/// the returned trajectory is the best one seen.
pub fn optimize(m: &RobotModel, problem: &Problem, init: &Trajectory, cfg: &OptimizerConfig) -> Result<OptRun> {
    let clock = Instant::now();
    let w = Weights::for_len(problem.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut cur = init.clone();
    cur.configs[0] = problem.q0.clone();
    project(m, &mut cur);
    let (mut f, g0) = evaluate(m, &cur, &problem.path, &problem.world, &w, true)?;
    let mut g = g0.expect("gradient requested");
    let mut best = Incumbent {
        avg_error: avg_pose_error(m, &cur, problem)?,
        traj: cur.clone(),
        terms: f,
    };
    let mut alpha = cfg.initial_step;
    let mut restarts = 0;
    let mut iterations = 0;
    let mut stall_ref = f.total;
    let mut since_improve = 0;
    let mut trace = Vec::new();
    let push = |trace: &mut Vec<TracePoint>, best: &Incumbent, it: usize, restarts: usize| {
        trace.push(TracePoint {
            time: clock.elapsed().as_secs_f64(),
            iteration: it,
            total: best.terms.total,
            pose: best.terms.pose,
            obs: best.terms.obs,
            smooth: best.terms.smooth,
            avg_pose_error: best.avg_error,
            restarts,
        })
    };
    push(&mut trace, &best, 0, 0);

    let reason = loop {
        if best.avg_error <= cfg.target_error {
            break StopReason::Converged;
        }
        if clock.elapsed().as_secs_f64() >= cfg.time_budget {
            break StopReason::TimeBudget;
        }
        if cfg.max_iters.is_some_and(|cap| iterations >= cap) {
            break StopReason::IterationBudget;
        }
        iterations += 1;

        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let cand = step_along(m, &cur, &g, alpha);
            let (fc, _) = evaluate(m, &cand, &problem.path, &problem.world, &w, false)?;
            let decrease = inner(&g, &cur, &cand);
            if fc.total < f.total && fc.total <= f.total - cfg.armijo_c * decrease {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= cfg.shrink;
        }

        let mut restart = false;
        match accepted {
            Some((cand, fc)) => {
                cur = cand;
                let (fc2, g2) = evaluate(m, &cur, &problem.path, &problem.world, &w, true)?;
                debug_assert_eq!(fc.total, fc2.total);
                f = fc2;
                g = g2.expect("gradient requested");
                alpha *= cfg.grow;
                if f.total < best.terms.total {
                    best = Incumbent {
                        avg_error: avg_pose_error(m, &cur, problem)?,
                        traj: cur.clone(),
                        terms: f,
                    };
                }
                if f.total < stall_ref - cfg.stall_tol {
                    stall_ref = f.total;
                    since_improve = 0;
                } else {
                    since_improve += 1;
                }
            }
            None => {
                if !cfg.restarts {
                    push(&mut trace, &best, iterations, restarts);
                    break StopReason::NoDescent;
                }
                restart = true;
            }
        }
        if cfg.restarts && since_improve >= cfg.stall_iters {
            restart = true;
        }
        if restart {
            restarts += 1;
            let mut fresh = greedy_init(m, problem, &mut rng).trajectory;
            fresh.configs[0] = problem.q0.clone();
            project(m, &mut fresh);
            cur = fresh;
            let (fr, gr) = evaluate(m, &cur, &problem.path, &problem.world, &w, true)?;
            f = fr;
            g = gr.expect("gradient requested");
            alpha = cfg.initial_step;
            stall_ref = f.total;
            since_improve = 0;
            if f.total < best.terms.total {
                best = Incumbent {
                    avg_error: avg_pose_error(m, &cur, problem)?,
                    traj: cur.clone(),
                    terms: f,
                };
            }
        }
        push(&mut trace, &best, iterations, restarts);
    };

    Ok(OptRun {
        best: best.traj,
        best_terms: best.terms,
        best_avg_error: best.avg_error,
        trace,
        restarts,
        iterations,
        reason,
        elapsed: clock.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    /// Mean positional error bound (m).
    pub pos: f64,
    /// Mean rotational error bound (rad).
    pub rot: f64,
}

impl SuccessThresholds {
    /// 0.1 cm / 0.1°.
    pub const TIGHT: Self = Self {
        pos: 0.001,
        rot: 0.1 * std::f64::consts::PI / 180.0,
    };
    /// 1 cm / 1°.
    pub const STANDARD: Self = Self {
        pos: 0.01,
        rot: std::f64::consts::PI / 180.0,
    };
    /// 5 cm / 3°, for rollout quality during training.
    pub const ROLLOUT: Self = Self {
        pos: 0.05,
        rot: 3.0 * std::f64::consts::PI / 180.0,
    };

    /// Tight bounds for pure-rotation and near-static paths, standard
    /// otherwise.
    pub fn for_tag(tag: &str) -> Self {
        match tag.to_ascii_lowercase().as_str() {
            "rotation" | "hello" => Self::TIGHT,
            _ => Self::STANDARD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub avg_pos: f64,
    pub avg_rot: f64,
    pub violation_rate: f64,
    pub success: bool,
}

pub fn evaluate_outcome(
    m: &RobotModel,
    traj: &Trajectory,
    problem: &Problem,
    thr: &SuccessThresholds,
) -> Result<(Outcome, ConstraintReport)> {
    let errs = tracking_errors(m, traj, &problem.path)?;
    let n = errs.len() as f64;
    let avg_pos = errs.iter().map(|e| e.0).sum::<f64>() / n;
    let avg_rot = errs.iter().map(|e| e.1).sum::<f64>() / n;
    let report = check_constraints(m, traj, &problem.world)?;
    let success = report.violations() == 0 && avg_pos < thr.pos && avg_rot < thr.rot;
    Ok((
        Outcome {
            avg_pos,
            avg_rot,
            violation_rate: report.violation_rate(),
            success,
        },
        report,
    ))
}

/// Zero constraint violations and mean errors below both thresholds.
pub fn success(m: &RobotModel, traj: &Trajectory, problem: &Problem, thr: &SuccessThresholds) -> Result<bool> {
    Ok(evaluate_outcome(m, traj, problem, thr)?.0.success)
}

#[derive(Debug, Clone)]
pub struct Demo {
    pub problem: Problem,
    pub trajectory: Trajectory,
    pub outcome: Outcome,
    pub report: ConstraintReport,
    pub init_avg_error: f64,
}

/// Expert demonstrations: greedy start plus restarts, per problem.
pub fn gen_demos(m: &RobotModel, problems: &[Problem], cfg: &OptimizerConfig) -> Result<Vec<Demo>> {
    let mut out = Vec::with_capacity(problems.len());
    for (k, p) in problems.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let init = greedy_init(m, p, &mut rng).trajectory;
        let init_avg_error = avg_pose_error(m, &init, p)?;
        let run = optimize(m, p, &init, &OptimizerConfig {
            restarts: true,
            seed,
            ..*cfg
        })?;
        let (outcome, report) = evaluate_outcome(m, &run.best, p, &SuccessThresholds::STANDARD)?;
        out.push(Demo {
            problem: p.clone(),
            trajectory: run.best,
            outcome,
            report,
            init_avg_error,
        });
    }
    Ok(out)
}

/// Configuration rows of a trajectory as `N × d`.
pub fn as_matrix(traj: &Trajectory) -> DMatrix<f64> {
    let d = traj.configs.first().map_or(0, JointConfig::len);
    DMatrix::from_fn(traj.len(), d, |i, k| traj.configs[i][k])
}
