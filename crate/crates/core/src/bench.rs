//! Benchmark harness: suite generation, initializer × optimizer runs,
//! reports, and PCA export of IK solution manifolds.

use crate::error::{Error, Result};
use crate::initializers::{greedy_init, linear_init, policy_init, InitMethod, InitResult};
use crate::kinematics::{ik_sample, JointConfig, RobotModel};
use crate::objective::{u_total, Trajectory};
use crate::paths::{
    builtin_path, builtin_world, generate_path, load_problem, make_problem, problem_record, BuiltinPath,
    PathGenConfig, Problem,
};
use crate::policy::PolicyNet;
use crate::trajopt::{evaluate_outcome, optimize, OptimizerConfig, StopReason, SuccessThresholds, TracePoint};
use crate::world::{synth_tabletop, World};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const TAG_RANDOM: &str = "random";
pub const TAG_RANDOM_OBS: &str = "random_obs";

/// Independent stream per generated item, so one failed item does not shift
/// the others.
pub fn item_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random paths in free space.
    pub random_paths: usize,
    /// Random paths over a synthesized tabletop.
    pub random_paths_obs: usize,
    pub starts_per_random: usize,
    /// Names of built-in paths to include.
    pub builtin: Vec<String>,
    pub starts_per_builtin: usize,
    /// Short desk-scale random paths (N ≤ 80).
    pub desk_scale: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 0,
            random_paths: 4,
            random_paths_obs: 2,
            starts_per_random: 5,
            builtin: Vec::new(),
            starts_per_builtin: 100,
            desk_scale: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub config: SuiteConfig,
    pub problems: Vec<Problem>,
    /// Items that could not be generated, with the reason.
    pub failures: Vec<String>,
}

pub fn gen_bench(m: &RobotModel, cfg: &SuiteConfig) -> Result<Suite> {
    let path_cfg = if cfg.desk_scale {
        PathGenConfig::desk_scale()
    } else {
        PathGenConfig::default()
    };
    let mut problems = Vec::new();
    let mut failures = Vec::new();
    let total_random = cfg.random_paths + cfg.random_paths_obs;
    for k in 0..total_random {
        let obstacles = k >= cfg.random_paths;
        let mut rng = item_rng(cfg.seed, k as u64);
        let world = if obstacles {
            World::new(synth_tabletop(cfg.seed.wrapping_mul(1000).wrapping_add(k as u64)))
        } else {
            World::empty()
        };
        let tag = if obstacles { TAG_RANDOM_OBS } else { TAG_RANDOM };
        let mut path = match generate_path(m, &world, &path_cfg, &mut rng) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("random path {k}: {e}");
                failures.push(format!("path {k}: {e}"));
                continue;
            }
        };
        path.name = format!("{tag}-{k:03}");
        path.seed = Some(cfg.seed);
        for s in 0..cfg.starts_per_random {
            match make_problem(m, &path, &world, &mut rng) {
                Ok(mut p) => {
                    p.id = format!("{}-s{s:02}", path.name);
                    p.tag = tag.into();
                    problems.push(p);
                }
                Err(e) => failures.push(format!("{} start {s}: {e}", path.name)),
            }
        }
    }
    for (b, name) in cfg.builtin.iter().enumerate() {
        let Some(kind) = BuiltinPath::from_name(name) else {
            return Err(Error::Format(format!("unknown built-in path '{name}'")));
        };
        let path = builtin_path(kind, kind.default_len());
        let world = builtin_world(kind);
        let mut rng = item_rng(cfg.seed, (total_random + b) as u64);
        for s in 0..cfg.starts_per_builtin {
            match make_problem(m, &path, &world, &mut rng) {
                Ok(mut p) => {
                    p.id = format!("{}-s{s:03}", kind.name());
                    p.tag = kind.name().into();
                    problems.push(p);
                }
                Err(e) => failures.push(format!("{} start {s}: {e}", kind.name())),
            }
        }
    }
    Ok(Suite {
        config: cfg.clone(),
        problems,
        failures,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteIndex {
    format: u32,
    config: SuiteConfig,
    problems: Vec<SuiteEntry>,
    failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteEntry {
    id: String,
    tag: String,
    file: String,
}

/// Writes `suite.json`, `paths/`, `worlds/` and `problems/` under `dir`.
/// Problems sharing a scene share one grid file.
pub fn write_suite(suite: &Suite, dir: &Path) -> Result<()> {
    for sub in ["paths", "worlds", "problems"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    let mut worlds: Vec<(String, World)> = Vec::new();
    let mut paths_written: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    for p in &suite.problems {
        if !paths_written.contains(&p.path.name) {
            p.path.save(dir.join("paths").join(format!("{}.json", p.path.name)))?;
            paths_written.push(p.path.name.clone());
        }
        let world_file = if p.world.has_obstacles() {
            let existing = worlds.iter().find(|(_, w)| w.grid == p.world.grid).map(|(f, _)| f.clone());
            let f = match existing {
                Some(f) => f,
                None => {
                    let f = format!("world-{:03}.occ", worlds.len());
                    p.world.grid.save(dir.join("worlds").join(&f))?;
                    worlds.push((f.clone(), p.world.clone()));
                    f
                }
            };
            Some(format!("../worlds/{f}"))
        } else {
            None
        };
        let file = format!("problems/{}.json", p.id);
        std::fs::write(dir.join(&file), serde_json::to_string(&problem_record(p, world_file))?)?;
        entries.push(SuiteEntry {
            id: p.id.clone(),
            tag: p.tag.clone(),
            file,
        });
    }
    let index = SuiteIndex {
        format: 1,
        config: suite.config.clone(),
        problems: entries,
        failures: suite.failures.clone(),
    };
    std::fs::write(dir.join("suite.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(())
}

pub fn load_suite(dir: &Path) -> Result<Suite> {
    let index: SuiteIndex = serde_json::from_str(&std::fs::read_to_string(dir.join("suite.json"))?)?;
    if index.format != 1 {
        return Err(Error::Format(format!("unsupported suite format {}", index.format)));
    }
    let problems = index
        .problems
        .iter()
        .map(|e| load_problem(dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Suite {
        config: index.config,
        problems,
        failures: index.failures,
    })
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<InitMethod>,
    pub optimizer: OptimizerConfig,
    /// Worker threads; 1 runs serially, 0 uses every core.
    pub parallelism: usize,
    /// Sampling interval of exported convergence traces (s).
    pub trace_interval: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: vec![InitMethod::Linear, InitMethod::Greedy, InitMethod::Policy],
            optimizer: OptimizerConfig {
                restarts: false,
                ..Default::default()
            },
            parallelism: 0,
            trace_interval: 0.1,
        }
    }
}

/// One `(problem, method)` cell. Wall-clock quantities live in
/// [`TimingRow`] so that reports are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub problem_id: String,
    pub tag: String,
    pub method: InitMethod,
    pub n: usize,
    pub init_total: f64,
    pub init_pose: f64,
    pub init_obs: f64,
    pub init_smooth: f64,
    pub init_violation_rate: f64,
    pub init_avg_pos: f64,
    pub init_avg_rot: f64,
    pub init_degraded: bool,
    pub final_total: f64,
    pub final_pose: f64,
    pub final_obs: f64,
    pub final_smooth: f64,
    pub final_avg_pos: f64,
    pub final_avg_rot: f64,
    pub final_avg_error: f64,
    pub final_violation_rate: f64,
    pub success: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub stop_reason: StopReason,
    pub trace_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub problem_id: String,
    pub method: InitMethod,
    pub gen_time: f64,
    pub opt_time: f64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub row: ReportRow,
    pub timing: TimingRow,
    pub trace: Vec<TracePoint>,
}

fn init_for(
    m: &RobotModel,
    p: &Problem,
    method: InitMethod,
    policy: Option<&PolicyNet>,
    rng: &mut ChaCha8Rng,
) -> Result<InitResult> {
    match method {
        InitMethod::Linear => Ok(linear_init(m, p, rng)),
        InitMethod::Greedy => Ok(greedy_init(m, p, rng)),
        InitMethod::Policy => {
            let net = policy.ok_or_else(|| Error::Format("policy method needs a policy file".into()))?;
            policy_init(m, p, net)
        }
    }
}

fn method_index(method: InitMethod) -> u64 {
    match method {
        InitMethod::Linear => 0,
        InitMethod::Greedy => 1,
        InitMethod::Policy => 2,
    }
}

/// Initializes, scores, optimizes and scores again.
pub fn run_cell(
    m: &RobotModel,
    index: usize,
    p: &Problem,
    method: InitMethod,
    policy: Option<&PolicyNet>,
    cfg: &OptimizerConfig,
) -> Result<CellResult> {
    let stream = (index as u64) * 4 + method_index(method);
    let mut rng = item_rng(cfg.seed, stream);
    let init = init_for(m, p, method, policy, &mut rng)?;
    let thr = SuccessThresholds::for_tag(&p.tag);
    let it = u_total(m, &init.trajectory, &p.path, &p.world)?;
    let (io, _) = evaluate_outcome(m, &init.trajectory, p, &thr)?;
    let run = optimize(m, p, &init.trajectory, &OptimizerConfig {
        seed: cfg.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ..*cfg
    })?;
    let (fo, _) = evaluate_outcome(m, &run.best, p, &thr)?;
    let trace_ref = format!("{}/{}", p.id, method);
    Ok(CellResult {
        row: ReportRow {
            problem_id: p.id.clone(),
            tag: p.tag.clone(),
            method,
            n: p.len(),
            init_total: it.total,
            init_pose: it.pose,
            init_obs: it.obs,
            init_smooth: it.smooth,
            init_violation_rate: io.violation_rate,
            init_avg_pos: io.avg_pos,
            init_avg_rot: io.avg_rot,
            init_degraded: init.degraded,
            final_total: run.best_terms.total,
            final_pose: run.best_terms.pose,
            final_obs: run.best_terms.obs,
            final_smooth: run.best_terms.smooth,
            final_avg_pos: fo.avg_pos,
            final_avg_rot: fo.avg_rot,
            final_avg_error: run.best_avg_error,
            final_violation_rate: fo.violation_rate,
            success: fo.success,
            iterations: run.iterations,
            restarts: run.restarts,
            stop_reason: run.reason,
            trace_ref,
        },
        timing: TimingRow {
            problem_id: p.id.clone(),
            method,
            gen_time: init.gen_time,
            opt_time: run.elapsed,
        },
        trace: run.trace,
    })
}

#[derive(Debug, Clone, Default)]
pub struct BenchResult {
    pub cells: Vec<CellResult>,
    /// Cells that failed, with the reason; the run continues past them.
    pub failures: Vec<String>,
}

pub fn run_bench(
    m: &RobotModel,
    problems: &[Problem],
    policy: Option<&PolicyNet>,
    cfg: &BenchConfig,
) -> Result<BenchResult> {
    if let Some(net) = policy {
        net.validate_for(m)?;
    }
    let jobs: Vec<(usize, InitMethod)> = (0..problems.len())
        .flat_map(|i| cfg.methods.iter().map(move |&meth| (i, meth)))
        .collect();
    let run = |&(i, meth): &(usize, InitMethod)| run_cell(m, i, &problems[i], meth, policy, &cfg.optimizer);
    let outcomes: Vec<Result<CellResult>> = if cfg.parallelism == 1 {
        jobs.iter().map(run).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };
    let mut result = BenchResult::default();
    for ((i, meth), o) in jobs.iter().zip(outcomes) {
        match o {
            Ok(c) => result.cells.push(c),
            Err(e) => {
                log::warn!("{} / {meth}: {e}", problems[*i].id);
                result.failures.push(format!("{} / {meth}: {e}", problems[*i].id));
            }
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub tag: String,
    pub method: InitMethod,
    pub problems: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_init_pose: f64,
    pub mean_init_violation_rate: f64,
    pub mean_final_avg_error: f64,
}

/// Success rate per tag and method: successes / problems.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.tag.clone(), r.method.name().into())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let n = g.len();
            let mean = |f: &dyn Fn(&ReportRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n as f64;
            let successes = g.iter().filter(|r| r.success).count();
            SummaryRow {
                tag: g[0].tag.clone(),
                method: g[0].method,
                problems: n,
                successes,
                success_rate: successes as f64 / n as f64,
                mean_init_pose: mean(&|r| r.init_pose),
                mean_init_violation_rate: mean(&|r| r.init_violation_rate),
                mean_final_avg_error: mean(&|r| r.final_avg_error),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceSample {
    t: f64,
    total: f64,
    avg_pose_error: f64,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    trace_ref: &'a str,
    samples: Vec<TraceSample>,
}

/// Best-so-far values at `0, dt, 2dt, …` up to the end of the trace.
pub fn sample_trace(trace: &[TracePoint], dt: f64) -> Vec<(f64, TracePoint)> {
    let Some(last) = trace.last() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut k = 0usize;
    let mut t = 0.0;
    while t <= last.time + 1e-12 {
        while k + 1 < trace.len() && trace[k + 1].time <= t {
            k += 1;
        }
        out.push((t, trace[k]));
        t += dt;
    }
    out
}

/// `report.csv`, `timings.csv`, `summary.csv` and `traces.jsonl`.
pub fn write_report(result: &BenchResult, dir: &Path, trace_interval: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<ReportRow> = result.cells.iter().map(|c| c.row.clone()).collect();
    write_csv(&dir.join("report.csv"), &rows)?;
    let timings: Vec<TimingRow> = result.cells.iter().map(|c| c.timing.clone()).collect();
    write_csv(&dir.join("timings.csv"), &timings)?;
    write_csv(&dir.join("summary.csv"), &summarize(&rows))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("traces.jsonl"))?);
    for c in &result.cells {
        let line = TraceLine {
            trace_ref: &c.row.trace_ref,
            samples: sample_trace(&c.trace, trace_interval)
                .into_iter()
                .map(|(t, p)| TraceSample {
                    t,
                    total: p.total,
                    avg_pose_error: p.avg_pose_error,
                })
                .collect(),
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    if !result.failures.is_empty() {
        std::fs::write(dir.join("failures.txt"), result.failures.join("\n") + "\n")?;
    }
    Ok(())
}

/// Gnuplot script that plots per-method success rates from `summary.csv`.
pub fn gnuplot_script(summary_csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set style data histogram\n\
         set style fill solid 0.8\n\
         set ylabel 'success rate'\n\
         set yrange [0:1]\n\
         set terminal pngcairo size 900,500\n\
         set output 'summary.png'\n\
         plot '{summary_csv}' every ::1 using 5:xticlabels(stringcolumn(1).'/'.stringcolumn(2)) title 'success'\n"
    )
}

/// Top-2 principal components of a configuration set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal directions, largest variance first.
    pub components: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn fit(samples: &[JointConfig]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Format("PCA needs at least one sample".into()));
        };
        let d = first.len();
        let n = samples.len() as f64;
        let mean = samples.iter().fold(DVector::zeros(d), |acc, q| acc + q) / n;
        let mut cov = DMatrix::zeros(d, d);
        for q in samples {
            let c = q - &mean;
            cov += &c * c.transpose();
        }
        cov /= n;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let comp = |k: usize| -> Vec<f64> {
            let v = eig.eigenvectors.column(order[k]);
            // sign convention: largest-magnitude entry positive
            let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let s = if big < 0.0 { -1.0 } else { 1.0 };
            v.iter().map(|x| x * s).collect()
        };
        Ok(Pca {
            mean: mean.iter().copied().collect(),
            components: [comp(0), comp(1.min(d - 1))],
            eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        })
    }

    pub fn project(&self, q: &JointConfig) -> (f64, f64) {
        let dot = |c: &[f64]| c.iter().zip(q.iter().zip(&self.mean)).map(|(a, (x, m))| a * (x - m)).sum::<f64>();
        (dot(&self.components[0]), dot(&self.components[1]))
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldExport {
    pub pca: Pca,
    /// `(pc1, pc2, pose index)` per IK sample.
    pub points: Vec<(f64, f64, usize)>,
    /// Pose indices without any collision-free IK solution.
    pub skipped: Vec<usize>,
    pub trajectories: Vec<(String, Vec<(f64, f64)>)>,
}

/// IK solution clouds at every `stride`-th pose, projected on the top two
/// principal components of the pooled set, with trajectories overlaid.
pub fn export_manifold(
    m: &RobotModel,
    problem: &Problem,
    samples_per_pose: usize,
    stride: usize,
    trajectories: &[(String, Trajectory)],
    seed: u64,
) -> Result<ManifoldExport> {
    let stride = stride.max(1);
    let mut pooled: Vec<(JointConfig, usize)> = Vec::new();
    let mut skipped = Vec::new();
    let n = problem.len();
    let mut indices: Vec<usize> = (0..n).step_by(stride).collect();
    if *indices.last().unwrap() != n - 1 {
        indices.push(n - 1);
    }
    for &i in &indices {
        let mut rng = item_rng(seed, i as u64);
        let sols = ik_sample(m, &problem.path.poses[i], samples_per_pose, Some(&problem.world), &mut rng);
        if sols.is_empty() {
            log::warn!("pose {i}: no collision-free IK solution");
            skipped.push(i);
        }
        pooled.extend(sols.into_iter().map(|q| (q, i)));
    }
    let configs: Vec<JointConfig> = pooled.iter().map(|(q, _)| q.clone()).collect();
    let pca = Pca::fit(&configs)?;
    let points = pooled
        .iter()
        .map(|(q, i)| {
            let (a, b) = pca.project(q);
            (a, b, *i)
        })
        .collect();
    let trajectories = trajectories
        .iter()
        .map(|(name, t)| (name.clone(), t.configs.iter().map(|q| pca.project(q)).collect()))
        .collect();
    Ok(ManifoldExport {
        pca,
        points,
        skipped,
        trajectories,
    })
}

pub fn write_manifold(export: &ManifoldExport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("manifold.csv"))?;
    w.write_record(["pc1", "pc2", "pose_index"])?;
    for (a, b, i) in &export.points {
        w.write_record([a.to_string(), b.to_string(), i.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("trajectories.csv"))?;
    w.write_record(["name", "step", "pc1", "pc2"])?;
    for (name, pts) in &export.trajectories {
        for (k, (a, b)) in pts.iter().enumerate() {
            w.write_record([name.clone(), k.to_string(), a.to_string(), b.to_string()])?;
        }
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Meta<'a> {
        format: u32,
        pca: &'a Pca,
        skipped: &'a [usize],
    }
    std::fs::write(
        dir.join("pca.json"),
        serde_json::to_string_pretty(&Meta {
            format: 1,
            pca: &export.pca,
            skipped: &export.skipped,
        })?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
    fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let mut rot = DMatrix::identity(n, n);
                    rot[(p, p)] = c;
                    rot[(q, q)] = c;
                    rot[(p, q)] = s;
                    rot[(q, p)] = -s;
                    a = rot.transpose() * &a * &rot;
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    #[test]
    fn pca_matches_brute_force_diagonalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mix = DMatrix::from_fn(7, 7, |_, _| rng.random_range(-1.0..1.0));
        let samples: Vec<JointConfig> = (0..40)
            .map(|_| &mix * DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let pca = Pca::fit(&samples).unwrap();
        let n = samples.len() as f64;
        let mean = DVector::from_vec(pca.mean.clone());
        let cov = samples
            .iter()
            .fold(DMatrix::zeros(7, 7), |acc, q| acc + (q - &mean) * (q - &mean).transpose())
            / n;
        let oracle = jacobi_eigenvalues(cov);
        for (a, b) in pca.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let c0 = DVector::from_vec(pca.components[0].clone());
        let c1 = DVector::from_vec(pca.components[1].clone());
        assert!((c0.norm() - 1.0).abs() < 1e-9);
        assert!((c1.norm() - 1.0).abs() < 1e-9);
        assert!(c0.dot(&c1).abs() < 1e-9);
        let (a, b) = pca.project(&mean);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
    }

    #[test]
    fn summary_rates() {
        let row = |tag: &str, ok: bool| ReportRow {
            problem_id: "p".into(),
            tag: tag.into(),
            method: InitMethod::Linear,
            n: 2,
            init_total: 0.0,
            init_pose: 1.0,
            init_obs: 0.0,
            init_smooth: 0.0,
            init_violation_rate: 0.0,
            init_avg_pos: 0.0,
            init_avg_rot: 0.0,
            init_degraded: false,
            final_total: 0.0,
            final_pose: 0.0,
            final_obs: 0.0,
            final_smooth: 0.0,
            final_avg_pos: 0.0,
            final_avg_rot: 0.0,
            final_avg_error: 0.0,
            final_violation_rate: 0.0,
            success: ok,
            iterations: 0,
            restarts: 0,
            stop_reason: StopReason::Converged,
            trace_ref: String::new(),
        };
        let rows = vec![row("a", true), row("a", false), row("a", true), row("b", false)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].successes, 2);
        assert!((s[0].success_rate - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[1].success_rate, 0.0);
    }

    #[test]
    fn trace_sampling_is_a_step_function() {
        let pt = |time: f64, total: f64| TracePoint {
            time,
            iteration: 0,
            total,
            pose: 0.0,
            obs: 0.0,
            smooth: 0.0,
            avg_pose_error: 0.0,
            restarts: 0,
        };
        let trace = vec![pt(0.0, 5.0), pt(0.15, 4.0), pt(0.32, 3.0)];
        let s = sample_trace(&trace, 0.1);
        let totals: Vec<f64> = s.iter().map(|(_, p)| p.total).collect();
        assert_eq!(totals, vec![5.0, 5.0, 4.0, 4.0]);
    }

    #[test]
    fn suite_generation_is_reproducible_on_disk() {
        let m = RobotModel::default_model();
        let cfg = SuiteConfig {
            seed: 7,
            random_paths: 1,
            random_paths_obs: 1,
            starts_per_random: 2,
            builtin: vec!["Rotation".into()],
            starts_per_builtin: 2,
            desk_scale: true,
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let suite = gen_bench(&m, &cfg).unwrap();
        assert_eq!(suite.problems.len(), 6);
        write_suite(&suite, a.path()).unwrap();
        write_suite(&gen_bench(&m, &cfg).unwrap(), b.path()).unwrap();
        for entry in walk(a.path()) {
            let rel = entry.strip_prefix(a.path()).unwrap();
            assert_eq!(std::fs::read(&entry).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel:?}");
        }
        let back = load_suite(a.path()).unwrap();
        assert_eq!(back.problems.len(), 6);
        for (x, y) in back.problems.iter().zip(&suite.problems) {
            assert_eq!(x.q0, y.q0);
            assert_eq!(x.world.grid, y.world.grid);
            assert_eq!(x.tag, y.tag);
        }
    }

    fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
        let mut out = Vec::new();
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(walk(&p));
            } else {
                out.push(p);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn serial_and_parallel_reports_agree() {
        let m = RobotModel::default_model();
        let suite = gen_bench(&m, &SuiteConfig {
            seed: 3,
            random_paths: 1,
            random_paths_obs: 0,
            starts_per_random: 2,
            ..Default::default()
        })
        .unwrap();
        let mut cfg = BenchConfig {
            methods: vec![InitMethod::Linear, InitMethod::Greedy],
            ..Default::default()
        };
        cfg.optimizer.max_iters = Some(50);
        cfg.parallelism = 1;
        let a = run_bench(&m, &suite.problems, None, &cfg).unwrap();
        cfg.parallelism = 2;
        let b = run_bench(&m, &suite.problems, None, &cfg).unwrap();
        let rows = |r: &BenchResult| r.cells.iter().map(|c| c.row.clone()).collect::<Vec<_>>();
        assert_eq!(rows(&a), rows(&b));
        for r in rows(&a) {
            assert!(r.final_total <= r.init_total);
        }
        // a policy cell without a policy is reported, not fatal
        cfg.methods = vec![InitMethod::Policy];
        let c = run_bench(&m, &suite.problems, None, &cfg).unwrap();
        assert!(c.cells.is_empty());
        assert_eq!(c.failures.len(), 2);
    }
}
