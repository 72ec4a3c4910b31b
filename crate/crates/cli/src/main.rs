//! `pathwarm` command-line front end.

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use pathwarm::bench::{
    export_manifold, gen_bench, gnuplot_script, item_rng, load_suite, run_bench, summarize, write_manifold,
    write_report, write_suite, BenchConfig, Suite, SuiteConfig,
};
use pathwarm::initializers::{greedy_init, linear_init, policy_init, InitMethod, InitResult};
use pathwarm::kinematics::RobotModel;
use pathwarm::mdp::{rollout, Env};
use pathwarm::objective::{u_total, Trajectory};
use pathwarm::paths::{
    builtin_path, builtin_world, generate_path, load_problem, BuiltinPath, PathGenConfig, Problem,
};
use pathwarm::policy::{
    bc_dataset_augmented, bc_train, dfs_train, BcAugment, BcConfig, CemConfig, InputLayout, PolicyNet,
};
use pathwarm::trajopt::{evaluate_outcome, gen_demos, optimize, OptimizerConfig, SuccessThresholds};
use pathwarm::world::{synth_tabletop, World};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "pathwarm", version, about = "Path-following trajectory generation: benchmarks, initializers, training")]
struct Cli {
    /// Robot model JSON (defaults to the built-in 7-DoF arm).
    #[arg(long, global = true)]
    robot: Option<PathBuf>,
    /// Base directory for outputs when --out is not given.
    #[arg(long, global = true, env = "PATHWARM_DATA_DIR", default_value = "pathwarm-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand.
#[derive(clap::Args, Clone)]
struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: <data-dir>/<subcommand>].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Optimizer flags.
#[derive(clap::Args, Clone)]
struct OptArgs {
    /// Wall-clock budget per run (s).
    #[arg(long, default_value_t = 50.0)]
    budget: f64,
    /// Iteration cap; a binding cap makes runs reproducible.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Stop once the mean pose distance reaches this value.
    #[arg(long, default_value_t = 0.001)]
    target_error: f64,
    /// Re-seed from greedy initializations after a stall.
    #[arg(long)]
    restarts: bool,
}

impl OptArgs {
    fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            time_budget: self.budget,
            max_iters: self.max_iters,
            target_error: self.target_error,
            restarts: self.restarts,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate random target paths (and their tabletop worlds) plus the built-in shapes.
    GenPaths {
        #[command(flatten)]
        common: Common,
        /// Random paths in free space.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Random paths over a synthesized tabletop.
        #[arg(long, default_value_t = 0)]
        obstacles: usize,
        /// Long full-workspace paths instead of short desk-scale ones.
        #[arg(long)]
        full_scale: bool,
        /// Also write the Square, S, Zigzag and Rotation paths.
        #[arg(long)]
        builtin: bool,
    },
    /// Generate a benchmark suite: paths, worlds, problems and suite.json.
    GenBench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        random_paths: usize,
        #[arg(long, default_value_t = 2)]
        random_paths_obs: usize,
        #[arg(long, default_value_t = 5)]
        starts_per_random: usize,
        /// Built-in paths to include (Square, S, Zigzag, Rotation).
        #[arg(long, value_delimiter = ',')]
        builtin: Vec<String>,
        #[arg(long, default_value_t = 100)]
        starts_per_builtin: usize,
        #[arg(long)]
        full_scale: bool,
    },
    /// Run initializer × optimizer over a suite; writes report.csv, timings.csv, summary.csv, traces.jsonl.
    RunBench {
        #[command(flatten)]
        common: Common,
        /// Suite directory from gen-bench.
        #[arg(long)]
        suite: PathBuf,
        /// Initializers to compare.
        #[arg(long, value_delimiter = ',', default_value = "linear,greedy,policy")]
        methods: Vec<InitMethod>,
        /// Policy weights, required by the policy method.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        opt: OptArgs,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Serial execution; pair with --max-iters for reproducible reports.
        #[arg(long, conflicts_with = "threads")]
        deterministic: bool,
        /// Trace sampling interval (s).
        #[arg(long, default_value_t = 0.1)]
        trace_interval: f64,
        /// Also write a gnuplot script for summary.csv.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Project IK solution clouds along a path onto their top two principal components.
    ExportManifold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 5000)]
        samples_per_pose: usize,
        /// Use every k-th pose.
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Trajectory files to overlay.
        #[arg(long)]
        trajectory: Vec<PathBuf>,
        /// Initializers whose output is overlaid.
        #[arg(long, value_delimiter = ',')]
        overlay: Vec<InitMethod>,
        /// Policy weights for a policy overlay.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Roll a policy out on a problem; writes trajectory.json and episode.jsonl.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Demonstration for the imitation reward.
        #[arg(long)]
        demo: Option<PathBuf>,
    },
    /// Initialize and optimize one problem.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value = "greedy")]
        init: InitMethod,
        #[arg(long, required_if_eq("init", "policy"))]
        policy: Option<PathBuf>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Behavior cloning on a demo directory from gen-demos.
    TrainBc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        demos: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0.99)]
        lr_decay: f64,
        /// Hidden layer widths.
        #[arg(long, value_delimiter = ',', default_value = "64,64,64")]
        hidden: Vec<usize>,
        /// Perturbed copies per demo transition (0 disables noise injection).
        #[arg(long, default_value_t = 8)]
        augment_copies: usize,
        #[arg(long, default_value_t = 0.1)]
        augment_sigma: f64,
    },
    /// Cross-entropy policy search on the mean discounted return over a suite.
    TrainCem {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: PathBuf,
        /// Starting weights (e.g. from train-bc); otherwise a fresh net.
        #[arg(long)]
        init_policy: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "64,64,64", conflicts_with = "init_policy")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 32)]
        population: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
    },
    /// Expert demonstrations: greedy start plus optimization with restarts.
    GenDemos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        budget: f64,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::GenPaths { .. } => "gen-paths",
            Cmd::GenBench { .. } => "gen-bench",
            Cmd::RunBench { .. } => "run-bench",
            Cmd::ExportManifold { .. } => "export-manifold",
            Cmd::Rollout { .. } => "rollout",
            Cmd::Optimize { .. } => "optimize",
            Cmd::TrainBc { .. } => "train-bc",
            Cmd::TrainCem { .. } => "train-cem",
            Cmd::GenDemos { .. } => "gen-demos",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Cmd::GenPaths { common, .. }
            | Cmd::GenBench { common, .. }
            | Cmd::RunBench { common, .. }
            | Cmd::ExportManifold { common, .. }
            | Cmd::Rollout { common, .. }
            | Cmd::Optimize { common, .. }
            | Cmd::TrainBc { common, .. }
            | Cmd::TrainCem { common, .. }
            | Cmd::GenDemos { common, .. } => common,
        }
    }
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg).exit()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_policy(path: &Path, m: &RobotModel) -> Result<PolicyNet> {
    let net = PolicyNet::load(path).with_context(|| format!("loading policy {}", path.display()))?;
    net.validate_for(m)?;
    Ok(net)
}

fn init_for(m: &RobotModel, p: &Problem, method: InitMethod, policy: Option<&PolicyNet>, seed: u64) -> Result<InitResult> {
    let mut rng = item_rng(seed, 0);
    Ok(match method {
        InitMethod::Linear => linear_init(m, p, &mut rng),
        InitMethod::Greedy => greedy_init(m, p, &mut rng),
        InitMethod::Policy => policy_init(m, p, policy.context("policy init needs --policy")?)?,
    })
}

/// Demo directories hold a suite (problems and worlds) plus `trajectories/`.
fn load_demos(dir: &Path) -> Result<Vec<(Problem, Trajectory)>> {
    let suite = load_suite(dir).with_context(|| format!("loading demo suite {}", dir.display()))?;
    suite
        .problems
        .into_iter()
        .map(|p| {
            let f = dir.join("trajectories").join(format!("{}.json", p.id));
            let t = Trajectory::load(&f).with_context(|| format!("loading {}", f.display()))?;
            Ok((p, t))
        })
        .collect()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let m = match &cli.robot {
        Some(p) => RobotModel::load(p).with_context(|| format!("loading robot {}", p.display()))?,
        None => RobotModel::default_model(),
    };
    let common = cli.cmd.common().clone();
    let out = common.out.clone().unwrap_or_else(|| cli.data_dir.join(cli.cmd.name()));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let seed = common.seed;

    match cli.cmd {
        Cmd::GenPaths {
            count,
            obstacles,
            full_scale,
            builtin,
            ..
        } => {
            let cfg = if full_scale { PathGenConfig::default() } else { PathGenConfig::desk_scale() };
            std::fs::create_dir_all(out.join("paths"))?;
            std::fs::create_dir_all(out.join("worlds"))?;
            let mut written = 0;
            for k in 0..count + obstacles {
                let mut rng = item_rng(seed, k as u64);
                let world = if k >= count {
                    let g = synth_tabletop(seed.wrapping_mul(1000).wrapping_add(k as u64));
                    g.save(out.join("worlds").join(format!("path-{k:03}.occ")))?;
                    World::new(g)
                } else {
                    World::empty()
                };
                match generate_path(&m, &world, &cfg, &mut rng) {
                    Ok(mut path) => {
                        path.name = format!("path-{k:03}");
                        path.seed = Some(seed);
                        path.save(out.join("paths").join(format!("{}.json", path.name)))?;
                        written += 1;
                    }
                    Err(e) => log::warn!("path {k}: {e}"),
                }
            }
            if builtin {
                for kind in BuiltinPath::ALL {
                    let path = builtin_path(kind, kind.default_len());
                    path.save(out.join("paths").join(format!("{}.json", kind.name())))?;
                    let w = builtin_world(kind);
                    if w.has_obstacles() {
                        w.grid.save(out.join("worlds").join(format!("{}.occ", kind.name())))?;
                    }
                }
            }
            println!("wrote {written} random paths to {}", out.display());
        }
        Cmd::GenBench {
            random_paths,
            random_paths_obs,
            starts_per_random,
            builtin,
            starts_per_builtin,
            full_scale,
            ..
        } => {
            let suite = gen_bench(&m, &SuiteConfig {
                seed,
                random_paths,
                random_paths_obs,
                starts_per_random,
                builtin,
                starts_per_builtin,
                desk_scale: !full_scale,
            })?;
            for f in &suite.failures {
                log::warn!("{f}");
            }
            write_suite(&suite, &out)?;
            println!(
                "wrote {} problems ({} generation failures) to {}",
                suite.problems.len(),
                suite.failures.len(),
                out.display()
            );
        }
        Cmd::RunBench {
            suite,
            methods,
            policy,
            opt,
            threads,
            deterministic,
            trace_interval,
            gnuplot,
            ..
        } => {
            if methods.contains(&InitMethod::Policy) && policy.is_none() {
                usage_error("the policy method requires --policy <FILE>");
            }
            let suite = load_suite(&suite).with_context(|| format!("loading suite {}", suite.display()))?;
            let net = policy.as_deref().map(|p| load_policy(p, &m)).transpose()?;
            let cfg = BenchConfig {
                methods,
                optimizer: opt.config(seed),
                parallelism: if deterministic { 1 } else { threads },
                trace_interval,
            };
            let result = run_bench(&m, &suite.problems, net.as_ref(), &cfg)?;
            write_report(&result, &out, trace_interval)?;
            if gnuplot {
                std::fs::write(out.join("summary.gp"), gnuplot_script("summary.csv"))?;
            }
            let rows: Vec<_> = result.cells.iter().map(|c| c.row.clone()).collect();
            for s in summarize(&rows) {
                println!(
                    "{:<12} {:<7} success {}/{} ({:.1}%)  mean final error {:.5}",
                    s.tag,
                    s.method.name(),
                    s.successes,
                    s.problems,
                    100.0 * s.success_rate,
                    s.mean_final_avg_error
                );
            }
            if !result.failures.is_empty() {
                eprintln!("{} cells failed; see failures.txt", result.failures.len());
            }
        }
        Cmd::ExportManifold {
            problem,
            samples_per_pose,
            stride,
            trajectory,
            overlay,
            policy,
            ..
        } => {
            if overlay.contains(&InitMethod::Policy) && policy.is_none() {
                usage_error("a policy overlay requires --policy <FILE>");
            }
            let p = load_problem(&problem).with_context(|| format!("loading problem {}", problem.display()))?;
            let net = policy.as_deref().map(|f| load_policy(f, &m)).transpose()?;
            let mut trajs = Vec::new();
            for f in &trajectory {
                let name = f.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy().into_owned());
                trajs.push((name, Trajectory::load(f).with_context(|| format!("loading {}", f.display()))?));
            }
            for &method in &overlay {
                trajs.push((method.name().into(), init_for(&m, &p, method, net.as_ref(), seed)?.trajectory));
            }
            let export = export_manifold(&m, &p, samples_per_pose, stride, &trajs, seed)?;
            write_manifold(&export, &out)?;
            println!(
                "{} points, {} poses skipped, {} overlays -> {}",
                export.points.len(),
                export.skipped.len(),
                export.trajectories.len(),
                out.display()
            );
        }
        Cmd::Rollout {
            policy, problem, demo, ..
        } => {
            let net = load_policy(&policy, &m)?;
            let p = load_problem(&problem).with_context(|| format!("loading problem {}", problem.display()))?;
            let demo = demo
                .map(|f| Trajectory::load(&f).with_context(|| format!("loading demo {}", f.display())))
                .transpose()?;
            let mut env = Env::new(&m, &p, demo.as_ref());
            let episode = rollout(&mut env, &net)?;
            let mut configs = vec![p.q0.clone()];
            configs.extend(episode.outcomes.iter().map(|o| pathwarm::kinematics::JointConfig::from_vec(o.q.clone())));
            let traj = Trajectory::new(configs);
            traj.save(out.join("trajectory.json"))?;
            episode.write_jsonl(std::io::BufWriter::new(std::fs::File::create(out.join("episode.jsonl"))?))?;
            println!(
                "{} steps of {} (discounted return {:.4}) -> {}",
                episode.outcomes.len(),
                p.len() - 1,
                episode.discounted_return,
                out.display()
            );
        }
        Cmd::Optimize {
            problem,
            init,
            policy,
            opt,
            ..
        } => {
            let p = load_problem(&problem).with_context(|| format!("loading problem {}", problem.display()))?;
            let net = policy.as_deref().map(|f| load_policy(f, &m)).transpose()?;
            let start = init_for(&m, &p, init, net.as_ref(), seed)?;
            let init_terms = u_total(&m, &start.trajectory, &p.path, &p.world)?;
            let run = optimize(&m, &p, &start.trajectory, &opt.config(seed))?;
            let (outcome, _) = evaluate_outcome(&m, &run.best, &p, &SuccessThresholds::for_tag(&p.tag))?;
            start.trajectory.save(out.join("init.json"))?;
            run.best.save(out.join("trajectory.json"))?;
            std::fs::write(out.join("trace.json"), run.trace_json()?)?;
            write_json(
                &out.join("outcome.json"),
                &json!({
                    "format": 1,
                    "problem": p.id,
                    "init": init.name(),
                    "gen_time": start.gen_time,
                    "init_total": init_terms.total,
                    "final_total": run.best_terms.total,
                    "final_avg_error": run.best_avg_error,
                    "avg_pos": outcome.avg_pos,
                    "avg_rot": outcome.avg_rot,
                    "violation_rate": outcome.violation_rate,
                    "success": outcome.success,
                    "iterations": run.iterations,
                    "restarts": run.restarts,
                    "stop_reason": run.reason,
                    "elapsed": run.elapsed,
                }),
            )?;
            println!(
                "{}: {} init {:.4} -> {:.4} (avg error {:.5}, success {}, {:?} after {} iterations)",
                p.id,
                init.name(),
                init_terms.total,
                run.best_terms.total,
                run.best_avg_error,
                outcome.success,
                run.reason,
                run.iterations
            );
        }
        Cmd::TrainBc {
            demos,
            epochs,
            batch_size,
            lr,
            lr_decay,
            hidden,
            augment_copies,
            augment_sigma,
            ..
        } => {
            let pairs = load_demos(&demos)?;
            let samples = bc_dataset_augmented(&m, &pairs, &BcAugment {
                copies: augment_copies,
                sigma: augment_sigma,
                seed,
                ..Default::default()
            })?;
            let mut net = PolicyNet::new(InputLayout::for_model(&m), &hidden, &mut item_rng(seed, 1));
            let curve = bc_train(&mut net, &samples, &BcConfig {
                epochs,
                batch_size,
                lr,
                lr_decay,
                seed,
                fit_standardization: true,
            })?;
            net.save(out.join("policy.json"))?;
            let mut w = String::from("epoch,mse\n");
            for (k, l) in curve.iter().enumerate() {
                w.push_str(&format!("{k},{l}\n"));
            }
            std::fs::write(out.join("loss.csv"), w)?;
            println!(
                "{} samples, final MSE {:.6} -> {}",
                samples.len(),
                curve.last().copied().unwrap_or(f64::NAN),
                out.join("policy.json").display()
            );
        }
        Cmd::TrainCem {
            suite,
            init_policy,
            hidden,
            iters,
            population,
            sigma,
            ..
        } => {
            let suite = load_suite(&suite).with_context(|| format!("loading suite {}", suite.display()))?;
            let mut net = match init_policy {
                Some(f) => load_policy(&f, &m)?,
                None => PolicyNet::new(InputLayout::for_model(&m), &hidden, &mut item_rng(seed, 1)),
            };
            let trace = dfs_train(&m, &mut net, &suite.problems, &CemConfig {
                population,
                iters,
                init_sigma: sigma,
                seed,
                ..Default::default()
            })?;
            net.save(out.join("policy.json"))?;
            let mut w = String::from("iter,best_fitness,mean_elite_fitness,sigma\n");
            for t in &trace {
                w.push_str(&format!("{},{},{},{}\n", t.iter, t.best_fitness, t.mean_elite_fitness, t.sigma));
            }
            std::fs::write(out.join("cem_trace.csv"), w)?;
            println!(
                "best fitness {:.4} -> {}",
                trace.last().map_or(f64::NAN, |t| t.best_fitness),
                out.join("policy.json").display()
            );
        }
        Cmd::GenDemos {
            suite,
            budget,
            max_iters,
            ..
        } => {
            let src = load_suite(&suite).with_context(|| format!("loading suite {}", suite.display()))?;
            let demos = gen_demos(&m, &src.problems, &OptimizerConfig {
                time_budget: budget,
                max_iters: Some(max_iters),
                seed,
                ..Default::default()
            })?;
            if demos.is_empty() {
                bail!("suite has no problems");
            }
            write_suite(
                &Suite {
                    config: src.config.clone(),
                    problems: demos.iter().map(|d| d.problem.clone()).collect(),
                    failures: Vec::new(),
                },
                &out,
            )?;
            std::fs::create_dir_all(out.join("trajectories"))?;
            for d in &demos {
                d.trajectory.save(out.join("trajectories").join(format!("{}.json", d.problem.id)))?;
            }
            let ok = demos.iter().filter(|d| d.outcome.success).count();
            println!("{} demos ({ok} successful) -> {}", demos.len(), out.display());
        }
    }
    Ok(())
}
