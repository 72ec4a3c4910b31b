//! MLP policy with a scaled tanh output, behavior cloning and a
//! cross-entropy-method trainer.

use crate::error::{Error, Result};
use crate::kinematics::{null_projector, pinv, pose_error_vector, ChainState, JointConfig, RobotModel};
use crate::se3::Pose;
use crate::mdp::{build_state, episode_return, state_dim, Actor, Env, LOOKAHEAD, MAX_ACTION};
use crate::objective::Trajectory;
use crate::paths::Problem;
use crate::world::SCENE_FEATURE_DIM;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Pre-image clip used when inverting the tanh squashing.
const ATANH_CLIP: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub dof: usize,
    pub lookahead: usize,
    pub scene_dim: usize,
}

impl InputLayout {
    pub fn for_model(m: &RobotModel) -> Self {
        InputLayout {
            dof: m.dof(),
            lookahead: LOOKAHEAD,
            scene_dim: SCENE_FEATURE_DIM,
        }
    }

    pub fn input_dim(&self) -> usize {
        state_dim(self.dof, self.lookahead, self.scene_dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `outputs × inputs`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    fn apply(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        let a = match self.activation {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        };
        (z, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub layout: InputLayout,
    /// Inputs are standardized as `(s − shift) · scale` before layer 0.
    pub input_shift: DVector<f64>,
    pub input_scale: DVector<f64>,
    pub layers: Vec<Layer>,
    /// Log standard deviation of the pre-squash Gaussian (stochastic mode).
    pub log_std: Option<DVector<f64>>,
}

/// Full-size hidden layers.
pub const FULL_HIDDEN: [usize; 3] = [1024, 1024, 1024];
/// Reduced layers for desk-scale training.
pub const DESK_HIDDEN: [usize; 3] = [64, 64, 64];

/// Features that barely vary in the training set are not blown up.
pub const STD_FLOOR: f64 = 1e-3;

impl PolicyNet {
    /// He-initialized hidden layers; the output layer starts small so the
    /// initial policy stays close to zero motion.
    pub fn new<R: Rng + ?Sized>(layout: InputLayout, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![layout.input_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(layout.dof);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let std = if k == last { 0.01 } else { (2.0 / w[0] as f64).sqrt() };
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| {
                        let z: f64 = StandardNormal.sample(rng);
                        z * std
                    }),
                    bias: DVector::zeros(w[1]),
                    activation: if k == last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        let d = layout.input_dim();
        PolicyNet {
            layout,
            input_shift: DVector::zeros(d),
            input_scale: DVector::from_element(d, 1.0),
            layers,
            log_std: None,
        }
    }

    pub fn zeros(layout: InputLayout, hidden: &[usize]) -> Self {
        let mut net = Self::new(layout, hidden, &mut ChaCha8Rng::seed_from_u64(0));
        net.set_params(&DVector::zeros(net.num_params()));
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layout.dof
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.bias.len())
            .collect()
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: rows,
            });
        }
        Ok(())
    }

    fn standardize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for mut col in out.column_iter_mut() {
            col -= &self.input_shift;
            col.component_mul_assign(&self.input_scale);
        }
        out
    }

    /// Pre-squash outputs for a batch of states (one per column).
    pub fn head_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x.nrows())?;
        let mut a = self.standardize(x);
        for l in &self.layers {
            a = l.apply(&a).1;
        }
        Ok(a)
    }

    pub fn head(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        let out = self.head_batch(&DMatrix::from_column_slice(s.len(), 1, s.as_slice()))?;
        Ok(out.column(0).into_owned())
    }

    /// Deterministic action `0.26 · tanh(μ(s))`.
    pub fn forward(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.head(s)?.map(|v| MAX_ACTION * v.tanh()))
    }

    /// Samples the pre-squash Gaussian, then squashes and scales.
    pub fn sample<R: Rng + ?Sized>(&self, s: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let mu = self.head(s)?;
        let Some(log_std) = &self.log_std else {
            return Ok(mu.map(|v| MAX_ACTION * v.tanh()));
        };
        Ok(DVector::from_fn(mu.len(), |j, _| {
            let z: f64 = StandardNormal.sample(rng);
            MAX_ACTION * (mu[j] + log_std[j].exp() * z).tanh()
        }))
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights (column-major per layer) then biases, layer by layer.
    pub fn params(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend_from_slice(l.weights.as_slice());
            v.extend_from_slice(l.bias.as_slice());
        }
        DVector::from_vec(v)
    }

    pub fn set_params(&mut self, p: &DVector<f64>) {
        assert_eq!(p.len(), self.num_params(), "parameter vector length");
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.as_mut_slice().copy_from_slice(&p.as_slice()[off..off + n]);
            off += n;
            let n = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&p.as_slice()[off..off + n]);
            off += n;
        }
    }

    /// Checks the input layout against a robot model.
    pub fn validate_for(&self, m: &RobotModel) -> Result<()> {
        let want = InputLayout::for_model(m);
        if self.layout != want {
            return Err(Error::LayoutMismatch(format!(
                "policy expects {:?}, model needs {:?}",
                self.layout, want
            )));
        }
        Ok(())
    }

    pub fn to_record(&self) -> PolicyRecord {
        PolicyRecord {
            format: 1,
            layout: self.layout,
            input_dim: self.input_dim(),
            output_scale: MAX_ACTION,
            input_shift: self.input_shift.iter().copied().collect(),
            input_scale: self.input_scale.iter().copied().collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.weights.ncols(),
                    outputs: l.weights.nrows(),
                    activation: l.activation,
                    weights: l.weights.transpose().as_slice().to_vec(),
                    bias: l.bias.iter().copied().collect(),
                })
                .collect(),
            log_std: self.log_std.as_ref().map(|v| v.iter().copied().collect()),
        }
    }

    pub fn from_record(r: PolicyRecord) -> Result<Self> {
        let bad = |msg: String| Err(Error::LayoutMismatch(msg));
        if r.format != 1 {
            return Err(Error::Format(format!("unsupported policy format {}", r.format)));
        }
        if r.output_scale != MAX_ACTION {
            return bad(format!("output scale {} != {MAX_ACTION}", r.output_scale));
        }
        let d_in = r.layout.input_dim();
        if r.input_dim != d_in {
            return bad(format!("input_dim {} does not match layout ({d_in})", r.input_dim));
        }
        if r.input_shift.len() != d_in || r.input_scale.len() != d_in {
            return bad("input standardization length".into());
        }
        if r.layers.is_empty() {
            return bad("no layers".into());
        }
        let mut prev = d_in;
        let mut layers = Vec::with_capacity(r.layers.len());
        for (k, l) in r.layers.into_iter().enumerate() {
            if l.inputs != prev || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return bad(format!("layer {k} shape"));
            }
            prev = l.outputs;
            layers.push(Layer {
                weights: DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights),
                bias: DVector::from_vec(l.bias),
                activation: l.activation,
            });
        }
        if prev != r.layout.dof {
            return bad(format!("output size {prev} != dof {}", r.layout.dof));
        }
        let log_std = match r.log_std {
            Some(v) if v.len() != prev => return bad("log_std length".into()),
            other => other.map(DVector::from_vec),
        };
        Ok(PolicyNet {
            layout: r.layout,
            input_shift: DVector::from_vec(r.input_shift),
            input_scale: DVector::from_vec(r.input_scale),
            layers,
            log_std,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_record())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let r: PolicyRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_record(r)
    }
}

impl Actor for PolicyNet {
    fn act(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        self.forward(state)
    }
}

/// Weight file: layer sizes, row-major matrices, activations and the input
/// layout the network was built for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub format: u32,
    pub layout: InputLayout,
    pub input_dim: usize,
    pub output_scale: f64,
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<LayerRecord>,
    #[serde(default)]
    pub log_std: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Mean squared error of the pre-squash head over a batch and its gradient
/// with respect to [`PolicyNet::params`], by reverse-mode differentiation.
pub fn mse_and_grad(net: &PolicyNet, x: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    net.check_input(x.nrows())?;
    let mut acts = vec![net.standardize(x)];
    let mut pre = Vec::with_capacity(net.layers.len());
    for l in &net.layers {
        let (z, a) = l.apply(acts.last().unwrap());
        pre.push(z);
        acts.push(a);
    }
    let y = acts.last().unwrap();
    let diff = y - t;
    let count = (diff.len()).max(1) as f64;
    let loss = diff.norm_squared() / count;
    let mut delta = diff * (2.0 / count);
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(net.layers.len());
    for (k, l) in net.layers.iter().enumerate().rev() {
        if l.activation == Activation::Relu {
            delta.zip_apply(&pre[k], |d, z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
        }
        let gw = &delta * acts[k].transpose();
        let gb = delta.column_sum();
        if k > 0 {
            delta = l.weights.transpose() * &delta;
        }
        grads.push((gw, gb));
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(net.num_params());
    for (gw, gb) in &grads {
        flat.extend_from_slice(gw.as_slice());
        flat.extend_from_slice(gb.as_slice());
    }
    Ok((loss, DVector::from_vec(flat)))
}

/// Regression target for an action: `atanh(clip(Δq / 0.26, ±0.9999))`.
pub fn bc_target(delta: &DVector<f64>) -> DVector<f64> {
    delta.map(|v| (v.clamp(-MAX_ACTION, MAX_ACTION) / MAX_ACTION).clamp(-ATANH_CLIP, ATANH_CLIP).atanh())
}

#[derive(Debug, Clone)]
pub struct BcSample {
    pub state: DVector<f64>,
    pub target: DVector<f64>,
}

/// One sample per demo transition: the state at demo step `i` and the
/// squashing pre-image of `demo_{i+1} − demo_i`.
pub fn bc_dataset(m: &RobotModel, demos: &[(Problem, Trajectory)]) -> Result<Vec<BcSample>> {
    if demos.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let mut out = Vec::new();
    for (p, traj) in demos {
        if traj.len() != p.len() {
            return Err(Error::LengthMismatch {
                trajectory: traj.len(),
                path: p.len(),
            });
        }
        for i in 0..traj.len() - 1 {
            let s = build_state(m, &p.path, &p.world.feature, &traj.configs[i], i)?;
            out.push(BcSample {
                state: s.flatten(),
                target: bc_target(&(&traj.configs[i + 1] - &traj.configs[i])),
            });
        }
    }
    Ok(out)
}

/// Noise injection around demo states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcAugment {
    /// Perturbed copies per demo transition.
    pub copies: usize,
    /// Per-joint standard deviation of the perturbation (rad).
    pub sigma: f64,
    /// Corrective labels are scaled down to this ∞-norm (rad).
    pub max_correction: f64,
    pub seed: u64,
}

impl Default for BcAugment {
    fn default() -> Self {
        BcAugment {
            copies: 8,
            sigma: 0.1,
            max_correction: 0.1,
            seed: 0,
        }
    }
}

/// Corrective action at an off-demo configuration `q`: a damped
/// least-squares step onto the next target plus the null-space part of the
/// way back to the demo. At `q = demo_i` it reproduces the demo step up to
/// linearization error.
pub fn corrective_action(m: &RobotModel, q: &JointConfig, target: &Pose, demo_next: &JointConfig) -> Result<DVector<f64>> {
    let s = ChainState::compute(m, q)?;
    let j = s.jacobian();
    let e = pose_error_vector(s.ee(), target);
    let range = pinv(&j) * DVector::from_column_slice(e.as_slice());
    let null = null_projector(&j) * (demo_next - q);
    Ok(range + null)
}

fn cap(mut a: DVector<f64>, limit: f64) -> DVector<f64> {
    let big = a.amax();
    if big > limit {
        a *= limit / big;
    }
    a
}

/// [`bc_dataset`] plus `copies` perturbed states per transition, each
/// labelled with [`corrective_action`]. Perturbed configurations are
/// clamped to the joint limits.
pub fn bc_dataset_augmented(
    m: &RobotModel,
    demos: &[(Problem, Trajectory)],
    aug: &BcAugment,
) -> Result<Vec<BcSample>> {
    let mut out = bc_dataset(m, demos)?;
    let mut rng = ChaCha8Rng::seed_from_u64(aug.seed);
    for (p, traj) in demos {
        for i in 0..traj.len() - 1 {
            for _ in 0..aug.copies {
                let mut q = DVector::from_fn(m.dof(), |k, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    traj.configs[i][k] + aug.sigma * z
                });
                m.clamp_to_limits(&mut q);
                let s = build_state(m, &p.path, &p.world.feature, &q, i)?;
                let a = corrective_action(m, &q, &p.path.poses[i + 1], &traj.configs[i + 1])?;
                out.push(BcSample {
                    state: s.flatten(),
                    target: bc_target(&cap(a, aug.max_correction)),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Multiplicative learning-rate decay per epoch.
    pub lr_decay: f64,
    pub seed: u64,
    /// Fit the input standardization to the dataset before training.
    pub fit_standardization: bool,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            lr_decay: 0.99,
            seed: 0,
            fit_standardization: true,
        }
    }
}

struct Adam {
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: DVector::zeros(n),
            v: DVector::zeros(n),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut DVector<f64>, g: &DVector<f64>, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = B1 * self.m[k] + (1.0 - B1) * g[k];
            self.v[k] = B2 * self.v[k] + (1.0 - B2) * g[k] * g[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + EPS);
        }
    }
}

fn stack(samples: &[&BcSample]) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = DMatrix::from_columns(&samples.iter().map(|s| s.state.clone()).collect::<Vec<_>>());
    let t = DMatrix::from_columns(&samples.iter().map(|s| s.target.clone()).collect::<Vec<_>>());
    (x, t)
}

pub fn dataset_mse(net: &PolicyNet, samples: &[BcSample]) -> Result<f64> {
    let refs: Vec<&BcSample> = samples.iter().collect();
    let (x, t) = stack(&refs);
    Ok((net.head_batch(&x)? - t).norm_squared() / (samples.len() * net.output_dim()) as f64)
}

/// Behavior cloning with Adam on mini-batches. Returns the training-set MSE
/// after every epoch.
pub fn bc_train(net: &mut PolicyNet, samples: &[BcSample], cfg: &BcConfig) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    for s in samples {
        net.check_input(s.state.len())?;
        if s.target.len() != net.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: net.output_dim(),
                got: s.target.len(),
            });
        }
    }
    if cfg.fit_standardization {
        let d = net.input_dim();
        let n = samples.len() as f64;
        let mean = samples.iter().fold(DVector::zeros(d), |acc, s| acc + &s.state) / n;
        let var = samples
            .iter()
            .fold(DVector::zeros(d), |acc, s| acc + (&s.state - &mean).map(|v| v * v))
            / n;
        net.input_shift = mean;
        net.input_scale = var.map(|v| 1.0 / v.sqrt().max(STD_FLOOR));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut params = net.params();
    let mut adam = Adam::new(params.len());
    let mut lr = cfg.lr;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let refs: Vec<&BcSample> = chunk.iter().map(|&k| &samples[k]).collect();
            let (x, t) = stack(&refs);
            let (_, g) = mse_and_grad(net, &x, &t)?;
            adam.step(&mut params, &g, lr);
            net.set_params(&params);
        }
        lr *= cfg.lr_decay;
        curve.push(dataset_mse(net, samples)?);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy)]
pub struct CemConfig {
    pub population: usize,
    pub elite_frac: f64,
    pub iters: usize,
    pub init_sigma: f64,
    /// Per-iteration multiplicative shrink of the sampling σ.
    pub sigma_decay: f64,
    pub seed: u64,
}

impl Default for CemConfig {
    fn default() -> Self {
        CemConfig {
            population: 32,
            elite_frac: 0.25,
            iters: 50,
            init_sigma: 0.1,
            sigma_decay: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CemIteration {
    pub iter: usize,
    pub best_fitness: f64,
    pub mean_elite_fitness: f64,
    pub sigma: f64,
}

/// Cross-entropy search over the parameter vector. The net is left holding
/// the best parameters seen, so the best-fitness trace never decreases.
pub fn cem_train<F>(net: &mut PolicyNet, fitness: F, cfg: &CemConfig) -> Vec<CemIteration>
where
    F: Fn(&PolicyNet) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = net.num_params();
    let mut mean = net.params();
    let mut best = mean.clone();
    let mut best_fit = fitness(net);
    let mut sigma = cfg.init_sigma;
    let elites = ((cfg.population as f64 * cfg.elite_frac).round() as usize).clamp(1, cfg.population);
    let mut trace = Vec::with_capacity(cfg.iters);
    for iter in 0..cfg.iters {
        let candidates: Vec<DVector<f64>> = (0..cfg.population)
            .map(|_| {
                DVector::from_fn(n, |k, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean[k] + sigma * z
                })
            })
            .collect();
        let template = net.clone();
        let fits: Vec<f64> = candidates
            .par_iter()
            .map(|p| {
                let mut trial = template.clone();
                trial.set_params(p);
                let f = fitness(&trial);
                if f.is_nan() { f64::NEG_INFINITY } else { f }
            })
            .collect();
        let mut rank: Vec<usize> = (0..cfg.population).collect();
        rank.sort_by(|&a, &b| fits[b].total_cmp(&fits[a]).then(a.cmp(&b)));
        if fits[rank[0]] > best_fit {
            best_fit = fits[rank[0]];
            best = candidates[rank[0]].clone();
        }
        mean = rank[..elites]
            .iter()
            .fold(DVector::zeros(n), |acc, &k| acc + &candidates[k])
            / elites as f64;
        let mean_elite = rank[..elites].iter().map(|&k| fits[k]).sum::<f64>() / elites as f64;
        trace.push(CemIteration {
            iter,
            best_fitness: best_fit,
            mean_elite_fitness: mean_elite,
            sigma,
        });
        sigma *= cfg.sigma_decay;
    }
    net.set_params(&best);
    trace
}

/// CEM on the mean discounted return over a problem set (no demos).
pub fn dfs_train(
    m: &RobotModel,
    net: &mut PolicyNet,
    problems: &[Problem],
    cfg: &CemConfig,
) -> Result<Vec<CemIteration>> {
    net.validate_for(m)?;
    if problems.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let fitness = |p: &PolicyNet| {
        let total: f64 = problems
            .iter()
            .map(|prob| {
                let mut env = Env::new(m, prob, None);
                episode_return(&mut env, p).unwrap_or(f64::NEG_INFINITY)
            })
            .sum();
        total / problems.len() as f64
    };
    Ok(cem_train(net, fitness, cfg))
}
