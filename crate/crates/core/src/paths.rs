//! Target-path synthesis: random B-spline paths resampled at fixed arc
//! length, built-in benchmark shapes, and path/problem files.

use crate::error::{Error, Result};
use crate::kinematics::{fk, ik_first_valid, ik_sample, JointConfig, RobotModel};
use crate::se3::{pos_error, rot_error, slerp, Pose, PoseRecord, Quat};
use crate::world::{OccupancyGrid, Primitive, World};
use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

/// Positional spacing between consecutive path poses (m).
pub const PATH_SPACING: f64 = 0.005;
const SPACING_SLACK: f64 = 1e-6;
/// Random seeds tried by the validity check (`10 · 30`).
const VALIDITY_ATTEMPTS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPath {
    pub name: String,
    pub seed: Option<u64>,
    pub has_obstacles: bool,
    pub poses: Vec<Pose>,
}

impl TargetPath {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn max_spacing(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| pos_error(&w[0], &w[1]))
            .fold(0.0, f64::max)
    }

    pub fn positional_length(&self) -> f64 {
        self.poses.windows(2).map(|w| pos_error(&w[0], &w[1])).sum()
    }

    pub fn to_record(&self) -> PathRecord {
        PathRecord {
            format: 1,
            quaternion_order: "wxyz".into(),
            name: self.name.clone(),
            seed: self.seed,
            has_obstacles: self.has_obstacles,
            poses: self.poses.iter().map(PoseRecord::from).collect(),
        }
    }

    pub fn from_record(r: &PathRecord) -> Result<Self> {
        if r.format != 1 {
            return Err(Error::Format(format!("unsupported path format {}", r.format)));
        }
        if r.quaternion_order != "wxyz" {
            return Err(Error::Format("path quaternions must be wxyz".into()));
        }
        if r.poses.len() < 2 {
            return Err(Error::Format("a path needs at least two poses".into()));
        }
        Ok(TargetPath {
            name: r.name.clone(),
            seed: r.seed,
            has_obstacles: r.has_obstacles,
            poses: r.poses.iter().map(Pose::from).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_record())?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let r: PathRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_record(&r)
    }
}

/// Path file: metadata header plus `{p: [x,y,z], q: [w,x,y,z]}` poses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathRecord {
    pub format: u32,
    pub quaternion_order: String,
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub has_obstacles: bool,
    pub poses: Vec<PoseRecord>,
}

/// Axis-aligned box that waypoint positions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Default for WorkspaceBox {
    fn default() -> Self {
        WorkspaceBox {
            min: Vector3::new(0.2, -0.7, 0.0),
            max: Vector3::new(1.2, 0.7, 1.2),
        }
    }
}

impl WorkspaceBox {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - 1e-9 && p[a] <= self.max[a] + 1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct PathGenConfig {
    pub min_waypoints: usize,
    pub max_waypoints: usize,
    pub workspace: WorkspaceBox,
    /// When set, waypoints after the first are drawn within this half-width
    /// cube around the first one (short desk-scale paths).
    pub local_extent: Option<f64>,
    /// When set, waypoint orientations stay within this angle (rad) of a
    /// random base orientation; otherwise they are uniform over SO(3).
    pub orientation_spread: Option<f64>,
    /// Paths longer than this are rejected.
    pub max_len: Option<usize>,
    pub max_retries: usize,
}

impl Default for PathGenConfig {
    fn default() -> Self {
        PathGenConfig {
            min_waypoints: 5,
            max_waypoints: 8,
            workspace: WorkspaceBox::default(),
            local_extent: None,
            orientation_spread: None,
            max_len: None,
            max_retries: 50,
        }
    }
}

impl PathGenConfig {
    /// Short paths (N ≤ 80) with moderate orientation changes.
    pub fn desk_scale() -> Self {
        PathGenConfig {
            local_extent: Some(0.06),
            orientation_spread: Some(0.35),
            max_len: Some(80),
            ..Default::default()
        }
    }
}

/// Natural cubic spline through points with chord-length parameters.
pub struct CubicSpline {
    knots: Vec<f64>,
    points: Vec<Vector3<f64>>,
    second: Vec<Vector3<f64>>,
}

impl CubicSpline {
    /// Consecutive duplicate points are dropped. Needs two distinct points.
    pub fn through(points: &[Vector3<f64>]) -> Option<Self> {
        let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|l| (l - p).norm() > 1e-12) {
                pts.push(*p);
            }
        }
        let n = pts.len();
        if n < 2 {
            return None;
        }
        let mut knots = vec![0.0; n];
        for k in 1..n {
            knots[k] = knots[k - 1] + (pts[k] - pts[k - 1]).norm();
        }
        let mut second = vec![Vector3::zeros(); n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![Vector3::zeros(); m];
            let mut upper = vec![0.0; m];
            for r in 0..m {
                let k = r + 1;
                let h0 = knots[k] - knots[k - 1];
                let h1 = knots[k + 1] - knots[k];
                diag[r] = 2.0 * (h0 + h1);
                upper[r] = h1;
                rhs[r] = 6.0 * ((pts[k + 1] - pts[k]) / h1 - (pts[k] - pts[k - 1]) / h0);
            }
            for r in 1..m {
                let lower = knots[r + 1] - knots[r];
                let w = lower / diag[r - 1];
                diag[r] -= w * upper[r - 1];
                let prev = rhs[r - 1];
                rhs[r] -= prev * w;
            }
            let mut sol = vec![Vector3::zeros(); m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for r in (0..m - 1).rev() {
                sol[r] = (rhs[r] - sol[r + 1] * upper[r]) / diag[r];
            }
            second[1..(m + 1)].copy_from_slice(&sol[..m]);
        }
        Some(CubicSpline {
            knots,
            points: pts,
            second,
        })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn knot(&self, k: usize) -> f64 {
        self.knots[k]
    }

    pub fn eval(&self, t: f64) -> Vector3<f64> {
        let n = self.points.len();
        let t = t.clamp(0.0, self.knots[n - 1]);
        let k = match self.knots.partition_point(|&kt| kt <= t) {
            0 => 0,
            i => (i - 1).min(n - 2),
        };
        let h = self.knots[k + 1] - self.knots[k];
        let a = (self.knots[k + 1] - t) / h;
        let b = (t - self.knots[k]) / h;
        self.points[k] * a
            + self.points[k + 1] * b
            + (self.second[k] * (a * a * a - a) + self.second[k + 1] * (b * b * b - b)) * (h * h / 6.0)
    }
}

/// Samples each spline segment densely and returns the polyline with its
/// cumulative arc length, plus the arc length at every interpolation knot.
fn dense_polyline(spline: &CubicSpline, per_segment: usize) -> (Vec<Vector3<f64>>, Vec<f64>, Vec<f64>) {
    let n = spline.num_points();
    let mut pts = vec![spline.eval(0.0)];
    let mut cum = vec![0.0];
    let mut knot_len = vec![0.0];
    for k in 0..n - 1 {
        let (t0, t1) = (spline.knot(k), spline.knot(k + 1));
        for s in 1..=per_segment {
            let t = t0 + (t1 - t0) * s as f64 / per_segment as f64;
            let p = spline.eval(t);
            let l = cum.last().unwrap() + (p - pts.last().unwrap()).norm();
            pts.push(p);
            cum.push(l);
        }
        knot_len.push(*cum.last().unwrap());
    }
    (pts, cum, knot_len)
}

/// Positions every `spacing` meters of arc length along the spline (plus the
/// end point), with orientations slerped by arc-length fraction between
/// consecutive waypoints.
pub fn resample_waypoints(waypoints: &[Pose], spacing: f64) -> Option<Vec<Pose>> {
    let positions: Vec<Vector3<f64>> = waypoints.iter().map(|p| p.position).collect();
    let mut kept: Vec<Pose> = Vec::with_capacity(waypoints.len());
    for w in waypoints {
        if kept
            .last()
            .is_none_or(|l| (l.position - w.position).norm() > 1e-12)
        {
            kept.push(*w);
        }
    }
    let spline = CubicSpline::through(&positions)?;
    let (pts, cum, knot_len) = dense_polyline(&spline, 200);
    let total = *cum.last().unwrap();
    let mut out = Vec::new();
    let mut seg = 0usize;
    let mut wp = 0usize;
    let mut j = 0usize;
    loop {
        let s = (j as f64 * spacing).min(total);
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let (l0, l1) = (cum[seg], cum[seg + 1]);
        let f = if l1 > l0 { ((s - l0) / (l1 - l0)).clamp(0.0, 1.0) } else { 0.0 };
        let p = pts[seg] + (pts[seg + 1] - pts[seg]) * f;
        while wp + 2 < knot_len.len() && knot_len[wp + 1] < s {
            wp += 1;
        }
        let (k0, k1) = (knot_len[wp], knot_len[wp + 1]);
        let g = if k1 > k0 { ((s - k0) / (k1 - k0)).clamp(0.0, 1.0) } else { 0.0 };
        let q = slerp(&kept[wp].orientation, &kept[wp + 1].orientation, g);
        out.push(Pose::new(p, q));
        if s >= total {
            break;
        }
        j += 1;
        if total - j as f64 * spacing < 1e-9 {
            // the next sample would duplicate the end point
            j = (total / spacing).ceil() as usize;
        }
    }
    Some(out)
}

/// True iff a collision-free IK solution exists (searched from `warm` seeds
/// first, then up to 300 random seeds).
pub fn is_valid_pose_with<R: Rng + ?Sized>(
    m: &RobotModel,
    world: &World,
    x: &Pose,
    warm: &[JointConfig],
    rng: &mut R,
) -> Option<JointConfig> {
    ik_first_valid(m, x, world, warm, VALIDITY_ATTEMPTS, rng)
}

pub fn is_valid_pose<R: Rng + ?Sized>(m: &RobotModel, world: &World, x: &Pose, rng: &mut R) -> bool {
    is_valid_pose_with(m, world, x, &[], rng).is_some()
}

/// Checks every pose of a path, warm-starting IK from the previous pose.
pub fn path_is_valid<R: Rng + ?Sized>(m: &RobotModel, world: &World, poses: &[Pose], rng: &mut R) -> bool {
    let mut warm: Vec<JointConfig> = Vec::new();
    for x in poses {
        match is_valid_pose_with(m, world, x, &warm, rng) {
            Some(q) => warm = vec![q],
            None => return false,
        }
    }
    true
}

fn sample_orientation<R: Rng + ?Sized>(base: &Quat, spread: Option<f64>, rng: &mut R) -> Quat {
    match spread {
        None => Quat::random(rng),
        Some(max_angle) => {
            let axis = loop {
                let v = Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n: f64 = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n;
                }
            };
            let angle = rng.random_range(0.0..=max_angle);
            Quat::from_axis_angle(&axis, angle).mul(base).normalized()
        }
    }
}

fn sample_waypoint<R: Rng + ?Sized>(
    m: &RobotModel,
    world: &World,
    cfg: &PathGenConfig,
    anchor: Option<&Vector3<f64>>,
    base: &Quat,
    rng: &mut R,
) -> Option<Pose> {
    for _ in 0..200 {
        let (lo, hi) = match (anchor, cfg.local_extent) {
            (Some(a), Some(e)) => (
                a.map(|v| v - e).zip_map(&cfg.workspace.min, f64::max),
                a.map(|v| v + e).zip_map(&cfg.workspace.max, f64::min),
            ),
            _ => (cfg.workspace.min, cfg.workspace.max),
        };
        let p = Vector3::new(
            rng.random_range(lo.x..=hi.x),
            rng.random_range(lo.y..=hi.y),
            rng.random_range(lo.z..=hi.z),
        );
        let q = sample_orientation(base, cfg.orientation_spread, rng);
        let x = Pose::new(p, q);
        if is_valid_pose(m, world, &x, rng) {
            return Some(x);
        }
    }
    None
}

fn try_generate<R: Rng + ?Sized>(
    m: &RobotModel,
    world: &World,
    cfg: &PathGenConfig,
    rng: &mut R,
) -> Option<Vec<Pose>> {
    let count = rng.random_range(cfg.min_waypoints..=cfg.max_waypoints);
    let base = Quat::random(rng);
    let first = sample_waypoint(m, world, cfg, None, &base, rng)?;
    let mut waypoints = vec![first];
    let base = first.orientation;
    while waypoints.len() < count {
        waypoints.push(sample_waypoint(m, world, cfg, Some(&first.position), &base, rng)?);
    }
    let poses = resample_waypoints(&waypoints, PATH_SPACING)?;
    if poses.len() < 2 || cfg.max_len.is_some_and(|max| poses.len() > max) {
        return None;
    }
    if !poses.iter().all(|p| cfg.workspace.contains(&p.position)) {
        return None;
    }
    path_is_valid(m, world, &poses, rng).then_some(poses)
}

/// Random path: 5–8 valid waypoints joined by a cubic spline, resampled at
/// 0.5 cm, orientations slerped between waypoints. Candidates with any
/// invalid intermediate pose are rejected and regenerated.
pub fn generate_path<R: Rng + ?Sized>(
    m: &RobotModel,
    world: &World,
    cfg: &PathGenConfig,
    rng: &mut R,
) -> Result<TargetPath> {
    for _ in 0..cfg.max_retries {
        if let Some(poses) = try_generate(m, world, cfg, rng) {
            return Ok(TargetPath {
                name: "random".into(),
                seed: None,
                has_obstacles: world.has_obstacles(),
                poses,
            });
        }
    }
    Err(Error::RetryExhausted(cfg.max_retries))
}

/// A path-following problem: target path, scene and start configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub tag: String,
    pub path: TargetPath,
    pub world: World,
    pub q0: JointConfig,
}

impl Problem {
    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }
}

/// Start configuration drawn uniformly from collision-free IK solutions at
/// the first path pose.
pub fn make_problem<R: Rng + ?Sized>(
    m: &RobotModel,
    path: &TargetPath,
    world: &World,
    rng: &mut R,
) -> Result<Problem> {
    let candidates = ik_sample(m, &path.poses[0], 20, Some(world), rng);
    if candidates.is_empty() {
        return Err(Error::NoStartConfig);
    }
    let q0 = candidates[rng.random_range(0..candidates.len())].clone();
    Ok(Problem {
        id: path.name.clone(),
        tag: path.name.clone(),
        path: path.clone(),
        world: world.clone(),
        q0,
    })
}

/// Checks the start-configuration contract of a problem.
pub fn problem_is_consistent(m: &RobotModel, p: &Problem) -> bool {
    let Ok(links) = fk(m, &p.q0) else {
        return false;
    };
    let ee = links.ee();
    m.within_limits(&p.q0)
        && pos_error(ee, &p.path.poses[0]) <= 1e-4
        && rot_error(ee, &p.path.poses[0]) <= 1e-3 + 1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub format: u32,
    pub id: String,
    pub tag: String,
    pub path: PathRecord,
    /// Grid file relative to the problem file; `None` for an empty scene.
    #[serde(default)]
    pub world_file: Option<String>,
    pub q0: Vec<f64>,
}

impl ProblemRecord {
    pub fn into_problem(self, base_dir: &Path) -> Result<Problem> {
        if self.format != 1 {
            return Err(Error::Format(format!("unsupported problem format {}", self.format)));
        }
        let world = match &self.world_file {
            Some(f) => World::new(OccupancyGrid::load(base_dir.join(f))?),
            None => World::empty(),
        };
        Ok(Problem {
            id: self.id,
            tag: self.tag,
            path: TargetPath::from_record(&self.path)?,
            world,
            q0: JointConfig::from_vec(self.q0),
        })
    }
}

pub fn problem_record(p: &Problem, world_file: Option<String>) -> ProblemRecord {
    ProblemRecord {
        format: 1,
        id: p.id.clone(),
        tag: p.tag.clone(),
        path: p.path.to_record(),
        world_file,
        q0: p.q0.iter().copied().collect(),
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let rec: ProblemRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    rec.into_problem(path.parent().unwrap_or(Path::new(".")))
}

/// Built-in benchmark shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinPath {
    Square,
    S,
    Zigzag,
    Rotation,
}

impl BuiltinPath {
    pub const ALL: [BuiltinPath; 4] = [Self::Square, Self::S, Self::Zigzag, Self::Rotation];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Square => "Square",
            Self::S => "S",
            Self::Zigzag => "Zigzag",
            Self::Rotation => "Rotation",
        }
    }

    pub fn default_len(&self) -> usize {
        match self {
            Self::Square => 320,
            Self::S => 301,
            Self::Zigzag => 227,
            Self::Rotation => 209,
        }
    }

    pub fn has_obstacles(&self) -> bool {
        matches!(self, Self::Square | Self::S)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name().eq_ignore_ascii_case(name))
    }
}

/// Center of the vertical drawing plane used by the planar shapes.
const DRAW_CENTER: [f64; 3] = [0.8, 0.0, 0.75];

/// Unit-free planar template in (y, z) offsets; scaled so that its arc
/// length equals `(n − 1) · spacing`.
fn planar_template(kind: BuiltinPath) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    match kind {
        BuiltinPath::Square => {
            for &(y, z) in &[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5)] {
                pts.push((y, z));
            }
        }
        BuiltinPath::Zigzag => {
            for k in 0..5 {
                let y = -1.0 + 0.5 * k as f64;
                let z = if k % 2 == 0 { -0.4 } else { 0.4 };
                pts.push((y, z));
            }
        }
        BuiltinPath::S => {
            // two three-quarter circles of unit radius
            let steps = 600;
            for s in 0..=steps {
                let th = 1.5 * PI * s as f64 / steps as f64;
                pts.push((th.cos(), 1.0 + th.sin()));
            }
            for s in 1..=steps {
                let th = FRAC_PI_2 - 1.5 * PI * s as f64 / steps as f64;
                pts.push((th.cos(), -1.0 + th.sin()));
            }
        }
        BuiltinPath::Rotation => unreachable!("rotation path is not planar"),
    }
    pts
}

/// Places `n` points at equal arc length along a polyline.
fn resample_polyline(pts: &[Vector3<f64>], n: usize) -> Vec<Vector3<f64>> {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let s = total * j as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let f = ((s - cum[seg]) / (cum[seg + 1] - cum[seg])).clamp(0.0, 1.0);
        out.push(pts[seg] + (pts[seg + 1] - pts[seg]) * f);
    }
    out
}

/// Builds a built-in path with `n` poses. Planar shapes lie in a vertical
/// plane in front of the robot with the tool pointing along +x; `Rotation`
/// holds the position and sweeps pitch ±45° then yaw ±45°.
pub fn builtin_path(kind: BuiltinPath, n: usize) -> TargetPath {
    let n = n.max(2);
    let center = Vector3::from(DRAW_CENTER);
    let poses = match kind {
        BuiltinPath::Rotation => {
            // pitch: 0 → +45 → −45 → 0, then yaw the same way
            let sweep = |t: f64| {
                if t < 0.25 {
                    4.0 * t * FRAC_PI_4
                } else if t < 0.75 {
                    FRAC_PI_4 - (t - 0.25) * 4.0 * FRAC_PI_4
                } else {
                    -FRAC_PI_4 + (t - 0.75) * 4.0 * FRAC_PI_4
                }
            };
            let half = n / 2;
            (0..n)
                .map(|i| {
                    let q = if i < half {
                        let t = i as f64 / (half - 1).max(1) as f64;
                        Quat::from_axis_angle(&Vector3::y(), sweep(t))
                    } else {
                        let t = (i - half) as f64 / (n - half - 1).max(1) as f64;
                        Quat::from_axis_angle(&Vector3::z(), sweep(t))
                    };
                    Pose::new(center, q)
                })
                .collect()
        }
        _ => {
            let template: Vec<Vector3<f64>> = planar_template(kind)
                .into_iter()
                .map(|(y, z)| Vector3::new(0.0, y, z))
                .collect();
            let len: f64 = template.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let scale = PATH_SPACING * (n - 1) as f64 * (1.0 - 1e-9) / len;
            let scaled: Vec<Vector3<f64>> = template.iter().map(|p| center + p * scale).collect();
            resample_polyline(&scaled, n)
                .into_iter()
                .map(|p| Pose::new(p, Quat::IDENTITY))
                .collect()
        }
    };
    TargetPath {
        name: kind.name().into(),
        seed: None,
        has_obstacles: kind.has_obstacles(),
        poses,
    }
}

pub fn builtin_paths() -> Vec<TargetPath> {
    BuiltinPath::ALL
        .iter()
        .map(|k| builtin_path(*k, k.default_len()))
        .collect()
}

/// Scene for built-in paths with obstacles: a post beside the drawing area
/// and a low shelf below it, both clear of the path itself.
pub fn builtin_world(kind: BuiltinPath) -> World {
    let mut g = OccupancyGrid::default_workspace();
    if kind.has_obstacles() {
        g.add_primitive(&Primitive::Box {
            center: [0.95, -0.45, 0.7],
            half_extents: [0.08, 0.05, 0.3],
        });
        g.add_primitive(&Primitive::Box {
            center: [0.9, 0.0, 0.3],
            half_extents: [0.2, 0.35, 0.03],
        });
    }
    World::new(g)
}

/// Whether every path pose respects the spacing contract.
pub fn spacing_ok(path: &TargetPath) -> bool {
    path.max_spacing() <= PATH_SPACING + SPACING_SLACK
}
