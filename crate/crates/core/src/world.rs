//! Occupancy grids, signed distance fields, collision queries and the pooled
//! scene featurizer.

use crate::error::{Error, Result};
use crate::kinematics::{ChainState, JointConfig, RobotModel};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Distance reported everywhere by the SDF of an empty grid.
pub const SDF_SENTINEL: f64 = 10.0;
pub const SCENE_FEATURE_DIM: usize = 32;
const BLOCKS: [usize; 3] = [4, 4, 2];
const GRID_MAGIC: &[u8; 4] = b"OCCG";
const GRID_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub dims: [usize; 3],
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(origin: Vector3<f64>, resolution: f64, dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        OccupancyGrid {
            origin,
            resolution,
            dims,
            occupied: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    /// x:[0.2,1.2] × y:[−0.7,0.7] × z:[0.2,1.2] at 2 cm.
    pub fn default_workspace() -> Self {
        Self::new(Vector3::new(0.2, -0.7, 0.2), 0.02, [50, 70, 50])
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupied.iter().any(|&o| o)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupied[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.index(i, j, k);
        self.occupied[idx] = value;
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        self.origin
            + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.resolution
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn occupancy_fraction(&self) -> f64 {
        self.occupied_count() as f64 / self.len().max(1) as f64
    }

    /// Marks every voxel whose center satisfies `inside`.
    pub fn fill_where(&mut self, inside: impl Fn(&Vector3<f64>) -> bool) {
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if inside(&self.voxel_center(i, j, k)) {
                        self.set(i, j, k, true);
                    }
                }
            }
        }
    }

    pub fn add_primitive(&mut self, p: &Primitive) {
        match *p {
            Primitive::Box {
                center,
                half_extents,
            } => {
                let (c, h) = (Vector3::from(center), Vector3::from(half_extents));
                self.fill_where(|v| {
                    (v.x - c.x).abs() <= h.x && (v.y - c.y).abs() <= h.y && (v.z - c.z).abs() <= h.z
                })
            }
            Primitive::Cylinder {
                center,
                radius,
                half_height,
            } => {
                let c = Vector3::from(center);
                self.fill_where(|v| {
                    let (dx, dy) = (v.x - c.x, v.y - c.y);
                    dx * dx + dy * dy <= radius * radius && (v.z - c.z).abs() <= half_height
                })
            }
        }
    }

    /// Binary grid file: magic `OCCG`, `u32` version, origin and resolution
    /// as little-endian `f64`, dims as `u32`, then occupancy bits packed
    /// LSB-first in x-fastest order.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        for v in self.origin.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.resolution.to_le_bytes())?;
        for &n in &self.dims {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        let mut bytes = vec![0u8; self.len().div_ceil(8)];
        for (idx, _) in self.occupied.iter().enumerate().filter(|(_, &o)| o) {
            bytes[idx / 8] |= 1 << (idx % 8);
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("bad grid magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != GRID_VERSION {
            return Err(Error::Format(format!("unsupported grid version {version}")));
        }
        let mut f = [0.0; 4];
        for v in f.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        let mut dims = [0usize; 3];
        for n in dims.iter_mut() {
            r.read_exact(&mut b4)?;
            *n = u32::from_le_bytes(b4) as usize;
        }
        if f[3].is_nan() || f[3] <= 0.0 || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("bad grid geometry".into()));
        }
        let mut grid = OccupancyGrid::new(Vector3::new(f[0], f[1], f[2]), f[3], dims);
        let mut bytes = vec![0u8; grid.len().div_ceil(8)];
        r.read_exact(&mut bytes)?;
        for (idx, o) in grid.occupied.iter_mut().enumerate() {
            *o = bytes[idx / 8] & (1 << (idx % 8)) != 0;
        }
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Rasterizes a JSON primitive list onto a grid.
    pub fn from_primitives_json(text: &str) -> Result<Self> {
        let scene: PrimitiveScene = serde_json::from_str(text)?;
        let mut grid = match (scene.origin, scene.resolution, scene.dims) {
            (Some(o), Some(r), Some(d)) => {
                if r.is_nan() || r <= 0.0 {
                    return Err(Error::Format("resolution must be positive".into()));
                }
                OccupancyGrid::new(Vector3::from(o), r, d)
            }
            (None, None, None) => OccupancyGrid::default_workspace(),
            _ => return Err(Error::Format("origin, resolution and dims go together".into())),
        };
        for p in &scene.primitives {
            grid.add_primitive(p);
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// z-aligned cylinder.
    Cylinder {
        center: [f64; 3],
        radius: f64,
        half_height: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimitiveScene {
    #[serde(default)]
    pub origin: Option<[f64; 3]>,
    #[serde(default)]
    pub resolution: Option<f64>,
    #[serde(default)]
    pub dims: Option<[usize; 3]>,
    pub primitives: Vec<Primitive>,
}

const FAR: f64 = 1e20;

/// 1-D squared distance transform of a sampled function (lower envelope of
/// parabolas). `f` holds 0 at sites and `FAR` elsewhere.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let parabola = |p: usize| f[p] + (p * p) as f64;
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared voxel-unit distance from every voxel to the nearest voxel where
/// `site` is true; `FAR`-ish values when there is none.
fn squared_edt(dims: [usize; 3], site: impl Fn(usize) -> bool) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let mut g: Vec<f64> = (0..nx * ny * nz)
        .map(|i| if site(i) { 0.0 } else { FAR })
        .collect();
    let nmax = nx.max(ny).max(nz);
    let mut f = vec![0.0; nmax];
    let mut out = vec![0.0; nmax];
    let mut v = vec![0usize; nmax];
    let mut z = vec![0.0; nmax + 1];
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    for axis in 0..3 {
        let (n, a, b) = match axis {
            0 => (nx, ny, nz),
            1 => (ny, nx, nz),
            _ => (nz, nx, ny),
        };
        for s in 0..a {
            for t in 0..b {
                let at = |q: usize| match axis {
                    0 => idx(q, s, t),
                    1 => idx(s, q, t),
                    _ => idx(s, t, q),
                };
                for q in 0..n {
                    f[q] = g[at(q)];
                }
                edt_1d(&f[..n], &mut out[..n], &mut v, &mut z);
                for q in 0..n {
                    g[at(q)] = out[q];
                }
            }
        }
    }
    g
}

/// Signed distance field on the voxel-center lattice of a grid.
#[derive(Debug, Clone)]
pub struct Sdf {
    pub origin: Vector3<f64>,
    pub resolution: f64,
    pub dims: [usize; 3],
    values: Vec<f64>,
}

impl Sdf {
    /// Exact Euclidean distance transform between voxel centers: positive
    /// distance to the nearest occupied center for free voxels, negative
    /// distance to the nearest free center for occupied voxels.
    pub fn build(g: &OccupancyGrid) -> Self {
        let n = g.len();
        let occupied = g.occupied_count();
        let values = if occupied == 0 {
            vec![SDF_SENTINEL; n]
        } else if occupied == n {
            vec![-SDF_SENTINEL; n]
        } else {
            let outside = squared_edt(g.dims, |i| g.occupied[i]);
            let inside = squared_edt(g.dims, |i| !g.occupied[i]);
            (0..n)
                .map(|i| {
                    if g.occupied[i] {
                        -(inside[i].sqrt() * g.resolution)
                    } else {
                        outside[i].sqrt() * g.resolution
                    }
                })
                .collect()
        };
        Sdf {
            origin: g.origin,
            resolution: g.resolution,
            dims: g.dims,
            values,
        }
    }

    pub fn empty() -> Self {
        Self::build(&OccupancyGrid::new(Vector3::zeros(), 1.0, [1, 1, 1]))
    }

    pub fn at_voxel(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    fn lattice_bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let lo = self.origin + Vector3::repeat(0.5 * self.resolution);
        let hi = self.origin
            + Vector3::new(
                self.dims[0] as f64 - 0.5,
                self.dims[1] as f64 - 0.5,
                self.dims[2] as f64 - 0.5,
            ) * self.resolution;
        (lo, hi)
    }

    /// Trilinear value and gradient inside the voxel-center lattice.
    fn interpolate(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut step = [0usize; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.resolution - 0.5;
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let u = u.clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = u - i0 as f64;
            step[a] = 1;
        }
        let mut c = [[[0.0; 2]; 2]; 2];
        for (di, plane) in c.iter_mut().enumerate() {
            for (dj, row) in plane.iter_mut().enumerate() {
                for (dk, v) in row.iter_mut().enumerate() {
                    *v = self.at_voxel(
                        base[0] + di * step[0],
                        base[1] + dj * step[1],
                        base[2] + dk * step[2],
                    );
                }
            }
        }
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(c[0][0][0], c[1][0][0], fx);
        let c10 = lerp(c[0][1][0], c[1][1][0], fx);
        let c01 = lerp(c[0][0][1], c[1][0][1], fx);
        let c11 = lerp(c[0][1][1], c[1][1][1], fx);
        let c0 = lerp(c00, c10, fy);
        let c1 = lerp(c01, c11, fy);
        let value = lerp(c0, c1, fz);

        let inv = 1.0 / self.resolution;
        let dx = {
            let d00 = c[1][0][0] - c[0][0][0];
            let d10 = c[1][1][0] - c[0][1][0];
            let d01 = c[1][0][1] - c[0][0][1];
            let d11 = c[1][1][1] - c[0][1][1];
            lerp(lerp(d00, d10, fy), lerp(d01, d11, fy), fz)
        };
        let dy = lerp(c10 - c00, c11 - c01, fz);
        let dz = c1 - c0;
        let mut grad = Vector3::new(dx, dy, dz) * inv;
        for a in 0..3 {
            if step[a] == 0 {
                grad[a] = 0.0;
            }
        }
        (value, grad)
    }

    /// Signed distance at `p` with its spatial gradient. Outside the
    /// lattice the boundary value plus the distance to the lattice box is
    /// returned.
    pub fn query_with_gradient(&self, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (lo, hi) = self.lattice_bounds();
        let clamped = Vector3::new(
            p.x.clamp(lo.x, hi.x),
            p.y.clamp(lo.y, hi.y),
            p.z.clamp(lo.z, hi.z),
        );
        let (v, mut g) = self.interpolate(&clamped);
        let offset = p - clamped;
        let out = offset.norm();
        if out > 0.0 {
            for a in 0..3 {
                if offset[a] != 0.0 {
                    g[a] = 0.0;
                }
            }
            (v + out, g + offset / out)
        } else {
            (v, g)
        }
    }

    pub fn query(&self, p: &Vector3<f64>) -> f64 {
        self.query_with_gradient(p).0
    }
}

/// Pooled-occupancy scene descriptor with a fixed 32-dim layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFeature(pub [f64; SCENE_FEATURE_DIM]);

impl Default for SceneFeature {
    fn default() -> Self {
        SceneFeature([0.0; SCENE_FEATURE_DIM])
    }
}

fn block_range(n: usize, blocks: usize, b: usize) -> std::ops::Range<usize> {
    (b * n / blocks)..((b + 1) * n / blocks)
}

/// Occupancy fraction of each cell of a 4×4×2 block partition. Entry
/// `(bx·4 + by)·2 + bz`; blocks split voxel indices as evenly as possible.
pub fn featurize(g: &OccupancyGrid) -> SceneFeature {
    let mut out = [0.0; SCENE_FEATURE_DIM];
    for bx in 0..BLOCKS[0] {
        for by in 0..BLOCKS[1] {
            for bz in 0..BLOCKS[2] {
                let (mut occ, mut total) = (0usize, 0usize);
                for k in block_range(g.dims[2], BLOCKS[2], bz) {
                    for j in block_range(g.dims[1], BLOCKS[1], by) {
                        for i in block_range(g.dims[0], BLOCKS[0], bx) {
                            total += 1;
                            occ += g.get(i, j, k) as usize;
                        }
                    }
                }
                if total > 0 {
                    out[(bx * BLOCKS[1] + by) * BLOCKS[2] + bz] = occ as f64 / total as f64;
                }
            }
        }
    }
    SceneFeature(out)
}

/// Random tabletop: one slab with its top at 0.4–0.9 m plus 1–5 boxes or
/// cylinders standing on it. Deterministic per seed.
pub fn synth_tabletop(seed: u64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = OccupancyGrid::default_workspace();
    let top = rng.random_range(0.4..0.9);
    let thickness = 0.04;
    let x0: f64 = rng.random_range(0.5..0.8);
    let x1: f64 = (x0 + rng.random_range(0.3..0.6)).min(1.2);
    let yc = rng.random_range(-0.15..0.15);
    let yh = rng.random_range(0.25..0.6);
    let table = Primitive::Box {
        center: [0.5 * (x0 + x1), yc, top - 0.5 * thickness],
        half_extents: [0.5 * (x1 - x0), yh, 0.5 * thickness],
    };
    grid.add_primitive(&table);
    let n_objects = rng.random_range(1..=5);
    for _ in 0..n_objects {
        let cx = rng.random_range(x0 + 0.05..x1 - 0.05);
        let cy = rng.random_range(yc - yh + 0.05..yc + yh - 0.05);
        let obj = if rng.random_bool(0.5) {
            let h = rng.random_range(0.02..0.10);
            Primitive::Box {
                center: [cx, cy, top + h],
                half_extents: [
                    rng.random_range(0.02..0.08),
                    rng.random_range(0.02..0.08),
                    h,
                ],
            }
        } else {
            let h = rng.random_range(0.025..0.125);
            Primitive::Cylinder {
                center: [cx, cy, top + h],
                radius: rng.random_range(0.02..0.06),
                half_height: h,
            }
        };
        grid.add_primitive(&obj);
    }
    grid
}

/// Grid plus its derived SDF and scene feature.
#[derive(Debug, Clone)]
pub struct World {
    pub grid: OccupancyGrid,
    pub sdf: Sdf,
    pub feature: SceneFeature,
    empty: bool,
}

impl World {
    pub fn new(grid: OccupancyGrid) -> Self {
        let sdf = Sdf::build(&grid);
        let feature = featurize(&grid);
        let empty = grid.is_empty();
        World {
            grid,
            sdf,
            feature,
            empty,
        }
    }

    pub fn empty() -> Self {
        Self::new(OccupancyGrid::default_workspace())
    }

    pub fn has_obstacles(&self) -> bool {
        !self.empty
    }
}

/// Base-frame collision spheres: `(link, center, radius)`.
pub fn sphere_centers(m: &RobotModel, state: &ChainState) -> Vec<(usize, Vector3<f64>, f64)> {
    let mut out = Vec::new();
    for (link, pose) in state.links.0.iter().enumerate() {
        for s in m.link_spheres(link) {
            out.push((link, pose.transform_point(&s.center()), s.radius));
        }
    }
    out
}

pub fn spheres_hit_world(spheres: &[(usize, Vector3<f64>, f64)], sdf: &Sdf) -> bool {
    spheres.iter().any(|(_, c, r)| sdf.query(c) < *r)
}

/// Overlap between spheres of links that are not kinematically adjacent.
pub fn spheres_self_collide(spheres: &[(usize, Vector3<f64>, f64)]) -> bool {
    for (a, (la, ca, ra)) in spheres.iter().enumerate() {
        for (lb, cb, rb) in &spheres[a + 1..] {
            if la.abs_diff(*lb) > 1 && (ca - cb).norm() < ra + rb {
                return true;
            }
        }
    }
    false
}

/// True if any collision sphere penetrates the world.
pub fn in_collision(m: &RobotModel, q: &JointConfig, sdf: &Sdf) -> Result<bool> {
    let s = ChainState::compute(m, q)?;
    Ok(spheres_hit_world(&sphere_centers(m, &s), sdf))
}

pub fn self_collision(m: &RobotModel, q: &JointConfig) -> Result<bool> {
    let s = ChainState::compute(m, q)?;
    Ok(spheres_self_collide(&sphere_centers(m, &s)))
}

/// World or self collision.
pub fn any_collision(m: &RobotModel, state: &ChainState, world: &World) -> bool {
    let spheres = sphere_centers(m, state);
    (world.has_obstacles() && spheres_hit_world(&spheres, &world.sdf)) || spheres_self_collide(&spheres)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(g: &OccupancyGrid) -> Vec<f64> {
        let [nx, ny, nz] = g.dims;
        let mut out = vec![0.0; g.len()];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let me = g.get(i, j, k);
                    let mut best = u64::MAX;
                    for c in 0..nz {
                        for b in 0..ny {
                            for a in 0..nx {
                                if g.get(a, b, c) != me {
                                    let d = (a.abs_diff(i).pow(2)
                                        + b.abs_diff(j).pow(2)
                                        + c.abs_diff(k).pow(2))
                                        as u64;
                                    best = best.min(d);
                                }
                            }
                        }
                    }
                    let d = (best as f64).sqrt() * g.resolution;
                    out[g.index(i, j, k)] = if me { -d } else { d };
                }
            }
        }
        out
    }

    fn random_grid(seed: u64, dims: [usize; 3], p: f64) -> OccupancyGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = OccupancyGrid::new(Vector3::zeros(), 0.02, dims);
        for o in g.occupied.iter_mut() {
            *o = rng.random_bool(p);
        }
        g
    }

    #[test]
    fn sdf_matches_brute_force_exactly() {
        for (seed, dims, p) in [
            (0, [9, 7, 5], 0.1),
            (1, [12, 12, 12], 0.02),
            (2, [1, 10, 6], 0.3),
            (3, [6, 1, 1], 0.5),
        ] {
            let g = random_grid(seed, dims, p);
            if g.occupied_count() == 0 || g.occupied_count() == g.len() {
                continue;
            }
            let sdf = Sdf::build(&g);
            assert_eq!(sdf.values, brute_force(&g), "seed {seed}");
        }
    }

    #[test]
    fn single_voxel_sdf() {
        let mut g = OccupancyGrid::new(Vector3::zeros(), 0.02, [5, 5, 5]);
        g.set(2, 2, 2, true);
        let sdf = Sdf::build(&g);
        assert_eq!(sdf.at_voxel(3, 2, 2), 0.02);
        assert!(sdf.at_voxel(2, 2, 2) <= 0.0);
        assert!((sdf.query(&g.voxel_center(3, 2, 2)) - 0.02).abs() < 1e-12);
        assert!(sdf.query(&g.voxel_center(2, 2, 2)) <= 0.0);
    }

    #[test]
    fn empty_grid_is_sentinel() {
        let g = OccupancyGrid::new(Vector3::zeros(), 0.02, [4, 4, 4]);
        let sdf = Sdf::build(&g);
        assert!(sdf.values.iter().all(|&v| v == SDF_SENTINEL));
        assert_eq!(sdf.query(&Vector3::new(0.03, 0.03, 0.03)), SDF_SENTINEL);
    }

    #[test]
    fn sdf_lipschitz_on_centers() {
        let g = random_grid(9, [10, 10, 10], 0.05);
        let sdf = Sdf::build(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2000 {
            let a = [rng.random_range(0..10), rng.random_range(0..10), rng.random_range(0..10)];
            let b = [rng.random_range(0..10), rng.random_range(0..10), rng.random_range(0..10)];
            let pa = g.voxel_center(a[0], a[1], a[2]);
            let pb = g.voxel_center(b[0], b[1], b[2]);
            let diff = (sdf.at_voxel(a[0], a[1], a[2]) - sdf.at_voxel(b[0], b[1], b[2])).abs();
            assert!(diff <= (pa - pb).norm() + 2.0 * g.resolution + 1e-12);
        }
    }

    #[test]
    fn query_outside_bounds_is_conservative() {
        let mut g = OccupancyGrid::new(Vector3::zeros(), 0.1, [3, 3, 3]);
        g.set(1, 1, 1, true);
        let sdf = Sdf::build(&g);
        let edge = g.voxel_center(2, 1, 1);
        let outside = edge + Vector3::new(0.3, 0.0, 0.0);
        assert!((sdf.query(&outside) - (sdf.query(&edge) + 0.3)).abs() < 1e-12);
        let (_, grad) = sdf.query_with_gradient(&outside);
        assert!((grad.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn query_gradient_matches_finite_differences() {
        let g = random_grid(5, [8, 8, 8], 0.05);
        let sdf = Sdf::build(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-7;
        for _ in 0..200 {
            // stay off cell boundaries so the interpolant is smooth
            let p = Vector3::new(
                (rng.random_range(0..7) as f64 + 0.5 + rng.random_range(0.1..0.9)) * 0.02,
                (rng.random_range(0..7) as f64 + 0.5 + rng.random_range(0.1..0.9)) * 0.02,
                (rng.random_range(0..7) as f64 + 0.5 + rng.random_range(0.1..0.9)) * 0.02,
            );
            let (_, grad) = sdf.query_with_gradient(&p);
            for a in 0..3 {
                let mut e = Vector3::zeros();
                e[a] = h;
                let fd = (sdf.query(&(p + e)) - sdf.query(&(p - e))) / (2.0 * h);
                assert!((fd - grad[a]).abs() < 1e-6, "{fd} vs {}", grad[a]);
            }
        }
    }

    #[test]
    fn featurize_examples() {
        let g = OccupancyGrid::default_workspace();
        assert_eq!(featurize(&g), SceneFeature::default());
        let mut full = g.clone();
        full.fill_where(|_| true);
        assert!(featurize(&full).0.iter().all(|&v| v == 1.0));

        // fill the lower half (in z) of block (1, 2, 0)
        let mut half = g.clone();
        let (xr, yr, zr) = (
            block_range(50, 4, 1),
            block_range(70, 4, 2),
            block_range(50, 2, 0),
        );
        let voxels = xr.len() * yr.len() * zr.len();
        let zcut = zr.start + zr.len() / 2;
        for k in zr.start..zcut {
            for j in yr.clone() {
                for i in xr.clone() {
                    half.set(i, j, k, true);
                }
            }
        }
        let f = featurize(&half);
        let idx = (4 + 2) * 2;
        assert!((f.0[idx] - 0.5).abs() <= 1.0 / voxels as f64 + (yr.len() * xr.len()) as f64 / voxels as f64);
        for (k, v) in f.0.iter().enumerate() {
            if k != idx {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn tabletop_is_deterministic_and_sane() {
        assert_eq!(synth_tabletop(7), synth_tabletop(7));
        assert_ne!(synth_tabletop(7), synth_tabletop(8));
        for seed in 0..20 {
            let g = synth_tabletop(seed);
            let frac = g.occupancy_fraction();
            assert!(frac > 0.0 && frac < 0.5, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn tabletop_slab_is_rasterized() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let top = rng.random_range(0.4..0.9);
        let x0: f64 = rng.random_range(0.5..0.8);
        let x1: f64 = (x0 + rng.random_range(0.3..0.6)).min(1.2);
        let yc: f64 = rng.random_range(-0.15..0.15);
        let g = synth_tabletop(42);
        // a voxel center just under the top surface, in the middle of the slab
        let z = top - 0.01;
        let p = Vector3::new(0.5 * (x0 + x1), yc, z);
        let idx = ((p - g.origin) / g.resolution).map(|v| v.floor() as usize);
        let center = g.voxel_center(idx.x, idx.y, idx.z);
        if (center.z - (top - 0.02)).abs() <= 0.02 {
            assert!(g.get(idx.x, idx.y, idx.z));
        }
    }

    #[test]
    fn grid_file_round_trip() {
        let g = synth_tabletop(3);
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"OCCG");
        let back = OccupancyGrid::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        buf[0] = b'X';
        assert!(OccupancyGrid::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn primitive_json_import() {
        let text = r#"{"primitives": [
            {"type": "box", "center": [0.7, 0.0, 0.5], "half_extents": [0.1, 0.1, 0.1]},
            {"type": "cylinder", "center": [0.5, 0.3, 0.5], "radius": 0.05, "half_height": 0.1}
        ]}"#;
        let g = OccupancyGrid::from_primitives_json(text).unwrap();
        assert_eq!(g.dims, [50, 70, 50]);
        assert!(g.occupied_count() > 0);
        let sdf = Sdf::build(&g);
        assert!(sdf.query(&Vector3::new(0.71, 0.01, 0.51)) < 0.0);
    }

    #[test]
    fn collision_queries() {
        let m = RobotModel::default_model();
        let q = JointConfig::zeros(m.dof());
        let w = World::empty();
        assert!(!in_collision(&m, &q, &w.sdf).unwrap());
        assert!(!self_collision(&m, &q).unwrap());

        // block around the elbow sphere
        let s = ChainState::compute(&m, &q).unwrap();
        let spheres = sphere_centers(&m, &s);
        let (_, c, _) = spheres[3];
        let mut g = OccupancyGrid::default_workspace();
        g.add_primitive(&Primitive::Box {
            center: [c.x, c.y, c.z],
            half_extents: [0.06, 0.06, 0.06],
        });
        let w = World::new(g);
        assert!(in_collision(&m, &q, &w.sdf).unwrap());
    }

    #[test]
    fn inflating_spheres_never_clears_a_collision() {
        let m = RobotModel::default_model();
        let w = World::new(synth_tabletop(1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let q = m.random_config(&mut rng);
            let s = ChainState::compute(&m, &q).unwrap();
            let spheres = sphere_centers(&m, &s);
            let inflated: Vec<_> = spheres.iter().map(|&(l, c, r)| (l, c, r + 0.03)).collect();
            if spheres_hit_world(&spheres, &w.sdf) {
                assert!(spheres_hit_world(&inflated, &w.sdf));
            }
            if spheres_self_collide(&spheres) {
                assert!(spheres_self_collide(&inflated));
            }
        }
    }

    #[test]
    fn adjacent_links_are_excluded() {
        // overlapping spheres on links 2 and 3 are adjacent and ignored
        let s = vec![
            (2, Vector3::zeros(), 0.1),
            (3, Vector3::new(0.05, 0.0, 0.0), 0.1),
        ];
        assert!(!spheres_self_collide(&s));
        let s = vec![
            (2, Vector3::zeros(), 0.1),
            (4, Vector3::new(0.05, 0.0, 0.0), 0.1),
        ];
        assert!(spheres_self_collide(&s));
    }
}
