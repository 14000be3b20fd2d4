//! Ground-truthed synthetic volumes: analytic tubes, random bifurcating trees
//! and their degradation by noise, shadows and salt-and-pepper.
//!
//! Intensity is `255·exp(−d²/2r²)` with `d` the distance to the centerline.
//! All coordinates are in voxels with the centerline through voxel centers.

mod noise;
mod shapes;
mod vascular;

pub use noise::{degrade, NoiseSpec};
pub use shapes::{make_phantom, PhantomKind, PhantomParams};
pub use vascular::{generate_tree_volume, MAX_RADIUS, MIN_RADIUS};

use crate::error::{Error, Result};
use crate::geodesic::{Edge, GeodesicTree, Path};
use crate::volume::{Grid, ScalarVolume};

pub const PEAK_INTENSITY: f64 = 255.0;

/// One GT branch: a 26-connected voxel polyline between two nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
    pub voxels: Vec<[usize; 3]>,
}

/// Rasterized centerlines and their branch topology.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineGT {
    pub grid: Grid,
    pub nodes: Vec<[usize; 3]>,
    pub branches: Vec<Branch>,
}

impl CenterlineGT {
    /// Every centerline voxel once, in index order.
    pub fn voxels(&self) -> Vec<[usize; 3]> {
        let mut idx: Vec<usize> = self
            .branches
            .iter()
            .flat_map(|b| b.voxels.iter().map(|&v| self.grid.index_of(v)))
            .chain(self.nodes.iter().map(|&v| self.grid.index_of(v)))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter().map(|i| self.grid.coords(i)).collect()
    }

    /// The same graph as a tree with `U_π = 0` on every edge.
    pub fn to_tree(&self) -> GeodesicTree {
        let mut t = GeodesicTree::new(self.grid);
        for &n in &self.nodes {
            t.add_node(n);
        }
        t.roots = if self.nodes.is_empty() { vec![] } else { vec![0] };
        t.edges = self
            .branches
            .iter()
            .map(|b| Edge { a: b.a, b: b.b, path: Path { voxels: b.voxels.clone(), length_u: 0.0 } })
            .collect();
        t
    }

    pub fn from_tree(t: &GeodesicTree) -> Result<Self> {
        if t.edges.is_empty() && t.nodes.is_empty() {
            return Err(Error::Empty("centerline graph".into()));
        }
        Ok(CenterlineGT {
            grid: t.grid,
            nodes: t.nodes.iter().map(|n| n.voxel).collect(),
            branches: t.edges.iter().map(|e| Branch { a: e.a, b: e.b, voxels: e.path.voxels.clone() }).collect(),
        })
    }
}

/// Continuous centerline curve with a radius at every vertex.
#[derive(Clone, Debug)]
pub(crate) struct Curve {
    pub points: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
}

impl Curve {
    /// Samples `f(t)` for `t ∈ [0, 1]` at roughly quarter-voxel spacing.
    pub fn sample(f: impl Fn(f64) -> [f64; 3], radius: impl Fn(f64) -> f64) -> Curve {
        let mut len = 0.0;
        let mut prev = f(0.0);
        for i in 1..=1000 {
            let p = f(i as f64 / 1000.0);
            len += dist(p, prev);
            prev = p;
        }
        let n = ((len * 4.0).ceil() as usize).max(2);
        let ts: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        Curve { points: ts.iter().map(|&t| f(t)).collect(), radii: ts.iter().map(|&t| radius(t)).collect() }
    }

    pub fn check_bounds(&self, n: [usize; 3]) -> Result<()> {
        for p in &self.points {
            if (0..3).any(|a| !(p[a] >= 0.0 && p[a] <= (n[a] - 1) as f64)) {
                return Err(Error::Phantom(format!("centerline point {p:?} leaves the {n:?} volume")));
            }
        }
        Ok(())
    }

    /// Rounded quarter-voxel samples thinned to a simple 26-connected line.
    pub fn raster(&self) -> Vec<[usize; 3]> {
        let mut out: Vec<[usize; 3]> = Vec::new();
        let mut push = |p: [f64; 3]| {
            let v = p.map(|x| x.round() as usize);
            if out.last() != Some(&v) {
                debug_assert!(out.last().is_none_or(|l| adjacent(l, &v)));
                // drop staircase corners so only consecutive voxels touch
                while out.len() >= 2 && adjacent(&out[out.len() - 2], &v) {
                    out.pop();
                }
                out.push(v);
            }
        };
        push(self.points[0]);
        for w in self.points.windows(2) {
            let steps = (dist(w[0], w[1]) * 4.0).ceil().max(1.0) as usize;
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                push([0, 1, 2].map(|k| w[0][k] + t * (w[1][k] - w[0][k])));
            }
        }
        out
    }
}

fn adjacent(a: &[usize; 3], b: &[usize; 3]) -> bool {
    (0..3).all(|k| a[k].abs_diff(b[k]) <= 1)
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance from `p` to segment `ab` and the segment parameter of the foot point.
pub(crate) fn segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if l2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (dist(p, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]), t)
}

/// Adds the tubes around `curves` into `vol`, keeping the brightest value.
pub(crate) fn render(vol: &mut ScalarVolume, curves: &[Curve]) {
    let dims = vol.dims();
    let grid = *vol.grid();
    for c in curves {
        for i in 0..c.points.len().saturating_sub(1) {
            let (a, b) = (c.points[i], c.points[i + 1]);
            let (ra, rb) = (c.radii[i], c.radii[i + 1]);
            let reach = 4.0 * ra.max(rb);
            let lo: Vec<usize> = (0..3).map(|k| (a[k].min(b[k]) - reach).floor().max(0.0) as usize).collect();
            let hi: Vec<usize> =
                (0..3).map(|k| ((a[k].max(b[k]) + reach).ceil().max(0.0) as usize).min(dims[k] - 1)).collect();
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let (d, t) = segment_distance([x as f64, y as f64, z as f64], a, b);
                        let r = ra + t * (rb - ra);
                        let val = PEAK_INTENSITY * (-d * d / (2.0 * r * r)).exp();
                        let idx = grid.index(x, y, z);
                        let slot = &mut vol.data_mut()[idx];
                        if val > *slot {
                            *slot = val;
                        }
                    }
                }
            }
        }
    }
}
