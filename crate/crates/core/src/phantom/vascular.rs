use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dist, render, segment_distance, Branch, CenterlineGT, Curve};
use crate::error::{Error, Result};
use crate::volume::{Grid, ScalarVolume};

pub const MIN_RADIUS: f64 = 1.0;
pub const MAX_RADIUS: f64 = 4.0;
const ROOT_RADIUS: f64 = 3.0;
const MIN_ANGLE_DEG: f64 = 20.0;
const MAX_ANGLE_DEG: f64 = 70.0;
const MIN_LENGTH: f64 = 7.0;
/// Free space kept between tube surfaces of unrelated branches.
const CLEARANCE: f64 = 2.5;
const ATTEMPTS_PER_LEAF: usize = 40;

#[derive(Clone, Debug)]
struct Segment {
    a: [f64; 3],
    b: [f64; 3],
    r: f64,
    from: usize,
    to: usize,
}

impl Segment {
    fn len(&self) -> f64 {
        dist(self.a, self.b)
    }

    fn dir(&self) -> [f64; 3] {
        let l = self.len();
        [0, 1, 2].map(|k| (self.b[k] - self.a[k]) / l)
    }
}

/// Approximate segment-to-segment distance by sampling one of them.
fn segments_distance(s: &Segment, t: &Segment) -> f64 {
    (0..=16)
        .map(|i| {
            let f = i as f64 / 16.0;
            let p = [0, 1, 2].map(|k| s.a[k] + f * (s.b[k] - s.a[k]));
            segment_distance(p, t.a, t.b).0
        })
        .fold(f64::INFINITY, f64::min)
}

fn unit_perpendicular(d: [f64; 3], phi: f64) -> [f64; 3] {
    let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let e1 = cross(d, helper);
    let n1 = dist(e1, [0.0; 3]);
    let e1 = e1.map(|x| x / n1);
    let e2 = cross(d, e1);
    [0, 1, 2].map(|k| phi.cos() * e1[k] + phi.sin() * e2[k])
}

fn fits(s: &Segment, dims: usize) -> bool {
    let m = s.r + 2.0;
    s.b.iter().all(|&x| x >= m && x <= dims as f64 - 1.0 - m)
}

/// Random bifurcating tree: a root trunk entering from the `y = 0` side,
/// split `n_terminals − 2` times at angles in [20°, 70°] with Murray's-law
/// radii clamped to [1, 4]. Terminals count the root's free end.
pub fn generate_tree_volume(rng_seed: u64, n_terminals: usize, dims: usize) -> Result<(ScalarVolume, CenterlineGT)> {
    if !(3..=30).contains(&n_terminals) {
        return Err(Error::param("n_terminals", format!("{n_terminals} not in [3, 30]")));
    }
    if dims < 32 {
        return Err(Error::param("dims", format!("{dims} below the 32-voxel minimum")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nf = dims as f64;
    let start = [rng.random_range(nf / 3.0..2.0 * nf / 3.0), 4.0, rng.random_range(nf / 3.0..2.0 * nf / 3.0)];
    let tilt = [rng.random_range(-0.2..0.2), 1.0, rng.random_range(-0.2..0.2)];
    let tl = dist(tilt, [0.0; 3]);
    let len = nf / 3.0;
    let mut nodes = vec![start, [0, 1, 2].map(|k| start[k] + len * tilt[k] / tl)];
    let mut segs = vec![Segment { a: nodes[0], b: nodes[1], r: ROOT_RADIUS, from: 0, to: 1 }];
    let mut leaves = vec![0usize];

    for _ in 0..n_terminals - 2 {
        let mut order = leaves.clone();
        // visit leaves in a random order, widest first on average
        order.sort_by(|&x, &y| segs[y].r.total_cmp(&segs[x].r).then(x.cmp(&y)));
        let k = rng.random_range(0..order.len().min(3));
        order.rotate_left(k);
        let mut placed = None;
        'leaf: for &leaf in &order {
            let parent = segs[leaf].clone();
            let d = parent.dir();
            for _ in 0..ATTEMPTS_PER_LEAF {
                let f: f64 = rng.random_range(0.3..0.7);
                let radii = [f, 1.0 - f].map(|q| (parent.r * q.cbrt()).clamp(MIN_RADIUS, MAX_RADIUS));
                let e = unit_perpendicular(d, rng.random_range(0.0..std::f64::consts::TAU));
                let mut kids = Vec::with_capacity(2);
                for (side, &r) in [1.0, -1.0].iter().zip(&radii) {
                    let th = rng.random_range(MIN_ANGLE_DEG..MAX_ANGLE_DEG).to_radians();
                    let l = (parent.len() * rng.random_range(0.65..0.9)).max(MIN_LENGTH);
                    let dir = [0, 1, 2].map(|k| th.cos() * d[k] + side * th.sin() * e[k]);
                    let b = [0, 1, 2].map(|k| parent.b[k] + l * dir[k]);
                    kids.push(Segment { a: parent.b, b, r, from: parent.to, to: 0 });
                }
                let clear = kids.iter().all(|kid| {
                    fits(kid, dims)
                        && segs.iter().enumerate().all(|(i, s)| i == leaf || segments_distance(kid, s) >= kid.r + s.r + CLEARANCE)
                });
                if clear {
                    placed = Some((leaf, kids));
                    break 'leaf;
                }
            }
        }
        let Some((leaf, kids)) = placed else {
            return Err(Error::Phantom(format!(
                "seed {rng_seed}: no room for another bifurcation after {} terminals",
                leaves.len() + 1
            )));
        };
        leaves.retain(|&l| l != leaf);
        for mut kid in kids {
            nodes.push(kid.b);
            kid.to = nodes.len() - 1;
            segs.push(kid);
            leaves.push(segs.len() - 1);
        }
    }

    let grid = Grid::cube(dims);
    let curves: Vec<Curve> = segs
        .iter()
        .map(|s| Curve::sample(|t| [0, 1, 2].map(|k| s.a[k] + t * (s.b[k] - s.a[k])), |_| s.r))
        .collect();
    let mut vol = ScalarVolume::zeros(grid);
    render(&mut vol, &curves);
    let gt = CenterlineGT {
        grid,
        nodes: nodes.iter().map(|p| p.map(|x| x.round() as usize)).collect(),
        branches: segs.iter().zip(&curves).map(|(s, c)| Branch { a: s.from, b: s.to, voxels: c.raster() }).collect(),
    };
    Ok((vol, gt))
}
