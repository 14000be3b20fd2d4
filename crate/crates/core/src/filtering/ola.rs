use super::SeedSet;
use crate::volume::{Grid, ScalarVolume};

/// One block of the 50%-overlap tiling. The origin can be negative; samples
/// outside the volume read as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct OlaBlock {
    pub origin: [i64; 3],
    /// Indices into the seed set of the seeds inside this block.
    pub seeds: Vec<usize>,
}

/// Block origins at `-edge/2 + m·edge/2` along each axis, so every voxel is
/// covered by exactly two blocks per axis.
#[derive(Clone, Debug)]
pub struct OlaGrid {
    pub edge: usize,
    pub dims: [usize; 3],
    pub blocks: Vec<OlaBlock>,
}

impl OlaGrid {
    pub fn new(dims: [usize; 3], edge: usize, seeds: &SeedSet) -> Self {
        let hop = edge / 2;
        let axis = |d: usize| -> Vec<i64> {
            let mut v = Vec::new();
            let mut o = -(hop as i64);
            while o < d as i64 {
                v.push(o);
                o += hop as i64;
            }
            v
        };
        let (ox, oy, oz) = (axis(dims[0]), axis(dims[1]), axis(dims[2]));
        let mut blocks = Vec::with_capacity(ox.len() * oy.len() * oz.len());
        for &z in &oz {
            for &y in &oy {
                for &x in &ox {
                    blocks.push(OlaBlock { origin: [x, y, z], seeds: Vec::new() });
                }
            }
        }
        let (nx, ny) = (ox.len(), oy.len());
        for (s, v) in seeds.voxels.iter().enumerate() {
            // the two blocks per axis covering coordinate c have m = c/hop and c/hop + 1
            let m = v.map(|c| c / hop);
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (bx, by, bz) = (m[0] + dx, m[1] + dy, m[2] + dz);
                        if bx < nx && by < ny && bz < oz.len() {
                            blocks[bx + nx * (by + ny * bz)].seeds.push(s);
                        }
                    }
                }
            }
        }
        OlaGrid { edge, dims, blocks }
    }
}

/// Separable Hann window `sin²(π(n + ½)/B)`; shifted by `B/2` it sums to one.
pub fn block_hann(edge: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..edge)
        .map(|n| (std::f64::consts::PI * (n as f64 + 0.5) / edge as f64).sin().powi(2))
        .collect();
    let mut out = Vec::with_capacity(edge * edge * edge);
    for k in 0..edge {
        for j in 0..edge {
            for i in 0..edge {
                out.push(w[i] * w[j] * w[k]);
            }
        }
    }
    out
}

/// Copies one block out of `v`, replicating edge voxels outside the volume.
pub fn extract_block(v: &ScalarVolume, origin: [i64; 3], edge: usize) -> ScalarVolume {
    ScalarVolume::from_fn(Grid { dims: [edge; 3], spacing: v.grid().spacing }, |p| {
        v.get_clamped(origin[0] + p[0] as i64, origin[1] + p[1] as i64, origin[2] + p[2] as i64)
    })
}

/// Sum of the Hann windows of every block, as placed by the tiling.
pub fn partition_of_unity(dims: [usize; 3], edge: usize) -> ScalarVolume {
    let hann = block_hann(edge);
    let grid = OlaGrid::new(dims, edge, &SeedSet::default());
    let mut out = ScalarVolume::zeros(Grid::unit(dims));
    for b in &grid.blocks {
        add_block(&mut out, b.origin, edge, &hann);
    }
    out
}

/// Adds a block-local field into a global volume, dropping samples outside it.
pub(crate) fn add_block(out: &mut ScalarVolume, origin: [i64; 3], edge: usize, local: &[f64]) {
    for_each_inside(out.dims(), origin, edge, |l, g| out.data_mut()[g] += local[l]);
}

/// Calls `f(local_index, global_index)` for each block voxel inside the volume.
pub(crate) fn for_each_inside(dims: [usize; 3], origin: [i64; 3], edge: usize, mut f: impl FnMut(usize, usize)) {
    for k in 0..edge {
        let gz = origin[2] + k as i64;
        if gz < 0 || gz as usize >= dims[2] {
            continue;
        }
        for j in 0..edge {
            let gy = origin[1] + j as i64;
            if gy < 0 || gy as usize >= dims[1] {
                continue;
            }
            for i in 0..edge {
                let gx = origin[0] + i as i64;
                if gx < 0 || gx as usize >= dims[0] {
                    continue;
                }
                let g = gx as usize + dims[0] * (gy as usize + dims[1] * gz as usize);
                f(i + edge * (j + edge * k), g);
            }
        }
    }
}
