use crate::filtering::SeedSet;
use crate::volume::ScalarVolume;

pub const ALIGN_STEP: f64 = 0.5;
pub const ALIGN_ITERATIONS: usize = 10;
pub const ALIGN_RADIUS: f64 = 2.0;

/// Central-difference gradient, clamped at the border, interpolated trilinearly.
fn gradient_at(v: &ScalarVolume, p: [f64; 3]) -> [f64; 3] {
    let d = v.dims();
    let mut base = [0i64; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let x = p[a].clamp(0.0, (d[a] - 1) as f64);
        base[a] = x.floor() as i64;
        t[a] = x - x.floor();
    }
    let grad = |q: [i64; 3]| -> [f64; 3] {
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate() {
            let mut lo = q;
            let mut hi = q;
            lo[a] = (q[a] - 1).max(0);
            hi[a] = (q[a] + 1).min(d[a] as i64 - 1);
            let span = (hi[a] - lo[a]) as f64;
            if span > 0.0 {
                *ga = (v.get_clamped(hi[0], hi[1], hi[2]) - v.get_clamped(lo[0], lo[1], lo[2])) / span;
            }
        }
        g
    };
    let mut out = [0.0; 3];
    for corner in 0..8 {
        let mut w = 1.0;
        let mut q = base;
        for a in 0..3 {
            let bit = (corner >> a) & 1;
            q[a] = (base[a] + bit as i64).min(d[a] as i64 - 1);
            w *= if bit == 1 { t[a] } else { 1.0 - t[a] };
        }
        if w == 0.0 {
            continue;
        }
        let g = grad(q);
        for a in 0..3 {
            out[a] += w * g[a];
        }
    }
    out
}

/// Moves every seed uphill on the CVM in steps of `ALIGN_STEP` voxels along
/// the interpolated gradient, at most `ALIGN_ITERATIONS` times and never
/// farther than `ALIGN_RADIUS` from its start. A step is taken only if it
/// raises the interpolated CVM, so seeds on a ridge stay put. The result is
/// rounded to voxels and seeds landing on the same voxel keep the first.
pub fn align_seeds(seeds: &SeedSet, cvm: &ScalarVolume) -> SeedSet {
    let d = cvm.dims();
    let mut out = SeedSet::default();
    let mut taken = std::collections::HashSet::new();
    for (i, s) in seeds.voxels.iter().enumerate() {
        let start = s.map(|x| x as f64);
        let mut p = start;
        let mut val = cvm.sample_trilinear(p);
        for _ in 0..ALIGN_ITERATIONS {
            let g = gradient_at(cvm, p);
            let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if !(norm > 0.0) {
                break;
            }
            let mut q = [0.0; 3];
            for a in 0..3 {
                q[a] = (p[a] + ALIGN_STEP * g[a] / norm).clamp(0.0, (d[a] - 1) as f64);
            }
            let off: Vec<f64> = (0..3).map(|a| q[a] - start[a]).collect();
            let r = off.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r > ALIGN_RADIUS {
                for a in 0..3 {
                    q[a] = start[a] + off[a] * ALIGN_RADIUS / r;
                }
            }
            let qv = cvm.sample_trilinear(q);
            if !(qv > val) {
                break;
            }
            p = q;
            val = qv;
        }
        let v = [0, 1, 2].map(|a| (p[a].round() as usize).min(d[a] - 1));
        if taken.insert(v) {
            out.voxels.push(v);
            out.orientations.push(seeds.orientations[i]);
            out.strength.push(seeds.strength[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat3;
    use crate::volume::Grid;

    fn tube() -> ScalarVolume {
        ScalarVolume::from_fn(Grid::cube(16), |p| {
            let d2 = (p[1] as f64 - 8.0).powi(2) + (p[2] as f64 - 8.0).powi(2);
            (-d2 / (2.0 * 1.5 * 1.5)).exp()
        })
    }

    fn seeds(v: &[[usize; 3]]) -> SeedSet {
        SeedSet { voxels: v.to_vec(), orientations: vec![Mat3::identity(); v.len()], strength: vec![1.0; v.len()] }
    }

    #[test]
    fn ridge_seed_stays() {
        let out = align_seeds(&seeds(&[[5, 8, 8]]), &tube());
        assert_eq!(out.voxels, vec![[5, 8, 8]]);
    }

    #[test]
    fn off_axis_seed_lands_on_axis() {
        for s in [[5, 9, 8], [5, 7, 9], [5, 9, 9]] {
            let out = align_seeds(&seeds(&[s]), &tube());
            let v = out.voxels[0];
            let off = ((v[1] as f64 - 8.0).powi(2) + (v[2] as f64 - 8.0).powi(2)).sqrt();
            assert!(off <= 0.5, "{s:?} -> {v:?}");
            assert_eq!(v[0], 5);
        }
    }

    #[test]
    fn converging_seeds_collapse() {
        let out = align_seeds(&seeds(&[[5, 9, 8], [5, 7, 8], [5, 8, 8]]), &tube());
        assert_eq!(out.voxels, vec![[5, 8, 8]]);
        assert_eq!(out.strength.len(), 1);
    }

    #[test]
    fn motion_is_bounded() {
        // a far peak pulls but the seed stops at the radius
        let v = ScalarVolume::from_fn(Grid::cube(16), |p| -((p[0] as f64 - 15.0).abs()));
        let out = align_seeds(&seeds(&[[2, 5, 5]]), &v);
        assert_eq!(out.voxels, vec![[4, 5, 5]]);
    }
}
