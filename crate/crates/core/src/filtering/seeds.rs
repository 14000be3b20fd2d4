use super::SeedSet;
use crate::error::{Error, Result};
use crate::linalg::{eig_sym3, make_proper, SymMat3};
use crate::volume::ScalarVolume;

/// Eigenvalues up to this fraction of the largest magnitude count as negative.
const NEAR_ZERO: f64 = 1e-6;

/// Type-7 (linear interpolation) quantile of `values`; `values` is sorted in place.
pub fn quantile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let h = (values.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    Some(values[lo] + (h - lo as f64) * (values[hi] - values[lo]))
}

/// Central differences with the index clamped at the border.
fn gradient(v: &ScalarVolume, p: [usize; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (a, ga) in g.iter_mut().enumerate() {
        let d = v.dims()[a];
        let mut lo = p;
        let mut hi = p;
        lo[a] = p[a].saturating_sub(1);
        hi[a] = (p[a] + 1).min(d - 1);
        let span = (hi[a] - lo[a]) as f64;
        if span > 0.0 {
            *ga = (v.at(hi) - v.at(lo)) / span;
        }
    }
    g
}

fn hessian(v: &ScalarVolume, g: &[[f64; 3]], p: [usize; 3]) -> SymMat3 {
    let grid = v.grid();
    let mut h = [[0.0; 3]; 3];
    for a in 0..3 {
        let d = v.dims()[a];
        let mut lo = p;
        let mut hi = p;
        lo[a] = p[a].saturating_sub(1);
        hi[a] = (p[a] + 1).min(d - 1);
        let span = (hi[a] - lo[a]) as f64;
        if span == 0.0 {
            continue;
        }
        let (gl, gh) = (g[grid.index_of(lo)], g[grid.index_of(hi)]);
        for b in 0..3 {
            h[a][b] = (gh[b] - gl[b]) / span;
        }
    }
    let s = |a: usize, b: usize| 0.5 * (h[a][b] + h[b][a]);
    SymMat3::new(s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2))
}

/// Seeds are voxels where the normalized saliency gradient converges, the
/// Hessian is negative definite, and the saliency reaches the `p`-quantile of
/// its positive samples. Orientation is the Hessian eigenbasis (ascending
/// |λ|, so the first column follows the vessel), made right-handed.
pub fn detect_seeds(v_tube: &ScalarVolume, p: f64) -> Result<SeedSet> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("quantile", format!("{p} not in (0, 1)")));
    }
    let mut positive: Vec<f64> = v_tube.data().iter().copied().filter(|&x| x > 0.0).collect();
    let Some(threshold) = quantile(&mut positive, p) else {
        return Err(Error::NoSeeds { quantile: p });
    };
    let grid = *v_tube.grid();
    let n = grid.len();
    let grads: Vec<[f64; 3]> = (0..n).map(|i| gradient(v_tube, grid.coords(i))).collect();
    let unit: Vec<[f64; 3]> = grads
        .iter()
        .map(|g| {
            let m = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if m > 0.0 {
                [g[0] / m, g[1] / m, g[2] / m]
            } else {
                [0.0; 3]
            }
        })
        .collect();

    let mut seeds = SeedSet::default();
    for (i, &value) in v_tube.data().iter().enumerate() {
        if !(value > 0.0 && value >= threshold) {
            continue;
        }
        let p3 = grid.coords(i);
        let mut div = 0.0;
        for a in 0..3 {
            let d = grid.dims[a];
            let mut lo = p3;
            let mut hi = p3;
            lo[a] = p3[a].saturating_sub(1);
            hi[a] = (p3[a] + 1).min(d - 1);
            let span = (hi[a] - lo[a]) as f64;
            if span > 0.0 {
                div += (unit[grid.index_of(hi)][a] - unit[grid.index_of(lo)][a]) / span;
            }
        }
        if !(div < 0.0) {
            continue;
        }
        let h = hessian(v_tube, &grads, p3);
        let Ok(eig) = eig_sym3(&h) else { continue };
        // the along-axis eigenvalue of a straight tube is zero up to rounding
        let tol = NEAR_ZERO * eig.values[2].abs();
        if eig.values[2] < 0.0 && eig.values.iter().all(|&l| l < tol) {
            seeds.voxels.push(p3);
            seeds.orientations.push(make_proper(&eig.vectors));
            seeds.strength.push(value);
        }
    }
    if seeds.is_empty() {
        return Err(Error::NoSeeds { quantile: p });
    }
    Ok(seeds)
}
