//! The 48 tetrahedra around a voxel and the local Hopf–Lax solve on them.

use std::sync::LazyLock;

use crate::linalg::SymMat3;

/// Offset of a neighbour, each component in {-1, 0, 1}.
pub type Offset = [i64; 3];

/// The 26 neighbour offsets, indexed by `slot(o)` minus the centre.
pub const fn slot(o: Offset) -> usize {
    ((o[0] + 1) + 3 * (o[1] + 1) + 9 * (o[2] + 1)) as usize
}

pub fn offset_of(slot: usize) -> Offset {
    [(slot % 3) as i64 - 1, ((slot / 3) % 3) as i64 - 1, (slot / 9) as i64 - 1]
}

/// Slots 0..27 except the centre.
pub fn neighbour_slots() -> impl Iterator<Item = usize> {
    (0..27).filter(|&s| s != 13)
}

/// Every octant contributes the six tetrahedra (face, edge, corner) obtained
/// by adding the unit axes one at a time in each order.
pub static SIMPLICES: LazyLock<Vec<[Offset; 3]>> = LazyLock::new(|| {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for oct in 0..8 {
        let sign = [0, 1, 2].map(|a| if (oct >> a) & 1 == 1 { -1 } else { 1 });
        for p in PERMS {
            let mut v = [0i64; 3];
            let mut tri = [[0i64; 3]; 3];
            for (t, &a) in p.iter().enumerate() {
                v[a] = sign[a];
                tri[t] = v;
            }
            out.push(tri);
        }
    }
    out
});

/// For each neighbour slot, the simplices containing it as `(this, other, other)`.
pub static INCIDENT: LazyLock<Vec<Vec<[usize; 3]>>> = LazyLock::new(|| {
    let mut inc = vec![Vec::new(); 27];
    for tri in SIMPLICES.iter() {
        let s = tri.map(slot);
        for t in 0..3 {
            inc[s[t]].push([s[t], s[(t + 1) % 3], s[(t + 2) % 3]]);
        }
    }
    inc
});

/// The 2-point sub-simplices (tetrahedron edges between neighbours) through
/// each slot, without repetition.
pub static INCIDENT_EDGES: LazyLock<Vec<Vec<usize>>> = LazyLock::new(|| {
    INCIDENT
        .iter()
        .map(|list| {
            let mut e: Vec<usize> = list.iter().flat_map(|t| [t[1], t[2]]).collect();
            e.sort_unstable();
            e.dedup();
            e
        })
        .collect()
});

fn vec_of(o: Offset) -> [f64; 3] {
    o.map(|x| x as f64)
}

/// Cost of travelling from the neighbour at `o` to the centre.
#[inline]
pub fn one_point(m: &SymMat3, u: f64, o: Offset) -> f64 {
    u + m.quad(&vec_of(o)).max(0.0).sqrt()
}

/// Minimum of `w₁u₁ + w₂u₂ + ‖w₁e₁ + w₂e₂‖_M` over the open edge; `None` when
/// the stationary point falls outside it (the endpoints are 1-point updates).
pub fn two_point(m: &SymMat3, u: [f64; 2], o: [Offset; 2]) -> Option<f64> {
    let e = o.map(vec_of);
    let g = [[m.quad(&e[0]), m.bilinear(&e[0], &e[1])], [m.bilinear(&e[1], &e[0]), m.quad(&e[1])]];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if !(det > 1e-14 * g[0][0] * g[1][1]) {
        return None;
    }
    let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
    solve(&inv, &u)
}

/// Same over the open triangle spanned by three neighbours.
pub fn three_point(m: &SymMat3, u: [f64; 3], o: [Offset; 3]) -> Option<f64> {
    let e = o.map(vec_of);
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            g[i][j] = m.bilinear(&e[i], &e[j]);
            g[j][i] = g[i][j];
        }
    }
    let c00 = g[1][1] * g[2][2] - g[1][2] * g[2][1];
    let c01 = g[1][2] * g[2][0] - g[1][0] * g[2][2];
    let c02 = g[1][0] * g[2][1] - g[1][1] * g[2][0];
    let det = g[0][0] * c00 + g[0][1] * c01 + g[0][2] * c02;
    if !(det > 1e-14 * g[0][0] * g[1][1] * g[2][2]) {
        return None;
    }
    let inv = [
        [c00 / det, (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det, (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det],
        [c01 / det, (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det, (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det],
        [c02 / det, (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det, (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det],
    ];
    solve(&inv, &u)
}

/// Stationary point of `uᵗw + √(wᵗGw)` on `Σw = 1` from `G⁻¹`. With
/// `a = 1ᵗG⁻¹1`, `b = 1ᵗG⁻¹u`, `c = uᵗG⁻¹u` the optimum value λ solves
/// `aλ² - 2bλ + c = 1`, and `w ∝ G⁻¹(λ1 - u)` must be non-negative.
fn solve<const N: usize>(inv: &[[f64; N]; N], u: &[f64; N]) -> Option<f64> {
    let mut gi1 = [0.0; N];
    let mut giu = [0.0; N];
    for i in 0..N {
        for j in 0..N {
            gi1[i] += inv[i][j];
            giu[i] += inv[i][j] * u[j];
        }
    }
    let a: f64 = gi1.iter().sum();
    let b: f64 = giu.iter().sum();
    let c: f64 = (0..N).map(|i| u[i] * giu[i]).sum();
    let disc = b * b - a * (c - 1.0);
    if !(a > 0.0) || !(disc > 0.0) {
        return None;
    }
    let lambda = (b + disc.sqrt()) / a;
    // every weight shares the positive factor 1/√disc
    if (0..N).any(|i| lambda * gi1[i] - giu[i] < 0.0) {
        return None;
    }
    Some(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedra_cover_the_octants() {
        assert_eq!(SIMPLICES.len(), 48);
        let per_kind = |n: i64| {
            let mut count = [0usize; 27];
            for tri in SIMPLICES.iter() {
                for o in tri {
                    if o.iter().map(|x| x.abs()).sum::<i64>() == n {
                        count[slot(*o)] += 1;
                    }
                }
            }
            count.iter().filter(|&&c| c > 0).map(|&c| c).collect::<Vec<_>>()
        };
        // faces lie in 8 tetrahedra, edges in 4, corners in 6
        assert_eq!(per_kind(1), vec![8; 6]);
        assert_eq!(per_kind(2), vec![4; 12]);
        assert_eq!(per_kind(3), vec![6; 8]);
        for tri in SIMPLICES.iter() {
            let kinds: Vec<i64> = tri.iter().map(|o| o.iter().map(|x| x.abs()).sum()).collect();
            assert_eq!(kinds, vec![1, 2, 3]);
        }
    }

    #[test]
    fn isotropic_updates() {
        let m = SymMat3::IDENTITY;
        assert_eq!(one_point(&m, 2.0, [1, 0, 0]), 3.0);
        // plane wave u(y) = -y·n whose characteristic crosses the edge midpoint
        let n = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        let v = two_point(&m, [-n[0], -n[0] - n[1]], [[1, 0, 0], [1, 1, 0]]);
        assert!(v.unwrap().abs() < 1e-12);
        // same through the inside of a triangle
        let d = [1.0, 0.6, 0.3];
        let norm = (1.0f64 + 0.36 + 0.09).sqrt();
        let o = [[1, 0, 0], [1, 1, 0], [1, 1, 1]];
        let u = o.map(|e| -(0..3).map(|a| e[a] as f64 * d[a]).sum::<f64>() / norm);
        let v = three_point(&m, u, o).unwrap();
        assert!(v.abs() < 1e-12, "{v}");
    }

    #[test]
    fn infeasible_stationary_point_is_rejected() {
        let m = SymMat3::IDENTITY;
        // second vertex far more expensive: optimum sits at the first vertex
        assert!(two_point(&m, [0.0, 5.0], [[1, 0, 0], [1, 1, 0]]).is_none());
    }

    #[test]
    fn scaling_the_metric_scales_the_cost() {
        let m = SymMat3::new(2.0, 0.3, -0.1, 1.5, 0.2, 1.0);
        let o = [[1, 0, 0], [1, 0, 1], [1, 1, 1]];
        let u = [0.3, 0.1, 0.6];
        if let Some(v) = three_point(&m, u, o) {
            let v4 = three_point(&m.scale(4.0), u.map(|x| 2.0 * x), o).unwrap();
            assert!((v4 - 2.0 * v).abs() < 1e-12);
        }
        let e = two_point(&m, u[..2].try_into().unwrap(), [o[0], o[1]]);
        let e4 = two_point(&m.scale(4.0), [0.6, 0.2], [o[0], o[1]]);
        assert_eq!(e.is_some(), e4.is_some());
    }
}
