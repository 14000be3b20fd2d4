use super::simplex::{neighbour_slots, offset_of};
use crate::error::{Error, Result};
use crate::volume::{Grid, ScalarVolume};

/// 26-connected voxel polyline with its integral geodesic length.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub voxels: Vec<[usize; 3]>,
    /// `∫ u dπ`, trapezoidal over the polyline segments.
    pub length_u: f64,
}

impl Path {
    /// Path through `voxels` with `length_u` integrated from the values `u`.
    pub fn new(voxels: Vec<[usize; 3]>, u: &[f64], grid: &Grid) -> Self {
        let length_u = voxels
            .windows(2)
            .map(|w| {
                let d: f64 = (0..3).map(|a| (w[0][a] as f64 - w[1][a] as f64).powi(2)).sum();
                0.5 * d.sqrt() * (u[grid.index_of(w[0])] + u[grid.index_of(w[1])])
            })
            .sum();
        Path { voxels, length_u }
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Steepest discrete descent on `u` from `start` through voxels accepted by
/// `ok`: each step takes the neighbour with the largest drop per unit length
/// (ties by index) until a source (`u = 0`) is reached. With `order`, a
/// neighbour of equal `u` but earlier order also counts as downhill.
pub(crate) fn descend(
    grid: &Grid,
    u: &[f64],
    start: usize,
    ok: impl Fn(usize) -> bool,
    order: Option<&[usize]>,
) -> Result<Vec<usize>> {
    if !u[start].is_finite() {
        return Err(Error::param("start", format!("{:?} has no finite distance", grid.coords(start))));
    }
    let mut out = vec![start];
    let mut x = start;
    while u[x] > 0.0 {
        let c = grid.coords(x);
        let mut best: Option<(f64, usize)> = None;
        for s in neighbour_slots() {
            let o = offset_of(s);
            let Some(n) = grid.offset(c, o) else { continue };
            let downhill = u[n] < u[x] || (u[n] == u[x] && order.is_some_and(|o| o[n] < o[x]));
            if !ok(n) || !downhill {
                continue;
            }
            let len = ((o[0] * o[0] + o[1] * o[1] + o[2] * o[2]) as f64).sqrt();
            let slope = (u[x] - u[n]) / len;
            if best.is_none_or(|(bs, bn)| slope > bs || (slope == bs && n < bn)) {
                best = Some((slope, n));
            }
        }
        match best {
            Some((_, n)) => {
                out.push(n);
                x = n;
            }
            None => return Err(Error::DescentStuck { voxel: c, u: u[x] }),
        }
    }
    Ok(out)
}

/// Back-traces a minimal path from `start` to the nearest source, the
/// sources being the voxels where `u = 0`.
pub fn trace_path(u: &ScalarVolume, start: [usize; 3]) -> Result<Path> {
    let grid = u.grid();
    if (0..3).any(|a| start[a] >= grid.dims[a]) {
        return Err(Error::param("start", format!("{start:?} outside dims {:?}", grid.dims)));
    }
    let d = u.data();
    let idx = descend(grid, d, grid.index_of(start), |n| d[n].is_finite(), None)?;
    Ok(Path::new(idx.into_iter().map(|i| grid.coords(i)).collect(), d, grid))
}

/// Joins two half-paths traced from adjacent collision voxels into one path
/// running from the first source to the second.
pub fn join_halves(a: &Path, b: &Path, u: &[f64], grid: &Grid) -> Path {
    let mut voxels: Vec<[usize; 3]> = a.voxels.iter().rev().copied().collect();
    voxels.extend_from_slice(&b.voxels);
    Path::new(voxels, u, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclidean(n: usize, src: [usize; 3]) -> ScalarVolume {
        ScalarVolume::from_fn(Grid::cube(n), |p| {
            (0..3).map(|a| (p[a] as f64 - src[a] as f64).powi(2)).sum::<f64>().sqrt()
        })
    }

    #[test]
    fn source_start_is_a_single_voxel() {
        let u = euclidean(8, [3, 3, 3]);
        let p = trace_path(&u, [3, 3, 3]).unwrap();
        assert_eq!(p.voxels, vec![[3, 3, 3]]);
        assert_eq!(p.length_u, 0.0);
    }

    #[test]
    fn aligned_source_gives_a_straight_line() {
        let u = euclidean(12, [2, 5, 5]);
        let p = trace_path(&u, [9, 5, 5]).unwrap();
        let expect: Vec<[usize; 3]> = (2..=9).rev().map(|x| [x, 5, 5]).collect();
        assert_eq!(p.voxels, expect);
        // trapezoid of u = x over [0, 7]
        assert!((p.length_u - 24.5).abs() < 1e-12);
        let diag = trace_path(&u, [6, 9, 1]).unwrap();
        assert_eq!(diag.voxels.len(), 5);
        for w in diag.voxels.windows(2) {
            assert!((0..3).all(|a| w[0][a].abs_diff(w[1][a]) <= 1));
        }
    }

    #[test]
    fn stuck_descent_is_reported() {
        let mut u = euclidean(8, [1, 1, 1]);
        // a pit with no source
        u.set([5, 5, 5], 0.5);
        for p in [[4, 4, 4], [5, 5, 4], [6, 6, 6]] {
            assert!(u.at(p) > 0.5);
        }
        match trace_path(&u, [5, 5, 5]) {
            Err(Error::DescentStuck { voxel, .. }) => assert_eq!(voxel, [5, 5, 5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_revisits() {
        let u = euclidean(10, [0, 0, 0]);
        let finite = u.data().iter().filter(|x| x.is_finite()).count();
        let p = trace_path(&u, [9, 4, 7]).unwrap();
        assert!(p.len() <= finite);
        let mut seen = p.voxels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), p.len());
    }
}
