//! Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower envelopes).

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

/// Distance (physical units, spacing applied) from every voxel to the nearest
/// foreground voxel (`value != 0`). Foreground voxels map to zero.
pub fn distance_transform(mask: &ScalarVolume) -> Result<ScalarVolume> {
    if !mask.data().iter().any(|&v| v != 0.0) {
        return Err(Error::Empty("distance transform of an empty mask".into()));
    }
    let grid = *mask.grid();
    let mut sq: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v != 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    for axis in 0..3 {
        let n = grid.dims[axis];
        let h2 = grid.spacing[axis] * grid.spacing[axis];
        let stride = match axis {
            0 => 1,
            1 => grid.dims[0],
            _ => grid.dims[0] * grid.dims[1],
        };
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut env = Envelope::new(n);
        for idx in 0..grid.len() {
            if grid.coords(idx)[axis] != 0 {
                continue;
            }
            for (t, l) in line.iter_mut().enumerate() {
                *l = sq[idx + t * stride];
            }
            env.transform(&line, h2, &mut out);
            for (t, o) in out.iter().enumerate() {
                sq[idx + t * stride] = *o;
            }
        }
    }
    ScalarVolume::new(grid, sq.into_iter().map(f64::sqrt).collect())
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            v: vec![0; n],
            z: vec![0.0; n + 1],
        }
    }

    /// `out[p] = min_q h2 (p - q)² + f[q]`.
    fn transform(&mut self, f: &[f64], h2: f64, out: &mut [f64]) {
        let n = f.len();
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let r = self.v[k as usize];
                let s = ((f[q] + h2 * (q * q) as f64) - (f[r] + h2 * (r * r) as f64))
                    / (2.0 * h2 * (q as f64 - r as f64));
                if s <= self.z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.v[k as usize] = q;
                self.z[k as usize] = s;
                self.z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
        let mut j = 0usize;
        for (p, o) in out.iter_mut().enumerate() {
            while self.z[j + 1] < p as f64 {
                j += 1;
            }
            let q = self.v[j];
            let d = p as f64 - q as f64;
            *o = h2 * d * d + f[q];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(mask: &ScalarVolume) -> Vec<f64> {
        let g = *mask.grid();
        let fg: Vec<[usize; 3]> = (0..g.len())
            .filter(|&i| mask.data()[i] != 0.0)
            .map(|i| g.coords(i))
            .collect();
        (0..g.len())
            .map(|i| {
                let p = g.coords(i);
                fg.iter()
                    .map(|q| {
                        (0..3)
                            .map(|a| {
                                let d = (p[a] as f64 - q[a] as f64) * g.spacing[a];
                                d * d
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .collect()
    }

    #[test]
    fn single_point() {
        let g = Grid::new([5, 6, 7], [1.0, 2.0, 0.5]).unwrap();
        let mut m = ScalarVolume::zeros(g);
        m.set([2, 3, 1], 1.0);
        let d = distance_transform(&m).unwrap();
        let e = ((4.0f64 - 2.0).powi(2) + ((0.0f64 - 3.0) * 2.0).powi(2) + ((6.0f64 - 1.0) * 0.5).powi(2)).sqrt();
        assert!((d.at([4, 0, 6]) - e).abs() < 1e-12);
        assert_eq!(d.at([2, 3, 1]), 0.0);
    }

    #[test]
    fn all_foreground_is_zero() {
        let m = ScalarVolume::filled(Grid::cube(4), 1.0);
        assert!(distance_transform(&m).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert!(distance_transform(&ScalarVolume::zeros(Grid::cube(4))).is_err());
    }

    #[test]
    fn random_masks_match_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..120 {
            let g = Grid::cube(8);
            let density = rng.random_range(0.005..0.3);
            let mut m = ScalarVolume::from_fn(g, |_| if rng.random::<f64>() < density { 1.0 } else { 0.0 });
            if m.max() == 0.0 {
                m.set([case % 8, 0, 0], 1.0);
            }
            let d = distance_transform(&m).unwrap();
            assert_eq!(d.data(), brute_force(&m).as_slice(), "case {case}");
        }
    }

    #[test]
    fn random_16_cube_with_anisotropic_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::new([16, 16, 16], [0.8, 1.0, 1.7]).unwrap();
        let m = ScalarVolume::from_fn(g, |_| if rng.random::<f64>() < 0.01 { 1.0 } else { 0.0 });
        let d = distance_transform(&m).unwrap();
        for (a, b) in d.data().iter().zip(brute_force(&m)) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
