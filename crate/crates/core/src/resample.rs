//! Scale pyramid: Gaussian anti-aliasing plus trilinear resampling.

use crate::error::{Error, Result};
use crate::volume::{Grid, ScalarVolume};

pub const MIN_FACTOR: f64 = 0.05;
pub const MAX_FACTOR: f64 = 20.0;
pub const MIN_OUTPUT_DIM: usize = 4;

/// Resamples by `factor` (output dims = round(dims * factor)).
///
/// Downsampling blurs with `sigma = 0.5 / factor` input voxels first.
pub fn resample(v: &ScalarVolume, factor: f64) -> Result<ScalarVolume> {
    if !(MIN_FACTOR..=MAX_FACTOR).contains(&factor) {
        return Err(Error::param(
            "factor",
            format!("must lie in [{MIN_FACTOR}, {MAX_FACTOR}], got {factor}"),
        ));
    }
    if factor == 1.0 {
        return Ok(v.clone());
    }
    let dims = v.dims().map(|d| ((d as f64) * factor).round() as usize);
    resample_to(v, dims)
}

/// Resamples onto an explicit output shape, keeping voxel centres aligned
/// and the physical extent unchanged.
pub fn resample_to(v: &ScalarVolume, dims: [usize; 3]) -> Result<ScalarVolume> {
    if dims.iter().any(|&d| d < MIN_OUTPUT_DIM) {
        return Err(Error::InvalidVolume(format!(
            "resampled dims {dims:?} fall below {MIN_OUTPUT_DIM} voxels per axis"
        )));
    }
    let src_dims = v.dims();
    if dims == src_dims {
        return Ok(v.clone());
    }
    let ratio: [f64; 3] = std::array::from_fn(|a| dims[a] as f64 / src_dims[a] as f64);
    let sigma = ratio.map(|f| if f < 1.0 { 0.5 / f } else { 0.0 });
    let smoothed = if sigma.iter().any(|&s| s > 0.0) {
        gaussian_blur(v, sigma)
    } else {
        v.clone()
    };
    let spacing: [f64; 3] = std::array::from_fn(|a| v.spacing()[a] / ratio[a]);
    let grid = Grid::new(dims, spacing)?;
    Ok(ScalarVolume::from_fn(grid, |p| {
        let src: [f64; 3] = std::array::from_fn(|a| (p[a] as f64 + 0.5) / ratio[a] - 0.5);
        smoothed.sample_trilinear(src)
    }))
}

/// Separable Gaussian blur with replicate boundaries; `sigma` per axis in voxels.
///
/// Written as `v + Σ w (v_n - v)`, so constant volumes pass through bit-exact.
pub fn gaussian_blur(v: &ScalarVolume, sigma: [f64; 3]) -> ScalarVolume {
    let mut cur = v.clone();
    for axis in 0..3 {
        if sigma[axis] <= 0.0 {
            continue;
        }
        let taps = gaussian_taps(sigma[axis]);
        cur = blur_axis(&cur, axis, &taps);
    }
    cur
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut w: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn blur_axis(v: &ScalarVolume, axis: usize, taps: &[f64]) -> ScalarVolume {
    let radius = (taps.len() / 2) as i64;
    let grid = *v.grid();
    let n = grid.dims[axis] as i64;
    let mut out = v.clone();
    let src = v.data();
    let dst = out.data_mut();
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let center = src[idx];
        let mut acc = 0.0;
        for (t, w) in taps.iter().enumerate() {
            let off = t as i64 - radius;
            let mut p = c;
            p[axis] = (c[axis] as i64 + off).clamp(0, n - 1) as usize;
            acc += w * (src[grid.index_of(p)] - center);
        }
        dst[idx] = center + acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volume_is_preserved() {
        let v = ScalarVolume::filled(Grid::cube(20), 3.7);
        for f in [0.25, 0.5, 0.71, 1.0, 1.5, 2.0] {
            let r = resample(&v, f).unwrap();
            assert!(r.data().iter().all(|&x| x == 3.7), "factor {f}");
        }
    }

    #[test]
    fn unit_factor_is_identity() {
        let v = ScalarVolume::from_fn(Grid::cube(8), |p| (p[0] * p[1] + p[2]) as f64);
        assert_eq!(resample(&v, 1.0).unwrap(), v);
    }

    #[test]
    fn ramp_survives_down_up_round_trip() {
        let v = ScalarVolume::from_fn(Grid::cube(64), |p| p[0] as f64 + 0.5 * p[1] as f64);
        let range = v.max() - v.min();
        let down = resample(&v, 0.5).unwrap();
        assert_eq!(down.dims(), [32, 32, 32]);
        let up = resample(&down, 2.0).unwrap();
        assert_eq!(up.dims(), [64, 64, 64]);
        let mut worst: f64 = 0.0;
        for k in 2..62 {
            for j in 2..62 {
                for i in 2..62 {
                    worst = worst.max((up.get(i, j, k) - v.get(i, j, k)).abs());
                }
            }
        }
        assert!(worst <= 0.02 * range, "max error {worst} vs range {range}");
    }

    #[test]
    fn rejects_out_of_range() {
        let v = ScalarVolume::zeros(Grid::cube(8));
        assert!(resample(&v, 0.01).is_err());
        assert!(resample(&v, 25.0).is_err());
        // 8 * 0.25 = 2 voxels < 4
        assert!(resample(&v, 0.25).is_err());
    }

    #[test]
    fn deterministic() {
        let v = ScalarVolume::from_fn(Grid::cube(17), |p| ((p[0] * 7 + p[1] * 3 + p[2]) % 11) as f64);
        let a = resample(&v, 0.6).unwrap();
        let b = resample(&v, 0.6).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
