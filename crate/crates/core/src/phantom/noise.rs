use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

/// Degradation recipe on the 0..255 intensity scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub n_shadows: usize,
    pub salt_pepper_rate: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { gaussian_sigma: 0.0, n_shadows: 0, salt_pepper_rate: 0.0 };
    pub const N1: NoiseSpec = NoiseSpec { gaussian_sigma: 5.0, n_shadows: 1, salt_pepper_rate: 0.001 };
    pub const N2: NoiseSpec = NoiseSpec { gaussian_sigma: 10.0, n_shadows: 1, salt_pepper_rate: 0.002 };

    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(Error::param("noise.gaussian_sigma", format!("{} must be non-negative", self.gaussian_sigma)));
        }
        if !(0.0..=0.01).contains(&self.salt_pepper_rate) {
            return Err(Error::param("noise.salt_pepper_rate", format!("{} not in [0, 0.01]", self.salt_pepper_rate)));
        }
        Ok(())
    }
}

/// Shadow blob width relative to the volume edge.
const SHADOW_SIGMA_FRACTION: f64 = 1.0 / 6.0;
const SHADOW_DEPTH: (f64, f64) = (0.3, 0.7);

/// Gaussian noise, then multiplicative shadow blobs, then exactly
/// `round(rate·N)` salt-and-pepper voxels (the first half black), then
/// clamping to [0, 255]. Every draw comes from one stream seeded by `rng_seed`.
pub fn degrade(v: &ScalarVolume, spec: &NoiseSpec, rng_seed: u64) -> Result<ScalarVolume> {
    spec.validate()?;
    if let Some(x) = v.data().iter().find(|x| !(0.0..=255.0).contains(*x)) {
        return Err(Error::InvalidVolume(format!("intensity {x} outside [0, 255]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let grid = *v.grid();
    let mut out = v.clone();
    if spec.gaussian_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.gaussian_sigma).map_err(|e| Error::param("noise.gaussian_sigma", e.to_string()))?;
        for x in out.data_mut() {
            *x += normal.sample(&mut rng);
        }
    }
    for _ in 0..spec.n_shadows {
        let d = grid.dims;
        let center = [0, 1, 2].map(|a| rng.random_range(0.0..d[a] as f64));
        let sigma = d.map(|n| n as f64 * SHADOW_SIGMA_FRACTION);
        let depth = rng.random_range(SHADOW_DEPTH.0..=SHADOW_DEPTH.1);
        for (idx, x) in out.data_mut().iter_mut().enumerate() {
            let p = grid.coords(idx);
            let q: f64 = (0..3).map(|a| ((p[a] as f64 - center[a]) / sigma[a]).powi(2)).sum();
            *x *= 1.0 - depth * (-0.5 * q).exp();
        }
    }
    let flips = (spec.salt_pepper_rate * grid.len() as f64).round() as usize;
    if flips > 0 {
        let picks = rand::seq::index::sample(&mut rng, grid.len(), flips);
        for (k, idx) in picks.into_iter().enumerate() {
            out.data_mut()[idx] = if k < flips / 2 { 0.0 } else { 255.0 };
        }
    }
    Ok(out.map(|x| x.clamp(0.0, 255.0)))
}
