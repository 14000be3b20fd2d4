use super::scale::{synthesize_scale, ScaleResult};
use super::{FilterConfig, SeedSet};
use crate::error::Result;
use crate::linalg::SymMat3;
use crate::resample::{resample, resample_to};
use crate::slogs::Dictionary;
use crate::volume::{ScalarVolume, TensorFieldLE};

/// Full-resolution synthesis with the per-scale results kept for inspection.
#[derive(Clone, Debug)]
pub struct MultiscaleResult {
    pub cvm: ScalarVolume,
    pub tf: TensorFieldLE,
    /// Seeds of the full-resolution scale.
    pub seeds: SeedSet,
    /// `(factor, result)` per processed scale, at that scale's resolution.
    pub scales: Vec<(f64, ScaleResult)>,
}

/// Relative guard added to the CVM before dividing the tensor sum by it.
pub const CVM_GUARD: f64 = 1e-9;

/// Runs every scale of the pyramid and integrates them at full resolution:
/// `CVM = Σ up(CVM_s)/s` and `TF = Σ up(CVM_s)·up(TF_s)/s` divided by the
/// guarded CVM, each LE tensor then projected back onto trace zero. Scales at
/// which the volume would be smaller than the kernel support are skipped.
pub fn multiscale_synthesize(
    v: &ScalarVolume,
    dict: &Dictionary,
    cfg: &FilterConfig,
    workers: usize,
) -> Result<MultiscaleResult> {
    cfg.validate(dict.support())?;
    let dims = v.dims();
    let n = v.grid().len();
    let mut cvm = vec![0.0; n];
    let mut num = vec![SymMat3::ZERO; n];
    let mut scales = Vec::new();
    let mut seeds = SeedSet::default();
    for &s in &cfg.scales {
        let v_s = resample(v, s)?;
        if v_s.dims().iter().any(|&d| d < dict.support()) {
            log::warn!("skipping scale {s}: dims {:?} below the kernel support", v_s.dims());
            continue;
        }
        let r = synthesize_scale(&v_s, dict, cfg, workers)?;
        let up_cvm = resample_to(&r.cvm, dims)?;
        let comps: Vec<ScalarVolume> = (0..6)
            .map(|c| {
                let field = r.tf.data().iter().map(|t| t.to_array()[c]).collect();
                resample_to(&ScalarVolume::new(*r.tf.grid(), field)?, dims)
            })
            .collect::<Result<_>>()?;
        let w = 1.0 / s;
        for i in 0..n {
            let c = w * up_cvm.data()[i];
            cvm[i] += c;
            let t = SymMat3::from_array([0, 1, 2, 3, 4, 5].map(|k| comps[k].data()[i]));
            num[i].add_scaled(&t, c);
        }
        if s == 1.0 {
            seeds = r.seeds.clone();
        }
        scales.push((s, r));
    }
    let eps = CVM_GUARD * cvm.iter().copied().fold(0.0, f64::max);
    let tf: Vec<SymMat3> = num
        .iter()
        .zip(&cvm)
        .map(|(t, &c)| if c + eps > 0.0 { t.scale(1.0 / (c + eps)).trace_free() } else { SymMat3::ZERO })
        .collect();
    Ok(MultiscaleResult {
        cvm: ScalarVolume::new(*v.grid(), cvm)?,
        tf: TensorFieldLE::new(*v.grid(), tf)?,
        seeds,
        scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slogs::{default_dictionary, DictionaryConfig};
    use crate::volume::Grid;

    fn tube(n: usize) -> ScalarVolume {
        ScalarVolume::from_fn(Grid::cube(n), |p| {
            let d2 = (p[1] as f64 - 16.0).powi(2) + (p[2] as f64 - 16.0).powi(2);
            255.0 * (-d2 / (2.0 * 1.5 * 1.5)).exp()
        })
    }

    fn argmax_yz(v: &ScalarVolume, i: usize) -> (usize, usize) {
        let d = v.dims();
        let mut best = (0, 0, f64::MIN);
        for k in 0..d[2] {
            for j in 0..d[1] {
                if v.get(i, j, k) > best.2 {
                    best = (j, k, v.get(i, j, k));
                }
            }
        }
        (best.0, best.1)
    }

    #[test]
    fn single_scale_is_that_scale() {
        let dict = default_dictionary(&DictionaryConfig::default()).unwrap();
        let cfg = FilterConfig { scales: vec![1.0], ..Default::default() };
        let v = tube(32);
        let m = multiscale_synthesize(&v, &dict, &cfg, 1).unwrap();
        let s = synthesize_scale(&v, &dict, &cfg, 1).unwrap();
        assert_eq!(m.cvm.data(), s.cvm.data());
        let eps = CVM_GUARD * s.cvm.max();
        for ((a, b), &c) in m.tf.data().iter().zip(s.tf.data()).zip(s.cvm.data()) {
            // identical up to the guard's relative shrink
            let tol = 1e-12 + b.norm() * eps / (c + eps);
            assert!((*a - *b).norm() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn two_scales_keep_the_centerline() {
        let dict = default_dictionary(&DictionaryConfig::default()).unwrap();
        let v = tube(32);
        let one = multiscale_synthesize(&v, &dict, &FilterConfig { scales: vec![1.0], ..Default::default() }, 1).unwrap();
        let two = multiscale_synthesize(&v, &dict, &FilterConfig { scales: vec![1.0, 0.71], ..Default::default() }, 1)
            .unwrap();
        for i in 4..28 {
            assert_eq!(argmax_yz(&one.cvm, i), (16, 16), "slice {i}");
            assert_eq!(argmax_yz(&two.cvm, i), (16, 16), "slice {i}");
        }
        for (t, &c) in two.tf.data().iter().zip(two.cvm.data()) {
            assert!(t.trace().abs() < 1e-9);
            if c == 0.0 {
                assert_eq!(*t, SymMat3::ZERO);
            }
        }
    }
}
