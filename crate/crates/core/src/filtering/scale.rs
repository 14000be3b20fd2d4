use rayon::prelude::*;

use super::block::{normalize_sweep, BlockFilter, BlockResult};
use super::cluster::cluster_orientations;
use super::icosphere::icosphere_bases;
use super::ola::{extract_block, for_each_inside, OlaGrid};
use super::saliency::tubular_saliency;
use super::seeds::detect_seeds;
use super::{FilterConfig, SeedSet};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, SymMat3};
use crate::slogs::Dictionary;
use crate::volume::{ScalarVolume, TensorFieldLE};

/// Output of one pyramid level.
#[derive(Clone, Debug)]
pub struct ScaleResult {
    pub cvm: ScalarVolume,
    pub tf: TensorFieldLE,
    pub seeds: SeedSet,
    pub v_tube: ScalarVolume,
    /// Number of blocks that held seeds and were filtered.
    pub blocks_filtered: usize,
}

/// Saliency, seeds, then block filtering with overlap-add at one scale.
/// A volume without any positive saliency has nothing to filter and yields
/// zero CVM with the identity tensor field.
pub fn synthesize_scale(v: &ScalarVolume, dict: &Dictionary, cfg: &FilterConfig, workers: usize) -> Result<ScaleResult> {
    cfg.validate(dict.support())?;
    let omega = icosphere_bases(cfg.icosphere_level)?;
    let v_tube = tubular_saliency(v, &dict.tube, &omega)?;
    if !v_tube.data().iter().any(|&x| x > 0.0) {
        return Ok(ScaleResult {
            cvm: ScalarVolume::zeros(*v.grid()),
            tf: TensorFieldLE::identity(*v.grid()),
            seeds: SeedSet::default(),
            v_tube,
            blocks_filtered: 0,
        });
    }
    let seeds = detect_seeds(&v_tube, cfg.quantile)?;
    let (cvm, tf, blocks_filtered) = assemble(v, dict, &seeds, cfg, workers)?;
    Ok(ScaleResult { cvm, tf, seeds, v_tube, blocks_filtered })
}

/// Block filtering and overlap-add for a given seed set.
pub fn assemble_scale(
    v: &ScalarVolume,
    dict: &Dictionary,
    seeds: &SeedSet,
    cfg: &FilterConfig,
    workers: usize,
) -> Result<(ScalarVolume, TensorFieldLE)> {
    cfg.validate(dict.support())?;
    let (cvm, tf, _) = assemble(v, dict, seeds, cfg, workers)?;
    Ok((cvm, tf))
}

fn assemble(
    v: &ScalarVolume,
    dict: &Dictionary,
    seeds: &SeedSet,
    cfg: &FilterConfig,
    workers: usize,
) -> Result<(ScalarVolume, TensorFieldLE, usize)> {
    let edge = cfg.block_edge;
    let filter = BlockFilter::new(dict, edge)?;
    let ola = OlaGrid::new(v.dims(), edge, seeds);
    let active: Vec<_> = ola.blocks.iter().filter(|b| !b.seeds.is_empty()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;

    let n = v.grid().len();
    let dims = v.dims();
    let mut cvm = vec![0.0; n];
    let mut num = vec![SymMat3::ZERO; n];
    let mut weight = vec![0.0; n];
    // bounded memory: a few blocks per worker in flight, reduced in block order
    for chunk in active.chunks(2 * workers.max(1)) {
        let results: Vec<Result<BlockResult>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|b| {
                    let bases: Vec<Mat3> = b.seeds.iter().map(|&s| seeds.orientations[s]).collect();
                    let strength: Vec<f64> = b.seeds.iter().map(|&s| seeds.strength[s]).collect();
                    let theta = cluster_orientations(
                        &bases,
                        &strength,
                        cfg.max_orientations,
                        cfg.min_orientation_separation_deg,
                    );
                    let block = extract_block(v, b.origin, edge);
                    let neg = block.map(|x| -x);
                    filter.run(&block, &neg, &theta)
                })
                .collect()
        });
        for (b, r) in chunk.iter().zip(results) {
            let r = r?;
            for_each_inside(dims, b.origin, edge, |l, g| {
                cvm[g] += r.cvm[l];
                num[g] = num[g].add(r.num[l]);
                weight[g] += r.weight[l];
            });
        }
    }

    let tf: Vec<SymMat3> = normalize_sweep(&num, &weight).into_iter().map(SymMat3::trace_free).collect();
    Ok((
        ScalarVolume::new(*v.grid(), cvm)?,
        TensorFieldLE::new(*v.grid(), tf)?,
        active.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slogs::{default_dictionary, DictionaryConfig};
    use crate::volume::Grid;

    fn dict() -> Dictionary {
        default_dictionary(&DictionaryConfig::default()).unwrap()
    }

    #[test]
    fn constant_volume_is_background() {
        let v = ScalarVolume::filled(Grid::cube(24), 80.0);
        let r = synthesize_scale(&v, &dict(), &FilterConfig::default(), 1).unwrap();
        assert!(r.cvm.data().iter().all(|&x| x == 0.0));
        assert!(r.tf.data().iter().all(|t| *t == SymMat3::ZERO));
        assert!(r.seeds.is_empty());
    }

    #[test]
    fn tube_cvm_peaks_on_the_axis() {
        let v = ScalarVolume::from_fn(Grid::cube(40), |p| {
            let d2 = (p[1] as f64 - 20.3).powi(2) + (p[2] as f64 - 19.6).powi(2);
            255.0 * (-d2 / (2.0 * 1.5 * 1.5)).exp()
        });
        let r = synthesize_scale(&v, &dict(), &FilterConfig::default(), 1).unwrap();
        assert!(r.blocks_filtered > 0);
        for i in 4..36 {
            let mut best = (0, 0, f64::MIN);
            for k in 0..40 {
                for j in 0..40 {
                    if r.cvm.get(i, j, k) > best.2 {
                        best = (j, k, r.cvm.get(i, j, k));
                    }
                }
            }
            let d = ((best.0 as f64 - 20.3).powi(2) + (best.1 as f64 - 19.6).powi(2)).sqrt();
            assert!(d <= 1.0, "slice {i}: {d}");
        }
        for t in r.tf.data() {
            assert!(t.trace().abs() < 1e-9);
        }
    }
}
