//! Voxel-wise tree evaluation against rasterized ground truth.

use std::fmt::Write as _;

use crate::edt::distance_transform;
use crate::error::{Error, Result};
use crate::geodesic::GeodesicTree;
use crate::phantom::CenterlineGT;
use crate::volume::{Grid, ScalarVolume};

pub const CSV_HEADER: &str = "volume_id,noise,rho,precision,recall,mean_error,acyclic";

#[derive(Clone, Debug, PartialEq)]
pub struct TreeMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Mean distance from GT voxels to the tree, in voxels.
    pub mean_error: f64,
    pub rho: f64,
    pub acyclic: bool,
    pub n_nodes: usize,
    pub n_edges: usize,
}

/// Distances in voxel units from the voxels of `set` to everything else.
fn distance_map(grid: &Grid, set: &[[usize; 3]]) -> Result<ScalarVolume> {
    let unit = Grid::unit(grid.dims);
    let mut mask = ScalarVolume::zeros(unit);
    for &v in set {
        mask.set(v, 1.0);
    }
    distance_transform(&mask)
}

/// Precision, recall and mean error of voxel set `found` against `truth`.
pub fn voxel_metrics(grid: &Grid, found: &[[usize; 3]], truth: &[[usize; 3]], rho: f64) -> Result<(f64, f64, f64)> {
    if found.is_empty() {
        return Err(Error::Empty("tree voxels".into()));
    }
    if truth.is_empty() {
        return Err(Error::Empty("ground-truth voxels".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::param("rho", format!("{rho} must be non-negative")));
    }
    let to_truth = distance_map(grid, truth)?;
    let to_found = distance_map(grid, found)?;
    let precision = found.iter().filter(|&&e| to_truth.at(e) <= rho).count() as f64 / found.len() as f64;
    let recall = truth.iter().filter(|&&g| to_found.at(g) <= rho).count() as f64 / truth.len() as f64;
    let mean_error = truth.iter().map(|&g| to_found.at(g)).sum::<f64>() / truth.len() as f64;
    Ok((precision, recall, mean_error))
}

pub fn tree_metrics(tree: &GeodesicTree, gt: &CenterlineGT, rho: f64) -> Result<TreeMetrics> {
    if tree.grid.dims != gt.grid.dims {
        return Err(Error::InvalidVolume(format!("tree dims {:?} differ from GT dims {:?}", tree.grid.dims, gt.grid.dims)));
    }
    let (precision, recall, mean_error) = voxel_metrics(&tree.grid, &tree.voxels(), &gt.voxels(), rho)?;
    Ok(TreeMetrics {
        precision,
        recall,
        mean_error,
        rho,
        acyclic: tree.is_acyclic(),
        n_nodes: tree.nodes.len(),
        n_edges: tree.edges.len(),
    })
}

/// One CSV row under `CSV_HEADER`.
pub fn csv_row(volume_id: &str, noise: &str, m: &TreeMetrics) -> String {
    let mut s = String::new();
    let _ = write!(s, "{volume_id},{noise},{},{},{},{},{}", m.rho, m.precision, m.recall, m.mean_error, m.acyclic);
    s
}
