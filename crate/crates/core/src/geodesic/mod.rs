//! Multi-source anisotropic fast marching and tree extraction.
//!
//! Every seed component grows a front over the metric from CVM and TF. When
//! two regions touch, the minimal path between their sources is traced back,
//! the regions are merged with a nested fast update, and the path becomes a
//! tree edge. Only merging edges are ever added, so the result is acyclic.
//!
//! Distances are in voxel units; spacing only enters node positions.

mod align;
mod front;
mod metric;
mod path;
mod simplex;
mod tree;

pub use align::{align_seeds, ALIGN_ITERATIONS, ALIGN_RADIUS, ALIGN_STEP};
pub use front::{init_front, seed_components, Collision, FrontState, Propagation, Tag};
pub use metric::{MetricField, EPSILON_C};
pub use path::{join_halves, trace_path, Path};
pub use simplex::{one_point, three_point, two_point, Offset, SIMPLICES};
pub use tree::{Edge, GeodesicTree, Node, GRAPH_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::SeedSet;
use crate::volume::{ScalarVolume, TensorFieldLE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicConfig {
    /// CVM guard relative to the CVM maximum.
    pub epsilon_c: f64,
    /// Move seeds onto CVM ridges before marching.
    pub align_seeds: bool,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { epsilon_c: EPSILON_C, align_seeds: true }
    }
}

impl GeodesicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_c > 0.0 && self.epsilon_c.is_finite()) {
            return Err(Error::param("geodesic.epsilon_c", format!("{} must be positive", self.epsilon_c)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub tree: GeodesicTree,
    /// Final geodesic distance.
    pub u: ScalarVolume,
    /// Final region label per voxel.
    pub voronoi: ScalarVolume,
}

/// Full extraction from CVM, TF and detected seeds.
pub fn extract_tree(cvm: &ScalarVolume, tf: &TensorFieldLE, seeds: &SeedSet, cfg: &GeodesicConfig) -> Result<Extraction> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Empty("seed set".into()));
    }
    let seeds = if cfg.align_seeds { align_seeds(seeds, cvm) } else { seeds.clone() };
    let metric = MetricField::new(cvm, tf, cfg.epsilon_c)?;
    let front = init_front(&seeds.voxels, *cvm.grid())?;
    extract_with(&metric, front)
}

/// Tree extraction from an initialized front. Nodes are the seed
/// components, each placed at its first voxel and carrying all of them.
pub fn extract_with(metric: &MetricField, mut front: FrontState) -> Result<Extraction> {
    let grid = *front.grid();
    if metric.grid() != &grid {
        return Err(Error::InvalidVolume(format!("metric dims {:?} differ from front dims {:?}", metric.grid().dims, grid.dims)));
    }
    let mut tree = GeodesicTree::new(grid);
    for comp in front.components() {
        let id = tree.add_node(grid.coords(comp[0]));
        tree.nodes[id].members = comp.iter().map(|&i| grid.coords(i)).collect();
        tree.roots.push(id);
    }
    loop {
        let c = match front.propagate_until_collision(metric)? {
            Propagation::Converged => break,
            Propagation::Collision(c) => c,
        };
        let (ia, ib) = (grid.index_of(c.voxel_a), grid.index_of(c.voxel_b));
        let half = |i: usize| -> Result<Path> {
            let idx = front.descend_in_region(i)?;
            Ok(Path::new(idx.into_iter().map(|x| grid.coords(x)).collect(), front.u(), &grid))
        };
        let (ha, hb) = (half(ia)?, half(ib)?);
        let path = join_halves(&ha, &hb, front.u(), &grid);
        let end_a = grid.index_of(path.voxels[0]);
        let end_b = grid.index_of(*path.voxels.last().expect("nonempty path"));
        let (na, nb) = (front.component_of(end_a) as usize - 1, front.component_of(end_b) as usize - 1);
        front.merge_regions(metric, c.region_a, c.region_b, &path)?;
        tree.edges.push(Edge { a: na, b: nb, path });
    }
    let u = front.u_volume();
    let voronoi = ScalarVolume::new(grid, front.voronoi().into_iter().map(f64::from).collect())?;
    Ok(Extraction { tree, u, voronoi })
}
