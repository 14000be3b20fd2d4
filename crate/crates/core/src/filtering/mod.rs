//! Multiscale analysis and synthesis of the vesselness map and tensor field.
//!
//! Per scale: a tubular saliency map picks seeds and their orientations, then
//! overlapping 50% Hann blocks that contain seeds are filtered with the
//! dictionary steered onto the block's seed orientations and overlap-added.

mod block;
mod cluster;
mod icosphere;
mod multiscale;
mod ola;
mod saliency;
mod scale;
mod seeds;

pub use block::{filter_block, BlockFilter, BlockResult};
pub use cluster::{basis_distance, cluster_orientations};
pub use icosphere::{icosphere_bases, icosphere_directions};
pub use multiscale::{multiscale_synthesize, MultiscaleResult};
pub use ola::{block_hann, extract_block, partition_of_unity, OlaBlock, OlaGrid};
pub use saliency::tubular_saliency;
pub use scale::{assemble_scale, synthesize_scale, ScaleResult};
pub use seeds::{detect_seeds, quantile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, Mat3};

/// A set of orthonormal orientation bases; the first column is the axis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientationSet {
    pub bases: Vec<Mat3>,
}

impl OrientationSet {
    pub fn new(bases: Vec<Mat3>) -> Result<Self> {
        if let Some(i) = bases.iter().position(|b| orthonormality_error(b) > 1e-8) {
            return Err(Error::param("orientation", format!("basis {i} is not orthonormal")));
        }
        Ok(OrientationSet { bases })
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }
}

/// Seed voxels with the Hessian eigenbasis of the saliency map at each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeedSet {
    pub voxels: Vec<[usize; 3]>,
    pub orientations: Vec<Mat3>,
    /// Saliency at each seed; used to rank seeds inside a block.
    pub strength: Vec<f64>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Filtering parameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Descending pyramid factors, starting at 1.
    pub scales: Vec<f64>,
    /// Quantile of the positive saliency samples a seed must reach.
    pub quantile: f64,
    pub icosphere_level: usize,
    pub block_edge: usize,
    /// Cap on representative orientations per block.
    pub max_orientations: usize,
    /// Greedy orientation selection stops once the farthest candidate is
    /// closer than this (degrees).
    pub min_orientation_separation_deg: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            scales: vec![1.0, 0.71, 0.5, 0.35, 0.25],
            quantile: 0.99,
            icosphere_level: 1,
            block_edge: 32,
            max_orientations: 8,
            min_orientation_separation_deg: 20.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self, support: usize) -> Result<()> {
        let f = |name: &str, reason: String| Err(Error::param(format!("filter.{name}"), reason));
        if self.scales.is_empty() {
            return f("scales", "at least one scale is required".into());
        }
        if self.scales[0] != 1.0 {
            return f("scales", format!("first scale must be 1, got {}", self.scales[0]));
        }
        if self.scales.windows(2).any(|w| !(w[1] < w[0])) || self.scales.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return f("scales", "scales must be strictly descending within (0, 1]".into());
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return f("quantile", format!("{} not in (0, 1)", self.quantile));
        }
        if self.icosphere_level > 3 {
            return f("icosphere_level", format!("{} not in 0..=3", self.icosphere_level));
        }
        if self.block_edge % 2 != 0 || self.block_edge < 2 * support {
            return f(
                "block_edge",
                format!("{} must be even and at least twice the kernel support {support}", self.block_edge),
            );
        }
        if self.max_orientations == 0 {
            return f("max_orientations", "must be at least 1".into());
        }
        if !(0.0..=180.0).contains(&self.min_orientation_separation_deg) {
            return f("min_orientation_separation_deg", "must lie in [0, 180]".into());
        }
        Ok(())
    }
}
