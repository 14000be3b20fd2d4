//! Steerable curvilinear Gaussian kernels and their tensor patches.
//!
//! A kernel is sampled on an odd `support³` cube centred on the origin. Patch
//! arrays are x-fastest like volumes, with offset `o = index - support / 2`.

mod dictionary;
mod gamma;
mod kernel;
mod steer;

pub use dictionary::{default_dictionary, load_dictionary, save_dictionary, Dictionary, DictionaryConfig};
pub use gamma::{eval_gamma, gamma_derivatives, gauge_frame};
pub use kernel::{build_kernel, degenerate_kernels, psi_diagonal, KernelDiagnostics};
pub use steer::steer_kernel;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, SymMat3, Vec3};

pub const SUPPORTS: [usize; 4] = [7, 9, 11, 13];

/// Shape of one curvilinear Gaussian: `sigma = (elongation, cross, cross)` in
/// voxels and `curvature = (asymmetry, quadratic bend, cubic tilt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub sigma: [f64; 3],
    pub curvature: [f64; 3],
}

impl KernelParams {
    pub fn new(sigma: [f64; 3], curvature: [f64; 3]) -> Result<Self> {
        let p = KernelParams { sigma, curvature };
        p.validate()?;
        Ok(p)
    }

    /// The straight tubular kernel `sigma = (2, 0.5, 0.5)`, no curvature.
    pub fn tube() -> Self {
        KernelParams {
            sigma: [2.0, 0.5, 0.5],
            curvature: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, s) in self.sigma.iter().enumerate() {
            if !(0.2..=10.0).contains(s) {
                return Err(Error::param(format!("sigma[{a}]"), format!("{s} outside [0.2, 10]")));
            }
        }
        for (a, c) in self.curvature.iter().enumerate() {
            if !(-1.0..=1.0).contains(c) {
                return Err(Error::param(format!("curvature[{a}]"), format!("{c} outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

/// First-order gauge frame at a point of a kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeFrame {
    pub omega: Vec3,
    pub upsilon: Vec3,
    /// Squared components of `omega` in the Hessian eigenbasis.
    pub gamma_weights: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Curvilinear,
    Tube,
    Delta,
    Flat,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Curvilinear => "curvilinear",
            KernelKind::Tube => "tube",
            KernelKind::Delta => "delta",
            KernelKind::Flat => "flat",
        }
    }

    pub fn is_steerable(self) -> bool {
        matches!(self, KernelKind::Curvilinear | KernelKind::Tube)
    }
}

/// Compact-support filter with its impulse response and tensor patch.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKernel {
    pub support: usize,
    /// Zero-mean, unit-L2 response kernel; bright tubes respond positively.
    pub k_patch: Vec<f64>,
    pub gamma_patch: Vec<f64>,
    /// Unit-determinant tensors in Log-Euclidean coordinates (trace zero).
    pub tensor_patch: Vec<SymMat3>,
    /// Integral orientation basis; `None` for the isotropic kinds.
    pub phi: Option<Mat3>,
    pub kind: KernelKind,
    pub params: Option<KernelParams>,
    pub diagnostics: KernelDiagnostics,
    /// Canonical sub-voxel samples that steering resamples from.
    pub source: Option<Arc<SteerSource>>,
}

/// Unsteered kernel samples on the `oversample`-times finer lattice used to
/// build it, with its orientation basis.
#[derive(Debug)]
pub struct SteerSource {
    pub oversample: usize,
    pub phi: Mat3,
    pub fine_k: Vec<f64>,
    pub fine_gamma: Vec<f64>,
    pub tensor_patch: Vec<SymMat3>,
    /// Steering's interleaved copy of the fine lattice, built on first use.
    pub(crate) lattice: std::sync::OnceLock<steer::Padded>,
}

// the lazily built lattice is a cache and does not take part in equality
impl PartialEq for SteerSource {
    fn eq(&self, o: &Self) -> bool {
        self.oversample == o.oversample
            && self.phi == o.phi
            && self.fine_k == o.fine_k
            && self.fine_gamma == o.fine_gamma
            && self.tensor_patch == o.tensor_patch
    }
}

impl DiscreteKernel {
    pub fn len(&self) -> usize {
        self.support.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.support == 0
    }

    pub fn half(&self) -> i64 {
        (self.support / 2) as i64
    }

    /// Patch index of offset `o` (each component in `-half..=half`).
    pub fn index(&self, o: [i64; 3]) -> usize {
        patch_index(self.support, o)
    }
}

pub(crate) fn patch_index(support: usize, o: [i64; 3]) -> usize {
    let h = (support / 2) as i64;
    let s = support;
    (o[0] + h) as usize + s * ((o[1] + h) as usize + s * (o[2] + h) as usize)
}

pub(crate) fn patch_offset(support: usize, idx: usize) -> [i64; 3] {
    let h = (support / 2) as i64;
    let s = support;
    [(idx % s) as i64 - h, ((idx / s) % s) as i64 - h, (idx / (s * s)) as i64 - h]
}

pub(crate) fn check_support(support: usize) -> Result<()> {
    if SUPPORTS.contains(&support) {
        Ok(())
    } else {
        Err(Error::param("support", format!("{support} not in {SUPPORTS:?}")))
    }
}

/// Separable cosine-squared window over a kernel support, positive inside and
/// vanishing half a voxel past the edge.
pub fn support_window(support: usize) -> Vec<f64> {
    let w1: Vec<f64> = (0..support)
        .map(|i| {
            let o = i as f64 - (support / 2) as f64;
            (std::f64::consts::PI * o / (support + 1) as f64).cos().powi(2)
        })
        .collect();
    let mut w = Vec::with_capacity(support.pow(3));
    for k in 0..support {
        for j in 0..support {
            for i in 0..support {
                w.push(w1[i] * w1[j] * w1[k]);
            }
        }
    }
    w
}
