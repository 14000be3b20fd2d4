//! Vascular tree extraction from 3D scalar volumes.
//!
//! The pipeline has two halves. A steerable filterbank of curvilinear
//! second-derivative kernels turns the image into a connected vesselness map
//! (CVM) plus a unit-determinant tensor field (TF) stored in Log-Euclidean
//! coordinates. A multi-source anisotropic fast marching then grows geodesic
//! fronts over the metric built from both, joining regions one collision at a
//! time so the result is always a tree.
//!
//! Volumes are x-fastest: voxel `(i, j, k)` lives at `i + nx * (j + ny * k)`.

pub mod config;
pub mod edt;
pub mod error;
pub mod eval;
pub mod fft;
pub mod filtering;
pub mod geodesic;
pub mod io;
pub mod linalg;
pub mod phantom;
pub mod pipeline;
pub mod resample;
pub mod selftest;
pub mod slogs;
pub mod volume;

pub use error::{Error, Result};
pub use linalg::{eig_sym3, spd_exp, spd_log, EigenDecomp3, Mat3, SymMat3, Vec3};
pub use volume::{Grid, ScalarVolume, TensorFieldLE};
