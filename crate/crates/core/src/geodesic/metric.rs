use crate::error::{Error, Result};
use crate::linalg::{spd_exp, SymMat3};
use crate::volume::{Grid, ScalarVolume, TensorFieldLE};

/// Default guard on the CVM, relative to its maximum.
pub const EPSILON_C: f64 = 1e-3;

/// Riemannian cost: per voxel `M̃ = exp(TF) / (CVM + ε_c)²`, so travel is
/// cheap where the vesselness is high and along the tensor's smallest
/// eigenvector.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub tensors: TensorFieldLE,
    /// `1 / (CVM + ε_c)`.
    pub speed_inv: ScalarVolume,
    pub epsilon_c: f64,
    cost: Vec<SymMat3>,
}

impl MetricField {
    /// `eps_rel` scales the maximum CVM into `ε_c`. An all-zero CVM leaves
    /// only the tensor part (`ε_c = 1`).
    pub fn new(cvm: &ScalarVolume, tf: &TensorFieldLE, eps_rel: f64) -> Result<Self> {
        if cvm.dims() != tf.dims() {
            return Err(Error::InvalidVolume(format!(
                "CVM dims {:?} differ from TF dims {:?}",
                cvm.dims(),
                tf.dims()
            )));
        }
        if !(eps_rel > 0.0) || !eps_rel.is_finite() {
            return Err(Error::param("epsilon_c", format!("{eps_rel} must be positive")));
        }
        if let Some(x) = cvm.data().iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidVolume(format!("CVM holds {x}; expected finite non-negative values")));
        }
        let peak = cvm.max();
        let epsilon_c = if peak > 0.0 { eps_rel * peak } else { 1.0 };
        let speed_inv = cvm.map(|c| 1.0 / (c + epsilon_c));
        let cost = tf
            .data()
            .iter()
            .zip(speed_inv.data())
            .map(|(t, &s)| spd_exp(t).scale(s * s))
            .collect();
        Ok(MetricField { tensors: tf.clone(), speed_inv, epsilon_c, cost })
    }

    /// `M̃ = k² I` everywhere.
    pub fn uniform(grid: Grid, k: f64) -> Self {
        MetricField {
            tensors: TensorFieldLE::identity(grid),
            speed_inv: ScalarVolume::filled(grid, k),
            epsilon_c: 0.0,
            cost: vec![SymMat3::IDENTITY.scale(k * k); grid.len()],
        }
    }

    /// Metric from explicit cost tensors (for tests and oracles).
    pub fn from_cost(grid: Grid, cost: Vec<SymMat3>) -> Result<Self> {
        if cost.len() != grid.len() {
            return Err(Error::InvalidVolume(format!("{} tensors for {} voxels", cost.len(), grid.len())));
        }
        Ok(MetricField {
            tensors: TensorFieldLE::identity(grid),
            speed_inv: ScalarVolume::filled(grid, 1.0),
            epsilon_c: 0.0,
            cost,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.tensors.grid()
    }

    #[inline]
    pub fn cost(&self, idx: usize) -> &SymMat3 {
        &self.cost[idx]
    }

    /// The same metric multiplied by `k²`.
    pub fn scaled(&self, k: f64) -> Self {
        MetricField {
            tensors: self.tensors.clone(),
            speed_inv: self.speed_inv.map(|s| s * k),
            epsilon_c: self.epsilon_c,
            cost: self.cost.iter().map(|m| m.scale(k * k)).collect(),
        }
    }
}
