//! Grid containers.
//!
//! Every volume in the crate is stored x-fastest: the linear index of voxel
//! `(i, j, k)` is `i + nx * (j + ny * k)`. Block assembly, kernel patches and
//! the fast-marching neighbour offsets all rely on this layout.

use crate::error::{Error, Result};
use crate::linalg::SymMat3;

/// Shape and voxel spacing of a regular 3D grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    /// Physical size of a voxel along each axis (mm / voxel).
    pub spacing: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be finite and positive, got {spacing:?}"
            )));
        }
        Ok(Grid { dims, spacing })
    }

    /// Isotropic unit-spacing grid.
    pub fn cube(n: usize) -> Self {
        Grid {
            dims: [n, n, n],
            spacing: [1.0; 3],
        }
    }

    pub fn unit(dims: [usize; 3]) -> Self {
        Grid {
            dims,
            spacing: [1.0; 3],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn index_of(&self, v: [usize; 3]) -> usize {
        self.index(v[0], v[1], v[2])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Index of `v + offset` when it stays inside the grid.
    #[inline]
    pub fn offset(&self, v: [usize; 3], d: [i64; 3]) -> Option<usize> {
        let x = v[0] as i64 + d[0];
        let y = v[1] as i64 + d[1];
        let z = v[2] as i64 + d[2];
        if x < 0
            || y < 0
            || z < 0
            || x >= self.dims[0] as i64
            || y >= self.dims[1] as i64
            || z >= self.dims[2] as i64
        {
            None
        } else {
            Some(self.index(x as usize, y as usize, z as usize))
        }
    }

    #[inline]
    pub fn contains(&self, p: [i64; 3]) -> bool {
        (0..3).all(|a| p[a] >= 0 && (p[a] as usize) < self.dims[a])
    }

    /// Physical position (mm) of a voxel centre.
    pub fn position(&self, v: [usize; 3]) -> [f64; 3] {
        [
            v[0] as f64 * self.spacing[0],
            v[1] as f64 * self.spacing[1],
            v[2] as f64 * self.spacing[2],
        ]
    }
}

/// Scalar image on a regular grid (images, saliency maps, CVM, distance maps).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("voxel {:?}", grid.coords(pos))));
        }
        Ok(ScalarVolume { grid, data })
    }

    pub fn filled(grid: Grid, value: f64) -> Self {
        ScalarVolume {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..grid.dims[2] {
            for j in 0..grid.dims[1] {
                for i in 0..grid.dims[0] {
                    data.push(f([i, j, k]));
                }
            }
        }
        ScalarVolume { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.grid.spacing
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn at(&self, v: [usize; 3]) -> f64 {
        self.data[self.grid.index_of(v)]
    }

    #[inline]
    pub fn set(&mut self, v: [usize; 3], value: f64) {
        let idx = self.grid.index_of(v);
        self.data[idx] = value;
    }

    /// Value with coordinates clamped to the grid (replicate boundary).
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64, z: i64) -> f64 {
        let c = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
        self.get(c(x, self.grid.dims[0]), c(y, self.grid.dims[1]), c(z, self.grid.dims[2]))
    }

    /// Trilinear interpolation at a continuous voxel coordinate, clamped to the grid.
    pub fn sample_trilinear(&self, p: [f64; 3]) -> f64 {
        let mut base = [0i64; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let max = (self.grid.dims[a] - 1) as f64;
            let x = p[a].clamp(0.0, max);
            let f = x.floor();
            base[a] = f as i64;
            t[a] = x - f;
        }
        let v = |dx: i64, dy: i64, dz: i64| self.get_clamped(base[0] + dx, base[1] + dy, base[2] + dz);
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let c00 = lerp(v(0, 0, 0), v(1, 0, 0), t[0]);
        let c10 = lerp(v(0, 1, 0), v(1, 1, 0), t[0]);
        let c01 = lerp(v(0, 0, 1), v(1, 0, 1), t[0]);
        let c11 = lerp(v(0, 1, 1), v(1, 1, 1), t[0]);
        lerp(lerp(c00, c10, t[1]), lerp(c01, c11, t[1]), t[2])
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Linear index of the largest value (first occurrence).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarVolume {
        ScalarVolume {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-voxel symmetric tensors stored by their Log-Euclidean coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFieldLE {
    grid: Grid,
    data: Vec<SymMat3>,
}

impl TensorFieldLE {
    pub fn new(grid: Grid, data: Vec<SymMat3>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidVolume(format!(
                "tensor data length {} does not match dims {:?}",
                data.len(),
                grid.dims
            )));
        }
        if let Some(pos) = data.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("tensor at voxel {:?}", grid.coords(pos))));
        }
        Ok(TensorFieldLE { grid, data })
    }

    /// Field of identity tensors (zero in LE coordinates).
    pub fn identity(grid: Grid) -> Self {
        TensorFieldLE {
            grid,
            data: vec![SymMat3::ZERO; grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    #[inline]
    pub fn data(&self) -> &[SymMat3] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [SymMat3] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, v: [usize; 3]) -> SymMat3 {
        self.data[self.grid.index_of(v)]
    }

    /// Largest `|log det|` over the field, i.e. the worst unit-determinant violation.
    pub fn max_log_det(&self) -> f64 {
        self.data.iter().map(|t| t.trace().abs()).fold(0.0, f64::max)
    }
}
