//! 3D FFT plans and the packing helpers used by the convolution stages.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for one 3D shape (x-fastest layout).
#[derive(Clone)]
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|n| planner.plan_fft_forward(n));
        let inv = dims.map(|n| planner.plan_fft_inverse(n));
        Fft3 { dims, fwd, inv }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        let all = self.all();
        self.run(buf, &self.fwd, [0, 1, 2], &all, &all);
    }

    /// Inverse transform including the `1/N` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        let all = self.all();
        self.run(buf, &self.inv, [0, 1, 2], &all, &all);
        self.normalize(buf);
    }

    /// Forward transform of a buffer that is zero outside the box
    /// `mask[0] × mask[1] × mask[2]`. Lines known to be zero are skipped.
    pub fn forward_sparse(&self, buf: &mut [Complex64], mask: &[Vec<bool>; 3]) {
        self.run(buf, &self.fwd, [0, 1, 2], mask, &self.all());
    }

    /// Inverse transform that is only exact inside the box given by `mask`;
    /// everything outside is left unspecified.
    pub fn inverse_region(&self, buf: &mut [Complex64], mask: &[Vec<bool>; 3]) {
        self.run(buf, &self.inv, [2, 1, 0], &self.all(), mask);
        self.normalize(buf);
    }

    /// Box mask selecting the indices `lo..hi` (taken periodically) on every axis.
    pub fn box_mask(&self, lo: i64, hi: i64) -> [Vec<bool>; 3] {
        self.dims.map(|n| {
            let mut m = vec![false; n];
            for i in lo..hi {
                m[i.rem_euclid(n as i64) as usize] = true;
            }
            m
        })
    }

    fn all(&self) -> [Vec<bool>; 3] {
        self.dims.map(|n| vec![true; n])
    }

    fn normalize(&self, buf: &mut [Complex64]) {
        let s = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// Separable passes in `order`. A line along axis `a` is transformed only
    /// if, on every other axis, its coordinate is either still untransformed
    /// and inside `input` (otherwise the line is zero) or already transformed
    /// and inside `output` (otherwise nobody reads it).
    fn run(
        &self,
        buf: &mut [Complex64],
        plans: &[Arc<dyn Fft<f64>>; 3],
        order: [usize; 3],
        input: &[Vec<bool>; 3],
        output: &[Vec<bool>; 3],
    ) {
        assert_eq!(buf.len(), self.len());
        let n = self.dims;
        let stride = [1, n[0], n[0] * n[1]];
        let scratch_len = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        let mut done = [false; 3];
        let mut batch = Vec::new();
        for &a in &order {
            let keep = |b: usize, c: usize| if done[b] { output[b][c] } else { input[b][c] };
            // the two other axes, the faster one innermost
            let (bi, bo) = match a {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            for co in (0..n[bo]).filter(|&c| keep(bo, c)) {
                let rows: Vec<usize> = (0..n[bi]).filter(|&c| keep(bi, c)).collect();
                if rows.is_empty() {
                    continue;
                }
                let base = co * stride[bo];
                if a == 0 {
                    for &ci in &rows {
                        let off = base + ci * stride[bi];
                        plans[0].process_with_scratch(&mut buf[off..off + n[0]], &mut scratch);
                    }
                    continue;
                }
                let len = n[a];
                batch.resize(rows.len() * len, Complex64::new(0.0, 0.0));
                for t in 0..len {
                    let off = base + t * stride[a];
                    for (q, &ci) in rows.iter().enumerate() {
                        batch[q * len + t] = buf[off + ci * stride[bi]];
                    }
                }
                plans[a].process_with_scratch(&mut batch, &mut scratch);
                for t in 0..len {
                    let off = base + t * stride[a];
                    for (q, &ci) in rows.iter().enumerate() {
                        buf[off + ci * stride[bi]] = batch[q * len + t];
                    }
                }
            }
            done[a] = true;
        }
    }
}

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5}.
pub fn good_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Writes a `support³` patch into a periodic buffer so that multiplying
/// spectra computes the correlation `Σ_o v(y + o) k(o)`.
pub fn place_reflected(patch: &[f64], support: usize, dims: [usize; 3], out: &mut [Complex64], imag: bool) {
    place(patch, support, dims, out, imag, -1);
}

/// Writes a `support³` patch centred on the origin of a periodic buffer, so
/// that multiplying spectra computes the convolution `Σ_o v(y - o) k(o)`.
pub fn place_centered(patch: &[f64], support: usize, dims: [usize; 3], out: &mut [Complex64], imag: bool) {
    place(patch, support, dims, out, imag, 1);
}

fn place(patch: &[f64], support: usize, dims: [usize; 3], out: &mut [Complex64], imag: bool, sign: i64) {
    let h = (support / 2) as i64;
    let wrap = |o: i64, n: usize| (sign * o).rem_euclid(n as i64) as usize;
    let mut p = 0;
    for oz in -h..=h {
        let z = wrap(oz, dims[2]);
        for oy in -h..=h {
            let y = wrap(oy, dims[1]);
            for ox in -h..=h {
                let x = wrap(ox, dims[0]);
                let idx = x + dims[0] * (y + dims[1] * z);
                if imag {
                    out[idx].im += patch[p];
                } else {
                    out[idx].re += patch[p];
                }
                p += 1;
            }
        }
    }
}

/// Splits the spectrum of `a + i b` (with `a`, `b` real) into the spectra of `a` and `b`.
pub fn split_packed(z: &[Complex64], dims: [usize; 3]) -> (Vec<Complex64>, Vec<Complex64>) {
    let [nx, ny, nz] = dims;
    let mut fa = vec![Complex64::new(0.0, 0.0); z.len()];
    let mut fb = vec![Complex64::new(0.0, 0.0); z.len()];
    for k in 0..nz {
        let mk = (nz - k) % nz;
        for j in 0..ny {
            let mj = (ny - j) % ny;
            for i in 0..nx {
                let mi = (nx - i) % nx;
                let idx = i + nx * (j + ny * k);
                let midx = mi + nx * (mj + ny * mk);
                let zk = z[idx];
                let zm = z[midx].conj();
                fa[idx] = (zk + zm) * 0.5;
                // (zk - zm) / 2i
                let d = (zk - zm) * 0.5;
                fb[idx] = Complex64::new(d.im, -d.re);
            }
        }
    }
    (fa, fb)
}
