use rustfft::num_complex::Complex64;

use super::ola::block_hann;
use super::saliency::{rectify, ROUNDING_FLOOR};
use super::OrientationSet;
use crate::error::{Error, Result};
use crate::fft::{good_size, place_centered, place_reflected, split_packed, Fft3};
use crate::linalg::SymMat3;
use crate::slogs::{steer_kernel, support_window, Dictionary, DiscreteKernel};
use crate::volume::{Grid, ScalarVolume, TensorFieldLE};

/// Raw overlap-add contributions of one block: the summed rectified
/// responses, the weighted tensor sum and the total sweep weight.
#[derive(Clone, Debug)]
pub struct BlockResult {
    pub edge: usize,
    pub cvm: Vec<f64>,
    pub num: Vec<SymMat3>,
    pub weight: Vec<f64>,
}

/// Sweep weights below this, or below the relative rounding floor, count as none.
pub const MIN_WEIGHT: f64 = 1e-12;

/// Weight-normalized tensors; voxels without weight get the LE zero.
pub(crate) fn normalize_sweep(num: &[SymMat3], weight: &[f64]) -> Vec<SymMat3> {
    let peak = weight.iter().fold(0.0f64, |m, &w| m.max(w));
    let floor = MIN_WEIGHT.max(ROUNDING_FLOOR * peak);
    num.iter()
        .zip(weight)
        .map(|(n, &w)| if w < floor { SymMat3::ZERO } else { n.scale(1.0 / w) })
        .collect()
}

impl BlockResult {
    /// Weight-normalized tensors; voxels without weight get the LE zero.
    pub fn normalized(&self) -> Vec<SymMat3> {
        normalize_sweep(&self.num, &self.weight)
    }
}

/// Reusable per-block machinery: FFT plan, Hann window, patch window and the
/// spectra of the isotropic kernels, which do not depend on the block.
pub struct BlockFilter<'a> {
    dict: &'a Dictionary,
    edge: usize,
    dims: [usize; 3],
    fft: Fft3,
    hann: Vec<f64>,
    xi: Vec<f64>,
    /// Nonzero box of a placed patch and of the block itself.
    patch_mask: [Vec<bool>; 3],
    block_mask: [Vec<bool>; 3],
    /// `F(k₁ + i k₂)` and `F(w₁ - i w₂)` for the delta and flat kernels.
    iso: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

// Packing identities used below, for real a, b, p, q:
//   F(a)·F(p + i q) = F(a⋆p + i a⋆q)
//   Re F⁻¹[F(a + i b)·F(p - i q)] = a∗p + b∗q
// so pairs of kernels share one transform and only the block's own
// spectrum is ever split.
impl<'a> BlockFilter<'a> {
    pub fn new(dict: &'a Dictionary, edge: usize) -> Result<Self> {
        let s = dict.support();
        if dict.response_kernels().next().is_none() {
            return Err(Error::Empty("dictionary has no response kernels".into()));
        }
        if edge % 2 != 0 || edge < 2 * s {
            return Err(Error::param(
                "block_edge",
                format!("{edge} must be even and at least twice the kernel support {s}"),
            ));
        }
        // linear correlation and sweep both reach half a support past the block
        let n = good_size(edge + s / 2);
        let dims = [n; 3];
        let fft = Fft3::new(dims);
        let xi = support_window(s);
        let h = (s / 2) as i64;
        let patch_mask = fft.box_mask(-h, h + 1);
        let block_mask = fft.box_mask(0, edge as i64);
        let iso_kernels: Vec<&DiscreteKernel> = dict.isotropic_kernels().collect();
        let iso = if iso_kernels.is_empty() {
            None
        } else {
            let mut k = fft.zeros();
            let mut w = fft.zeros();
            for (slot, kern) in iso_kernels.iter().take(2).enumerate() {
                place_reflected(&kern.k_patch, s, dims, &mut k, slot == 1);
                let sign = if slot == 1 { -1.0 } else { 1.0 };
                let field: Vec<f64> = kern.gamma_patch.iter().zip(&xi).map(|(g, x)| sign * g * x).collect();
                place_centered(&field, s, dims, &mut w, slot == 1);
            }
            fft.forward_sparse(&mut k, &patch_mask);
            fft.forward_sparse(&mut w, &patch_mask);
            Some((k, w))
        };
        Ok(BlockFilter { dict, edge, dims, fft, hann: block_hann(edge), xi, patch_mask, block_mask, iso })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    /// Filters one `edge³` block. `block` and `negated` are raw samples; the
    /// Hann window is applied here.
    pub fn run(&self, block: &ScalarVolume, negated: &ScalarVolume, theta: &OrientationSet) -> Result<BlockResult> {
        let e = self.edge;
        if block.dims() != [e; 3] || negated.dims() != [e; 3] {
            return Err(Error::InvalidVolume(format!(
                "block dims {:?} / {:?}, expected edge {e}",
                block.dims(),
                negated.dims()
            )));
        }
        if theta.is_empty() {
            return Err(Error::param("theta", "orientation set is empty"));
        }
        let s = self.dict.support();
        let n = self.dims[0];
        let local = |l: usize| {
            let (i, j, k) = (l % e, (l / e) % e, l / (e * e));
            i + n * (j + n * k)
        };

        let mut z = self.fft.zeros();
        for l in 0..e * e * e {
            z[local(l)] = Complex64::new(block.data()[l] * self.hann[l], negated.data()[l] * self.hann[l]);
        }
        self.fft.forward_sparse(&mut z, &self.block_mask);
        let (f_pos, f_neg) = split_packed(&z, self.dims);
        let fl = |v: &ScalarVolume| ROUNDING_FLOOR * v.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (floor_pos, floor_neg) = (fl(block), fl(negated));

        let mut out = BlockResult {
            edge: e,
            cvm: vec![0.0; e * e * e],
            num: vec![SymMat3::ZERO; e * e * e],
            weight: vec![0.0; e * e * e],
        };
        // spectra of the six tensor components and the weight, accumulated over kernels
        let mut acc = vec![self.fft.zeros(); 7];
        let mut vs = self.fft.zeros();
        let mut p = self.fft.zeros();
        let mut field = vec![0.0; s * s * s];

        let mut steered = Vec::with_capacity(theta.len() * 6);
        for b in &theta.bases {
            for k in self.dict.response_kernels() {
                steered.push(steer_kernel(k, b)?);
            }
        }
        for pair in steered.chunks(2) {
            z.fill(Complex64::new(0.0, 0.0));
            for (slot, k) in pair.iter().enumerate() {
                place_reflected(&k.k_patch, s, self.dims, &mut z, slot == 1);
            }
            self.fft.forward_sparse(&mut z, &self.patch_mask);
            for (zi, f) in z.iter_mut().zip(&f_pos) {
                *zi *= f;
            }
            self.fft.inverse_region(&mut z, &self.block_mask);

            vs.fill(Complex64::new(0.0, 0.0));
            for l in 0..e * e * e {
                let r = z[local(l)];
                let b = if pair.len() > 1 { rectify(r.im, floor_pos) } else { 0.0 };
                let a = rectify(r.re, floor_pos);
                out.cvm[l] += a + b;
                vs[local(l)] = Complex64::new(a, b);
            }
            self.fft.forward_sparse(&mut vs, &self.block_mask);

            for (c, a) in acc.iter_mut().enumerate() {
                p.fill(Complex64::new(0.0, 0.0));
                for (slot, k) in pair.iter().enumerate() {
                    let sign = if slot == 1 { -1.0 } else { 1.0 };
                    for (o, f) in field.iter_mut().enumerate() {
                        let w = sign * k.gamma_patch[o] * self.xi[o];
                        *f = if c < 6 { w * k.tensor_patch[o].to_array()[c] } else { w };
                    }
                    place_centered(&field, s, self.dims, &mut p, slot == 1);
                }
                self.fft.forward_sparse(&mut p, &self.patch_mask);
                for ((ai, v), q) in a.iter_mut().zip(&vs).zip(&p) {
                    *ai += v * q;
                }
            }
        }

        // boundary and background: isotropic kernels on the negative, identity tensors
        if let Some((fk, fw)) = &self.iso {
            for (zi, (k, f)) in z.iter_mut().zip(fk.iter().zip(&f_neg)) {
                *zi = k * f;
            }
            self.fft.inverse_region(&mut z, &self.block_mask);
            vs.fill(Complex64::new(0.0, 0.0));
            for l in 0..e * e * e {
                let r = z[local(l)];
                vs[local(l)] = Complex64::new(rectify(r.re, floor_neg), rectify(r.im, floor_neg));
            }
            self.fft.forward_sparse(&mut vs, &self.block_mask);
            let m = theta.len() as f64;
            for ((ai, v), w) in acc[6].iter_mut().zip(&vs).zip(fw) {
                *ai += v * w * m;
            }
        }

        let mut fields = vec![vec![0.0; e * e * e]; 7];
        for (a, f) in acc.iter_mut().zip(&mut fields) {
            self.fft.inverse_region(a, &self.block_mask);
            for (l, x) in f.iter_mut().enumerate() {
                *x = a[local(l)].re;
            }
        }
        for l in 0..e * e * e {
            out.num[l] = SymMat3::from_array([0, 1, 2, 3, 4, 5].map(|c| fields[c][l]));
            out.weight[l] = fields[6][l];
        }
        Ok(out)
    }
}

/// One-shot block filtering: the summed rectified responses and the
/// weight-normalized tensor sweep, both windowed by the block's Hann window.
pub fn filter_block(
    block: &ScalarVolume,
    dict: &Dictionary,
    theta: &OrientationSet,
    negated_block: &ScalarVolume,
) -> Result<(ScalarVolume, TensorFieldLE)> {
    let edge = block.dims()[0];
    let r = BlockFilter::new(dict, edge)?.run(block, negated_block, theta)?;
    let grid = Grid { dims: [edge; 3], spacing: block.grid().spacing };
    let tf = TensorFieldLE::new(grid, r.normalized())?;
    Ok((ScalarVolume::new(grid, r.cvm)?, tf))
}
