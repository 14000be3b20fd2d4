use super::kernel::normalize_response;
use super::{patch_offset, DiscreteKernel};
use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, Mat3, SymMat3, Vec3};

const SNAP: f64 = 1e-9;

/// Rotates a kernel so that its orientation basis lands on `omega_basis`.
///
/// Scalar patches are resampled trilinearly at `Rᵗ y` (zero outside the
/// support) and re-centred to zero mean. When the kernel carries its
/// sub-voxel source, the resampling reads that finer lattice and averages
/// over the same sub-grid the kernel was built on, so thin kernels keep their
/// energy; steering a steered kernel starts again from the source. Tensors are
/// interpolated in LE coordinates and conjugated by `R`, which equals rotating
/// the SPD tensor and taking its log again.
pub fn steer_kernel(k: &DiscreteKernel, omega_basis: &Mat3) -> Result<DiscreteKernel> {
    let phi = match (k.kind.is_steerable(), k.phi) {
        (true, Some(phi)) => phi,
        _ => {
            return Err(Error::param(
                "kind",
                format!("{} kernels have no orientation and cannot be steered", k.kind.name()),
            ))
        }
    };
    let err = orthonormality_error(omega_basis);
    if !(err <= 1e-8) {
        return Err(Error::param(
            "omega_basis",
            format!("not orthonormal (max |QᵗQ - I| = {err:e})"),
        ));
    }
    let n = k.len();
    let s = k.support;
    let (r, tensors) = match &k.source {
        Some(src) => (omega_basis * src.phi.transpose(), &src.tensor_patch),
        None => (omega_basis * phi.transpose(), &k.tensor_patch),
    };
    let rt = r.transpose();
    let mut k_patch = vec![0.0; n];
    let mut gamma_patch = vec![0.0; n];
    let mut tensor_patch = vec![SymMat3::ZERO; n];
    let mut corners = Vec::with_capacity(8);
    match &k.source {
        Some(src) => {
            let os = src.oversample;
            let fine_dim = s * os;
            let lat = src.lattice.get_or_init(|| padded_lattice(fine_dim, &src.fine_k, &src.fine_gamma));
            let h = 1.0 / os as f64;
            let shift = (s / 2) as f64 + 0.5;
            let scale = os as f64;
            // sub-voxel sample offsets, already in fine lattice units
            let sub: Vec<[f64; 3]> = (0..os.pow(3))
                .map(|t| {
                    let c = |a: usize| (a as f64 + 0.5) * h - 0.5;
                    let d = rt * Vec3::new(c(t % os), c((t / os) % os), c(t / (os * os)));
                    [0, 1, 2].map(|a| (d[a] + shift) * scale - 0.5)
                })
                .collect();
            // voxels whose whole sample cloud misses the lattice stay zero
            let reach = (shift + 0.5 * 3f64.sqrt()) * scale + 1.0;
            let inv = 1.0 / sub.len() as f64;
            for idx in 0..n {
                let o = patch_offset(s, idx);
                let x0 = rt * Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64) * scale;
                if (0..3).any(|a| x0[a].abs() > reach) {
                    continue;
                }
                let (mut kv, mut gv) = (0.0, 0.0);
                for d in &sub {
                    if let Some([a, b]) = lat.sample([x0[0] + d[0], x0[1] + d[1], x0[2] + d[2]]) {
                        kv += a;
                        gv += b;
                    }
                }
                k_patch[idx] = kv * inv;
                gamma_patch[idx] = gv * inv;
            }
        }
        None => {
            for idx in 0..n {
                let o = patch_offset(s, idx);
                let x = rt * Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64);
                lattice_corners(s, [x[0] + (s / 2) as f64, x[1] + (s / 2) as f64, x[2] + (s / 2) as f64], &mut corners);
                for &(c, w) in &corners {
                    k_patch[idx] += w * k.k_patch[c];
                    gamma_patch[idx] += w * k.gamma_patch[c];
                }
            }
        }
    }
    for (idx, out) in tensor_patch.iter_mut().enumerate() {
        let o = patch_offset(s, idx);
        let x = rt * Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64);
        lattice_corners(s, [x[0] + (s / 2) as f64, x[1] + (s / 2) as f64, x[2] + (s / 2) as f64], &mut corners);
        let mut t = SymMat3::ZERO;
        for &(c, w) in &corners {
            t.add_scaled(&tensors[c], w);
        }
        *out = t.conjugate(&r).trace_free();
    }
    // voxelized energy of a thin kernel depends on its orientation, so every
    // steered copy is brought back to zero mean and unit norm
    normalize_response(&mut k_patch, false)?;
    Ok(DiscreteKernel {
        support: s,
        k_patch,
        gamma_patch,
        tensor_patch,
        phi: Some(*omega_basis),
        kind: k.kind,
        params: k.params,
        diagnostics: k.diagnostics,
        source: k.source.clone(),
    })
}

/// Interleaved `(k, Γ)` fine lattice with a one-sample zero border, so that
/// trilinear reads need no per-corner bounds checks.
#[derive(Debug)]
pub(crate) struct Padded {
    dim: usize,
    pd: usize,
    data: Vec<[f64; 2]>,
}

fn padded_lattice(dim: usize, k: &[f64], g: &[f64]) -> Padded {
    let pd = dim + 2;
    let mut data = vec![[0.0; 2]; pd * pd * pd];
    for z in 0..dim {
        for y in 0..dim {
            for x in 0..dim {
                let src = x + dim * (y + dim * z);
                data[(x + 1) + pd * ((y + 1) + pd * (z + 1))] = [k[src], g[src]];
            }
        }
    }
    Padded { dim, pd, data }
}

impl Padded {
    /// Same sampling rule as `lattice_corners`: `None` when the base corner
    /// lies outside, zero-extended otherwise.
    #[inline]
    fn sample(&self, u: [f64; 3]) -> Option<[f64; 2]> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            // shifted to positive so truncation is the floor
            let t = u[a] + 2.0;
            if !(t >= 1.0 - SNAP && t < self.dim as f64 + 3.0) {
                return None;
            }
            let mut f = t as usize;
            let mut fr = t - f as f64;
            if fr < SNAP {
                fr = 0.0;
            } else if fr > 1.0 - SNAP {
                f += 1;
                fr = 0.0;
            }
            if f < 1 || f > self.dim + 1 {
                return None;
            }
            base[a] = f - 1;
            frac[a] = fr;
        }
        let (pd, d) = (self.pd, &self.data);
        let i0 = base[0] + pd * (base[1] + pd * base[2]);
        let [fx, fy, fz] = frac;
        let lerp = |i: usize| {
            let (a, b) = (d[i], d[i + 1]);
            [a[0] + fx * (b[0] - a[0]), a[1] + fx * (b[1] - a[1])]
        };
        let (c00, c10, c01, c11) = (lerp(i0), lerp(i0 + pd), lerp(i0 + pd * pd), lerp(i0 + pd + pd * pd));
        let mut out = [0.0; 2];
        for c in 0..2 {
            let y0 = c00[c] + fy * (c10[c] - c00[c]);
            let y1 = c01[c] + fy * (c11[c] - c01[c]);
            out[c] = y0 + fz * (y1 - y0);
        }
        Some(out)
    }
}

/// Corner indices and weights for trilinear sampling of a cubic lattice of
/// edge `dim` at lattice coordinate `u`; corners outside are dropped (zero
/// extension). Coordinates within `SNAP` of an integer are snapped so that
/// lattice-preserving rotations stay exact.
fn lattice_corners(dim: usize, u: [f64; 3], out: &mut Vec<(usize, f64)>) {
    out.clear();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let mut v = u[a];
        let r = v.round();
        if (v - r).abs() < SNAP {
            v = r;
        }
        let f = v.floor();
        base[a] = f as i64;
        frac[a] = v - f;
    }
    let d = dim as i64;
    if base.iter().any(|&b| b < -1 || b >= d) {
        return;
    }
    for corner in 0..8 {
        let mut w = 1.0;
        let mut c = [0i64; 3];
        for a in 0..3 {
            let bit = (corner >> a) & 1;
            c[a] = base[a] + bit as i64;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w == 0.0 || c.iter().any(|&v| v < 0 || v >= d) {
            continue;
        }
        out.push(((c[0] + d * (c[1] + d * c[2])) as usize, w));
    }
}
