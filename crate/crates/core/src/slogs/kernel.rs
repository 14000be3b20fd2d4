use super::gamma::{eval_gamma, gamma_derivatives, gauge_frame};
use super::{check_support, patch_offset, DiscreteKernel, KernelKind, KernelParams};
use std::sync::Arc;

use super::SteerSource;
use crate::error::{Error, Result};
use crate::linalg::{eig_sym3_unchecked, make_proper, nearest_rotation, Mat3, SymMat3, Vec3};

/// Points whose gradient norm falls below this fraction of the patch maximum
/// are treated as ridge points.
pub const RIDGE_FRACTION: f64 = 1e-8;
/// Floor on `|λ|` (relative to `|λ3|`) before forming the semiaxis ratios.
pub const PSI_FLOOR: f64 = 1e-10;
pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Quantities measured while building a kernel, kept for validation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KernelDiagnostics {
    /// Worst `|ωᵗHω - Σ γ λ| / |ωᵗHω|` over off-ridge sample points.
    pub factorization_error: f64,
    /// Worst `|Σ γ - 1|`.
    pub gamma_sum_error: f64,
    pub samples: usize,
    pub ridge_samples: usize,
    /// Angle between the raw Γ-weighted orientation integral and its
    /// orthonormalized version.
    pub phi_deviation_deg: f64,
}

/// Diagonal of the unit-volume ellipsoid built from Hessian eigenvalues
/// ordered by ascending magnitude.
pub fn psi_diagonal(values: [f64; 3]) -> [f64; 3] {
    let logs = psi_logs(values);
    logs.map(f64::exp)
}

fn psi_logs(values: [f64; 3]) -> [f64; 3] {
    let a3 = values[2].abs();
    if a3 == 0.0 || !a3.is_finite() {
        return [0.0; 3];
    }
    let floor = PSI_FLOOR * a3;
    let a1 = values[0].abs().max(floor);
    let a2 = values[1].abs().max(floor);
    let l = [a1.ln() - 0.5 * (a2.ln() + a3.ln()), a2.ln() - a3.ln(), 0.0];
    let m = (l[0] + l[1] + l[2]) / 3.0;
    l.map(|x| x - m)
}

/// Builds a curvilinear kernel on a `support³` patch.
///
/// Each voxel value is the average over an `oversample³` sub-grid; every
/// sub-point gets its own finite-difference gradient and Hessian with step
/// `1 / oversample`. Averaging over the voxel footprint rather than point
/// sampling keeps thin kernels (`σ ≈ 0.5`) from aliasing into rings. The
/// sub-point samples are kept as the steering source.
pub fn build_kernel(p: &KernelParams, support: usize, oversample: usize) -> Result<DiscreteKernel> {
    p.validate()?;
    check_support(support)?;
    if !(2..=16).contains(&oversample) {
        return Err(Error::param("oversample", format!("{oversample} not in [2, 16]")));
    }
    let h = 1.0 / oversample as f64;
    let n = support.pow(3);
    let fine_dim = support * oversample;
    let fine_len = fine_dim.pow(3);
    let half = (support / 2) as f64;
    let coord = |j: usize| (j as f64 + 0.5) * h - 0.5 - half;

    let mut points = Vec::with_capacity(fine_len);
    let mut derivs = Vec::with_capacity(fine_len);
    for fk in 0..fine_dim {
        for fj in 0..fine_dim {
            for fi in 0..fine_dim {
                let x = [coord(fi), coord(fj), coord(fk)];
                points.push(x);
                derivs.push(gamma_derivatives(x, p, h));
            }
        }
    }
    let gmax = derivs
        .iter()
        .map(|(g, _)| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
        .fold(0.0, f64::max);
    if gmax == 0.0 || !gmax.is_finite() {
        return Err(Error::DegenerateKernel("gradient vanishes over the whole support".into()));
    }

    let mut diag = KernelDiagnostics::default();
    let mut fine_k = vec![0.0; fine_len];
    let mut fine_gamma = vec![0.0; fine_len];
    let mut tensor_patch = vec![SymMat3::ZERO; n];
    let mut moments = [SymMat3::ZERO; 3];
    let mut raw = Mat3::zeros();
    let inv = 1.0 / oversample.pow(3) as f64;
    for (s, (x, (grad, hess))) in points.iter().zip(&derivs).enumerate() {
        let (fi, fj, fk) = (s % fine_dim, (s / fine_dim) % fine_dim, s / (fine_dim * fine_dim));
        let voxel = fi / oversample + support * (fj / oversample + support * (fk / oversample));
        let gnorm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        let ridge = gnorm < RIDGE_FRACTION * gmax;
        let eig = eig_sym3_unchecked(hess);
        let frame = gauge_frame(*grad, &eig, ridge);
        let om = [frame.omega[0], frame.omega[1], frame.omega[2]];
        let k = hess.quad(&om);
        diag.samples += 1;
        if ridge {
            diag.ridge_samples += 1;
        } else {
            let factored: f64 = (0..3).map(|l| frame.gamma_weights[l] * eig.values[l]).sum();
            if k != 0.0 {
                diag.factorization_error = diag.factorization_error.max((k - factored).abs() / k.abs());
            }
            let gsum: f64 = frame.gamma_weights.iter().sum();
            diag.gamma_sum_error = diag.gamma_sum_error.max((gsum - 1.0).abs());
        }
        let g = eval_gamma(*x, p);
        fine_k[s] = k;
        fine_gamma[s] = g;
        let le = SymMat3::from_eigen(psi_logs(eig.values), &eig.vectors);
        tensor_patch[voxel].add_scaled(&le, inv);
        let q = make_proper(&eig.vectors);
        raw += q * g;
        for (l, m) in moments.iter_mut().enumerate() {
            let c = q.column(l);
            m.add_scaled(&SymMat3::new(c[0] * c[0], c[0] * c[1], c[0] * c[2], c[1] * c[1], c[1] * c[2], c[2] * c[2]), g);
        }
    }

    // centre and normalize on the fine lattice; voxel means inherit it.
    // K itself is the bright-tube detector here: the gauge second derivative
    // has a positive integral, so after DC removal it is centre-surround
    // positive for any vessel wider than the sub-voxel core.
    let fine_mean = fine_k.iter().sum::<f64>() / fine_len as f64;
    fine_k.iter_mut().for_each(|v| *v -= fine_mean);
    let mut k_patch = voxel_means(&fine_k, support, oversample);
    let norm = k_patch.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateKernel("response patch has zero energy".into()));
    }
    fine_k.iter_mut().for_each(|v| *v /= norm);
    k_patch.iter_mut().for_each(|v| *v /= norm);
    let gamma_patch = voxel_means(&fine_gamma, support, oversample);

    let phi = orientation_basis(&moments, &raw);
    diag.phi_deviation_deg = phi_deviation(&raw, &phi);
    // exact trace-free projection removes accumulated roundoff
    tensor_patch.iter_mut().for_each(|t| *t = t.trace_free());

    let source = SteerSource {
        oversample,
        phi,
        fine_k,
        fine_gamma,
        tensor_patch: tensor_patch.clone(),
        lattice: Default::default(),
    };
    Ok(DiscreteKernel {
        support,
        k_patch,
        gamma_patch,
        tensor_patch,
        phi: Some(phi),
        kind: KernelKind::Curvilinear,
        params: Some(*p),
        diagnostics: diag,
        source: Some(Arc::new(source)),
    })
}

fn voxel_means(fine: &[f64], support: usize, oversample: usize) -> Vec<f64> {
    let fine_dim = support * oversample;
    let mut out = vec![0.0; support.pow(3)];
    for (s, v) in fine.iter().enumerate() {
        let (fi, fj, fk) = (s % fine_dim, (s / fine_dim) % fine_dim, s / (fine_dim * fine_dim));
        out[fi / oversample + support * (fj / oversample + support * (fk / oversample))] += v;
    }
    let inv = 1.0 / oversample.pow(3) as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    out
}

/// Orientation basis from Γ-weighted second moments of each eigenvector
/// column. Moments ignore eigenvector signs, so symmetric kernels are not
/// tilted by the sign convention; the raw integral only fixes the signs.
fn orientation_basis(moments: &[SymMat3; 3], raw: &Mat3) -> Mat3 {
    let mut cols = [Vec3::zeros(); 3];
    for l in 0..3 {
        let mut v = eig_sym3_unchecked(&moments[l]).vector(2);
        if v.dot(&raw.column(l)) < 0.0 {
            v = -v;
        }
        cols[l] = v;
    }
    nearest_rotation(&Mat3::from_columns(&cols))
}

fn phi_deviation(raw: &Mat3, phi: &Mat3) -> f64 {
    (0..3)
        .map(|c| {
            let a = raw.column(c);
            let n = a.norm();
            if n == 0.0 {
                return 90.0;
            }
            (a.dot(&phi.column(c)) / n).clamp(-1.0, 1.0).acos().to_degrees()
        })
        .fold(0.0, f64::max)
}

/// Optionally negates, then removes the mean and scales to unit L2 norm.
pub(crate) fn normalize_response(k: &mut [f64], negate: bool) -> Result<()> {
    if negate {
        k.iter_mut().for_each(|v| *v = -*v);
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateKernel("response patch has zero energy".into()));
    }
    k.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// The isotropic pair: `delta` is the sign-flipped LoG of a narrow isotropic
/// Gaussian; `flat` carries the opposite profile (with a uniform impulse
/// response) and is meant to be applied to the image negative.
pub fn degenerate_kernels(sigma_delta: f64, support: usize) -> Result<(DiscreteKernel, DiscreteKernel)> {
    degenerate_kernels_with(sigma_delta, support, DEFAULT_OVERSAMPLE)
}

pub(crate) fn degenerate_kernels_with(
    sigma_delta: f64,
    support: usize,
    oversample: usize,
) -> Result<(DiscreteKernel, DiscreteKernel)> {
    if !(sigma_delta > 0.0 && sigma_delta <= 1.0) {
        return Err(Error::param("sigma_delta", format!("{sigma_delta} not in (0, 1]")));
    }
    check_support(support)?;
    let s2 = sigma_delta * sigma_delta;
    let norm = (2.0 * std::f64::consts::PI * s2).powf(-1.5);
    let h = 1.0 / oversample as f64;
    let subs: Vec<f64> = (0..oversample).map(|a| (a as f64 + 0.5) * h - 0.5).collect();
    let n = support.pow(3);
    let inv = 1.0 / oversample.pow(3) as f64;
    let mut k = vec![0.0; n];
    let mut g = vec![0.0; n];
    for idx in 0..n {
        let o = patch_offset(support, idx);
        for &dz in &subs {
            for &dy in &subs {
                for &dx in &subs {
                    let (x, y, z) = (o[0] as f64 + dx, o[1] as f64 + dy, o[2] as f64 + dz);
                    let r2 = x * x + y * y + z * z;
                    let gv = norm * (-0.5 * r2 / s2).exp();
                    g[idx] += gv * inv;
                    k[idx] += gv * (r2 / (s2 * s2) - 3.0 / s2) * inv;
                }
            }
        }
    }
    normalize_response(&mut k, true)?;
    let delta = DiscreteKernel {
        support,
        k_patch: k.clone(),
        gamma_patch: g,
        tensor_patch: vec![SymMat3::ZERO; n],
        phi: None,
        kind: KernelKind::Delta,
        params: None,
        diagnostics: KernelDiagnostics::default(),
        source: None,
    };
    let flat = DiscreteKernel {
        support,
        k_patch: k.iter().map(|v| -v).collect(),
        gamma_patch: vec![1.0 / n as f64; n],
        tensor_patch: vec![SymMat3::ZERO; n],
        phi: None,
        kind: KernelKind::Flat,
        params: None,
        diagnostics: KernelDiagnostics::default(),
        source: None,
    };
    Ok((delta, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spd_exp;
    use crate::slogs::patch_index;

    #[test]
    fn psi_hand_evaluation() {
        let psi = psi_diagonal([1.0, 2.0, 4.0]);
        let expect = [0.6300, 0.8909, 1.7818];
        for a in 0..3 {
            assert!((psi[a] - expect[a]).abs() < 5e-5, "{psi:?}");
        }
        assert!((psi.iter().product::<f64>() - 1.0).abs() < 1e-12);
        // signs do not matter, only magnitudes
        assert_eq!(psi_diagonal([-1.0, 2.0, -4.0]), psi);
    }

    #[test]
    fn psi_survives_zero_eigenvalues() {
        let psi = psi_diagonal([0.0, 0.0, 3.0]);
        assert!(psi.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!((psi.iter().product::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(psi_diagonal([0.0; 3]), [1.0; 3]);
    }

    #[test]
    fn tube_kernel_contract() {
        let k = build_kernel(&KernelParams::tube(), 11, 4).unwrap();
        let mean = k.k_patch.iter().sum::<f64>() / k.len() as f64;
        let norm = k.k_patch.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(k.gamma_patch.iter().all(|&g| g >= 0.0));
        assert!(k.diagnostics.factorization_error <= 1e-9, "{:?}", k.diagnostics);
        assert!(k.diagnostics.gamma_sum_error <= 1e-10);
        let phi = k.phi.unwrap();
        let angle = phi.column(0)[0].abs().clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 1.0, "first axis off by {angle} degrees");
        for t in &k.tensor_patch {
            let det = spd_exp(t).det();
            assert!((det - 1.0).abs() <= 1e-6);
        }
        // bright Gaussian tubes along x respond positively, strongest on the axis
        for r in [1.0f64, 1.5, 2.5] {
            let resp = |dy: f64| -> f64 {
                (0..k.len())
                    .map(|i| {
                        let o = patch_offset(11, i);
                        let (y, z) = (o[1] as f64 + dy, o[2] as f64);
                        k.k_patch[i] * (-(y * y + z * z) / (2.0 * r * r)).exp()
                    })
                    .sum()
            };
            let axis = resp(0.0);
            assert!(axis > 0.0, "radius {r}: {axis}");
            for dy in 1..6 {
                assert!(resp(dy as f64) < axis, "radius {r}, offset {dy}");
            }
        }
    }

    #[test]
    fn curved_kernels_hold_the_factorization() {
        for c in [[0.0, 0.3, 0.0], [0.0, 0.0, 0.05], [0.3, 0.1, 0.0]] {
            let p = KernelParams::new([2.0, 0.5, 0.5], c).unwrap();
            let k = build_kernel(&p, 9, 2).unwrap();
            assert!(k.diagnostics.factorization_error <= 1e-9, "{c:?}: {:?}", k.diagnostics);
            assert!(k.diagnostics.gamma_sum_error <= 1e-10);
            assert!(crate::linalg::orthonormality_error(&k.phi.unwrap()) < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_kernel(&KernelParams::tube(), 10, 4).is_err());
        assert!(build_kernel(&KernelParams::tube(), 11, 1).is_err());
        let bad = KernelParams {
            sigma: [0.1, 0.5, 0.5],
            curvature: [0.0; 3],
        };
        assert!(build_kernel(&bad, 11, 4).is_err());
        assert!(degenerate_kernels(0.0, 11).is_err());
        assert!(degenerate_kernels(1.5, 11).is_err());
    }

    #[test]
    fn degenerate_pair() {
        let (delta, flat) = degenerate_kernels(0.5, 11).unwrap();
        assert!(delta.tensor_patch.iter().all(|t| *t == SymMat3::ZERO));
        assert!(flat.tensor_patch.iter().all(|t| *t == SymMat3::ZERO));
        assert!(delta.phi.is_none() && flat.phi.is_none());
        let h = 5i64;
        for idx in 0..delta.len() {
            let [x, y, z] = patch_offset(11, idx);
            let v = delta.k_patch[idx];
            for r in [[y, x, z], [z, y, x], [x, z, y], [-y, x, z], [x, -z, y]] {
                assert!(r.iter().all(|c| c.abs() <= h));
                assert!((delta.k_patch[patch_index(11, r)] - v).abs() < 1e-10);
            }
            assert_eq!(flat.k_patch[idx], -v);
        }
        assert!(delta.k_patch[patch_index(11, [0, 0, 0])] > 0.0);
        let mean = delta.k_patch.iter().sum::<f64>() / delta.len() as f64;
        assert!(mean.abs() < 1e-12);
    }
}
