//! Symmetric 3x3 algebra: eigen-decomposition and the SPD log/exp maps.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Eigenvalues at or below this are clamped before taking a matrix log.
pub const SPD_FLOOR: f64 = 1e-12;
/// Eigenvalues below this are rejected outright rather than clamped.
pub const SPD_REJECT: f64 = -1e-6;

/// Symmetric 3x3 matrix, stored as its six independent entries.
///
/// The component order `xx, xy, xz, yy, yz, zz` is also the on-disk order of
/// tensor fields.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat3 {
    pub xx: f64,
    pub xy: f64,
    pub xz: f64,
    pub yy: f64,
    pub yz: f64,
    pub zz: f64,
}

impl SymMat3 {
    pub const ZERO: SymMat3 = SymMat3 {
        xx: 0.0,
        xy: 0.0,
        xz: 0.0,
        yy: 0.0,
        yz: 0.0,
        zz: 0.0,
    };

    pub const IDENTITY: SymMat3 = SymMat3 {
        xx: 1.0,
        xy: 0.0,
        xz: 0.0,
        yy: 1.0,
        yz: 0.0,
        zz: 1.0,
    };

    pub fn new(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64, zz: f64) -> Self {
        SymMat3 { xx, xy, xz, yy, yz, zz }
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymMat3::new(a, 0.0, 0.0, b, 0.0, c)
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        SymMat3::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    /// Symmetric part of a general matrix.
    pub fn from_matrix(m: &Mat3) -> Self {
        SymMat3::new(
            m[(0, 0)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
            m[(1, 1)],
            0.5 * (m[(1, 2)] + m[(2, 1)]),
            m[(2, 2)],
        )
    }

    pub fn to_matrix(self) -> Mat3 {
        Mat3::new(
            self.xx, self.xy, self.xz, //
            self.xy, self.yy, self.yz, //
            self.xz, self.yz, self.zz,
        )
    }

    /// `Q diag(values) Qᵗ`.
    pub fn from_eigen(values: [f64; 3], q: &Mat3) -> Self {
        let mut out = SymMat3::ZERO;
        for l in 0..3 {
            let c = q.column(l);
            let s = values[l];
            out.xx += s * c[0] * c[0];
            out.xy += s * c[0] * c[1];
            out.xz += s * c[0] * c[2];
            out.yy += s * c[1] * c[1];
            out.yz += s * c[1] * c[2];
            out.zz += s * c[2] * c[2];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    pub fn det(&self) -> f64 {
        self.xx * (self.yy * self.zz - self.yz * self.yz) - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + 2.0 * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz))
            .sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Self {
        SymMat3::new(
            self.xx * s,
            self.xy * s,
            self.xz * s,
            self.yy * s,
            self.yz * s,
            self.zz * s,
        )
    }

    #[inline]
    pub fn add(self, o: SymMat3) -> Self {
        SymMat3::new(
            self.xx + o.xx,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yy + o.yy,
            self.yz + o.yz,
            self.zz + o.zz,
        )
    }

    #[inline]
    pub fn add_scaled(&mut self, o: &SymMat3, s: f64) {
        self.xx += s * o.xx;
        self.xy += s * o.xy;
        self.xz += s * o.xz;
        self.yy += s * o.yy;
        self.yz += s * o.yz;
        self.zz += s * o.zz;
    }

    /// Removes the isotropic part `trace/3 · I`. In Log-Euclidean coordinates
    /// this rescales the tensor to unit determinant.
    pub fn trace_free(self) -> Self {
        let t = self.trace() / 3.0;
        SymMat3::new(self.xx - t, self.xy, self.xz, self.yy - t, self.yz, self.zz - t)
    }

    /// `vᵗ M v`.
    #[inline]
    pub fn quad(&self, v: &[f64; 3]) -> f64 {
        self.xx * v[0] * v[0]
            + self.yy * v[1] * v[1]
            + self.zz * v[2] * v[2]
            + 2.0 * (self.xy * v[0] * v[1] + self.xz * v[0] * v[2] + self.yz * v[1] * v[2])
    }

    /// `uᵗ M v`.
    #[inline]
    pub fn bilinear(&self, u: &[f64; 3], v: &[f64; 3]) -> f64 {
        u[0] * (self.xx * v[0] + self.xy * v[1] + self.xz * v[2])
            + u[1] * (self.xy * v[0] + self.yy * v[1] + self.yz * v[2])
            + u[2] * (self.xz * v[0] + self.yz * v[1] + self.zz * v[2])
    }

    /// `R M Rᵗ`.
    pub fn conjugate(&self, r: &Mat3) -> Self {
        SymMat3::from_matrix(&(r * self.to_matrix() * r.transpose()))
    }
}

impl std::ops::Sub for SymMat3 {
    type Output = SymMat3;
    fn sub(self, o: SymMat3) -> SymMat3 {
        self.add(o.scale(-1.0))
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues are sorted by ascending absolute value and the columns of
/// `vectors` are the matching unit eigenvectors. Each eigenvector is signed
/// so that its largest-magnitude component is non-negative (ties go to the
/// lowest axis).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenDecomp3 {
    pub values: [f64; 3],
    pub vectors: Mat3,
}

impl EigenDecomp3 {
    pub fn vector(&self, l: usize) -> Vec3 {
        self.vectors.column(l).into_owned()
    }

    pub fn reconstruct(&self) -> SymMat3 {
        SymMat3::from_eigen(self.values, &self.vectors)
    }
}

/// Eigen-decomposition with the ordering and sign conventions of [`EigenDecomp3`].
pub fn eig_sym3(m: &SymMat3) -> Result<EigenDecomp3> {
    if !m.is_finite() {
        return Err(Error::NonFinite("symmetric matrix".into()));
    }
    Ok(eig_sym3_unchecked(m))
}

pub(crate) fn eig_sym3_unchecked(m: &SymMat3) -> EigenDecomp3 {
    let eig = SymmetricEigen::new(m.to_matrix());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .partial_cmp(&eig.eigenvalues[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = [0.0; 3];
    let mut vectors = Mat3::zeros();
    for (slot, &src) in order.iter().enumerate() {
        values[slot] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).into_owned();
        let n = v.norm();
        if n > 0.0 {
            v /= n;
        }
        if v[largest_component(&v)] < 0.0 {
            v = -v;
        }
        vectors.set_column(slot, &v);
    }
    EigenDecomp3 { values, vectors }
}

fn largest_component(v: &Vec3) -> usize {
    let mut best = 0;
    for a in 1..3 {
        // strict comparison keeps the lowest axis on ties
        if v[a].abs() > v[best].abs() * (1.0 + 1e-12) {
            best = a;
        }
    }
    best
}

/// Matrix logarithm of an SPD matrix, returned as its Log-Euclidean coordinates.
///
/// Eigenvalues in `[SPD_REJECT, SPD_FLOOR]` are clamped to `SPD_FLOOR`; the
/// boolean reports whether clamping happened.
pub fn spd_log_clamped(m: &SymMat3) -> Result<(SymMat3, bool)> {
    let e = eig_sym3(m)?;
    let min = e.values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < SPD_REJECT {
        return Err(Error::NotSpd {
            min_eigenvalue: min,
            context: "spd_log".into(),
        });
    }
    let mut clamped = false;
    let logs = e.values.map(|l| {
        if l < SPD_FLOOR {
            clamped = true;
            SPD_FLOOR.ln()
        } else {
            l.ln()
        }
    });
    Ok((SymMat3::from_eigen(logs, &e.vectors), clamped))
}

pub fn spd_log(m: &SymMat3) -> Result<SymMat3> {
    spd_log_clamped(m).map(|(l, _)| l)
}

/// Matrix exponential of a Log-Euclidean coordinate vector.
pub fn spd_exp(v: &SymMat3) -> SymMat3 {
    let e = eig_sym3_unchecked(v);
    SymMat3::from_eigen(e.values.map(f64::exp), &e.vectors)
}

/// Closest rotation to `m` (polar factor), forced to `det = +1`.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        let c = -u2.column(2).into_owned();
        u2.set_column(2, &c);
        r = u2 * vt;
    }
    r
}

/// Unit vector orthogonal to `d`, built from the coordinate axis least
/// aligned with it (ties go to the lowest axis).
pub fn perpendicular(d: &Vec3) -> Vec3 {
    let mut axis = 0;
    for a in 1..3 {
        if d[a].abs() < d[axis].abs() {
            axis = a;
        }
    }
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    let p = e - d * d.dot(&e);
    p / p.norm()
}

/// Right-handed orthonormal basis with `d` (normalized) as its first column.
pub fn basis_from_direction(d: &Vec3) -> Mat3 {
    let d = d / d.norm();
    let p = perpendicular(&d);
    Mat3::from_columns(&[d, p, d.cross(&p)])
}

/// Negates the last column when needed so the basis is a proper rotation.
pub fn make_proper(q: &Mat3) -> Mat3 {
    let mut q = *q;
    if q.determinant() < 0.0 {
        let c = -q.column(2).into_owned();
        q.set_column(2, &c);
    }
    q
}

/// Largest absolute deviation of `QᵗQ` from the identity.
pub fn orthonormality_error(q: &Mat3) -> f64 {
    (q.transpose() * q - Mat3::identity()).abs().max()
}

/// Rotation angle (radians) of `a⁻¹ b` for two rotations.
pub fn rotation_angle(a: &Mat3, b: &Mat3) -> f64 {
    let r = a.transpose() * b;
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Eigenvalues from the characteristic polynomial (trigonometric Cardano).
    fn char_poly_eigenvalues(m: &SymMat3) -> [f64; 3] {
        let p1 = m.xy * m.xy + m.xz * m.xz + m.yz * m.yz;
        let q = m.trace() / 3.0;
        let p2 = (m.xx - q).powi(2) + (m.yy - q).powi(2) + (m.zz - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p == 0.0 {
            return [q, q, q];
        }
        let b = SymMat3::new(m.xx - q, m.xy, m.xz, m.yy - q, m.yz, m.zz - q).scale(1.0 / p);
        let r = (b.det() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut out = [e1, e2, e3];
        out.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
        out
    }

    fn random_sym(rng: &mut ChaCha8Rng) -> SymMat3 {
        SymMat3::from_array(std::array::from_fn(|_| rng.random_range(-10.0..10.0)))
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
        let m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        nearest_rotation(&m)
    }

    #[test]
    fn diagonal_is_sorted_by_magnitude() {
        let e = eig_sym3(&SymMat3::diag(3.0, -1.0, 2.0)).unwrap();
        assert_eq!(e.values, [-1.0, 2.0, 3.0]);
        let expected = Mat3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert!((e.vectors - expected).abs().max() < 1e-14);
    }

    #[test]
    fn identity_decomposes_to_identity() {
        let e = eig_sym3(&SymMat3::IDENTITY).unwrap();
        assert_eq!(e.values, [1.0, 1.0, 1.0]);
        assert!((e.vectors - Mat3::identity()).abs().max() < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(eig_sym3(&SymMat3::diag(f64::NAN, 1.0, 1.0)).is_err());
    }

    #[test]
    fn random_matrices_match_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = random_sym(&mut rng);
            let e = eig_sym3(&m).unwrap();
            let oracle = char_poly_eigenvalues(&m);
            let scale = m.norm();
            for l in 0..3 {
                assert!((e.values[l] - oracle[l]).abs() <= 1e-9 * scale, "{:?} vs {:?}", e.values, oracle);
            }
            assert!(e.values[0].abs() <= e.values[1].abs() && e.values[1].abs() <= e.values[2].abs());
            assert!(orthonormality_error(&e.vectors) <= 1e-10);
            let rec = e.reconstruct();
            assert!(rec.add(m.scale(-1.0)).norm() <= 1e-8 * scale);
            for l in 0..3 {
                let v = e.vector(l);
                assert!(v[largest_component(&v)] >= 0.0);
            }
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(spd_log(&SymMat3::IDENTITY).unwrap().norm(), 0.0);
        let e = std::f64::consts::E;
        let l = spd_log(&SymMat3::diag(e, e, e)).unwrap();
        assert!(l.add(SymMat3::IDENTITY.scale(-1.0)).norm() < 1e-14);
    }

    #[test]
    fn log_rejects_indefinite_and_clamps_degenerate() {
        assert!(matches!(spd_log(&SymMat3::diag(1.0, -1.0, 1.0)), Err(Error::NotSpd { .. })));
        let (l, clamped) = spd_log_clamped(&SymMat3::diag(1.0, 0.0, 1.0)).unwrap();
        assert!(clamped);
        assert!((l.yy - SPD_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn log_exp_round_trip_on_conditioned_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            // condition number up to 1e6
            let ev = [
                10f64.powf(rng.random_range(-3.0..3.0)),
                10f64.powf(rng.random_range(-3.0..3.0)),
                10f64.powf(rng.random_range(-3.0..3.0)),
            ];
            let m = SymMat3::from_eigen(ev, &r);
            // independent oracle: log through the known eigen-basis
            let oracle = SymMat3::from_eigen(ev.map(f64::ln), &r);
            let l = spd_log(&m).unwrap();
            assert!(l.add(oracle.scale(-1.0)).norm() <= 1e-8 * oracle.norm().max(1.0));
            let back = spd_exp(&l);
            assert!(back.add(m.scale(-1.0)).norm() <= 1e-8 * m.norm());
        }
    }

    #[test]
    fn conjugation_commutes_with_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_rotation(&mut rng);
        let m = SymMat3::from_eigen([0.5, 2.0, 3.0], &random_rotation(&mut rng));
        let a = spd_log(&m.conjugate(&r)).unwrap();
        let b = spd_log(&m).unwrap().conjugate(&r);
        assert!(a.add(b.scale(-1.0)).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn trace_free_has_unit_determinant(v in proptest::array::uniform6(-3.0f64..3.0)) {
            let t = SymMat3::from_array(v).trace_free();
            prop_assert!((spd_exp(&t).det() - 1.0).abs() < 1e-9);
        }
    }
}
