use std::f64::consts::PI;

use super::{GaugeFrame, KernelParams};
use crate::linalg::{perpendicular, EigenDecomp3, SymMat3, Vec3};

/// Curvilinear Gaussian impulse response: a product of three 1D Gaussians on
/// the warped coordinates `(x1, x2 + c0 x1 + c1 x1², x3 + c2 x1³)`.
pub fn eval_gamma(x: [f64; 3], p: &KernelParams) -> f64 {
    let [s1, s2, s3] = p.sigma;
    let [c0, c1, c2] = p.curvature;
    let u1 = x[0];
    let u2 = x[1] + c0 * x[0] + c1 * x[0] * x[0];
    let u3 = x[2] + c2 * x[0] * x[0] * x[0];
    let norm = (2.0 * PI).powf(-1.5) / (s1 * s2 * s3);
    let e = u1 * u1 / (s1 * s1) + u2 * u2 / (s2 * s2) + u3 * u3 / (s3 * s3);
    norm * (-0.5 * e).exp()
}

const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

/// Gradient and Hessian of `eval_gamma` at `x` by fourth-order central
/// differences with step `h`.
pub fn gamma_derivatives(x: [f64; 3], p: &KernelParams, h: f64) -> ([f64; 3], SymMat3) {
    let f = |d: [f64; 3]| eval_gamma([x[0] + d[0] * h, x[1] + d[1] * h, x[2] + d[2] * h], p);
    let mut grad = [0.0; 3];
    let mut diag = [0.0; 3];
    for a in 0..3 {
        for (t, (w1, w2)) in D1.iter().zip(D2.iter()).enumerate() {
            let mut d = [0.0; 3];
            d[a] = t as f64 - 2.0;
            let v = f(d);
            grad[a] += w1 * v;
            diag[a] += w2 * v;
        }
        grad[a] /= 12.0 * h;
        diag[a] /= 12.0 * h * h;
    }
    let mixed = |a: usize, b: usize| {
        let mut s = 0.0;
        for (ta, wa) in D1.iter().enumerate() {
            if *wa == 0.0 {
                continue;
            }
            for (tb, wb) in D1.iter().enumerate() {
                if *wb == 0.0 {
                    continue;
                }
                let mut d = [0.0; 3];
                d[a] = ta as f64 - 2.0;
                d[b] = tb as f64 - 2.0;
                s += wa * wb * f(d);
            }
        }
        s / (144.0 * h * h)
    };
    let hess = SymMat3::new(diag[0], mixed(0, 1), mixed(0, 2), diag[1], mixed(1, 2), diag[2]);
    (grad, hess)
}

/// Gauge frame from the gradient and the Hessian eigenbasis.
///
/// On ridge points (`ridge = true`, gradient numerically zero) `omega` falls
/// back to the eigenvector of largest `|λ|`, the limit taken from either side.
pub fn gauge_frame(grad: [f64; 3], eig: &EigenDecomp3, ridge: bool) -> GaugeFrame {
    let g = Vec3::from(grad);
    let n = g.norm();
    let omega = if ridge || n == 0.0 { eig.vector(2) } else { g / n };
    let gamma_weights = std::array::from_fn(|l| eig.vector(l).dot(&omega).powi(2));
    GaugeFrame {
        omega,
        upsilon: perpendicular(&omega),
        gamma_weights,
    }
}
