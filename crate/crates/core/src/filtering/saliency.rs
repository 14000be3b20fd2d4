use rustfft::num_complex::Complex64;

use super::OrientationSet;
use crate::error::{Error, Result};
use crate::fft::{good_size, place_reflected, split_packed, Fft3};
use crate::slogs::{steer_kernel, DiscreteKernel};
use crate::volume::ScalarVolume;

/// Responses within this fraction of the volume's peak magnitude are FFT
/// rounding and rectify to zero.
pub(crate) const ROUNDING_FLOOR: f64 = 1e-9;

/// Early saliency: the sum over orientations of the rectified responses to
/// the steered tubular kernel. Correlation through one FFT of the volume
/// extended by edge replication; kernels go through the FFT two at a time.
pub fn tubular_saliency(v: &ScalarVolume, tube: &DiscreteKernel, omega: &OrientationSet) -> Result<ScalarVolume> {
    let dims = v.dims();
    let s = tube.support;
    if dims.iter().any(|&d| d < s) {
        return Err(Error::InvalidVolume(format!(
            "kernel support {s} exceeds volume dims {dims:?}"
        )));
    }
    let h = s / 2;
    let pdims = dims.map(|d| good_size(d + 2 * h));
    let fft = Fft3::new(pdims);
    let mut fv = fft.zeros();
    // the pad splits halfway: the upper part replicates the last slice, the
    // lower part (reached by wrap-around) the first
    let src = |p: usize, a: usize| -> usize {
        let (d, n) = (dims[a], pdims[a]);
        if p < d + (n - d) / 2 { p.min(d - 1) } else { 0 }
    };
    let mut idx = 0;
    for k in 0..pdims[2] {
        for j in 0..pdims[1] {
            for i in 0..pdims[0] {
                fv[idx].re = v.get(src(i, 0), src(j, 1), src(k, 2));
                idx += 1;
            }
        }
    }
    fft.forward(&mut fv);
    let floor = ROUNDING_FLOOR * v.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let steered = omega
        .bases
        .iter()
        .map(|b| steer_kernel(tube, b))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ScalarVolume::zeros(*v.grid());
    for pair in steered.chunks(2) {
        let mut z = fft.zeros();
        place_reflected(&pair[0].k_patch, s, pdims, &mut z, false);
        if let Some(b) = pair.get(1) {
            place_reflected(&b.k_patch, s, pdims, &mut z, true);
        }
        fft.forward(&mut z);
        let (f1, f2) = split_packed(&z, pdims);
        for ((zi, &a), (&b, &x)) in z.iter_mut().zip(&f1).zip(f2.iter().zip(&fv)) {
            *zi = x * a + Complex64::i() * (x * b);
        }
        fft.inverse(&mut z);
        let data = out.data_mut();
        let mut idx = 0;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                let row = pdims[0] * (j + pdims[1] * k);
                for i in 0..dims[0] {
                    let r = z[row + i];
                    data[idx] += rectify(r.re, floor) + rectify(r.im, floor);
                    idx += 1;
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn rectify(x: f64, floor: f64) -> f64 {
    if x > floor {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::icosphere_bases;
    use crate::slogs::{default_dictionary, DictionaryConfig};
    use crate::volume::Grid;

    fn tube_kernel() -> DiscreteKernel {
        default_dictionary(&DictionaryConfig::default()).unwrap().tube
    }

    fn tube_volume(sign: f64) -> ScalarVolume {
        let c = [15.3, 16.6];
        ScalarVolume::from_fn(Grid::cube(32), |p| {
            let d2 = (p[1] as f64 - c[0]).powi(2) + (p[2] as f64 - c[1]).powi(2);
            sign * 255.0 * (-d2 / (2.0 * 1.5 * 1.5)).exp()
        })
    }

    #[test]
    fn constant_volume_gives_nothing() {
        let v = ScalarVolume::filled(Grid::cube(24), 100.0);
        let out = tubular_saliency(&v, &tube_kernel(), &icosphere_bases(1).unwrap()).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn straight_tube_peaks_on_axis() {
        let out = tubular_saliency(&tube_volume(1.0), &tube_kernel(), &icosphere_bases(1).unwrap()).unwrap();
        for i in 6..26 {
            let mut best = (0, 0, f64::MIN);
            for k in 0..32 {
                for j in 0..32 {
                    let v = out.get(i, j, k);
                    if v > best.2 {
                        best = (j, k, v);
                    }
                }
            }
            let d = ((best.0 as f64 - 15.3).powi(2) + (best.1 as f64 - 16.6).powi(2)).sqrt();
            assert!(d <= 1.0, "slice {i}: argmax off axis by {d}");
        }
    }

    #[test]
    fn dark_tube_is_rectified_away() {
        let bright = tubular_saliency(&tube_volume(1.0), &tube_kernel(), &icosphere_bases(1).unwrap()).unwrap();
        let dark = tubular_saliency(&tube_volume(-1.0), &tube_kernel(), &icosphere_bases(1).unwrap()).unwrap();
        // on the axis the bright response is large and the dark one vanishes
        let axis_bright = bright.get(16, 15, 17);
        let axis_dark = dark.get(16, 15, 17);
        assert!(axis_bright > 0.0);
        assert!(axis_dark <= 1e-6 * axis_bright, "{axis_dark} vs {axis_bright}");
        assert!(dark.max() < bright.max());
    }

    #[test]
    fn impulse_reproduces_symmetric_kernel() {
        let dict = default_dictionary(&DictionaryConfig::default()).unwrap();
        let mut v = ScalarVolume::zeros(Grid::cube(16));
        v.set([8, 8, 8], 1.0);
        let set = OrientationSet::new(vec![crate::linalg::Mat3::identity()]).unwrap();
        // steering a kernel onto its own basis leaves it unchanged
        let mut tube = dict.tube.clone();
        tube.phi = Some(crate::linalg::Mat3::identity());
        tube.source = None;
        let out = tubular_saliency(&v, &tube, &set).unwrap();
        for idx in 0..tube.len() {
            let off = [(idx % 11) as i64 - 5, ((idx / 11) % 11) as i64 - 5, (idx / 121) as i64 - 5];
            // correlation with an impulse at c reads k(c - y)
            let y = [(8 - off[0]) as usize, (8 - off[1]) as usize, (8 - off[2]) as usize];
            let expect = tube.k_patch[idx].max(0.0);
            assert!((out.at(y) - expect).abs() < 1e-9);
        }
    }
}
