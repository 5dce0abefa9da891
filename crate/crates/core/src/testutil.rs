//! Helpers shared by unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{SpectralScalarField, SpectralVectorField, WaveVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random real vector field at truncation `k_max`, supported on `|k|_inf <= support`.
pub fn random_vector(rng: &mut ChaCha8Rng, k_max: usize, support: usize) -> SpectralVectorField {
    let mut f = SpectralVectorField::zeros(k_max);
    let s = support.min(k_max) as i64;
    for k1 in 0..=s {
        for k2 in -s..=s {
            let k = WaveVector::new(k1, k2);
            if k.is_half_lattice() || k == WaveVector::ZERO {
                f.set_mode(k, [c(rng), c(rng)]);
            }
        }
    }
    f
}

pub fn random_scalar(rng: &mut ChaCha8Rng, k_max: usize, support: usize) -> SpectralScalarField {
    let mut f = SpectralScalarField::zeros(k_max);
    let s = support.min(k_max) as i64;
    for k1 in 0..=s {
        for k2 in -s..=s {
            let k = WaveVector::new(k1, k2);
            if k.is_half_lattice() || k == WaveVector::ZERO {
                f.set_mode(k, c(rng));
            }
        }
    }
    f
}

/// Direct convolution sum for `(u . grad) xi`, truncated to `k_out`.
pub fn convolution_advect(
    u: &SpectralVectorField,
    xi: &SpectralVectorField,
    k_out: usize,
) -> SpectralVectorField {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = SpectralVectorField::zeros(k_out);
    let lu = u.layout();
    let lx = xi.layout();
    let lo = out.layout();
    for (ip, up) in u.coeffs().iter().enumerate() {
        let p = lu.wavevector(ip);
        for (iq, xq) in xi.coeffs().iter().enumerate() {
            let q = lx.wavevector(iq);
            let m = WaveVector::new(p.k1 + q.k1, p.k2 + q.k2);
            if let Some(im) = lo.index(m) {
                let dot = up[0] * Complex64::new(0.0, two_pi * q.k1 as f64)
                    + up[1] * Complex64::new(0.0, two_pi * q.k2 as f64);
                out.coeffs_mut()[im][0] += dot * xq[0];
                out.coeffs_mut()[im][1] += dot * xq[1];
            }
        }
    }
    out
}

pub fn max_coeff_diff(a: &SpectralVectorField, b: &SpectralVectorField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x[0] - y[0]).norm().max((x[1] - y[1]).norm()))
        .fold(0.0, f64::max)
}
