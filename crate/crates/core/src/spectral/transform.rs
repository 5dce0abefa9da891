//! Spectral <-> physical transforms and the dealiased transport product.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{ModeLayout, SpectralScalarField, SpectralVectorField, TWO_PI};
use crate::error::{Error, Result};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Plans>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
            })
            .clone()
    })
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized 2D DFT over a row-major `n x n` buffer.
fn fft2(buf: &mut [Complex64], n: usize, fft: &dyn Fft<f64>) {
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
    fft.process_with_scratch(buf, &mut scratch);
    transpose(buf, n);
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Smallest `2^a 3^b` that is at least `min`.
fn smooth_size(min: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * min.max(1) {
        let mut p = p2;
        while p < min {
            p *= 3;
        }
        best = best.min(p);
        p2 *= 2;
    }
    best
}

/// Grid size on which the product of fields truncated at `ka` and `kb`,
/// projected to `k_out`, is computed without aliasing.
///
/// A product mode reaches `|m|_inf <= ka + kb`; it folds onto a retained
/// mode only if `n <= ka + kb + k_out`.
pub fn product_resolution(ka: usize, kb: usize, k_out: usize) -> usize {
    let k_in = ka.max(kb);
    smooth_size((ka + kb + k_out + 1).max(2 * k_in + 2))
}

/// Real samples of a scalar field at nodes `x = (j1 / n, j2 / n)`, row-major in `j1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalScalarGrid {
    pub resolution: usize,
    pub values: Vec<f64>,
}

/// Real samples of a vector field, one row-major array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVectorGrid {
    pub resolution: usize,
    pub components: [Vec<f64>; 2],
}

impl PhysicalVectorGrid {
    pub fn node(&self, j1: usize, j2: usize) -> [f64; 2] {
        let i = j1 * self.resolution + j2;
        [self.components[0][i], self.components[1][i]]
    }

    fn from_spectral_unchecked(f: &SpectralVectorField, n: usize) -> Self {
        let [a, b] = inverse_pair(&f.component(0), &f.component(1), n);
        Self {
            resolution: n,
            components: [a, b],
        }
    }
}

fn check_resolution(k_max: usize, n: usize) -> Result<()> {
    if n < 2 * k_max + 2 {
        return Err(Error::config(format!(
            "grid resolution {n} too small for truncation K = {k_max} (need at least {})",
            2 * k_max + 2
        )));
    }
    Ok(())
}

fn scatter(buf: &mut [Complex64], f: &SpectralScalarField, n: usize, scale: Complex64) {
    let layout = f.layout();
    for (i, c) in f.coeffs().iter().enumerate() {
        let k = layout.wavevector(i);
        buf[wrap(k.k1, n) * n + wrap(k.k2, n)] += c * scale;
    }
}

/// Inverse transforms two real fields with one complex FFT (`f + i g`).
fn inverse_pair(f: &SpectralScalarField, g: &SpectralScalarField, n: usize) -> [Vec<f64>; 2] {
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    scatter(&mut buf, f, n, Complex64::new(1.0, 0.0));
    scatter(&mut buf, g, n, Complex64::new(0.0, 1.0));
    let (_, inv) = plans(n);
    fft2(&mut buf, n, inv.as_ref());
    [
        buf.iter().map(|z| z.re).collect(),
        buf.iter().map(|z| z.im).collect(),
    ]
}

/// Forward transforms two real sample arrays with one complex FFT and
/// separates the spectra. Both outputs are exactly Hermitian.
fn forward_pair(a: &[f64], b: &[f64], n: usize, k_out: usize) -> [SpectralScalarField; 2] {
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    let (fwd, _) = plans(n);
    fft2(&mut buf, n, fwd.as_ref());
    let norm = 1.0 / (n * n) as f64;
    let layout = ModeLayout::new(k_out);
    let mut fa = Vec::with_capacity(layout.len());
    let mut fb = Vec::with_capacity(layout.len());
    for k in layout.wavevectors() {
        let z = buf[wrap(k.k1, n) * n + wrap(k.k2, n)];
        let zm = buf[wrap(-k.k1, n) * n + wrap(-k.k2, n)].conj();
        let s = z + zm;
        let d = z - zm;
        fa.push(Complex64::new(0.5 * s.re * norm, 0.5 * s.im * norm));
        // d / (2i)
        fb.push(Complex64::new(0.5 * d.im * norm, -0.5 * d.re * norm));
    }
    [
        SpectralScalarField::from_coeffs(k_out, fa).unwrap(),
        SpectralScalarField::from_coeffs(k_out, fb).unwrap(),
    ]
}

/// Samples `f` on the uniform `resolution x resolution` grid.
pub fn to_physical(f: &SpectralVectorField, resolution: usize) -> Result<PhysicalVectorGrid> {
    check_resolution(f.k_max(), resolution)?;
    Ok(PhysicalVectorGrid::from_spectral_unchecked(f, resolution))
}

pub fn to_physical_scalar(f: &SpectralScalarField, resolution: usize) -> Result<PhysicalScalarGrid> {
    check_resolution(f.k_max(), resolution)?;
    let zero = SpectralScalarField::zeros(f.k_max());
    let [values, _] = inverse_pair(f, &zero, resolution);
    Ok(PhysicalScalarGrid { resolution, values })
}

fn check_samples(resolution: usize, values: &[f64]) -> Result<()> {
    if values.len() != resolution * resolution {
        return Err(Error::Data(format!(
            "expected {} samples for resolution {resolution}, got {}",
            resolution * resolution,
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite sample at flat index {i}")));
    }
    Ok(())
}

/// Fourier coefficients of the samples, truncated to `k_max`.
pub fn to_spectral(samples: &PhysicalVectorGrid, k_max: usize) -> Result<SpectralVectorField> {
    let n = samples.resolution;
    check_resolution(k_max, n)?;
    check_samples(n, &samples.components[0])?;
    check_samples(n, &samples.components[1])?;
    let [a, b] = forward_pair(&samples.components[0], &samples.components[1], n, k_max);
    SpectralVectorField::from_components(&a, &b)
}

pub fn to_spectral_scalar(samples: &PhysicalScalarGrid, k_max: usize) -> Result<SpectralScalarField> {
    let n = samples.resolution;
    check_resolution(k_max, n)?;
    check_samples(n, &samples.values)?;
    let zeros = vec![0.0; n * n];
    let [a, _] = forward_pair(&samples.values, &zeros, n, k_max);
    Ok(a)
}

/// Physical samples of all four first derivatives `d_j xi_c` of a vector field.
pub(crate) struct PhysicalGradient {
    resolution: usize,
    /// `d[c][j]` holds `d_j xi_c`.
    d: [[Vec<f64>; 2]; 2],
}

impl PhysicalGradient {
    pub(crate) fn from_spectral(xi: &SpectralVectorField, n: usize) -> Self {
        let layout = xi.layout();
        let deriv = |c: usize, j: usize| {
            let coeffs = xi
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let k = layout.wavevector(i).as_f64();
                    v[c] * Complex64::new(0.0, TWO_PI * k[j])
                })
                .collect();
            SpectralScalarField::from_coeffs(xi.k_max(), coeffs).unwrap()
        };
        let [d11, d12] = inverse_pair(&deriv(0, 0), &deriv(0, 1), n);
        let [d21, d22] = inverse_pair(&deriv(1, 0), &deriv(1, 1), n);
        Self {
            resolution: n,
            d: [[d11, d12], [d21, d22]],
        }
    }

    /// `(u . grad) xi` for `u` sampled on the same grid, truncated to `k_out`.
    pub(crate) fn transport(&self, u: &PhysicalVectorGrid, k_out: usize) -> SpectralVectorField {
        assert_eq!(u.resolution, self.resolution);
        let [u1, u2] = &u.components;
        let prod = |c: usize| -> Vec<f64> {
            let [dx, dy] = &self.d[c];
            (0..u1.len()).map(|i| u1[i] * dx[i] + u2[i] * dy[i]).collect()
        };
        let r1 = prod(0);
        let r2 = prod(1);
        let [a, b] = forward_pair(&r1, &r2, self.resolution, k_out);
        SpectralVectorField::from_components(&a, &b).unwrap()
    }
}

/// Samples `u` for repeated use in [`PhysicalGradient::transport`].
pub(crate) fn sample_velocity(u: &SpectralVectorField, n: usize) -> PhysicalVectorGrid {
    PhysicalVectorGrid::from_spectral_unchecked(u, n)
}

/// `(u . grad) xi` truncated to `k_out`, computed on a grid large enough that
/// the result is the exact truncation of the product.
pub fn advect_truncated(
    u: &SpectralVectorField,
    xi: &SpectralVectorField,
    k_out: usize,
) -> SpectralVectorField {
    let n = product_resolution(u.k_max(), xi.k_max(), k_out);
    let grad = PhysicalGradient::from_spectral(xi, n);
    grad.transport(&sample_velocity(u, n), k_out)
}

/// `(u . grad) xi` for two fields at the same truncation, result at that truncation.
pub fn advect(u: &SpectralVectorField, xi: &SpectralVectorField) -> Result<SpectralVectorField> {
    if u.k_max() != xi.k_max() {
        return Err(Error::config(format!(
            "advect: truncation mismatch K = {} vs K = {}",
            u.k_max(),
            xi.k_max()
        )));
    }
    Ok(advect_truncated(u, xi, xi.k_max()))
}
