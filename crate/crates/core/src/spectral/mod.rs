//! Truncated Fourier fields on the unit torus `R^2 / Z^2`.
//!
//! A field with truncation `K` stores one coefficient (scalar) or one complex
//! 2-vector (vector field) for every wavevector in the square
//! `{|k1| <= K, |k2| <= K}`, in lexicographic order of `(k1, k2)`. The physical
//! field is `f(x) = sum_k fhat(k) exp(2 pi i k.x)`, so all `2 pi` factors live
//! in the derivative operators.
//!
//! Fields are real in physical space, which means the coefficients satisfy
//! `fhat(-k) = conj(fhat(k))`. Every linear operator below has a symbol with
//! `m(-k) = conj(m(k))` and therefore preserves that symmetry exactly.

mod transform;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use transform::{
    advect, advect_truncated, product_resolution, to_physical, to_physical_scalar, to_spectral,
    to_spectral_scalar, PhysicalScalarGrid, PhysicalVectorGrid,
};
pub(crate) use transform::{sample_velocity, PhysicalGradient};

pub const TWO_PI: f64 = 2.0 * PI;

/// Integer wavevector `(k1, k2)` on the period-1 torus.
///
/// The derived ordering is lexicographic, which is the canonical storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveVector {
    pub k1: i64,
    pub k2: i64,
}

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector { k1: 0, k2: 0 };

    pub const fn new(k1: i64, k2: i64) -> Self {
        Self { k1, k2 }
    }

    /// One representative per `+-k` pair: `k1 > 0`, or `k1 == 0 && k2 > 0`.
    pub fn is_half_lattice(self) -> bool {
        self.k1 > 0 || (self.k1 == 0 && self.k2 > 0)
    }

    pub fn norm_sq(self) -> i64 {
        self.k1 * self.k1 + self.k2 * self.k2
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn max_abs(self) -> i64 {
        self.k1.abs().max(self.k2.abs())
    }

    /// Rotation by +90 degrees, `(-k2, k1)`.
    pub fn rot90(self) -> Self {
        Self::new(-self.k2, self.k1)
    }

    pub fn as_f64(self) -> [f64; 2] {
        [self.k1 as f64, self.k2 as f64]
    }
}

impl std::ops::Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector::new(-self.k1, -self.k2)
    }
}

/// Index arithmetic for the full square of modes at truncation `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    k_max: usize,
}

impl ModeLayout {
    pub fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    pub fn k_max(self) -> usize {
        self.k_max
    }

    pub fn side(self) -> usize {
        2 * self.k_max + 1
    }

    pub fn len(self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, k: WaveVector) -> bool {
        k.max_abs() <= self.k_max as i64
    }

    pub fn index(self, k: WaveVector) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let off = self.k_max as i64;
        Some(((k.k1 + off) as usize) * self.side() + (k.k2 + off) as usize)
    }

    pub fn wavevector(self, index: usize) -> WaveVector {
        let off = self.k_max as i64;
        let side = self.side();
        WaveVector::new((index / side) as i64 - off, (index % side) as i64 - off)
    }

    /// Index of `-k` given the index of `k`. The layout is point-symmetric, so
    /// this is a reflection of the flat index.
    pub fn mirror(self, index: usize) -> usize {
        self.len() - 1 - index
    }

    /// All wavevectors in canonical (lexicographic) order.
    pub fn wavevectors(self) -> impl Iterator<Item = WaveVector> {
        (0..self.len()).map(move |i| self.wavevector(i))
    }
}

fn check_same(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::config(format!(
            "truncation mismatch: K = {a} vs K = {b}"
        )));
    }
    Ok(())
}

/// Real scalar field on the torus in truncated Fourier form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalarField {
    k_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralScalarField {
    pub fn zeros(k_max: usize) -> Self {
        Self {
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); ModeLayout::new(k_max).len()],
        }
    }

    /// Builds a field from coefficients in canonical order.
    pub fn from_coeffs(k_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != ModeLayout::new(k_max).len() {
            return Err(Error::config(format!(
                "expected {} coefficients for K = {k_max}, got {}",
                ModeLayout::new(k_max).len(),
                coeffs.len()
            )));
        }
        Ok(Self { k_max, coeffs })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn layout(&self) -> ModeLayout {
        ModeLayout::new(self.k_max)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, k: WaveVector) -> Complex64 {
        self.layout()
            .index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets `k` and its Hermitian partner `-k` together.
    pub fn set_mode(&mut self, k: WaveVector, value: Complex64) {
        let layout = self.layout();
        let i = layout.index(k).expect("wavevector outside truncation");
        if k == WaveVector::ZERO {
            self.coeffs[i] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[i] = value;
            self.coeffs[layout.mirror(i)] = value.conj();
        }
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let layout = self.layout();
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[i] - self.coeffs[layout.mirror(i)].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn enforce_hermitian(&mut self) {
        let layout = self.layout();
        let half = self.coeffs.len() / 2;
        for i in 0..half {
            let j = layout.mirror(i);
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * 0.5;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        self.coeffs[half].im = 0.0;
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            k_max: self.k_max,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn laplacian(&self) -> Self {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * laplacian_symbol(layout.wavevector(i)))
            .collect();
        Self {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Spectral gradient: `2 pi i k phihat(k)`.
    ///
    /// `2 pi i phihat` is rounded so that multiplication by `k` is exact, which
    /// makes the gradient lie exactly on the kernel of the Helmholtz projection.
    pub fn grad(&self) -> SpectralVectorField {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let k = layout.wavevector(i);
                let z = round_for_integer_products(Complex64::new(0.0, TWO_PI) * c, k);
                let [a, b] = k.as_f64();
                [z * a, z * b]
            })
            .collect();
        SpectralVectorField {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// `<f, g>` in `L^2(T^2)`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        check_same(self.k_max, other.k_max)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Real 2-vector field on the torus in truncated Fourier form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    k_max: usize,
    coeffs: Vec<[Complex64; 2]>,
}

/// `2 pi i k`, the symbol of the gradient.
pub fn derivative_symbols(k: WaveVector) -> [Complex64; 2] {
    [
        Complex64::new(0.0, TWO_PI * k.k1 as f64),
        Complex64::new(0.0, TWO_PI * k.k2 as f64),
    ]
}

/// `-4 pi^2 |k|^2`, the symbol of the Laplacian.
pub fn laplacian_symbol(k: WaveVector) -> f64 {
    -TWO_PI * TWO_PI * k.norm_sq() as f64
}

const ZERO2: [Complex64; 2] = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

impl SpectralVectorField {
    pub fn zeros(k_max: usize) -> Self {
        Self {
            k_max,
            coeffs: vec![ZERO2; ModeLayout::new(k_max).len()],
        }
    }

    pub fn from_coeffs(k_max: usize, coeffs: Vec<[Complex64; 2]>) -> Result<Self> {
        if coeffs.len() != ModeLayout::new(k_max).len() {
            return Err(Error::config(format!(
                "expected {} coefficients for K = {k_max}, got {}",
                ModeLayout::new(k_max).len(),
                coeffs.len()
            )));
        }
        Ok(Self { k_max, coeffs })
    }

    /// Constant field `(c1, c2)`.
    pub fn constant(k_max: usize, c: [f64; 2]) -> Self {
        let mut f = Self::zeros(k_max);
        f.set_mode(
            WaveVector::ZERO,
            [Complex64::new(c[0], 0.0), Complex64::new(c[1], 0.0)],
        );
        f
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn layout(&self) -> ModeLayout {
        ModeLayout::new(self.k_max)
    }

    pub fn coeffs(&self) -> &[[Complex64; 2]] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [[Complex64; 2]] {
        &mut self.coeffs
    }

    pub fn get(&self, k: WaveVector) -> [Complex64; 2] {
        self.layout().index(k).map_or(ZERO2, |i| self.coeffs[i])
    }

    /// Sets `k` to `value` and `-k` to its conjugate.
    pub fn set_mode(&mut self, k: WaveVector, value: [Complex64; 2]) {
        let layout = self.layout();
        let i = layout.index(k).expect("wavevector outside truncation");
        if k == WaveVector::ZERO {
            self.coeffs[i] = [
                Complex64::new(value[0].re, 0.0),
                Complex64::new(value[1].re, 0.0),
            ];
        } else {
            self.coeffs[i] = value;
            self.coeffs[layout.mirror(i)] = [value[0].conj(), value[1].conj()];
        }
    }

    pub fn component(&self, c: usize) -> SpectralScalarField {
        SpectralScalarField {
            k_max: self.k_max,
            coeffs: self.coeffs.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn from_components(a: &SpectralScalarField, b: &SpectralScalarField) -> Result<Self> {
        check_same(a.k_max, b.k_max)?;
        Ok(Self {
            k_max: a.k_max,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| [x, y]).collect(),
        })
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let layout = self.layout();
        (0..self.coeffs.len())
            .map(|i| {
                let j = layout.mirror(i);
                (self.coeffs[i][0] - self.coeffs[j][0].conj())
                    .norm()
                    .max((self.coeffs[i][1] - self.coeffs[j][1].conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Replaces each pair `(fhat(k), fhat(-k))` by its Hermitian average. The
    /// result is bitwise symmetric.
    pub fn enforce_hermitian(&mut self) {
        let layout = self.layout();
        let half = self.coeffs.len() / 2;
        for i in 0..half {
            let j = layout.mirror(i);
            for c in 0..2 {
                let avg = (self.coeffs[i][c] + self.coeffs[j][c].conj()) * 0.5;
                self.coeffs[i][c] = avg;
                self.coeffs[j][c] = avg.conj();
            }
        }
        self.coeffs[half][0].im = 0.0;
        self.coeffs[half][1].im = 0.0;
    }

    /// Copy at a different truncation: modes outside the new square are
    /// dropped, new modes are zero.
    pub fn retruncate(&self, k_max: usize) -> Self {
        let mut out = Self::zeros(k_max);
        let src = self.layout();
        let dst = out.layout();
        for (i, v) in self.coeffs.iter().enumerate() {
            if let Some(j) = dst.index(src.wavevector(i)) {
                out.coeffs[j] = *v;
            }
        }
        out
    }

    /// Zeroes every mode with `|k|_inf > k_keep`.
    pub fn restricted_to(&self, k_keep: usize) -> Self {
        let layout = self.layout();
        let mut out = self.clone();
        for (i, v) in out.coeffs.iter_mut().enumerate() {
            if layout.wavevector(i).max_abs() > k_keep as i64 {
                *v = ZERO2;
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            k_max: self.k_max,
            coeffs: self.coeffs.iter().map(|v| [v[0] * a, v[1] * a]).collect(),
        }
    }

    pub fn scale_in_place(&mut self, a: f64) {
        for v in &mut self.coeffs {
            v[0] *= a;
            v[1] *= a;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        check_same(self.k_max, other.k_max)?;
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            x[0] += y[0] * a;
            x[1] += y[1] * a;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Scalar field with coefficient `2 pi i k . fhat(k)`.
    pub fn divergence(&self) -> SpectralScalarField {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let [a, b] = layout.wavevector(i).as_f64();
                Complex64::new(0.0, TWO_PI) * (v[0] * a + v[1] * b)
            })
            .collect();
        SpectralScalarField {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Scalar vorticity `d1 f2 - d2 f1`.
    pub fn curl(&self) -> SpectralScalarField {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let [d1, d2] = derivative_symbols(layout.wavevector(i));
                d1 * v[1] - d2 * v[0]
            })
            .collect();
        SpectralScalarField {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Vector Laplacian, mode `k` scaled by `-4 pi^2 |k|^2`.
    pub fn laplacian(&self) -> Self {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = laplacian_symbol(layout.wavevector(i));
                [v[0] * s, v[1] * s]
            })
            .collect();
        Self {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Helmholtz projection onto divergence-free fields.
    ///
    /// Per mode `k != 0`: `fhat <- fhat - k (k . fhat) / |k|^2`. The mean mode is
    /// untouched. The divergence of the result is exactly zero in floating point
    /// (see [`project_mode`]).
    pub fn helmholtz_project(&self) -> Self {
        let layout = self.layout();
        let mut out = self.clone();
        for (i, v) in out.coeffs.iter_mut().enumerate() {
            let k = layout.wavevector(i);
            if k == WaveVector::ZERO {
                continue;
            }
            *v = project_mode(k, *v);
        }
        out
    }

    /// Curl-free part: `f - P f`, i.e. `grad(phi_f)`.
    pub fn gradient_part(&self) -> Self {
        let p = self.helmholtz_project();
        let mut out = self.clone();
        for (x, y) in out.coeffs.iter_mut().zip(&p.coeffs) {
            x[0] -= y[0];
            x[1] -= y[1];
        }
        // mean mode belongs to the divergence-free part
        let z = out.layout().index(WaveVector::ZERO).unwrap();
        out.coeffs[z] = ZERO2;
        out
    }

    /// Potential `phi` with `grad phi = f - P f`:
    /// `phihat(k) = (k . fhat(k)) / (2 pi i |k|^2)`.
    pub fn gradient_potential(&self) -> SpectralScalarField {
        let layout = self.layout();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let k = layout.wavevector(i);
                if k == WaveVector::ZERO {
                    return Complex64::new(0.0, 0.0);
                }
                let [a, b] = k.as_f64();
                (v[0] * a + v[1] * b) / Complex64::new(0.0, TWO_PI * k.norm_sq() as f64)
            })
            .collect();
        SpectralScalarField {
            k_max: self.k_max,
            coeffs,
        }
    }

    /// Point evaluation `sum_k fhat(k) exp(2 pi i k.x)`.
    ///
    /// The imaginary residue must stay below `1e-10`; anything larger means the
    /// coefficients lost Hermitian symmetry.
    pub fn evaluate_at(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let layout = self.layout();
        let mut acc = ZERO2;
        for (i, v) in self.coeffs.iter().enumerate() {
            let k = layout.wavevector(i);
            let phase = TWO_PI * (k.k1 as f64 * x[0] + k.k2 as f64 * x[1]);
            let e = Complex64::from_polar(1.0, phase);
            acc[0] += v[0] * e;
            acc[1] += v[1] * e;
        }
        let residue = acc[0].im.abs().max(acc[1].im.abs());
        if residue > 1e-10 {
            return Err(Error::Consistency(format!(
                "point evaluation at {x:?} has imaginary residue {residue:e}"
            )));
        }
        Ok([acc[0].re, acc[1].re])
    }

    /// `<f, g>` in `L^2(T^2)` via Parseval.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        check_same(self.k_max, other.k_max)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a[0] * b[0].conj() + a[1] * b[1].conj()).re)
            .sum())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|v| v[0].norm_sqr() + v[1].norm_sqr())
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Kinetic energy `1/2 int |f|^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self.l2_norm_sq()
    }

    /// `1/2 int omega^2` with `omega = d1 f2 - d2 f1`.
    pub fn enstrophy(&self) -> f64 {
        let w = self.curl();
        0.5 * w.l2_norm().powi(2)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|v| v[0].norm().max(v[1].norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|v| v[0].re.is_finite() && v[0].im.is_finite() && v[1].re.is_finite() && v[1].im.is_finite())
    }
}

/// Applies `I - k k^T / |k|^2` to one coefficient vector, `k != 0`.
///
/// The result is written as `c (-k2', k1')` with `k' = k / gcd(k1, k2)` and `c`
/// rounded so that both products are exact. Then `k1 w1 + k2 w2` cancels in
/// floating point and the projected mode has exactly zero divergence.
pub(crate) fn project_mode(k: WaveVector, v: [Complex64; 2]) -> [Complex64; 2] {
    let zero = Complex64::new(0.0, 0.0);
    if k.k1 == 0 {
        return [v[0], zero];
    }
    if k.k2 == 0 {
        return [zero, v[1]];
    }
    let (p, q) = transverse_direction(k);
    let c = (v[0] * p + v[1] * q) / (p * p + q * q);
    transverse(k, c)
}

/// Primitive integer direction `(-k2, k1) / gcd` orthogonal to `k`.
pub(crate) fn transverse_direction(k: WaveVector) -> (f64, f64) {
    let g = gcd(k.k1.unsigned_abs(), k.k2.unsigned_abs()).max(1) as i64;
    ((-k.k2 / g) as f64, (k.k1 / g) as f64)
}

/// The divergence-free coefficient `c (-k2', k1')` at mode `k`, with `c` rounded
/// so that the divergence of the result is exactly zero.
pub(crate) fn transverse(k: WaveVector, c: Complex64) -> [Complex64; 2] {
    let (p, q) = transverse_direction(k);
    let c = round_for_integer_products(c, k);
    [c * p, c * q]
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Clears enough low mantissa bits of `z` that multiplying by any integer with
/// `|n| <= |k|_inf` is exact.
pub(crate) fn round_for_integer_products(z: Complex64, k: WaveVector) -> Complex64 {
    let bits = 64 - (k.max_abs() as u64).leading_zeros();
    Complex64::new(round_mantissa(z.re, bits), round_mantissa(z.im, bits))
}

fn round_mantissa(x: f64, drop: u32) -> f64 {
    if drop == 0 || x == 0.0 || !x.is_finite() {
        return x;
    }
    let bits = x.to_bits();
    let half = 1u64 << (drop - 1);
    let mask = (1u64 << drop) - 1;
    f64::from_bits((bits + half) & !mask)
}

/// `L^2` distance between two fields of equal truncation.
pub fn l2_distance(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<f64> {
    check_same(a.k_max(), b.k_max())?;
    Ok(a.coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x[0] - y[0]).norm_sqr() + (x[1] - y[1]).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
