//! Divergence-free noise basis driving the cylindrical Wiener process.
//!
//! For every half-lattice wavevector `0 < |k| <= K_W` there are two elements
//! `sqrt(2) A_k cos(2 pi k.x)` and `sqrt(2) A_k sin(2 pi k.x)` with the
//! polarization `A_k = (-k2, k1) / |k|`. Each element is transported along
//! itself trivially (`A_k . grad` annihilates functions of `k.x`), and the
//! Euclidean ball is closed under rotation by 90 degrees, so
//!
//! ```text
//! sum_a (X_a . grad)(X_a . grad) xi = c_K lap xi,   c_K = #{half-lattice k in the ball}.
//! ```

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    advect_truncated, to_physical, transverse, SpectralVectorField, WaveVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

/// One noise field `sqrt(2) A cos(2 pi k.x)` or `sqrt(2) A sin(2 pi k.x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisElement {
    pub k: WaveVector,
    pub polarization: [f64; 2],
    pub phase: Phase,
}

impl BasisElement {
    fn new(k: WaveVector, phase: Phase) -> Self {
        let n = k.norm();
        Self {
            k,
            polarization: [-k.k2 as f64 / n, k.k1 as f64 / n],
            phase,
        }
    }

    /// Complex amplitude multiplying `A` at `+k`: `sqrt(2)/2` or `-i sqrt(2)/2`.
    fn amplitude(&self) -> Complex64 {
        match self.phase {
            Phase::Cos => Complex64::new(FRAC_1_SQRT_2, 0.0),
            Phase::Sin => Complex64::new(0.0, -FRAC_1_SQRT_2),
        }
    }
}

/// Writes `amp * A_k` at `+k` and its conjugate at `-k`, exactly divergence-free.
fn set_polarized(f: &mut SpectralVectorField, k: WaveVector, amp: Complex64) {
    // A_k = (-k2', k1') g / |k|
    let g = crate::spectral::gcd(k.k1.unsigned_abs(), k.k2.unsigned_abs()) as f64;
    f.set_mode(k, transverse(k, amp * (g / k.norm())));
}

/// Spectral representation of a single basis element at truncation `k_max`.
pub fn element_as_field(e: &BasisElement, k_max: usize) -> Result<SpectralVectorField> {
    if e.k.max_abs() > k_max as i64 {
        return Err(Error::config(format!(
            "element wavevector {:?} outside field truncation K = {k_max}",
            e.k
        )));
    }
    let mut f = SpectralVectorField::zeros(k_max);
    set_polarized(&mut f, e.k, e.amplitude());
    Ok(f)
}

/// Finite orthonormal family of divergence-free fields and its covariance constant.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBasis {
    elements: Vec<BasisElement>,
    k_noise: usize,
    covariance_constant: f64,
}

/// Enumerates the half-lattice ball `0 < |k| <= k_noise` in lexicographic
/// order, cos before sin.
pub fn build_basis(k_noise: usize) -> Result<NoiseBasis> {
    if k_noise < 1 {
        return Err(Error::config("noise truncation K_W must be at least 1"));
    }
    let r = k_noise as i64;
    let mut elements = Vec::new();
    let mut count = 0usize;
    for k1 in 0..=r {
        for k2 in -r..=r {
            let k = WaveVector::new(k1, k2);
            if k.is_half_lattice() && k.norm_sq() <= r * r {
                count += 1;
                elements.push(BasisElement::new(k, Phase::Cos));
                elements.push(BasisElement::new(k, Phase::Sin));
            }
        }
    }
    Ok(NoiseBasis {
        elements,
        k_noise,
        covariance_constant: count as f64,
    })
}

impl NoiseBasis {
    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn k_noise(&self) -> usize {
        self.k_noise
    }

    /// `c_K` in `sum_a (X_a . grad)^2 = c_K lap`.
    pub fn covariance_constant(&self) -> f64 {
        self.covariance_constant
    }

    fn check_field_truncation(&self, k_max: usize) -> Result<()> {
        if self.k_noise > k_max {
            return Err(Error::config(format!(
                "noise truncation K_W = {} exceeds field truncation K_f = {k_max}",
                self.k_noise
            )));
        }
        Ok(())
    }

    /// `sum_a dW_a X_a` as a spectral field at truncation `k_max`.
    pub fn noise_field(&self, increments: &[f64], k_max: usize) -> Result<SpectralVectorField> {
        if increments.len() != self.elements.len() {
            return Err(Error::config(format!(
                "expected {} noise increments, got {}",
                self.elements.len(),
                increments.len()
            )));
        }
        self.check_field_truncation(k_max)?;
        let mut f = SpectralVectorField::zeros(k_max);
        // elements come in (cos, sin) pairs sharing k
        for (pair, dw) in self.elements.chunks_exact(2).zip(increments.chunks_exact(2)) {
            let amp = pair[0].amplitude() * dw[0] + pair[1].amplitude() * dw[1];
            set_polarized(&mut f, pair[0].k, amp);
        }
        Ok(f)
    }

    /// Stochastic transport term `-nu sum_a (X_a . grad) xi dW_a`, truncated to
    /// the truncation of `xi`.
    ///
    /// Transport is linear in the transporting field, so the sum collapses to a
    /// single product with the combined noise field.
    pub fn apply_noise(
        &self,
        xi: &SpectralVectorField,
        increments: &[f64],
        nu: f64,
    ) -> Result<SpectralVectorField> {
        let w = self.noise_field(increments, xi.k_max())?;
        let mut out = advect_truncated(&w, xi, xi.k_max());
        out.scale_in_place(-nu);
        Ok(out)
    }

    /// `sum_a (X_a . grad)(X_a . grad) xi`. The intermediate products are kept up
    /// to `K_f + K_W` so that the only truncation happens on the final result.
    pub fn apply_covariance(&self, xi: &SpectralVectorField) -> Result<SpectralVectorField> {
        let k_f = xi.k_max();
        self.check_field_truncation(k_f)?;
        let mut acc = SpectralVectorField::zeros(k_f);
        for e in &self.elements {
            let x = element_as_field(e, self.k_noise)?;
            let once = advect_truncated(&x, xi, k_f + self.k_noise);
            let twice = advect_truncated(&x, &once, k_f);
            acc.axpy(1.0, &twice)?;
        }
        Ok(acc)
    }
}

/// Summary printed by `basis-check`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCheckReport {
    pub k_noise: usize,
    pub element_count: usize,
    pub covariance_constant: f64,
    pub orthonormality_defect: f64,
    pub self_advection_defect: f64,
    pub covariance_defect: f64,
}

impl BasisCheckReport {
    pub const ORTHONORMALITY_TOL: f64 = 1e-12;
    pub const SELF_ADVECTION_TOL: f64 = 1e-13;
    pub const COVARIANCE_TOL: f64 = 1e-10;

    pub fn passed(&self) -> bool {
        self.orthonormality_defect <= Self::ORTHONORMALITY_TOL
            && self.self_advection_defect <= Self::SELF_ADVECTION_TOL
            && self.covariance_defect <= Self::COVARIANCE_TOL
    }
}

/// Gram matrix of the basis computed by grid quadrature, as a row-major vector.
pub fn gram_matrix_by_quadrature(basis: &NoiseBasis) -> Result<Vec<f64>> {
    let k = basis.k_noise();
    let n = 4 * k + 4;
    let grids = basis
        .elements()
        .iter()
        .map(|e| to_physical(&element_as_field(e, k)?, n))
        .collect::<Result<Vec<_>>>()?;
    let m = grids.len();
    let w = 1.0 / (n * n) as f64;
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let s: f64 = (0..n * n)
                .map(|i| {
                    grids[a].components[0][i] * grids[b].components[0][i]
                        + grids[a].components[1][i] * grids[b].components[1][i]
                })
                .sum();
            gram[a * m + b] = s * w;
            gram[b * m + a] = s * w;
        }
    }
    Ok(gram)
}

/// Checks orthonormality, self-advection and the covariance identity for the
/// basis of truncation `k_noise`, using deterministic pseudo-random test fields.
pub fn basis_check(k_noise: usize) -> Result<BasisCheckReport> {
    use rand::{Rng, SeedableRng};

    let basis = build_basis(k_noise)?;
    let m = basis.len();
    let gram = gram_matrix_by_quadrature(&basis)?;
    let orthonormality_defect = (0..m * m)
        .map(|i| {
            let target = if i / m == i % m { 1.0 } else { 0.0 };
            (gram[i] - target).abs()
        })
        .fold(0.0, f64::max);

    let mut self_advection_defect: f64 = 0.0;
    for e in basis.elements() {
        let x = element_as_field(e, k_noise)?;
        let r = advect_truncated(&x, &x, k_noise);
        self_advection_defect = self_advection_defect.max(r.max_abs_coeff());
    }

    let k_f = k_noise + 4;
    let interior = (k_f - k_noise) as i64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0000 + k_noise as u64);
    let mut covariance_defect: f64 = 0.0;
    for _ in 0..4 {
        let mut xi = SpectralVectorField::zeros(k_f);
        for k1 in 0..=interior {
            for k2 in -interior..=interior {
                let k = WaveVector::new(k1, k2);
                if k.is_half_lattice() {
                    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    xi.set_mode(k, [c(), c()]);
                }
            }
        }
        let lap = xi.laplacian();
        let cov = basis.apply_covariance(&xi)?;
        let err = crate::spectral::l2_distance(&cov, &lap.scale(basis.covariance_constant()))?;
        covariance_defect = covariance_defect.max(err / lap.l2_norm());
    }

    Ok(BasisCheckReport {
        k_noise,
        element_count: m,
        covariance_constant: basis.covariance_constant(),
        orthonormality_defect,
        self_advection_defect,
        covariance_defect,
    })
}
