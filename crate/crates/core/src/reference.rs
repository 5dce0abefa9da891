//! Deterministic vorticity-form Navier-Stokes solver and exact solutions.
//!
//! The solver integrates `w_t = -u . grad w + eta lap w` on the torus, with the
//! viscous term handled by an exact integrating factor and the transport term by
//! classical RK4. Velocity is recovered by Biot-Savart in Fourier space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{
    self, advect_truncated, laplacian_symbol, transverse, SpectralScalarField,
    SpectralVectorField, WaveVector, TWO_PI,
};

/// Vorticity `d1 u2 - d2 u1` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityState {
    pub t: f64,
    pub omega: SpectralScalarField,
}

impl VorticityState {
    /// Starts from a velocity field. Only the divergence-free part survives the
    /// curl, so no projection is needed.
    pub fn from_velocity(t: f64, u: &SpectralVectorField) -> Self {
        let mut omega = u.curl();
        // the curl of any field has zero mean
        let z = omega.layout().index(WaveVector::ZERO).unwrap();
        omega.coeffs_mut()[z] = Complex64::new(0.0, 0.0);
        Self { t, omega }
    }

    pub fn k_max(&self) -> usize {
        self.omega.k_max()
    }

    pub fn velocity(&self) -> Result<SpectralVectorField> {
        velocity_from_vorticity(&self.omega)
    }
}

/// Biot-Savart on the torus: the zero-mean, divergence-free `u` with `curl u = w`.
///
/// `uhat(k) = 2 pi i (k2, -k1) what(k) / (4 pi^2 |k|^2)` for `k != 0`.
pub fn velocity_from_vorticity(omega: &SpectralScalarField) -> Result<SpectralVectorField> {
    let mean = omega.get(WaveVector::ZERO);
    if mean.norm() != 0.0 {
        return Err(Error::Data(format!(
            "vorticity has nonzero mean {mean}; no periodic velocity exists"
        )));
    }
    let layout = omega.layout();
    let mut u = SpectralVectorField::zeros(omega.k_max());
    for (i, w) in omega.coeffs().iter().enumerate() {
        let k = layout.wavevector(i);
        if k == WaveVector::ZERO {
            continue;
        }
        // (k2, -k1) = -g (-k2', k1') with g = gcd(k1, k2)
        let g = spectral::gcd(k.k1.unsigned_abs(), k.k2.unsigned_abs()) as f64;
        let c = -Complex64::new(0.0, 1.0) * g * w / (TWO_PI * k.norm_sq() as f64);
        u.coeffs_mut()[i] = transverse(k, c);
    }
    Ok(u)
}

/// `-(u . grad) w` with `u` from Biot-Savart, dealiased and truncated.
fn transport_rhs(omega: &SpectralScalarField) -> Result<SpectralScalarField> {
    let u = velocity_from_vorticity(omega)?;
    let zero = SpectralScalarField::zeros(omega.k_max());
    let w = SpectralVectorField::from_components(omega, &zero)?;
    let adv = advect_truncated(&u, &w, omega.k_max());
    let mut out = adv.component(0).scale(-1.0);
    let z = out.layout().index(WaveVector::ZERO).unwrap();
    out.coeffs_mut()[z] = Complex64::new(0.0, 0.0);
    Ok(out)
}

fn integrating_factor(omega: &SpectralScalarField, eta: f64, h: f64) -> Vec<f64> {
    omega
        .layout()
        .wavevectors()
        .map(|k| (laplacian_symbol(k) * eta * h).exp())
        .collect()
}

fn lincomb(terms: &[(&[f64], f64, &SpectralScalarField)], k_max: usize) -> SpectralScalarField {
    let mut out = SpectralScalarField::zeros(k_max);
    for (factor, a, f) in terms {
        for ((o, c), e) in out.coeffs_mut().iter_mut().zip(f.coeffs()).zip(factor.iter()) {
            *o += c * (a * e);
        }
    }
    out
}

/// One integrating-factor RK4 step of `w_t = -u . grad w + eta lap w`.
pub fn ns_reference_step(state: &VorticityState, eta: f64, dt: f64) -> Result<VorticityState> {
    let k = state.k_max();
    let w = &state.omega;
    let ones = vec![1.0; w.coeffs().len()];
    let e_half = integrating_factor(w, eta, 0.5 * dt);
    let e_full = integrating_factor(w, eta, dt);

    let a = transport_rhs(w)?;
    let b = transport_rhs(&lincomb(&[(&e_half, 1.0, w), (&e_half, 0.5 * dt, &a)], k))?;
    let c = transport_rhs(&lincomb(&[(&e_half, 1.0, w), (&ones, 0.5 * dt, &b)], k))?;
    let e_half_c = lincomb(&[(&e_half, 1.0, &c)], k);
    let d = transport_rhs(&lincomb(&[(&e_full, 1.0, w), (&ones, dt, &e_half_c)], k))?;

    let bc = lincomb(&[(&ones, 1.0, &b), (&ones, 1.0, &c)], k);
    let omega = lincomb(
        &[
            (&e_full, 1.0, w),
            (&e_full, dt / 6.0, &a),
            (&e_half, dt / 3.0, &bc),
            (&ones, dt / 6.0, &d),
        ],
        k,
    );
    let t = state.t + dt;
    if omega
        .coeffs()
        .iter()
        .any(|c| !c.re.is_finite() || !c.im.is_finite())
    {
        return Err(Error::BlowUp { t, particle: 0 });
    }
    Ok(VorticityState { t, omega })
}

/// Taylor-Green vortex `(sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y) exp(-8 pi^2 eta t)`,
/// an exact solution of the Navier-Stokes equations on the unit torus.
pub fn taylor_green(t: f64, eta: f64, k_max: usize) -> Result<SpectralVectorField> {
    if k_max < 1 {
        return Err(Error::config("Taylor-Green needs truncation K >= 1"));
    }
    let a = 0.25 * (-2.0 * TWO_PI * TWO_PI * eta * t).exp();
    let mut u = SpectralVectorField::zeros(k_max);
    u.set_mode(
        WaveVector::new(1, 1),
        [Complex64::new(0.0, -a), Complex64::new(0.0, a)],
    );
    u.set_mode(
        WaveVector::new(1, -1),
        [Complex64::new(0.0, -a), Complex64::new(0.0, -a)],
    );
    Ok(u)
}

/// `||a - b||` in `L^2(T^2)`.
pub fn l2_error(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<f64> {
    spectral::l2_distance(a, b)
}

/// Relative `L^2` error `||a - b|| / ||b||`.
pub fn relative_l2_error(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<f64> {
    Ok(l2_error(a, b)? / b.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;

    #[test]
    fn tg_velocity_from_vorticity() {
        // w = 4 pi sin 2pi x sin 2pi y
        let mut w = SpectralScalarField::zeros(4);
        let s = 4.0 * std::f64::consts::PI;
        // sin X sin Y = -(e^{i(X+Y)} - e^{i(X-Y)} - e^{-i(X-Y)} + e^{-i(X+Y)}) / 4
        w.set_mode(WaveVector::new(1, 1), Complex64::new(-s / 4.0, 0.0));
        w.set_mode(WaveVector::new(1, -1), Complex64::new(s / 4.0, 0.0));
        let u = velocity_from_vorticity(&w).unwrap();
        let tg = taylor_green(0.0, 0.0, 4).unwrap();
        assert!(l2_error(&u, &tg).unwrap() < 1e-15);
    }

    #[test]
    fn zero_vorticity_gives_zero_velocity() {
        let u = velocity_from_vorticity(&SpectralScalarField::zeros(3)).unwrap();
        assert_eq!(u.l2_norm(), 0.0);
    }

    #[test]
    fn nonzero_mean_vorticity_rejected() {
        let mut w = SpectralScalarField::zeros(2);
        w.set_mode(WaveVector::ZERO, Complex64::new(1.0, 0.0));
        assert!(matches!(velocity_from_vorticity(&w), Err(Error::Data(_))));
    }

    #[test]
    fn biot_savart_is_divergence_free_right_inverse_of_curl() {
        let mut rng = testutil::rng(11);
        for _ in 0..10 {
            let mut w = testutil::random_scalar(&mut rng, 6, 6);
            w.set_mode(WaveVector::ZERO, Complex64::new(0.0, 0.0));
            let u = velocity_from_vorticity(&w).unwrap();
            assert!(u.divergence().coeffs().iter().all(|c| c.norm() == 0.0));
            let back = u.curl();
            for (a, b) in back.coeffs().iter().zip(w.coeffs()) {
                assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0));
            }
            assert_eq!(u.max_hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn tg_energy_and_divergence() {
        for &(t, eta) in &[(0.0, 0.02), (0.3, 0.02), (1.0, 0.005)] {
            let u = taylor_green(t, eta, 5).unwrap();
            let expected = 0.25 * (-16.0 * std::f64::consts::PI.powi(2) * eta * t).exp();
            assert!((u.energy() - expected).abs() < 1e-15);
            assert!(u.divergence().coeffs().iter().all(|c| c.norm() == 0.0));
        }
        let u = taylor_green(0.0, 0.02, 3).unwrap();
        let v = u.evaluate_at([0.25, 0.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
        assert!(taylor_green(0.0, 0.0, 0).is_err());
    }

    #[test]
    fn l2_error_basics() {
        let mut rng = testutil::rng(5);
        let a = testutil::random_vector(&mut rng, 4, 4);
        let b = testutil::random_vector(&mut rng, 4, 4);
        assert_eq!(l2_error(&a, &a).unwrap(), 0.0);
        let z = SpectralVectorField::zeros(4);
        assert!((l2_error(&a, &z).unwrap() - (2.0 * a.energy()).sqrt()).abs() < 1e-14);
        assert_eq!(l2_error(&a, &b).unwrap(), l2_error(&b, &a).unwrap());
        assert!(l2_error(&a, &SpectralVectorField::zeros(3)).is_err());
    }

    #[test]
    fn tg_decays_exactly_under_reference_solver() {
        let eta = 0.02;
        let dt = 1e-3;
        let u0 = taylor_green(0.0, eta, 8).unwrap();
        let mut s = VorticityState::from_velocity(0.0, &u0);
        for _ in 0..100 {
            s = ns_reference_step(&s, eta, dt).unwrap();
        }
        let exact = taylor_green(s.t, eta, 8).unwrap();
        let u = s.velocity().unwrap();
        assert!(relative_l2_error(&u, &exact).unwrap() <= 1e-9);
        // the mode support stays on |k1| = |k2| = 1
        let layout = s.omega.layout();
        for (i, c) in s.omega.coeffs().iter().enumerate() {
            let k = layout.wavevector(i);
            if k.k1.abs() != 1 || k.k2.abs() != 1 {
                assert!(c.norm() < 1e-13, "{k:?} {c}");
            }
        }
    }

    #[test]
    fn step_preserves_mean_and_symmetry() {
        let mut rng = testutil::rng(3);
        let u = testutil::random_vector(&mut rng, 6, 4).helmholtz_project();
        let mut s = VorticityState::from_velocity(0.0, &u);
        for _ in 0..5 {
            s = ns_reference_step(&s, 0.01, 1e-3).unwrap();
            assert_eq!(s.omega.get(WaveVector::ZERO), Complex64::new(0.0, 0.0));
            assert_eq!(s.omega.max_hermitian_defect(), 0.0);
        }
    }
}
