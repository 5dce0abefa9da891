//! Interacting-particle approximation of the mean-field SDE
//!
//! ```text
//! d xi = ( -P (u . grad) xi - eta grad div xi ) dt - nu sum_a (X_a . grad) xi o dW_a,
//! u    = E[xi],   xi(0) = u_0,
//! ```
//!
//! whose Ito form carries the extra drift `(c_K nu^2 / 2) lap xi`. With
//! `nu = sqrt(2 eta / c_K)` the mean solves the incompressible Navier-Stokes
//! equations. The law enters only through the mean `u`, which is replaced by
//! the empirical mean of `N` particles driven by independent noise.

pub mod config;
mod diagnostics;
mod init;
pub mod rng;
mod simulation;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{build_basis, NoiseBasis};
use crate::spectral::{advect, sample_velocity, PhysicalGradient, PhysicalVectorGrid, SpectralVectorField};

pub use config::{InitialCondition, Scheme, SimConfig};
pub use diagnostics::{divergence_statistics, to_csv, DiagnosticsRecord, ModeStatistic, CSV_HEADER};
pub use init::{initial_velocity, random_smooth};
pub use rng::ParticleStream;
pub use simulation::{run, RunOutput, Simulation};

fn strat_from_advection(
    xi: &SpectralVectorField,
    advection: &SpectralVectorField,
    eta: f64,
) -> SpectralVectorField {
    let mut d = advection.helmholtz_project();
    d.scale_in_place(-1.0);
    if eta != 0.0 {
        d.axpy(-eta, &xi.divergence().grad()).unwrap();
    }
    d
}

/// `-P (u . grad) xi - eta grad div xi + a lap xi`, evaluated as
/// `P(a lap xi - (u . grad) xi) + (a - eta) lap(xi - P xi)`. Both forms agree
/// because `grad div = lap` on gradients. With `a = eta` only the projected
/// term remains, so the divergence is exactly zero.
fn ito_from_advection(
    xi: &SpectralVectorField,
    advection: &SpectralVectorField,
    eta: f64,
    a: f64,
) -> SpectralVectorField {
    let mut f = xi.laplacian().scale(a);
    f.axpy(-1.0, advection).unwrap();
    let mut d = f.helmholtz_project();
    if a != eta {
        d.axpy(a - eta, &xi.gradient_part().laplacian()).unwrap();
    }
    d
}

/// Stratonovich drift `-P (u . grad) xi - eta grad div xi`.
pub fn drift_strat(
    xi: &SpectralVectorField,
    u: &SpectralVectorField,
    eta: f64,
) -> Result<SpectralVectorField> {
    let adv = advect(u, xi)?;
    Ok(strat_from_advection(xi, &adv, eta))
}

/// Ito drift: the Stratonovich drift plus `(c_K nu^2 / 2) lap xi`.
pub fn drift_ito(
    xi: &SpectralVectorField,
    u: &SpectralVectorField,
    eta: f64,
    nu: f64,
    covariance_constant: f64,
) -> Result<SpectralVectorField> {
    let adv = advect(u, xi)?;
    let mut a = 0.5 * covariance_constant * nu * nu;
    // a canonical nu reproduces eta only up to rounding
    if (a - eta).abs() <= 4.0 * f64::EPSILON * eta {
        a = eta;
    }
    Ok(ito_from_advection(xi, &adv, eta, a))
}

fn tree_sum(fields: &[SpectralVectorField]) -> SpectralVectorField {
    match fields.len() {
        1 => fields[0].clone(),
        n => {
            let (a, b) = fields.split_at(n / 2);
            let (mut sa, sb) = rayon::join(|| tree_sum(a), || tree_sum(b));
            sa.axpy(1.0, &sb).unwrap();
            sa
        }
    }
}

/// Coefficientwise mean, summed pairwise along a fixed binary tree so that the
/// result does not depend on the number of worker threads.
pub fn empirical_mean(particles: &[SpectralVectorField]) -> Result<SpectralVectorField> {
    let Some(first) = particles.first() else {
        return Err(Error::config("empirical mean of an empty ensemble"));
    };
    if particles.iter().any(|p| p.k_max() != first.k_max()) {
        return Err(Error::config("particles have different truncations"));
    }
    let mut s = tree_sum(particles);
    s.scale_in_place(1.0 / particles.len() as f64);
    Ok(s)
}

/// Particle fields, clock, and the per-particle random streams.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub t: f64,
    pub step: usize,
    pub particles: Vec<SpectralVectorField>,
    pub rng_streams: Vec<ParticleStream>,
}

impl EnsembleState {
    /// All `n` particles start at `u0`; stream `i` is derived from `(seed, i)`.
    pub fn new(u0: &SpectralVectorField, n: usize, seed: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::config("ensemble needs at least one particle"));
        }
        Ok(Self {
            t: 0.0,
            step: 0,
            particles: vec![u0.clone(); n],
            rng_streams: (0..n as u64).map(|i| ParticleStream::new(seed, i)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.particles[0].k_max()
    }

    pub fn mean(&self) -> SpectralVectorField {
        empirical_mean(&self.particles).expect("ensemble is never empty")
    }
}

/// Where the Brownian increments of a step come from.
#[derive(Debug, Clone, Copy)]
pub enum Increments<'a> {
    /// Drawn from each particle's own stream.
    FromStreams,
    /// All increments zero; streams are not advanced.
    Zero,
    /// `increments[i]` for particle `i`.
    Explicit(&'a [Vec<f64>]),
}

/// Non-finite coefficients, or so large that the diagnostics overflow.
fn blown_up(f: &SpectralVectorField) -> bool {
    !f.is_finite() || !f.enstrophy().is_finite()
}

struct HeunStage {
    noise_grid: Option<PhysicalVectorGrid>,
    drift: SpectralVectorField,
    noise: Option<SpectralVectorField>,
    predictor: SpectralVectorField,
}

/// Equation coefficients shared by all particles.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldModel {
    pub basis: NoiseBasis,
    pub eta: f64,
    pub nu: f64,
    /// `c_K nu^2 / 2`; set to exactly `eta` for the canonical `nu`.
    pub ito_correction: f64,
    pub k_field: usize,
}

impl MeanFieldModel {
    pub fn new(eta: f64, nu: f64, k_field: usize, k_noise: usize) -> Result<Self> {
        let basis = build_basis(k_noise)?;
        if k_noise > k_field {
            return Err(Error::config(format!(
                "k_noise = {k_noise} exceeds k_field = {k_field}"
            )));
        }
        let ito_correction = 0.5 * basis.covariance_constant() * nu * nu;
        Ok(Self {
            basis,
            eta,
            nu,
            ito_correction,
            k_field,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let basis = build_basis(config.k_noise)?;
        let c = basis.covariance_constant();
        let nu = config.nu(c);
        let mut ito_correction = 0.5 * c * nu * nu;
        if config.nu_override.is_none() {
            if (ito_correction - config.eta).abs() > 4.0 * f64::EPSILON * config.eta {
                return Err(Error::Consistency(format!(
                    "canonical nu gives c_K nu^2 / 2 = {ito_correction}, expected eta = {}",
                    config.eta
                )));
            }
            ito_correction = config.eta;
        }
        Ok(Self {
            basis,
            eta: config.eta,
            nu,
            ito_correction,
            k_field: config.k_field,
        })
    }

    pub fn covariance_constant(&self) -> f64 {
        self.basis.covariance_constant()
    }

    pub fn drift_strat(&self, xi: &SpectralVectorField, u: &SpectralVectorField) -> Result<SpectralVectorField> {
        drift_strat(xi, u, self.eta)
    }

    pub fn drift_ito(&self, xi: &SpectralVectorField, u: &SpectralVectorField) -> Result<SpectralVectorField> {
        let adv = advect(u, xi)?;
        Ok(ito_from_advection(xi, &adv, self.eta, self.ito_correction))
    }

    fn grid(&self) -> usize {
        crate::spectral::product_resolution(self.k_field, self.k_field, self.k_field)
    }

    fn noise_grid(&self, dw: &[f64]) -> Result<Option<PhysicalVectorGrid>> {
        if self.nu == 0.0 || dw.iter().all(|&w| w == 0.0) {
            return Ok(None);
        }
        let w = self.basis.noise_field(dw, self.k_field)?;
        Ok(Some(sample_velocity(&w, self.grid())))
    }

    /// One Euler-Maruyama step of the Ito form for one particle with the mean
    /// frozen at `u_grid`.
    fn ito_euler_particle(
        &self,
        xi: &SpectralVectorField,
        u_grid: &PhysicalVectorGrid,
        dw: &[f64],
        dt: f64,
    ) -> Result<SpectralVectorField> {
        let k = self.k_field;
        let grad = PhysicalGradient::from_spectral(xi, u_grid.resolution);
        let drift = ito_from_advection(xi, &grad.transport(u_grid, k), self.eta, self.ito_correction);
        let mut out = xi.clone();
        out.axpy(dt, &drift)?;
        if let Some(w) = self.noise_grid(dw)? {
            out.axpy(-self.nu, &grad.transport(&w, k))?;
        }
        Ok(out)
    }

    /// Heun predictor for one particle: `xi + dt drift_strat(xi, u) + noise(xi)`.
    fn heun_predict(
        &self,
        xi: &SpectralVectorField,
        u_grid: &PhysicalVectorGrid,
        dw: &[f64],
        dt: f64,
    ) -> Result<HeunStage> {
        let k = self.k_field;
        let noise_grid = self.noise_grid(dw)?;
        let grad = PhysicalGradient::from_spectral(xi, u_grid.resolution);
        let drift = strat_from_advection(xi, &grad.transport(u_grid, k), self.eta);
        let noise = noise_grid.as_ref().map(|w| grad.transport(w, k));
        let mut predictor = xi.clone();
        predictor.axpy(dt, &drift)?;
        if let Some(n) = &noise {
            predictor.axpy(-self.nu, n)?;
        }
        Ok(HeunStage {
            noise_grid,
            drift,
            noise,
            predictor,
        })
    }

    /// Heun corrector, averaging the drift and noise terms at `xi` and at the
    /// predictor, with the same increments in both.
    fn heun_correct(
        &self,
        xi: &SpectralVectorField,
        stage: &HeunStage,
        u_grid: &PhysicalVectorGrid,
        dt: f64,
    ) -> Result<SpectralVectorField> {
        let k = self.k_field;
        let pred = &stage.predictor;
        let grad = PhysicalGradient::from_spectral(pred, u_grid.resolution);
        let drift = strat_from_advection(pred, &grad.transport(u_grid, k), self.eta);
        let mut out = xi.clone();
        out.axpy(0.5 * dt, &stage.drift)?;
        out.axpy(0.5 * dt, &drift)?;
        if let (Some(w), Some(n0)) = (&stage.noise_grid, &stage.noise) {
            let n1 = grad.transport(w, k);
            out.axpy(-0.5 * self.nu, n0)?;
            out.axpy(-0.5 * self.nu, &n1)?;
        }
        Ok(out)
    }

    /// Advances every particle by `dt`.
    ///
    /// Ito-Euler evaluates the drift with the empirical mean frozen at the start
    /// of the step. Strat-Heun treats the particle system as one SDE: the
    /// predictor uses the mean at the start of the step and the corrector uses
    /// the mean of the predictors, which keeps the scheme second order in the
    /// deterministic limit. Particles are updated in parallel within each
    /// stage; the outcome does not depend on the number of worker threads.
    pub fn step(
        &self,
        scheme: Scheme,
        state: &mut EnsembleState,
        dt: f64,
        increments: Increments<'_>,
    ) -> Result<()> {
        if state.k_max() != self.k_field {
            return Err(Error::config(format!(
                "ensemble truncation {} differs from model truncation {}",
                state.k_max(),
                self.k_field
            )));
        }
        if let Increments::Explicit(all) = increments {
            if all.len() != state.len() {
                return Err(Error::config(format!(
                    "expected increments for {} particles, got {}",
                    state.len(),
                    all.len()
                )));
            }
        }
        let u_grid = sample_velocity(&state.mean(), self.grid());
        let m = self.basis.len();
        let t_next = (state.step + 1) as f64 * dt;
        let blow_up = |i: usize| Error::BlowUp {
            t: t_next,
            particle: i,
        };

        let draws: Vec<Vec<f64>> = state
            .rng_streams
            .par_iter_mut()
            .enumerate()
            .map(|(i, stream)| {
                let mut dw = vec![0.0; m];
                match increments {
                    Increments::FromStreams => stream.brownian_increments(dt, &mut dw),
                    Increments::Zero => {}
                    Increments::Explicit(all) => dw.copy_from_slice(&all[i]),
                }
                dw
            })
            .collect();

        let next: Vec<SpectralVectorField> = match scheme {
            Scheme::ItoEuler => state
                .particles
                .par_iter()
                .zip(&draws)
                .enumerate()
                .map(|(i, (xi, dw))| {
                    let next = self.ito_euler_particle(xi, &u_grid, dw, dt)?;
                    if blown_up(&next) { Err(blow_up(i)) } else { Ok(next) }
                })
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<_>>()?,
            Scheme::StratHeun => {
                let stages = state
                    .particles
                    .par_iter()
                    .zip(&draws)
                    .enumerate()
                    .map(|(i, (xi, dw))| {
                        let s = self.heun_predict(xi, &u_grid, dw, dt)?;
                        if blown_up(&s.predictor) { Err(blow_up(i)) } else { Ok(s) }
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Result<Vec<_>>>()?;
                let preds: Vec<_> = stages.iter().map(|s| s.predictor.clone()).collect();
                let u_pred = sample_velocity(&empirical_mean(&preds)?, self.grid());
                state
                    .particles
                    .par_iter()
                    .zip(&stages)
                    .enumerate()
                    .map(|(i, (xi, s))| {
                        let next = self.heun_correct(xi, s, &u_pred, dt)?;
                        if blown_up(&next) { Err(blow_up(i)) } else { Ok(next) }
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Result<_>>()?
            }
        };
        state.particles = next;
        state.step += 1;
        state.t = t_next;
        Ok(())
    }

    pub fn step_em_ito(&self, state: &mut EnsembleState, dt: f64) -> Result<()> {
        self.step(Scheme::ItoEuler, state, dt, Increments::FromStreams)
    }

    pub fn step_heun_strat(&self, state: &mut EnsembleState, dt: f64) -> Result<()> {
        self.step(Scheme::StratHeun, state, dt, Increments::FromStreams)
    }
}
