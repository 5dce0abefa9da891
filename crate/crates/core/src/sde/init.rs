use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::InitialCondition;
use super::rng::stream_key;
use crate::error::{Error, Result};
use crate::reference::taylor_green;
use crate::snapshot::Snapshot;
use crate::spectral::{SpectralVectorField, WaveVector};

/// Random divergence-free, zero-mean field with coefficient amplitudes
/// `|k|^-slope` times complex Gaussians, scaled to energy 1/4.
pub fn random_smooth(seed: u64, slope: f64, k_max: usize) -> Result<SpectralVectorField> {
    if k_max < 1 {
        return Err(Error::config("random-smooth needs truncation K >= 1"));
    }
    let mut rng = ChaCha8Rng::from_seed(stream_key(seed, u64::MAX));
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut f = SpectralVectorField::zeros(k_max);
    let r = k_max as i64;
    for k1 in 0..=r {
        for k2 in -r..=r {
            let k = WaveVector::new(k1, k2);
            if !k.is_half_lattice() {
                continue;
            }
            let a = k.norm().powf(-slope);
            let v = [
                Complex64::new(gauss(), gauss()) * a,
                Complex64::new(gauss(), gauss()) * a,
            ];
            f.set_mode(k, v);
        }
    }
    let f = f.helmholtz_project();
    let e = f.energy();
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::config(format!(
            "random-smooth slope {slope} produced a degenerate field"
        )));
    }
    // rescaling can disturb the exact-zero divergence, so project once more
    Ok(f.scale((0.25 / e).sqrt()).helmholtz_project())
}

/// The initial velocity `u_0`, projected onto divergence-free fields.
pub fn initial_velocity(ic: &InitialCondition, k_max: usize) -> Result<SpectralVectorField> {
    let u = match ic {
        InitialCondition::TaylorGreen => taylor_green(0.0, 0.0, k_max)?,
        InitialCondition::RandomSmooth { seed, slope } => random_smooth(*seed, *slope, k_max)?,
        InitialCondition::File(path) => {
            let s = Snapshot::read(path)?;
            if !s.field.is_finite() {
                return Err(Error::format(path, "non-finite coefficients"));
            }
            let mut f = s.field.retruncate(k_max);
            f.enforce_hermitian();
            f
        }
    };
    Ok(u.helmholtz_project())
}
