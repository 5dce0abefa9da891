use std::fmt::Write as _;

use num_complex::Complex64;

use super::EnsembleState;
use crate::spectral::{SpectralVectorField, WaveVector};

/// Column order of the diagnostics CSV.
pub const CSV_HEADER: &str = "t,energy_mean,enstrophy_mean,max_mode_mean_div,mean_pm_norm,l2_err_ref";

/// Per-step summary of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Energy `1/2 |u|^2` of the empirical mean.
    pub energy_mean: f64,
    /// Enstrophy `1/2 |curl u|^2` of the empirical mean.
    pub enstrophy_mean: f64,
    /// `max_k |div^ u(k)|` for the empirical mean `u`.
    pub max_mode_mean_div: f64,
    /// Average over particles of the L2 norm of the molecular pressure `eta div xi`.
    pub mean_pm_norm: f64,
    /// L2 distance between the empirical mean and the reference velocity.
    pub l2_err_ref: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn from_ensemble(
        state: &EnsembleState,
        mean: &SpectralVectorField,
        eta: f64,
        l2_err_ref: Option<f64>,
    ) -> Self {
        let pm: f64 = state
            .particles
            .iter()
            .map(|p| p.divergence().l2_norm())
            .sum::<f64>()
            / state.len() as f64;
        Self {
            t: state.t,
            energy_mean: mean.energy(),
            enstrophy_mean: mean.enstrophy(),
            max_mode_mean_div: mean.divergence().max_abs_coeff(),
            mean_pm_norm: eta.abs() * pm,
            l2_err_ref,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.energy_mean,
            self.enstrophy_mean,
            self.max_mode_mean_div,
            self.mean_pm_norm,
        ]
        .iter()
        .chain(self.l2_err_ref.iter())
        .all(|v| v.is_finite())
    }

    /// One CSV line without the trailing newline. Values use the shortest
    /// representation that reads back to the same float, in scientific
    /// notation except for `t`.
    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{:e},{:e},{:e},{:e},",
            self.t, self.energy_mean, self.enstrophy_mean, self.max_mode_mean_div, self.mean_pm_norm
        );
        if let Some(e) = self.l2_err_ref {
            write!(s, "{e:e}").unwrap();
        }
        s
    }
}

/// Header plus one row per record.
pub fn to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Ensemble statistics of `div^ xi(k)` for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStatistic {
    pub k: WaveVector,
    pub mean: Complex64,
    /// Sample standard deviation, `sqrt(sum |z - mean|^2 / (N - 1))`.
    pub sd: f64,
    pub particles: usize,
}

impl ModeStatistic {
    /// `|mean| <= 4 sd / sqrt(N)`.
    pub fn consistent_with_zero(&self) -> bool {
        self.mean.norm() <= 4.0 * self.sd / (self.particles as f64).sqrt()
    }
}

/// Statistics of the particle divergences on every half-lattice mode.
pub fn divergence_statistics(state: &EnsembleState) -> Vec<ModeStatistic> {
    let divs: Vec<_> = state.particles.iter().map(|p| p.divergence()).collect();
    let n = divs.len();
    let layout = divs[0].layout();
    layout
        .wavevectors()
        .enumerate()
        .filter(|(_, k)| k.is_half_lattice())
        .map(|(i, k)| {
            let mean = divs.iter().map(|d| d.coeffs()[i]).sum::<Complex64>() / n as f64;
            let sd = if n > 1 {
                let ss: f64 = divs.iter().map(|d| (d.coeffs()[i] - mean).norm_sqr()).sum();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            ModeStatistic {
                k,
                mean,
                sd,
                particles: n,
            }
        })
        .collect()
}
