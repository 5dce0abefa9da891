use std::path::{Path, PathBuf};

use super::diagnostics::{divergence_statistics, to_csv};
use super::{
    initial_velocity, DiagnosticsRecord, EnsembleState, Increments, InitialCondition,
    MeanFieldModel, ModeStatistic, SimConfig,
};
use crate::error::{Error, Result};
use crate::reference::{l2_error, ns_reference_step, taylor_green, VorticityState};
use crate::snapshot::Snapshot;
use crate::spectral::SpectralVectorField;

/// Deterministic flow the ensemble mean is compared against, advanced in
/// lockstep with the particles.
#[derive(Debug, Clone)]
enum ReferenceTrack {
    /// Closed form, exact for the Taylor-Green initial condition.
    TaylorGreen { viscosity: f64, k_max: usize },
    /// Vorticity-form integrator started from `u_0`.
    Solver { viscosity: f64, state: VorticityState },
}

impl ReferenceTrack {
    fn velocity(&self, t: f64) -> Result<SpectralVectorField> {
        match self {
            Self::TaylorGreen { viscosity, k_max } => taylor_green(t, *viscosity, *k_max),
            Self::Solver { state, .. } => state.velocity(),
        }
    }

    fn advance(&mut self, dt: f64, t_next: f64) -> Result<()> {
        if let Self::Solver { viscosity, state } = self {
            let mut next = ns_reference_step(state, *viscosity, dt)?;
            next.t = t_next;
            *state = next;
        }
        Ok(())
    }
}

/// A configured ensemble together with its reference flow.
#[derive(Debug)]
pub struct Simulation {
    pub config: SimConfig,
    pub model: MeanFieldModel,
    pub state: EnsembleState,
    reference: ReferenceTrack,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let model = MeanFieldModel::from_config(&config)?;
        let u0 = initial_velocity(&config.initial_condition, config.k_field)?;
        let state = EnsembleState::new(&u0, config.particles, config.seed)?;
        // the mean follows Navier-Stokes with viscosity c_K nu^2 / 2, which is
        // eta unless nu is overridden
        let viscosity = model.ito_correction;
        let reference = match config.initial_condition {
            InitialCondition::TaylorGreen => ReferenceTrack::TaylorGreen {
                viscosity,
                k_max: config.k_field,
            },
            _ => ReferenceTrack::Solver {
                viscosity,
                state: VorticityState::from_velocity(0.0, &u0),
            },
        };
        Ok(Self {
            config,
            model,
            state,
            reference,
        })
    }

    pub fn steps(&self) -> usize {
        self.config.steps()
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.steps()
    }

    pub fn mean(&self) -> SpectralVectorField {
        self.state.mean()
    }

    /// Reference velocity at the current time.
    pub fn reference_velocity(&self) -> Result<SpectralVectorField> {
        self.reference.velocity(self.state.t)
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_with(Increments::FromStreams)
    }

    pub fn step_with(&mut self, increments: Increments<'_>) -> Result<()> {
        let dt = self.config.dt;
        self.model
            .step(self.config.scheme, &mut self.state, dt, increments)?;
        self.reference.advance(dt, self.state.t)
    }

    pub fn diagnostics(&self) -> Result<DiagnosticsRecord> {
        let mean = self.mean();
        let err = l2_error(&mean, &self.reference_velocity()?)?;
        let r = DiagnosticsRecord::from_ensemble(&self.state, &mean, self.config.eta, Some(err));
        if !r.is_finite() {
            return Err(Error::Consistency(format!(
                "non-finite diagnostics at t = {}",
                r.t
            )));
        }
        Ok(r)
    }

    pub fn divergence_statistics(&self) -> Vec<ModeStatistic> {
        divergence_statistics(&self.state)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::new(self.state.t, self.mean())
    }
}

/// Diagnostics and snapshots of a run, including a failed one.
#[derive(Debug)]
pub struct RunOutput {
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// `(step, snapshot)` at the configured cadence.
    pub snapshots: Vec<(usize, Snapshot)>,
    /// Mean at the last completed step.
    pub final_mean: Snapshot,
    /// The error that aborted the run, if any.
    pub failure: Option<Error>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        to_csv(&self.diagnostics)
    }

    /// Writes `diagnostics.csv`, `mean_<step>.mfns` per cadence snapshot, and
    /// `mean_final.mfns` into `dir`, returning the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let csv = dir.join("diagnostics.csv");
        std::fs::write(&csv, self.csv()).map_err(|e| Error::io(&csv, e))?;
        written.push(csv);
        for (step, s) in &self.snapshots {
            let p = dir.join(format!("mean_{step:06}.mfns"));
            s.write(&p)?;
            written.push(p);
        }
        let p = dir.join("mean_final.mfns");
        self.final_mean.write(&p)?;
        written.push(p);
        Ok(written)
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

fn run_inner(config: SimConfig) -> Result<RunOutput> {
    let every = config.snapshot_every;
    let mut sim = Simulation::new(config)?;
    let mut out = RunOutput {
        diagnostics: vec![sim.diagnostics()?],
        snapshots: Vec::new(),
        final_mean: sim.snapshot(),
        failure: None,
    };
    if every > 0 {
        out.snapshots.push((0, sim.snapshot()));
    }
    while !sim.is_finished() {
        let stepped = sim.step().and_then(|_| sim.diagnostics());
        match stepped {
            Ok(r) => out.diagnostics.push(r),
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
        if every > 0 && sim.state.step % every == 0 {
            out.snapshots.push((sim.state.step, sim.snapshot()));
        }
    }
    out.final_mean = sim.snapshot();
    Ok(out)
}

/// Runs `config` to the horizon. With `workers = Some(n)` the particles are
/// updated on a dedicated pool of `n` threads; outputs do not depend on `n`.
/// Setup errors are returned as `Err`; a failure during stepping ends the
/// run early and is reported in [`RunOutput::failure`].
pub fn run(config: SimConfig, workers: Option<usize>) -> Result<RunOutput> {
    match workers {
        None => run_inner(config),
        Some(0) => Err(Error::config("worker count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| run_inner(config))
        }
    }
}
