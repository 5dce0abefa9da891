//! Experiment orchestration for the command-line front end: deterministic
//! reference runs, Monte-Carlo convergence sweeps, and snapshot comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::noise::build_basis;
use crate::reference::{l2_error, ns_reference_step, relative_l2_error, taylor_green, VorticityState};
use crate::sde::{initial_velocity, DiagnosticsRecord, InitialCondition, RunOutput, SimConfig, Simulation};
use crate::snapshot::Snapshot;
use crate::spectral::SpectralVectorField;

/// What the terminal ensemble mean of a convergence cell is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum ComparisonTarget {
    /// The reference flow tracked by the run: closed-form Taylor-Green for that
    /// initial condition, the vorticity integrator otherwise.
    Reference,
    /// Closed-form Taylor-Green at the horizon, whatever the initial condition.
    TaylorGreen,
    /// A fixed MFNS snapshot.
    File(PathBuf),
}

impl std::str::FromStr for ComparisonTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Self::Reference),
            "taylor-green" => Ok(Self::TaylorGreen),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(Error::config(format!(
                    "unknown comparison target '{s}' (expected reference, taylor-green or file:<path>)"
                ))),
            },
        }
    }
}

/// A sweep over particle counts, time steps and seeds around a base config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: SimConfig,
    pub particle_counts: Vec<usize>,
    pub time_steps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub target: ComparisonTarget,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("N", self.particle_counts.is_empty()),
            ("dt", self.time_steps.is_empty()),
            ("seed", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::config(format!("sweep list for {name} is empty")));
            }
        }
        for cell in self.cells() {
            cell.validate()?;
        }
        Ok(())
    }

    /// Cell configs in sweep order: dt outermost, then N, then seed.
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &dt in &self.time_steps {
            for &n in &self.particle_counts {
                for &seed in &self.seeds {
                    out.push(SimConfig {
                        dt,
                        particles: n,
                        seed,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}

/// Terminal error of one `(N, dt, seed)` cell; `NaN` if the run failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub particles: usize,
    pub dt: f64,
    pub seed: u64,
    /// Relative L2 error of the ensemble mean against the target.
    pub error: f64,
}

pub const CONVERGENCE_HEADER: &str = "N,dt,seed,error";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() || v.iter().any(|x| x.is_nan()) {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl ConvergenceReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_nan()).count()
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{CONVERGENCE_HEADER}\n");
        for r in &self.rows {
            writeln!(s, "{},{},{},{}", r.particles, r.dt, r.seed, r.error).unwrap();
        }
        s
    }

    /// Median error over seeds for each particle count at time step `dt`,
    /// ordered by increasing `N`. A failed cell makes its median `NaN`.
    pub fn medians(&self, dt: f64) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self
            .rows
            .iter()
            .filter(|r| r.dt == dt)
            .map(|r| r.particles)
            .collect();
        ns.sort_unstable();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let errs = self
                    .rows
                    .iter()
                    .filter(|r| r.dt == dt && r.particles == n)
                    .map(|r| r.error)
                    .collect();
                (n, median(errs))
            })
            .collect()
    }

    /// True if the medians at `dt` strictly decrease with `N`.
    pub fn decreasing_in_n(&self, dt: f64) -> bool {
        self.medians(dt).windows(2).all(|w| w[1].1 < w[0].1)
    }

    fn time_steps(&self) -> Vec<f64> {
        let mut dts: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !dts.contains(&r.dt) {
                dts.push(r.dt);
            }
        }
        dts
    }

    /// Human-readable trend summary per time step.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for dt in self.time_steps() {
            let med = self.medians(dt);
            let list: Vec<String> = med.iter().map(|(n, e)| format!("N={n}: {e:.4e}")).collect();
            writeln!(s, "dt={dt}: median error {}", list.join(", ")).unwrap();
            if med.len() > 1 {
                let ratio = med[0].1 / med[med.len() - 1].1;
                writeln!(
                    s,
                    "dt={dt}: monotonically decreasing in N: {}; ratio first/last {ratio:.3}",
                    if self.decreasing_in_n(dt) { "yes" } else { "no" }
                )
                .unwrap();
            }
        }
        let f = self.failures();
        if f > 0 {
            writeln!(s, "{f} cell(s) failed (error = NaN)").unwrap();
        }
        s
    }
}

fn target_velocity(sim: &Simulation, target: &ComparisonTarget) -> Result<SpectralVectorField> {
    match target {
        ComparisonTarget::Reference => sim.reference_velocity(),
        ComparisonTarget::TaylorGreen => {
            taylor_green(sim.state.t, sim.model.ito_correction, sim.config.k_field)
        }
        ComparisonTarget::File(path) => {
            let s = Snapshot::read(path)?;
            if s.field.k_max() != sim.config.k_field {
                return Err(Error::config(format!(
                    "target {} has K = {}, run uses K = {}",
                    path.display(),
                    s.field.k_max(),
                    sim.config.k_field
                )));
            }
            Ok(s.field)
        }
    }
}

/// Terminal relative error of one cell. Stepping failures give `Ok(NaN)`;
/// invalid inputs are errors.
pub fn convergence_cell(config: SimConfig, target: &ComparisonTarget) -> Result<f64> {
    let mut sim = Simulation::new(config)?;
    if let ComparisonTarget::File(_) = target {
        // fail fast on an unusable target before spending time on the run
        target_velocity(&sim, target)?;
    }
    while !sim.is_finished() {
        if let Err(e) = sim.step() {
            if e.is_runtime_failure() {
                return Ok(f64::NAN);
            }
            return Err(e);
        }
    }
    relative_l2_error(&sim.mean(), &target_velocity(&sim, target)?)
}

/// Runs every cell of `plan` in sweep order. With an output directory the
/// report is also written to `convergence.csv` there.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<ConvergenceReport> {
    plan.validate()?;
    let mut rows = Vec::new();
    for cell in plan.cells() {
        let (particles, dt, seed) = (cell.particles, cell.dt, cell.seed);
        let error = convergence_cell(cell, &plan.target)?;
        rows.push(ConvergenceRow {
            particles,
            dt,
            seed,
            error,
        });
    }
    let report = ConvergenceReport { rows };
    if let Some(dir) = &plan.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("convergence.csv");
        std::fs::write(&p, report.csv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

/// Deterministic Navier-Stokes run from the configured initial condition with
/// the viscosity the ensemble mean is expected to follow. Output has the same
/// shape as an ensemble run; `l2_err_ref` is the distance to the closed-form
/// Taylor-Green solution when that is the initial condition.
pub fn run_reference(config: &SimConfig) -> Result<RunOutput> {
    config.validate()?;
    let c = build_basis(config.k_noise)?.covariance_constant();
    let viscosity = config.effective_viscosity(c);
    let u0 = initial_velocity(&config.initial_condition, config.k_field)?;
    let exact = matches!(config.initial_condition, InitialCondition::TaylorGreen);
    let record = |state: &VorticityState| -> Result<(DiagnosticsRecord, Snapshot)> {
        let u = state.velocity()?;
        let err = if exact {
            Some(l2_error(&u, &taylor_green(state.t, viscosity, config.k_field)?)?)
        } else {
            None
        };
        let r = DiagnosticsRecord {
            t: state.t,
            energy_mean: u.energy(),
            enstrophy_mean: u.enstrophy(),
            max_mode_mean_div: u.divergence().max_abs_coeff(),
            mean_pm_norm: 0.0,
            l2_err_ref: err,
        };
        Ok((r, Snapshot::new(state.t, u)))
    };

    let every = config.snapshot_every;
    let mut state = VorticityState::from_velocity(0.0, &u0);
    let (r, snap) = record(&state)?;
    let mut out = RunOutput {
        diagnostics: vec![r],
        snapshots: Vec::new(),
        final_mean: snap.clone(),
        failure: None,
    };
    if every > 0 {
        out.snapshots.push((0, snap));
    }
    for step in 1..=config.steps() {
        match ns_reference_step(&state, viscosity, config.dt) {
            Ok(mut next) => {
                next.t = step as f64 * config.dt;
                state = next;
            }
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
        let (r, snap) = record(&state)?;
        out.diagnostics.push(r);
        if every > 0 && step % every == 0 {
            out.snapshots.push((step, snap.clone()));
        }
        out.final_mean = snap;
    }
    Ok(out)
}

/// Differences between two snapshots of equal truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport {
    pub l2_error: f64,
    /// `max_k |a^(k) - b^(k)|` over both components.
    pub max_mode_deviation: f64,
    /// `energy(a) - energy(b)`.
    pub energy_difference: f64,
}

impl ComparisonReport {
    pub fn between(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<Self> {
        let d = a.sub(b)?;
        Ok(Self {
            l2_error: d.l2_norm(),
            max_mode_deviation: d.max_abs_coeff(),
            energy_difference: a.energy() - b.energy(),
        })
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "l2_error = {:e}", self.l2_error)?;
        writeln!(f, "max_mode_deviation = {:e}", self.max_mode_deviation)?;
        write!(f, "energy_difference = {:e}", self.energy_difference)
    }
}

/// Reads two MFNS files and compares them; differing truncations are rejected.
pub fn compare(a: &Path, b: &Path) -> Result<ComparisonReport> {
    let sa = Snapshot::read(a)?;
    let sb = Snapshot::read(b)?;
    if sa.field.k_max() != sb.field.k_max() {
        return Err(Error::config(format!(
            "truncation mismatch: {} has K = {}, {} has K = {}",
            a.display(),
            sa.field.k_max(),
            b.display(),
            sb.field.k_max()
        )));
    }
    ComparisonReport::between(&sa.field, &sb.field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Scheme;

    fn base() -> SimConfig {
        SimConfig::parse(
            "eta = 0.02\ndt = 1e-3\nT = 0.01\nN = 4\nk_field = 4\nk_noise = 1\n\
             scheme = ito-euler\nseed = 1\nic = taylor-green\n",
        )
        .unwrap()
    }

    fn plan() -> ExperimentPlan {
        ExperimentPlan {
            base: base(),
            particle_counts: vec![2, 8],
            time_steps: vec![1e-3],
            seeds: vec![1, 2, 3],
            out_dir: None,
            target: ComparisonTarget::Reference,
        }
    }

    #[test]
    fn targets_parse() {
        assert_eq!("reference".parse::<ComparisonTarget>().unwrap(), ComparisonTarget::Reference);
        assert_eq!(
            "file:a/b.mfns".parse::<ComparisonTarget>().unwrap(),
            ComparisonTarget::File("a/b.mfns".into())
        );
        assert!("file:".parse::<ComparisonTarget>().is_err());
        assert!("exact".parse::<ComparisonTarget>().is_err());
    }

    #[test]
    fn empty_sweep_rejected() {
        for f in [
            |p: &mut ExperimentPlan| p.particle_counts.clear(),
            |p: &mut ExperimentPlan| p.time_steps.clear(),
            |p: &mut ExperimentPlan| p.seeds.clear(),
        ] {
            let mut p = plan();
            f(&mut p);
            assert!(matches!(run_convergence(&p), Err(Error::Config(_))));
        }
        let mut p = plan();
        p.particle_counts = vec![0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0]), 2.5);
        assert!(median(vec![1.0, f64::NAN, 2.0]).is_nan());
    }

    #[test]
    fn report_layout_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan();
        p.out_dir = Some(dir.path().join("conv"));
        let report = run_convergence(&p).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(
            report.rows.iter().map(|r| (r.particles, r.seed)).collect::<Vec<_>>(),
            vec![(2, 1), (2, 2), (2, 3), (8, 1), (8, 2), (8, 3)]
        );
        assert!(report.rows.iter().all(|r| r.error.is_finite() && r.error > 0.0));
        let written = std::fs::read_to_string(dir.path().join("conv/convergence.csv")).unwrap();
        assert_eq!(written, report.csv());
        assert!(written.starts_with("N,dt,seed,error\n"));
        assert_eq!(report.medians(1e-3).len(), 2);
        assert!(report.summary().contains("median error"));
        assert_eq!(report.failures(), 0);
    }

    #[test]
    fn deterministic_error_decreases_with_dt() {
        let mut p = plan();
        p.base.nu_override = Some(0.0);
        p.base.scheme = Scheme::StratHeun;
        p.base.horizon = 0.02;
        p.base.initial_condition = InitialCondition::RandomSmooth { seed: 5, slope: 3.0 };
        p.particle_counts = vec![1];
        p.seeds = vec![1];
        p.time_steps = vec![2e-3, 1e-3, 5e-4];
        let r = run_convergence(&p).unwrap();
        let e: Vec<f64> = r.rows.iter().map(|r| r.error).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }

    #[test]
    fn blow_up_recorded_as_nan() {
        let mut p = plan();
        // an explicit step this large is far outside the stability region
        p.base.dt = 0.5;
        p.base.horizon = 50.0;
        p.time_steps = vec![0.5];
        p.particle_counts = vec![2];
        p.seeds = vec![1];
        p.base.eta = 1.0;
        let r = run_convergence(&p).unwrap();
        assert!(r.rows[0].error.is_nan());
        assert_eq!(r.failures(), 1);
        assert!(r.csv().contains("NaN"));
        assert!(r.summary().contains("failed"));
    }

    #[test]
    fn reference_run_tracks_taylor_green() {
        let c = SimConfig {
            horizon: 0.05,
            snapshot_every: 25,
            ..base()
        };
        let out = run_reference(&c).unwrap().into_result().unwrap();
        assert_eq!(out.diagnostics.len(), 51);
        assert_eq!(out.snapshots.len(), 3);
        for r in &out.diagnostics {
            assert!(r.l2_err_ref.unwrap() < 1e-12);
            assert_eq!(r.max_mode_mean_div, 0.0);
        }
        let last = out.diagnostics.last().unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let exact = 0.25 * (-16.0 * pi2 * 0.02 * 0.05f64).exp();
        assert!((last.energy_mean - exact).abs() < 1e-12);
    }

    #[test]
    fn compare_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.mfns");
        let b = dir.path().join("b.mfns");
        let c = dir.path().join("c.mfns");
        let tg = taylor_green(0.0, 0.0, 4).unwrap();
        Snapshot::new(0.0, tg.clone()).write(&a).unwrap();
        Snapshot::new(0.0, tg.helmholtz_project()).write(&b).unwrap();
        Snapshot::new(0.0, taylor_green(0.0, 0.0, 5).unwrap()).write(&c).unwrap();
        let r = compare(&a, &b).unwrap();
        assert_eq!((r.l2_error, r.max_mode_deviation, r.energy_difference), (0.0, 0.0, 0.0));
        assert!(matches!(compare(&a, &c), Err(Error::Config(_))));
        let r = ComparisonReport::between(&tg, &SpectralVectorField::zeros(4)).unwrap();
        assert!((r.l2_error - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r.energy_difference - 0.25).abs() < 1e-15);
        assert!((r.max_mode_deviation - 0.25).abs() < 1e-15);
    }
}
