//! Implicit-Euler (Crandall–Liggett) time stepping on the truncated strip.
//!
//! Each step solves the auxiliary problem with `g = u^{k-1}` and sets
//! `u^k = z`, `w^k = E_R((u^k)^m)`. Diagnostics use the dual widths of the
//! finite-volume operator as trace quadrature weights and `w^T K w` for the
//! Dirichlet energy.

use crate::elliptic::{AuxiliarySolver, DiscreteLaplacian, ExtensionField, HarmonicExtender, SolveOptions};
use crate::error::{invalid, Error, Result};
use crate::fractional_oracle::TraceField;
use crate::grid::HalfStripGrid;
use crate::linalg::LinearBackend;
use crate::profiles::{DensityProfile, InitialProfile};
use crate::report::{Check, Report};
use log::{debug, warn};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Solver tolerances plus the slack `abs + rel * scale` used by property
/// checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub solve: SolveOptions,
    pub property_abs: f64,
    pub property_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            property_abs: 1e-8,
            property_rel: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn slack(&self, scale: f64) -> f64 {
        self.property_abs + self.property_rel * scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub radius: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub grade: f64,
    pub epsilon: f64,
    pub m: f64,
    pub density: DensityProfile,
    pub tolerances: Tolerances,
    pub t_final: f64,
    /// Keep `w` for every recorded state (needed by the Bénilan and
    /// domain-monotonicity checks).
    pub keep_fields: bool,
}

pub const DEFAULT_GRADE: f64 = 1.1;
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_SPACING: f64 = 0.1;

impl SolverConfig {
    /// Config with `Y = R`, grade 1.1, `ε = 0.01`, x-spacing 0.1 and first
    /// y-spacing 0.1.
    pub fn new(radius: f64, t_final: f64, m: f64) -> Result<Self> {
        let mut c = Self {
            radius,
            height: radius,
            nx: 3,
            ny: 3,
            grade: DEFAULT_GRADE,
            epsilon: DEFAULT_EPSILON,
            m,
            density: DensityProfile::One,
            tolerances: Tolerances::default(),
            t_final,
            keep_fields: true,
        };
        c.set_spacing(DEFAULT_SPACING, DEFAULT_SPACING)?;
        Ok(c)
    }

    /// Sets `nx`, `ny` from an x-spacing and a bound on the first y-spacing
    /// for the current radius, height and grade.
    pub fn set_spacing(&mut self, dx: f64, h0: f64) -> Result<()> {
        let g = HalfStripGrid::with_spacing(self.radius, self.height, dx, h0, self.grade)?;
        self.nx = g.nx();
        self.ny = g.ny();
        Ok(())
    }

    pub fn with_backend(mut self, backend: LinearBackend) -> Self {
        self.tolerances.solve.backend = backend;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(format!("time step must be positive, got {}", self.epsilon)));
        }
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(invalid(format!("exponent must be >= 1, got {}", self.m)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(invalid(format!("final time must be >= 0, got {}", self.t_final)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<HalfStripGrid>> {
        Ok(Arc::new(HalfStripGrid::new(
            self.radius,
            self.height,
            self.nx,
            self.ny,
            self.grade,
        )?))
    }

    /// Number of steps, `⌈T/ε⌉`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.epsilon - 1e-9).ceil().max(0.0) as usize
    }
}

impl fmt::Display for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R={} Y={} nx={} ny={} grade={} epsilon={} m={} density={} T={} backend={:?}",
            self.radius,
            self.height,
            self.nx,
            self.ny,
            self.grade,
            self.epsilon,
            self.m,
            self.density,
            self.t_final,
            self.tolerances.solve.backend
        )
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub step_index: usize,
    pub u: TraceField,
    /// `E_R(u^m)`; `None` when the trajectory does not keep fields.
    pub w: Option<ExtensionField>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    /// `w^T K w`
    pub dirichlet_energy: f64,
    /// `Σ ρ u^{m+1} dx`
    pub lyapunov: f64,
    /// `Σ ρ u dx`
    pub weighted_mass: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    /// `Σ ρ |u^k - u^{k-1}| dx / ε`; zero for the initial state.
    pub time_difference_l1: f64,
    /// `max |trace(w) - u^m|` over the interior columns.
    pub trace_coupling: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<HalfStripGrid>,
    pub rho: TraceField,
    pub epsilon: f64,
    pub m: f64,
    pub states: Vec<EvolutionState>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &EvolutionState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Index of the recorded time equal to `t` up to rounding.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let slack = 1e-9 * self.epsilon.max(1.0);
        self.states.iter().position(|s| (s.t - t).abs() <= slack)
    }

    /// L∞ stability, positivity, Lyapunov monotonicity and trace coupling
    /// at every recorded state. `tol` bounds roundoff and solver residual.
    pub fn invariant_checks(&self, tolerances: &Tolerances) -> Vec<Check> {
        let u0 = &self.states[0].u;
        let u0_max = u0.max_abs();
        let w_cap = u0_max.powf(self.m);
        let u_tol = tolerances.slack(u0_max);
        let w_tol = tolerances.slack(w_cap);

        let mut u_excess = f64::NEG_INFINITY;
        let mut u_min = f64::INFINITY;
        let mut w_excess = f64::NEG_INFINITY;
        let mut w_min = f64::INFINITY;
        for s in &self.states {
            u_excess = u_excess.max(s.u.max_abs() - u0_max);
            u_min = u_min.min(s.u.min());
            if let Some(w) = &s.w {
                w_excess = w_excess.max(w.max() - w_cap);
                w_min = w_min.min(w.min());
            }
        }
        let mut lyap_increase = f64::NEG_INFINITY;
        for d in self.diagnostics.windows(2) {
            lyap_increase = lyap_increase.max(d[1].lyapunov - d[0].lyapunov);
        }
        let lyap_tol = tolerances.slack(self.diagnostics[0].lyapunov);
        let coupling = self.diagnostics.iter().map(|d| d.trace_coupling).fold(0.0, f64::max);

        let mut checks = vec![
            Check::at_most("linf-stability", u_excess.max(0.0), u_tol),
            Check::at_least("positivity-u", u_min, 0.0),
        ];
        if w_min.is_finite() {
            checks.push(Check::at_most("w-upper-bound", w_excess.max(0.0), w_tol));
            checks.push(Check::at_least("positivity-w", w_min, -w_tol));
            checks.push(Check::at_most("trace-coupling", coupling, w_tol));
        }
        if self.diagnostics.len() > 1 {
            checks.push(Check::at_most("lyapunov-monotone", lyap_increase.max(0.0), lyap_tol));
        }
        checks
    }
}

/// `run` failure carrying everything computed before the failing step.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub partial: Trajectory,
    pub error: Error,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "run aborted after {} steps: {}",
            self.partial.states.len().saturating_sub(1),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Cached per-grid machinery for repeated steps.
pub struct Stepper {
    solver: AuxiliarySolver,
    weights: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: Arc<HalfStripGrid>, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let rho = config.density.sample(grid.x().clone())?;
        let solver = AuxiliarySolver::new(grid, config.epsilon, rho, config.m, config.tolerances.solve)?;
        let weights = solver.laplacian().dual_x().to_vec();
        Ok(Self { solver, weights })
    }

    pub fn grid(&self) -> &Arc<HalfStripGrid> {
        self.solver.grid()
    }

    pub fn rho(&self) -> &TraceField {
        self.solver.rho()
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        self.solver.laplacian()
    }

    pub fn extender(&self) -> &HarmonicExtender {
        self.solver.extender()
    }

    /// Initial state with `w = E_R(u0^m)`.
    pub fn initial_state(&self, u0: &TraceField) -> Result<(EvolutionState, StepDiagnostics)> {
        check_admissible(u0, self.grid())?;
        let m = self.solver.m();
        let w = self.extender().extend(&u0.values().iter().map(|x| x.powf(m)).collect::<Vec<_>>())?;
        let diag = self.diagnostics(0.0, u0, None, &w, 0, 0.0);
        Ok((
            EvolutionState {
                t: 0.0,
                step_index: 0,
                u: u0.clone(),
                w: Some(w),
            },
            diag,
        ))
    }

    pub fn step(&self, state: &EvolutionState) -> Result<(EvolutionState, StepDiagnostics)> {
        if state.u.min() < 0.0 {
            return Err(Error::PreconditionViolation("state has negative values".into()));
        }
        let res = self.solver.solve(&state.u)?;
        let t = state.t + self.solver.epsilon();
        let diag = self.diagnostics(t, &res.z, Some(&state.u), &res.v, res.iterations, res.residual);
        Ok((
            EvolutionState {
                t,
                step_index: state.step_index + 1,
                u: res.z,
                w: Some(res.v),
            },
            diag,
        ))
    }

    fn diagnostics(
        &self,
        t: f64,
        u: &TraceField,
        prev: Option<&TraceField>,
        w: &ExtensionField,
        iterations: usize,
        residual: f64,
    ) -> StepDiagnostics {
        let m = self.solver.m();
        let rho = self.rho().values();
        let uv = u.values();
        let mut lyapunov = 0.0;
        let mut mass = 0.0;
        let mut dl1 = 0.0;
        for i in 0..uv.len() {
            let q = rho[i] * self.weights[i];
            lyapunov += q * uv[i].powf(m + 1.0);
            mass += q * uv[i];
            if let Some(p) = prev {
                dl1 += q * (uv[i] - p.values()[i]).abs();
            }
        }
        let nx = uv.len();
        let coupling = (1..nx - 1)
            .map(|i| (w.at(i, 0) - uv[i].powf(m)).abs())
            .fold(0.0, f64::max);
        StepDiagnostics {
            t,
            dirichlet_energy: self.laplacian().energy(w.values()),
            lyapunov,
            weighted_mass: mass,
            newton_iterations: iterations,
            newton_residual: residual,
            time_difference_l1: dl1 / self.solver.epsilon(),
            trace_coupling: coupling,
        }
    }
}

fn check_admissible(u0: &TraceField, grid: &HalfStripGrid) -> Result<()> {
    if u0.len() != grid.nx() {
        return Err(invalid(format!(
            "initial datum has {} values, grid has {} columns",
            u0.len(),
            grid.nx()
        )));
    }
    if u0.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial datum must be finite"));
    }
    if u0.min() < 0.0 {
        return Err(Error::PreconditionViolation("initial datum must be nonnegative".into()));
    }
    Ok(())
}

fn warn_heavy_tail(u0: &TraceField, radius: f64) {
    let peak = u0.max_abs();
    let tail = u0
        .nodes()
        .iter()
        .zip(u0.values())
        .filter(|(x, _)| x.abs() >= 0.75 * radius)
        .fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    if peak > 0.0 && tail > 1e-3 * peak {
        warn!(
            "initial datum is {:.3e} of its peak near the truncation boundary; expect truncation error",
            tail / peak
        );
    }
}

/// One implicit step from `state` on the grid described by `config`.
pub fn step(state: &EvolutionState, config: &SolverConfig) -> Result<EvolutionState> {
    let stepper = Stepper::new(config.grid()?, config)?;
    Ok(stepper.step(state)?.0)
}

/// Marches `⌈T/ε⌉` steps from `u0` on `config.grid()`.
pub fn run(u0: &TraceField, config: &SolverConfig) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let grid = config.grid().map_err(|e| empty_failure(config, e))?;
    run_on_grid(u0, config, grid)
}

/// As [`run`], on an explicitly supplied grid (radius, height, sizes and
/// grade in `config` are ignored).
pub fn run_on_grid(
    u0: &TraceField,
    config: &SolverConfig,
    grid: Arc<HalfStripGrid>,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let stepper = Stepper::new(grid.clone(), config).map_err(|e| empty_failure(config, e))?;
    warn_heavy_tail(u0, grid.radius());
    let (s0, d0) = stepper.initial_state(u0).map_err(|e| empty_failure(config, e))?;
    let mut traj = Trajectory {
        grid,
        rho: stepper.rho().clone(),
        epsilon: config.epsilon,
        m: config.m,
        states: vec![s0],
        diagnostics: vec![d0],
    };
    let n = config.steps();
    for k in 0..n {
        match stepper.step(traj.last()) {
            Ok((mut s, d)) => {
                debug!("step {} t={} newton={} residual={:e}", k + 1, s.t, d.newton_iterations, d.newton_residual);
                // times are k ε exactly, not accumulated sums
                s.t = (k + 1) as f64 * config.epsilon;
                if !config.keep_fields {
                    if let Some(prev) = traj.states.last_mut() {
                        if prev.step_index > 0 {
                            prev.w = None;
                        }
                    }
                }
                traj.states.push(s);
                traj.diagnostics.push(StepDiagnostics {
                    t: (k + 1) as f64 * config.epsilon,
                    ..d
                });
            }
            Err(error) => return Err(Box::new(RunFailure { partial: traj, error })),
        }
    }
    Ok(traj)
}

fn empty_failure(config: &SolverConfig, error: Error) -> Box<RunFailure> {
    let grid = Arc::new(
        HalfStripGrid::new(1.0, 1.0, 3, 3, 1.0).expect("fixed placeholder grid is valid"),
    );
    Box::new(RunFailure {
        partial: Trajectory {
            rho: TraceField::constant(grid.x().clone(), 1.0),
            grid,
            epsilon: config.epsilon,
            m: config.m,
            states: Vec::new(),
            diagnostics: Vec::new(),
        },
        error,
    })
}

/// Signed residual of the energy identity between recorded times `tau` and
/// `t_end`: `∫ D dt + (Σ ρ u^{m+1}(T) - Σ ρ u^{m+1}(τ)) / (m+1)`, with the
/// time integral by the trapezoid rule over the step lattice.
pub fn energy_identity_residual(traj: &Trajectory, tau: f64, t_end: f64, rho: &TraceField, m: f64) -> Result<f64> {
    let a = traj
        .index_of_time(tau)
        .ok_or_else(|| invalid(format!("time {tau} is not on the recorded lattice")))?;
    let b = traj
        .index_of_time(t_end)
        .ok_or_else(|| invalid(format!("time {t_end} is not on the recorded lattice")))?;
    if b < a {
        return Err(invalid("tau must not exceed T"));
    }
    if rho.len() != traj.grid.nx() {
        return Err(invalid("density does not match the trajectory grid"));
    }
    let lap = DiscreteLaplacian::new(traj.grid.clone());
    let wx = lap.dual_x();
    let lyap = |k: usize| -> f64 {
        traj.states[k]
            .u
            .values()
            .iter()
            .zip(rho.values())
            .zip(wx)
            .map(|((u, r), q)| r * q * u.powf(m + 1.0))
            .sum()
    };
    let mut integral = 0.0;
    for k in a + 1..=b {
        let d = &traj.diagnostics;
        integral += 0.5 * (d[k].t - d[k - 1].t) * (d[k].dirichlet_energy + d[k - 1].dirichlet_energy);
    }
    Ok(integral + (lyap(b) - lyap(a)) / (m + 1.0))
}

/// Lyapunov drop `(Σ ρ u^{m+1}(τ) - Σ ρ u^{m+1}(T)) / (m+1)` for scaling
/// the energy residual.
pub fn lyapunov_drop(traj: &Trajectory, tau: f64, t_end: f64) -> Result<f64> {
    let a = traj
        .index_of_time(tau)
        .ok_or_else(|| invalid(format!("time {tau} is not on the recorded lattice")))?;
    let b = traj
        .index_of_time(t_end)
        .ok_or_else(|| invalid(format!("time {t_end} is not on the recorded lattice")))?;
    Ok((traj.diagnostics[a].lyapunov - traj.diagnostics[b].lyapunov) / (traj.m + 1.0))
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// `Σ ρ (u^k - ũ^k)_+ - Σ ρ (u_0 - ũ_0)_+` per recorded step.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub tolerance: f64,
    /// `max(Σ ρ u_0, Σ ρ ũ_0)`
    pub weighted_mass: f64,
    pub pass: bool,
}

impl ContractionReport {
    pub fn check(&self) -> Check {
        Check::at_most("weighted-l1-contraction", self.max_gap, self.tolerance)
    }
}

/// Runs both data and compares the weighted positive parts along the
/// trajectories.
pub fn verify_contraction(u0: &TraceField, u0_tilde: &TraceField, config: &SolverConfig) -> Result<ContractionReport> {
    let grid = config.grid()?;
    let mut cfg = config.clone();
    cfg.keep_fields = false;
    let (a, b) = rayon::join(
        || run_on_grid(u0, &cfg, grid.clone()),
        || run_on_grid(u0_tilde, &cfg, grid.clone()),
    );
    let (a, b) = (a.map_err(|f| f.error)?, b.map_err(|f| f.error)?);
    Ok(contraction_between(&a, &b, &config.tolerances))
}

/// Contraction gaps between two trajectories on the same grid and lattice.
pub fn contraction_between(a: &Trajectory, b: &Trajectory, tolerances: &Tolerances) -> ContractionReport {
    let lap = DiscreteLaplacian::new(a.grid.clone());
    let wx = lap.dual_x();
    let rho = a.rho.values();
    let pp = |x: &TraceField, y: &TraceField| crate::elliptic::weighted_positive_part(x.values(), y.values(), rho, wx);
    let base = pp(&a.states[0].u, &b.states[0].u);
    let gaps: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(s, t)| pp(&s.u, &t.u) - base)
        .collect();
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weighted_mass = a.diagnostics[0].weighted_mass.max(b.diagnostics[0].weighted_mass);
    let tolerance = tolerances.slack(weighted_mass);
    ContractionReport {
        pass: max_gap <= tolerance,
        gaps,
        max_gap,
        tolerance,
        weighted_mass,
    }
}

#[derive(Debug, Clone)]
pub struct BenilanReport {
    /// Minimum over nodes and times of `(m-1) t (w(t+ε) - w(t))/ε + m w(t)`.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BenilanReport {
    pub fn check(&self) -> Check {
        Check::at_least("benilan", self.worst, -self.tolerance)
    }
}

/// Discrete Bénilan estimate on a trajectory with stored fields; the
/// tolerance is `1e-6 * max_t |w|_∞`.
pub fn verify_benilan(traj: &Trajectory, m: f64) -> Result<BenilanReport> {
    if traj.states.len() < 3 {
        return Err(invalid("need at least 3 recorded times"));
    }
    let fields: Vec<&ExtensionField> = traj
        .states
        .iter()
        .map(|s| s.w.as_ref().ok_or_else(|| invalid("trajectory does not keep fields")))
        .collect::<Result<_>>()?;
    let eps = traj.epsilon;
    let mut worst = f64::INFINITY;
    let mut w_max = 0.0f64;
    for f in &fields {
        w_max = w_max.max(f.max_abs());
    }
    for k in 0..fields.len() - 1 {
        let t = traj.states[k].t;
        let (w0, w1) = (fields[k].values(), fields[k + 1].values());
        for (a, b) in w0.iter().zip(w1) {
            let q = (m - 1.0) * t * (b - a) / eps + m * a;
            worst = worst.min(q);
        }
    }
    let tolerance = 1e-6 * w_max;
    Ok(BenilanReport {
        pass: worst >= -tolerance,
        worst,
        tolerance,
    })
}

#[derive(Debug, Clone)]
pub struct RefinementReport {
    pub radii: Vec<f64>,
    /// Largest `(w_{R_k} - w_{R_{k+1}})_+` over common nodes and times.
    pub monotone_violation: f64,
    /// `sup_t sup_nodes |w_{R_{k+1}} - w_{R_k}|` for each consecutive pair.
    pub sup_differences: Vec<f64>,
    pub tolerance: f64,
    pub monotone: bool,
    pub cauchy: bool,
    pub trajectories: Vec<Trajectory>,
}

impl RefinementReport {
    pub fn pass(&self) -> bool {
        self.monotone && self.cauchy
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut v = vec![Check::at_most("domain-monotone", self.monotone_violation, self.tolerance)];
        let detail = self
            .sup_differences
            .iter()
            .map(|d| format!("{d:e}"))
            .collect::<Vec<_>>()
            .join(" > ");
        v.push(Check::flag("domain-cauchy", self.cauchy, detail));
        v
    }
}

/// Runs the same datum on nested grids of radii `radii` (each grid extends
/// the previous one, heights scale with the radius) and compares `w` on the
/// common nodes.
pub fn refine_in_r(u0: &InitialProfile, config: &SolverConfig, radii: &[f64]) -> Result<RefinementReport> {
    if radii.is_empty() {
        return Err(invalid("radius list is empty"));
    }
    if radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("radius list must be nondecreasing"));
    }
    let aspect = config.height / config.radius;
    let dx = config.grid()?.x().uniform_spacing().ok_or_else(|| invalid("x-grid must be uniform"))?;
    let mut base = config.clone();
    base.radius = radii[0];
    base.height = radii[0] * aspect;
    base.nx = (2.0 * radii[0] / dx).round() as usize + 1;
    base.keep_fields = true;
    let mut grids = vec![base.grid()?];
    for &r in &radii[1..] {
        let next = grids.last().expect("nonempty").extend_to(r, r * aspect)?;
        grids.push(Arc::new(next));
    }
    let trajectories: Vec<Trajectory> = grids
        .par_iter()
        .map(|g| {
            let u = u0.sample(g.x().clone());
            run_on_grid(&u, &base, g.clone()).map_err(|f| f.error)
        })
        .collect::<Result<_>>()?;

    let mut violation = 0.0f64;
    let mut sup_differences = Vec::new();
    let mut w_max = 0.0f64;
    for pair in trajectories.windows(2) {
        let (small, big) = (&pair[0], &pair[1]);
        let shift = (big.grid.nx() - small.grid.nx()) / 2;
        let mut sup = 0.0f64;
        for (s, b) in small.states.iter().zip(&big.states) {
            let (ws, wb) = (s.w.as_ref().expect("fields kept"), b.w.as_ref().expect("fields kept"));
            w_max = w_max.max(wb.max_abs());
            for i in 0..small.grid.nx() {
                for j in 0..small.grid.ny() {
                    let d = wb.at(i + shift, j) - ws.at(i, j);
                    violation = violation.max(-d);
                    sup = sup.max(d.abs());
                }
            }
        }
        sup_differences.push(sup);
    }
    let tolerance = config.tolerances.slack(w_max);
    let cauchy = sup_differences.windows(2).all(|w| w[1] < w[0]);
    Ok(RefinementReport {
        radii: radii.to_vec(),
        monotone: violation <= tolerance,
        monotone_violation: violation,
        sup_differences,
        tolerance,
        cauchy,
        trajectories,
    })
}

/// Summary report of a trajectory: invariants plus provenance.
pub fn trajectory_report(traj: &Trajectory, config: &SolverConfig) -> Report {
    let mut r = Report::new("evolution");
    r.extend(traj.invariant_checks(&config.tolerances));
    r.note("config", config);
    r.note("steps", traj.states.len() - 1);
    r.note(
        "max newton iterations",
        traj.diagnostics.iter().map(|d| d.newton_iterations).max().unwrap_or(0),
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(m: f64) -> SolverConfig {
        let mut c = SolverConfig::new(5.0, 0.2, m).unwrap();
        c.epsilon = 0.05;
        c.set_spacing(0.25, 0.25).unwrap();
        c
    }

    #[test]
    fn defaults() {
        let c = SolverConfig::new(10.0, 1.0, 1.0).unwrap();
        assert_eq!(c.height, 10.0);
        assert_eq!(c.grade, 1.1);
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.nx, 201);
        assert_eq!(c.steps(), 100);
    }

    #[test]
    fn step_count_is_ceiling() {
        let mut c = SolverConfig::new(1.0, 1.0, 1.0).unwrap();
        c.epsilon = 0.05;
        assert_eq!(c.steps(), 20);
        c.epsilon = 0.3;
        assert_eq!(c.steps(), 4);
    }

    #[test]
    fn zero_is_stationary() {
        let c = small_config(2.0);
        let g = c.grid().unwrap();
        let u0 = TraceField::constant(g.x().clone(), 0.0);
        let traj = run(&u0, &c).unwrap();
        assert_eq!(traj.states.len(), 5);
        for s in &traj.states {
            assert_eq!(s.u.max_abs(), 0.0);
        }
    }

    #[test]
    fn times_on_lattice() {
        let c = small_config(1.0);
        let g = c.grid().unwrap();
        let u0 = InitialProfile::Bump { amplitude: 1.0, width: 1.0, center: 0.0 }.sample(g.x().clone());
        let traj = run(&u0, &c).unwrap();
        for (k, s) in traj.states.iter().enumerate() {
            assert_eq!(s.t, k as f64 * 0.05);
            assert_eq!(s.step_index, k);
        }
        assert_eq!(energy_identity_residual(&traj, 0.1, 0.1, &traj.rho, 1.0).unwrap(), 0.0);
        assert!(energy_identity_residual(&traj, 0.025, 0.1, &traj.rho, 1.0).is_err());
        assert!(traj.invariant_checks(&c.tolerances).iter().all(|c| c.pass));
    }

    #[test]
    fn negative_datum_rejected() {
        let c = small_config(1.0);
        let g = c.grid().unwrap();
        let u0 = TraceField::from_fn(g.x().clone(), |x| x);
        let err = run(&u0, &c).unwrap_err();
        assert!(matches!(err.error, Error::PreconditionViolation(_)));
    }

    #[test]
    fn benilan_needs_three_times() {
        let mut c = small_config(2.0);
        c.t_final = 0.05;
        let g = c.grid().unwrap();
        let u0 = TraceField::constant(g.x().clone(), 0.0);
        let traj = run(&u0, &c).unwrap();
        assert!(verify_benilan(&traj, 2.0).is_err());
    }

    #[test]
    fn dropped_fields_keep_first_and_last() {
        let mut c = small_config(1.0);
        c.keep_fields = false;
        let g = c.grid().unwrap();
        let u0 = InitialProfile::Bump { amplitude: 1.0, width: 1.0, center: 0.0 }.sample(g.x().clone());
        let traj = run(&u0, &c).unwrap();
        assert!(traj.states[0].w.is_some());
        assert!(traj.states[1].w.is_none());
        assert!(traj.last().w.is_some());
    }
}
