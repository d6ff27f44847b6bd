//! Runs one configured mode and writes its artifacts.

use crate::config::{ConvergeSettings, Mode, RunConfig};
use crate::snapshot::{emit_diagnostics, emit_field, emit_polar, emit_text, emit_trace, SnapshotError};
use crate::suite::run_suite;
use fracpme::elliptic::{solve_auxiliary, SolveOptions};
use fracpme::evolution::{
    energy_identity_residual, lyapunov_drop, run, trajectory_report, SolverConfig, Trajectory,
};
use fracpme::fractional_oracle::poisson_semigroup_solution;
use fracpme::uniqueness_probe::{flux_decay_fit, probe_template};
use fracpme::{Check, InitialProfile, Report};
use log::info;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    VerificationFailed,
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub status: Status,
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("{0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(#[from] fracpme::Error),
    #[error("cannot write artifact {0}")]
    Io(#[from] SnapshotError),
}

impl DispatchError {
    /// Process exit code: 1 for run and I/O failures, 3 for configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            DispatchError::Config(_) => 3,
            _ => 1,
        }
    }
}

pub const REPORT_FILE: &str = "report.txt";

fn solver_of(cfg: &RunConfig) -> Result<&SolverConfig, DispatchError> {
    cfg.solver
        .as_ref()
        .ok_or_else(|| DispatchError::Config(format!("mode {} needs a solver configuration", cfg.mode)))
}

fn with_echo(mut report: Report, cfg: &RunConfig) -> Report {
    for (k, v) in cfg.echo() {
        report.note(k, v);
    }
    report
}

/// Runs `cfg.mode`, writing artifacts and `report.txt` below `out`.
pub fn dispatch(cfg: &RunConfig, out: &Path) -> Result<Outcome, DispatchError> {
    fs::create_dir_all(out).map_err(|source| SnapshotError {
        path: out.to_path_buf(),
        source,
    })?;
    let result = match cfg.mode {
        Mode::Evolve => evolve(cfg, out),
        Mode::AuxSolve => aux_solve(cfg, out),
        Mode::ProbeBarrier => probe(cfg, out),
        Mode::Verify => verify(cfg),
        Mode::Converge => converge(&cfg.converge).map(|r| Outcome {
            report: r,
            status: Status::Completed,
        }),
    };
    let mut outcome = result?;
    outcome.report = with_echo(outcome.report, cfg);
    emit_text(&outcome.report.render(), &out.join(REPORT_FILE))?;
    Ok(outcome)
}

fn write_trajectory(traj: &Trajectory, out: &Path) -> Result<(), SnapshotError> {
    let dir = out.join("trace");
    fs::create_dir_all(&dir).map_err(|source| SnapshotError {
        path: dir.clone(),
        source,
    })?;
    for s in &traj.states {
        emit_trace(&s.u, &dir.join(format!("u_{:05}.csv", s.step_index)))?;
    }
    emit_diagnostics(&traj.diagnostics, &out.join("diagnostics.csv"))?;
    if let Some(w) = traj.states.last().and_then(|s| s.w.as_ref()) {
        emit_field(w, &out.join("w_final.csv"))?;
    }
    Ok(())
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<Outcome, DispatchError> {
    let solver = solver_of(cfg)?;
    let grid = solver.grid()?;
    let u0 = cfg.initial.sample(grid.x().clone());
    match run(&u0, solver) {
        Ok(traj) => {
            write_trajectory(&traj, out)?;
            let mut report = trajectory_report(&traj, solver);
            let t_end = traj.last().t;
            let res = energy_identity_residual(&traj, 0.0, t_end, &traj.rho, solver.m)?;
            let drop = lyapunov_drop(&traj, 0.0, t_end)?;
            report.note("energy identity residual", format!("{res:e} (Lyapunov drop {drop:e})"));
            let dl1 = traj.diagnostics.iter().map(|d| d.time_difference_l1).fold(0.0, f64::max);
            report.note("max weighted L1 norm of the time difference", format!("{dl1:e}"));
            info!("evolve: {} steps", traj.states.len() - 1);
            Ok(Outcome {
                report,
                status: Status::Completed,
            })
        }
        Err(failure) => {
            if !failure.partial.states.is_empty() {
                write_trajectory(&failure.partial, out)?;
                let mut report = trajectory_report(&failure.partial, solver);
                report.note("error", &failure.error);
                emit_text(&with_echo(report, cfg).render(), &out.join(REPORT_FILE))?;
            }
            Err(DispatchError::Run(failure.error))
        }
    }
}

fn aux_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome, DispatchError> {
    let solver = solver_of(cfg)?;
    let grid = solver.grid()?;
    let g = cfg.initial.sample(grid.x().clone());
    let rho = solver.density.sample(grid.x().clone())?;
    let opts: SolveOptions = solver.tolerances.solve;
    let res = solve_auxiliary(&g, solver.epsilon, &rho, solver.m, grid, opts)?;
    emit_trace(&res.z, &out.join("z.csv"))?;
    emit_field(&res.v, &out.join("field.csv"))?;
    let mut report = Report::new("aux-solve");
    let bound = g.max_abs();
    let slack = solver.tolerances.slack(bound);
    report.push(Check::at_least("positivity", res.z.min().min(res.v.min()), 0.0));
    report.push(Check::at_most("max-principle", (res.z.max_abs() - bound).max(0.0), slack));
    let rho_g = g
        .values()
        .iter()
        .zip(rho.values())
        .fold(0.0f64, |a, (x, r)| a.max((x * r).abs()));
    report.push(Check::at_most("newton-residual", res.residual, opts.newton_tol * rho_g.max(1.0)));
    report.note("newton iterations", res.iterations);
    report.note("picard fallbacks", res.picard_steps);
    report.note("J", format!("{:e}", res.j_value));
    Ok(Outcome {
        report,
        status: Status::Completed,
    })
}

fn probe(cfg: &RunConfig, out: &Path) -> Result<Outcome, DispatchError> {
    let p = &cfg.probe;
    let template = probe_template(p.r0, p.radii[0], p.ntheta, p.flux_nodes)?;
    let fit = flux_decay_fit(&template, &p.radii)?;
    for (r, f) in fit.radii.iter().zip(&fit.fields) {
        emit_polar(f, &out.join(format!("psi_R{r}.csv")))?;
    }
    let mut report = Report::new("probe-barrier");
    report.extend(fit.checks());
    let rows = (0..fit.radii.len())
        .map(|k| {
            vec![
                fit.radii[k],
                fit.s[k],
                fit.products[k],
                fit.contrast[k],
                fit.barrier_gaps[k],
            ]
        })
        .collect();
    report.table("flux-decay", &["R", "s", "s_R_log", "s_R", "barrier_gap"], rows);
    Ok(Outcome {
        report,
        status: Status::Completed,
    })
}

fn verify(cfg: &RunConfig) -> Result<Outcome, DispatchError> {
    let report = run_suite(cfg.seed, &cfg.verify, &cfg.probe)?;
    let status = if report.overall_pass() {
        Status::Completed
    } else {
        Status::VerificationFailed
    };
    Ok(Outcome { report, status })
}

/// One row of the linear benchmark refinement table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergeRow {
    pub spacing: f64,
    pub epsilon: f64,
    pub sup_error: f64,
    /// `|energy identity residual| / Lyapunov drop`
    pub energy_ratio: f64,
    pub nx: usize,
    pub ny: usize,
}

/// `ρ = 1`, `m = 1`, `u0 = 1/(1+x²)`: error against the Poisson semigroup
/// at `|x| <= half_width` and `t = T`, for jointly halved spacing and step.
pub fn converge_rows(c: &ConvergeSettings) -> fracpme::Result<Vec<ConvergeRow>> {
    let mut rows = Vec::new();
    let (mut dx, mut eps) = (c.spacing, c.epsilon);
    for _ in 0..c.levels {
        let mut cfg = SolverConfig::new(c.radius, c.t_final, 1.0)?;
        cfg.epsilon = eps;
        cfg.keep_fields = false;
        cfg.set_spacing(dx, dx)?;
        let grid = cfg.grid()?;
        let u0 = InitialProfile::Cauchy { amplitude: 1.0, scale: 1.0 }.sample(grid.x().clone());
        let traj = run(&u0, &cfg).map_err(|f| f.error)?;
        let exact = poisson_semigroup_solution(&u0, traj.last().t)?;
        let sup_error = traj
            .last()
            .u
            .nodes()
            .iter()
            .zip(traj.last().u.values().iter().zip(exact.values()))
            .filter(|(x, _)| x.abs() <= c.half_width + 1e-9)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max);
        let t_end = traj.last().t;
        let res = energy_identity_residual(&traj, 0.0, t_end, &traj.rho, 1.0)?;
        let drop = lyapunov_drop(&traj, 0.0, t_end)?;
        rows.push(ConvergeRow {
            spacing: dx,
            epsilon: eps,
            sup_error,
            energy_ratio: res.abs() / drop,
            nx: cfg.nx,
            ny: cfg.ny,
        });
        dx *= 0.5;
        eps *= 0.5;
    }
    Ok(rows)
}

fn converge(c: &ConvergeSettings) -> Result<Report, DispatchError> {
    let rows = converge_rows(c)?;
    let mut report = Report::new("converge");
    let decreasing = rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    let detail = rows
        .iter()
        .map(|r| format!("{:e}", r.sup_error))
        .collect::<Vec<_>>()
        .join(" > ");
    report.push(Check::flag("error-decreases", decreasing, detail));
    report.table(
        "refinement",
        &["spacing", "epsilon", "sup_error", "energy_ratio"],
        rows.iter()
            .map(|r| vec![r.spacing, r.epsilon, r.sup_error, r.energy_ratio])
            .collect(),
    );
    Ok(report)
}
