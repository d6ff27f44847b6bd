//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances are pinned below.

use fracpme::elliptic::{boundary_flux, harmonic_extension_r};
use fracpme::evolution::{
    contraction_between, energy_identity_residual, lyapunov_drop, refine_in_r, run, run_on_grid, verify_benilan,
    SolverConfig, Trajectory,
};
use fracpme::fractional_oracle::{pv_fractional_laplacian, poisson_semigroup_solution, spectral_fractional_laplacian};
use fracpme::uniqueness_probe::{default_template, flux_decay_fit, BARRIER_TOL};
use fracpme::{HalfStripGrid, InitialProfile, LineGrid, TraceField};
use fracpme_cli::suite::{bound_excess, draw_trials, elliptic_trial};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

const LINEAR_FIRST_LEVEL_TOL: f64 = 2e-2;
const LEVEL_TIME_BUDGET: Duration = Duration::from_secs(120);
const TRIPLE_REL_TOL: f64 = 1e-2;
const CONTRACTION_REL_TOL: f64 = 1e-6;
const CONTRACTION_PAIRS: usize = 20;
const CONTRACTION_TIME_BUDGET: Duration = Duration::from_secs(300);
/// Bounds hold to roundoff: `1e-10 * max(1, |u0|_∞^m)`.
const BOUND_REL_TOL: f64 = 1e-10;
const ENERGY_REL_TOL: f64 = 0.05;
const BENILAN_REL_TOL: f64 = 1e-6;
const PRODUCT_SPREAD: f64 = 2.0;
const PROBE_TIME_BUDGET: Duration = Duration::from_secs(180);
const SEED: u64 = 20_241_016;

struct Gate {
    failures: usize,
}

impl Gate {
    fn line(&mut self, n: usize, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] criterion {n}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn error(&mut self, n: usize, title: &str, e: impl std::fmt::Display) {
        self.line(n, title, false, format!("error: {e}"));
    }
}

fn bump(amplitude: f64, width: f64, center: f64) -> InitialProfile {
    InitialProfile::Bump { amplitude, width, center }
}

fn w_max(t: &Trajectory) -> f64 {
    t.states
        .iter()
        .filter_map(|s| s.w.as_ref())
        .map(|w| w.max_abs())
        .fold(0.0, f64::max)
}

/// Normalized bound excess of a trajectory.
fn normalized_excess(t: &Trajectory) -> f64 {
    let cap = t.states[0].u.max_abs().powf(t.m).max(1.0);
    bound_excess(t) / cap
}

struct LinearLevel {
    dx: f64,
    eps: f64,
    error: f64,
    energy_ratio: f64,
    elapsed: Duration,
    excess: f64,
}

fn linear_levels() -> fracpme::Result<Vec<LinearLevel>> {
    let mut out = Vec::new();
    let (mut dx, mut eps) = (0.1, 0.05);
    for _ in 0..3 {
        let start = Instant::now();
        let mut cfg = SolverConfig::new(50.0, 1.0, 1.0)?;
        cfg.epsilon = eps;
        cfg.keep_fields = false;
        cfg.set_spacing(dx, dx)?;
        let grid = cfg.grid()?;
        let u0 = InitialProfile::Cauchy { amplitude: 1.0, scale: 1.0 }.sample(grid.x().clone());
        let traj = run(&u0, &cfg).map_err(|f| f.error)?;
        let exact = poisson_semigroup_solution(&u0, 1.0)?;
        let error = center_error(&traj.last().u, &exact, 5.0);
        let res = energy_identity_residual(&traj, 0.0, 1.0, &traj.rho, 1.0)?;
        let drop = lyapunov_drop(&traj, 0.0, 1.0)?;
        out.push(LinearLevel {
            dx,
            eps,
            error,
            energy_ratio: res.abs() / drop,
            elapsed: start.elapsed(),
            excess: normalized_excess(&traj),
        });
        dx *= 0.5;
        eps *= 0.5;
    }
    Ok(out)
}

fn center_error(a: &TraceField, b: &TraceField, half: f64) -> f64 {
    a.nodes()
        .iter()
        .zip(a.values().iter().zip(b.values()))
        .filter(|(x, _)| x.abs() <= half + 1e-9)
        .map(|(_, (p, q))| (p - q).abs())
        .fold(0.0, f64::max)
}

/// `max|a-b| / max(max|a|, max|b|)` over `|x| <= 5`; every node of `a`'s
/// grid must be a node of `b`'s uniform grid.
fn center_rel(a: &[f64], ax: &[f64], b: &[f64], bx: &[f64]) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    let h = bx[1] - bx[0];
    for (k, &x) in ax.iter().enumerate() {
        if x.abs() > 5.0 + 1e-9 {
            continue;
        }
        let j = ((x - bx[0]) / h).round() as usize;
        assert!((bx[j] - x).abs() < 1e-9, "grids are not nested");
        diff = diff.max((a[k] - b[j]).abs());
        scale = scale.max(a[k].abs()).max(b[j].abs());
    }
    diff / scale
}

fn criterion_2(gate: &mut Gate) -> fracpme::Result<()> {
    let line = Arc::new(LineGrid::uniform(50.0, 10_001)?);
    let strip = Arc::new(HalfStripGrid::with_spacing(50.0, 50.0, 0.02, 0.005, 1.1)?);
    let cases: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("1/(1+x^2)", Box::new(|x: f64| 1.0 / (1.0 + x * x))),
        ("bump(w=2)", Box::new(|x: f64| bump(1.0, 2.0, 0.0).eval(x))),
        ("bump(w=4,c=1)", Box::new(|x: f64| bump(1.0, 4.0, 1.0).eval(x))),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, f) in &cases {
        let fl = TraceField::from_fn(line.clone(), f);
        let pv = pv_fractional_laplacian(&fl)?;
        let sp = spectral_fractional_laplacian(&fl, 100.0)?;
        let fs = TraceField::from_fn(strip.x().clone(), f);
        let flux = boundary_flux(&harmonic_extension_r(&fs, strip.clone())?)?;
        let ext: Vec<f64> = flux.values().iter().map(|v| -v).collect();
        let xs = line.nodes();
        let pairs = [
            center_rel(pv.values(), xs, sp.values(), xs),
            center_rel(&ext, strip.x_nodes(), pv.values(), xs),
            center_rel(&ext, strip.x_nodes(), sp.values(), xs),
        ];
        let mut m = pairs.iter().copied().fold(0.0, f64::max);
        let mut detail = format!("{name} pv/sp {:.2e} ext/pv {:.2e} ext/sp {:.2e}", pairs[0], pairs[1], pairs[2]);
        if *name == "1/(1+x^2)" {
            let exact: Vec<f64> = xs.iter().map(|x| (1.0 - x * x) / (1.0 + x * x).powi(2)).collect();
            let closed = [
                center_rel(pv.values(), xs, &exact, xs),
                center_rel(sp.values(), xs, &exact, xs),
                center_rel(&ext, strip.x_nodes(), &exact, xs),
            ];
            m = m.max(closed.iter().copied().fold(0.0, f64::max));
            detail += &format!(
                " closed-form pv {:.2e} sp {:.2e} ext {:.2e}",
                closed[0], closed[1], closed[2]
            );
        }
        worst = worst.max(m);
        parts.push(detail);
    }
    gate.line(
        2,
        "half-Laplacian triple agreement",
        worst <= TRIPLE_REL_TOL,
        format!("worst relative {worst:.3e} <= {TRIPLE_REL_TOL:e}; {}", parts.join("; ")),
    );
    Ok(())
}

fn criterion_3(gate: &mut Gate, excess: &mut Vec<f64>) -> fracpme::Result<()> {
    let start = Instant::now();
    let trials = draw_trials(SEED, CONTRACTION_PAIRS, [0.1, 0.01], 4.0);
    let mut ell_worst = f64::NEG_INFINITY;
    let mut traj_worst = f64::NEG_INFINITY;
    for (k, t) in trials.iter().enumerate() {
        let mut cfg = SolverConfig::new(10.0, 0.5, t.m)?;
        cfg.epsilon = t.epsilon;
        cfg.density = t.density.clone();
        let grid = cfg.grid()?;
        let e = elliptic_trial(t, grid.clone(), SEED + k as u64)?;
        ell_worst = ell_worst.max(e.contraction);
        let (u, v) = (t.a.sample(grid.x().clone()), t.b.sample(grid.x().clone()));
        excess.push(e.bound_excess / u.max_abs().max(v.max_abs()).powf(t.m).max(1.0));
        let a = run_on_grid(&u, &cfg, grid.clone()).map_err(|f| f.error)?;
        let b = run_on_grid(&v, &cfg, grid).map_err(|f| f.error)?;
        let c = contraction_between(&a, &b, &cfg.tolerances);
        traj_worst = traj_worst.max(c.max_gap / c.weighted_mass);
        excess.push(normalized_excess(&a));
        excess.push(normalized_excess(&b));
    }
    let elapsed = start.elapsed();
    let pass = ell_worst <= CONTRACTION_REL_TOL && traj_worst <= CONTRACTION_REL_TOL && elapsed <= CONTRACTION_TIME_BUDGET;
    gate.line(
        3,
        "weighted L1 contraction",
        pass,
        format!(
            "{CONTRACTION_PAIRS} pairs over m in {{1,2,3}}, eps in {{0.1,0.01}}, two densities; worst elliptic {ell_worst:.3e}, trajectory {traj_worst:.3e} (relative to weighted mass, tol {CONTRACTION_REL_TOL:e}); {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    Ok(())
}

fn criterion_6(gate: &mut Gate, excess: &mut Vec<f64>) -> fracpme::Result<()> {
    let mut parts = Vec::new();
    let mut pass = true;
    for m in [2.0, 3.0] {
        let mut cfg = SolverConfig::new(10.0, 1.0, m)?;
        cfg.epsilon = 0.01;
        let grid = cfg.grid()?;
        let traj = run_on_grid(&bump(1.0, 1.0, 0.0).sample(grid.x().clone()), &cfg, grid).map_err(|f| f.error)?;
        excess.push(normalized_excess(&traj));
        let r = verify_benilan(&traj, m)?;
        pass &= r.worst >= -BENILAN_REL_TOL * w_max(&traj);
        parts.push(format!("m={m} worst {:.3e} (tol {BENILAN_REL_TOL:e} |w| = {:.3e})", r.worst, BENILAN_REL_TOL * w_max(&traj)));
    }
    gate.line(6, "Benilan estimate", pass, parts.join(", "));
    Ok(())
}

fn criterion_7(gate: &mut Gate, excess: &mut Vec<f64>) -> fracpme::Result<()> {
    let mut cfg = SolverConfig::new(10.0, 1.0, 2.0)?;
    cfg.epsilon = 0.01;
    let r = refine_in_r(&bump(1.0, 1.0, 0.0), &cfg, &[10.0, 20.0, 40.0])?;
    for t in &r.trajectories {
        excess.push(normalized_excess(t));
    }
    gate.line(
        7,
        "monotone domain limit",
        r.pass(),
        format!(
            "R in {{10,20,40}}: monotonicity violation {:.3e} (tol {:.3e}), sup differences {:.4e} > {:.4e}",
            r.monotone_violation, r.tolerance, r.sup_differences[0], r.sup_differences[1]
        ),
    );
    Ok(())
}

fn criterion_8(gate: &mut Gate) -> fracpme::Result<()> {
    let start = Instant::now();
    let t = default_template(1.0, 4.0)?;
    let fit = flux_decay_fit(&t, &[4.0, 8.0, 16.0])?;
    let elapsed = start.elapsed();
    let spread = fit.product_spread();
    let growth = fit.monotone_growth();
    let products_ok = spread <= PRODUCT_SPREAD && !growth;
    let gap = fit.barrier_gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_dn = fit.max_normal_derivative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = products_ok && gap >= -BARRIER_TOL && max_dn < 0.0 && fit.monotone_violation <= BARRIER_TOL && elapsed <= PROBE_TIME_BUDGET;
    let products: Vec<String> = fit.products.iter().map(|p| format!("{p:.4}")).collect();
    let contrast: Vec<String> = fit.contrast.iter().map(|p| format!("{p:.4}")).collect();
    gate.line(
        8,
        "barrier flux decay",
        pass,
        format!(
            "products s(R)R log(R/R0) = [{}] spread {spread:.3} (<= {PRODUCT_SPREAD}) {}; Z - psi >= {gap:.2e} (tol {BARRIER_TOL:e}); max dpsi/dnu {max_dn:.3e} < 0; R-monotonicity violation {:.2e}; s(R)R = [{}]; {:.1}s",
            products.join(", "),
            if growth { "MONOTONE GROWTH" } else { "no monotone growth" },
            fit.monotone_violation,
            contrast.join(", "),
            elapsed.as_secs_f64()
        ),
    );
    Ok(())
}

fn criterion_9(gate: &mut Gate) {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return gate.error(9, "determinism", e),
    };
    let mut reports = Vec::new();
    let mut codes = Vec::new();
    for name in ["first", "second"] {
        let out = Command::new(env!("CARGO_BIN_EXE_fracpme"))
            .args(["verify", "--seed", "9", "--quiet", "--output", name])
            .current_dir(dir.path())
            .output();
        match out {
            Ok(o) => codes.push(o.status.code()),
            Err(e) => return gate.error(9, "determinism", e),
        }
        match std::fs::read(dir.path().join(name).join("report.txt")) {
            Ok(b) => reports.push(b),
            Err(e) => return gate.error(9, "determinism", e),
        }
    }
    let identical = reports[0] == reports[1];
    let ran = codes.iter().all(|c| matches!(c, Some(0) | Some(2)));
    gate.line(
        9,
        "determinism",
        identical && ran,
        format!(
            "two verify runs with seed 9: reports {} ({} bytes), exit codes {:?}",
            if identical { "byte-identical" } else { "DIFFER" },
            reports[0].len(),
            codes
        ),
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    let mut excess = Vec::new();

    match linear_levels() {
        Ok(levels) => {
            let decreasing = levels.windows(2).all(|w| w[1].error < w[0].error);
            let in_time = levels.iter().all(|l| l.elapsed <= LEVEL_TIME_BUDGET);
            let rows: Vec<String> = levels
                .iter()
                .map(|l| format!("(dx {}, eps {}) err {:.3e} in {:.1}s", l.dx, l.eps, l.error, l.elapsed.as_secs_f64()))
                .collect();
            gate.line(
                1,
                "linear-case oracle",
                levels[0].error <= LINEAR_FIRST_LEVEL_TOL && decreasing && in_time,
                format!("{} (first level <= {LINEAR_FIRST_LEVEL_TOL:e}, strictly decreasing)", rows.join(", ")),
            );
            let ratios: Vec<f64> = levels.iter().map(|l| l.energy_ratio).collect();
            let shrinking = ratios.windows(2).all(|w| w[1] < w[0]);
            gate.line(
                5,
                "energy identity",
                ratios[0] <= ENERGY_REL_TOL && shrinking,
                format!(
                    "|residual| / Lyapunov drop = {} (<= {ENERGY_REL_TOL}, decreasing under eps-halving)",
                    ratios.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
                ),
            );
            excess.extend(levels.iter().map(|l| l.excess));
        }
        Err(e) => {
            gate.error(1, "linear-case oracle", &e);
            gate.error(5, "energy identity", &e);
        }
    }

    if let Err(e) = criterion_2(&mut gate) {
        gate.error(2, "half-Laplacian triple agreement", e);
    }
    if let Err(e) = criterion_3(&mut gate, &mut excess) {
        gate.error(3, "weighted L1 contraction", e);
    }
    if let Err(e) = criterion_6(&mut gate, &mut excess) {
        gate.error(6, "Benilan estimate", e);
    }
    if let Err(e) = criterion_7(&mut gate, &mut excess) {
        gate.error(7, "monotone domain limit", e);
    }
    let worst = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    gate.line(
        4,
        "boundedness and positivity",
        !excess.is_empty() && worst <= BOUND_REL_TOL,
        format!(
            "{} runs: worst normalized excess over 0 <= u <= |u0|, 0 <= w <= |u0|^m is {worst:.3e} (tol {BOUND_REL_TOL:e})",
            excess.len()
        ),
    );
    if let Err(e) = criterion_8(&mut gate) {
        gate.error(8, "barrier flux decay", e);
    }
    criterion_9(&mut gate);

    if gate.failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria fail", gate.failures);
        ExitCode::FAILURE
    }
}
