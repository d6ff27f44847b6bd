//! The default verification suite: module-level invariants of the elliptic
//! solver, the time stepper and the barrier probe on small problems with
//! seeded random data.

use crate::config::{ProbeSettings, VerifySettings};
use fracpme::elliptic::{functional_j, weighted_positive_part, AuxiliarySolver, DiscreteLaplacian, SolveOptions};
use fracpme::evolution::{
    contraction_between, energy_identity_residual, lyapunov_drop, refine_in_r, run_on_grid, verify_benilan,
    SolverConfig, Trajectory,
};
use fracpme::fractional_oracle::{pv_fractional_laplacian, spectral_fractional_laplacian};
use fracpme::uniqueness_probe::{flux_decay_fit, probe_template};
use fracpme::{Check, DensityProfile, HalfStripGrid, InitialProfile, LineGrid, Report, TraceField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Sum of three bumps with random centres, widths and heights.
#[derive(Debug, Clone)]
pub struct RandomDatum(Vec<(f64, f64, f64)>);

impl RandomDatum {
    pub fn draw(rng: &mut ChaCha8Rng, half_width: f64) -> Self {
        Self(
            (0..3)
                .map(|_| {
                    (
                        rng.gen_range(-half_width..half_width),
                        rng.gen_range(0.5..2.0),
                        rng.gen_range(0.0..2.0),
                    )
                })
                .collect(),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0
            .iter()
            .map(|&(c, w, a)| fracpme::profiles::bump(x, a, w, c))
            .sum()
    }

    pub fn sample(&self, grid: Arc<LineGrid>) -> TraceField {
        TraceField::from_fn(grid, |x| self.eval(x))
    }
}

/// One randomized pair with its parameters.
#[derive(Debug, Clone)]
pub struct Trial {
    pub m: f64,
    pub epsilon: f64,
    pub density: DensityProfile,
    pub a: RandomDatum,
    pub b: RandomDatum,
}

/// Trials cycling through `m ∈ {1,2,3}`, the two time steps and the two
/// densities, with data drawn from `seed`.
pub fn draw_trials(seed: u64, n: usize, epsilons: [f64; 2], half_width: f64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| Trial {
            m: (1 + k % 3) as f64,
            epsilon: epsilons[(k / 3) % 2],
            density: if (k / 6) % 2 == 0 {
                DensityProfile::One
            } else {
                DensityProfile::PowerDecay { alpha: 2.0 }
            },
            a: RandomDatum::draw(&mut rng, half_width),
            b: RandomDatum::draw(&mut rng, half_width),
        })
        .collect()
}

/// Elliptic-level outcome of one trial.
#[derive(Debug, Clone, Copy)]
pub struct EllipticTrial {
    /// `(Σρ(z-z̃)_+ - Σρ(g-g̃)_+) / mass`
    pub contraction: f64,
    /// Largest of `z - |g|_∞`, `v - |g|_∞^m`, `-z`, `-v` over both solves.
    pub bound_excess: f64,
    pub max_residual: f64,
    /// Smallest `J(competitor) - J(solution)`, relative to `max(1, |J|)`.
    pub j_margin: f64,
}

pub fn elliptic_trial(t: &Trial, grid: Arc<HalfStripGrid>, rng_seed: u64) -> fracpme::Result<EllipticTrial> {
    let rho = t.density.sample(grid.x().clone())?;
    let solver = AuxiliarySolver::new(grid.clone(), t.epsilon, rho.clone(), t.m, SolveOptions::default())?;
    let (g, h) = (t.a.sample(grid.x().clone()), t.b.sample(grid.x().clone()));
    let (za, zb) = (solver.solve(&g)?, solver.solve(&h)?);
    let wx = DiscreteLaplacian::new(grid.clone()).dual_x().to_vec();
    let mass = |f: &TraceField| -> f64 { f.values().iter().zip(rho.values()).zip(&wx).map(|((u, r), q)| u * r * q).sum() };
    let before = weighted_positive_part(g.values(), h.values(), rho.values(), &wx);
    let after = weighted_positive_part(za.z.values(), zb.z.values(), rho.values(), &wx);
    let scale = mass(&g).max(mass(&h)).max(f64::MIN_POSITIVE);

    let mut excess = f64::NEG_INFINITY;
    for (data, sol) in [(&g, &za), (&h, &zb)] {
        let cap = data.max_abs();
        excess = excess
            .max(sol.z.max_abs() - cap)
            .max(sol.v.max() - cap.powf(t.m))
            .max(-sol.z.min())
            .max(-sol.v.min());
    }

    // harmonic competitors with perturbed traces
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut margin = f64::INFINITY;
    let j0 = za.j_value;
    for _ in 0..5 {
        let amp = rng.gen_range(-0.1..0.1);
        let c = rng.gen_range(-4.0..4.0);
        let z: Vec<f64> = za
            .z
            .nodes()
            .iter()
            .zip(za.z.values())
            .map(|(x, v)| (v + amp * (-(x - c) * (x - c)).exp()).max(0.0))
            .collect();
        let n = z.len();
        let zm: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(i, v)| if i == 0 || i + 1 == n { 0.0 } else { v.powf(t.m) })
            .collect();
        let v = solver.extender().extend(&zm)?;
        let j = functional_j(&v, &g, &rho, t.m, t.epsilon)?;
        margin = margin.min((j - j0) / j0.abs().max(1.0));
    }

    Ok(EllipticTrial {
        contraction: (after - before) / scale,
        bound_excess: excess,
        max_residual: za.residual.max(zb.residual),
        j_margin: margin,
    })
}

/// Largest violation of the pointwise bounds `0 <= u <= |u0|_∞` and
/// `0 <= w <= |u0|_∞^m` along a trajectory.
pub fn bound_excess(traj: &Trajectory) -> f64 {
    let cap = traj.states[0].u.max_abs();
    let mut e = f64::NEG_INFINITY;
    for s in &traj.states {
        e = e.max(s.u.max_abs() - cap).max(-s.u.min());
        if let Some(w) = &s.w {
            e = e.max(w.max() - cap.powf(traj.m)).max(-w.min());
        }
    }
    e
}

fn small_config(t: &Trial) -> SolverConfig {
    let mut c = SolverConfig::new(8.0, 0.4, t.m).expect("fixed config is valid");
    c.epsilon = t.epsilon;
    c.density = t.density.clone();
    c.set_spacing(0.2, 0.2).expect("fixed spacing is valid");
    c
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn min(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// Runs the suite; identical `seed` and settings give identical reports.
pub fn run_suite(seed: u64, settings: &VerifySettings, probe: &ProbeSettings) -> fracpme::Result<Report> {
    let mut report = Report::new("verify");
    report.note("trials", settings.trials);
    report.note("version", env!("CARGO_PKG_VERSION"));

    let trials = draw_trials(seed, settings.trials, [0.1, 0.05], 4.0);

    // elliptic level
    let ell: Vec<EllipticTrial> = trials
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let grid = small_config(t).grid()?;
            elliptic_trial(t, grid, seed.wrapping_add(k as u64))
        })
        .collect::<fracpme::Result<_>>()?;
    report.push(Check::at_most("elliptic-contraction", max(ell.iter().map(|e| e.contraction)), 1e-6));
    report.push(Check::at_most("elliptic-bounds", max(ell.iter().map(|e| e.bound_excess)), 1e-10));
    report.push(Check::at_least("elliptic-j-minimal", min(ell.iter().map(|e| e.j_margin)), -1e-10));
    report.push(Check::at_most("elliptic-newton-residual", max(ell.iter().map(|e| e.max_residual)), 1e-9));

    // trajectories
    let runs: Vec<(f64, f64, Vec<Check>)> = trials
        .par_iter()
        .map(|t| {
            let cfg = small_config(t);
            let grid = cfg.grid()?;
            let (u, v) = (t.a.sample(grid.x().clone()), t.b.sample(grid.x().clone()));
            let a = run_on_grid(&u, &cfg, grid.clone()).map_err(|f| f.error)?;
            let b = run_on_grid(&v, &cfg, grid).map_err(|f| f.error)?;
            let c = contraction_between(&a, &b, &cfg.tolerances);
            let mut inv = a.invariant_checks(&cfg.tolerances);
            inv.extend(b.invariant_checks(&cfg.tolerances));
            Ok((
                c.max_gap / c.weighted_mass.max(f64::MIN_POSITIVE),
                bound_excess(&a).max(bound_excess(&b)),
                inv,
            ))
        })
        .collect::<fracpme::Result<_>>()?;
    report.push(Check::at_most("trajectory-contraction", max(runs.iter().map(|r| r.0)), 1e-6));
    report.push(Check::at_most("trajectory-bounds", max(runs.iter().map(|r| r.1)), 1e-10));
    for name in ["linf-stability", "positivity-u", "positivity-w", "trace-coupling", "lyapunov-monotone"] {
        let all: Vec<&Check> = runs.iter().flat_map(|r| r.2.iter()).filter(|c| c.name == name).collect();
        let pass = all.iter().all(|c| c.pass);
        report.push(Check::flag(
            format!("trajectory-{name}"),
            pass,
            format!("{} trajectories", all.len()),
        ));
    }

    // Bénilan on bump data
    for (m, profile) in [
        (2.0, InitialProfile::Bump { amplitude: 1.0, width: 1.0, center: 0.0 }),
        (3.0, InitialProfile::TwoBump { amplitude: 1.0, width: 1.0, separation: 3.0 }),
    ] {
        let mut cfg = SolverConfig::new(8.0, 0.5, m)?;
        cfg.epsilon = 0.05;
        cfg.set_spacing(0.2, 0.2)?;
        let grid = cfg.grid()?;
        let traj = run_on_grid(&profile.sample(grid.x().clone()), &cfg, grid).map_err(|f| f.error)?;
        let b = verify_benilan(&traj, m)?;
        report.push(Check::at_least(format!("benilan-m{m}"), b.worst, -b.tolerance));
    }

    // energy identity on a small linear run
    {
        let mut cfg = SolverConfig::new(20.0, 0.5, 1.0)?;
        cfg.epsilon = 0.05;
        cfg.keep_fields = false;
        cfg.set_spacing(0.2, 0.2)?;
        let grid = cfg.grid()?;
        let u0 = InitialProfile::Cauchy { amplitude: 1.0, scale: 1.0 }.sample(grid.x().clone());
        let traj = run_on_grid(&u0, &cfg, grid).map_err(|f| f.error)?;
        let r = energy_identity_residual(&traj, 0.0, 0.5, &traj.rho, 1.0)?;
        let d = lyapunov_drop(&traj, 0.0, 0.5)?;
        report.push(Check::at_most("energy-identity", r.abs() / d, 0.05));
    }

    // monotone domain limit
    {
        let mut cfg = SolverConfig::new(5.0, 0.5, 2.0)?;
        cfg.epsilon = 0.05;
        cfg.set_spacing(0.25, 0.25)?;
        let bump = InitialProfile::Bump { amplitude: 1.0, width: 1.0, center: 0.0 };
        let r = refine_in_r(&bump, &cfg, &[5.0, 10.0, 20.0])?;
        report.extend(r.checks());
    }

    // half-Laplacian oracles agree on a bump
    {
        let line = Arc::new(LineGrid::uniform(20.0, 2001)?);
        let f = InitialProfile::Bump { amplitude: 1.0, width: 2.0, center: 0.0 }.sample(line);
        let a = pv_fractional_laplacian(&f)?;
        let b = spectral_fractional_laplacian(&f, 40.0)?;
        let scale = b.max_abs();
        let diff = max(a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()));
        report.push(Check::at_most("oracle-pv-vs-spectral", diff / scale, 1e-2));
    }

    // barrier probe
    {
        let t = probe_template(probe.r0, probe.radii[0], probe.ntheta, probe.flux_nodes)?;
        let fit = flux_decay_fit(&t, &probe.radii)?;
        report.extend(fit.checks());
        let rows = fit
            .radii
            .iter()
            .enumerate()
            .map(|(k, r)| vec![*r, fit.s[k], fit.products[k], fit.contrast[k]])
            .collect();
        report.table("flux-decay", &["R", "s", "s_R_log", "s_R"], rows);
    }

    Ok(report)
}
