//! Barrier problem sweeps on nested half-disk grids.

use fracpme::uniqueness_probe::{
    barrier_gap, default_template, flux_decay_fit, sigma_flux, solve_barrier, BarrierProblem, PROBE_NTHETA,
};
use fracpme::HalfDiskGrid;
use std::f64::consts::PI;
use std::sync::Arc;

#[test]
fn monotone_in_radius_and_strictly_inward_flux() {
    let t = default_template(1.0, 4.0).unwrap();
    let rep = flux_decay_fit(&t, &[4.0, 8.0]).unwrap();
    assert!(rep.monotone_violation <= 1e-12, "{}", rep.monotone_violation);
    for f in &rep.fields {
        assert!(sigma_flux(f).unwrap().iter().all(|&v| v < 0.0));
    }
}

#[test]
fn products_scale_linearly_with_the_datum() {
    let t = default_template(1.0, 4.0).unwrap();
    let scaled = BarrierProblem::new(t.flux().map(|v| 10.0 * v), 1.0, t.grid().clone()).unwrap();
    let a = flux_decay_fit(&t, &[4.0, 8.0, 16.0]).unwrap();
    let b = flux_decay_fit(&scaled, &[4.0, 8.0, 16.0]).unwrap();
    for (p, q) in a.products.iter().zip(&b.products) {
        assert!((q / p - 10.0).abs() < 1e-9);
    }
}

#[test]
fn outflow_per_unit_arc_is_at_least_the_mean() {
    // the flux through Σ_R integrates to -∫F = -1 over an arc of length πR
    let t = default_template(1.0, 4.0).unwrap();
    let rep = flux_decay_fit(&t, &[4.0, 8.0, 16.0]).unwrap();
    for (r, s) in rep.radii.iter().zip(&rep.s) {
        assert!(s * r >= 1.0 / PI - 1e-3, "R={r}: s R = {}", s * r);
    }
}

#[test]
fn comparison_with_logarithmic_barrier() {
    let t = default_template(1.0, 16.0).unwrap();
    let reference = solve_barrier(&t).unwrap();
    for r in [4.0, 8.0, 16.0] {
        let p = t.with_radius(r).unwrap();
        let psi = solve_barrier(&p).unwrap();
        assert!(barrier_gap(&p, &psi, Some(&reference)).unwrap() >= -1e-6);
        assert!(barrier_gap(&p, &psi, None).unwrap() >= -1e-6);
    }
}

#[test]
fn inner_radius_has_little_influence_on_the_outer_flux() {
    let t = default_template(1.0, 8.0).unwrap();
    let g = t.grid();
    // halve r_min, keeping the same log-step so the outer nodes coincide
    let finer = HalfDiskGrid::new(8.0, g.nr() + 16, PROBE_NTHETA, 0.5 * g.r_min()).unwrap();
    let p = BarrierProblem::new(t.flux().clone(), 1.0, Arc::new(finer)).unwrap();
    let a = sigma_flux(&solve_barrier(&t).unwrap()).unwrap();
    let b = sigma_flux(&solve_barrier(&p).unwrap()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6 * x.abs(), "{x} {y}");
    }
}
