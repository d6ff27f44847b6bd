//! Barrier problem on genuine half-disks and the logarithmic flux decay.
//!
//! `ψ_R` solves `Δψ = 0` in `{r_min < r < R, y > 0}`, `-∂_y ψ = F` on the flat
//! boundary, `∂_r ψ = 0` at `r = r_min` and `ψ = 0` at `r = R`. In
//! `s = ln r` the Laplacian is `r^{-2}(∂_s² + ∂_θ²)`, so the grid of
//! [`HalfDiskGrid`] turns the problem into a uniform-rectangle finite-volume
//! scheme in `(s, θ)`. Any `a + b ln r` is then discretely harmonic.
//!
//! On `θ = 0` one has `∂_y = (1/r) ∂_θ`, on `θ = π` `∂_y = -(1/r) ∂_θ`; in
//! both cases the inflow through the flat boundary cell `[r_{i-1/2},
//! r_{i+1/2}]` is `∫ F dr` over that cell, with `F` taken at `x = r` on
//! `θ = 0` and at `x = -r` on `θ = π`.

use crate::error::{invalid, Error, Result};
use crate::fractional_oracle::TraceField;
use crate::grid::HalfDiskGrid;
use crate::linalg::BandedSym;
use crate::report::Check;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// `-(1/π) ln r`, the fundamental solution with `-∂_y Θ = δ_0`.
pub fn theta(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    Ok(-r.ln() / PI)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    grid: Arc<HalfDiskGrid>,
    values: Vec<f64>,
}

impl PolarField {
    pub fn new(grid: Arc<HalfDiskGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field has non-finite values"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<HalfDiskGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &r in grid.r_nodes() {
            for &t in grid.theta_nodes() {
                values.push(f(r, t));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Flat-boundary flux `F` supported in `[-R0, R0]` on a half-disk of radius
/// `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierProblem {
    f: TraceField,
    r0: f64,
    grid: Arc<HalfDiskGrid>,
}

impl BarrierProblem {
    pub fn new(f: TraceField, r0: f64, grid: Arc<HalfDiskGrid>) -> Result<Self> {
        if !(r0 > 0.0) || !(grid.radius() > r0) {
            return Err(invalid(format!("need 0 < R0 < R, got R0={r0}, R={}", grid.radius())));
        }
        if f.min() < 0.0 {
            return Err(invalid("flux datum must be nonnegative"));
        }
        let slack = 1e-12 * r0;
        if f
            .nodes()
            .iter()
            .zip(f.values())
            .any(|(x, v)| x.abs() > r0 + slack && *v != 0.0)
        {
            return Err(invalid(format!("flux datum is not supported in [-{r0}, {r0}]")));
        }
        Ok(Self { f, r0, grid })
    }

    pub fn flux(&self) -> &TraceField {
        &self.f
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn radius(&self) -> f64 {
        self.grid.radius()
    }

    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    /// Same datum on the grid with the same `r_min`, log-step and angles,
    /// extended (or cut) to radius `r`; `r` must be a node of that lattice.
    pub fn with_radius(&self, r: f64) -> Result<Self> {
        let g = &self.grid;
        let steps = (r / g.r_min()).ln() / g.log_step();
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::UnsupportedGrid(format!(
                "radius {r} is not on the geometric lattice of the template grid"
            )));
        }
        let grid = HalfDiskGrid::new(r, steps.round() as usize + 1, g.ntheta(), g.r_min())?;
        Self::new(self.f.clone(), self.r0, Arc::new(grid))
    }

    /// `∫ F dx` of the piecewise-linear datum.
    pub fn total_flux(&self) -> f64 {
        integrate_linear(&self.f, f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Exact integral over `[a, b]` of the linear interpolant of `f` (zero off
/// its grid).
fn integrate_linear(f: &TraceField, a: f64, b: f64) -> f64 {
    let x = f.nodes();
    let v = f.values();
    let mut s = 0.0;
    for k in 0..x.len().saturating_sub(1) {
        let (x0, x1) = (x[k], x[k + 1]);
        let lo = a.max(x0);
        let hi = b.min(x1);
        if hi <= lo {
            continue;
        }
        let slope = (v[k + 1] - v[k]) / (x1 - x0);
        let at = |t: f64| v[k] + slope * (t - x0);
        s += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    s
}

/// Solves the barrier problem by a banded Cholesky factorization.
///
/// Influx through the hole `r < r_min` is lumped into the innermost flat
/// boundary cell, so the discrete total inflow equals `∫ F`.
pub fn solve_barrier(p: &BarrierProblem) -> Result<PolarField> {
    let g = p.grid.clone();
    let (nr, nt) = (g.nr(), g.ntheta());
    let (hs, ht) = (g.log_step(), g.theta_step());
    let r = g.r_nodes();
    let ws = |i: usize| if i == 0 { 0.5 * hs } else { hs };
    let wt = |j: usize| if j == 0 || j == nt - 1 { 0.5 * ht } else { ht };

    let n = (nr - 1) * nt;
    let mut a = BandedSym::zeros(n, nt);
    let idx = |i: usize, j: usize| i * nt + j;
    for i in 0..nr - 1 {
        for j in 0..nt {
            let p_ = idx(i, j);
            // s-edges: to i+1 always exists (Dirichlet at nr-1), to i-1 if i > 0
            let c_out = wt(j) / hs;
            a.add(p_, p_, c_out);
            if i > 0 {
                a.add(p_, p_, c_out);
                a.add(p_, idx(i - 1, j), -c_out);
            }
            if j > 0 {
                let c = ws(i) / ht;
                a.add(p_, p_, c);
                a.add(p_, idx(i, j - 1), -c);
            }
            if j + 1 < nt {
                a.add(p_, p_, ws(i) / ht);
            }
        }
    }

    let mut b = vec![0.0; n];
    for i in 0..nr - 1 {
        let lo = if i == 0 { 0.0 } else { (r[i - 1] * r[i]).sqrt() };
        let hi = (r[i] * r[i + 1]).sqrt();
        b[idx(i, 0)] += integrate_linear(&p.f, lo, hi);
        b[idx(i, nt - 1)] += integrate_linear(&p.f, -hi, -lo);
    }

    let chol = a.cholesky()?;
    let sol = chol.solve(&b);
    let mut values = vec![0.0; g.len()];
    values[..n].copy_from_slice(&sol);
    PolarField::new(g, values)
}

/// `∂ψ/∂r` at `r = R` for every angle, from the second-order one-sided
/// difference in `s = ln r` divided by `R` (exact for `a + b ln r`).
pub fn sigma_flux(psi: &PolarField) -> Result<Vec<f64>> {
    let g = psi.grid();
    let nr = g.nr();
    if nr < 3 {
        return Err(Error::UnsupportedGrid("need at least 3 radial nodes".into()));
    }
    let hs = g.log_step();
    let rr = g.radius();
    Ok((0..g.ntheta())
        .map(|j| {
            let d = 3.0 * psi.at(nr - 1, j) - 4.0 * psi.at(nr - 2, j) + psi.at(nr - 3, j);
            d / (2.0 * hs * rr)
        })
        .collect())
}

/// `max_θ ψ(R0, θ)`, the comparison constant taken from a reference solve.
pub fn barrier_constant(psi: &PolarField, r0: f64) -> Result<f64> {
    let g = psi.grid();
    let i0 = g
        .radial_index_of(r0)
        .ok_or_else(|| Error::UnsupportedGrid(format!("R0 = {r0} is not a radial node")))?;
    Ok((0..g.ntheta()).map(|j| psi.at(i0, j)).fold(f64::NEG_INFINITY, f64::max))
}

/// `min (Z - ψ)` over the annulus nodes `R0 <= r <= R`, with
/// `Z(r) = M ln(R/r) / ln(R/R0)` and `M = max_θ ψ_ref(R0, θ)`. Without a
/// reference, `psi` itself provides `M`.
pub fn barrier_gap(p: &BarrierProblem, psi: &PolarField, reference: Option<&PolarField>) -> Result<f64> {
    let (r0, rr) = (p.r0, p.radius());
    if !(rr > 2.0 * r0) {
        return Err(Error::PreconditionViolation(format!("need R > 2 R0, got R={rr}, R0={r0}")));
    }
    let m = barrier_constant(reference.unwrap_or(psi), r0)?;
    let g = psi.grid();
    let denom = theta(r0)? - theta(rr)?;
    let mut gap = f64::INFINITY;
    for (i, &r) in g.r_nodes().iter().enumerate() {
        if r < r0 * (1.0 - 1e-12) {
            continue;
        }
        let z = m * (theta(r)? - theta(rr)?) / denom;
        for j in 0..g.ntheta() {
            gap = gap.min(z - psi.at(i, j));
        }
    }
    Ok(gap)
}

#[derive(Debug, Clone)]
pub struct FluxDecayReport {
    pub r0: f64,
    pub radii: Vec<f64>,
    /// `s(R) = max_Σ |∂ψ/∂ν|`
    pub s: Vec<f64>,
    /// `s(R) R ln(R/R0)`
    pub products: Vec<f64>,
    /// `s(R) R`, the scaling that would be bounded without the logarithm.
    pub contrast: Vec<f64>,
    /// `max_Σ ∂ψ/∂ν` (negative when the flux is strictly inward).
    pub max_normal_derivative: Vec<f64>,
    /// `min (Z - ψ_R)` with `M` from the largest-radius solve.
    pub barrier_gaps: Vec<f64>,
    /// Largest `(ψ_{R_k} - ψ_{R_{k+1}})_+` on common nodes.
    pub monotone_violation: f64,
    pub fields: Vec<PolarField>,
}

pub const BARRIER_TOL: f64 = 1e-6;

impl FluxDecayReport {
    pub fn product_spread(&self) -> f64 {
        let max = self.products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.products.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Strictly increasing products across the whole list.
    pub fn monotone_growth(&self) -> bool {
        self.products.len() > 1 && self.products.windows(2).all(|w| w[1] > w[0])
    }

    pub fn products_bounded(&self) -> bool {
        self.product_spread() <= 2.0 && !self.monotone_growth()
    }

    pub fn checks(&self) -> Vec<Check> {
        let table = self
            .radii
            .iter()
            .zip(&self.products)
            .map(|(r, p)| format!("R={r}: {p:.6}"))
            .collect::<Vec<_>>()
            .join(", ");
        let growth = if self.monotone_growth() { "monotone growth" } else { "no monotone growth" };
        let min_gap = self.barrier_gaps.iter().copied().fold(f64::INFINITY, f64::min);
        let max_dn = self.max_normal_derivative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![
            Check::flag("flux-decay-products", self.products_bounded(), format!("{table}; spread {:.4}, {growth}", self.product_spread())),
            Check::at_least("barrier-comparison", min_gap, -BARRIER_TOL),
            Check::at_most("sigma-flux-negative", max_dn, 0.0).with_detail(if max_dn < 0.0 { "strict" } else { "not strict" }),
            Check::at_most("barrier-monotone-in-r", self.monotone_violation, BARRIER_TOL),
        ]
    }
}

/// Solves the template problem at each radius of `radii` and collects the
/// flux decay products, the comparison gaps and the monotonicity in `R`.
pub fn flux_decay_fit(template: &BarrierProblem, radii: &[f64]) -> Result<FluxDecayReport> {
    if radii.is_empty() {
        return Err(invalid("radius list is empty"));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radius list must be increasing"));
    }
    let r0 = template.r0;
    if let Some(&r) = radii.iter().find(|&&r| !(r > 2.0 * r0)) {
        return Err(Error::PreconditionViolation(format!("need R > 2 R0, got R={r}, R0={r0}")));
    }
    let problems: Vec<BarrierProblem> = radii.iter().map(|&r| template.with_radius(r)).collect::<Result<_>>()?;
    let fields: Vec<PolarField> = problems.par_iter().map(solve_barrier).collect::<Result<_>>()?;

    let mut s = Vec::new();
    let mut max_dn = Vec::new();
    for f in &fields {
        let flux = sigma_flux(f)?;
        s.push(flux.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        max_dn.push(flux.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let products = radii.iter().zip(&s).map(|(r, v)| v * r * (r / r0).ln()).collect();
    let contrast = radii.iter().zip(&s).map(|(r, v)| v * r).collect();
    let reference = fields.last().expect("nonempty");
    let barrier_gaps = problems
        .iter()
        .zip(&fields)
        .map(|(p, f)| barrier_gap(p, f, Some(reference)))
        .collect::<Result<_>>()?;
    let mut violation = 0.0f64;
    for pair in fields.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for i in 0..a.grid().nr() {
            for j in 0..a.grid().ntheta() {
                violation = violation.max(a.at(i, j) - b.at(i, j));
            }
        }
    }
    Ok(FluxDecayReport {
        r0,
        radii: radii.to_vec(),
        s,
        products,
        contrast,
        max_normal_derivative: max_dn,
        barrier_gaps,
        monotone_violation: violation,
        fields,
    })
}

/// Unit-mass bump flux on `[-r0, r0]` sampled with `n` nodes.
pub fn unit_bump_flux(r0: f64, n: usize) -> Result<TraceField> {
    let line = Arc::new(crate::grid::LineGrid::uniform(r0, n)?);
    let f = TraceField::from_fn(line, |x| crate::profiles::bump(x, 1.0, r0, 0.0));
    let mass = integrate_linear(&f, f64::NEG_INFINITY, f64::INFINITY);
    Ok(f.map(|v| v / mass))
}

/// Geometric ratio `2^{1/16}` and inner radius `1/64`: every power of two
/// from `1/64` upward is a radial node.
pub const PROBE_LOG_STEP: f64 = std::f64::consts::LN_2 / 16.0;
pub const PROBE_R_MIN: f64 = 1.0 / 64.0;
pub const PROBE_NTHETA: usize = 65;

/// Template problem on the default probe lattice.
pub fn default_template(r0: f64, radius: f64) -> Result<BarrierProblem> {
    probe_template(r0, radius, PROBE_NTHETA, 2001)
}

/// Unit-mass bump datum on the lattice with inner radius `r0 * PROBE_R_MIN`
/// and log-step `PROBE_LOG_STEP`; `radius / r0` must be a power of
/// `2^{1/16}`.
pub fn probe_template(r0: f64, radius: f64, ntheta: usize, flux_nodes: usize) -> Result<BarrierProblem> {
    if !(r0 > 0.0) {
        return Err(invalid(format!("R0 must be positive, got {r0}")));
    }
    let r_min = r0 * PROBE_R_MIN;
    let steps = (radius / r_min).ln() / PROBE_LOG_STEP;
    if !(steps > 1.5) || (steps - steps.round()).abs() > 1e-6 {
        return Err(Error::UnsupportedGrid(format!(
            "radius {radius} is not on the probe lattice r_min * 2^(k/16) with r_min = {r_min}"
        )));
    }
    let grid = HalfDiskGrid::new(radius, steps.round() as usize + 1, ntheta, r_min)?;
    BarrierProblem::new(unit_bump_flux(r0, flux_nodes)?, r0, Arc::new(grid))
}
