//! Independent evaluators of the half-Laplacian and of the linear
//! constant-density evolution. The extension-based solver is validated
//! against these.
//!
//! Three routes to `(-d^2/dx^2)^{1/2}`:
//! * principal-value quadrature of `(1/pi) PV int (f(x) - f(y)) / |x - y|^2 dy`,
//! * the Fourier symbol `|k|` on a periodic window,
//! * (in [`crate::elliptic`]) the normal derivative of the harmonic extension.
//!
//! Data beyond the grid is modelled as the constant end value; the tail
//! integrals are evaluated in closed form.

use crate::error::{invalid, Error, Result};
use crate::grid::LineGrid;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Samples of a function on the boundary line, one per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceField {
    grid: Arc<LineGrid>,
    values: Vec<f64>,
}

impl TraceField {
    pub fn new(grid: Arc<LineGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "trace has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("trace values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<LineGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<LineGrid>, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn grid(&self) -> &Arc<LineGrid> {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        if x < nodes[0] || x > nodes[n - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&s| s <= x).clamp(1, n - 1);
        let (x0, x1) = (nodes[k - 1], nodes[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }
}

fn require_uniform(grid: &LineGrid) -> Result<f64> {
    grid.uniform_spacing()
        .ok_or_else(|| Error::UnsupportedGrid("uniform spacing required".into()))
}

/// Principal-value quadrature of the half-Laplacian.
///
/// Symmetric pairs `2f(x) - f(x+s) - f(x-s)` are integrated against `1/s^2`
/// with the trapezoid rule; at `s = 0` the pair is replaced by its limit
/// `-f''(x)` (centered second difference). Once one side leaves the grid it
/// is held at the end value and integrated exactly. The two end nodes have
/// no symmetric neighbourhood: their singular first cell is dropped, which
/// is first-order accurate.
pub fn pv_fractional_laplacian(f: &TraceField) -> Result<TraceField> {
    let h = require_uniform(f.grid())?;
    let v = f.values();
    let n = v.len();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| pv_at(v, i, h) / PI)
        .collect();
    TraceField::new(f.grid().clone(), out)
}

fn pv_at(v: &[f64], i: usize, h: f64) -> f64 {
    let n = v.len();
    let fi = v[i];
    let (left, right) = (i, n - 1 - i);
    let near = left.min(right);
    let far = left.max(right);
    // far-side sample at offset k
    let far_at = |k: usize| if right >= left { v[i + k] } else { v[i - k] };
    let c_far = if right >= left { v[n - 1] } else { v[0] };
    let c_near = if right >= left { v[0] } else { v[n - 1] };

    let mut total = 0.0;
    let start;
    if near >= 1 {
        let g0 = -(v[i + 1] - 2.0 * fi + v[i - 1]) / (h * h);
        let pair = |k: usize| {
            let s = k as f64 * h;
            (2.0 * fi - v[i + k] - v[i - k]) / (s * s)
        };
        let mut s1 = 0.5 * g0;
        for k in 1..near {
            s1 += pair(k);
        }
        s1 += 0.5 * pair(near);
        total += h * s1;
        total += (fi - c_near) / (near as f64 * h);
        start = near;
    } else {
        start = 1;
    }
    if far > start {
        let one = |k: usize| {
            let s = k as f64 * h;
            (fi - far_at(k)) / (s * s)
        };
        let mut s2 = 0.5 * one(start);
        for k in start + 1..far {
            s2 += one(k);
        }
        s2 += 0.5 * one(far);
        total += h * s2;
    }
    total += (fi - c_far) / (far.max(1) as f64 * h);
    total
}

/// Half-Laplacian through the Fourier symbol on a periodic window.
///
/// The samples must cover exactly one period: either `n * h == period`, or
/// `(n - 1) * h == period` with the last node repeating the first (the last
/// value is then copied from the first). Each mode with wavenumber
/// `kappa = 2 pi k / period` is multiplied by `|kappa|`; for an even sample
/// count the Nyquist mode is multiplied by its own `|kappa|`, so the
/// operator stays real and symmetric.
pub fn spectral_fractional_laplacian(f: &TraceField, period: f64) -> Result<TraceField> {
    let h = require_uniform(f.grid())?;
    let n_all = f.len();
    let m = if ((n_all as f64) * h - period).abs() <= 1e-9 * period {
        n_all
    } else if (((n_all - 1) as f64) * h - period).abs() <= 1e-9 * period {
        n_all - 1
    } else {
        return Err(Error::UnsupportedGrid(format!(
            "grid of {n_all} nodes with spacing {h} does not cover period {period}"
        )));
    };
    let mut buf: Vec<Complex<f64>> = f.values()[..m].iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        *c *= (2.0 * PI * kk / period).abs();
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / m as f64).collect();
    if m < n_all {
        out.push(out[0]);
    }
    TraceField::new(f.grid().clone(), out)
}

/// Half-plane Poisson extension `P_y * u0` with `P_y(x) = y / (pi (x^2 + y^2))`.
///
/// `u0` is taken piecewise linear between nodes and constant beyond the
/// grid; the kernel is integrated exactly against that interpolant, so the
/// result is exact for such data at every height, including `y -> 0`.
pub fn poisson_extend(u0: &TraceField, y: f64) -> Result<TraceField> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(invalid(format!("height must be nonnegative, got {y}")));
    }
    if y == 0.0 {
        return Ok(u0.clone());
    }
    let s = u0.nodes();
    let u = u0.values();
    let n = s.len();
    let out: Vec<f64> = s
        .par_iter()
        .map(|&x| {
            let atan = |t: f64| (t / y).atan() / PI;
            let logt = |t: f64| y / (2.0 * PI) * (t * t + y * y).ln();
            let mut a_prev = atan(s[0] - x);
            let mut b_prev = logt(s[0] - x);
            let mut acc = u[0] * (a_prev + 0.5);
            for k in 0..n - 1 {
                let t1 = s[k + 1] - x;
                let a1 = atan(t1);
                let b1 = logt(t1);
                let slope = (u[k + 1] - u[k]) / (s[k + 1] - s[k]);
                acc += (u[k] + slope * (x - s[k])) * (a1 - a_prev) + slope * (b1 - b_prev);
                a_prev = a1;
                b_prev = b1;
            }
            acc + u[n - 1] * (0.5 - a_prev)
        })
        .collect();
    TraceField::new(u0.grid().clone(), out)
}

/// Exact solution `P_t * u0` of `u_t + (-d^2/dx^2)^{1/2} u = 0` (unit density).
pub fn poisson_semigroup_solution(u0: &TraceField, t: f64) -> Result<TraceField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    poisson_extend(u0, t)
}
