//! Elliptic building blocks on the truncated half-strip: the Dirichlet
//! harmonic extension `E_R(g)` and the auxiliary problem with nonlinear
//! Robin data
//!
//! ```text
//!   Δv = 0                        in the strip
//!   -ε ∂_y v + ρ v^{1/m} = ρ g    on y = 0
//!   v = 0                         on the sides and the top
//! ```
//!
//! Both are discretized with the same finite-volume 5-point operator. Its
//! quadratic form is the bilinear cell-average quadrature of `∫|∇v|²`, so
//! the discrete auxiliary solution is the exact minimizer of the discrete
//! functional `J`, and the contraction and comparison properties of the
//! continuous problem hold at the discrete level.

use crate::error::{invalid, Error, Result};
use crate::fractional_oracle::TraceField;
use crate::grid::HalfStripGrid;
use crate::linalg::{BandedSym, LinearBackend, SpdSolver};
use std::sync::Arc;

/// Samples of a function on every node of a [`HalfStripGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionField {
    grid: Arc<HalfStripGrid>,
    values: Vec<f64>,
}

impl ExtensionField {
    pub fn zeros(grid: Arc<HalfStripGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn new(grid: Arc<HalfStripGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<HalfStripGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid.x_nodes() {
            for &y in grid.y_nodes() {
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<HalfStripGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Restriction to `y = 0`.
    pub fn trace(&self) -> TraceField {
        let ny = self.grid.ny();
        let vals = (0..self.grid.nx()).map(|i| self.values[i * ny]).collect();
        TraceField::new(self.grid.x().clone(), vals).expect("trace shape")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest value on the sides and the top (the Dirichlet part).
    pub fn max_abs_on_dirichlet_sides(&self) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut m: f64 = 0.0;
        for j in 0..ny {
            m = m.max(self.at(0, j).abs()).max(self.at(nx - 1, j).abs());
        }
        for i in 0..nx {
            m = m.max(self.at(i, ny - 1).abs());
        }
        m
    }
}

/// Finite-volume 5-point operator `K ≈ -Δ` on a (possibly graded) strip.
///
/// The dual cell of node `(i, j)` has widths `wx[i]`, `wy[j]` (halved on the
/// outer rows and columns). The x-edge between `(i, j)` and `(i+1, j)` has
/// conductance `wy[j] / dx[i]`, the y-edge between `(i, j)` and `(i, j+1)`
/// has `wx[i] / dy[j]`. Every row sums to zero.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian {
    grid: Arc<HalfStripGrid>,
    dx: Vec<f64>,
    dy: Vec<f64>,
    wx: Vec<f64>,
    wy: Vec<f64>,
}

fn dual_widths(h: &[f64]) -> Vec<f64> {
    let n = h.len() + 1;
    (0..n)
        .map(|k| {
            let left = if k > 0 { h[k - 1] } else { 0.0 };
            let right = if k < n - 1 { h[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

impl DiscreteLaplacian {
    pub fn new(grid: Arc<HalfStripGrid>) -> Self {
        let dx = grid.x().spacing();
        let dy: Vec<f64> = grid.y_nodes().windows(2).map(|w| w[1] - w[0]).collect();
        let wx = dual_widths(&dx);
        let wy = dual_widths(&dy);
        Self { grid, dx, dy, wx, wy }
    }

    pub fn grid(&self) -> &Arc<HalfStripGrid> {
        &self.grid
    }

    /// Dual widths along x; these are also the trapezoid weights on `y = 0`.
    pub fn dual_x(&self) -> &[f64] {
        &self.wx
    }

    pub fn dual_y(&self) -> &[f64] {
        &self.wy
    }

    #[inline]
    fn cx(&self, i: usize, j: usize) -> f64 {
        self.wy[j] / self.dx[i]
    }

    #[inline]
    fn cy(&self, i: usize, j: usize) -> f64 {
        self.wx[i] / self.dy[j]
    }

    /// Neighbour coefficients of node `(i, j)` as `((i', j'), c)`; the row of
    /// `K` is `sum c (v_ij - v_i'j')`.
    pub fn stencil(&self, i: usize, j: usize) -> Vec<((usize, usize), f64)> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(((i - 1, j), self.cx(i - 1, j)));
        }
        if i + 1 < nx {
            out.push(((i + 1, j), self.cx(i, j)));
        }
        if j > 0 {
            out.push(((i, j - 1), self.cy(i, j - 1)));
        }
        if j + 1 < ny {
            out.push(((i, j + 1), self.cy(i, j)));
        }
        out
    }

    /// `(K v)` at node `(i, j)`.
    pub fn apply_at(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let vij = v[g.index(i, j)];
        self.stencil(i, j)
            .into_iter()
            .map(|((a, b), c)| c * (vij - v[g.index(a, b)]))
            .sum()
    }

    /// `v^T K v`, the bilinear cell-average quadrature of `∫|∇v|²`.
    pub fn energy(&self, v: &[f64]) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let mut e = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let vij = v[g.index(i, j)];
                if i + 1 < nx {
                    let d = v[g.index(i + 1, j)] - vij;
                    e += self.cx(i, j) * d * d;
                }
                if j + 1 < ny {
                    let d = v[g.index(i, j + 1)] - vij;
                    e += self.cy(i, j) * d * d;
                }
            }
        }
        e
    }

    /// Discrete `∂_y v` on `y = 0` implied by the finite-volume balance of
    /// the boundary half-cell, `-(K v)_{i0} / wx[i]`. Second-order accurate
    /// for harmonic `v`.
    pub fn normal_derivative(&self, v: &[f64], i: usize) -> f64 {
        -self.apply_at(v, i, 0) / self.wx[i]
    }

    /// Assembles `scale * K` restricted to the unknowns `1..nx-1` by
    /// `j_lo..ny-1`, ordered column by column (y fastest).
    fn assemble(&self, j_lo: usize, scale: f64) -> (BandedSym, usize) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let nyu = ny - 1 - j_lo;
        let n = (nx - 2) * nyu;
        let mut a = BandedSym::zeros(n, nyu);
        let idx = |i: usize, j: usize| (i - 1) * nyu + (j - j_lo);
        for i in 1..nx - 1 {
            for j in j_lo..ny - 1 {
                let p = idx(i, j);
                for ((a_i, a_j), c) in self.stencil(i, j) {
                    a.add(p, p, scale * c);
                    let unknown = a_i >= 1 && a_i < nx - 1 && a_j >= j_lo && a_j < ny - 1;
                    if unknown {
                        let q = idx(a_i, a_j);
                        if q < p {
                            a.add(p, q, -scale * c);
                        }
                    }
                }
            }
        }
        (a, nyu)
    }
}

/// Tolerances and limits for the elliptic solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Newton stops when the max-norm of the boundary residual is below
    /// `newton_tol * max(1, |ρ g|_∞)`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Relative residual for the iterative linear backend.
    pub linear_tol: f64,
    pub backend: LinearBackend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_newton: 100,
            linear_tol: 1e-10,
            backend: LinearBackend::BandedCholesky,
        }
    }
}

/// Reusable Dirichlet solver for `E_R`.
#[derive(Debug, Clone)]
pub struct HarmonicExtender {
    lap: DiscreteLaplacian,
    solver: SpdSolver,
    nyu: usize,
}

impl HarmonicExtender {
    pub fn new(grid: Arc<HalfStripGrid>, opts: &SolveOptions) -> Result<Self> {
        let lap = DiscreteLaplacian::new(grid);
        let (a, nyu) = lap.assemble(1, 1.0);
        let solver = SpdSolver::new(a, opts.backend, opts.linear_tol)?;
        Ok(Self { lap, solver, nyu })
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        &self.lap
    }

    /// Harmonic field equal to `g` on `y = 0` (the two corner nodes belong to
    /// the Dirichlet sides and are set to zero) and zero elsewhere on the
    /// boundary.
    pub fn extend(&self, g: &[f64]) -> Result<ExtensionField> {
        let grid = self.lap.grid.clone();
        let (nx, ny) = (grid.nx(), grid.ny());
        if g.len() != nx {
            return Err(invalid(format!("trace has {} values, grid has {nx} columns", g.len())));
        }
        let mut rhs = vec![0.0; (nx - 2) * self.nyu];
        for i in 1..nx - 1 {
            rhs[(i - 1) * self.nyu] = self.lap.cy(i, 0) * g[i];
        }
        let sol = self.solver.solve(&rhs)?;
        let mut values = vec![0.0; grid.len()];
        for i in 1..nx - 1 {
            values[grid.index(i, 0)] = g[i];
            for j in 1..ny - 1 {
                values[grid.index(i, j)] = sol[(i - 1) * self.nyu + (j - 1)];
            }
        }
        ExtensionField::new(grid, values)
    }
}

/// Discrete harmonic extension `E_R(g)` with zero data on the sides and top.
pub fn harmonic_extension_r(g: &TraceField, grid: Arc<HalfStripGrid>) -> Result<ExtensionField> {
    HarmonicExtender::new(grid, &SolveOptions::default())?.extend(g.values())
}

/// `∂w/∂y` on `y = 0` by the three-point one-sided formula on the first
/// three y-levels (weights account for unequal spacings).
pub fn boundary_flux(w: &ExtensionField) -> Result<TraceField> {
    let g = w.grid();
    if g.ny() < 3 {
        return Err(Error::UnsupportedGrid("need at least 3 y-levels".into()));
    }
    let y = g.y_nodes();
    let (h0, h1) = (y[1] - y[0], y[2] - y[1]);
    let c0 = -(2.0 * h0 + h1) / (h0 * (h0 + h1));
    let c1 = (h0 + h1) / (h0 * h1);
    let c2 = -h0 / (h1 * (h0 + h1));
    let vals = (0..g.nx())
        .map(|i| c0 * w.at(i, 0) + c1 * w.at(i, 1) + c2 * w.at(i, 2))
        .collect();
    TraceField::new(g.x().clone(), vals)
}

/// Discrete energy functional of the auxiliary problem
///
/// ```text
///   J(v) = (ε/2) ∫|∇v|² + (m/(m+1)) ∫_Γ ρ v^{(m+1)/m} - ∫_Γ ρ v g
/// ```
///
/// With `epsilon = 1` this is the functional whose minimizer solves the
/// problem with unit time step; for general `ε` the Euler–Lagrange equation
/// is the boundary condition `-ε ∂_y v + ρ v^{1/m} = ρ g`.
pub fn functional_j(v: &ExtensionField, g: &TraceField, rho: &TraceField, m: f64, epsilon: f64) -> Result<f64> {
    let grid = v.grid();
    check_trace(g, grid)?;
    check_trace(rho, grid)?;
    let lap = DiscreteLaplacian::new(grid.clone());
    let p = (m + 1.0) / m;
    let mut boundary = 0.0;
    for (i, &w) in lap.dual_x().iter().enumerate() {
        let vb = v.at(i, 0);
        if vb < 0.0 {
            return Err(invalid(format!("negative trace value {vb} at column {i}")));
        }
        let r = rho.values()[i];
        boundary += w * r * (m / (m + 1.0) * vb.powf(p) - vb * g.values()[i]);
    }
    Ok(0.5 * epsilon * lap.energy(v.values()) + boundary)
}

fn check_trace(t: &TraceField, grid: &HalfStripGrid) -> Result<()> {
    if t.len() != grid.nx() {
        return Err(invalid(format!(
            "trace has {} values, grid has {} columns",
            t.len(),
            grid.nx()
        )));
    }
    Ok(())
}

/// Converged solution `(z_R, v_R)` of the auxiliary problem.
#[derive(Debug, Clone)]
pub struct AuxiliarySolveResult {
    /// Boundary unknown; `v = z^m` on `y = 0`.
    pub z: TraceField,
    pub v: ExtensionField,
    pub iterations: usize,
    /// Max-norm of the discrete boundary equation at the returned `z`.
    pub residual: f64,
    pub j_value: f64,
    pub picard_steps: usize,
}

/// Solver for the auxiliary problem with fixed grid, `ε`, `ρ` and `m`;
/// caches factorizations across calls (every time step reuses it).
#[derive(Debug, Clone)]
pub struct AuxiliarySolver {
    extender: HarmonicExtender,
    rho: TraceField,
    epsilon: f64,
    m: f64,
    opts: SolveOptions,
    /// Newton matrix for `m = 1`, which does not depend on the iterate.
    linear_jacobian: Option<SpdSolver>,
}

impl AuxiliarySolver {
    pub fn new(grid: Arc<HalfStripGrid>, epsilon: f64, rho: TraceField, m: f64, opts: SolveOptions) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid(format!("time step must be positive, got {epsilon}")));
        }
        if !(m >= 1.0) || !m.is_finite() {
            return Err(invalid(format!("exponent must be >= 1, got {m}")));
        }
        check_trace(&rho, &grid)?;
        if rho.values().iter().any(|&r| !(r > 0.0)) {
            return Err(invalid("density must be strictly positive"));
        }
        let extender = HarmonicExtender::new(grid, &opts)?;
        let mut solver = Self {
            extender,
            rho,
            epsilon,
            m,
            opts,
            linear_jacobian: None,
        };
        if m == 1.0 {
            let diag = vec![1.0; solver.grid().nx()];
            solver.linear_jacobian = Some(solver.robin_matrix(&diag)?);
        }
        Ok(solver)
    }

    pub fn grid(&self) -> &Arc<HalfStripGrid> {
        self.extender.lap.grid()
    }

    pub fn laplacian(&self) -> &DiscreteLaplacian {
        &self.extender.lap
    }

    pub fn extender(&self) -> &HarmonicExtender {
        &self.extender
    }

    pub fn rho(&self) -> &TraceField {
        &self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `ε K + diag(ρ_i wx_i a_i)` on the unknowns with a free boundary row.
    fn robin_matrix(&self, a: &[f64]) -> Result<SpdSolver> {
        let lap = &self.extender.lap;
        let (mut mat, nyu) = lap.assemble(0, self.epsilon);
        for i in 1..self.grid().nx() - 1 {
            let p = (i - 1) * nyu;
            mat.add(p, p, self.rho.values()[i] * lap.wx[i] * a[i]);
        }
        SpdSolver::new(mat, self.opts.backend, self.opts.linear_tol)
    }

    fn nyu(&self) -> usize {
        self.grid().ny() - 1
    }

    /// Boundary residual `ρ(z - g) - ε ∂_y v` per unit length on the interior
    /// columns (zero on the two corner columns).
    fn residual(&self, z: &[f64], g: &[f64], v: &ExtensionField) -> Vec<f64> {
        let lap = &self.extender.lap;
        let nx = self.grid().nx();
        let mut r = vec![0.0; nx];
        for i in 1..nx - 1 {
            r[i] = self.rho.values()[i] * (z[i] - g[i]) - self.epsilon * lap.normal_derivative(v.values(), i);
        }
        r
    }

    fn field_of(&self, z: &[f64]) -> Result<ExtensionField> {
        let m = self.m;
        let zm: Vec<f64> = z.iter().map(|&x| if m == 1.0 { x } else { x.powf(m) }).collect();
        self.extender.extend(&zm)
    }

    pub fn solve(&self, g: &TraceField) -> Result<AuxiliarySolveResult> {
        let grid = self.grid().clone();
        check_trace(g, &grid)?;
        let nx = grid.nx();
        let nyu = self.nyu();
        let m = self.m;
        let gv = g.values();
        let g_inf = g.max_abs();
        let rho_g = gv
            .iter()
            .zip(self.rho.values())
            .fold(0.0f64, |acc, (a, r)| acc.max((a * r).abs()));
        let tol = self.opts.newton_tol * rho_g.max(1.0);
        let delta = 1e-12 * (1.0 + g_inf);

        let mut z: Vec<f64> = gv.iter().map(|&x| x.max(0.0)).collect();
        z[0] = 0.0;
        z[nx - 1] = 0.0;
        let mut v = self.field_of(&z)?;
        let mut r = self.residual(&z, gv, &v);
        let mut rnorm = max_norm(&r);
        let mut history = vec![rnorm];
        let mut iterations = 0;
        let mut picard_steps = 0;

        while rnorm > tol {
            if iterations >= self.opts.max_newton {
                return Err(Error::SolverFailure {
                    message: format!("boundary Newton did not reach {tol:e}"),
                    trace: history,
                });
            }
            iterations += 1;
            // Newton step in the scaled variable δv_b = d δz, d = m z^{m-1}
            let d: Vec<f64> = z.iter().map(|&x| m * x.max(delta).powf(m - 1.0)).collect();
            let mut rhs = vec![0.0; (nx - 2) * nyu];
            for i in 1..nx - 1 {
                rhs[(i - 1) * nyu] = -self.extender.lap.wx[i] * r[i];
                for j in 1..nyu {
                    rhs[(i - 1) * nyu + j] = -self.epsilon * self.extender.lap.apply_at(v.values(), i, j);
                }
            }
            let step = match &self.linear_jacobian {
                Some(s) => s.solve(&rhs)?,
                None => {
                    let a: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
                    self.robin_matrix(&a)?.solve(&rhs)?
                }
            };
            let dz: Vec<f64> = (0..nx)
                .map(|i| {
                    if i == 0 || i == nx - 1 {
                        0.0
                    } else {
                        step[(i - 1) * nyu] / d[i]
                    }
                })
                .collect();

            let mut accepted = false;
            let mut lambda = 1.0;
            for _ in 0..4 {
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| (a + lambda * b).max(0.0)).collect();
                let tv = self.field_of(&trial)?;
                let tr = self.residual(&trial, gv, &tv);
                let tn = max_norm(&tr);
                if tn < rnorm {
                    z = trial;
                    v = tv;
                    r = tr;
                    rnorm = tn;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                // relaxed Picard step on the lagged-coefficient linear problem
                picard_steps += 1;
                let a: Vec<f64> = z.iter().map(|&x| x.max(delta).powf(1.0 - m)).collect();
                let mut prhs = vec![0.0; (nx - 2) * nyu];
                for i in 1..nx - 1 {
                    prhs[(i - 1) * nyu] = self.rho.values()[i] * self.extender.lap.wx[i] * gv[i];
                }
                let pv = self.robin_matrix(&a)?.solve(&prhs)?;
                for i in 1..nx - 1 {
                    let zp = pv[(i - 1) * nyu].max(0.0).powf(1.0 / m);
                    z[i] = 0.5 * z[i] + 0.5 * zp;
                }
                v = self.field_of(&z)?;
                r = self.residual(&z, gv, &v);
                rnorm = max_norm(&r);
            }
            history.push(rnorm);
        }

        let z = TraceField::new(grid.x().clone(), z)?;
        let j_value = functional_j(&v, g, &self.rho, m, self.epsilon)?;
        Ok(AuxiliarySolveResult {
            z,
            v,
            iterations,
            residual: rnorm,
            j_value,
            picard_steps,
        })
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One-shot solve of the auxiliary problem.
pub fn solve_auxiliary(
    g: &TraceField,
    epsilon: f64,
    rho: &TraceField,
    m: f64,
    grid: Arc<HalfStripGrid>,
    opts: SolveOptions,
) -> Result<AuxiliarySolveResult> {
    AuxiliarySolver::new(grid, epsilon, rho.clone(), m, opts)?.solve(g)
}

/// `∫ ρ (a - b)_+ dx` with the dual widths of `lap` as weights.
pub fn weighted_positive_part(a: &[f64], b: &[f64], rho: &[f64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(rho.iter().zip(weights))
        .map(|((x, y), (r, w))| r * w * (x - y).max(0.0))
        .sum()
}
