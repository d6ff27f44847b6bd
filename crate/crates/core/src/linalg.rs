//! Symmetric banded matrices with a direct (banded Cholesky) and an
//! iterative (Jacobi-preconditioned CG) backend.

use crate::error::{Error, Result};

/// Backend used for the symmetric positive-definite systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearBackend {
    #[default]
    BandedCholesky,
    Pcg,
}

impl std::str::FromStr for LinearBackend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cholesky" | "banded" => Ok(Self::BandedCholesky),
            "pcg" | "cg" => Ok(Self::Pcg),
            other => Err(format!("unknown linear backend '{other}'")),
        }
    }
}

/// Lower band of a symmetric matrix. Row `i` stores columns
/// `i - bw ..= i` at offsets `0 ..= bw` (diagonal last).
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let p = self.pos(i, j);
        self.data[p] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.pos(i, i)]).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = lo + self.bw - i;
            let mut acc = row[self.bw] * x[i];
            for (k, j) in (lo..i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// In-place banded Cholesky factorization `A = L L^T`.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = self.data[i * w + (j + bw - i)];
                if j > lo {
                    let ri = &self.data[i * w + (lo + bw - i)..i * w + (j + bw - i)];
                    let rj = &self.data[j * w + (lo + bw - j)..j * w + bw];
                    s -= ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>();
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::SolverFailure {
                            message: format!("non-positive pivot {s:e} at row {i}"),
                            trace: vec![],
                        });
                    }
                    self.data[i * w + bw] = s.sqrt();
                } else {
                    self.data[i * w + (j + bw - i)] = s / self.data[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { factor: self })
    }
}

/// Cholesky factor of a [`BandedSym`], reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSym,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.factor.n, self.factor.bw);
        let w = bw + 1;
        let l = &self.factor.data;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &l[i * w + (lo + bw - i)..i * w + bw];
            let s: f64 = row.iter().zip(&y[lo..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / l[i * w + bw];
        }
        for i in (0..n).rev() {
            y[i] /= l[i * w + bw];
            let yi = y[i];
            let lo = i.saturating_sub(bw);
            let row = &l[i * w + (lo + bw - i)..i * w + bw];
            for (a, yj) in row.iter().zip(&mut y[lo..i]) {
                *yj -= a * yi;
            }
        }
        y
    }
}

/// Jacobi-preconditioned conjugate gradients. Stops when
/// `|r| <= rel_tol * |b|`; the error carries the residual history.
pub fn pcg(a: &BandedSym, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = norm(&r) / bnorm;
        trace.push(rel);
        if rel <= rel_tol {
            return Ok(x);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverFailure {
        message: format!("conjugate gradients did not reach relative residual {rel_tol:e}"),
        trace,
    })
}

/// A factored (or factor-free, for PCG) SPD system.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(BandedCholesky),
    Iterative { matrix: BandedSym, rel_tol: f64 },
}

impl SpdSolver {
    pub fn new(matrix: BandedSym, backend: LinearBackend, rel_tol: f64) -> Result<Self> {
        match backend {
            LinearBackend::BandedCholesky => Ok(Self::Direct(matrix.cholesky()?)),
            LinearBackend::Pcg => Ok(Self::Iterative { matrix, rel_tol }),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Direct(f) => Ok(f.solve(b)),
            Self::Iterative { matrix, rel_tol } => pcg(matrix, b, *rel_tol, 50 * matrix.dim() + 100),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
