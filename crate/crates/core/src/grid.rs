//! Discrete geometries: the boundary line, the Cartesian half-strip used by
//! the evolution solver, and the polar half-disk used by the barrier probe.
//!
//! All grids are immutable once built.

use crate::error::{invalid, Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Strictly increasing nodes on the boundary line `y = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    nodes: Vec<f64>,
}

impl LineGrid {
    /// Uniform grid of `n` nodes on `[-r, r]`.
    pub fn uniform(r: f64, n: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid(format!("half-width must be positive, got {r}")));
        }
        if n < 3 {
            return Err(invalid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self {
            nodes: symmetric_nodes(r, n),
        })
    }

    /// Arbitrary strictly increasing nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(invalid("need at least 3 nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("nodes must be finite and strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Per-interval widths, `len() - 1` entries.
    pub fn spacing(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    /// Common spacing if the grid is uniform to a relative tolerance of 1e-9.
    pub fn uniform_spacing(&self) -> Option<f64> {
        let h = (self.nodes[self.len() - 1] - self.nodes[0]) / (self.len() - 1) as f64;
        self.nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
            .then_some(h)
    }

    /// Trapezoid weights for integrating over the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.len();
        let mut w = vec![0.0; n];
        for k in 0..n - 1 {
            let h = self.nodes[k + 1] - self.nodes[k];
            w[k] += 0.5 * h;
            w[k + 1] += 0.5 * h;
        }
        w
    }
}

/// Builds the uniform symmetric boundary grid on `[-r, r]`.
pub fn build_line(r: f64, n: usize) -> Result<LineGrid> {
    LineGrid::uniform(r, n)
}

fn symmetric_nodes(r: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * r / (n - 1) as f64;
    let mid = (n - 1) as f64 / 2.0;
    let mut nodes: Vec<f64> = (0..n).map(|k| (k as f64 - mid) * h).collect();
    nodes[0] = -r;
    nodes[n - 1] = r;
    nodes
}

/// Nodes `0 = y_0 < ... < y_{n-1} = top` whose spacings grow geometrically.
fn graded_nodes(top: f64, n: usize, grade: f64) -> Vec<f64> {
    let intervals = n - 1;
    let h0 = if (grade - 1.0).abs() < 1e-14 {
        top / intervals as f64
    } else {
        top * (grade - 1.0) / (grade.powi(intervals as i32) - 1.0)
    };
    let mut nodes = Vec::with_capacity(n);
    let mut y = 0.0;
    let mut h = h0;
    nodes.push(0.0);
    for _ in 0..intervals {
        y += h;
        h *= grade;
        nodes.push(y);
    }
    nodes[n - 1] = top;
    nodes
}

/// Cartesian truncation `[-R, R] x [0, Y]` of the half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfStripGrid {
    x: Arc<LineGrid>,
    y_nodes: Vec<f64>,
    radius: f64,
    height: f64,
    grade: f64,
}

impl HalfStripGrid {
    pub fn new(r: f64, height: f64, nx: usize, ny: usize, grade: f64) -> Result<Self> {
        if !(height > 0.0) || !height.is_finite() {
            return Err(invalid(format!("height must be positive, got {height}")));
        }
        if ny < 3 {
            return Err(invalid(format!("need at least 3 y-levels, got {ny}")));
        }
        if !(grade >= 1.0) || !grade.is_finite() {
            return Err(invalid(format!("grading ratio must be >= 1, got {grade}")));
        }
        let x = Arc::new(LineGrid::uniform(r, nx)?);
        Ok(Self {
            x,
            y_nodes: graded_nodes(height, ny, grade),
            radius: r,
            height,
            grade,
        })
    }

    /// Grid with x-spacing `dx` and first y-spacing at most `h0`, using the
    /// fewest y-levels that achieve it for the given grading.
    pub fn with_spacing(r: f64, height: f64, dx: f64, h0: f64, grade: f64) -> Result<Self> {
        if !(dx > 0.0) || !(h0 > 0.0) {
            return Err(invalid("spacings must be positive"));
        }
        let nx = (2.0 * r / dx).round() as usize + 1;
        let mut ny = 3;
        loop {
            let nodes = graded_nodes(height, ny, grade.max(1.0));
            if nodes[1] <= h0 * (1.0 + 1e-12) {
                break;
            }
            ny += 1;
            if ny > 1_000_000 {
                return Err(invalid("requested y-spacing is unreachable"));
            }
        }
        Self::new(r, height, nx, ny, grade)
    }

    /// Grid on a wider domain sharing every node of `self`: x is extended
    /// with the same spacing, y continues the geometric sequence above the
    /// current top and the last level is placed exactly at `new_height`.
    pub fn extend_to(&self, new_r: f64, new_height: f64) -> Result<Self> {
        let h = self
            .x
            .uniform_spacing()
            .ok_or_else(|| Error::UnsupportedGrid("x-grid must be uniform to extend".into()))?;
        let extra = (new_r - self.radius) / h;
        if extra < -1e-9 || (extra - extra.round()).abs() > 1e-6 {
            return Err(invalid(format!(
                "new radius {new_r} is not reachable with spacing {h} from {}",
                self.radius
            )));
        }
        if new_height < self.height {
            return Err(invalid("new height must not be below the current height"));
        }
        let nx = self.x.len() + 2 * extra.round() as usize;
        let x = Arc::new(LineGrid::uniform(new_r, nx)?);
        let mut y_nodes = self.y_nodes.clone();
        let m = y_nodes.len();
        let mut step = (y_nodes[m - 1] - y_nodes[m - 2]) * self.grade;
        let mut y = y_nodes[m - 1];
        while y + step < new_height {
            y += step;
            y_nodes.push(y);
            step *= self.grade;
        }
        if new_height > y_nodes[y_nodes.len() - 1] {
            let last = y_nodes.len() - 1;
            // merge a sliver top cell into the previous one
            if last >= m && new_height - y_nodes[last] < 0.5 * (y_nodes[last] - y_nodes[last - 1]) {
                y_nodes[last] = new_height;
            } else {
                y_nodes.push(new_height);
            }
        }
        Ok(Self {
            x,
            y_nodes,
            radius: new_r,
            height: new_height,
            grade: self.grade,
        })
    }

    pub fn x(&self) -> &Arc<LineGrid> {
        &self.x
    }

    pub fn x_nodes(&self) -> &[f64] {
        self.x.nodes()
    }

    pub fn y_nodes(&self) -> &[f64] {
        &self.y_nodes
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn grade(&self) -> f64 {
        self.grade
    }

    /// Flat index of node `(i, j)`; y runs fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds `[-R, R] x [0, Y]` with geometric y-grading.
pub fn build_half_strip(r: f64, height: f64, nx: usize, ny: usize, grade: f64) -> Result<HalfStripGrid> {
    HalfStripGrid::new(r, height, nx, ny, grade)
}

/// Polar grid of the half-disk `{r_min < |(x, y)| < R, y >= 0}`.
///
/// Radii are geometric so that `s = ln r` is uniform; angles are uniform on
/// `[0, pi]` with `theta = 0` on the positive x-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfDiskGrid {
    r_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
    radius: f64,
}

impl HalfDiskGrid {
    pub fn new(r: f64, nr: usize, ntheta: usize, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) || !(r_min < r) || !r.is_finite() {
            return Err(invalid(format!("need 0 < r_min < R, got r_min={r_min}, R={r}")));
        }
        if nr < 3 || ntheta < 3 {
            return Err(invalid(format!("need nr, ntheta >= 3, got {nr}, {ntheta}")));
        }
        let (s0, s1) = (r_min.ln(), r.ln());
        let mut r_nodes: Vec<f64> = (0..nr)
            .map(|i| (s0 + (s1 - s0) * i as f64 / (nr - 1) as f64).exp())
            .collect();
        r_nodes[0] = r_min;
        r_nodes[nr - 1] = r;
        let mut theta_nodes: Vec<f64> = (0..ntheta).map(|j| PI * j as f64 / (ntheta - 1) as f64).collect();
        theta_nodes[0] = 0.0;
        theta_nodes[ntheta - 1] = PI;
        Ok(Self {
            r_nodes,
            theta_nodes,
            radius: r,
        })
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    pub fn nr(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn ntheta(&self) -> usize {
        self.theta_nodes.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn r_min(&self) -> f64 {
        self.r_nodes[0]
    }

    /// Uniform step in `ln r`.
    pub fn log_step(&self) -> f64 {
        (self.radius / self.r_min()).ln() / (self.nr() - 1) as f64
    }

    pub fn theta_step(&self) -> f64 {
        PI / (self.ntheta() - 1) as f64
    }

    /// Flat index of node `(i_r, j_theta)`; theta runs fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ntheta() + j
    }

    pub fn len(&self) -> usize {
        self.nr() * self.ntheta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the radial node equal to `r` (relative tolerance 1e-9).
    pub fn radial_index_of(&self, r: f64) -> Option<usize> {
        self.r_nodes.iter().position(|&ri| (ri - r).abs() <= 1e-9 * r)
    }
}

/// Builds the polar half-disk grid with geometric radii from `r_min` to `R`.
pub fn build_half_disk(r: f64, nr: usize, ntheta: usize, r_min: f64) -> Result<HalfDiskGrid> {
    HalfDiskGrid::new(r, nr, ntheta, r_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn line_examples() {
        assert_eq!(build_line(1.0, 3).unwrap().nodes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(build_line(2.0, 5).unwrap().nodes(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let g = build_line(10.0, 1001).unwrap();
        assert!(g.spacing().iter().all(|&h| close(h, 0.02)));
        assert_eq!(g.nodes()[500], 0.0);
    }

    #[test]
    fn line_rejects_bad_input() {
        assert!(matches!(build_line(0.0, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_line(-1.0, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_line(1.0, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn line_is_symmetric() {
        let g = build_line(3.7, 101).unwrap();
        let n = g.len();
        for k in 0..n {
            assert_eq!(g.nodes()[k], -g.nodes()[n - 1 - k]);
        }
    }

    #[test]
    fn refinement_halves_spacing() {
        let coarse = build_line(5.0, 51).unwrap();
        let fine = build_line(5.0, 101).unwrap();
        assert!(close(fine.max_spacing(), 0.5 * coarse.max_spacing()));
    }

    #[test]
    fn half_strip_examples() {
        let g = build_half_strip(1.0, 1.0, 3, 3, 1.0).unwrap();
        assert_eq!(g.y_nodes(), &[0.0, 0.5, 1.0]);
        let g = build_half_strip(1.0, 3.0, 3, 3, 2.0).unwrap();
        assert!(close(g.y_nodes()[1], 1.0));
        assert_eq!(g.y_nodes()[2], 3.0);
        let g = build_half_strip(4.0, 4.0, 33, 17, 1.1).unwrap();
        let h: Vec<f64> = g.y_nodes().windows(2).map(|w| w[1] - w[0]).collect();
        for w in h.windows(2) {
            assert!((w[1] / w[0] - 1.1).abs() < 1e-9);
        }
        assert_eq!(g.y_nodes()[0], 0.0);
        assert_eq!(g.y_nodes()[16], 4.0);
    }

    #[test]
    fn half_strip_rejects_bad_input() {
        assert!(build_half_strip(1.0, 1.0, 3, 2, 1.0).is_err());
        assert!(build_half_strip(1.0, 0.0, 3, 3, 1.0).is_err());
        assert!(build_half_strip(1.0, 1.0, 3, 3, 0.9).is_err());
        assert!(build_half_strip(1.0, 1.0, 2, 3, 1.0).is_err());
    }

    #[test]
    fn with_spacing_meets_first_level() {
        let g = HalfStripGrid::with_spacing(50.0, 50.0, 0.1, 0.1, 1.1).unwrap();
        assert_eq!(g.nx(), 1001);
        assert!(g.y_nodes()[1] <= 0.1 + 1e-12);
        let fewer = build_half_strip(50.0, 50.0, 1001, g.ny() - 1, 1.1).unwrap();
        assert!(fewer.y_nodes()[1] > 0.1);
    }

    #[test]
    fn extension_nests_nodes() {
        let g = HalfStripGrid::with_spacing(10.0, 10.0, 0.25, 0.25, 1.1).unwrap();
        let big = g.extend_to(20.0, 20.0).unwrap();
        assert_eq!(big.height(), 20.0);
        assert_eq!(*big.y_nodes().last().unwrap(), 20.0);
        assert_eq!(&big.y_nodes()[..g.ny()], g.y_nodes());
        let off = (big.nx() - g.nx()) / 2;
        for (k, &x) in g.x_nodes().iter().enumerate() {
            assert!((big.x_nodes()[k + off] - x).abs() < 1e-12);
        }
        assert!(big.y_nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.extend_to(10.1, 20.0).is_err());
    }

    #[test]
    fn half_disk_examples() {
        let g = build_half_disk(4.0, 3, 3, 1.0).unwrap();
        assert!(close(g.r_nodes()[1], 2.0));
        assert_eq!(g.r_nodes()[2], 4.0);
        assert_eq!(g.theta_nodes(), &[0.0, PI / 2.0, PI]);
        let g = build_half_disk(1.0, 3, 5, 0.25).unwrap();
        assert!(close(g.r_nodes()[1], 0.5));
        let g = build_half_disk(8.0, 65, 33, 0.05).unwrap();
        let q = (8.0f64 / 0.05).powf(1.0 / 64.0);
        for w in g.r_nodes().windows(2) {
            assert!((w[1] / w[0] - q).abs() < 1e-12);
        }
        assert!(matches!(build_half_disk(1.0, 3, 3, 1.0), Err(Error::InvalidArgument(_))));
        assert!(build_half_disk(1.0, 3, 3, 2.0).is_err());
    }
}
