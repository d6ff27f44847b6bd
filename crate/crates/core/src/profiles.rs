//! Named initial-data and density profiles.

use crate::error::{invalid, Result};
use crate::fractional_oracle::TraceField;
use crate::grid::LineGrid;
use std::fmt;
use std::sync::Arc;

/// Smooth compactly supported bump with peak `amplitude` at `center`,
/// support `[center - width, center + width]`.
pub fn bump(x: f64, amplitude: f64, width: f64, center: f64) -> f64 {
    let s = (x - center) / width;
    if s.abs() < 1.0 {
        amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `∫ bump dx` for unit amplitude and unit width.
pub const BUMP_UNIT_MASS: f64 = 1.206_900_322_437_876_5;

/// Tabulated `(x, value)` pairs, linearly interpolated and held constant
/// beyond the first and last abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    points: Vec<(f64, f64)>,
}

impl Samples {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sample table is empty"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("sample abscissae must be distinct"));
        }
        if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(invalid("sample table has non-finite entries"));
        }
        Ok(Self { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x <= p[0].0 {
            return p[0].1;
        }
        if x >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let k = p.partition_point(|q| q.0 <= x);
        let (x0, v0) = p[k - 1];
        let (x1, v1) = p[k];
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Bump { amplitude: f64, width: f64, center: f64 },
    /// `amplitude / (1 + (x/scale)^2)`
    Cauchy { amplitude: f64, scale: f64 },
    Constant { value: f64 },
    /// Two bumps centred at `±separation/2`.
    TwoBump { amplitude: f64, width: f64, separation: f64 },
    Table(Samples),
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Bump { amplitude, width, center } => bump(x, *amplitude, *width, *center),
            Self::Cauchy { amplitude, scale } => amplitude / (1.0 + (x / scale).powi(2)),
            Self::Constant { value } => *value,
            Self::TwoBump {
                amplitude,
                width,
                separation,
            } => bump(x, *amplitude, *width, -0.5 * separation) + bump(x, *amplitude, *width, 0.5 * separation),
            Self::Table(s) => s.eval(x),
        }
    }

    pub fn sample(&self, grid: Arc<LineGrid>) -> TraceField {
        TraceField::from_fn(grid, |x| self.eval(x))
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bump { amplitude, width, center } => {
                write!(f, "bump(amplitude={amplitude}, width={width}, center={center})")
            }
            Self::Cauchy { amplitude, scale } => write!(f, "cauchy(amplitude={amplitude}, scale={scale})"),
            Self::Constant { value } => write!(f, "constant(value={value})"),
            Self::TwoBump {
                amplitude,
                width,
                separation,
            } => write!(f, "two-bump(amplitude={amplitude}, width={width}, separation={separation})"),
            Self::Table(s) => write!(f, "table({} points)", s.points.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum DensityProfile {
    #[default]
    One,
    /// `1 / (1 + (x/scale)^2)`
    CauchyDecay { scale: f64 },
    /// `(1 + x^2)^{-alpha/2}`
    PowerDecay { alpha: f64 },
    Table(Samples),
}

impl DensityProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::One => 1.0,
            Self::CauchyDecay { scale } => 1.0 / (1.0 + (x / scale).powi(2)),
            Self::PowerDecay { alpha } => (1.0 + x * x).powf(-0.5 * alpha),
            Self::Table(s) => s.eval(x),
        }
    }

    /// Samples the density, rejecting non-positive values.
    pub fn sample(&self, grid: Arc<LineGrid>) -> Result<TraceField> {
        let t = TraceField::from_fn(grid, |x| self.eval(x));
        if t.values().iter().any(|&r| !(r > 0.0)) {
            return Err(invalid(format!("density {self} is not strictly positive on the grid")));
        }
        Ok(t)
    }
}

impl fmt::Display for DensityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "one"),
            Self::CauchyDecay { scale } => write!(f, "cauchy-decay(scale={scale})"),
            Self::PowerDecay { alpha } => write!(f, "power-decay(alpha={alpha})"),
            Self::Table(s) => write!(f, "table({} points)", s.points.len()),
        }
    }
}
