use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};

/// Relative slack used when deciding whether a point lies on the domain
/// boundary. Shifted quadrature nodes land on the boundary only up to
/// rounding.
pub(crate) const DOMAIN_SLACK: f64 = 1e-9;

/// A strictly increasing, finite time grid with at least two points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    points: Vec<f64>,
}

/// Position of a point inside a grid: the bracketing interval index and the
/// fractional offset within it, `t = g[index] + frac * (g[index + 1] - g[index])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLocation {
    pub index: usize,
    pub frac: f64,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(XcrError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|t| !t.is_finite()) {
            return Err(XcrError::InvalidGrid(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(XcrError::InvalidGrid(format!(
                "not strictly increasing at index {}: {} then {}",
                i + 1,
                points[i],
                points[i + 1]
            )));
        }
        Ok(Self { points })
    }

    /// Evenly spaced grid `start, start + step, ...` up to `end` (inclusive
    /// when `end` is hit up to rounding).
    pub fn uniform(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end <= start {
            return Err(XcrError::InvalidGrid(format!(
                "bad uniform grid start={start} end={end} step={step}"
            )));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| start + i as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }

    pub fn median_spacing(&self) -> f64 {
        let mut d: Vec<f64> = self.points.windows(2).map(|w| w[1] - w[0]).collect();
        d.sort_by(f64::total_cmp);
        let m = d.len();
        if m % 2 == 1 {
            d[m / 2]
        } else {
            0.5 * (d[m / 2 - 1] + d[m / 2])
        }
    }

    pub(crate) fn slack(&self) -> f64 {
        DOMAIN_SLACK * self.span().max(1.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        let s = self.slack();
        t >= self.first() - s && t <= self.last() + s
    }

    /// Locates `t`, which is clamped into the grid span first. Callers are
    /// responsible for the domain check.
    pub fn locate(&self, t: f64) -> GridLocation {
        let g = &self.points;
        let n = g.len();
        if t <= g[0] {
            return GridLocation { index: 0, frac: 0.0 };
        }
        if t >= g[n - 1] {
            return GridLocation {
                index: n - 2,
                frac: 1.0,
            };
        }
        let index = g.partition_point(|&x| x <= t) - 1;
        let frac = (t - g[index]) / (g[index + 1] - g[index]);
        GridLocation { index, frac }
    }

    /// Trapezoidal weights on the grid nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let g = &self.points;
        let mut w = vec![0.0; g.len()];
        for i in 0..g.len() - 1 {
            let h = g[i + 1] - g[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    /// Grid points (with slack) inside `[a, b]`.
    pub fn points_within(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let s = self.slack();
        self.points
            .iter()
            .copied()
            .filter(move |&t| t >= a - s && t <= b + s)
    }

    pub fn approx_eq(&self, other: &Grid) -> bool {
        if std::ptr::eq(self, other) {
            return true;
        }
        let tol = self.slack();
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<f64>::deserialize(d)?;
        Grid::new(points).map_err(serde::de::Error::custom)
    }
}
