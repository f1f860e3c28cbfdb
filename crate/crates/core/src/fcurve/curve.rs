use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridLocation};
use crate::error::{Result, XcrError};

/// Rule used to evaluate a curve between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    #[default]
    Linear,
    CubicNatural,
}

/// What happens when a curve is evaluated outside its grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Evaluation outside the grid is an error.
    #[default]
    None,
    /// The last value is carried forward indefinitely to the right.
    ConstantRight,
}

/// A sampled function on a grid, together with its interpolation rule.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
    interp: Interp,
    extension: Extension,
    // Second derivatives at the nodes; only for `Interp::CubicNatural`.
    second: Option<Vec<f64>>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(XcrError::InvalidCurve(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(XcrError::InvalidCurve(format!(
                "value at t = {} is not finite",
                grid.points()[i]
            )));
        }
        let second = match interp {
            Interp::Linear => None,
            Interp::CubicNatural => Some(natural_spline_second_derivatives(grid.points(), &values)),
        };
        Ok(Self {
            grid,
            values,
            interp,
            extension: Extension::None,
            second,
        })
    }

    /// Samples `f` on the grid.
    pub fn from_fn(grid: Arc<Grid>, interp: Interp, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values, interp)
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// Closed domain on which evaluation is defined. The upper end is
    /// infinite under `Extension::ConstantRight`.
    pub fn domain(&self) -> (f64, f64) {
        let hi = match self.extension {
            Extension::None => self.grid.last(),
            Extension::ConstantRight => f64::INFINITY,
        };
        (self.grid.first(), hi)
    }

    pub fn contains(&self, t: f64) -> bool {
        let s = self.grid.slack();
        let (lo, hi) = self.domain();
        t >= lo - s && t <= hi + s
    }

    pub(crate) fn check_domain(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            let (lo, hi) = self.domain();
            Err(XcrError::OutOfDomain { t, lo, hi })
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.evaluate_at(self.grid.locate(t)))
    }

    /// Evaluation at a precomputed location on this curve's grid.
    #[inline]
    pub fn evaluate_at(&self, loc: GridLocation) -> f64 {
        let GridLocation { index: i, frac: f } = loc;
        let y0 = self.values[i];
        let y1 = self.values[i + 1];
        if f == 0.0 {
            return y0;
        }
        if f == 1.0 {
            return y1;
        }
        match &self.second {
            None => (1.0 - f) * y0 + f * y1,
            Some(m) => {
                let g = self.grid.points();
                let h = g[i + 1] - g[i];
                let a = 1.0 - f;
                a * y0 + f * y1 + h * h / 6.0 * ((a * a * a - a) * m[i] + (f * f * f - f) * m[i + 1])
            }
        }
    }

    /// Exact integral of the interpolant over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Err(XcrError::InvalidArgument(format!(
                "integration bounds must satisfy a < b, got [{a}, {b}]"
            )));
        }
        self.check_domain(a)?;
        self.check_domain(b)?;
        let g = self.grid.points();
        let mut breaks = vec![a];
        breaks.extend(g.iter().copied().filter(|&t| t > a && t < b));
        breaks.push(b);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (u, v) = (w[0], w[1]);
            let fu = self.evaluate_at(self.grid.locate(u));
            let fv = self.evaluate_at(self.grid.locate(v));
            total += match self.interp {
                Interp::Linear => 0.5 * (v - u) * (fu + fv),
                Interp::CubicNatural => {
                    // Simpson is exact on each cubic piece.
                    let fm = self.evaluate_at(self.grid.locate(0.5 * (u + v)));
                    (v - u) / 6.0 * (fu + 4.0 * fm + fv)
                }
            };
        }
        Ok(total)
    }

    /// Resamples onto another grid using this curve's interpolation rule.
    pub fn resample(&self, out: Arc<Grid>) -> Result<Curve> {
        self.shifted(0.0, out)
    }

    /// The curve `t -> self(t + delta)` sampled on `out`.
    pub fn shifted(&self, delta: f64, out: Arc<Grid>) -> Result<Curve> {
        let values = out
            .points()
            .iter()
            .map(|&t| self.evaluate(t + delta))
            .collect::<Result<Vec<_>>>()?;
        Curve::new(out, values, self.interp)
    }

    /// Same grid and interpolation, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Curve> {
        Ok(Curve::new(self.grid.clone(), values, self.interp)?.with_extension(self.extension))
    }

    pub fn scaled(&self, factor: f64) -> Result<Curve> {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    /// Materializes a constant right extension by appending grid points at the
    /// median spacing until `to` is covered.
    pub fn extend_right(&self, to: f64) -> Result<Curve> {
        let last = self.grid.last();
        if to <= last {
            return Ok(self.clone());
        }
        let h = self.grid.median_spacing();
        let mut points = self.grid.points().to_vec();
        let mut values = self.values.clone();
        let tail = values[values.len() - 1];
        let mut k = 1.0;
        loop {
            let t = last + k * h;
            let t = if t > to - 1e-9 * h { to } else { t };
            points.push(t);
            values.push(tail);
            if t >= to {
                break;
            }
            k += 1.0;
        }
        Curve::new(Arc::new(Grid::new(points)?), values, self.interp)
    }
}

/// Natural cubic spline second derivatives via the Thomas algorithm.
fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[r] = 2.0 * (h0 + h1);
        upper[r] = h1;
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for r in 1..k {
        let lower = x[r + 1] - x[r];
        let w = lower / diag[r - 1];
        diag[r] -= w * upper[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for r in (0..k - 1).rev() {
        m[r + 1] = (rhs[r] - upper[r] * m[r + 2]) / diag[r];
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(points: &[f64]) -> Arc<Grid> {
        Arc::new(Grid::new(points.to_vec()).unwrap())
    }

    #[test]
    fn linear_midpoint_and_nodes() {
        let c = Curve::new(grid(&[0.0, 1.0, 2.0]), vec![0.0, 1.0, 4.0], Interp::Linear).unwrap();
        assert_eq!(c.evaluate(0.5).unwrap(), 0.5);
        assert_eq!(c.evaluate(1.0).unwrap(), 1.0);
        assert_eq!(c.evaluate(2.0).unwrap(), 4.0);
        assert_eq!(c.evaluate(1.5).unwrap(), 2.5);
    }

    #[test]
    fn out_of_domain_without_extension() {
        let c = Curve::new(grid(&[0.0, 1.0, 2.0]), vec![0.0, 1.0, 4.0], Interp::Linear).unwrap();
        assert!(matches!(c.evaluate(2.5), Err(XcrError::OutOfDomain { .. })));
        assert!(matches!(c.evaluate(-0.1), Err(XcrError::OutOfDomain { .. })));
        let c = c.with_extension(Extension::ConstantRight);
        assert_eq!(c.evaluate(7.0).unwrap(), 4.0);
        assert!(c.evaluate(-0.1).is_err());
    }

    #[test]
    fn cubic_is_exact_at_nodes_and_reproduces_lines() {
        let g = grid(&[0.0, 0.7, 1.5, 2.0, 3.1]);
        let vals: Vec<f64> = g.points().iter().map(|t| (3.0 * t).sin()).collect();
        let c = Curve::new(g.clone(), vals.clone(), Interp::CubicNatural).unwrap();
        for (t, v) in g.points().iter().zip(&vals) {
            assert_eq!(c.evaluate(*t).unwrap(), *v);
        }
        // A natural spline through collinear data is that line.
        let c = Curve::from_fn(g, Interp::CubicNatural, |t| 2.0 * t - 1.0).unwrap();
        for t in [0.1, 0.9, 1.77, 2.9] {
            assert!((c.evaluate(t).unwrap() - (2.0 * t - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_spline_tracks_smooth_function() {
        let g = Arc::new(Grid::uniform(0.0, 10.0, 0.1).unwrap());
        let c = Curve::from_fn(g, Interp::CubicNatural, f64::sin).unwrap();
        for t in [2.05, 4.33, 7.71] {
            assert!((c.evaluate(t).unwrap() - t.sin()).abs() < 1e-5);
        }
    }

    #[test]
    fn integral_exact_for_interpolant() {
        let c = Curve::new(grid(&[0.0, 1.0, 2.0]), vec![0.0, 1.0, 4.0], Interp::Linear).unwrap();
        assert!((c.integral(0.0, 2.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((c.integral(0.5, 1.5).unwrap() - (0.375 + 0.875)).abs() < 1e-15);
        let c = c.with_extension(Extension::ConstantRight);
        assert!((c.integral(0.0, 3.0).unwrap() - 7.0).abs() < 1e-15);
    }

    #[test]
    fn extend_right_materializes_constant_tail() {
        let c = Curve::new(grid(&[0.0, 1.0, 2.0]), vec![0.0, 1.0, 4.0], Interp::Linear).unwrap();
        let e = c.extend_right(3.5).unwrap();
        assert_eq!(e.grid().points(), &[0.0, 1.0, 2.0, 3.0, 3.5]);
        assert_eq!(e.values(), &[0.0, 1.0, 4.0, 4.0, 4.0]);
    }
}
