//! Derivative estimation by local polynomial smoothing, and area
//! normalization.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use super::curve::Curve;
use super::grid::Grid;
use super::window::SubintervalSpec;
use crate::error::{Result, XcrError};

/// Kernel weights below this are treated as zero when counting support.
const MIN_KERNEL_WEIGHT: f64 = 1e-8;

/// Default smoothing bandwidth for a grid: ten median spacings.
pub fn default_bandwidth(grid: &Grid) -> f64 {
    2.0 * grid.median_spacing() * 5.0
}

/// First derivative of `curve` at each point of `out`, taken as the slope
/// coefficient of a Gaussian-weighted local quadratic fit to the grid values.
pub fn estimate_derivative(curve: &Curve, bandwidth: f64, out: Arc<Grid>) -> Result<Curve> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(XcrError::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let t = curve.grid().points();
    let y = curve.values();
    let mut slopes = Vec::with_capacity(out.len());
    for &x in out.points() {
        curve.check_domain(x)?;
        // Normal equations in the scaled variable u = (t - x) / h.
        let mut xtx = Matrix3::<f64>::zeros();
        let mut xty = Vector3::<f64>::zeros();
        let mut support = 0usize;
        for (&ti, &yi) in t.iter().zip(y) {
            let u = (ti - x) / bandwidth;
            let w = (-0.5 * u * u).exp();
            if w <= MIN_KERNEL_WEIGHT {
                continue;
            }
            support += 1;
            let basis = Vector3::new(1.0, u, u * u);
            xtx += w * basis * basis.transpose();
            xty += (w * yi) * basis;
        }
        if support < 3 {
            return Err(XcrError::DegenerateWindow { t: x });
        }
        let beta = xtx
            .lu()
            .solve(&xty)
            .ok_or(XcrError::DegenerateWindow { t: x })?;
        slopes.push(beta[1] / bandwidth);
    }
    Curve::new(out, slopes, curve.interp())
}

/// Divides `curve` by its integral over `window` (the whole grid when `None`).
pub fn normalize_auc(curve: &Curve, window: Option<&SubintervalSpec>) -> Result<Curve> {
    let (a, b) = match window {
        Some(w) => (w.r1, w.r2),
        None => (curve.grid().first(), curve.grid().last()),
    };
    let area = curve.integral(a, b)?;
    if area.abs() < 1e-12 {
        return Err(XcrError::ZeroArea { area });
    }
    curve.scaled(1.0 / area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcurve::Interp;
    use crate::simgen::latent_curve;

    fn sampled(start: f64, end: f64, step: f64, f: impl Fn(f64) -> f64) -> Curve {
        let g = Arc::new(Grid::uniform(start, end, step).unwrap());
        Curve::from_fn(g, Interp::Linear, f).unwrap()
    }

    #[test]
    fn linear_derivative_everywhere() {
        let c = sampled(0.0, 10.0, 0.1, |t| 3.0 * t);
        let d = estimate_derivative(&c, 0.5, c.grid().clone()).unwrap();
        for v in d.values() {
            assert!((v - 3.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn quadratic_derivative() {
        let c = sampled(0.0, 10.0, 0.1, |t| t * t);
        let out = Arc::new(Grid::new(vec![0.0, 2.0, 5.55, 10.0]).unwrap());
        let d = estimate_derivative(&c, 0.5, out.clone()).unwrap();
        for (x, v) in out.points().iter().zip(d.values()) {
            assert!((v - 2.0 * x).abs() < 1e-6, "t={x}: {v}");
        }
    }

    #[test]
    fn latent_curve_slope_at_peak() {
        // Z'(25) = -0.5: the bump is symmetric about 25.
        let c = sampled(0.0, 50.0, 0.5, latent_curve);
        let out = Arc::new(Grid::new(vec![24.0, 25.0, 26.0]).unwrap());
        let d = estimate_derivative(&c, 1.0, out).unwrap();
        assert!((d.values()[1] + 0.5).abs() < 0.05, "{}", d.values()[1]);
    }

    #[test]
    fn degenerate_window() {
        let c = sampled(0.0, 10.0, 1.0, |t| t);
        let out = Arc::new(Grid::new(vec![4.0, 5.0]).unwrap());
        assert!(matches!(
            estimate_derivative(&c, 0.05, out),
            Err(XcrError::DegenerateWindow { .. })
        ));
        assert!(estimate_derivative(&c, 0.0, c.grid().clone()).is_err());
    }

    #[test]
    fn normalize_constant() {
        // Area 20 on [0, 10], so the normalized level is 0.1.
        let c = sampled(0.0, 10.0, 0.5, |_| 2.0);
        let n = normalize_auc(&c, None).unwrap();
        for v in n.values() {
            assert!((v - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_rescales_to_unit_area_and_is_idempotent() {
        let c = sampled(0.0, 10.0, 0.25, |t| 4.0 / 10.0 + 0.1 * (t - 5.0));
        assert!((c.integral(0.0, 10.0).unwrap() - 4.0).abs() < 1e-12);
        let n = normalize_auc(&c, None).unwrap();
        assert!((n.integral(0.0, 10.0).unwrap() - 1.0).abs() < 1e-9);
        for (a, b) in n.values().iter().zip(c.values()) {
            assert!((a - b / 4.0).abs() < 1e-15);
        }
        let nn = normalize_auc(&n, None).unwrap();
        for (a, b) in nn.values().iter().zip(n.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_bumps_share_area() {
        let bump = |t: f64| {
            let u = t - 4.0;
            if u.abs() < 1.0 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        };
        let a = sampled(0.0, 10.0, 0.05, bump);
        let b = sampled(0.0, 10.0, 0.05, |t| bump(t - 1.0));
        let ia = a.integral(0.0, 10.0).unwrap();
        let ib = b.integral(0.0, 10.0).unwrap();
        assert!((ia - ib).abs() < 1e-12);
        let na = normalize_auc(&a, None).unwrap();
        let nb = normalize_auc(&b, None).unwrap();
        assert!((na.integral(0.0, 10.0).unwrap() - nb.integral(0.0, 10.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_area_rejected() {
        let c = sampled(0.0, 10.0, 0.5, |t| t - 5.0);
        assert!(matches!(normalize_auc(&c, None), Err(XcrError::ZeroArea { .. })));
    }
}
