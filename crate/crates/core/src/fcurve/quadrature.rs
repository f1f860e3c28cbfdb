use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    #[default]
    Trapezoid,
    Simpson,
}

/// Fixed nodes and weights of a composite rule on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNodes {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureNodes {
    /// Composite rule with `panels` equal subintervals. Simpson needs an even
    /// panel count; odd counts are bumped up by one.
    pub fn composite(a: f64, b: f64, rule: QuadRule, panels: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(XcrError::InvalidQuadrature(format!(
                "bounds must satisfy a < b, got [{a}, {b}]"
            )));
        }
        if panels < 2 {
            return Err(XcrError::InvalidQuadrature(format!(
                "resolution must be at least 2, got {panels}"
            )));
        }
        let panels = match rule {
            QuadRule::Simpson if panels % 2 == 1 => panels + 1,
            _ => panels,
        };
        let h = (b - a) / panels as f64;
        let mut nodes: Vec<f64> = (0..=panels).map(|i| a + i as f64 * h).collect();
        nodes[panels] = b;
        let weights = match rule {
            QuadRule::Trapezoid => (0..=panels)
                .map(|i| if i == 0 || i == panels { 0.5 * h } else { h })
                .collect(),
            QuadRule::Simpson => (0..=panels)
                .map(|i| {
                    let c = if i == 0 || i == panels {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * h / 3.0
                })
                .collect(),
        };
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of precomputed integrand values at the nodes.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Composite quadrature of `f` over `[a, b]`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rule: QuadRule,
    resolution: usize,
) -> Result<f64> {
    let q = QuadratureNodes::composite(a, b, rule, resolution)?;
    let mut total = 0.0;
    for (&t, &w) in q.nodes.iter().zip(&q.weights) {
        let v = f(t);
        if !v.is_finite() {
            return Err(XcrError::NonFinite { t });
        }
        total += w * v;
    }
    Ok(total)
}

/// How integrals over a window are discretized: a rule plus a density of
/// nodes relative to the data grid spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadrature {
    #[serde(default)]
    pub rule: QuadRule,
    #[serde(default = "default_nodes_per_interval")]
    pub nodes_per_interval: usize,
}

fn default_nodes_per_interval() -> usize {
    4
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            rule: QuadRule::Trapezoid,
            nodes_per_interval: default_nodes_per_interval(),
        }
    }
}

impl Quadrature {
    /// Nodes on `[a, b]` with `nodes_per_interval` panels per `spacing`.
    pub fn nodes(&self, a: f64, b: f64, spacing: f64) -> Result<QuadratureNodes> {
        if self.nodes_per_interval == 0 || !(spacing > 0.0) {
            return Err(XcrError::InvalidQuadrature(format!(
                "nodes_per_interval={} spacing={spacing}",
                self.nodes_per_interval
            )));
        }
        let panels = ((b - a) / spacing * self.nodes_per_interval as f64 - 1e-9).ceil() as usize;
        QuadratureNodes::composite(a, b, self.rule, panels.max(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_and_linear_integrands() {
        let v = integrate(|_| 1.0, 0.0, 1.0, QuadRule::Trapezoid, 100).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate(|t| t, 0.0, 2.0, QuadRule::Trapezoid, 100).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sine_squared_over_full_periods() {
        let v = integrate(|t| (PI * t / 5.0).sin().powi(2), 0.0, 10.0, QuadRule::Simpson, 400).unwrap();
        assert!((v - 5.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn simpson_exact_for_cubics_with_odd_resolution() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t;
        let exact = |t: f64| t - t * t + t * t * t / 6.0 + t.powi(4) / 16.0;
        let v = integrate(f, -1.0, 3.0, QuadRule::Simpson, 7).unwrap();
        let e = exact(3.0) - exact(-1.0);
        assert!(((v - e) / e).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(integrate(|_| 1.0, 1.0, 1.0, QuadRule::Trapezoid, 10).is_err());
        assert!(integrate(|_| 1.0, 0.0, 1.0, QuadRule::Trapezoid, 1).is_err());
        let e = integrate(|t| 1.0 / (t - 0.5), 0.0, 1.0, QuadRule::Trapezoid, 2).unwrap_err();
        assert!(matches!(e, XcrError::NonFinite { t } if t == 0.5));
    }

    #[test]
    fn window_nodes_follow_grid_density() {
        let q = Quadrature::default().nodes(10.0, 40.0, 0.5).unwrap();
        assert_eq!(q.len(), 241);
        assert_eq!(q.nodes[240], 40.0);
        let total: f64 = q.weights.iter().sum();
        assert!((total - 30.0).abs() < 1e-12);
    }
}
