//! Functional principal component analysis for densely sampled curves on a
//! common grid.
//!
//! The covariance operator is discretized with trapezoidal weights `W`; the
//! symmetric problem `W^{1/2} C W^{1/2} v = lambda v` is solved and
//! eigenfunctions are recovered as `phi = W^{-1/2} v`, which makes them
//! orthonormal under the weighted inner product.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Result, XcrError};
use crate::fcurve::{Curve, Grid, Interp, Quadrature, SubintervalSpec};

#[derive(Debug, Clone)]
pub struct FpcaModel {
    grid: Arc<Grid>,
    mean: Curve,
    eigenfunctions: Vec<Curve>,
    eigenvalues: Vec<f64>,
    quad_weights: Vec<f64>,
    total_variance: f64,
}

/// Serializable snapshot of a fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct FpcaExport<'a> {
    pub grid: &'a [f64],
    pub mean: &'a [f64],
    pub eigenvalues: &'a [f64],
    pub eigenfunctions: Vec<&'a [f64]>,
}

impl FpcaModel {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mean(&self) -> &Curve {
        &self.mean
    }

    pub fn eigenfunctions(&self) -> &[Curve] {
        &self.eigenfunctions
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn k(&self) -> usize {
        self.eigenfunctions.len()
    }

    /// Integrated pointwise sample variance, i.e. the sum of all eigenvalues.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.quad_weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    fn check_grid(&self, curve: &Curve) -> Result<()> {
        if curve.grid().approx_eq(&self.grid) {
            Ok(())
        } else {
            Err(XcrError::GridMismatch)
        }
    }

    /// Scores of the first `k` components.
    pub fn scores(&self, curve: &Curve, k: usize) -> Result<Vec<f64>> {
        self.check_grid(curve)?;
        self.check_k(k)?;
        let centered: Vec<f64> = curve
            .values()
            .iter()
            .zip(self.mean.values())
            .map(|(x, m)| x - m)
            .collect();
        Ok(self.eigenfunctions[..k]
            .iter()
            .map(|phi| self.inner(&centered, phi.values()))
            .collect())
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k() {
            return Err(XcrError::InvalidArgument(format!(
                "number of components must be in 1..={}, got {k}",
                self.k()
            )));
        }
        Ok(())
    }

    pub fn export(&self) -> FpcaExport<'_> {
        FpcaExport {
            grid: self.grid.points(),
            mean: self.mean.values(),
            eigenvalues: &self.eigenvalues,
            eigenfunctions: self.eigenfunctions.iter().map(Curve::values).collect(),
        }
    }
}

/// Fits the top-`k` components to curves sharing one grid.
pub fn fit_fpca(curves: &[Curve], k: usize) -> Result<FpcaModel> {
    if curves.len() < 2 {
        return Err(XcrError::InsufficientData(format!(
            "FPCA needs at least 2 curves, got {}",
            curves.len()
        )));
    }
    let grid = curves[0].grid().clone();
    let m = grid.len();
    if k == 0 || k > m {
        return Err(XcrError::InvalidArgument(format!(
            "number of components must be in 1..={m}, got {k}"
        )));
    }
    if curves.iter().any(|c| !c.grid().approx_eq(&grid)) {
        return Err(XcrError::GridMismatch);
    }
    let n = curves.len();
    let mut mean = vec![0.0; m];
    for c in curves {
        for (acc, v) in mean.iter_mut().zip(c.values()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }

    // Centered data as an m x n matrix; covariance = D D^T / (n - 1).
    let mut d = DMatrix::<f64>::zeros(m, n);
    for (col, c) in curves.iter().enumerate() {
        for (row, (v, mu)) in c.values().iter().zip(&mean).enumerate() {
            d[(row, col)] = v - mu;
        }
    }
    let weights = grid.trapezoid_weights();
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    for (row, s) in sqrt_w.iter().enumerate() {
        d.row_mut(row).scale_mut(*s);
    }
    let mut op = &d * d.transpose();
    op /= (n - 1) as f64;
    let total_variance = op.trace();

    let eig = SymmetricEigen::new(op);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let interp = curves[0].interp();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfunctions = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        let mut phi: Vec<f64> = eig
            .eigenvectors
            .column(idx)
            .iter()
            .zip(&sqrt_w)
            .map(|(v, s)| v / s)
            .collect();
        // Canonical sign: the largest-magnitude node is positive.
        let peak = phi
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if peak < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        eigenfunctions.push(Curve::new(grid.clone(), phi, interp)?);
    }
    Ok(FpcaModel {
        mean: Curve::new(grid.clone(), mean, interp)?,
        grid,
        eigenfunctions,
        eigenvalues,
        quad_weights: weights,
        total_variance,
    })
}

/// `mean + sum_{k' <= k} score_k' phi_k'`.
pub fn reconstruct(model: &FpcaModel, curve: &Curve, k: usize) -> Result<Curve> {
    let scores = model.scores(curve, k)?;
    let mut values = model.mean.values().to_vec();
    for (s, phi) in scores.iter().zip(&model.eigenfunctions) {
        for (v, f) in values.iter_mut().zip(phi.values()) {
            *v += s * f;
        }
    }
    Curve::new(model.grid.clone(), values, curve.interp())
}

/// Integrated mean squared error `(1/n) sum_i int (X_i - Xhat_i)^2` over the
/// window (the whole grid when `None`).
pub fn imse(originals: &[Curve], fits: &[Curve], window: Option<&SubintervalSpec>) -> Result<f64> {
    if originals.len() != fits.len() || originals.is_empty() {
        return Err(XcrError::InvalidArgument(format!(
            "imse needs matched non-empty lists, got {} and {}",
            originals.len(),
            fits.len()
        )));
    }
    let grid = originals[0].grid();
    if originals.iter().chain(fits).any(|c| !c.grid().approx_eq(grid)) {
        return Err(XcrError::GridMismatch);
    }
    let (a, b) = match window {
        Some(w) => (w.r1, w.r2),
        None => (grid.first(), grid.last()),
    };
    let q = Quadrature::default().nodes(a, b, grid.median_spacing())?;
    let locs: Vec<_> = q
        .nodes
        .iter()
        .map(|&t| {
            originals[0].check_domain(t)?;
            Ok(grid.locate(t))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for (x, f) in originals.iter().zip(fits) {
        let sq: Vec<f64> = locs
            .iter()
            .map(|&l| {
                let d = x.evaluate_at(l) - f.evaluate_at(l);
                d * d
            })
            .collect();
        total += q.apply(&sq);
    }
    Ok(total / originals.len() as f64)
}

/// Convenience: curves from raw rows on a shared grid.
pub fn curves_from_rows(grid: Arc<Grid>, rows: Vec<Vec<f64>>, interp: Interp) -> Result<Vec<Curve>> {
    rows.into_iter().map(|v| Curve::new(grid.clone(), v, interp)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Arc::new(Grid::uniform(0.0, 1.0, 0.01).unwrap())
    }

    #[test]
    fn identical_curves_have_zero_variance() {
        let g = grid();
        let c = Curve::from_fn(g.clone(), Interp::Linear, |t| t * t).unwrap();
        let m = fit_fpca(&[c.clone(), c.clone(), c.clone()], 2).unwrap();
        assert!(m.eigenvalues().iter().all(|&l| l.abs() < 1e-12));
        for (a, b) in m.mean().values().iter().zip(c.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = reconstruct(&m, &c, 1).unwrap();
        for (a, b) in r.values().iter().zip(c.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn contract_errors() {
        let g = grid();
        let c = Curve::from_fn(g.clone(), Interp::Linear, |t| t).unwrap();
        assert!(matches!(fit_fpca(std::slice::from_ref(&c), 1), Err(XcrError::InsufficientData(_))));
        let m = fit_fpca(&[c.clone(), c.scaled(2.0).unwrap()], 1).unwrap();
        assert!(reconstruct(&m, &c, 0).is_err());
        assert!(reconstruct(&m, &c, 2).is_err());
        let other = Arc::new(Grid::uniform(0.0, 1.0, 0.02).unwrap());
        let d = Curve::from_fn(other, Interp::Linear, |t| t).unwrap();
        assert!(matches!(reconstruct(&m, &d, 1), Err(XcrError::GridMismatch)));
        assert!(matches!(imse(std::slice::from_ref(&c), &[d], None), Err(XcrError::GridMismatch)));
    }

    #[test]
    fn imse_of_constant_error() {
        let g = grid();
        let a = Curve::from_fn(g.clone(), Interp::Linear, |t| t.sin()).unwrap();
        let b = Curve::from_fn(g, Interp::Linear, |t| t.sin() + 0.3).unwrap();
        assert_eq!(imse(std::slice::from_ref(&a), std::slice::from_ref(&a), None).unwrap(), 0.0);
        let w = SubintervalSpec::new(0.2, 0.7, 0.0, 1.0).unwrap();
        let v = imse(&[a.clone(), a], &[b.clone(), b], Some(&w)).unwrap();
        assert!((v - 0.09 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_reconstructs_to_mean() {
        let g = grid();
        let cs: Vec<Curve> = (0..5)
            .map(|i| Curve::from_fn(g.clone(), Interp::Linear, |t| (t * i as f64).cos()).unwrap())
            .collect();
        let m = fit_fpca(&cs, 3).unwrap();
        let r = reconstruct(&m, m.mean(), 3).unwrap();
        assert_eq!(r.values(), m.mean().values());
    }
}
