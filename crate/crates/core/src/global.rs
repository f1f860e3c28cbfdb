//! Global cross-component registration.
//!
//! Pairwise shifts satisfy `tau_jk = theta_j - theta_k`. Stacking all pairs
//! `j < k` with a trailing zero gives `tau* = A theta`, where the final all-ones
//! row of `A` carries the sum-zero identification constraint. `theta` is then
//! recovered by ordinary least squares.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};
use crate::fcurve::{Curve, Grid, MultiCurveSample, Quadrature, SubintervalSpec};
use crate::pairwise::{MinimizerOpts, PairwiseCriterion, PairwiseShift};
use std::sync::Arc;

/// Pairs `(j, k)` with `j < k` in lexicographic order.
pub fn component_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |j| (j + 1..p).map(move |k| (j, k)))
}

pub fn pair_count(p: usize) -> usize {
    p * (p.saturating_sub(1)) / 2
}

/// The contrast matrix `A`: one `+1/-1` row per pair, then a row of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    p: usize,
    rows: DMatrix<f64>,
}

impl ContrastMatrix {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(XcrError::InvalidArgument(format!("need p >= 2, got {p}")));
        }
        let m = pair_count(p) + 1;
        let mut rows = DMatrix::zeros(m, p);
        for (r, (j, k)) in component_pairs(p).enumerate() {
            rows[(r, j)] = 1.0;
            rows[(r, k)] = -1.0;
        }
        rows.row_mut(m - 1).fill(1.0);
        let a = Self { p, rows };
        debug_assert_eq!(a.rank(), p);
        Ok(a)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rows.clone().svd(false, false).rank(1e-10)
    }

    /// Row `r` as a plain vector.
    pub fn row(&self, r: usize) -> Vec<f64> {
        self.rows.row(r).iter().copied().collect()
    }

    /// `A theta`.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        (&self.rows * DVector::from_column_slice(theta)).iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalShiftResult {
    pub theta_hat: Vec<f64>,
    /// Pairwise estimates followed by the stacked zero.
    pub tau_hat_stacked: Vec<f64>,
    /// `tau_hat_stacked - A theta_hat`.
    pub residuals: Vec<f64>,
    pub component_names: Vec<String>,
}

/// Least-squares global shifts from pairwise shifts ordered as
/// [`component_pairs`].
pub fn solve_global_shifts(tau_pairs: &[f64], p: usize) -> Result<GlobalShiftResult> {
    let a = ContrastMatrix::new(p)?;
    if tau_pairs.len() != pair_count(p) {
        return Err(XcrError::InvalidArgument(format!(
            "expected {} pairwise shifts for p = {p}, got {}",
            pair_count(p),
            tau_pairs.len()
        )));
    }
    if let Some(t) = tau_pairs.iter().find(|t| !t.is_finite()) {
        return Err(XcrError::NonFinite { t: *t });
    }
    let mut stacked = tau_pairs.to_vec();
    stacked.push(0.0);
    let y = DVector::from_column_slice(&stacked);
    let at = a.matrix().transpose();
    let normal = &at * a.matrix();
    let rhs = &at * &y;
    let theta = normal
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| XcrError::InvalidArgument("contrast matrix is rank deficient".into()))?;
    let residuals = (&y - a.matrix() * &theta).iter().copied().collect();
    Ok(GlobalShiftResult {
        theta_hat: theta.iter().copied().collect(),
        tau_hat_stacked: stacked,
        residuals,
        component_names: crate::fcurve::default_component_names(p),
    })
}

/// Pairwise and global estimates for one sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Registration {
    pub window: SubintervalSpec,
    pub pairs: Vec<PairwiseShift>,
    pub global: GlobalShiftResult,
}

impl Registration {
    pub fn theta_hat(&self) -> &[f64] {
        &self.global.theta_hat
    }

    pub fn any_censored(&self) -> bool {
        self.pairs.iter().any(|p| p.censored)
    }

    pub fn any_multimodal(&self) -> bool {
        self.pairs.iter().any(|p| p.is_multimodal())
    }
}

/// Estimates every pairwise shift (in parallel) and solves for the global
/// shift vector.
pub fn register(
    sample: &MultiCurveSample,
    window: SubintervalSpec,
    quadrature: Quadrature,
    opts: &MinimizerOpts,
) -> Result<Registration> {
    let pairs: Vec<(usize, usize)> = component_pairs(sample.p()).collect();
    let pairs = pairs
        .par_iter()
        .map(|&(j, k)| PairwiseCriterion::new(sample, j, k, window, quadrature)?.estimate(opts))
        .collect::<Result<Vec<_>>>()?;
    let taus: Vec<f64> = pairs.iter().map(|s| s.tau_hat).collect();
    let mut global = solve_global_shifts(&taus, sample.p())?;
    global.component_names = sample.component_names().to_vec();
    Ok(Registration { window, pairs, global })
}

fn check_theta(theta: &[f64], p: usize) -> Result<()> {
    if theta.len() != p {
        return Err(XcrError::InvalidArgument(format!(
            "shift vector has {} entries for {p} components",
            theta.len()
        )));
    }
    if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
        return Err(XcrError::NonFinite { t: *t });
    }
    Ok(())
}

/// Grid on which all components shifted by `theta` are defined: the
/// intersection of `[first - theta_j, last - theta_j]`, laid on the lattice of
/// the original grid spacing.
pub fn aligned_grid(grid: &Grid, theta: &[f64]) -> Result<Grid> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = grid.first() - min;
    let hi = grid.last() - max;
    let h = grid.median_spacing();
    let eps = 1e-9 * h;
    let m0 = ((lo - grid.first()) / h - 1e-9).ceil() as i64;
    let m1 = ((hi - grid.first()) / h + 1e-9).floor() as i64;
    let points: Vec<f64> = (m0..=m1)
        .map(|m| grid.first() + m as f64 * h)
        .filter(|&t| t >= lo - eps && t <= hi + eps)
        .collect();
    if points.len() < 2 {
        let (worst, _) = theta
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty theta");
        return Err(XcrError::ShiftOutOfRange {
            component: worst,
            shift: theta[worst],
            lo: -grid.span(),
            hi: grid.span(),
        });
    }
    // Use the original nodes where they coincide so a zero shift is exact.
    let snapped = points
        .into_iter()
        .map(|t| {
            grid.points()
                .iter()
                .copied()
                .find(|g| (g - t).abs() <= eps)
                .unwrap_or(t)
        })
        .collect();
    Grid::new(snapped)
}

/// Replaces component `j` of every subject by `t -> X_ij(t + theta_j)` on the
/// common aligned grid. When a window is given, each shifted window
/// `[r1 + theta_j, r2 + theta_j]` must stay inside the data domain.
pub fn apply_shifts(
    sample: &MultiCurveSample,
    theta: &[f64],
    window: Option<&SubintervalSpec>,
) -> Result<MultiCurveSample> {
    check_theta(theta, sample.p())?;
    if let Some(w) = window {
        check_window_shifts(sample.subject(0), theta, w)?;
    }
    let out = Arc::new(aligned_grid(sample.grid(), theta)?);
    let subjects = (0..sample.n())
        .into_par_iter()
        .map(|i| {
            sample
                .subject(i)
                .iter()
                .zip(theta)
                .map(|(c, &th)| c.shifted(th, out.clone()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MultiCurveSample::new(
        out,
        subjects,
        sample.component_names().to_vec(),
        sample.subject_ids().to_vec(),
    )
}

fn check_window_shifts(curves: &[Curve], theta: &[f64], w: &SubintervalSpec) -> Result<()> {
    for (j, (c, &th)) in curves.iter().zip(theta).enumerate() {
        if !(c.contains(w.r1 + th) && c.contains(w.r2 + th)) {
            let (d0, d1) = c.domain();
            return Err(XcrError::ShiftOutOfRange {
                component: j,
                shift: th,
                lo: d0 - w.r1,
                hi: d1 - w.r2,
            });
        }
    }
    Ok(())
}

/// Total cross-component distance of one subject:
/// `sum_{j<k} int_I ( X_j(t + theta_j) - X_k(t + theta_k) )^2 dt`.
pub fn cross_component_distance(
    curves: &[Curve],
    theta: &[f64],
    window: &SubintervalSpec,
    quadrature: Quadrature,
) -> Result<f64> {
    check_theta(theta, curves.len())?;
    check_window_shifts(curves, theta, window)?;
    let spacing = curves[0].grid().median_spacing();
    let q = quadrature.nodes(window.r1, window.r2, spacing)?;
    let at_nodes = curves
        .iter()
        .zip(theta)
        .map(|(c, &th)| q.nodes.iter().map(|&t| c.evaluate(t + th)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (j, k) in component_pairs(curves.len()) {
        let d: Vec<f64> = at_nodes[j]
            .iter()
            .zip(&at_nodes[k])
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        total += q.apply(&d);
    }
    Ok(total)
}
