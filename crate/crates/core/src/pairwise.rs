//! Bivariate registration: the mean L2 criterion between component `j` and
//! a shifted component `k`, and its minimization over admissible shifts.
//!
//! For shift `tau` the criterion is
//!
//! ```text
//! L(tau) = (1/n) sum_i  int_{r1}^{r2} ( X_ij(t) - X_ik(t - tau) )^2 dt
//! ```
//!
//! Quadrature nodes are fixed in `t`, so `L` is continuous in `tau` and every
//! subject shares the same interpolation locations for a given shift.

use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};
use crate::fcurve::{GridLocation, MultiCurveSample, Quadrature, QuadratureNodes, SubintervalSpec};

/// Coarse-scan minima within this (scaled) gap of the best are reported as
/// competing modes.
const MULTIMODAL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizerOpts {
    /// Spacing of the coarse scan; the median grid spacing when unset.
    #[serde(default)]
    pub coarse_step: Option<f64>,
    /// Width of the final golden-section bracket, in time units.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    200
}

impl Default for MinimizerOpts {
    fn default() -> Self {
        Self {
            coarse_step: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// Result of one pairwise registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseShift {
    pub j: usize,
    pub k: usize,
    pub tau_hat: f64,
    pub criterion_at_min: f64,
    /// Every `(tau, L(tau))` evaluated, coarse scan first.
    pub search_trace: Vec<(f64, f64)>,
    /// The estimate sits on an end of the admissible range.
    pub censored: bool,
    /// Other coarse-scan local minima whose value is within the multimodality
    /// gap of the best.
    pub competing_minima: Vec<f64>,
    pub shift_range: (f64, f64),
}

impl PairwiseShift {
    pub fn is_multimodal(&self) -> bool {
        !self.competing_minima.is_empty()
    }
}

/// The sample criterion for one ordered component pair `(j, k)`.
#[derive(Debug, Clone)]
pub struct PairwiseCriterion<'a> {
    sample: &'a MultiCurveSample,
    j: usize,
    k: usize,
    window: SubintervalSpec,
    quad: QuadratureNodes,
    // X_ij at the quadrature nodes, row-major by subject.
    target: Vec<f64>,
    range: (f64, f64),
}

impl<'a> PairwiseCriterion<'a> {
    pub fn new(
        sample: &'a MultiCurveSample,
        j: usize,
        k: usize,
        window: SubintervalSpec,
        quadrature: Quadrature,
    ) -> Result<Self> {
        let p = sample.p();
        if j == k || j >= p || k >= p {
            return Err(XcrError::InvalidArgument(format!(
                "component pair ({j}, {k}) invalid for p = {p}"
            )));
        }
        let range = window.shift_range()?;
        for c in sample.component(j) {
            c.check_domain(window.r1).and(c.check_domain(window.r2)).map_err(|_| window_err(&window, "window leaves the domain of component j"))?;
        }
        for c in sample.component(k) {
            c.check_domain(window.t0).and(c.check_domain(window.tmax)).map_err(|_| window_err(&window, "domain bounds leave the domain of component k"))?;
        }
        let quad = quadrature.nodes(window.r1, window.r2, sample.grid().median_spacing())?;
        let mut target = Vec::with_capacity(sample.n() * quad.len());
        for c in sample.component(j) {
            for &t in &quad.nodes {
                target.push(c.evaluate(t)?);
            }
        }
        Ok(Self {
            sample,
            j,
            k,
            window,
            quad,
            target,
            range,
        })
    }

    pub fn components(&self) -> (usize, usize) {
        (self.j, self.k)
    }

    pub fn window(&self) -> &SubintervalSpec {
        &self.window
    }

    /// Admissible shift range `(lo, hi)`.
    pub fn shift_range(&self) -> (f64, f64) {
        self.range
    }

    /// `L(tau)`.
    pub fn value(&self, tau: f64) -> Result<f64> {
        let (lo, hi) = self.range;
        let slack = 1e-9 * (hi - lo);
        if !tau.is_finite() || tau < lo - slack || tau > hi + slack {
            return Err(XcrError::ShiftOutOfRange {
                component: self.k,
                shift: tau,
                lo,
                hi,
            });
        }
        let grid = self.sample.grid();
        let locs: Vec<GridLocation> = self.quad.nodes.iter().map(|&t| grid.locate(t - tau)).collect();
        let m = self.quad.len();
        let mut total = 0.0;
        for (i, curve) in self.sample.component(self.k).enumerate() {
            let a = &self.target[i * m..(i + 1) * m];
            let mut s = 0.0;
            for ((&w, &ai), &loc) in self.quad.weights.iter().zip(a).zip(&locs) {
                let d = ai - curve.evaluate_at(loc);
                s += w * d * d;
            }
            total += s;
        }
        Ok(total / self.sample.n() as f64)
    }

    /// Coarse scan over the admissible range followed by golden-section
    /// refinement of the best bracket.
    pub fn estimate(&self, opts: &MinimizerOpts) -> Result<PairwiseShift> {
        let (lo, hi) = self.range;
        if !(lo < hi) {
            return Err(XcrError::RangeDegenerate { lo, hi });
        }
        let step = opts.coarse_step.unwrap_or_else(|| self.sample.grid().median_spacing());
        if !(step > 0.0) || !(opts.tol > 0.0) {
            return Err(XcrError::InvalidArgument(format!(
                "coarse_step and tol must be positive (got {step}, {})",
                opts.tol
            )));
        }

        let taus = coarse_points(lo, hi, step);
        let mut trace = Vec::with_capacity(taus.len() + 64);
        let mut vals = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let v = self.value(tau)?;
            trace.push((tau, v));
            vals.push(v);
        }
        let best_v = vals
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        if !best_v.is_finite() {
            return Err(XcrError::NoMinimum);
        }
        let tie = 1e-12 * best_v.abs();
        let best = (0..taus.len())
            .filter(|&i| vals[i] <= best_v + tie)
            .min_by(|&a, &b| taus[a].abs().total_cmp(&taus[b].abs()))
            .expect("at least one finite value");

        let gap = MULTIMODAL_GAP * best_v.abs().max(1.0);
        let competing_minima = (0..taus.len())
            .filter(|&i| i + 1 < best || i > best + 1)
            .filter(|&i| {
                let left = i == 0 || vals[i] <= vals[i - 1];
                let right = i + 1 == taus.len() || vals[i] <= vals[i + 1];
                left && right && vals[i] <= best_v + gap
            })
            .map(|i| taus[i])
            .collect();

        let a = taus[best.saturating_sub(1)];
        let b = taus[(best + 1).min(taus.len() - 1)];
        let (mut tau_hat, mut crit) = (taus[best], vals[best]);
        if b > a {
            let (x, fx) = golden_section(
                |x| {
                    let v = self.value(x)?;
                    trace.push((x, v));
                    Ok(v)
                },
                a,
                b,
                opts.tol,
                opts.max_iter,
            )?;
            if fx < crit {
                tau_hat = x;
                crit = fx;
            }
        }
        let censored = (tau_hat - lo).abs() <= opts.tol || (hi - tau_hat).abs() <= opts.tol;
        Ok(PairwiseShift {
            j: self.j,
            k: self.k,
            tau_hat,
            criterion_at_min: crit.max(0.0),
            search_trace: trace,
            censored,
            competing_minima,
            shift_range: self.range,
        })
    }
}

fn window_err(w: &SubintervalSpec, reason: &str) -> XcrError {
    XcrError::InvalidWindow {
        r1: w.r1,
        r2: w.r2,
        t0: w.t0,
        tmax: w.tmax,
        reason: reason.into(),
    }
}

/// Scan points `lo, ..., -step, 0, step, ..., hi`: a lattice through zero
/// plus both range ends.
fn coarse_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let eps = 1e-9 * step;
    let mut pts = vec![lo];
    let m_lo = (lo / step).ceil() as i64;
    let m_hi = (hi / step).floor() as i64;
    for m in m_lo..=m_hi {
        let t = m as f64 * step;
        if t > lo + eps && t < hi - eps {
            pts.push(t);
        }
    }
    pts.push(hi);
    pts
}

/// Golden-section minimization on `[a, b]` until the bracket is narrower than
/// `tol`. Returns the best point seen.
pub fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iter = 0;
    while b - a > tol && iter < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        iter += 1;
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    let best = [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .min_by(|x, y| x.1.total_cmp(&y.1));
    best.ok_or(XcrError::NoMinimum)
}

pub fn criterion_value(c: &PairwiseCriterion<'_>, tau: f64) -> Result<f64> {
    c.value(tau)
}

pub fn estimate_pairwise_shift(c: &PairwiseCriterion<'_>, opts: &MinimizerOpts) -> Result<PairwiseShift> {
    c.estimate(opts)
}

/// Estimates `(tau_jk, tau_kj)` from the two orientations of one pair.
pub fn antisymmetry_check(
    c_jk: &PairwiseCriterion<'_>,
    c_kj: &PairwiseCriterion<'_>,
    opts: &MinimizerOpts,
) -> Result<(f64, f64)> {
    if c_jk.components() != (c_kj.components().1, c_kj.components().0) {
        return Err(XcrError::InvalidArgument(
            "antisymmetry check needs the same pair in swapped roles".into(),
        ));
    }
    Ok((c_jk.estimate(opts)?.tau_hat, c_kj.estimate(opts)?.tau_hat))
}
