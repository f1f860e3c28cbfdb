//! Synthetic shift-warped multivariate curves.
//!
//! Random draws come from ChaCha20 (`rand_chacha` 0.9). Subject `i` uses the
//! stream `i` of a generator seeded with the configured seed, so output is
//! identical regardless of how subjects are scheduled across threads.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};
use crate::fcurve::{
    default_component_names, default_subject_ids, Curve, Grid, Interp, MultiCurveSample, SubintervalSpec,
};

/// Common latent shape `Z(t) = 20 - t/2 + 30 exp(-(t - 25)^2 / 72)`.
pub fn latent_curve(t: f64) -> f64 {
    20.0 - 0.5 * t + 30.0 * (-(t - 25.0).powi(2) / 72.0).exp()
}

/// Period-10 amplitude-noise profile `sin(pi t / 5)`.
pub fn amplitude_profile(t: f64) -> f64 {
    (PI * t / 5.0).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 50.0,
            step: 0.5,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::uniform(self.start, self.end, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n: usize,
    pub theta: Vec<f64>,
    /// Variance of the per-curve time jitter.
    pub sigma2_eta: f64,
    /// Variance of the per-curve sinusoid amplitude.
    pub sigma2_zeta: f64,
    /// Variance of the per-node measurement error.
    pub sigma2_e: f64,
    pub grid: GridSpec,
    pub window: [f64; 2],
    pub seed: u64,
    pub interp: Interp,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            theta: vec![-5.0, -2.5, 2.5, 5.0],
            sigma2_eta: 0.25,
            sigma2_zeta: 25.0,
            sigma2_e: 1.0,
            grid: GridSpec::default(),
            window: [10.0, 40.0],
            seed: 1,
            interp: Interp::Linear,
        }
    }
}

impl SimConfig {
    /// A copy with all noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            sigma2_eta: 0.0,
            sigma2_zeta: 0.0,
            sigma2_e: 0.0,
            ..self.clone()
        }
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(XcrError::InvalidArgument("n must be positive".into()));
        }
        check_theta_sum(&self.theta)?;
        for (name, v) in [
            ("sigma2_eta", self.sigma2_eta),
            ("sigma2_zeta", self.sigma2_zeta),
            ("sigma2_e", self.sigma2_e),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(XcrError::InvalidArgument(format!("{name} must be a finite variance >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn window_spec(&self) -> Result<SubintervalSpec> {
        let g = self.grid.build()?;
        SubintervalSpec::new(self.window[0], self.window[1], g.first(), g.last())
    }
}

fn check_theta_sum(theta: &[f64]) -> Result<()> {
    if theta.len() < 2 {
        return Err(XcrError::InvalidArgument(format!(
            "need at least 2 components, got {}",
            theta.len()
        )));
    }
    let sum: f64 = theta.iter().sum();
    if theta.iter().any(|t| !t.is_finite()) || sum.abs() > 1e-10 {
        return Err(XcrError::InvalidArgument(format!("shifts must sum to zero, sum = {sum}")));
    }
    Ok(())
}

/// Contaminated sample together with its noise-free counterpart.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub observed: MultiCurveSample,
    /// `Z(t - theta_j)` for every subject and component.
    pub truth: MultiCurveSample,
    pub theta: Vec<f64>,
}

fn subject_rng(seed: u64, subject: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64);
    rng
}

fn normal(rng: &mut ChaCha20Rng, variance: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    variance.sqrt() * z
}

/// Curves `X_ij(t_k) = Z(t_k - theta_j + eta_ij) + zeta_ij sin(pi t_k / 5) + e_ijk`.
///
/// Per subject the draws are taken in the order: all `eta_ij`, all `zeta_ij`,
/// then `e_ijk` component by component.
pub fn generate_contaminated(config: &SimConfig) -> Result<SimSample> {
    config.validate()?;
    let grid = Arc::new(config.grid.build()?);
    let p = config.p();
    let t = grid.points();
    let profile: Vec<f64> = t.iter().map(|&x| amplitude_profile(x)).collect();

    let rows: Vec<Vec<Vec<f64>>> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(config.seed, i);
            let eta: Vec<f64> = (0..p).map(|_| normal(&mut rng, config.sigma2_eta)).collect();
            let zeta: Vec<f64> = (0..p).map(|_| normal(&mut rng, config.sigma2_zeta)).collect();
            (0..p)
                .map(|j| {
                    t.iter()
                        .zip(&profile)
                        .map(|(&tk, &s)| {
                            let e = normal(&mut rng, config.sigma2_e);
                            latent_curve(tk - config.theta[j] + eta[j]) + zeta[j] * s + e
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let observed = build(grid.clone(), rows, config.interp)?;

    let truth_row: Vec<Vec<f64>> = config
        .theta
        .iter()
        .map(|&th| t.iter().map(|&tk| latent_curve(tk - th)).collect())
        .collect();
    let truth = build(grid, vec![truth_row; config.n], config.interp)?;
    Ok(SimSample {
        observed,
        truth,
        theta: config.theta.clone(),
    })
}

/// Pure shift model: component `j` of subject `i` is `Z_i(t - theta_j)`.
///
/// With `subject_shift_variance`, `Z_i(t) = latent(t - theta_i)` for a
/// subject-level shift `theta_i ~ N(0, variance)`; otherwise `Z_i = latent`.
pub fn generate_pure_shift(
    n: usize,
    theta: &[f64],
    latent: &(dyn Fn(f64) -> f64 + Sync),
    grid: Arc<Grid>,
    subject_shift_variance: Option<f64>,
    seed: u64,
) -> Result<MultiCurveSample> {
    check_theta_sum(theta)?;
    if n == 0 {
        return Err(XcrError::InvalidArgument("n must be positive".into()));
    }
    if let Some(v) = subject_shift_variance {
        if !(v >= 0.0) {
            return Err(XcrError::InvalidArgument(format!("subject shift variance {v} < 0")));
        }
    }
    let rows: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = match subject_shift_variance {
                Some(v) => normal(&mut subject_rng(seed, i), v),
                None => 0.0,
            };
            theta
                .iter()
                .map(|&th| grid.points().iter().map(|&t| latent(t - th - own)).collect())
                .collect()
        })
        .collect();
    build(grid, rows, Interp::Linear)
}

fn build(grid: Arc<Grid>, rows: Vec<Vec<Vec<f64>>>, interp: Interp) -> Result<MultiCurveSample> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let subjects = rows
        .into_iter()
        .map(|r| r.into_iter().map(|v| Curve::new(grid.clone(), v, interp)).collect())
        .collect::<Result<Vec<_>>>()?;
    MultiCurveSample::new(grid, subjects, default_component_names(p), default_subject_ids(n))
}
