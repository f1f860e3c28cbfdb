//! Monte Carlo experiment harnesses.
//!
//! Every study produces an [`ExperimentReport`] holding one
//! [`ReplicationRecord`] per replication. The summary stored in a report is
//! always produced by the matching `summarize_*` function from those records,
//! so it can be recomputed from a saved report.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};
use crate::fcurve::{Curve, Grid, MultiCurveSample, Quadrature, SubintervalSpec};
use crate::fpca::{fit_fpca, imse, reconstruct};
use crate::global::{apply_shifts, cross_component_distance, register};
use crate::pairwise::MinimizerOpts;
use crate::simgen::{generate_contaminated, SimConfig, SimSample};
use crate::stats;

/// SplitMix64 mix of a base seed with two indices.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ a) ^ b.rotate_left(32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub label: String,
    pub index: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub config: serde_json::Value,
    pub replications: Vec<ReplicationRecord>,
    pub summary: serde_json::Value,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.replications.iter().filter(|r| r.error.is_some()).count()
    }
}

fn record(
    label: String,
    index: usize,
    seed: u64,
    fixed: &[(&str, f64)],
    outcome: Result<Vec<(String, f64)>>,
) -> ReplicationRecord {
    let mut metrics: BTreeMap<String, f64> = fixed.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let error = match outcome {
        Ok(values) => {
            metrics.extend(values);
            None
        }
        Err(e) => Some(format!("{}: {e}", e.code())),
    };
    ReplicationRecord {
        label,
        index,
        seed,
        metrics,
        error,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

// ---------------------------------------------------------------------------
// IMSE study

/// What both arms' reconstructions are scored against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImseReference {
    /// The contaminated curves that were fitted.
    #[default]
    Observed,
    /// The noise-free `Z(t - theta_j)`.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImseStudyConfig {
    /// Base configuration; its noise variances are overridden per cell.
    pub sim: SimConfig,
    pub sigma2_eta: Vec<f64>,
    pub sigma2_zeta: Vec<f64>,
    pub replications: usize,
    /// Number of eigenfunctions used in both arms.
    pub components: usize,
    pub reference: ImseReference,
    pub quadrature: Quadrature,
    pub minimizer: MinimizerOpts,
}

impl Default for ImseStudyConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            sigma2_eta: vec![0.25, 0.5, 1.0, 2.0],
            sigma2_zeta: vec![25.0],
            replications: 100,
            components: 2,
            reference: ImseReference::Observed,
            quadrature: Quadrature::default(),
            minimizer: MinimizerOpts::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImseOutcome {
    pub naive: f64,
    pub xcr: f64,
    pub percent_decrease: f64,
    pub theta_hat: Vec<f64>,
}

/// Grid points of `grid` inside `window` where every component of a curve
/// living on `aligned` can be shifted back by `theta`.
fn score_grid(grid: &Grid, aligned: &Grid, theta: &[f64], window: &SubintervalSpec) -> Result<Arc<Grid>> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let lo = window.r1.max(aligned.first() + max);
    let hi = window.r2.min(aligned.last() + min);
    let pts: Vec<f64> = grid.points_within(lo, hi).collect();
    if pts.len() < 2 {
        return Err(XcrError::InsufficientData(format!(
            "scoring interval [{lo}, {hi}] holds fewer than 2 grid points"
        )));
    }
    Ok(Arc::new(Grid::new(pts)?))
}

/// One replication: pooled FPCA on the raw curves versus pooled FPCA on the
/// registered curves, each reconstruction scored on the window.
pub fn imse_replication(
    sim: &SimSample,
    window: SubintervalSpec,
    quadrature: Quadrature,
    opts: &MinimizerOpts,
    k: usize,
    reference: ImseReference,
) -> Result<ImseOutcome> {
    let observed = &sim.observed;
    let p = observed.p();
    let reg = register(observed, window, quadrature, opts)?;
    let theta = reg.theta_hat().to_vec();

    let aligned = apply_shifts(observed, &theta, Some(&window))?;
    let scoring = score_grid(observed.grid(), aligned.grid(), &theta, &window)?;

    let naive_model = fit_fpca(observed.curves(), k)?;
    let naive_fits = observed
        .curves()
        .iter()
        .map(|c| reconstruct(&naive_model, c, k)?.resample(scoring.clone()))
        .collect::<Result<Vec<_>>>()?;

    let xcr_model = fit_fpca(aligned.curves(), k)?;
    let xcr_fits = aligned
        .curves()
        .iter()
        .enumerate()
        .map(|(idx, c)| reconstruct(&xcr_model, c, k)?.shifted(-theta[idx % p], scoring.clone()))
        .collect::<Result<Vec<_>>>()?;

    let refs = match reference {
        ImseReference::Observed => observed,
        ImseReference::Truth => &sim.truth,
    };
    let refs = refs
        .curves()
        .iter()
        .map(|c| c.resample(scoring.clone()))
        .collect::<Result<Vec<Curve>>>()?;

    let naive = imse(&refs, &naive_fits, None)?;
    let xcr = imse(&refs, &xcr_fits, None)?;
    let percent_decrease = if naive > 0.0 {
        100.0 * (naive - xcr) / naive
    } else {
        0.0
    };
    Ok(ImseOutcome {
        naive,
        xcr,
        percent_decrease,
        theta_hat: theta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImseCell {
    pub sigma2_eta: f64,
    pub sigma2_zeta: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_percent_decrease: f64,
    pub sd_percent_decrease: f64,
    /// Share of successful replications where the XCR arm is strictly better.
    pub fraction_improved: f64,
    pub mean_naive_imse: f64,
    pub mean_xcr_imse: f64,
}

pub fn run_imse_study(config: &ImseStudyConfig) -> Result<ExperimentReport> {
    if config.replications == 0 {
        return Err(XcrError::InvalidArgument("replications must be >= 1".into()));
    }
    if config.sigma2_eta.is_empty() || config.sigma2_zeta.is_empty() {
        return Err(XcrError::InvalidArgument("noise grid is empty".into()));
    }
    config.sim.validate()?;
    let window = config.sim.window_spec()?;
    let start = Instant::now();

    let mut jobs = Vec::new();
    for (zi, &zeta) in config.sigma2_zeta.iter().enumerate() {
        for (ei, &eta) in config.sigma2_eta.iter().enumerate() {
            let cell = (zi * config.sigma2_eta.len() + ei) as u64;
            for b in 0..config.replications {
                jobs.push((cell, zeta, eta, b));
            }
        }
    }
    let replications = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(cell, zeta, eta, b))| {
            let seed = derive_seed(config.sim.seed, cell, b as u64);
            let sim = SimConfig {
                sigma2_eta: eta,
                sigma2_zeta: zeta,
                seed,
                ..config.sim.clone()
            };
            let outcome = generate_contaminated(&sim).and_then(|s| {
                imse_replication(
                    &s,
                    window,
                    config.quadrature,
                    &config.minimizer,
                    config.components,
                    config.reference,
                )
            });
            let outcome = outcome.map(|o| {
                vec![
                    ("naive_imse".to_string(), o.naive),
                    ("xcr_imse".to_string(), o.xcr),
                    ("percent_decrease".to_string(), o.percent_decrease),
                    ("theta_sum".to_string(), o.theta_hat.iter().sum()),
                ]
            });
            record(
                format!("sigma2_zeta={zeta},sigma2_eta={eta}"),
                index,
                seed,
                &[("sigma2_eta", eta), ("sigma2_zeta", zeta), ("replication", b as f64)],
                outcome,
            )
        })
        .collect::<Vec<_>>();

    let summary = to_json(&summarize_imse(&replications))?;
    Ok(ExperimentReport {
        kind: "imse".into(),
        config: to_json(config)?,
        replications,
        summary,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Per-cell aggregates in order of first appearance.
pub fn summarize_imse(records: &[ReplicationRecord]) -> Vec<ImseCell> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in records {
        if let (Some(e), Some(z)) = (r.metric("sigma2_eta"), r.metric("sigma2_zeta")) {
            if !keys.contains(&(e, z)) {
                keys.push((e, z));
            }
        }
    }
    keys.into_iter()
        .map(|(eta, zeta)| {
            let cell: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.metric("sigma2_eta") == Some(eta) && r.metric("sigma2_zeta") == Some(zeta))
                .collect();
            let ok: Vec<&&ReplicationRecord> = cell.iter().filter(|r| r.error.is_none()).collect();
            let col = |key: &str| ok.iter().filter_map(|r| r.metric(key)).collect::<Vec<f64>>();
            let pct = col("percent_decrease");
            let naive = col("naive_imse");
            let xcr = col("xcr_imse");
            let improved = naive.iter().zip(&xcr).filter(|(a, b)| b < a).count();
            let mean_or_nan = |x: &[f64]| if x.is_empty() { f64::NAN } else { stats::mean(x) };
            ImseCell {
                sigma2_eta: eta,
                sigma2_zeta: zeta,
                replications: cell.len(),
                failures: cell.len() - ok.len(),
                mean_percent_decrease: mean_or_nan(&pct),
                sd_percent_decrease: stats::sd(&pct),
                fraction_improved: if ok.is_empty() {
                    f64::NAN
                } else {
                    improved as f64 / ok.len() as f64
                },
                mean_naive_imse: mean_or_nan(&naive),
                mean_xcr_imse: mean_or_nan(&xcr),
            }
        })
        .collect()
}

/// Mean percent decreases as a table: one row per `sigma2_zeta`, one column
/// per `sigma2_eta`.
pub fn write_imse_table<W: std::io::Write>(writer: W, cells: &[ImseCell]) -> Result<()> {
    let mut etas: Vec<f64> = Vec::new();
    let mut zetas: Vec<f64> = Vec::new();
    for c in cells {
        if !etas.contains(&c.sigma2_eta) {
            etas.push(c.sigma2_eta);
        }
        if !zetas.contains(&c.sigma2_zeta) {
            zetas.push(c.sigma2_zeta);
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sigma2_zeta".to_string()];
    header.extend(etas.iter().map(|e| format!("sigma2_eta={e}")));
    w.write_record(&header)?;
    for z in &zetas {
        let mut row = vec![z.to_string()];
        for e in &etas {
            let v = cells
                .iter()
                .find(|c| c.sigma2_eta == *e && c.sigma2_zeta == *z)
                .map(|c| format!("{:.2}", c.mean_percent_decrease))
                .unwrap_or_default();
            row.push(v);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Rate study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateStudyConfig {
    /// Base configuration; `n` is replaced by each entry of `n_list`.
    pub sim: SimConfig,
    pub n_list: Vec<usize>,
    pub replications: usize,
    /// The pair whose `tau_hat` is tracked.
    pub pair: (usize, usize),
    pub quadrature: Quadrature,
    pub minimizer: MinimizerOpts,
}

impl Default for RateStudyConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig {
                sigma2_eta: 0.0,
                sigma2_zeta: 25.0,
                sigma2_e: 1.0,
                ..SimConfig::default()
            },
            n_list: vec![50, 100, 200, 400, 800],
            replications: 200,
            pair: (0, 1),
            quadrature: Quadrature::default(),
            minimizer: MinimizerOpts::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub rmse_tau: f64,
    pub rmse_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityDiagnostic {
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rows: Vec<RateRow>,
    /// OLS slope of log RMSE on log n; `None` when the errors are at solver
    /// precision and the regression is meaningless.
    pub slope_tau: Option<f64>,
    pub slope_theta: Vec<Option<f64>>,
    /// Diagnostics of `sqrt(n) * error` at the largest `n`; `None` under the
    /// same condition as the slopes.
    pub normality_tau: Option<NormalityDiagnostic>,
    pub normality_theta: Vec<Option<NormalityDiagnostic>>,
    /// Largest `|sum_j (theta_hat_j - theta_j)|` over all replications.
    pub max_abs_theta_error_sum: f64,
}

/// RMSE below which the slope is not reported.
const RATE_FLOOR: f64 = 1e-6;

pub fn run_rate_study(config: &RateStudyConfig) -> Result<ExperimentReport> {
    if config.n_list.len() < 3 || config.n_list.windows(2).any(|w| w[0] >= w[1]) || config.n_list[0] == 0 {
        return Err(XcrError::InvalidArgument(
            "n_list must be strictly increasing with at least 3 positive entries".into(),
        ));
    }
    if config.replications < 2 {
        return Err(XcrError::InvalidArgument("replications must be >= 2".into()));
    }
    config.sim.validate()?;
    let p = config.sim.p();
    let (pj, pk) = config.pair;
    if pj >= pk || pk >= p {
        return Err(XcrError::InvalidArgument(format!(
            "pair ({pj}, {pk}) is not j < k < {p}"
        )));
    }
    let window = config.sim.window_spec()?;
    let theta = &config.sim.theta;
    let tau_true = theta[pj] - theta[pk];
    let start = Instant::now();

    let jobs: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |b| (n, b)))
        .collect();
    let replications = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(n, b))| {
            let seed = derive_seed(config.sim.seed, n as u64, b as u64);
            let sim = SimConfig {
                n,
                seed,
                ..config.sim.clone()
            };
            let outcome = generate_contaminated(&sim).and_then(|s| {
                let reg = register(&s.observed, window, config.quadrature, &config.minimizer)?;
                let pair = reg
                    .pairs
                    .iter()
                    .find(|s| s.j == pj && s.k == pk)
                    .expect("every pair is estimated");
                let mut m = vec![("tau_error".to_string(), pair.tau_hat - tau_true)];
                let mut sum = 0.0;
                for (j, (est, truth)) in reg.theta_hat().iter().zip(theta).enumerate() {
                    m.push((format!("theta_error_{j}"), est - truth));
                    sum += est - truth;
                }
                m.push(("theta_error_sum".to_string(), sum));
                Ok(m)
            });
            record(
                format!("n={n}"),
                index,
                seed,
                &[("n", n as f64), ("replication", b as f64)],
                outcome,
            )
        })
        .collect::<Vec<_>>();

    let summary = to_json(&summarize_rates(&replications, p)?)?;
    Ok(ExperimentReport {
        kind: "rates".into(),
        config: to_json(config)?,
        replications,
        summary,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

fn log_slope(ns: &[f64], rmse: &[f64]) -> Option<f64> {
    if rmse.iter().any(|&r| !(r > RATE_FLOOR)) {
        return None;
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = rmse.iter().map(|r| r.ln()).collect();
    Some(stats::ols_slope(&x, &y))
}

fn normality(errors: &[f64], n: f64) -> Option<NormalityDiagnostic> {
    if errors.len() < 3 || !(stats::rms(errors) > RATE_FLOOR) {
        return None;
    }
    let scaled: Vec<f64> = errors.iter().map(|e| e * n.sqrt()).collect();
    Some(NormalityDiagnostic {
        skewness: stats::skewness(&scaled),
        excess_kurtosis: stats::excess_kurtosis(&scaled),
    })
}

pub fn summarize_rates(records: &[ReplicationRecord], p: usize) -> Result<RateSummary> {
    let mut ns: Vec<usize> = Vec::new();
    for r in records {
        if let Some(n) = r.metric("n") {
            if !ns.contains(&(n as usize)) {
                ns.push(n as usize);
            }
        }
    }
    ns.sort_unstable();
    let errors = |n: usize, key: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.error.is_none() && r.metric("n") == Some(n as f64))
            .filter_map(|r| r.metric(key))
            .collect()
    };
    let rows: Vec<RateRow> = ns
        .iter()
        .map(|&n| {
            let all = records.iter().filter(|r| r.metric("n") == Some(n as f64)).count();
            let tau = errors(n, "tau_error");
            RateRow {
                n,
                replications: all,
                failures: all - tau.len(),
                rmse_tau: stats::rms(&tau),
                rmse_theta: (0..p).map(|j| stats::rms(&errors(n, &format!("theta_error_{j}")))).collect(),
            }
        })
        .collect();
    let largest = *ns
        .last()
        .ok_or_else(|| XcrError::InsufficientData("no successful replications".into()))?;
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let tau_rmse: Vec<f64> = rows.iter().map(|r| r.rmse_tau).collect();
    let max_abs_theta_error_sum = records
        .iter()
        .filter_map(|r| r.metric("theta_error_sum"))
        .fold(0.0, |acc: f64, v| acc.max(v.abs()));
    Ok(RateSummary {
        slope_tau: log_slope(&nf, &tau_rmse),
        slope_theta: (0..p)
            .map(|j| log_slope(&nf, &rows.iter().map(|r| r.rmse_theta[j]).collect::<Vec<_>>()))
            .collect(),
        normality_tau: normality(&errors(largest, "tau_error"), largest as f64),
        normality_theta: (0..p)
            .map(|j| normality(&errors(largest, &format!("theta_error_{j}")), largest as f64))
            .collect(),
        max_abs_theta_error_sum,
        rows,
    })
}

// ---------------------------------------------------------------------------
// XD study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XdRow {
    pub subject: String,
    pub before: f64,
    pub after: f64,
    /// `before - after`.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XdStudy {
    pub rows: Vec<XdRow>,
    /// `100 * (sum before - sum after) / sum before`.
    pub aggregate_reduction_percent: f64,
    pub fraction_worsened: f64,
}

/// Per-subject cross-component distance without and with the shifts `theta`.
pub fn run_xd_study(
    sample: &MultiCurveSample,
    window: &SubintervalSpec,
    theta: &[f64],
    quadrature: Quadrature,
) -> Result<XdStudy> {
    let zero = vec![0.0; sample.p()];
    let rows = (0..sample.n())
        .into_par_iter()
        .map(|i| {
            let curves = sample.subject(i);
            let before = cross_component_distance(curves, &zero, window, quadrature)?;
            let after = cross_component_distance(curves, theta, window, quadrature)?;
            Ok(XdRow {
                subject: sample.subject_ids()[i].clone(),
                before,
                after,
                reduction: before - after,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_before: f64 = rows.iter().map(|r| r.before).sum();
    let total_after: f64 = rows.iter().map(|r| r.after).sum();
    let aggregate_reduction_percent = if total_before > 0.0 {
        100.0 * (total_before - total_after) / total_before
    } else {
        0.0
    };
    let worsened = rows.iter().filter(|r| r.after > r.before).count();
    Ok(XdStudy {
        fraction_worsened: worsened as f64 / rows.len() as f64,
        aggregate_reduction_percent,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XdExperimentConfig {
    pub sim: SimConfig,
    pub runs: usize,
    pub quadrature: Quadrature,
    pub minimizer: MinimizerOpts,
}

impl Default for XdExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            runs: 20,
            quadrature: Quadrature::default(),
            minimizer: MinimizerOpts::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XdSummary {
    pub runs: usize,
    pub failures: usize,
    pub min_aggregate_reduction_percent: f64,
    pub mean_aggregate_reduction_percent: f64,
    pub max_fraction_worsened: f64,
    pub mean_fraction_worsened: f64,
}

/// Registers `runs` independently seeded samples and measures the XD
/// reduction of each.
pub fn run_xd_experiment(config: &XdExperimentConfig) -> Result<ExperimentReport> {
    if config.runs == 0 {
        return Err(XcrError::InvalidArgument("runs must be >= 1".into()));
    }
    config.sim.validate()?;
    let window = config.sim.window_spec()?;
    let start = Instant::now();
    let replications = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(config.sim.seed, 0, run as u64);
            let sim = SimConfig {
                seed,
                ..config.sim.clone()
            };
            let outcome = generate_contaminated(&sim).and_then(|s| {
                let reg = register(&s.observed, window, config.quadrature, &config.minimizer)?;
                let xd = run_xd_study(&s.observed, &window, reg.theta_hat(), config.quadrature)?;
                Ok(vec![
                    ("aggregate_reduction_percent".to_string(), xd.aggregate_reduction_percent),
                    ("fraction_worsened".to_string(), xd.fraction_worsened),
                ])
            });
            record(format!("run={run}"), run, seed, &[("run", run as f64)], outcome)
        })
        .collect::<Vec<_>>();
    let summary = to_json(&summarize_xd(&replications))?;
    Ok(ExperimentReport {
        kind: "xd".into(),
        config: to_json(config)?,
        replications,
        summary,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn summarize_xd(records: &[ReplicationRecord]) -> XdSummary {
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let red: Vec<f64> = ok.iter().filter_map(|r| r.metric("aggregate_reduction_percent")).collect();
    let worse: Vec<f64> = ok.iter().filter_map(|r| r.metric("fraction_worsened")).collect();
    let fold = |x: &[f64], init: f64, f: fn(f64, f64) -> f64| {
        if x.is_empty() {
            f64::NAN
        } else {
            x.iter().copied().fold(init, f)
        }
    };
    XdSummary {
        runs: records.len(),
        failures: records.len() - ok.len(),
        min_aggregate_reduction_percent: fold(&red, f64::INFINITY, f64::min),
        mean_aggregate_reduction_percent: if red.is_empty() { f64::NAN } else { stats::mean(&red) },
        max_fraction_worsened: fold(&worse, f64::NEG_INFINITY, f64::max),
        mean_fraction_worsened: if worse.is_empty() { f64::NAN } else { stats::mean(&worse) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate_pure_shift, latent_curve};

    #[test]
    fn seeds_differ_and_repeat() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
    }

    #[test]
    fn noise_free_imse_is_fully_explained_by_shifts() {
        let cfg = SimConfig {
            n: 10,
            ..SimConfig::default().noiseless()
        };
        let s = generate_contaminated(&cfg).unwrap();
        let o = imse_replication(
            &s,
            cfg.window_spec().unwrap(),
            Quadrature::default(),
            &MinimizerOpts::default(),
            2,
            ImseReference::Truth,
        )
        .unwrap();
        assert!(o.naive > 1.0, "{o:?}");
        assert!(o.percent_decrease >= 99.0, "{o:?}");
        assert!(o.theta_hat.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn percent_decrease_is_scale_invariant() {
        let cfg = SimConfig {
            n: 20,
            ..SimConfig::default()
        };
        let s = generate_contaminated(&cfg).unwrap();
        let scaled = SimSample {
            observed: s.observed.scaled(3.0).unwrap(),
            truth: s.truth.scaled(3.0).unwrap(),
            theta: s.theta.clone(),
        };
        let w = cfg.window_spec().unwrap();
        let run = |x: &SimSample| {
            imse_replication(x, w, Quadrature::default(), &MinimizerOpts::default(), 2, ImseReference::Observed)
                .unwrap()
        };
        let (a, b) = (run(&s), run(&scaled));
        assert!((a.percent_decrease - b.percent_decrease).abs() < 1e-6, "{a:?} {b:?}");
    }

    #[test]
    fn xd_edge_cases() {
        let grid = Arc::new(Grid::uniform(0.0, 50.0, 0.5).unwrap());
        let theta = [-5.0, -2.5, 2.5, 5.0];
        let s = generate_pure_shift(5, &theta, &latent_curve, grid, None, 0).unwrap();
        let w = SubintervalSpec::new(10.0, 40.0, 0.0, 50.0).unwrap();
        let zero = run_xd_study(&s, &w, &[0.0; 4], Quadrature::default()).unwrap();
        assert!(zero.rows.iter().all(|r| r.reduction == 0.0));
        assert_eq!(zero.fraction_worsened, 0.0);
        let full = run_xd_study(&s, &w, &theta, Quadrature::default()).unwrap();
        assert!((full.aggregate_reduction_percent - 100.0).abs() < 1e-9);
    }

    #[test]
    fn summaries_recompute_from_records() {
        let cfg = ImseStudyConfig {
            sim: SimConfig {
                n: 15,
                ..SimConfig::default()
            },
            sigma2_eta: vec![0.25, 1.0],
            replications: 3,
            ..ImseStudyConfig::default()
        };
        let report = run_imse_study(&cfg).unwrap();
        assert_eq!(report.replications.len(), 6);
        let again = serde_json::to_value(summarize_imse(&report.replications)).unwrap();
        assert_eq!(report.summary, again);
        let again = run_imse_study(&cfg).unwrap();
        assert_eq!(report.replications, again.replications);

        let mut table = Vec::new();
        write_imse_table(&mut table, &summarize_imse(&report.replications)).unwrap();
        let text = String::from_utf8(table).unwrap();
        assert!(text.starts_with("sigma2_zeta,sigma2_eta=0.25,sigma2_eta=1\n25,"), "{text}");
    }

    #[test]
    fn rate_study_contracts() {
        let bad = RateStudyConfig {
            n_list: vec![10, 20],
            ..RateStudyConfig::default()
        };
        assert!(run_rate_study(&bad).is_err());
        let tiny = RateStudyConfig {
            sim: SimConfig::default().noiseless(),
            n_list: vec![5, 10, 20],
            replications: 2,
            ..RateStudyConfig::default()
        };
        let r = run_rate_study(&tiny).unwrap();
        let s: RateSummary = serde_json::from_value(r.summary).unwrap();
        assert_eq!(s.slope_tau, None);
        assert!(s.max_abs_theta_error_sum < 1e-10);
        assert!(s.rows.iter().all(|row| row.rmse_tau < 1e-3));
    }
}
