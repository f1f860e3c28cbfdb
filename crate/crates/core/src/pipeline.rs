//! End-to-end registration of a long-format data file: load, preprocess,
//! register, measure cross-component distances and write the artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};
use crate::experiments::{run_xd_study, XdStudy};
use crate::fcurve::io::{read_long_csv, LoadOptions};
use crate::fcurve::{default_bandwidth, estimate_derivative, normalize_auc, Interp, MultiCurveSample, SubintervalSpec};
use crate::fcurve::Quadrature;
use crate::global::{apply_shifts, register, Registration};
use crate::pairwise::MinimizerOpts;
use crate::stats::gaussian_kde;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Replace each curve by its estimated first derivative.
    pub derivative: bool,
    /// Smoothing bandwidth; ten grid spacings when absent.
    pub bandwidth: Option<f64>,
    /// Divide each curve by its area.
    pub normalize_auc: bool,
    /// Interval for the area; the whole domain when absent.
    pub auc_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupBy {
    pub column: String,
    pub value: String,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("xcreg-out")
}

fn default_kde_points() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Integration window `[r1, r2]`.
    pub window: [f64; 2],
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub minimizer: MinimizerOpts,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default)]
    pub interp: Interp,
    #[serde(default)]
    pub group_by: Option<GroupBy>,
    /// Extend every curve to the right by its last value up to this time.
    #[serde(default)]
    pub extend_to: Option<f64>,
    /// Recorded in the diagnostics; the registration itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_kde_points")]
    pub kde_points: usize,
}

impl PipelineConfig {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            interp: self.interp,
            group_by: self.group_by.as_ref().map(|g| (g.column.clone(), g.value.clone())),
        }
    }
}

pub fn load_sample<R: Read>(reader: R, config: &PipelineConfig) -> Result<MultiCurveSample> {
    read_long_csv(reader, &config.load_options())
}

/// Optional right extension, then derivative, then area normalization.
pub fn preprocess(
    sample: &MultiCurveSample,
    config: &PreprocessConfig,
    extend_to: Option<f64>,
) -> Result<MultiCurveSample> {
    let mut s = match extend_to {
        Some(to) => sample.try_map(|c| c.extend_right(to))?,
        None => sample.clone(),
    };
    if config.derivative {
        let bw = config.bandwidth.unwrap_or_else(|| default_bandwidth(s.grid()));
        s = s.try_map(|c| estimate_derivative(c, bw, c.grid().clone()))?;
    }
    if config.normalize_auc {
        let window = match config.auc_window {
            Some([a, b]) => Some(SubintervalSpec::new(a, b, s.grid().first(), s.grid().last())?),
            None => None,
        };
        s = s.try_map(|c| normalize_auc(c, window.as_ref()))?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub sample: MultiCurveSample,
    pub registration: Registration,
    pub xd: Option<XdStudy>,
    pub warnings: Vec<Warning>,
}

impl PipelineOutput {
    pub fn censored(&self) -> bool {
        self.registration.any_censored()
    }
}

/// Registers an already preprocessed sample.
pub fn run_register(sample: MultiCurveSample, config: &PipelineConfig) -> Result<PipelineOutput> {
    let grid = sample.grid();
    let window = SubintervalSpec::new(config.window[0], config.window[1], grid.first(), grid.last())?;
    let registration = register(&sample, window, config.quadrature, &config.minimizer)?;
    let names = sample.component_names();
    let mut warnings = Vec::new();
    for s in &registration.pairs {
        if s.censored {
            warnings.push(Warning {
                code: "censored",
                message: format!(
                    "tau_hat({}, {}) = {} lies on the boundary of the admissible range [{}, {}]; consider a wider window",
                    names[s.j], names[s.k], s.tau_hat, s.shift_range.0, s.shift_range.1
                ),
            });
        }
        if s.is_multimodal() {
            warnings.push(Warning {
                code: "multimodal",
                message: format!(
                    "criterion for ({}, {}) has competing minima at {:?}",
                    names[s.j], names[s.k], s.competing_minima
                ),
            });
        }
    }
    let xd = match run_xd_study(&sample, &window, registration.theta_hat(), config.quadrature) {
        Ok(x) => Some(x),
        Err(e) => {
            warnings.push(Warning {
                code: "xd_unavailable",
                message: e.to_string(),
            });
            None
        }
    };
    Ok(PipelineOutput {
        sample,
        registration,
        xd,
        warnings,
    })
}

#[derive(Serialize)]
struct PairDiagnostics<'a> {
    j: &'a str,
    k: &'a str,
    tau_hat: f64,
    criterion_at_min: f64,
    censored: bool,
    multimodal: bool,
    competing_minima: &'a [f64],
    shift_range: (f64, f64),
    search_trace: &'a [(f64, f64)],
}

#[derive(Serialize)]
struct XdTotals {
    aggregate_reduction_percent: f64,
    fraction_worsened: f64,
    total_before: f64,
    total_after: f64,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    n_subjects: usize,
    components: &'a [String],
    window: [f64; 2],
    domain: [f64; 2],
    seed: u64,
    theta_hat: &'a [f64],
    residuals: &'a [f64],
    censored: bool,
    multimodal: bool,
    warnings: &'a [Warning],
    pairs: Vec<PairDiagnostics<'a>>,
    xd: Option<XdTotals>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `shifts.csv`, `diagnostics.json`, `curves_plot.csv`, `xd.csv` and
/// `xd_density.csv` into `dir`.
pub fn write_artifacts(out: &PipelineOutput, config: &PipelineConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let reg = &out.registration;
    let names = out.sample.component_names();

    let mut w = csv::Writer::from_writer(create(dir, "shifts.csv")?);
    w.write_record(["component", "theta_hat"])?;
    for (name, th) in names.iter().zip(reg.theta_hat()) {
        w.write_record([name.as_str(), &th.to_string()])?;
    }
    w.flush()?;

    let diagnostics = Diagnostics {
        n_subjects: out.sample.n(),
        components: names,
        window: [reg.window.r1, reg.window.r2],
        domain: [reg.window.t0, reg.window.tmax],
        seed: config.seed,
        theta_hat: reg.theta_hat(),
        residuals: &reg.global.residuals,
        censored: reg.any_censored(),
        multimodal: reg.any_multimodal(),
        warnings: &out.warnings,
        pairs: reg
            .pairs
            .iter()
            .map(|s| PairDiagnostics {
                j: &names[s.j],
                k: &names[s.k],
                tau_hat: s.tau_hat,
                criterion_at_min: s.criterion_at_min,
                censored: s.censored,
                multimodal: s.is_multimodal(),
                competing_minima: &s.competing_minima,
                shift_range: s.shift_range,
                search_trace: &s.search_trace,
            })
            .collect(),
        xd: out.xd.as_ref().map(|x| XdTotals {
            aggregate_reduction_percent: x.aggregate_reduction_percent,
            fraction_worsened: x.fraction_worsened,
            total_before: x.rows.iter().map(|r| r.before).sum(),
            total_after: x.rows.iter().map(|r| r.after).sum(),
        }),
    };
    let mut f = create(dir, "diagnostics.json")?;
    serde_json::to_writer_pretty(&mut f, &diagnostics)?;
    writeln!(f)?;
    f.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, "curves_plot.csv")?);
    w.write_record(["subject_id", "component", "state", "t", "value"])?;
    let aligned = apply_shifts(&out.sample, reg.theta_hat(), None).ok();
    let states = [("unaligned", Some(&out.sample)), ("aligned", aligned.as_ref())];
    for (state, sample) in states {
        let Some(sample) = sample else { continue };
        for i in 0..sample.n() {
            for (j, c) in sample.subject(i).iter().enumerate() {
                for (t, v) in c.grid().points().iter().zip(c.values()) {
                    w.write_record([
                        sample.subject_ids()[i].as_str(),
                        &names[j],
                        state,
                        &t.to_string(),
                        &v.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(dir, "xd.csv")?);
    w.write_record(["subject_id", "xd_before", "xd_after", "reduction"])?;
    let mut d = csv::Writer::from_writer(create(dir, "xd_density.csv")?);
    d.write_record(["reduction", "density"])?;
    if let Some(xd) = &out.xd {
        for r in &xd.rows {
            w.write_record([
                r.subject.as_str(),
                &r.before.to_string(),
                &r.after.to_string(),
                &r.reduction.to_string(),
            ])?;
        }
        let reductions: Vec<f64> = xd.rows.iter().map(|r| r.reduction).collect();
        for (x, y) in gaussian_kde(&reductions, config.kde_points) {
            d.write_record([x.to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    d.flush()?;
    Ok(())
}

/// The smallest interval containing every `[a_i, b_i]`, or `enclosing` when
/// given (which must contain it).
pub fn overlap_window(intervals: &[(f64, f64)], enclosing: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if intervals.is_empty() {
        return Err(XcrError::EmptyInput);
    }
    for &(a, b) in intervals {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(XcrError::InvalidArgument(format!("interval [{a}, {b}] is not a proper interval")));
        }
    }
    let lo = intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
    let hi = intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
    match enclosing {
        None => Ok((lo, hi)),
        Some((a, b)) if a <= lo && hi <= b => Ok((a, b)),
        Some((a, b)) => Err(XcrError::InvalidArgument(format!(
            "enclosing interval [{a}, {b}] does not contain [{lo}, {hi}]"
        ))),
    }
}

/// Reads intervals from a CSV with `start,end` columns.
pub fn read_intervals_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| XcrError::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let (si, ei) = (col("start")?, col("end")?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row as u64 + 2;
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse().map_err(|_| XcrError::Parse {
                line,
                message: format!("'{s}' is not a number"),
            })
        };
        out.push((num(si)?, num(ei)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcurve::Grid;
    use crate::simgen::{generate_pure_shift, latent_curve};
    use std::sync::Arc;

    #[test]
    fn overlap_examples() {
        let j = overlap_window(&[(9.0, 14.0), (10.0, 16.0), (11.0, 18.0)], None).unwrap();
        assert_eq!(j, (9.0, 18.0));
        assert_eq!(overlap_window(&[(2.0, 3.0)], None).unwrap(), (2.0, 3.0));
        assert_eq!(
            overlap_window(&[(9.0, 14.0), (11.0, 18.0)], Some((8.0, 19.0))).unwrap(),
            (8.0, 19.0)
        );
        assert!(overlap_window(&[(9.0, 14.0)], Some((10.0, 19.0))).is_err());
        assert!(matches!(overlap_window(&[], None), Err(XcrError::EmptyInput)));
    }

    #[test]
    fn intervals_csv() {
        let v = read_intervals_csv("start,end\n9,14\n10,16\n".as_bytes()).unwrap();
        assert_eq!(v, vec![(9.0, 14.0), (10.0, 16.0)]);
        assert!(matches!(
            read_intervals_csv("start,end\n9,x\n".as_bytes()),
            Err(XcrError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn preprocess_chain() {
        let g = Arc::new(Grid::uniform(0.0, 50.0, 0.5).unwrap());
        let s = generate_pure_shift(3, &[-1.0, 1.0], &latent_curve, g, None, 0).unwrap();
        let cfg = PreprocessConfig {
            derivative: true,
            bandwidth: Some(1.0),
            normalize_auc: false,
            auc_window: None,
        };
        let d = preprocess(&s, &cfg, Some(60.0)).unwrap();
        assert!((d.grid().last() - 60.0).abs() < 1e-12);
        let tail = d.curve(0, 0).evaluate(59.0).unwrap();
        assert!(tail.abs() < 1e-9, "{tail}");
        let n = preprocess(
            &s,
            &PreprocessConfig {
                normalize_auc: true,
                auc_window: Some([10.0, 40.0]),
                ..PreprocessConfig::default()
            },
            None,
        )
        .unwrap();
        assert!((n.curve(1, 1).integral(10.0, 40.0).unwrap() - 1.0).abs() < 1e-9);
    }
}
