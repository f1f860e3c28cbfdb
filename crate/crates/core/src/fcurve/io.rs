//! Long-format curve files: `subject_id,component,t,value`, one row per
//! observation. Extra columns are allowed and can be used to filter rows.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use super::curve::{Curve, Interp};
use super::grid::{Grid, DOMAIN_SLACK};
use super::sample::MultiCurveSample;
use crate::error::{Result, XcrError};

pub const LONG_HEADER: [&str; 4] = ["subject_id", "component", "t", "value"];

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub interp: Interp,
    /// Keep only rows whose `column` equals `value`.
    pub group_by: Option<(String, String)>,
}

struct Obs {
    t: f64,
    value: f64,
    line: u64,
}

pub fn read_long_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<MultiCurveSample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| XcrError::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
    };
    let [si, ci, ti, vi] = [col("subject_id")?, col("component")?, col("t")?, col("value")?];
    let filter = match &opts.group_by {
        Some((name, value)) => Some((col(name)?, value.as_str())),
        None => None,
    };

    let mut subjects: Vec<String> = Vec::new();
    let mut subject_index: HashMap<String, usize> = HashMap::new();
    let mut components: Vec<String> = Vec::new();
    let mut component_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), Vec<Obs>> = HashMap::new();
    let mut first_line: Vec<u64> = Vec::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if let Some((fc, want)) = filter {
            if rec.get(fc).map(str::trim) != Some(want) {
                continue;
            }
        }
        let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
        let num = |k: usize, what: &str| {
            field(k).parse::<f64>().map_err(|_| XcrError::Parse {
                line,
                message: format!("cannot parse {what} '{}'", field(k)),
            })
        };
        let t = num(ti, "t")?;
        let value = num(vi, "value")?;
        if !t.is_finite() || !value.is_finite() {
            return Err(XcrError::Parse {
                line,
                message: "non-finite number".into(),
            });
        }
        let s = field(si).to_string();
        let c = field(ci).to_string();
        let s_idx = *subject_index.entry(s.clone()).or_insert_with(|| {
            subjects.push(s);
            first_line.push(line);
            subjects.len() - 1
        });
        let c_idx = *component_index.entry(c.clone()).or_insert_with(|| {
            components.push(c);
            components.len() - 1
        });
        cells.entry((s_idx, c_idx)).or_default().push(Obs { t, value, line });
    }

    if subjects.is_empty() {
        return Err(XcrError::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }

    for v in cells.values_mut() {
        v.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    let reference = &cells[&(0, 0)];
    let ref_t: Vec<f64> = reference.iter().map(|o| o.t).collect();
    let tol = DOMAIN_SLACK * (ref_t[ref_t.len() - 1] - ref_t[0]).abs().max(1.0);

    // Find the earliest offending row across all curves.
    let mut worst: Option<(u64, usize, usize, String)> = None;
    let mut note = |line: u64, s: usize, c: usize, msg: String| {
        if worst.as_ref().is_none_or(|w| line < w.0) {
            worst = Some((line, s, c, msg));
        }
    };
    for (s, &line) in first_line.iter().enumerate() {
        for c in 0..components.len() {
            let Some(obs) = cells.get(&(s, c)) else {
                note(line, s, c, "component missing for this subject".into());
                continue;
            };
            if let Some(k) = obs.windows(2).position(|w| w[1].t == w[0].t) {
                note(obs[k + 1].line, s, c, format!("duplicate t = {}", obs[k].t));
                continue;
            }
            let mismatch = obs
                .iter()
                .zip(&ref_t)
                .position(|(o, &r)| (o.t - r).abs() > tol);
            if let Some(k) = mismatch {
                note(
                    obs[k].line,
                    s,
                    c,
                    format!("t = {} does not match the common grid (expected {})", obs[k].t, ref_t[k]),
                );
            } else if obs.len() != ref_t.len() {
                let line = if obs.len() > ref_t.len() {
                    obs[ref_t.len()].line
                } else {
                    obs.iter().map(|o| o.line).max().unwrap_or(0)
                };
                note(
                    line,
                    s,
                    c,
                    format!("{} time points, common grid has {}", obs.len(), ref_t.len()),
                );
            }
        }
    }
    if let Some((line, s, c, message)) = worst {
        return Err(XcrError::SampleGridMismatch {
            line,
            subject: subjects[s].clone(),
            component: components[c].clone(),
            message,
        });
    }

    let grid = Arc::new(Grid::new(ref_t).map_err(|e| XcrError::SampleGridMismatch {
        line: reference[0].line,
        subject: subjects[0].clone(),
        component: components[0].clone(),
        message: e.to_string(),
    })?);
    let rows = (0..subjects.len())
        .map(|s| {
            (0..components.len())
                .map(|c| {
                    let v = cells[&(s, c)].iter().map(|o| o.value).collect();
                    Curve::new(grid.clone(), v, opts.interp)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MultiCurveSample::new(grid, rows, components, subjects)
}

pub fn write_long_csv<W: Write>(writer: W, sample: &MultiCurveSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LONG_HEADER)?;
    for i in 0..sample.n() {
        for (j, c) in sample.subject(i).iter().enumerate() {
            for (t, v) in c.grid().points().iter().zip(c.values()) {
                w.write_record([
                    sample.subject_ids()[i].as_str(),
                    sample.component_names()[j].as_str(),
                    &t.to_string(),
                    &v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
