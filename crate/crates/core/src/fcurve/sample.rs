use std::sync::Arc;

use super::curve::{Curve, Interp};
use super::grid::Grid;
use crate::error::{Result, XcrError};

/// `n` subjects by `p` components of curves on one shared grid.
#[derive(Debug, Clone)]
pub struct MultiCurveSample {
    grid: Arc<Grid>,
    n: usize,
    p: usize,
    // Row-major: subject i, component j at i * p + j.
    curves: Vec<Curve>,
    component_names: Vec<String>,
    subject_ids: Vec<String>,
}

impl MultiCurveSample {
    pub fn new(
        grid: Arc<Grid>,
        subjects: Vec<Vec<Curve>>,
        component_names: Vec<String>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let n = subjects.len();
        let p = component_names.len();
        if n == 0 {
            return Err(XcrError::InvalidSample("no subjects".into()));
        }
        if p < 2 {
            return Err(XcrError::InvalidSample(format!("need at least 2 components, got {p}")));
        }
        if subject_ids.len() != n {
            return Err(XcrError::InvalidSample(format!(
                "{} subject ids for {n} subjects",
                subject_ids.len()
            )));
        }
        let mut curves = Vec::with_capacity(n * p);
        for (i, row) in subjects.into_iter().enumerate() {
            if row.len() != p {
                return Err(XcrError::InvalidSample(format!(
                    "subject '{}' has {} components, expected {p}",
                    subject_ids[i],
                    row.len()
                )));
            }
            for (j, c) in row.into_iter().enumerate() {
                if !c.grid().approx_eq(&grid) {
                    return Err(XcrError::InvalidSample(format!(
                        "subject '{}', component '{}' is not on the common grid",
                        subject_ids[i], component_names[j]
                    )));
                }
                curves.push(c);
            }
        }
        Ok(Self {
            grid,
            n,
            p,
            curves,
            component_names,
            subject_ids,
        })
    }

    /// Builds a sample from raw values indexed `[subject][component][node]`,
    /// with default labels.
    pub fn from_values(grid: Arc<Grid>, values: Vec<Vec<Vec<f64>>>, interp: Interp) -> Result<Self> {
        let n = values.len();
        let p = values.first().map_or(0, Vec::len);
        let subjects = values
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| Curve::new(grid.clone(), v, interp))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, subjects, default_component_names(p), default_subject_ids(n))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn curve(&self, i: usize, j: usize) -> &Curve {
        &self.curves[i * self.p + j]
    }

    /// All components of subject `i`.
    pub fn subject(&self, i: usize) -> &[Curve] {
        &self.curves[i * self.p..(i + 1) * self.p]
    }

    /// Component `j` across all subjects.
    pub fn component(&self, j: usize) -> impl Iterator<Item = &Curve> + '_ {
        self.curves.iter().skip(j).step_by(self.p)
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn component_names(&self) -> &[String] {
        &self.component_names
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn with_labels(mut self, component_names: Vec<String>, subject_ids: Vec<String>) -> Result<Self> {
        if component_names.len() != self.p || subject_ids.len() != self.n {
            return Err(XcrError::InvalidSample("label counts do not match the sample".into()));
        }
        self.component_names = component_names;
        self.subject_ids = subject_ids;
        Ok(self)
    }

    /// Applies `f` to every curve. All results must again share one grid.
    pub fn try_map(&self, f: impl Fn(&Curve) -> Result<Curve>) -> Result<Self> {
        let mapped = self.curves.iter().map(f).collect::<Result<Vec<_>>>()?;
        let grid = mapped[0].grid().clone();
        let mut it = mapped.into_iter();
        let subjects = (0..self.n).map(|_| it.by_ref().take(self.p).collect()).collect();
        Self::new(grid, subjects, self.component_names.clone(), self.subject_ids.clone())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.try_map(|c| c.scaled(factor))
    }

    /// Subset of subjects, in the given order.
    pub fn select_subjects(&self, idx: &[usize]) -> Result<Self> {
        let subjects = idx.iter().map(|&i| self.subject(i).to_vec()).collect();
        let ids = idx.iter().map(|&i| self.subject_ids[i].clone()).collect();
        Self::new(self.grid.clone(), subjects, self.component_names.clone(), ids)
    }
}

pub fn default_component_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

pub fn default_subject_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("s{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_component_and_mismatched_grids() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 0.5).unwrap());
        let one = vec![vec![vec![0.0, 1.0, 2.0]]];
        assert!(MultiCurveSample::from_values(g.clone(), one, Interp::Linear).is_err());

        let other = Arc::new(Grid::uniform(0.0, 2.0, 1.0).unwrap());
        let a = Curve::new(g.clone(), vec![0.0; 3], Interp::Linear).unwrap();
        let b = Curve::new(other, vec![0.0; 3], Interp::Linear).unwrap();
        let r = MultiCurveSample::new(g, vec![vec![a, b]], default_component_names(2), default_subject_ids(1));
        assert!(matches!(r, Err(XcrError::InvalidSample(_))));
    }

    #[test]
    fn component_iteration() {
        let g = Arc::new(Grid::uniform(0.0, 1.0, 1.0).unwrap());
        let v = (0..3)
            .map(|i| (0..2).map(|j| vec![(10 * i + j) as f64; 2]).collect())
            .collect();
        let s = MultiCurveSample::from_values(g, v, Interp::Linear).unwrap();
        let c1: Vec<f64> = s.component(1).map(|c| c.values()[0]).collect();
        assert_eq!(c1, vec![1.0, 11.0, 21.0]);
        assert_eq!(s.curve(2, 0).values()[0], 20.0);
    }
}
