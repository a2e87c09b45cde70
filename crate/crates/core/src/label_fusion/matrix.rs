//! Label likelihood matrices `M[o, c] = p(measured o, o in prompt | true class c)`.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::belief::normalized;
use crate::detections::{DetectionRecord, LabelSpace};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Statistical,
    Manual,
    /// Loaded from a file without provenance information.
    External,
}

/// Dense open-set x closed-set likelihood table. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodMatrix {
    n_open: usize,
    n_closed: usize,
    data: Vec<f64>,
    provenance: Provenance,
}

/// Total map from open-set labels to closed-set classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardAssociation {
    targets: Vec<usize>,
    n_closed: usize,
}

impl HardAssociation {
    pub fn new(targets: Vec<usize>, n_closed: usize) -> Result<Self> {
        if let Some((o, c)) = targets.iter().enumerate().find(|(_, c)| **c >= n_closed) {
            return Err(Error::InvalidParameter(format!(
                "open label {o} maps to class {c}, only {n_closed} classes"
            )));
        }
        Ok(Self { targets, n_closed })
    }

    /// Maps each open label to the closed class of the same name.
    pub fn by_name(space: &LabelSpace) -> Result<Self> {
        let targets = space
            .open_set
            .names()
            .iter()
            .map(|n| {
                space.closed_set.index_of(n).ok_or_else(|| {
                    Error::InvalidParameter(format!("open label `{n}` has no closed-set class"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(targets, space.closed_set.len())
    }

    /// Two-column CSV `open_label,class`; every open label must appear once.
    pub fn read_csv(path: &Path, space: &LabelSpace) -> Result<Self> {
        let ctx = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let mut targets = vec![None; space.open_set.len()];
        for row in rdr.records() {
            let row = row.map_err(|e| Error::parse(&ctx, e))?;
            let (o, c) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
            let oi = space
                .open_set
                .index_of(o)
                .ok_or_else(|| Error::parse(&ctx, format!("unknown open label `{o}`")))?;
            let ci = space
                .closed_set
                .index_of(c)
                .ok_or_else(|| Error::parse(&ctx, format!("unknown class `{c}`")))?;
            if targets[oi].replace(ci).is_some() {
                return Err(Error::parse(&ctx, format!("open label `{o}` mapped twice")));
            }
        }
        let targets = targets
            .into_iter()
            .enumerate()
            .map(|(o, t)| {
                t.ok_or_else(|| {
                    Error::parse(&ctx, format!("open label `{}` unmapped", space.open_set.name(o)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(targets, space.closed_set.len())
    }

    pub fn target(&self, open: usize) -> usize {
        self.targets[open]
    }

    pub fn n_open(&self) -> usize {
        self.targets.len()
    }

    pub fn n_closed(&self) -> usize {
        self.n_closed
    }
}

/// How the measurements of one detection combine into a class likelihood.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CombineMode {
    /// `sum_i s_i * M[y_i, c]`.
    Sum,
    /// `prod_i (s_i * M[y_i, c] + floor)`.
    ProductFloor { floor: f64 },
}

impl Default for CombineMode {
    fn default() -> Self {
        CombineMode::Sum
    }
}

impl LikelihoodMatrix {
    /// Row-major `data` over `n_open` rows and `n_closed` columns.
    pub fn new(n_open: usize, n_closed: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if n_open == 0 || n_closed == 0 || data.len() != n_open * n_closed {
            return Err(Error::InvalidParameter(format!(
                "matrix of {n_open}x{n_closed} needs {} entries, got {}",
                n_open * n_closed,
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!("likelihood {x} outside [0, 1]")));
        }
        Ok(Self {
            n_open,
            n_closed,
            data,
            provenance,
        })
    }

    /// `M[o, assoc(o)] = p0`, zero elsewhere.
    pub fn manual(assoc: &HardAssociation, p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("p0 must be in (0, 1], got {p0}")));
        }
        let (n_open, n_closed) = (assoc.n_open(), assoc.n_closed());
        let mut data = vec![0.0; n_open * n_closed];
        for o in 0..n_open {
            data[o * n_closed + assoc.target(o)] = p0;
        }
        Self::new(n_open, n_closed, data, Provenance::Manual)
    }

    pub fn n_open(&self) -> usize {
        self.n_open
    }

    pub fn n_closed(&self) -> usize {
        self.n_closed
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    #[inline]
    pub fn get(&self, open: usize, class: usize) -> f64 {
        self.data[open * self.n_closed + class]
    }

    pub fn row(&self, open: usize) -> &[f64] {
        &self.data[open * self.n_closed..(open + 1) * self.n_closed]
    }

    /// Classes no open label can ever support.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n_closed)
            .filter(|c| (0..self.n_open).all(|o| self.get(o, *c) == 0.0))
            .collect()
    }

    /// Normalized class likelihood of one detection. Degenerate (all-zero)
    /// likelihoods map to the uniform distribution.
    pub fn measurement_likelihood(&self, det: &DetectionRecord, mode: CombineMode) -> Vec<f64> {
        let mut l = match mode {
            CombineMode::Sum => {
                let mut l = vec![0.0; self.n_closed];
                for m in &det.measurements {
                    for (acc, p) in l.iter_mut().zip(self.row(m.label)) {
                        *acc += m.score * p;
                    }
                }
                l
            }
            CombineMode::ProductFloor { floor } => {
                let mut l = vec![1.0; self.n_closed];
                for m in &det.measurements {
                    for (acc, p) in l.iter_mut().zip(self.row(m.label)) {
                        *acc *= m.score * p + floor;
                    }
                }
                if det.measurements.is_empty() {
                    l.iter_mut().for_each(|x| *x = 0.0);
                }
                l
            }
        };
        if l.iter().any(|x| !x.is_finite()) {
            l.iter_mut().for_each(|x| *x = 0.0);
        }
        normalized(l).expect("likelihood terms are nonnegative")
    }

    /// CSV with a header of class names and one row per open label.
    pub fn write_csv(&self, path: &Path, space: &LabelSpace) -> Result<()> {
        self.check_space(space)?;
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
        let mut header = vec!["label".to_string()];
        header.extend(space.closed_set.names().iter().cloned());
        w.write_record(&header).map_err(|e| Error::parse(path.display().to_string(), e))?;
        for o in 0..self.n_open {
            let mut rec = vec![space.open_set.name(o).to_string()];
            rec.extend(self.row(o).iter().map(|x| format!("{x}")));
            w.write_record(&rec).map_err(|e| Error::parse(path.display().to_string(), e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv). Columns and rows
    /// are matched by name, so their order in the file is free. Open labels
    /// missing from the file get zero rows.
    pub fn read_csv(path: &Path, space: &LabelSpace) -> Result<Self> {
        let ctx = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header = rdr.headers().map_err(|e| Error::parse(&ctx, e))?.clone();
        let mut cols = Vec::new();
        for name in header.iter().skip(1) {
            let c = space
                .closed_set
                .index_of(name)
                .ok_or_else(|| Error::parse(&ctx, format!("unknown class column `{name}`")))?;
            cols.push(c);
        }
        let (n_open, n_closed) = (space.open_set.len(), space.closed_set.len());
        let mut data = vec![0.0; n_open * n_closed];
        for row in rdr.records() {
            let row = row.map_err(|e| Error::parse(&ctx, e))?;
            let name = row.get(0).unwrap_or("");
            let o = space
                .open_set
                .index_of(name)
                .ok_or_else(|| Error::parse(&ctx, format!("unknown open label row `{name}`")))?;
            for (cell, c) in row.iter().skip(1).zip(&cols) {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("row `{name}`: `{cell}`: {e}")))?;
                data[o * n_closed + c] = v;
            }
        }
        Self::new(n_open, n_closed, data, Provenance::External).map_err(|e| Error::parse(&ctx, e))
    }

    fn check_space(&self, space: &LabelSpace) -> Result<()> {
        if space.open_set.len() != self.n_open || space.closed_set.len() != self.n_closed {
            return Err(Error::InvalidParameter(format!(
                "matrix is {}x{}, label space is {}x{}",
                self.n_open,
                self.n_closed,
                space.open_set.len(),
                space.closed_set.len()
            )));
        }
        Ok(())
    }
}
