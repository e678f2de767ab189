//! Observed units, sample splitting, and CSV ingestion/emission.
//!
//! A [`Dataset`] holds covariates `V` (n × p), a binary treatment `A`, and an
//! outcome `Y`. The design row `W = (1, V)` with a leading intercept is stored
//! row-major so that per-unit access is a plain slice.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default minimum size of the nuisance-fitting subset when splitting.
pub const DEFAULT_SPLIT_FLOOR: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    n: usize,
    p: usize,
    /// Row-major design matrix, n × (p + 1), first column all ones.
    w: Vec<f64>,
    a: Vec<u8>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds a validated dataset. `v` is row-major n × p.
    pub fn new(names: Vec<String>, v: Vec<f64>, a: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = a.len();
        let p = names.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs at least 2 units, got {n}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("at least one covariate required".into()));
        }
        if y.len() != n || v.len() != n * p {
            return Err(Error::DimensionMismatch(format!(
                "n = {n}, |y| = {}, |v| = {} (expected {})",
                y.len(),
                v.len(),
                n * p
            )));
        }
        if let Some(i) = a.iter().position(|&ai| ai > 1) {
            return Err(Error::NonBinaryTreatment {
                row: i,
                value: a[i].to_string(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("outcome".into()));
        }
        let mut w = Vec::with_capacity(n * (p + 1));
        for row in v.chunks_exact(p) {
            w.push(1.0);
            w.extend_from_slice(row);
        }
        Ok(Self { names, n, p, w, a, y })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of covariates, excluding the intercept.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Design row `(1, v_i)`.
    pub fn w_row(&self, i: usize) -> &[f64] {
        let d = self.p + 1;
        &self.w[i * d..(i + 1) * d]
    }

    /// Covariate row `v_i` without the intercept.
    pub fn v_row(&self, i: usize) -> &[f64] {
        &self.w_row(i)[1..]
    }

    pub fn arm_size(&self, arm: u8) -> usize {
        self.a.iter().filter(|&&ai| ai == arm).count()
    }

    pub fn arm_indices(&self, arm: u8) -> Vec<usize> {
        (0..self.n).filter(|&i| self.a[i] == arm).collect()
    }

    /// Fails unless both arms hold at least `need` units.
    pub fn require_arms(&self, need: usize) -> Result<()> {
        for arm in [0u8, 1] {
            let have = self.arm_size(arm);
            if have < need {
                return Err(Error::ArmTooSmall { arm, have, need });
            }
        }
        Ok(())
    }

    /// Units at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let mut v = Vec::with_capacity(idx.len() * self.p);
        let mut a = Vec::with_capacity(idx.len());
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!("index {i} out of range")));
            }
            v.extend_from_slice(self.v_row(i));
            a.push(self.a[i]);
            y.push(self.y[i]);
        }
        Dataset::new(self.names.clone(), v, a, y)
    }

    /// Same units with outcomes replaced.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Dataset> {
        let v: Vec<f64> = (0..self.n).flat_map(|i| self.v_row(i).to_vec()).collect();
        Dataset::new(self.names.clone(), v, self.a.clone(), y)
    }
}

/// Partition of unit indices into a nuisance-fitting part and an estimation
/// part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitIndex {
    /// Units used to fit the augmentation function (size `m_n`).
    pub idx_a: Vec<usize>,
    /// Units used for the matching estimator (size `n_eff`).
    pub idx_b: Vec<usize>,
    pub seed: u64,
}

impl SplitIndex {
    pub fn m_n(&self) -> usize {
        self.idx_a.len()
    }

    pub fn n_eff(&self) -> usize {
        self.idx_b.len()
    }
}

/// Random split with `m_n = round(frac * n)` units in the fitting part.
pub fn split_sample(d: &Dataset, frac: f64, seed: u64) -> Result<SplitIndex> {
    split_sample_with_floor(d, frac, seed, DEFAULT_SPLIT_FLOOR)
}

pub fn split_sample_with_floor(d: &Dataset, frac: f64, seed: u64, floor: usize) -> Result<SplitIndex> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {frac}"
        )));
    }
    let n = d.n();
    let m_n = (frac * n as f64).round() as usize;
    if m_n < floor.max(1) {
        return Err(Error::InvalidArgument(format!(
            "split leaves {m_n} fitting units, below the floor of {floor}"
        )));
    }
    if m_n >= n {
        return Err(Error::InvalidArgument(format!(
            "split leaves no estimation units (m_n = {m_n}, n = {n})"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let mut idx_a = perm[..m_n].to_vec();
    let mut idx_b = perm[m_n..].to_vec();
    idx_a.sort_unstable();
    idx_b.sort_unstable();
    for arm in [0u8, 1] {
        if !idx_b.iter().any(|&i| d.a()[i] == arm) {
            return Err(Error::InvalidArgument(format!(
                "estimation subset has no units with a = {arm}"
            )));
        }
    }
    Ok(SplitIndex { idx_a, idx_b, seed })
}

/// Column mapping for CSV input.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub treatment: String,
    pub outcome: String,
    /// Covariate columns; `None` takes every remaining column in file order.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            treatment: "a".into(),
            outcome: "y".into(),
            covariates: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let a_col = col(&schema.treatment)?;
    let y_col = col(&schema.outcome)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != a_col && j != y_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    if cov_names.is_empty() {
        return Err(Error::MissingColumn("<covariate>".into()));
    }
    let cov_cols = cov_names.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;

    let mut v = Vec::new();
    let mut a = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        a.push(parse_treatment(field(a_col), row)?);
        y.push(parse_number(field(y_col), row, &schema.outcome)?);
        for (&j, name) in cov_cols.iter().zip(&cov_names) {
            v.push(parse_number(field(j), row, name)?);
        }
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    Dataset::new(cov_names, v, a, y)
}

fn parse_treatment(s: &str, row: usize) -> Result<u8> {
    match s {
        "0" | "0.0" => Ok(0),
        "1" | "1.0" => Ok(1),
        _ => Err(Error::NonBinaryTreatment {
            row,
            value: s.to_owned(),
        }),
    }
}

fn parse_number(s: &str, row: usize, column: &str) -> Result<f64> {
    let err = || Error::NonNumeric {
        row,
        column: column.to_owned(),
        value: s.to_owned(),
    };
    let x: f64 = s.parse().map_err(|_| err())?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(err())
    }
}

/// Writes the dataset as CSV (`covariates..., a, y`) followed by any extra
/// derived columns. Values are written in shortest round-trip form, so a
/// read-back reproduces them bit for bit. NaN extras are written empty.
pub fn write_csv<W: Write>(writer: W, d: &Dataset, extra: &[(&str, &[f64])]) -> Result<()> {
    for (name, col) in extra {
        if col.len() != d.n() {
            return Err(Error::DimensionMismatch(format!(
                "extra column `{name}` has {} values for {} units",
                col.len(),
                d.n()
            )));
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.names().iter().map(String::as_str).collect();
    header.push("a");
    header.push("y");
    header.extend(extra.iter().map(|(name, _)| *name));
    wtr.write_record(&header)?;
    for i in 0..d.n() {
        let mut rec: Vec<String> = d.v_row(i).iter().map(|x| x.to_string()).collect();
        rec.push(d.a()[i].to_string());
        rec.push(d.y()[i].to_string());
        for (_, col) in extra {
            let x = col[i];
            rec.push(if x.is_nan() { String::new() } else { x.to_string() });
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, d: &Dataset, extra: &[(&str, &[f64])]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), d, extra)
}
