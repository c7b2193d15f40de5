//! File formats: JSON model documents and CSV signal files.
//!
//! Periodic model (`A`..`D` are lists of `M` row-major matrices):
//!
//! ```json
//! {"M": 3, "n": 2, "m": 1, "l": 1, "A": [[[0, 1], [0.5, 1]], ...], "B": [...], "C": [...], "D": [...]}
//! ```
//!
//! Identified LTI quadruple (single row-major matrices, plus the period and
//! per-phase block sizes the cycled signals were built with):
//!
//! ```json
//! {"M": 3, "m": 1, "l": 1, "order": 6, "A": [[...]], "B": [[...]], "C": [[...]], "D": [[...]]}
//! ```
//!
//! Signals are CSV with a header `t,<p>_1,...,<p>_d` and one row per sample.
//! Cycled signals use the same layout with `M * d` columns and a sidecar
//! `<file>.meta.json` recording `M`, `block_dim` and `start_time`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cyclic::CycledSignal;
use crate::error::{Error, Result};
use crate::markov::{Quadruple, StateSpace};
use crate::model::{LptvModel, SignalSequence};
use crate::scalar::Real;

/// I/O errors name the file they concern.
fn with_path(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(with_path(path))
}

type Rows = Vec<Vec<f64>>;

fn to_rows<T: Real>(m: &DMatrix<T>) -> Rows {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.as_f64()).collect())
        .collect()
}

fn from_rows<T: Real>(rows: &Rows, shape: (usize, usize), what: &str) -> Result<DMatrix<T>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        let got_cols = rows.first().map_or(0, |r| r.len());
        return Err(Error::Format(format!(
            "{what} should be {}x{}, found {} rows (first row has {got_cols} entries)",
            shape.0,
            shape.1,
            rows.len()
        )));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| T::lit(rows[i][j])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "M")]
    pub period: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "C")]
    pub c: Vec<Rows>,
    #[serde(rename = "D")]
    pub d: Vec<Rows>,
}

impl ModelFile {
    pub fn from_model<T: Real>(model: &LptvModel<T>) -> Self {
        let conv = |v: &[DMatrix<T>]| v.iter().map(to_rows).collect();
        Self {
            period: model.period(),
            n: model.state_dim(),
            m: model.input_dim(),
            l: model.output_dim(),
            a: conv(model.a_all()),
            b: conv(model.b_all()),
            c: conv(model.c_all()),
            d: conv(model.d_all()),
        }
    }

    pub fn to_model<T: Real>(&self) -> Result<LptvModel<T>> {
        let (n, m, l, p) = (self.n, self.m, self.l, self.period);
        if p == 0 || n == 0 || m == 0 || l == 0 {
            return Err(Error::Format("M, n, m and l must be positive".into()));
        }
        let conv = |name: &str, v: &[Rows], shape| -> Result<Vec<DMatrix<T>>> {
            if v.len() != p {
                return Err(Error::Format(format!("{name} lists {} phases, M = {p}", v.len())));
            }
            v.iter()
                .enumerate()
                .map(|(k, rows)| from_rows(rows, shape, &format!("{name}_{k}")))
                .collect()
        };
        LptvModel::new(
            conv("A", &self.a, (n, n))?,
            conv("B", &self.b, (n, m))?,
            conv("C", &self.c, (l, n))?,
            conv("D", &self.d, (l, m))?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtiFile {
    #[serde(rename = "M")]
    pub period: usize,
    pub m: usize,
    pub l: usize,
    pub order: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D")]
    pub d: Rows,
}

impl LtiFile {
    pub fn from_system<T: Real>(sys: &impl StateSpace<T>, period: usize, m: usize, l: usize) -> Self {
        Self {
            period,
            m,
            l,
            order: sys.a().nrows(),
            a: to_rows(sys.a()),
            b: to_rows(sys.b()),
            c: to_rows(sys.c()),
            d: to_rows(sys.d()),
        }
    }

    pub fn to_quadruple<T: Real>(&self) -> Result<Quadruple<T>> {
        let (o, p, q) = (self.order, self.period * self.m, self.period * self.l);
        if self.period == 0 || self.m == 0 || self.l == 0 || o == 0 {
            return Err(Error::Format("M, m, l and order must be positive".into()));
        }
        Ok(Quadruple {
            a: from_rows(&self.a, (o, o), "A")?,
            b: from_rows(&self.b, (o, p), "B")?,
            c: from_rows(&self.c, (q, o), "C")?,
            d: from_rows(&self.d, (q, p), "D")?,
        })
    }
}

/// Either kind of model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelDocument {
    Periodic(ModelFile),
    Lti(LtiFile),
}

pub fn read_model_document(path: &Path) -> Result<ModelDocument> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!(
            "{}: not a periodic model or LTI quadruple document ({e})",
            path.display()
        ))
    })
}

pub fn read_model<T: Real>(path: &Path) -> Result<LptvModel<T>> {
    match read_model_document(path)? {
        ModelDocument::Periodic(f) => f.to_model(),
        ModelDocument::Lti(_) => Err(Error::Format(format!(
            "{} holds an LTI quadruple, expected a periodic model",
            path.display()
        ))),
    }
}

pub fn write_model<T: Real>(path: &Path, model: &LptvModel<T>) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = File::create(path).map_err(with_path(path))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn header(prefix: &str, dim: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("{prefix}_{i}")))
        .collect()
}

pub fn write_signal_to<T: Real, W: Write>(
    writer: W,
    signal: &SignalSequence<T>,
    prefix: &str,
) -> Result<()> {
    write_matrix_csv(writer, signal.values(), signal.start_time(), prefix)
}

fn write_matrix_csv<T: Real, W: Write>(
    writer: W,
    values: &DMatrix<T>,
    start_time: i64,
    prefix: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(prefix, values.nrows()))?;
    for (k, col) in values.column_iter().enumerate() {
        let mut rec = vec![(start_time + k as i64).to_string()];
        rec.extend(col.iter().map(|x| x.as_f64().to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_signal<T: Real>(path: &Path, signal: &SignalSequence<T>, prefix: &str) -> Result<()> {
    write_signal_to(File::create(path).map_err(with_path(path))?, signal, prefix)
}

pub fn read_signal_from<T: Real, R: Read>(reader: R) -> Result<SignalSequence<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(Error::Format(
            "signal CSV needs a header starting with `t` and at least one value column".into(),
        ));
    }
    let dim = headers.len() - 1;
    let mut start = None;
    let mut cols: Vec<f64> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Format(format!("row {}: missing column {i}", k + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", k + 1)))
        };
        let t = parse(0)?;
        if t.fract() != 0.0 {
            return Err(Error::Format(format!("row {}: time {t} is not an integer", k + 1)));
        }
        let t = t as i64;
        let t0 = *start.get_or_insert(t);
        if t != t0 + k as i64 {
            return Err(Error::Format(format!(
                "row {}: time {t} breaks the consecutive sequence starting at {t0}",
                k + 1
            )));
        }
        for i in 1..=dim {
            cols.push(parse(i)?);
        }
    }
    let len = cols.len() / dim;
    let values = DMatrix::from_fn(dim, len, |i, k| T::lit(cols[k * dim + i]));
    SignalSequence::new(values, start.unwrap_or(0))
}

pub fn read_signal<T: Real>(path: &Path) -> Result<SignalSequence<T>> {
    read_signal_from(open(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycledMeta {
    #[serde(rename = "M")]
    pub period: usize,
    pub block_dim: usize,
    pub start_time: i64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_cycled<T: Real>(path: &Path, signal: &CycledSignal<T>, prefix: &str) -> Result<()> {
    write_matrix_csv(File::create(path).map_err(with_path(path))?, signal.values(), signal.start_time(), prefix)?;
    write_json(
        &sidecar_path(path),
        &CycledMeta {
            period: signal.period(),
            block_dim: signal.block_dim(),
            start_time: signal.start_time(),
        },
    )
}

pub fn read_cycled<T: Real>(path: &Path) -> Result<CycledSignal<T>> {
    let meta: CycledMeta = serde_json::from_reader(open(&sidecar_path(path))?)?;
    let dense = read_signal::<T>(path)?;
    if dense.start_time() != meta.start_time {
        return Err(Error::Format(format!(
            "CSV starts at t={} but sidecar says {}",
            dense.start_time(),
            meta.start_time
        )));
    }
    CycledSignal::from_dense(meta.block_dim, meta.period, meta.start_time, dense.values().clone())
}
