//! Markov parameters and the shifted block-diagonal structure checks that a
//! cyclic reformulation (and, approximately, an identified model of one) obeys.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cyclic::{pattern_residual, BlockPattern, CycledModel, ShiftMatrix};
use crate::error::{Error, Result};
use crate::linalg::frobenius;
use crate::scalar::Real;

/// Default relative tolerance for structure checks on identified models.
pub const IDENTIFIED_STRUCTURE_TOL: f64 = 1e-4;

/// Any discrete-time LTI quadruple `(A, B, C, D)`.
pub trait StateSpace<T: Real> {
    fn a(&self) -> &DMatrix<T>;
    fn b(&self) -> &DMatrix<T>;
    fn c(&self) -> &DMatrix<T>;
    fn d(&self) -> &DMatrix<T>;
}

impl<T: Real> StateSpace<T> for CycledModel<T> {
    fn a(&self) -> &DMatrix<T> {
        CycledModel::a(self)
    }
    fn b(&self) -> &DMatrix<T> {
        CycledModel::b(self)
    }
    fn c(&self) -> &DMatrix<T> {
        CycledModel::c(self)
    }
    fn d(&self) -> &DMatrix<T> {
        CycledModel::d(self)
    }
}

/// Plain LTI quadruple, mostly useful in tests and for file round trips.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadruple<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

impl<T: Real> StateSpace<T> for Quadruple<T> {
    fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    fn d(&self) -> &DMatrix<T> {
        &self.d
    }
}

impl<T: Real> Quadruple<T> {
    pub fn of(sys: &impl StateSpace<T>) -> Self {
        Self {
            a: sys.a().clone(),
            b: sys.b().clone(),
            c: sys.c().clone(),
            d: sys.d().clone(),
        }
    }

    /// `(T^-1 A T, T^-1 B, C T, D)`; `None` if `t` is singular.
    pub fn similarity(&self, t: &DMatrix<T>) -> Option<Self> {
        let inv = t.clone().try_inverse()?;
        Some(Self {
            a: &inv * &self.a * t,
            b: &inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
        })
    }
}

/// Impulse-response coefficients `H[0] = D`, `H[i] = C A^{i-1} B`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovSequence<T: Real> {
    h: Vec<DMatrix<T>>,
}

impl<T: Real> MarkovSequence<T> {
    pub fn horizon(&self) -> usize {
        self.h.len() - 1
    }
    pub fn get(&self, i: usize) -> &DMatrix<T> {
        &self.h[i]
    }
    pub fn as_slice(&self) -> &[DMatrix<T>] {
        &self.h
    }
}

pub fn markov_parameters<T: Real>(sys: &impl StateSpace<T>, horizon: usize) -> MarkovSequence<T> {
    let mut h = Vec::with_capacity(horizon + 1);
    h.push(sys.d().clone());
    // A^{i-1} B, advanced one step per coefficient
    let mut ab = sys.b().clone();
    for _ in 1..=horizon {
        h.push(sys.c() * &ab);
        ab = sys.a() * ab;
    }
    MarkovSequence { h }
}

/// Which shifted product a structure cell tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// `S_l^i H(i+j) S_m^j` is block-diagonal.
    ShiftedDiagonal,
    /// `S_l^{i-1} H(i)` is cyclic.
    LeftCyclic,
    /// `H(i) S_m^{i-1}` is cyclic.
    RightCyclic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StructureCell {
    pub kind: CellKind,
    pub i: usize,
    pub j: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub tol: f64,
    pub max_i: usize,
    pub max_j: usize,
    pub cells: Vec<StructureCell>,
    pub pass: bool,
    pub worst: Option<StructureCell>,
}

impl StructureReport {
    pub fn max_residual(&self) -> f64 {
        self.worst.map_or(0.0, |c| c.residual)
    }

    /// Structure error naming the worst cell when the report fails.
    pub fn require_pass(&self) -> Result<()> {
        if self.pass {
            return Ok(());
        }
        let w = self.worst.expect("failing report has a worst cell");
        Err(Error::Structure {
            matrix: format!("{:?} Markov product (i={}, j={})", w.kind, w.i, w.j),
            block_row: 0,
            block_col: 0,
            norm: w.residual,
            residual: w.residual,
            tol: self.tol,
        })
    }
}

/// Suggested check depth: enough indices to cover every phase and every
/// observability depth.
pub fn default_structure_depth(period: usize, n: usize) -> usize {
    period + n
}

/// Tests `S_l^i H(i+j) S_m^j` for block-diagonality over `0 <= i <= max_i`,
/// `0 <= j <= max_j`, plus the cyclic corollaries `S_l^{i-1} H(i)` and
/// `H(i) S_m^{i-1}` for `1 <= i <= horizon`.
pub fn check_structure<T: Real>(
    markov: &MarkovSequence<T>,
    s_l: &ShiftMatrix<T>,
    s_m: &ShiftMatrix<T>,
    max_i: usize,
    max_j: usize,
    tol: f64,
) -> Result<StructureReport> {
    if markov.horizon() < max_i + max_j {
        return Err(Error::Argument(format!(
            "Markov horizon {} is shorter than max_i + max_j = {}",
            markov.horizon(),
            max_i + max_j
        )));
    }
    let period = s_l.period();
    if s_m.period() != period {
        return Err(Error::Argument("shift matrices have different periods".into()));
    }
    let (lq, mq) = (s_l.block_size(), s_m.block_size());
    let expected = (period * lq, period * mq);
    if markov.get(0).shape() != expected {
        return Err(Error::Dimension(format!(
            "Markov parameters are {}x{}, shift matrices imply {}x{}",
            markov.get(0).nrows(),
            markov.get(0).ncols(),
            expected.0,
            expected.1
        )));
    }

    let mut cells = Vec::new();
    let mut push = |kind, i, j, m: &DMatrix<T>, pattern| {
        let r = pattern_residual(m, period, lq, mq, pattern);
        cells.push(StructureCell {
            kind,
            i,
            j,
            residual: r.relative,
        });
    };
    for i in 0..=max_i {
        let left = s_l.power(i as i64);
        for j in 0..=max_j {
            let prod = &left * markov.get(i + j) * s_m.power(j as i64);
            push(CellKind::ShiftedDiagonal, i, j, &prod, BlockPattern::BlockDiagonal);
        }
    }
    for i in 1..=markov.horizon() {
        let h = markov.get(i);
        let l = s_l.power(i as i64 - 1) * h;
        push(CellKind::LeftCyclic, i, 0, &l, BlockPattern::Cyclic);
        let r = h * s_m.power(i as i64 - 1);
        push(CellKind::RightCyclic, i, 0, &r, BlockPattern::Cyclic);
    }

    let worst = cells
        .iter()
        .copied()
        .max_by(|a, b| a.residual.total_cmp(&b.residual));
    let pass = cells.iter().all(|c| c.residual <= tol);
    Ok(StructureReport {
        tol,
        max_i,
        max_j,
        cells,
        pass,
        worst,
    })
}

/// `max_i ||H1[i] - H2[i]||_F / max(1, ||H1[i]||_F)` for `i <= horizon`.
pub fn compare_markov<T: Real>(
    first: &MarkovSequence<T>,
    second: &MarkovSequence<T>,
    horizon: usize,
) -> Result<f64> {
    if first.horizon() < horizon || second.horizon() < horizon {
        return Err(Error::Argument(format!(
            "sequences too short for horizon {horizon}"
        )));
    }
    let mut worst = 0.0f64;
    for i in 0..=horizon {
        let (a, b) = (first.get(i), second.get(i));
        if a.shape() != b.shape() {
            return Err(Error::Dimension(format!(
                "Markov parameter {i} is {}x{} vs {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let dev = frobenius(&(a - b)).as_f64() / frobenius(a).as_f64().max(1.0);
        worst = worst.max(dev);
    }
    Ok(worst)
}
