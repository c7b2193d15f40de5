//! Cyclic reformulation: the time-invariant representation of a periodic plant
//! whose `A`/`B` matrices are block-cyclic and whose `C`/`D` are block-diagonal,
//! driven by block-sparse "cycled" signals.
//!
//! Block indices are zero-based `(block_row, block_col)` throughout. `A_k`
//! sits at block `((k + 1) mod M, k)` of the cyclic `A`, so `A_0` is at
//! `(1, 0)` and `A_{M-1}` is at the top-right `(0, M-1)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{block, frobenius, set_block};
use crate::model::{LptvModel, SignalSequence};
use crate::scalar::Real;

/// Default relative tolerance for structural membership tests in exact pipelines.
pub const STRUCTURE_TOL: f64 = 1e-8;

/// Block sparsity pattern of a `M x M` block matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPattern {
    /// Nonzero blocks only at `(r, c)` with `r = c + 1 (mod M)`.
    Cyclic,
    /// Nonzero blocks only on the block diagonal.
    BlockDiagonal,
}

impl BlockPattern {
    pub fn allows(self, block_row: usize, block_col: usize, period: usize) -> bool {
        match self {
            BlockPattern::Cyclic => block_row == (block_col + 1) % period,
            BlockPattern::BlockDiagonal => block_row == block_col,
        }
    }
}

/// Off-pattern mass of a block matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatternResidual {
    /// `||off-pattern||_F / max(1, ||matrix||_F)`.
    pub relative: f64,
    pub worst_block: (usize, usize),
    /// Frobenius norm of the worst off-pattern block.
    pub worst_norm: f64,
}

impl PatternResidual {
    pub fn within(&self, tol: f64) -> bool {
        self.relative <= tol
    }
}

pub fn pattern_residual<T: Real>(
    matrix: &DMatrix<T>,
    period: usize,
    row_block: usize,
    col_block: usize,
    pattern: BlockPattern,
) -> PatternResidual {
    if matrix.shape() != (period * row_block, period * col_block) {
        return PatternResidual {
            relative: f64::INFINITY,
            worst_block: (0, 0),
            worst_norm: f64::INFINITY,
        };
    }
    let mut off_sq = T::zero();
    let mut worst = (T::zero(), (0, 0));
    for br in 0..period {
        for bc in 0..period {
            if pattern.allows(br, bc, period) {
                continue;
            }
            let blk = matrix.view((br * row_block, bc * col_block), (row_block, col_block));
            let sq = blk.iter().fold(T::zero(), |acc, &x| acc + x * x);
            off_sq += sq;
            if sq > worst.0 {
                worst = (sq, (br, bc));
            }
        }
    }
    let total = frobenius(matrix).as_f64();
    PatternResidual {
        relative: off_sq.sqrt().as_f64() / total.max(1.0),
        worst_block: worst.1,
        worst_norm: worst.0.sqrt().as_f64(),
    }
}

pub fn is_cyclic<T: Real>(
    matrix: &DMatrix<T>,
    period: usize,
    row_block: usize,
    col_block: usize,
    tol: f64,
) -> bool {
    pattern_residual(matrix, period, row_block, col_block, BlockPattern::Cyclic).within(tol)
}

pub fn is_block_diagonal<T: Real>(
    matrix: &DMatrix<T>,
    period: usize,
    row_block: usize,
    col_block: usize,
    tol: f64,
) -> bool {
    pattern_residual(matrix, period, row_block, col_block, BlockPattern::BlockDiagonal)
        .within(tol)
}

/// Copy of `matrix` with every off-pattern block set to zero.
pub fn project_pattern<T: Real>(
    matrix: &DMatrix<T>,
    period: usize,
    row_block: usize,
    col_block: usize,
    pattern: BlockPattern,
) -> DMatrix<T> {
    let mut out = matrix.clone();
    for br in 0..period {
        for bc in 0..period {
            if !pattern.allows(br, bc, period) {
                out.view_mut((br * row_block, bc * col_block), (row_block, col_block))
                    .fill(T::zero());
            }
        }
    }
    out
}

/// Cyclic reformulation of an `M`-periodic model.
#[derive(Clone, Debug, PartialEq)]
pub struct CycledModel<T: Real> {
    period: usize,
    n: usize,
    m: usize,
    l: usize,
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
}

/// Per-matrix structural residuals of a cycled quadruple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadrupleResiduals {
    pub a: PatternResidual,
    pub b: PatternResidual,
    pub c: PatternResidual,
    pub d: PatternResidual,
}

impl QuadrupleResiduals {
    pub fn of<T: Real>(
        period: usize,
        (n, m, l): (usize, usize, usize),
        a: &DMatrix<T>,
        b: &DMatrix<T>,
        c: &DMatrix<T>,
        d: &DMatrix<T>,
    ) -> Self {
        Self {
            a: pattern_residual(a, period, n, n, BlockPattern::Cyclic),
            b: pattern_residual(b, period, n, m, BlockPattern::Cyclic),
            c: pattern_residual(c, period, l, n, BlockPattern::BlockDiagonal),
            d: pattern_residual(d, period, l, m, BlockPattern::BlockDiagonal),
        }
    }

    pub fn max_relative(&self) -> f64 {
        self.named().iter().map(|(_, r)| r.relative).fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, PatternResidual); 4] {
        [("A", self.a), ("B", self.b), ("C", self.c), ("D", self.d)]
    }

    /// Structure error for the worst matrix if any exceeds `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let (name, worst) = self
            .named()
            .into_iter()
            .max_by(|x, y| x.1.relative.total_cmp(&y.1.relative))
            .expect("four entries");
        if worst.within(tol) {
            Ok(())
        } else {
            Err(Error::Structure {
                matrix: name.to_string(),
                block_row: worst.worst_block.0,
                block_col: worst.worst_block.1,
                norm: worst.worst_norm,
                residual: worst.relative,
                tol,
            })
        }
    }
}

impl<T: Real> CycledModel<T> {
    /// Wraps a quadruple after checking dimensions and structural membership
    /// within `tol` (no entries are modified).
    pub fn from_parts(
        period: usize,
        (n, m, l): (usize, usize, usize),
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        d: DMatrix<T>,
        tol: f64,
    ) -> Result<Self> {
        if period == 0 || n == 0 || m == 0 || l == 0 {
            return Err(Error::Dimension("period and block sizes must be positive".into()));
        }
        let shapes = [
            ("A", a.shape(), (period * n, period * n)),
            ("B", b.shape(), (period * n, period * m)),
            ("C", c.shape(), (period * l, period * n)),
            ("D", d.shape(), (period * l, period * m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension(format!(
                    "cycled {name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        QuadrupleResiduals::of(period, (n, m, l), &a, &b, &c, &d).check(tol)?;
        Ok(Self { period, n, m, l, a, b, c, d })
    }

    pub fn period(&self) -> usize {
        self.period
    }
    /// Per-phase `(n, m, l)`.
    pub fn block_dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.l)
    }
    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }

    pub fn residuals(&self) -> QuadrupleResiduals {
        QuadrupleResiduals::of(self.period, self.block_dims(), &self.a, &self.b, &self.c, &self.d)
    }
}

/// Assembles the cyclic reformulation of `model`.
pub fn build_cyclic<T: Real>(model: &LptvModel<T>) -> CycledModel<T> {
    let period = model.period();
    let (n, m, l) = (model.state_dim(), model.input_dim(), model.output_dim());
    let mut a = DMatrix::zeros(period * n, period * n);
    let mut b = DMatrix::zeros(period * n, period * m);
    let mut c = DMatrix::zeros(period * l, period * n);
    let mut d = DMatrix::zeros(period * l, period * m);
    for k in 0..period {
        let next = (k + 1) % period;
        set_block(&mut a, next, k, model.a(k));
        set_block(&mut b, next, k, model.b(k));
        set_block(&mut c, k, k, model.c(k));
        set_block(&mut d, k, k, model.d(k));
    }
    CycledModel { period, n, m, l, a, b, c, d }
}

/// Reads the per-phase matrices back out of a cycled model. Off-pattern
/// entries must be within `tol` and are discarded.
pub fn extract_periodic<T: Real>(cycled: &CycledModel<T>, tol: f64) -> Result<LptvModel<T>> {
    cycled.residuals().check(tol)?;
    let period = cycled.period;
    let (n, m, l) = cycled.block_dims();
    let a = (0..period)
        .map(|k| block(&cycled.a, (k + 1) % period, k, n, n))
        .collect();
    let b = (0..period)
        .map(|k| block(&cycled.b, (k + 1) % period, k, n, m))
        .collect();
    let c = (0..period).map(|k| block(&cycled.c, k, k, l, n)).collect();
    let d = (0..period).map(|k| block(&cycled.d, k, k, l, m)).collect();
    LptvModel::new(a, b, c, d)
}

/// Block permutation with identity blocks on the first block superdiagonal and
/// in the bottom-left corner. Left multiplication moves block row `r + 1` to
/// block row `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftMatrix<T: Real> {
    q: usize,
    period: usize,
    matrix: DMatrix<T>,
}

impl<T: Real> ShiftMatrix<T> {
    pub fn block_size(&self) -> usize {
        self.q
    }
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// `S^power` for any integer power; built directly as a permutation so it
    /// is exact. Negative powers give the inverse (the transpose).
    pub fn power(&self, power: i64) -> DMatrix<T> {
        let (q, period) = (self.q, self.period);
        let shift = power.rem_euclid(period as i64) as usize;
        let mut out = DMatrix::zeros(q * period, q * period);
        for r in 0..period {
            let c = (r + shift) % period;
            out.view_mut((r * q, c * q), (q, q)).fill_with_identity();
        }
        out
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.matrix.transpose()
    }
}

pub fn shift_matrix<T: Real>(q: usize, period: usize) -> Result<ShiftMatrix<T>> {
    if q == 0 || period == 0 {
        return Err(Error::Argument(format!(
            "shift matrix needs q >= 1 and M >= 1 (got q={q}, M={period})"
        )));
    }
    let mut s = ShiftMatrix {
        q,
        period,
        matrix: DMatrix::zeros(0, 0),
    };
    s.matrix = s.power(1);
    Ok(s)
}

/// Block-sparse embedding of a signal: at time `k` only block `phase_of(k)`
/// may be nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct CycledSignal<T: Real> {
    block_dim: usize,
    period: usize,
    start_time: i64,
    values: DMatrix<T>,
}

impl<T: Real> CycledSignal<T> {
    /// Wraps dense `(M * block_dim) x len` values without checking the
    /// block-support pattern.
    pub fn from_dense(
        block_dim: usize,
        period: usize,
        start_time: i64,
        values: DMatrix<T>,
    ) -> Result<Self> {
        if block_dim == 0 || period == 0 {
            return Err(Error::Argument("block dimension and period must be positive".into()));
        }
        if values.nrows() != block_dim * period {
            return Err(Error::Dimension(format!(
                "cycled signal has {} rows, expected {}",
                values.nrows(),
                block_dim * period
            )));
        }
        Ok(Self {
            block_dim,
            period,
            start_time,
            values,
        })
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }
    pub fn period(&self) -> usize {
        self.period
    }
    pub fn start_time(&self) -> i64 {
        self.start_time
    }
    pub fn len(&self) -> usize {
        self.values.ncols()
    }
    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }
    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    /// Block position active at sample `k`.
    pub fn phase_of(&self, k: usize) -> usize {
        (self.start_time + k as i64).rem_euclid(self.period as i64) as usize
    }

    /// The active sub-vector at sample `k`.
    pub fn active_block(&self, k: usize) -> DVector<T> {
        let p = self.phase_of(k);
        self.values
            .view((p * self.block_dim, k), (self.block_dim, 1))
            .column(0)
            .into_owned()
    }

    /// Dense view as an ordinary `M * block_dim` dimensional signal.
    pub fn to_signal(&self) -> SignalSequence<T> {
        SignalSequence::new(self.values.clone(), self.start_time)
            .expect("cycled values are finite")
    }
}

pub fn cycle_input<T: Real>(signal: &SignalSequence<T>, period: usize) -> Result<CycledSignal<T>> {
    if period == 0 {
        return Err(Error::Argument("period must be at least 1".into()));
    }
    let d = signal.dim();
    let len = signal.len();
    let mut values = DMatrix::zeros(period * d, len);
    let mut out = CycledSignal {
        block_dim: d,
        period,
        start_time: signal.start_time(),
        values: DMatrix::zeros(0, 0),
    };
    for k in 0..len {
        let p = out.phase_of(k);
        values
            .view_mut((p * d, k), (d, 1))
            .copy_from(&signal.values().column(k));
    }
    out.values = values;
    Ok(out)
}

/// Leakage found outside the active block while uncycling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UncycleReport {
    /// Largest `||off-phase||_2 / max(1, ||sample||_2)` over all samples.
    pub max_relative_leak: f64,
    pub worst_sample: usize,
    pub clean: bool,
}

pub fn uncycle_output<T: Real>(
    cycled: &CycledSignal<T>,
    tol: f64,
) -> (SignalSequence<T>, UncycleReport) {
    let d = cycled.block_dim;
    let len = cycled.len();
    let mut out = DMatrix::zeros(d, len);
    let mut worst = (0.0f64, 0usize);
    for k in 0..len {
        let active = cycled.active_block(k);
        out.set_column(k, &active);
        let col = cycled.values.column(k);
        let b = cycled.phase_of(k);
        let leak = col
            .iter()
            .enumerate()
            .filter(|(i, _)| i / d != b)
            .fold(T::zero(), |acc, (_, &x)| acc + x * x)
            .sqrt();
        let rel = leak.as_f64() / col.norm().as_f64().max(1.0);
        if rel > worst.0 {
            worst = (rel, k);
        }
    }
    let signal = SignalSequence::new(out, cycled.start_time).expect("finite samples");
    (
        signal,
        UncycleReport {
            max_relative_leak: worst.0,
            worst_sample: worst.1,
            clean: worst.0 <= tol,
        },
    )
}

/// Runs the noise-free cycled recursion. `x0` is the state of the original
/// plant; it is embedded into the block of the first sample's phase (block 0
/// when the signal starts at time 0).
pub fn simulate_cycled<T: Real>(
    cycled: &CycledModel<T>,
    input: &CycledSignal<T>,
    x0: &DVector<T>,
) -> Result<CycledSignal<T>> {
    let (n, m, l) = cycled.block_dims();
    let period = cycled.period;
    if input.period != period || input.block_dim != m {
        return Err(Error::Dimension(format!(
            "cycled input has period {} and block size {}, model expects {period} and {m}",
            input.period, input.block_dim
        )));
    }
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, expected {n}",
            x0.len()
        )));
    }
    let mut x = DVector::zeros(period * n);
    if !input.is_empty() {
        let p = input.phase_of(0);
        x.rows_mut(p * n, n).copy_from(x0);
    }
    let mut ys = DMatrix::zeros(period * l, input.len());
    for k in 0..input.len() {
        let u = input.values.column(k);
        ys.set_column(k, &(&cycled.c * &x + &cycled.d * u));
        x = &cycled.a * &x + &cycled.b * u;
    }
    Ok(CycledSignal {
        block_dim: l,
        period,
        start_time: input.start_time,
        values: ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_input, simulate_lptv};

    fn pex() -> LptvModel<f64> {
        LptvModel::pex()
    }

    #[test]
    fn pex_cyclic_matrices_match_layout() {
        let cm = build_cyclic(&pex());
        assert_eq!(cm.a().shape(), (6, 6));
        assert_eq!(cm.b().shape(), (6, 3));
        assert_eq!(cm.c().shape(), (3, 6));
        assert_eq!(cm.d().shape(), (3, 3));
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(6, 6, &[
            0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0, 1.0, 0.5,
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
            0.5, 1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.9, -0.95, 0.0, 0.0,
        ]);
        #[rustfmt::skip]
        let b = DMatrix::from_row_slice(6, 3, &[
            0.0, 0.0, 1.0,
            0.0, 0.0, 0.5,
            1.0, 0.0, 0.0,
            2.0, 0.0, 0.0,
            0.0, 1.5, 0.0,
            0.0, 2.0, 0.0,
        ]);
        #[rustfmt::skip]
        let c = DMatrix::from_row_slice(3, 6, &[
            1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        ]);
        assert_eq!(cm.a(), &a);
        assert_eq!(cm.b(), &b);
        assert_eq!(cm.c(), &c);
        assert_eq!(cm.d(), &(DMatrix::identity(3, 3) * 0.5));
    }

    #[test]
    fn single_phase_degenerates_to_model() {
        let p = crate::model::generate_random_plant::<f64>(
            crate::model::PlantDims { period: 1, n: 3, m: 2, l: 2 },
            5,
            0.9,
        )
        .unwrap();
        let cm = build_cyclic(&p);
        assert_eq!(cm.a(), p.a(0));
        assert_eq!(cm.b(), p.b(0));
        assert_eq!(cm.c(), p.c(0));
        assert_eq!(cm.d(), p.d(0));
    }

    #[test]
    fn zero_model_cycles_to_zero() {
        let z = |r, c| vec![DMatrix::<f64>::zeros(r, c); 2];
        let p = LptvModel::new(z(2, 2), z(2, 1), z(1, 2), z(1, 1)).unwrap();
        let cm = build_cyclic(&p);
        assert!(cm.a().iter().chain(cm.b().iter()).all(|&x| x == 0.0));
        assert_eq!(extract_periodic(&cm, STRUCTURE_TOL).unwrap(), p);
    }

    #[test]
    fn round_trip_is_exact_for_pex() {
        let p = pex();
        assert_eq!(extract_periodic(&build_cyclic(&p), STRUCTURE_TOL).unwrap(), p);
    }

    #[test]
    fn dense_matrix_is_not_cyclic() {
        let cm = build_cyclic(&pex());
        let dense = DMatrix::from_fn(6, 6, |i, j| 1.0 + (i * 6 + j) as f64 * 0.1);
        let bad = CycledModel { a: dense, ..cm };
        let err = extract_periodic(&bad, STRUCTURE_TOL).unwrap_err();
        match err {
            Error::Structure { matrix, norm, .. } => {
                assert_eq!(matrix, "A");
                assert!(norm > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shift_matrix_small_cases() {
        let s = shift_matrix::<f64>(1, 3).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.matrix(), &want);
        let cube = s.matrix() * s.matrix() * s.matrix();
        assert_eq!(cube, DMatrix::identity(3, 3));
        assert_eq!(shift_matrix::<f64>(2, 1).unwrap().matrix(), &DMatrix::identity(2, 2));
        assert!(shift_matrix::<f64>(0, 3).is_err());
    }

    #[test]
    fn shift_power_matches_repeated_product() {
        let s = shift_matrix::<f64>(2, 4).unwrap();
        let mut acc = DMatrix::identity(8, 8);
        for i in 0..9 {
            assert_eq!(s.power(i), acc);
            acc = &acc * s.matrix();
        }
        assert_eq!(s.power(-1), s.inverse());
    }

    #[test]
    fn shift_conjugation_rotates_block_diagonal() {
        let s = shift_matrix::<f64>(2, 3).unwrap();
        let blocks: Vec<DMatrix<f64>> = (0..3)
            .map(|k| DMatrix::from_fn(2, 2, |i, j| (10 * k + 2 * i + j) as f64 + 1.0))
            .collect();
        let e = crate::linalg::block_diag(&blocks);
        let rotated = s.inverse() * &e * s.matrix();
        assert!(is_block_diagonal(&rotated, 3, 2, 2, 0.0));
        for k in 0..3 {
            assert_eq!(block(&rotated, (k + 1) % 3, (k + 1) % 3, 2, 2), blocks[k]);
        }
    }

    #[test]
    fn shift_times_cyclic_is_block_diagonal() {
        let cm = build_cyclic(&pex());
        let s2 = shift_matrix::<f64>(2, 3).unwrap();
        let s1 = shift_matrix::<f64>(1, 3).unwrap();
        assert!(is_block_diagonal(&(s2.matrix() * cm.a()), 3, 2, 2, 0.0));
        assert!(is_block_diagonal(&(s2.matrix() * cm.b()), 3, 2, 1, 0.0));
        assert!(is_cyclic(&(s1.inverse() * cm.d()), 3, 1, 1, 0.0));
    }

    #[test]
    fn pattern_predicates() {
        let cm = build_cyclic(&pex());
        assert!(is_cyclic(cm.a(), 3, 2, 2, STRUCTURE_TOL));
        assert!(!is_block_diagonal(cm.a(), 3, 2, 2, STRUCTURE_TOL));
        assert!(is_block_diagonal(cm.d(), 3, 1, 1, STRUCTURE_TOL));
        let eye = DMatrix::<f64>::identity(6, 6);
        assert!(is_block_diagonal(&eye, 3, 2, 2, STRUCTURE_TOL));
        assert!(!is_cyclic(&eye, 3, 2, 2, STRUCTURE_TOL));
        // wrong shape never matches
        assert!(!is_cyclic(&eye, 2, 2, 2, STRUCTURE_TOL));
    }

    #[test]
    fn cycle_input_example() {
        let u = SignalSequence::scalar(&[1.0, 2.0, 3.0, 4.0]);
        let c = cycle_input(&u, 3).unwrap();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(3, 4, &[
            1.0, 0.0, 0.0, 4.0,
            0.0, 2.0, 0.0, 0.0,
            0.0, 0.0, 3.0, 0.0,
        ]);
        assert_eq!(c.values(), &want);
        assert_eq!(c.active_block(3)[0], 4.0);
        let single = cycle_input(&u, 1).unwrap();
        assert_eq!(single.values(), u.values());
        let zero = cycle_input(&SignalSequence::<f64>::zeros(2, 5), 4).unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uncycle_inverts_cycle() {
        let u = random_input::<f64>(2, 17, 8);
        let (back, report) = uncycle_output(&cycle_input(&u, 4).unwrap(), STRUCTURE_TOL);
        assert_eq!(back, u);
        assert!(report.clean);
        assert_eq!(report.max_relative_leak, 0.0);
        let zero = CycledSignal::from_dense(1, 3, 0, DMatrix::<f64>::zeros(3, 6)).unwrap();
        let (z, _) = uncycle_output(&zero, STRUCTURE_TOL);
        assert!(z.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uncycle_reports_leakage() {
        let mut v = DMatrix::<f64>::zeros(3, 3);
        v[(0, 0)] = 1.0;
        v[(2, 1)] = 5.0; // sample 1 should live in block 1
        let s = CycledSignal::from_dense(1, 3, 0, v).unwrap();
        let (_, report) = uncycle_output(&s, STRUCTURE_TOL);
        assert!(!report.clean);
        assert_eq!(report.worst_sample, 1);
    }

    #[test]
    fn cycled_impulse_response_starts_with_d0() {
        let cm = build_cyclic(&pex());
        let mut u = vec![0.0; 4];
        u[0] = 1.0;
        let cu = cycle_input(&SignalSequence::scalar(&u), 3).unwrap();
        let y = simulate_cycled(&cm, &cu, &DVector::zeros(2)).unwrap();
        assert_eq!(y.values()[(0, 0)], 0.5);
        assert_eq!(y.values()[(1, 0)], 0.0);
        let zero = simulate_cycled(&cm, &cycle_input(&SignalSequence::zeros(1, 9), 3).unwrap(), &DVector::zeros(2))
            .unwrap();
        assert!(zero.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cycled_simulation_matches_direct_on_pex() {
        let p = pex();
        let u = random_input::<f64>(1, 60, 2);
        let x0 = DVector::from_vec(vec![0.3, -1.2]);
        let direct = simulate_lptv(&p, &u, &x0, None).unwrap().output;
        let cy = simulate_cycled(&build_cyclic(&p), &cycle_input(&u, 3).unwrap(), &x0).unwrap();
        let (back, report) = uncycle_output(&cy, STRUCTURE_TOL);
        assert!(report.clean);
        let err = (back.values() - direct.values()).abs().max();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn cycled_simulation_rejects_mismatch() {
        let cm = build_cyclic(&pex());
        let cu = cycle_input(&SignalSequence::<f64>::zeros(1, 4), 2).unwrap();
        assert!(simulate_cycled(&cm, &cu, &DVector::zeros(2)).is_err());
        let cu = cycle_input(&SignalSequence::<f64>::zeros(1, 4), 3).unwrap();
        assert!(simulate_cycled(&cm, &cu, &DVector::zeros(3)).is_err());
    }
}
