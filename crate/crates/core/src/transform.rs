//! Coordinate transformation that turns an identified (dense) LTI model of the
//! cycled signals back into cyclic-reformulation form, and the end-to-end
//! identification pipeline built on it.
//!
//! The transformation is `T^-1 = sum_j Fc_j S_l^(j-1) C* A*^(j-1)`, where the
//! `Fc_j` are block-diagonal expansions of the selector blocks `F_j`. Applied
//! to a true cycled model it reproduces the block-diagonal observability
//! aggregate `X = diag(X_0, ..., X_{M-1})`, so it pins the state basis up to
//! the per-phase freedom `Phi`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cyclic::{
    build_cyclic, cycle_input, extract_periodic, project_pattern, shift_matrix, BlockPattern,
    CycledModel, QuadrupleResiduals,
};
use crate::error::{Error, Result, Stage, StageExt};
use crate::linalg::{block_diag, condition_number, frobenius, numerical_rank};
use crate::markov::{
    check_structure, compare_markov, default_structure_depth, markov_parameters, StateSpace,
    StructureReport, IDENTIFIED_STRUCTURE_TOL,
};
use crate::model::{LptvModel, SignalSequence};
use crate::scalar::Real;
use crate::subspace::{subspace_identify, HankelConfig, IdentifiedLtiModel};

/// Condition-number cap on `T` before the transformation is declared singular.
pub const CONDITION_CAP: f64 = 1e12;
/// Projection tolerance for noise-free data.
pub const NOISE_FREE_PROJECTION_TOL: f64 = 1e-6;
/// Projection and assumption tolerance for noisy data.
pub const NOISY_TOL: f64 = 5e-2;
/// Upper bound on canonical selectors tried before giving up.
pub const MAX_SELECTOR_CANDIDATES: usize = 4096;

/// Selector `F = [F_1 ... F_n]` (`n x n*l`) picking `n` rows out of the
/// depth-`n` observability stack.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectorMatrix<T: Real> {
    n: usize,
    l: usize,
    f: DMatrix<T>,
}

impl<T: Real> SelectorMatrix<T> {
    pub fn new(f: DMatrix<T>, n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 || f.shape() != (n, n * l) {
            return Err(Error::Dimension(format!(
                "selector must be {n}x{}, got {}x{}",
                n * l,
                f.nrows(),
                f.ncols()
            )));
        }
        Ok(Self { n, l, f })
    }

    /// Canonical selector: state coordinate `i` reads stack row `rows[i]`
    /// (stack row `depth * l + channel`).
    pub fn from_stack_rows(n: usize, l: usize, rows: &[usize]) -> Result<Self> {
        if rows.len() != n || rows.iter().any(|&r| r >= n * l) {
            return Err(Error::Argument(format!(
                "need {n} stack rows below {}, got {rows:?}",
                n * l
            )));
        }
        let mut f = DMatrix::zeros(n, n * l);
        for (i, &r) in rows.iter().enumerate() {
            f[(i, r)] = T::one();
        }
        Self::new(f, n, l)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }
    pub fn output_dim(&self) -> usize {
        self.l
    }
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.f
    }

    /// `F_j` for `j` in `1..=n`.
    pub fn block(&self, j: usize) -> DMatrix<T> {
        assert!((1..=self.n).contains(&j), "selector block index {j} out of range");
        self.f.columns((j - 1) * self.l, self.l).into_owned()
    }

    /// `Fc_j = diag(F_j, ..., F_j)` with `period` copies.
    pub fn expanded(&self, j: usize, period: usize) -> DMatrix<T> {
        block_diag(&vec![self.block(j); period])
    }

    /// Stack row read by each state coordinate, when canonical.
    pub fn stack_rows(&self) -> Option<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let row = self.f.row(i);
                let ones: Vec<usize> = (0..row.len()).filter(|&c| row[c] != T::zero()).collect();
                match ones.as_slice() {
                    [c] if row[*c] == T::one() => Some(*c),
                    _ => None,
                }
            })
            .collect()
    }
}

/// `F_j = e_j` for single-output plants (so `F = I_n`); otherwise
/// `F_j = e_j e_1^T`, i.e. the first output channel at every depth.
pub fn default_selector<T: Real>(n: usize, l: usize) -> Result<SelectorMatrix<T>> {
    let rows: Vec<usize> = (0..n).map(|j| j * l).collect();
    SelectorMatrix::from_stack_rows(n, l, &rows)
}

/// Canonical selectors in search order: the default first, then every
/// `n`-subset of stack rows in lexicographic order.
pub fn canonical_selectors<T: Real>(n: usize, l: usize) -> impl Iterator<Item = SelectorMatrix<T>> {
    let total = n * l;
    let first = default_selector::<T>(n, l).ok();
    let default_rows: Vec<usize> = (0..n).map(|j| j * l).collect();
    let mut combo: Option<Vec<usize>> = Some((0..n).collect());
    let rest = std::iter::from_fn(move || {
        let current = combo.clone()?;
        // advance to the next n-subset
        let mut next = current.clone();
        let mut i = n;
        let advanced = loop {
            if i == 0 {
                break false;
            }
            i -= 1;
            if next[i] < total - n + i {
                next[i] += 1;
                for k in i + 1..n {
                    next[k] = next[k - 1] + 1;
                }
                break true;
            }
        };
        combo = advanced.then_some(next);
        Some(current)
    })
    .filter(move |rows| *rows != default_rows)
    .filter_map(move |rows| SelectorMatrix::from_stack_rows(n, l, &rows).ok());
    first.into_iter().chain(rest).take(MAX_SELECTOR_CANDIDATES)
}

/// `sum_{j=1..n} Fc_j S_l^(j-1) C A^(j-1)` for any `(C, A)` of order `M n`.
pub fn selector_sum<T: Real>(
    c: &DMatrix<T>,
    a: &DMatrix<T>,
    selector: &SelectorMatrix<T>,
    period: usize,
) -> Result<DMatrix<T>> {
    let (n, l) = (selector.state_dim(), selector.output_dim());
    let order = period * n;
    if a.shape() != (order, order) || c.shape() != (period * l, order) {
        return Err(Error::Dimension(format!(
            "expected A {order}x{order} and C {}x{order}, got A {:?} and C {:?}",
            period * l,
            a.shape(),
            c.shape()
        )));
    }
    let shift = shift_matrix::<T>(l, period)?;
    let mut sum = DMatrix::zeros(order, order);
    let mut ca = c.clone();
    for j in 1..=n {
        sum += selector.expanded(j, period) * shift.power(j as i64 - 1) * &ca;
        ca = ca * a;
    }
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityAggregate<T: Real> {
    /// `X_k = F O_k` where `O_k` is the depth-`n` observability matrix at phase `k`.
    pub blocks: Vec<DMatrix<T>>,
    pub x_check: DMatrix<T>,
    pub rank: usize,
    /// Relative difference between `x_check` and the selector sum over the
    /// cyclic reformulation.
    pub identity_residual: f64,
}

pub fn observability_aggregate<T: Real>(
    model: &LptvModel<T>,
    selector: &SelectorMatrix<T>,
) -> Result<ObservabilityAggregate<T>> {
    let (n, l) = (model.state_dim(), model.output_dim());
    if selector.state_dim() != n || selector.output_dim() != l {
        return Err(Error::Dimension(format!(
            "selector is for n={}, l={}, model has n={n}, l={l}",
            selector.state_dim(),
            selector.output_dim()
        )));
    }
    let blocks: Vec<DMatrix<T>> = (0..model.period())
        .map(|k| selector.matrix() * model.observability_matrix(k))
        .collect();
    let x_check = block_diag(&blocks);
    let cm = build_cyclic(model);
    let via_cyclic = selector_sum(cm.c(), cm.a(), selector, model.period())?;
    let identity_residual =
        frobenius(&(&x_check - &via_cyclic)).as_f64() / frobenius(&x_check).as_f64().max(1.0);
    debug_assert!(identity_residual < 1e-8, "selector-sum identity off by {identity_residual}");
    let rank = numerical_rank(&x_check);
    if rank < model.period() * n {
        let (phase, r) = blocks
            .iter()
            .enumerate()
            .map(|(k, x)| (k, numerical_rank(x)))
            .find(|&(_, r)| r < n)
            .unwrap_or((0, rank));
        return Err(Error::Selector {
            phase,
            rank: r,
            expected: n,
        });
    }
    Ok(ObservabilityAggregate {
        blocks,
        x_check,
        rank,
        identity_residual,
    })
}

/// First canonical selector giving a full-rank aggregate for `model`.
pub fn find_selector_for_model<T: Real>(model: &LptvModel<T>) -> Result<SelectorMatrix<T>> {
    let mut first_err = None;
    for sel in canonical_selectors::<T>(model.state_dim(), model.output_dim()) {
        match observability_aggregate(model, &sel) {
            Ok(_) => return Ok(sel),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    Err(first_err.unwrap_or_else(|| Error::Argument("no selector candidates".into())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformationMatrix<T: Real> {
    pub t_inv: DMatrix<T>,
    pub t: DMatrix<T>,
    pub condition_number: f64,
}

pub fn build_transformation<T: Real>(
    identified: &impl StateSpace<T>,
    selector: &SelectorMatrix<T>,
    period: usize,
    condition_cap: f64,
) -> Result<TransformationMatrix<T>> {
    let t_inv = selector_sum(identified.c(), identified.a(), selector, period)?;
    let condition = condition_number(&t_inv);
    if !(condition <= condition_cap) {
        return Err(Error::SingularTransformation {
            condition,
            cap: condition_cap,
        });
    }
    let t = t_inv
        .clone()
        .try_inverse()
        .ok_or(Error::SingularTransformation {
            condition,
            cap: condition_cap,
        })?;
    Ok(TransformationMatrix {
        t_inv,
        t,
        condition_number: condition,
    })
}

/// Tries the default selector, then the other canonical selectors, until the
/// transformation is invertible within the cap.
pub fn select_transformation<T: Real>(
    identified: &impl StateSpace<T>,
    period: usize,
    n: usize,
    l: usize,
    condition_cap: f64,
) -> Result<(SelectorMatrix<T>, TransformationMatrix<T>)> {
    let mut first_err = None;
    for sel in canonical_selectors::<T>(n, l) {
        match build_transformation(identified, &sel, period, condition_cap) {
            Ok(t) => return Ok((sel, t)),
            Err(e @ Error::SingularTransformation { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(first_err.unwrap_or_else(|| Error::Argument("no selector candidates".into())))
}

/// Quadruple after the similarity, before any structural projection.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedQuadruple<T: Real> {
    pub period: usize,
    /// `(n, m, l)` per phase.
    pub dims: (usize, usize, usize),
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
    pub residuals: QuadrupleResiduals,
}

/// `(T^-1 A* T, T^-1 B*, C* T, D*)` with structural residuals.
pub fn apply_transformation<T: Real>(
    identified: &impl StateSpace<T>,
    transformation: &TransformationMatrix<T>,
    period: usize,
    dims: (usize, usize, usize),
) -> Result<TransformedQuadruple<T>> {
    let (n, m, l) = dims;
    let (order, inputs, outputs) = (period * n, period * m, period * l);
    let shapes = [
        ("A*", identified.a().shape(), (order, order)),
        ("B*", identified.b().shape(), (order, inputs)),
        ("C*", identified.c().shape(), (outputs, order)),
        ("D*", identified.d().shape(), (outputs, inputs)),
        ("T", transformation.t.shape(), (order, order)),
    ];
    for (name, got, want) in shapes {
        if got != want {
            return Err(Error::Dimension(format!("{name} is {got:?}, expected {want:?}")));
        }
    }
    let (t, t_inv) = (&transformation.t, &transformation.t_inv);
    let a = t_inv * identified.a() * t;
    let b = t_inv * identified.b();
    let c = identified.c() * t;
    let d = identified.d().clone();
    let residuals = QuadrupleResiduals::of(period, dims, &a, &b, &c, &d);
    Ok(TransformedQuadruple {
        period,
        dims,
        a,
        b,
        c,
        d,
        residuals,
    })
}

/// Zeroes structurally-zero blocks, provided none carries more than `tol`
/// relative mass.
pub fn project_structure<T: Real>(raw: &TransformedQuadruple<T>, tol: f64) -> Result<CycledModel<T>> {
    raw.residuals.check(tol)?;
    let (n, m, l) = raw.dims;
    let p = raw.period;
    CycledModel::from_parts(
        p,
        raw.dims,
        project_pattern(&raw.a, p, n, n, BlockPattern::Cyclic),
        project_pattern(&raw.b, p, n, m, BlockPattern::Cyclic),
        project_pattern(&raw.c, p, l, n, BlockPattern::BlockDiagonal),
        project_pattern(&raw.d, p, l, m, BlockPattern::BlockDiagonal),
        0.0,
    )
}

/// Per-phase change of basis `Phi = diag(Phi_0, ..., Phi_{M-1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiFreedom<T: Real> {
    blocks: Vec<DMatrix<T>>,
}

impl<T: Real> PhiFreedom<T> {
    pub fn new(blocks: Vec<DMatrix<T>>) -> Result<Self> {
        let n = blocks.first().map_or(0, |b| b.nrows());
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (n, n) || n == 0 {
                return Err(Error::Dimension(format!("Phi block {i} is {:?}, expected {n}x{n}", b.shape())));
            }
            if numerical_rank(b) < n {
                return Err(Error::Argument(format!("Phi block {i} is singular")));
            }
        }
        Ok(Self { blocks })
    }

    pub fn identity(period: usize, n: usize) -> Self {
        Self {
            blocks: vec![DMatrix::identity(n, n); period],
        }
    }

    pub fn blocks(&self) -> &[DMatrix<T>] {
        &self.blocks
    }

    pub fn matrix(&self) -> DMatrix<T> {
        block_diag(&self.blocks)
    }
}

/// `(Phi^-1 A Phi, Phi^-1 B, C Phi, D)`; block-diagonal similarity keeps both
/// block patterns.
pub fn apply_phi<T: Real>(cycled: &CycledModel<T>, phi: &PhiFreedom<T>) -> Result<CycledModel<T>> {
    let (n, _, _) = cycled.block_dims();
    let period = cycled.period();
    if phi.blocks.len() != period || phi.blocks[0].nrows() != n {
        return Err(Error::Dimension(format!(
            "Phi has {} blocks of size {}, model needs {period} of size {n}",
            phi.blocks.len(),
            phi.blocks[0].nrows()
        )));
    }
    let inv_blocks: Vec<DMatrix<T>> = phi
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.clone()
                .try_inverse()
                .ok_or_else(|| Error::Argument(format!("Phi block {i} is singular")))
        })
        .collect::<Result<_>>()?;
    let p = phi.matrix();
    let p_inv = block_diag(&inv_blocks);
    let a = &p_inv * cycled.a() * &p;
    let b = &p_inv * cycled.b();
    let c = cycled.c() * &p;
    // re-zero the pattern so rounding in the products cannot leak
    let (n, m, l) = cycled.block_dims();
    CycledModel::from_parts(
        period,
        cycled.block_dims(),
        project_pattern(&a, period, n, n, BlockPattern::Cyclic),
        project_pattern(&b, period, n, m, BlockPattern::Cyclic),
        project_pattern(&c, period, l, n, BlockPattern::BlockDiagonal),
        cycled.d().clone(),
        0.0,
    )
}

/// Tolerances and knobs for [`identify_lptv`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentifyConfig {
    pub hankel: HankelConfig,
    /// Relative tolerance of the shifted-Markov block-diagonality check.
    pub assumption_tol: f64,
    /// Relative tolerance for zeroing off-pattern blocks after the transformation.
    pub projection_tol: f64,
    pub condition_cap: f64,
    /// `max_i = max_j` of the structure check; defaults to `M + n`.
    pub structure_depth: Option<usize>,
    /// Horizon of the identified-vs-recovered Markov comparison; defaults to `2 M n`.
    pub markov_horizon: Option<usize>,
}

impl IdentifyConfig {
    pub fn noise_free() -> Self {
        Self {
            hankel: HankelConfig::default(),
            assumption_tol: IDENTIFIED_STRUCTURE_TOL,
            projection_tol: NOISE_FREE_PROJECTION_TOL,
            condition_cap: CONDITION_CAP,
            structure_depth: None,
            markov_horizon: None,
        }
    }

    pub fn noisy() -> Self {
        Self {
            assumption_tol: NOISY_TOL,
            projection_tol: NOISY_TOL,
            ..Self::noise_free()
        }
    }
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self::noise_free()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentifyDiagnostics {
    pub period: usize,
    pub state_dim: usize,
    pub order: usize,
    pub completed_stages: Vec<Stage>,
    pub subspace: crate::subspace::SubspaceDiagnostics,
    pub assumption: StructureReport,
    /// Stack rows read by the selector that was used.
    pub selector_rows: Option<Vec<usize>>,
    pub transformation_condition: f64,
    pub structure_residuals: QuadrupleResiduals,
    /// Identified vs. recovered cyclic model, relative.
    pub markov_deviation: f64,
    pub markov_horizon: usize,
}

#[derive(Clone, Debug)]
pub struct Identification<T: Real> {
    pub model: LptvModel<T>,
    pub cycled: CycledModel<T>,
    pub identified: IdentifiedLtiModel<T>,
    pub transformation: TransformationMatrix<T>,
    pub diagnostics: IdentifyDiagnostics,
}

/// Full pipeline: cycle the data, identify an order-`M n` LTI model, check the
/// shifted Markov structure, transform to cyclic form, project, and read off
/// the per-phase matrices.
pub fn identify_lptv<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    period: usize,
    n: usize,
    selector: Option<&SelectorMatrix<T>>,
    config: &IdentifyConfig,
) -> Result<Identification<T>> {
    if period == 0 || n == 0 {
        return Err(Error::Argument(format!(
            "period and state dimension must be positive (got M={period}, n={n})"
        )));
    }
    if u.len() != y.len() {
        return Err(Error::Argument(format!(
            "input has {} samples but output has {}",
            u.len(),
            y.len()
        )));
    }
    let (m, l) = (u.dim(), y.dim());
    let order = period * n;
    let mut stages = Vec::new();

    let cu = cycle_input(u, period).stage(Stage::Cycling)?;
    let cy = cycle_input(y, period).stage(Stage::Cycling)?;
    stages.push(Stage::Cycling);

    let identified = subspace_identify(&cu.to_signal(), &cy.to_signal(), order, &config.hankel)
        .stage(Stage::SubspaceIdentification)?;
    stages.push(Stage::SubspaceIdentification);

    let depth = config
        .structure_depth
        .unwrap_or_else(|| default_structure_depth(period, n));
    let s_l = shift_matrix::<T>(l, period)?;
    let s_m = shift_matrix::<T>(m, period)?;
    let id_markov = markov_parameters(&identified, 2 * depth);
    let assumption = check_structure(&id_markov, &s_l, &s_m, depth, depth, config.assumption_tol)
        .stage(Stage::AssumptionCheck)?;
    assumption.require_pass().stage(Stage::AssumptionCheck)?;
    stages.push(Stage::AssumptionCheck);

    let (selector, transformation) = match selector {
        Some(sel) => {
            if sel.state_dim() != n || sel.output_dim() != l {
                return Err(Error::Dimension(format!(
                    "selector is for n={}, l={}, data needs n={n}, l={l}",
                    sel.state_dim(),
                    sel.output_dim()
                ))
                .at(Stage::Transformation));
            }
            let t = build_transformation(&identified, sel, period, config.condition_cap)
                .stage(Stage::Transformation)?;
            (sel.clone(), t)
        }
        None => select_transformation(&identified, period, n, l, config.condition_cap)
            .stage(Stage::Transformation)?,
    };
    stages.push(Stage::Transformation);

    let raw = apply_transformation(&identified, &transformation, period, (n, m, l))
        .stage(Stage::Projection)?;
    let cycled = project_structure(&raw, config.projection_tol).stage(Stage::Projection)?;
    stages.push(Stage::Projection);

    let model = extract_periodic(&cycled, 0.0).stage(Stage::Extraction)?;
    stages.push(Stage::Extraction);

    let horizon = config.markov_horizon.unwrap_or(2 * order);
    let markov_deviation = compare_markov(
        &markov_parameters(&identified, horizon),
        &markov_parameters(&cycled, horizon),
        horizon,
    )?;

    let diagnostics = IdentifyDiagnostics {
        period,
        state_dim: n,
        order,
        completed_stages: stages,
        subspace: identified.diagnostics.clone(),
        assumption,
        selector_rows: selector.stack_rows(),
        transformation_condition: transformation.condition_number,
        structure_residuals: raw.residuals,
        markov_deviation,
        markov_horizon: horizon,
    };
    Ok(Identification {
        model,
        cycled,
        identified,
        transformation,
        diagnostics,
    })
}

/// Entrywise accuracy of recovered per-phase matrices, compared directly
/// (no basis re-alignment).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParameterErrors {
    /// Mean of squared entry differences over all `4 M` matrices.
    pub mse: f64,
    pub max_abs: f64,
}

pub fn parameter_errors<T: Real>(truth: &LptvModel<T>, estimate: &LptvModel<T>) -> Result<ParameterErrors> {
    let same_dims = truth.period() == estimate.period()
        && truth.state_dim() == estimate.state_dim()
        && truth.input_dim() == estimate.input_dim()
        && truth.output_dim() == estimate.output_dim();
    if !same_dims {
        return Err(Error::Dimension("models have different dimensions".into()));
    }
    let (mut sum, mut count, mut max_abs) = (0.0f64, 0usize, 0.0f64);
    let pairs = [
        (truth.a_all(), estimate.a_all()),
        (truth.b_all(), estimate.b_all()),
        (truth.c_all(), estimate.c_all()),
        (truth.d_all(), estimate.d_all()),
    ];
    for (xs, ys) in pairs {
        for (x, y) in xs.iter().zip(ys) {
            for (a, b) in x.iter().zip(y.iter()) {
                let diff = (*a - *b).as_f64();
                sum += diff * diff;
                max_abs = max_abs.max(diff.abs());
                count += 1;
            }
        }
    }
    Ok(ParameterErrors {
        mse: sum / count as f64,
        max_abs,
    })
}
