//! Deterministic subspace identification (PO-MOESP family).
//!
//! Steps: stacked block-Hankel data matrix `[U_f; U_p; Y_p; Y_f]`, LQ
//! compression, SVD of the block of `L` relating future outputs to the past
//! instruments, shift-invariance for `A`, top block for `C`, then a linear
//! least-squares fit of `B`, `D` and the initial state to the measured output.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lstsq, spectral_radius, svd, Svd};
use crate::markov::StateSpace;
use crate::model::SignalSequence;
use crate::scalar::Real;

/// Block rows used by [`estimate_order`] when none are configured.
pub const DEFAULT_SCAN_BLOCK_ROWS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HankelConfig {
    /// Past/future horizon `i`; defaults to `2 * ceil(order / q) + 2`.
    pub block_rows: Option<usize>,
    /// Number of Hankel columns; defaults to all available (`N - 2i + 1`).
    pub window: Option<usize>,
    /// Relative singular-value cutoff in the least-squares steps.
    pub lstsq_rcond: f64,
    /// `sigma_order / sigma_{order+1}` below this attaches an ill-conditioning warning.
    pub gap_warning_ratio: f64,
}

impl Default for HankelConfig {
    fn default() -> Self {
        Self {
            block_rows: None,
            window: None,
            lstsq_rcond: 1e-12,
            gap_warning_ratio: 10.0,
        }
    }
}

impl HankelConfig {
    pub fn block_rows_for(&self, order: usize, outputs: usize) -> usize {
        self.block_rows
            .unwrap_or(2 * order.div_ceil(outputs) + 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceDiagnostics {
    pub block_rows: usize,
    pub window: usize,
    /// Singular values of the projected data block, descending.
    pub singular_values: Vec<f64>,
    /// `sigma_order / sigma_{order+1}` (infinite when the next value is zero).
    pub gap_ratio: f64,
    pub spectral_radius: f64,
    pub ill_conditioned: bool,
    pub warnings: Vec<String>,
}

/// Dense identified quadruple in arbitrary state coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifiedLtiModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
    /// Initial state estimated alongside `B` and `D`.
    pub x0: DVector<T>,
    pub diagnostics: SubspaceDiagnostics,
}

impl<T: Real> IdentifiedLtiModel<T> {
    /// Wraps an externally obtained quadruple.
    pub fn from_matrices(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "inconsistent quadruple: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        let rho = spectral_radius(&a).as_f64();
        Ok(Self {
            a,
            b,
            c,
            d,
            x0: DVector::zeros(n),
            diagnostics: SubspaceDiagnostics {
                block_rows: 0,
                window: 0,
                singular_values: Vec::new(),
                gap_ratio: f64::NAN,
                spectral_radius: rho,
                ill_conditioned: false,
                warnings: Vec::new(),
            },
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

impl<T: Real> StateSpace<T> for IdentifiedLtiModel<T> {
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

struct Projection<T: Real> {
    /// Left singular vectors (columns), sign-fixed, descending singular values.
    u: DMatrix<T>,
    sigma: Vec<T>,
    window: usize,
}

fn check_signals<T: Real>(u: &SignalSequence<T>, y: &SignalSequence<T>) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::Argument(format!(
            "input has {} samples but output has {}",
            u.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Largest-magnitude entry of every column made positive.
fn fix_signs<T: Real>(u: &mut DMatrix<T>) {
    for mut col in u.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(p) = pivot {
            if p < T::zero() {
                col.neg_mut();
            }
        }
    }
}

fn project<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    block_rows: usize,
    window: Option<usize>,
) -> Result<Projection<T>> {
    check_signals(u, y)?;
    let (p, q, len) = (u.dim(), y.dim(), u.len());
    let s = block_rows;
    if s == 0 {
        return Err(Error::Argument("block rows must be positive".into()));
    }
    let rows = 2 * s * (p + q);
    let available = (len + 1).saturating_sub(2 * s);
    let window = window.unwrap_or(available);
    if window > available || window < rows {
        return Err(Error::Argument(format!(
            "need at least {} samples for {s} block rows with {p} inputs and {q} outputs \
             (window {window}), got {len}",
            2 * s - 1 + rows.max(window)
        )));
    }

    // [U_f; U_p; Y_p; Y_f], scaled so the Gram matrix is a sample covariance
    let scale = T::lit(1.0 / (window as f64).sqrt());
    let mut w = DMatrix::zeros(window, rows);
    let uv = u.values();
    let yv = y.values();
    for j in 0..window {
        for i in 0..s {
            for c in 0..p {
                w[(j, i * p + c)] = uv[(c, j + s + i)] * scale;
                w[(j, s * p + i * p + c)] = uv[(c, j + i)] * scale;
            }
            for c in 0..q {
                w[(j, 2 * s * p + i * q + c)] = yv[(c, j + i)] * scale;
                w[(j, 2 * s * p + s * q + i * q + c)] = yv[(c, j + s + i)] * scale;
            }
        }
    }
    let l = w.qr().r().transpose();
    let (uf, past) = (s * p, s * (p + q));
    let l32 = l.view((uf + past, uf), (s * q, past)).into_owned();

    let Svd { u: mut left, s: sigma, .. } = svd(&l32);
    fix_signs(&mut left);
    Ok(Projection {
        u: left,
        sigma,
        window,
    })
}

/// Singular values of the projected data block, for eyeballing the order gap.
pub fn estimate_order<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    config: &HankelConfig,
) -> Result<Vec<T>> {
    let s = config.block_rows.unwrap_or(DEFAULT_SCAN_BLOCK_ROWS);
    Ok(project(u, y, s, config.window)?.sigma)
}

/// Identifies an LTI model of the given order from input/output data.
pub fn subspace_identify<T: Real>(
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    order: usize,
    config: &HankelConfig,
) -> Result<IdentifiedLtiModel<T>> {
    check_signals(u, y)?;
    if order == 0 {
        return Err(Error::Argument("model order must be at least 1".into()));
    }
    let q = y.dim();
    let s = config.block_rows_for(order, q);
    if (s - 1) * q < order {
        return Err(Error::Argument(format!(
            "{s} block rows with {q} outputs cannot reveal order {order}; need (i - 1) * q >= order"
        )));
    }
    let proj = project(u, y, s, config.window)?;
    let sigma0 = proj.sigma.first().copied().unwrap_or(T::zero());
    if sigma0 <= T::zero() {
        return Err(Error::NoExcitation);
    }
    if proj.sigma.len() < order {
        return Err(Error::Argument(format!(
            "projection has rank at most {}, below order {order}",
            proj.sigma.len()
        )));
    }

    let mut warnings = Vec::new();
    let sig_n = proj.sigma[order - 1];
    let gap_ratio = match proj.sigma.get(order) {
        Some(&next) if next > T::zero() => (sig_n / next).as_f64(),
        _ => f64::INFINITY,
    };
    let tiny = sig_n <= sigma0 * T::lit(1e-12);
    let ill_conditioned = tiny || gap_ratio < config.gap_warning_ratio;
    if ill_conditioned {
        warnings.push(format!(
            "weak singular-value gap at order {order}: sigma_n/sigma_(n+1) = {gap_ratio:.3e}, \
             sigma_n/sigma_1 = {:.3e}",
            (sig_n / sigma0).as_f64()
        ));
    }

    // extended observability matrix
    let mut gamma = proj.u.columns(0, order).into_owned();
    for (k, mut col) in gamma.column_iter_mut().enumerate() {
        col *= proj.sigma[k].sqrt();
    }
    let up = gamma.rows(0, (s - 1) * q).into_owned();
    let down = gamma.rows(q, (s - 1) * q).into_owned();
    let a = lstsq(&up, &down, config.lstsq_rcond);
    let c = gamma.rows(0, q).into_owned();

    let (x0, b, d) = fit_input_matrices(&a, &c, u, y, config.lstsq_rcond)?;
    let rho = spectral_radius(&a).as_f64();
    if rho >= 1.0 {
        warnings.push(format!("identified A has spectral radius {rho:.4} >= 1"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(IdentifiedLtiModel {
        a,
        b,
        c,
        d,
        x0,
        diagnostics: SubspaceDiagnostics {
            block_rows: s,
            window: proj.window,
            singular_values: proj.sigma.iter().map(|x| x.as_f64()).collect(),
            gap_ratio,
            spectral_radius: rho,
            ill_conditioned,
            warnings,
        },
    })
}

/// Least-squares fit of `(x0, B, D)` in
/// `y(k) = C A^k x0 + sum_{t<k} C A^{k-1-t} B u(t) + D u(k)`.
fn fit_input_matrices<T: Real>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    u: &SignalSequence<T>,
    y: &SignalSequence<T>,
    rcond: f64,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>)> {
    let (n, p, q, len) = (a.nrows(), u.dim(), y.dim(), u.len());
    let params = n + n * p + q * p;
    let mut phi = DMatrix::zeros(len * q, params);
    let mut rhs = DMatrix::zeros(len * q, 1);
    let uv = u.values();

    // A^k for the initial state, and the state response to each entry of B
    let mut powers = DMatrix::identity(n, n);
    let mut resp = DMatrix::zeros(n, n * p);
    for k in 0..len {
        let cz = c * &powers;
        let cs = c * &resp;
        for r in 0..q {
            let row = k * q + r;
            for i in 0..n {
                phi[(row, i)] = cz[(r, i)];
            }
            for col in 0..n * p {
                phi[(row, n + col)] = cs[(r, col)];
            }
            for j in 0..p {
                phi[(row, n + n * p + r + q * j)] = uv[(j, k)];
            }
            rhs[(row, 0)] = y.values()[(r, k)];
        }
        powers = a * powers;
        resp = a * resp;
        for j in 0..p {
            for i in 0..n {
                resp[(i, i + n * j)] += uv[(j, k)];
            }
        }
    }
    if !phi.iter().all(|x| x.as_f64().is_finite()) {
        return Err(Error::Identification(
            "regressors diverged; identified dynamics are unstable".into(),
        ));
    }
    let theta = lstsq(&phi, &rhs, rcond);
    let x0 = DVector::from_fn(n, |i, _| theta[(i, 0)]);
    let b = DMatrix::from_fn(n, p, |i, j| theta[(n + i + n * j, 0)]);
    let d = DMatrix::from_fn(q, p, |r, j| theta[(n + n * p + r + q * j, 0)]);
    Ok((x0, b, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{compare_markov, markov_parameters, Quadruple};
    use crate::model::random_input;

    fn simulate(q: &Quadruple<f64>, u: &SignalSequence<f64>) -> SignalSequence<f64> {
        let mut x = DVector::zeros(q.a.nrows());
        let mut ys = DMatrix::zeros(q.c.nrows(), u.len());
        for k in 0..u.len() {
            let uk = u.values().column(k);
            ys.set_column(k, &(&q.c * &x + &q.d * uk));
            x = &q.a * x + &q.b * uk;
        }
        SignalSequence::new(ys, 0).unwrap()
    }

    fn second_order() -> Quadruple<f64> {
        Quadruple {
            a: DMatrix::from_row_slice(2, 2, &[0.7, 0.3, -0.2, 0.5]),
            b: DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, -0.4]),
            d: DMatrix::from_element(1, 1, 0.2),
        }
    }

    #[test]
    fn recovers_second_order_system() {
        let sys = second_order();
        let u = random_input::<f64>(1, 600, 1);
        let y = simulate(&sys, &u);
        let id = subspace_identify(&u, &y, 2, &HankelConfig::default()).unwrap();
        let dev = compare_markov(&markov_parameters(&sys, 8), &markov_parameters(&id, 8), 8).unwrap();
        assert!(dev < 1e-8, "{dev}");
        assert!(!id.diagnostics.ill_conditioned);
        assert_eq!(id.order(), 2);
    }

    #[test]
    fn identification_is_deterministic() {
        let sys = second_order();
        let u = random_input::<f64>(1, 400, 3);
        let y = simulate(&sys, &u);
        let a = subspace_identify(&u, &y, 2, &HankelConfig::default()).unwrap();
        let b = subspace_identify(&u, &y, 2, &HankelConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_data_has_no_excitation() {
        let z = SignalSequence::<f64>::zeros(1, 300);
        let err = subspace_identify(&z, &z, 2, &HankelConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoExcitation));
    }

    #[test]
    fn short_data_is_rejected() {
        let u = random_input::<f64>(1, 20, 1);
        assert!(matches!(
            subspace_identify(&u, &u, 2, &HankelConfig::default()),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            estimate_order(&u, &u, &HankelConfig::default()),
            Err(Error::Argument(_))
        ));
        let v = random_input::<f64>(1, 21, 1);
        assert!(matches!(
            subspace_identify(&u, &v, 1, &HankelConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn too_few_block_rows_for_order() {
        let u = random_input::<f64>(1, 400, 1);
        let cfg = HankelConfig {
            block_rows: Some(2),
            ..HankelConfig::default()
        };
        assert!(matches!(subspace_identify(&u, &u, 2, &cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn order_profile_shows_gap() {
        let sys = second_order();
        let u = random_input::<f64>(1, 500, 4);
        let y = simulate(&sys, &u);
        let sv = estimate_order(&u, &y, &HankelConfig::default()).unwrap();
        assert!(sv[1] / sv[2] > 1e6);
    }

    #[test]
    fn default_block_rows() {
        let cfg = HankelConfig::default();
        assert_eq!(cfg.block_rows_for(6, 3), 6);
        assert_eq!(cfg.block_rows_for(4, 1), 10);
        assert_eq!(cfg.block_rows_for(5, 2), 8);
    }
}
