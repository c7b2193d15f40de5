//! Periodic state-space models, signals and simulation.
//!
//! An `M`-periodic plant evolves as
//!
//! ```text
//! x(k+1) = A_k x(k) + B_k (u(k) + w(k))
//! y(k)   = C_k x(k) + D_k u(k) + v(k)
//! ```
//!
//! where the matrices used at absolute time `k` are those of phase `k mod M`.
//! Process noise `w` enters through the input channel.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, from_rows_f64, numerical_rank, spectral_radius, vector_all_finite};
use crate::scalar::Real;

/// An `M`-periodic discrete-time state-space model.
#[derive(Clone, Debug, PartialEq)]
pub struct LptvModel<T: Real> {
    n: usize,
    m: usize,
    l: usize,
    a: Vec<DMatrix<T>>,
    b: Vec<DMatrix<T>>,
    c: Vec<DMatrix<T>>,
    d: Vec<DMatrix<T>>,
}

impl<T: Real> LptvModel<T> {
    /// Builds a model from per-phase matrices. The period is the list length;
    /// dimensions are taken from phase 0 and every phase is checked against them.
    pub fn new(
        a: Vec<DMatrix<T>>,
        b: Vec<DMatrix<T>>,
        c: Vec<DMatrix<T>>,
        d: Vec<DMatrix<T>>,
    ) -> Result<Self> {
        let period = a.len();
        if period == 0 {
            return Err(Error::Dimension("period must be at least 1".into()));
        }
        for (name, len) in [("B", b.len()), ("C", c.len()), ("D", d.len())] {
            if len != period {
                return Err(Error::Dimension(format!(
                    "{name} has {len} phases but A has {period}"
                )));
            }
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        let l = c[0].nrows();
        if n == 0 || m == 0 || l == 0 {
            return Err(Error::Dimension(format!(
                "state, input and output dimensions must be positive (got n={n}, m={m}, l={l})"
            )));
        }
        for k in 0..period {
            let checks = [
                ("A", a[k].shape(), (n, n)),
                ("B", b[k].shape(), (n, m)),
                ("C", c[k].shape(), (l, n)),
                ("D", d[k].shape(), (l, m)),
            ];
            for (name, got, want) in checks {
                if got != want {
                    return Err(Error::Dimension(format!(
                        "phase {k}: {name}_{k} is {}x{}, expected {}x{}",
                        got.0, got.1, want.0, want.1
                    )));
                }
            }
            for (name, mat) in [("A", &a[k]), ("B", &b[k]), ("C", &c[k]), ("D", &d[k])] {
                if !all_finite(mat) {
                    return Err(Error::Dimension(format!(
                        "phase {k}: {name}_{k} has non-finite entries"
                    )));
                }
            }
        }
        Ok(Self { n, m, l, a, b, c, d })
    }

    /// The numerical example plant used throughout the reproduction experiments
    /// (`n = 2`, `M = 3`, SISO, observability companion form).
    pub fn pex() -> Self {
        let a = vec![
            from_rows_f64(&[&[0.0, 1.0], &[0.5, 1.0]]),
            from_rows_f64(&[&[0.0, 1.0], &[0.9, -0.95]]),
            from_rows_f64(&[&[0.0, 1.0], &[1.0, 0.5]]),
        ];
        let b = vec![
            from_rows_f64(&[&[1.0], &[2.0]]),
            from_rows_f64(&[&[1.5], &[2.0]]),
            from_rows_f64(&[&[1.0], &[0.5]]),
        ];
        let c = vec![from_rows_f64(&[&[1.0, 0.0]]); 3];
        let d = vec![from_rows_f64(&[&[0.5]]); 3];
        Self::new(a, b, c, d).expect("built-in plant is well formed")
    }

    pub fn period(&self) -> usize {
        self.a.len()
    }
    pub fn state_dim(&self) -> usize {
        self.n
    }
    pub fn input_dim(&self) -> usize {
        self.m
    }
    pub fn output_dim(&self) -> usize {
        self.l
    }

    /// Phase of absolute time `k`.
    pub fn phase(&self, k: i64) -> usize {
        k.rem_euclid(self.period() as i64) as usize
    }

    /// Matrices are indexed modulo the period.
    pub fn a(&self, k: usize) -> &DMatrix<T> {
        &self.a[k % self.period()]
    }
    pub fn b(&self, k: usize) -> &DMatrix<T> {
        &self.b[k % self.period()]
    }
    pub fn c(&self, k: usize) -> &DMatrix<T> {
        &self.c[k % self.period()]
    }
    pub fn d(&self, k: usize) -> &DMatrix<T> {
        &self.d[k % self.period()]
    }

    pub fn a_all(&self) -> &[DMatrix<T>] {
        &self.a
    }
    pub fn b_all(&self) -> &[DMatrix<T>] {
        &self.b
    }
    pub fn c_all(&self) -> &[DMatrix<T>] {
        &self.c
    }
    pub fn d_all(&self) -> &[DMatrix<T>] {
        &self.d
    }

    /// `A_{M-1} ... A_1 A_0`.
    pub fn monodromy(&self) -> DMatrix<T> {
        self.a
            .iter()
            .fold(DMatrix::identity(self.n, self.n), |acc, ak| ak * acc)
    }

    /// Observability matrix of depth `n` starting at phase `k`:
    /// rows `C_k, C_{k+1} A_k, ..., C_{k+n-1} A_{k+n-2} ... A_k`.
    pub fn observability_matrix(&self, k: usize) -> DMatrix<T> {
        let (n, l) = (self.n, self.l);
        let mut out = DMatrix::zeros(n * l, n);
        let mut prod = DMatrix::identity(n, n);
        for j in 0..n {
            let row = self.c(k + j) * &prod;
            out.view_mut((j * l, 0), (l, n)).copy_from(&row);
            prod = self.a(k + j) * prod;
        }
        out
    }

    /// Reachability matrix
    /// `[B_{k+n-1}, A_{k+n-1} B_{k+n-2}, ..., A_{k+n-1} ... A_{k+1} B_k]`.
    pub fn controllability_matrix(&self, k: usize) -> DMatrix<T> {
        let (n, m) = (self.n, self.m);
        let mut out = DMatrix::zeros(n, n * m);
        let mut prod = DMatrix::identity(n, n);
        for j in 0..n {
            let phase = k + n - 1 - j;
            let col = &prod * self.b(phase);
            out.view_mut((0, j * m), (n, m)).copy_from(&col);
            prod = prod * self.a(phase);
        }
        out
    }

    /// Reachability of the state at phase `k` from `steps` preceding inputs:
    /// `[B_{k-1}, A_{k-1} B_{k-2}, ..., A_{k-1} ... A_{k-steps+1} B_{k-steps}]`.
    pub fn reachability_matrix(&self, k: usize, steps: usize) -> DMatrix<T> {
        let (n, m, period) = (self.n, self.m, self.period() as i64);
        let mut out = DMatrix::zeros(n, steps * m);
        let mut prod = DMatrix::identity(n, n);
        for j in 0..steps {
            let phase = (k as i64 - 1 - j as i64).rem_euclid(period) as usize;
            let col = &prod * &self.b[phase];
            out.view_mut((0, j * m), (n, m)).copy_from(&col);
            prod *= &self.a[phase];
        }
        out
    }

    /// Per-phase state change of basis `x_k -> P_k^{-1} x_k`:
    /// `A_k -> P_{k+1}^{-1} A_k P_k`, `B_k -> P_{k+1}^{-1} B_k`, `C_k -> C_k P_k`.
    pub fn change_basis(&self, p: &[DMatrix<T>]) -> Result<Self> {
        let period = self.period();
        if p.len() != period {
            return Err(Error::Dimension(format!(
                "expected {period} basis blocks, got {}",
                p.len()
            )));
        }
        let inv: Vec<DMatrix<T>> = p
            .iter()
            .enumerate()
            .map(|(k, pk)| {
                pk.clone().try_inverse().ok_or_else(|| {
                    Error::Argument(format!("basis block {k} is singular"))
                })
            })
            .collect::<Result<_>>()?;
        let a = (0..period)
            .map(|k| &inv[(k + 1) % period] * &self.a[k] * &p[k])
            .collect();
        let b = (0..period)
            .map(|k| &inv[(k + 1) % period] * &self.b[k])
            .collect();
        let c = (0..period).map(|k| &self.c[k] * &p[k]).collect();
        Self::new(a, b, c, self.d.clone())
    }

    pub fn cast<U: Real>(&self) -> LptvModel<U> {
        let conv = |v: &[DMatrix<T>]| -> Vec<DMatrix<U>> {
            v.iter().map(|m| m.map(|x| U::lit(x.as_f64()))).collect()
        };
        LptvModel {
            n: self.n,
            m: self.m,
            l: self.l,
            a: conv(&self.a),
            b: conv(&self.b),
            c: conv(&self.c),
            d: conv(&self.d),
        }
    }
}

/// A sampled vector signal. Column `k` of `values` is the sample at absolute
/// time `start_time + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSequence<T: Real> {
    values: DMatrix<T>,
    start_time: i64,
}

impl<T: Real> SignalSequence<T> {
    /// `values` is `dim x len`.
    pub fn new(values: DMatrix<T>, start_time: i64) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Dimension("signal dimension must be positive".into()));
        }
        if !all_finite(&values) {
            return Err(Error::Dimension("signal has non-finite samples".into()));
        }
        Ok(Self { values, start_time })
    }

    pub fn from_samples(samples: &[DVector<T>], start_time: i64) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.len());
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Dimension("samples have differing dimensions".into()));
        }
        if dim == 0 {
            return Err(Error::Dimension("signal dimension must be positive".into()));
        }
        let values = DMatrix::from_fn(dim, samples.len(), |i, k| samples[k][i]);
        Self::new(values, start_time)
    }

    /// Scalar signal from a slice.
    pub fn scalar(samples: &[T]) -> Self {
        Self::new(DMatrix::from_row_slice(1, samples.len(), samples), 0)
            .expect("finite scalar samples")
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            values: DMatrix::zeros(dim, len),
            start_time: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
    pub fn len(&self) -> usize {
        self.values.ncols()
    }
    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }
    pub fn start_time(&self) -> i64 {
        self.start_time
    }
    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }
    pub fn at(&self, k: usize) -> DVector<T> {
        self.values.column(k).into_owned()
    }

    /// Samples delayed by `shift` steps: the first `shift` samples are zero
    /// and the trailing `shift` samples are dropped.
    pub fn delayed(&self, shift: usize) -> Self {
        let (d, n) = self.values.shape();
        let values = DMatrix::from_fn(d, n, |i, k| {
            if k >= shift {
                self.values[(i, k - shift)]
            } else {
                T::zero()
            }
        });
        Self {
            values,
            start_time: self.start_time,
        }
    }
}

/// Gaussian process/measurement noise configuration.
///
/// Samples come from a `ChaCha8` stream seeded with `seed`; at each step the
/// `m` components of `w(k)` are drawn first, then the `l` components of `v(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub process_variance: f64,
    pub measurement_variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(process_variance: f64, measurement_variance: f64, seed: u64) -> Result<Self> {
        for (name, v) in [
            ("process variance", process_variance),
            ("measurement variance", measurement_variance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        Ok(Self {
            process_variance,
            measurement_variance,
            seed,
        })
    }

    pub fn process(variance: f64, seed: u64) -> Result<Self> {
        Self::new(variance, 0.0, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseRanks {
    pub phase: usize,
    pub observability_rank: usize,
    /// Rank of the `n`-step matrix from [`LptvModel::controllability_matrix`].
    pub controllability_rank: usize,
    /// Rank of the `n M`-step reachability matrix ending at this phase.
    pub reachability_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub state_dim: usize,
    pub phases: Vec<PhaseRanks>,
    pub observable: bool,
    pub controllable: bool,
}

impl ValidationReport {
    /// Errors unless the model is observable and controllable at every phase.
    pub fn require_minimal(&self) -> Result<()> {
        if self.observable && self.controllable {
            return Ok(());
        }
        let bad: Vec<String> = self
            .phases
            .iter()
            .filter(|p| {
                p.observability_rank < self.state_dim || p.reachability_rank < self.state_dim
            })
            .map(|p| {
                format!(
                    "phase {}: observability rank {}, reachability rank {}",
                    p.phase, p.observability_rank, p.reachability_rank
                )
            })
            .collect();
        Err(Error::Validation(format!(
            "model is not observable and controllable at every phase (n = {}; {})",
            self.state_dim,
            bad.join("; ")
        )))
    }
}

/// Ranks of the periodic observability and controllability matrices at every phase.
///
/// `observable` needs the `n`-step observability matrix to have full rank at
/// every phase, since the transformation selects `n` of its rows.
/// `controllable` uses reachability over `n M` steps: the `n`-step matrix can
/// drop rank at a phase of a plant whose lifted (cycled) pair is still
/// controllable, and the lifted pair is what identification relies on.
pub fn validate_model<T: Real>(model: &LptvModel<T>) -> ValidationReport {
    let n = model.state_dim();
    let steps = n * model.period();
    let phases: Vec<PhaseRanks> = (0..model.period())
        .map(|k| PhaseRanks {
            phase: k,
            observability_rank: numerical_rank(&model.observability_matrix(k)),
            controllability_rank: numerical_rank(&model.controllability_matrix(k)),
            reachability_rank: numerical_rank(&model.reachability_matrix(k, steps)),
        })
        .collect();
    ValidationReport {
        state_dim: n,
        observable: phases.iter().all(|p| p.observability_rank == n),
        controllable: phases.iter().all(|p| p.reachability_rank == n),
        phases,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation<T: Real> {
    pub output: SignalSequence<T>,
    /// `x(k)` for the same time steps as `output`.
    pub states: SignalSequence<T>,
}

/// Simulates the periodic plant. Phase of sample `k` is
/// `(input.start_time() + k) mod M`.
pub fn simulate_lptv<T: Real>(
    model: &LptvModel<T>,
    input: &SignalSequence<T>,
    x0: &DVector<T>,
    noise: Option<&NoiseSpec>,
) -> Result<Simulation<T>> {
    let (n, m, l) = (model.state_dim(), model.input_dim(), model.output_dim());
    if input.dim() != m {
        return Err(Error::Dimension(format!(
            "input has dimension {}, model expects {m}",
            input.dim()
        )));
    }
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model expects {n}",
            x0.len()
        )));
    }
    if !vector_all_finite(x0) {
        return Err(Error::Dimension("initial state has non-finite entries".into()));
    }
    let len = input.len();
    let mut noise_gen = noise.map(|spec| NoiseStream::new(spec));
    let mut ys = DMatrix::zeros(l, len);
    let mut xs = DMatrix::zeros(n, len);
    let mut x = x0.clone();
    for k in 0..len {
        let phase = model.phase(input.start_time() + k as i64);
        let u = input.values().column(k);
        xs.set_column(k, &x);
        let (w, v) = match noise_gen.as_mut() {
            Some(g) => g.draw::<T>(m, l),
            None => (DVector::zeros(m), DVector::zeros(l)),
        };
        let y = model.c(phase) * &x + model.d(phase) * u + v;
        ys.set_column(k, &y);
        x = model.a(phase) * &x + model.b(phase) * (u + w);
    }
    Ok(Simulation {
        output: SignalSequence::new(ys, input.start_time())?,
        states: SignalSequence::new(xs, input.start_time())?,
    })
}

struct NoiseStream {
    rng: ChaCha8Rng,
    w_sd: f64,
    v_sd: f64,
}

impl NoiseStream {
    fn new(spec: &NoiseSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            w_sd: spec.process_variance.sqrt(),
            v_sd: spec.measurement_variance.sqrt(),
        }
    }

    fn draw<T: Real>(&mut self, m: usize, l: usize) -> (DVector<T>, DVector<T>) {
        let mut sample = |sd: f64| {
            let z: f64 = self.rng.sample(StandardNormal);
            T::lit(sd * z)
        };
        let w = DVector::from_fn(m, |_, _| sample(self.w_sd));
        let v = DVector::from_fn(l, |_, _| sample(self.v_sd));
        (w, v)
    }
}

/// Standard-normal input signal of the given dimension and length.
pub fn random_input<T: Real>(dim: usize, len: usize, seed: u64) -> SignalSequence<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = DMatrix::from_fn(dim, len, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        T::lit(z)
    });
    SignalSequence { values, start_time: 0 }
}

/// Dimensions of a periodic plant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PlantDims {
    pub period: usize,
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

const GENERATION_ATTEMPTS: usize = 1000;

/// Draws a random plant that is observable and controllable at every phase and
/// whose monodromy matrix has spectral radius at most `stability_margin`.
///
/// Entries are standard normal (`A_k` scaled by `1/sqrt(n)`); each candidate's
/// `A_k` are rescaled so the monodromy radius lands on a value drawn uniformly
/// from `[0.2, 1] * stability_margin`, then candidates failing the rank checks
/// are rejected.
pub fn generate_random_plant<T: Real>(
    dims: PlantDims,
    seed: u64,
    stability_margin: f64,
) -> Result<LptvModel<T>> {
    let PlantDims { period, n, m, l } = dims;
    if period == 0 || n == 0 || m == 0 || l == 0 {
        return Err(Error::Argument(format!(
            "plant dimensions must be positive, got M={period}, n={n}, m={m}, l={l}"
        )));
    }
    if !(stability_margin > 0.0 && stability_margin < 1.0) {
        return Err(Error::Argument(format!(
            "stability margin must lie in (0, 1), got {stability_margin}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let draw = |rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64| -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| scale * normal.sample(rng))
    };
    for _ in 0..GENERATION_ATTEMPTS {
        let mut a: Vec<DMatrix<f64>> = (0..period)
            .map(|_| draw(&mut rng, n, n, 1.0 / (n as f64).sqrt()))
            .collect();
        let b: Vec<DMatrix<f64>> = (0..period).map(|_| draw(&mut rng, n, m, 1.0)).collect();
        let c: Vec<DMatrix<f64>> = (0..period).map(|_| draw(&mut rng, l, n, 1.0)).collect();
        let d: Vec<DMatrix<f64>> = (0..period).map(|_| draw(&mut rng, l, m, 1.0)).collect();
        let target = stability_margin * rng.random_range(0.2..=1.0);

        let mono = a.iter().fold(DMatrix::identity(n, n), |acc, ak| ak * acc);
        let rho = spectral_radius(&mono);
        if !(rho > 1e-8) {
            continue;
        }
        let scale = (target / rho).powf(1.0 / period as f64);
        for ak in &mut a {
            *ak *= scale;
        }
        let to_t = |v: Vec<DMatrix<f64>>| v.into_iter().map(|x| x.map(T::lit)).collect();
        let Ok(model) = LptvModel::<T>::new(to_t(a), to_t(b), to_t(c), to_t(d)) else {
            continue;
        };
        if spectral_radius(&model.monodromy()).as_f64() > stability_margin {
            continue;
        }
        let report = validate_model(&model);
        if report.observable && report.controllable {
            return Ok(model);
        }
    }
    Err(Error::Generation {
        attempts: GENERATION_ATTEMPTS,
    })
}
