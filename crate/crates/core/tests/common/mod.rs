//! Independent oracles shared by the integration tests. Nothing here calls the
//! library routine it is used to check.
#![allow(dead_code)]

use cyclid::{generate_random_plant, LptvModel, PlantDims, SignalSequence};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Plant `index` of the shared 100-plant suite: single-input single-output,
/// M cycling through 1..=4 and n through 1..=3.
pub fn suite_plant(index: u64) -> LptvModel<f64> {
    let dims = PlantDims {
        period: 1 + (index % 4) as usize,
        n: 1 + ((index / 4) % 3) as usize,
        m: 1,
        l: 1,
    };
    generate_random_plant(dims, 1000 + index, 0.95).expect("suite plant")
}

/// Plant with up to two inputs and outputs, for the simulation checks.
pub fn mimo_plant(index: u64) -> LptvModel<f64> {
    let dims = PlantDims {
        period: 1 + (index % 5) as usize,
        n: 1 + ((index / 5) % 3) as usize,
        m: 1 + (index % 2) as usize,
        l: 1 + ((index / 2) % 2) as usize,
    };
    generate_random_plant(dims, 5000 + index, 0.9).expect("mimo plant")
}

/// Dense matrix `Q1 diag(s) Q2^T` with singular values spread over
/// `[1, cond]`, so its condition number is exactly `cond`.
pub fn random_similarity(rng: &mut ChaCha8Rng, dim: usize, cond: f64) -> DMatrix<f64> {
    let q1 = gaussian(rng, dim, dim).qr().q();
    let q2 = gaussian(rng, dim, dim).qr().q();
    let s = DVector::from_fn(dim, |i, _| {
        if dim == 1 {
            1.0
        } else {
            cond.powf(i as f64 / (dim - 1) as f64)
        }
    });
    q1 * DMatrix::from_diagonal(&s) * q2.transpose()
}

/// Cyclic reformulation assembled entry by entry.
pub struct OracleCycled {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

pub fn oracle_cycle(p: &LptvModel<f64>) -> OracleCycled {
    let (mm, n, m, l) = (p.period(), p.state_dim(), p.input_dim(), p.output_dim());
    let mut a = DMatrix::zeros(mm * n, mm * n);
    let mut b = DMatrix::zeros(mm * n, mm * m);
    let mut c = DMatrix::zeros(mm * l, mm * n);
    let mut d = DMatrix::zeros(mm * l, mm * m);
    for k in 0..mm {
        let row = (k + 1) % mm;
        for i in 0..n {
            for j in 0..n {
                a[(row * n + i, k * n + j)] = p.a(k)[(i, j)];
            }
            for j in 0..m {
                b[(row * n + i, k * m + j)] = p.b(k)[(i, j)];
            }
        }
        for i in 0..l {
            for j in 0..n {
                c[(k * l + i, k * n + j)] = p.c(k)[(i, j)];
            }
            for j in 0..m {
                d[(k * l + i, k * m + j)] = p.d(k)[(i, j)];
            }
        }
    }
    OracleCycled { a, b, c, d }
}

/// Block superdiagonal of identities plus the bottom-left identity.
pub fn oracle_shift(q: usize, period: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(q * period, q * period);
    for r in 0..period {
        let c = (r + 1) % period;
        for i in 0..q {
            s[(r * q + i, c * q + i)] += 1.0;
        }
    }
    s
}

/// Direct time-varying recursion with phase `(start + k) mod M`.
pub fn oracle_lptv(p: &LptvModel<f64>, u: &DMatrix<f64>, start: i64, x0: &DVector<f64>) -> DMatrix<f64> {
    let mm = p.period() as i64;
    let mut x = x0.clone();
    let mut y = DMatrix::zeros(p.output_dim(), u.ncols());
    for k in 0..u.ncols() {
        let ph = (start + k as i64).rem_euclid(mm) as usize;
        let uk = u.column(k);
        y.set_column(k, &(p.c(ph) * &x + p.d(ph) * uk));
        x = p.a(ph) * &x + p.b(ph) * uk;
    }
    y
}

/// Time-invariant recursion with process noise added to the input channel.
pub fn oracle_lti(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    u: &DMatrix<f64>,
    w: Option<&DMatrix<f64>>,
) -> DMatrix<f64> {
    let mut x = DVector::zeros(a.nrows());
    let mut y = DMatrix::zeros(c.nrows(), u.ncols());
    for k in 0..u.ncols() {
        let uk = u.column(k).into_owned();
        let drive = match w {
            Some(w) => &uk + w.column(k),
            None => uk.clone(),
        };
        y.set_column(k, &(c * &x + d * &uk));
        x = a * &x + b * drive;
    }
    y
}

/// `D, CB, CAB, ...` by repeated multiplication.
pub fn oracle_markov(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    horizon: usize,
) -> Vec<DMatrix<f64>> {
    let mut out = vec![d.clone()];
    let mut ab = b.clone();
    for _ in 1..horizon {
        out.push(c * &ab);
        ab = a * ab;
    }
    out
}

/// Largest entry outside the pattern (`cyclic`: only block (r, c) with
/// r = c + 1 mod M; otherwise block-diagonal), relative to max(1, ||M||_F).
pub fn off_pattern(m: &DMatrix<f64>, period: usize, rb: usize, cb: usize, cyclic: bool) -> f64 {
    let mut off = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let (r, c) = (i / rb, j / cb);
            let allowed = if cyclic { r == (c + 1) % period } else { r == c };
            if !allowed {
                off += m[(i, j)] * m[(i, j)];
            }
        }
    }
    off.sqrt() / m.norm().max(1.0)
}

pub fn signal(values: DMatrix<f64>, start: i64) -> SignalSequence<f64> {
    SignalSequence::new(values, start).unwrap()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
