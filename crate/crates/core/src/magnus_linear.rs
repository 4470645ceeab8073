//! Magnus expansion of `Y' = εA(t)Y`, `Y(0) = I`:
//! `Y(t) = exp(Σ_j ε^j Ω_j(t))`.
//!
//! Ω_j is obtained four ways: the Bernoulli recursion on `S_m^{(j)}`, the
//! explicit pre-Lie words, and two combinatorial simplex-integral formulas
//! (sum over permutations weighted by descents, and its right-nested
//! commutator form). The last two are meant as test oracles.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::linalg::{commutator, expm, MatScalar};
use crate::odeint::{integrate_fn, IntegratorConfig};
use crate::quadrature::{simplex_points, QuadratureRule, TimeGrid};

/// Highest order accepted by the recursive route.
pub const MAX_RECURSIVE_ORDER: usize = 6;
/// Highest order with hard-coded pre-Lie words and combinatorial oracles.
pub const MAX_WORD_ORDER: usize = 4;
/// Gauss–Legendre nodes per simplex dimension in the oracles.
pub const ORACLE_NODES: usize = 12;

/// A time-dependent square matrix `A(t)`.
#[derive(Clone)]
pub struct MatrixFunction<T: MatScalar> {
    dim: usize,
    f: Arc<dyn Fn(f64) -> DMatrix<T> + Send + Sync>,
    degree: Option<usize>,
    period: Option<f64>,
}

impl<T: MatScalar> fmt::Debug for MatrixFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixFunction")
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("period", &self.period)
            .finish()
    }
}

impl<T: MatScalar> MatrixFunction<T> {
    pub fn new(dim: usize, f: impl Fn(f64) -> DMatrix<T> + Send + Sync + 'static) -> Self {
        MatrixFunction {
            dim,
            f: Arc::new(f),
            degree: None,
            period: None,
        }
    }

    /// `A(t) = Σ_k C_k t^k`.
    pub fn polynomial(coeffs: Vec<DMatrix<T>>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        let dim = coeffs[0].nrows();
        let degree = coeffs.len() - 1;
        let mut m = MatrixFunction::new(dim, move |t| {
            let mut acc = coeffs[degree].clone();
            for c in coeffs[..degree].iter().rev() {
                acc = acc * T::from_real(t) + c;
            }
            acc
        });
        m.degree = Some(degree);
        m
    }

    pub fn constant(a: DMatrix<T>) -> Self {
        MatrixFunction::polynomial(vec![a])
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = Some(degree);
        self
    }

    pub fn eval(&self, t: f64) -> DMatrix<T> {
        let a = (self.f)(t);
        debug_assert_eq!(a.shape(), (self.dim, self.dim));
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Polynomial degree in `t`, if known.
    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }
}

/// Bernoulli numbers `B_0..=B_max` as exact rationals, with `B_1 = -1/2`
/// so that `x/(e^x - 1) = Σ B_j x^j / j!`.
pub fn bernoulli_table(max: usize) -> Vec<Ratio<i64>> {
    let mut b = vec![Ratio::from_integer(1i64)];
    for m in 1..=max {
        // Σ_{k=0}^{m} C(m+1, k) B_k = 0
        let mut acc = Ratio::from_integer(0i64);
        let mut binom = 1i64;
        for (k, bk) in b.iter().enumerate() {
            acc += *bk * binom;
            binom = binom * (m as i64 + 1 - k as i64) / (k as i64 + 1);
        }
        b.push(-acc / (m as i64 + 1));
    }
    b
}

fn ratio_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Matrix Magnus terms on the collocation grid of `[0, t]`.
#[derive(Clone, Debug)]
pub struct MagnusTerms<T: MatScalar> {
    grid: TimeGrid,
    /// `R_j` at every grid node, `j = 1..=n`.
    rates: Vec<Vec<DMatrix<T>>>,
    /// `Ω_j` at every grid node.
    omegas: Vec<Vec<DMatrix<T>>>,
    /// `Ω_j(t)`.
    omega_end: Vec<DMatrix<T>>,
}

impl<T: MatScalar> MagnusTerms<T> {
    fn from_rates(grid: TimeGrid, rates: Vec<Vec<DMatrix<T>>>, dim: usize) -> Self {
        let zero = DMatrix::<T>::zeros(dim, dim);
        let axpy = |acc: &mut DMatrix<T>, w: f64, v: &DMatrix<T>| *acc += v * T::from_real(w);
        let omegas = rates
            .iter()
            .map(|r| grid.running_integral(r, zero.clone(), axpy))
            .collect();
        let omega_end = rates
            .iter()
            .map(|r| grid.integral(r, zero.clone(), axpy))
            .collect();
        MagnusTerms {
            grid,
            rates,
            omegas,
            omega_end,
        }
    }

    pub fn order(&self) -> usize {
        self.rates.len()
    }

    /// Final time `t` of the expansion.
    pub fn t(&self) -> f64 {
        self.grid.t()
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// `Ω_j(t)`, 1-based.
    pub fn omega(&self, j: usize) -> &DMatrix<T> {
        &self.omega_end[j - 1]
    }

    /// `Ω_j` at the grid nodes.
    pub fn omega_at_nodes(&self, j: usize) -> &[DMatrix<T>] {
        &self.omegas[j - 1]
    }

    /// `R_j = Ω_j'` at the grid nodes.
    pub fn rate_at_nodes(&self, j: usize) -> &[DMatrix<T>] {
        &self.rates[j - 1]
    }

    /// `Σ_{j ≤ order} ε^j Ω_j(t)`.
    pub fn omega_sum(&self, eps: f64, order: usize) -> DMatrix<T> {
        let dim = self.omega_end[0].nrows();
        let mut acc = DMatrix::<T>::zeros(dim, dim);
        for (j, o) in self.omega_end.iter().take(order).enumerate() {
            acc += o * T::from_real(eps.powi(j as i32 + 1));
        }
        acc
    }
}

fn check_order(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::OrderExceeded { requested: n, max });
    }
    Ok(())
}

fn sample<T: MatScalar>(a: &MatrixFunction<T>, grid: &TimeGrid) -> Vec<DMatrix<T>> {
    grid.nodes().iter().map(|&t| a.eval(t)).collect()
}

fn mat_axpy<T: MatScalar>(acc: &mut DMatrix<T>, w: f64, v: &DMatrix<T>) {
    *acc += v * T::from_real(w);
}

/// Matrix pre-Lie product on a grid: `(P ⊳ Q)(τ) = [∫_0^τ P, Q(τ)]`.
pub fn prelie_on_grid<T: MatScalar>(
    grid: &TimeGrid,
    p: &[DMatrix<T>],
    q: &[DMatrix<T>],
) -> Vec<DMatrix<T>> {
    let dim = p[0].nrows();
    let ip = grid.running_integral(p, DMatrix::zeros(dim, dim), mat_axpy);
    ip.iter().zip(q).map(|(a, b)| commutator(a, b)).collect()
}

/// Ω_1..Ω_n through the Bernoulli recursion
/// `S_m^{(1)} = [Ω_{m-1}, A]`, `S_m^{(j)} = Σ_{k=1}^{m-j} [Ω_k, S_{m-k}^{(j-1)}]`,
/// `R_m = Σ_{j=1}^{m-1} B_j/j! S_m^{(j)}`.
pub fn magnus_terms_recursive<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    t: f64,
    quad: &QuadratureRule,
) -> Result<MagnusTerms<T>> {
    check_order(n, MAX_RECURSIVE_ORDER)?;
    let grid = quad.grid(t);
    let dim = a.dim();
    let zero = DMatrix::<T>::zeros(dim, dim);
    let av = sample(a, &grid);
    let bern = bernoulli_table(n);
    let mut coef = Vec::with_capacity(n);
    let mut fact = 1.0;
    for (j, b) in bern.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        coef.push(ratio_f64(*b) / fact);
    }

    let mut rates: Vec<Vec<DMatrix<T>>> = vec![av.clone()];
    let mut omegas: Vec<Vec<DMatrix<T>>> = vec![grid.running_integral(&av, zero.clone(), mat_axpy)];
    // s[m][j] holds S_m^{(j)} at the nodes; index 0 unused.
    let mut s: Vec<Vec<Vec<DMatrix<T>>>> = vec![Vec::new(), Vec::new()];
    for m in 2..=n {
        let mut sm: Vec<Vec<DMatrix<T>>> = vec![Vec::new(); m];
        sm[1] = omegas[m - 2]
            .iter()
            .zip(&av)
            .map(|(o, a)| commutator(o, a))
            .collect();
        for j in 2..m {
            let mut acc = vec![zero.clone(); grid.len()];
            for k in 1..=(m - j) {
                for ((out, o), sv) in acc.iter_mut().zip(&omegas[k - 1]).zip(&s[m - k][j - 1]) {
                    *out += commutator(o, sv);
                }
            }
            sm[j] = acc;
        }
        let mut r = vec![zero.clone(); grid.len()];
        for (j, sj) in sm.iter().enumerate().skip(1) {
            if coef[j] == 0.0 {
                continue;
            }
            for (out, v) in r.iter_mut().zip(sj) {
                *out += v * T::from_real(coef[j]);
            }
        }
        omegas.push(grid.running_integral(&r, zero.clone(), mat_axpy));
        rates.push(r);
        s.push(sm);
    }
    Ok(MagnusTerms::from_rates(grid, rates, dim))
}

/// `S_m^{(j)}` identities exposed for testing: returns
/// `(S_2^{(1)}, S_3^{(2)})` at the grid nodes.
pub fn recursion_blocks<T: MatScalar>(
    a: &MatrixFunction<T>,
    t: f64,
    quad: &QuadratureRule,
) -> (Vec<DMatrix<T>>, Vec<DMatrix<T>>) {
    let grid = quad.grid(t);
    let dim = a.dim();
    let av = sample(a, &grid);
    let o1 = grid.running_integral(&av, DMatrix::zeros(dim, dim), mat_axpy);
    let s21: Vec<DMatrix<T>> = o1.iter().zip(&av).map(|(o, a)| commutator(o, a)).collect();
    let s32 = o1.iter().zip(&s21).map(|(o, s)| commutator(o, s)).collect();
    (s21, s32)
}

/// Ω_1..Ω_n from the explicit pre-Lie words
/// `R_1 = A`, `R_2 = -½ A⊳A`, `R_3 = ¼ (A⊳A)⊳A + 1/12 A⊳A⊳A`,
/// `R_4 = -1/6 ((A⊳A)⊳A)⊳A - 1/12 A⊳((A⊳A)⊳A)`.
pub fn magnus_terms_prelie<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    t: f64,
    quad: &QuadratureRule,
) -> Result<MagnusTerms<T>> {
    check_order(n, MAX_WORD_ORDER)?;
    let grid = quad.grid(t);
    let dim = a.dim();
    let av = sample(a, &grid);
    let pl = |p: &[DMatrix<T>], q: &[DMatrix<T>]| prelie_on_grid(&grid, p, q);
    let lin = |terms: &[(f64, &Vec<DMatrix<T>>)]| -> Vec<DMatrix<T>> {
        (0..grid.len())
            .map(|i| {
                let mut acc = DMatrix::<T>::zeros(dim, dim);
                for (c, v) in terms {
                    acc += &v[i] * T::from_real(*c);
                }
                acc
            })
            .collect()
    };
    let mut rates = vec![av.clone()];
    if n >= 2 {
        let aa = pl(&av, &av);
        rates.push(lin(&[(-0.5, &aa)]));
        if n >= 3 {
            let aa_a = pl(&aa, &av);
            let a_aa = pl(&av, &aa);
            rates.push(lin(&[(0.25, &aa_a), (1.0 / 12.0, &a_aa)]));
            if n >= 4 {
                let aa_a_a = pl(&aa_a, &av);
                let a_aa_a = pl(&av, &aa_a);
                rates.push(lin(&[(-1.0 / 6.0, &aa_a_a), (-1.0 / 12.0, &a_aa_a)]));
            }
        }
    }
    Ok(MagnusTerms::from_rates(grid, rates, dim))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

fn descents(p: &[usize]) -> usize {
    p.windows(2).filter(|w| w[0] > w[1]).count()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Ω_n(t) = (1/n) Σ_{σ ∈ S_n} (-1)^{d_σ} / C(n-1, d_σ)
///   ∫_{t ≥ t_1 ≥ … ≥ t_n ≥ 0} A(t_{σ(1)}) ⋯ A(t_{σ(n)})`.
pub fn omega_permutation_oracle<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    t: f64,
    nodes: usize,
) -> Result<DMatrix<T>> {
    check_order(n, MAX_WORD_ORDER)?;
    let dim = a.dim();
    let perms: Vec<(Vec<usize>, f64)> = permutations(n)
        .into_iter()
        .map(|p| {
            let d = descents(&p);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            let c = sign / (n as f64 * binomial(n - 1, d));
            (p, c)
        })
        .collect();
    let mut acc = DMatrix::<T>::zeros(dim, dim);
    for (pts, w) in simplex_points(n, t, nodes) {
        let mats: Vec<DMatrix<T>> = pts.iter().map(|&s| a.eval(s)).collect();
        let mut local = DMatrix::<T>::zeros(dim, dim);
        for (p, c) in &perms {
            let mut prod = mats[p[0]].clone();
            for &i in &p[1..] {
                prod = prod * &mats[i];
            }
            local += prod * T::from_real(*c);
        }
        acc += local * T::from_real(w);
    }
    Ok(acc)
}

/// `Ω_n(t) = (1/n) Σ_{σ ∈ S_{n-1}} (-1)^{d_σ} / C(n-1, d_σ)
///   ∫ [A(t_{σ(1)}), [A(t_{σ(2)}), ⋯ [A(t_{σ(n-1)}), A(t_n)] ⋯ ]]`.
pub fn omega_descent_oracle<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    t: f64,
    nodes: usize,
) -> Result<DMatrix<T>> {
    check_order(n, MAX_WORD_ORDER)?;
    let dim = a.dim();
    let perms: Vec<(Vec<usize>, f64)> = permutations(n - 1)
        .into_iter()
        .map(|p| {
            let d = descents(&p);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign / (n as f64 * binomial(n - 1, d)))
        })
        .collect();
    let mut acc = DMatrix::<T>::zeros(dim, dim);
    for (pts, w) in simplex_points(n, t, nodes) {
        let mats: Vec<DMatrix<T>> = pts.iter().map(|&s| a.eval(s)).collect();
        let mut local = DMatrix::<T>::zeros(dim, dim);
        for (p, c) in &perms {
            let mut nested = mats[n - 1].clone();
            for &i in p.iter().rev() {
                nested = commutator(&mats[i], &nested);
            }
            local += nested * T::from_real(*c);
        }
        acc += local * T::from_real(w);
    }
    Ok(acc)
}

/// `exp(Σ_{j ≤ n} ε^j Ω_j(t))`, Ω_j by the recursive route.
pub fn propagate_linear<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    t: f64,
    eps: f64,
    quad: &QuadratureRule,
) -> Result<DMatrix<T>> {
    let terms = magnus_terms_recursive(a, n, t, quad)?;
    Ok(expm(&terms.omega_sum(eps, n)))
}

/// Reference solution of `Y' = εA(t)Y`, `Y(0) = I` on `[0, t]` by the
/// adaptive integrator, column by column.
pub fn reference_propagator(
    a: &MatrixFunction<f64>,
    eps: f64,
    t: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let d = a.dim();
    let cfg = IntegratorConfig::new(tol, tol);
    let a = a.clone();
    let rhs = move |s: f64, y: &[f64], out: &mut [f64]| {
        let m = a.eval(s);
        for c in 0..d {
            for i in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += m[(i, k)] * y[k + c * d];
                }
                out[i + c * d] = eps * acc;
            }
        }
    };
    let y0: Vec<f64> = DMatrix::<f64>::identity(d, d).as_slice().to_vec();
    let traj = integrate_fn(rhs, &y0, 0.0, t, &cfg)?;
    Ok(DMatrix::from_column_slice(d, d, traj.last_state()))
}
