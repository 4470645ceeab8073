//! Stroboscopic high-order averaging of `x' = εg(x, t)` with `g`
//! `T`-periodic, and its linear specialization, the Floquet–Magnus
//! factorization `Y(t) = exp(Λ(t)) exp(tF)`.
//!
//! The near-identity change of variables `x = Ψ(X, t)` is generated by
//! `W = Σ ε^j W_j` with `W_j = ∫_0^t R_j`. Choosing `G_j = ⟨U_j⟩` makes every
//! `R_j = U_j - G_j` zero-mean, so `W` is periodic and vanishes at `t = 0`
//! and at every multiple of `T`: exact and averaged solutions agree at the
//! stroboscopic times `nT`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{
    antiderivative, prelie, time_average, AntiderivativeMode, FieldHandle, SeriesTerms, TermRole,
};
use crate::linalg::{expm, MatScalar};
use crate::magnus_linear::{prelie_on_grid, MatrixFunction};
use crate::magnus_nonlinear::{as_integrator_failure, flow_frozen};
use crate::odeint::{try_integrate_fn, IntegratorConfig, Trajectory};
use crate::quadrature::{QuadratureRule, TimeGrid};

/// Highest averaging order.
pub const MAX_AVERAGING_ORDER: usize = 3;

/// Averaged vector fields `G_j`, zero-mean rates `R_j` and periodic
/// generators `W_j = ∫_0^t R_j`.
#[derive(Clone, Debug)]
pub struct AveragedSystem {
    pub g_terms: SeriesTerms,
    pub r_terms: SeriesTerms,
    pub w_terms: SeriesTerms,
    pub period: f64,
}

impl AveragedSystem {
    pub fn order(&self) -> usize {
        self.g_terms.order()
    }

    /// The same system truncated at a lower order.
    pub fn truncated(&self, order: usize) -> Result<AveragedSystem> {
        if order == 0 || order > self.order() {
            return Err(Error::OrderExceeded {
                requested: order,
                max: self.order(),
            });
        }
        let cut = |s: &SeriesTerms| SeriesTerms::new(s.role, s.terms[..order].to_vec());
        Ok(AveragedSystem {
            g_terms: cut(&self.g_terms),
            r_terms: cut(&self.r_terms),
            w_terms: cut(&self.w_terms),
            period: self.period,
        })
    }

    /// `G_j`, 1-based.
    pub fn g(&self, j: usize) -> &FieldHandle {
        self.g_terms.term(j)
    }

    pub fn r(&self, j: usize) -> &FieldHandle {
        self.r_terms.term(j)
    }

    pub fn w(&self, j: usize) -> &FieldHandle {
        self.w_terms.term(j)
    }
}

fn declared_period(g: &FieldHandle) -> Result<f64> {
    g.period().ok_or(Error::NotPeriodic)
}

/// `G_1..G_n` by the averaging recursion
///
/// ```text
/// U_1 = g
/// U_2 = -½ R_1⊳R_1 - R_1⊳G_1
/// U_3 = -½ (R_1⊳R_2 + R_2⊳R_1) - 1/6 R_1⊳(R_1⊳R_1)
///       - R_1⊳G_2 - R_2⊳G_1 - ½ R_1⊳(R_1⊳G_1)
/// G_j = ⟨U_j⟩,  R_j = U_j - G_j
/// ```
///
/// with the integral-from-zero ⊳.
pub fn averaged_terms(g: &FieldHandle, n: usize, quad: &QuadratureRule) -> Result<AveragedSystem> {
    let period = declared_period(g)?;
    if n == 0 || n > MAX_AVERAGING_ORDER {
        return Err(Error::OrderExceeded {
            requested: n,
            max: MAX_AVERAGING_ORDER,
        });
    }
    let mode = AntiderivativeMode::FromZero;
    let pl = |p: &FieldHandle, q: &FieldHandle| prelie(p, q, &mode, quad);
    let mut gs: Vec<FieldHandle> = Vec::new();
    let mut rs: Vec<FieldHandle> = Vec::new();
    for j in 1..=n {
        // Terms sharing a left operand are merged by bilinearity of ⊳ so
        // each ∂_t⁻¹ R_i is evaluated once per node.
        let u = match j {
            1 => g.clone(),
            2 => {
                let (r1, g1) = (&rs[0], &gs[0]);
                pl(r1, &FieldHandle::linear_combination(&[(-0.5, r1), (-1.0, g1)])?)?
            }
            _ => {
                let (r1, r2) = (&rs[0], &rs[1]);
                let (g1, g2) = (&gs[0], &gs[1]);
                let right1 = FieldHandle::linear_combination(&[
                    (-0.5, r2),
                    (-1.0 / 6.0, &pl(r1, r1)?),
                    (-1.0, g2),
                    (-0.5, &pl(r1, g1)?),
                ])?;
                let right2 = FieldHandle::linear_combination(&[(-0.5, r1), (-1.0, g1)])?;
                pl(r1, &right1)?.add(&pl(r2, &right2)?)?
            }
        };
        let u = u.with_period_if_known(period);
        let gj = time_average(&u, period, quad)?;
        let rj = u.sub(&gj)?.with_period_if_known(period);
        gs.push(gj);
        rs.push(rj);
    }
    let ws = rs
        .iter()
        .map(|r| antiderivative(r, &mode, quad).map(|w| w.with_period_if_known(period)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragedSystem {
        g_terms: SeriesTerms::new(TermRole::Averaged, gs),
        r_terms: SeriesTerms::new(TermRole::Rate, rs),
        w_terms: SeriesTerms::new(TermRole::Generator, ws),
        period,
    })
}

/// The closed formulas
/// `G_1 = ⟨g⟩`, `G_2 = -½ ⟨g⊳g⟩`, `G_3 = 1/12 ⟨g⊳(g⊳g)⟩ + ¼ ⟨(g⊳g)⊳g⟩`,
/// evaluated directly by nested quadrature.
pub fn averaged_terms_explicit(
    g: &FieldHandle,
    period: f64,
    quad: &QuadratureRule,
) -> Result<[FieldHandle; 3]> {
    let g = if g.is_autonomous() { g.clone() } else { g.with_period(period) };
    let mode = AntiderivativeMode::FromZero;
    let pl = |p: &FieldHandle, q: &FieldHandle| prelie(p, q, &mode, quad);
    let avg = |f: &FieldHandle| time_average(&f.with_period_if_known(period), period, quad);
    let gg = pl(&g, &g)?;
    let g1 = avg(&g)?;
    let g2 = avg(&gg)?.scale(-0.5);
    let g3 = FieldHandle::linear_combination(&[
        (1.0 / 12.0, &avg(&pl(&g, &gg)?)?),
        (0.25, &avg(&pl(&gg, &g)?)?),
    ])?;
    Ok([g1, g2, g3])
}

/// Integrates the averaged system `X' = Σ ε^j G_j(X)`, `X(0) = x0`,
/// reporting states at `0, T, 2T, …` up to `t_end` (and at `t_end`).
pub fn stroboscopic_solve(
    sys: &AveragedSystem,
    x0: &[f64],
    t_end: f64,
    eps: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(t_end >= 0.0) {
        return Err(Error::ConfigInvalid("t_end must be non-negative".into()));
    }
    let field = sys.g_terms.sum(eps)?;
    if x0.len() != field.dim() {
        return Err(Error::dim(field.dim(), x0.len()));
    }
    let cfg = IntegratorConfig::new(tol, tol).with_dense_output(stroboscopic_times(sys.period, t_end));
    try_integrate_fn(
        |_t, x, out| {
            out.copy_from_slice(&field.value(x, 0.0)?);
            Ok(())
        },
        x0,
        0.0,
        t_end,
        &cfg,
    )
    .map_err(as_integrator_failure)
}

/// `0, T, 2T, …` not beyond `t_end`, followed by `t_end` itself.
pub fn stroboscopic_times(period: f64, t_end: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * period)
        .take_while(|&t| t <= t_end * (1.0 + 1e-14))
        .map(|t| t.min(t_end))
        .collect();
    if times.last().map_or(true, |&t| t < t_end) {
        times.push(t_end);
    }
    times
}

/// `x = Ψ_1(X, t)`: time-one flow of `dz/ds = W(z, t)` from `z = X`.
pub fn change_of_variables(sys: &AveragedSystem, x: &[f64], t: f64, eps: f64, tol: f64) -> Result<Vec<f64>> {
    let w = sys.w_terms.sum(eps)?;
    flow_frozen(&w, x, t, tol, false).map(|(state, _)| state)
}

trait PeriodHint {
    fn with_period_if_known(&self, period: f64) -> FieldHandle;
}

impl PeriodHint for FieldHandle {
    /// Re-declares the period on derived fields that are known to be periodic
    /// but whose construction (a `FromZero` antiderivative) loses the tag.
    fn with_period_if_known(&self, period: f64) -> FieldHandle {
        if self.is_autonomous() || self.period().is_some() {
            self.clone()
        } else {
            self.with_period(period)
        }
    }
}

/// Floquet–Magnus data for `Y' = εA(t)Y`, `A` `T`-periodic:
/// `Y(t) = exp(Σ ε^k Λ_k(t)) exp(t Σ ε^k F_k)`.
#[derive(Clone, Debug)]
pub struct FloquetLinearResult<T: MatScalar> {
    a: MatrixFunction<T>,
    quad: QuadratureRule,
    /// Constant exponents `F_1..F_n`.
    pub f_terms: Vec<DMatrix<T>>,
    pub period: f64,
}

/// `U_k` on `grid` given `F_1..F_{k-1}`; `F_k` is taken from `known` if
/// present, otherwise as the grid average (valid when the grid spans one
/// period). Returns the rates `Λ_k' = U_k - F_k` and the `F_k` used.
fn floquet_rates<T: MatScalar>(
    a: &MatrixFunction<T>,
    grid: &TimeGrid,
    n: usize,
    known: Option<&[DMatrix<T>]>,
) -> (Vec<Vec<DMatrix<T>>>, Vec<DMatrix<T>>) {
    let dim = a.dim();
    let m = grid.len();
    let pl = |p: &[DMatrix<T>], q: &[DMatrix<T>]| prelie_on_grid(grid, p, q);
    let konst = |f: &DMatrix<T>| vec![f.clone(); m];
    let combo = |terms: &[(f64, &[DMatrix<T>])]| -> Vec<DMatrix<T>> {
        (0..m)
            .map(|i| {
                let mut acc = DMatrix::<T>::zeros(dim, dim);
                for (c, v) in terms {
                    acc += &v[i] * T::from_real(*c);
                }
                acc
            })
            .collect()
    };
    let mut lams: Vec<Vec<DMatrix<T>>> = Vec::new();
    let mut fs: Vec<DMatrix<T>> = Vec::new();
    for k in 1..=n {
        let u: Vec<DMatrix<T>> = match k {
            1 => grid.nodes().iter().map(|&t| a.eval(t)).collect(),
            2 => {
                let l1 = &lams[0];
                combo(&[(-0.5, &pl(l1, l1)), (-1.0, &pl(l1, &konst(&fs[0])))])
            }
            _ => {
                let (l1, l2) = (&lams[0], &lams[1]);
                let f1 = konst(&fs[0]);
                let f2 = konst(&fs[1]);
                let l11 = pl(l1, l1);
                combo(&[
                    (-0.5, &pl(l1, l2)),
                    (-0.5, &pl(l2, l1)),
                    (-1.0 / 6.0, &pl(l1, &l11)),
                    (-1.0, &pl(l1, &f2)),
                    (-1.0, &pl(l2, &f1)),
                    (-0.5, &pl(l1, &pl(l1, &f1))),
                ])
            }
        };
        let fk = match known {
            Some(f) => f[k - 1].clone(),
            None => {
                let total = grid.integral(&u, DMatrix::zeros(dim, dim), |acc, w, v| {
                    *acc += v * T::from_real(w)
                });
                total * T::from_real(1.0 / grid.t())
            }
        };
        let lam: Vec<DMatrix<T>> = u.iter().map(|v| v - &fk).collect();
        lams.push(lam);
        fs.push(fk);
    }
    (lams, fs)
}

/// Floquet–Magnus terms through order `n ≤ 3`.
pub fn floquet_linear<T: MatScalar>(
    a: &MatrixFunction<T>,
    n: usize,
    quad: &QuadratureRule,
) -> Result<FloquetLinearResult<T>> {
    let period = a.period().ok_or(Error::NotPeriodic)?;
    if n == 0 || n > MAX_AVERAGING_ORDER {
        return Err(Error::OrderExceeded {
            requested: n,
            max: MAX_AVERAGING_ORDER,
        });
    }
    let grid = quad.grid(period);
    let (_, f_terms) = floquet_rates(a, &grid, n, None);
    Ok(FloquetLinearResult {
        a: a.clone(),
        quad: quad.clone(),
        f_terms,
        period,
    })
}

impl<T: MatScalar> FloquetLinearResult<T> {
    pub fn order(&self) -> usize {
        self.f_terms.len()
    }

    /// `Λ_1(t), …, Λ_n(t)`; periodic, so `t` is reduced modulo `T`.
    pub fn lambdas(&self, t: f64) -> Vec<DMatrix<T>> {
        let dim = self.a.dim();
        let tau = t - (t / self.period).floor() * self.period;
        let grid = self.quad.grid(tau);
        let (rates, _) = floquet_rates(&self.a, &grid, self.order(), Some(&self.f_terms));
        rates
            .iter()
            .map(|r| grid.integral(r, DMatrix::zeros(dim, dim), |acc, w, v| *acc += v * T::from_real(w)))
            .collect()
    }

    /// `Λ_k(t)`, 1-based.
    pub fn lambda(&self, k: usize, t: f64) -> DMatrix<T> {
        self.lambdas(t).swap_remove(k - 1)
    }

    /// `Λ_k` at `t` without reduction modulo `T`, from the grid on `[0, t]`.
    pub fn lambda_unreduced(&self, k: usize, t: f64) -> DMatrix<T> {
        let dim = self.a.dim();
        let grid = self.quad.grid(t);
        let (rates, _) = floquet_rates(&self.a, &grid, self.order(), Some(&self.f_terms));
        grid.integral(&rates[k - 1], DMatrix::zeros(dim, dim), |acc, w, v| {
            *acc += v * T::from_real(w)
        })
    }

    /// `exp(Σ ε^k Λ_k(t)) exp(t Σ ε^k F_k)`.
    pub fn propagator(&self, eps: f64, t: f64) -> DMatrix<T> {
        let dim = self.a.dim();
        let mut lam = DMatrix::<T>::zeros(dim, dim);
        let mut f = DMatrix::<T>::zeros(dim, dim);
        for (k, (l, fk)) in self.lambdas(t).iter().zip(&self.f_terms).enumerate() {
            let e = T::from_real(eps.powi(k as i32 + 1));
            lam += l * e;
            f += fk * e;
        }
        expm(&lam) * expm(&(f * T::from_real(t)))
    }
}
