//! Nonlinear Magnus expansion for `x' = εg(x, t)`: a generator
//! `W = Σ ε^j W_j` whose time-`t` field, flowed for unit time in an
//! auxiliary variable `s`, maps `x(0)` to `x(t)`.

use crate::error::{Error, Result};
use crate::fields::{antiderivative, prelie, AntiderivativeMode, FieldHandle, SeriesTerms, TermRole};
use crate::odeint::{try_integrate_fn, IntegratorConfig, Trajectory};
use crate::quadrature::QuadratureRule;

/// Highest generator order with hard-coded pre-Lie words.
pub const MAX_GENERATOR_ORDER: usize = 4;

/// Default tolerance of the auxiliary `s`-integration.
pub const DEFAULT_FLOW_TOL: f64 = 1e-10;

/// `W_1..W_n` together with their rates `R_j = ∂_t W_j`.
#[derive(Clone, Debug)]
pub struct GeneratorSeries {
    pub rates: SeriesTerms,
    pub terms: SeriesTerms,
    pub eps: f64,
}

impl GeneratorSeries {
    pub fn order(&self) -> usize {
        self.terms.order()
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        GeneratorSeries {
            eps,
            ..self.clone()
        }
    }

    /// `W_j`, 1-based.
    pub fn term(&self, j: usize) -> &FieldHandle {
        self.terms.term(j)
    }

    /// `W = Σ_j ε^j W_j`.
    pub fn field(&self) -> Result<FieldHandle> {
        self.terms.sum(self.eps)
    }
}

/// Flow reconstructed from a generator.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub state: Vec<f64>,
    pub s_trajectory: Option<Trajectory>,
    pub order_used: usize,
}

/// Rates of the generator as pre-Lie words in `g`:
/// `R_1 = g`, `R_2 = -½ g⊳g`, `R_3 = ¼ (g⊳g)⊳g + 1/12 g⊳(g⊳g)`,
/// `R_4 = -1/6 ((g⊳g)⊳g)⊳g - 1/12 g⊳((g⊳g)⊳g)`; then `W_j = ∫_0^t R_j`.
///
/// `g` is given without the factor ε.
pub fn generator_terms(g: &FieldHandle, n: usize, quad: &QuadratureRule) -> Result<GeneratorSeries> {
    if n == 0 || n > MAX_GENERATOR_ORDER {
        return Err(Error::OrderExceeded {
            requested: n,
            max: MAX_GENERATOR_ORDER,
        });
    }
    let mode = AntiderivativeMode::FromZero;
    let pl = |p: &FieldHandle, q: &FieldHandle| prelie(p, q, &mode, quad);
    let mut rates = vec![g.clone()];
    if n >= 2 {
        let gg = pl(g, g)?;
        rates.push(gg.scale(-0.5));
        if n >= 3 {
            let gg_g = pl(&gg, g)?;
            let g_gg = pl(g, &gg)?;
            rates.push(FieldHandle::linear_combination(&[(0.25, &gg_g), (1.0 / 12.0, &g_gg)])?);
            if n >= 4 {
                let gg_g_g = pl(&gg_g, g)?;
                let g_gg_g = pl(g, &gg_g)?;
                rates.push(FieldHandle::linear_combination(&[
                    (-1.0 / 6.0, &gg_g_g),
                    (-1.0 / 12.0, &g_gg_g),
                ])?);
            }
        }
    }
    let terms = rates
        .iter()
        .map(|r| antiderivative(r, &mode, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratorSeries {
        rates: SeriesTerms::new(TermRole::Rate, rates),
        terms: SeriesTerms::new(TermRole::Generator, terms),
        eps: 1.0,
    })
}

pub(crate) fn as_integrator_failure(e: Error) -> Error {
    match e {
        Error::StepSizeUnderflow { .. }
        | Error::MaxStepsExceeded { .. }
        | Error::NonFiniteState { .. } => Error::IntegratorFailure(e.to_string()),
        other => other,
    }
}

/// Time-one map of `dz/ds = w(z, t)` with `t` frozen.
pub(crate) fn flow_frozen(
    w: &FieldHandle,
    x0: &[f64],
    t: f64,
    tol: f64,
    keep: bool,
) -> Result<(Vec<f64>, Option<Trajectory>)> {
    if x0.len() != w.dim() {
        return Err(Error::dim(w.dim(), x0.len()));
    }
    if w.is_zero() {
        return Ok((x0.to_vec(), None));
    }
    let cfg = IntegratorConfig::new(tol, tol);
    let traj = try_integrate_fn(
        |_s, z, out| {
            out.copy_from_slice(&w.value(z, t)?);
            Ok(())
        },
        x0,
        0.0,
        1.0,
        &cfg,
    )
    .map_err(as_integrator_failure)?;
    let state = traj.last_state().to_vec();
    Ok((state, keep.then_some(traj)))
}

/// Integrates `dy/ds = W(y, t_star)` over `s ∈ [0, 1]` from `x0`; the
/// result approximates `x(t_star)`.
pub fn reconstruct_state(w: &GeneratorSeries, x0: &[f64], t_star: f64, tol: f64) -> Result<FlowResult> {
    let field = w.field()?;
    let (state, traj) = flow_frozen(&field, x0, t_star, tol, true)?;
    Ok(FlowResult {
        state,
        s_trajectory: traj,
        order_used: w.order(),
    })
}
