//! Time-dependent vector fields `f(x, t)` evaluable to jets, and the algebra
//! on them: Lie brackets, time antiderivatives and the pre-Lie operator
//! `P ⊳ Q = [∂_t⁻¹ P, Q]`.
//!
//! Derived fields are lazy composition trees. Evaluation works on a batch of
//! times at once, so a quadrature node set at one level turns into a single
//! batched call at the level below, and time-independent subtrees are
//! evaluated once per batch instead of once per node.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetValue, Scalar};
use crate::magnus_linear::MatrixFunction;
use crate::quadrature::{QuadratureRule, TimeGrid};
use crate::systems::rotating::Frame;

/// Jet order granted to primitive fields unless overridden. Order 3 covers
/// every ⊳-word through expansion order 4.
pub const DEFAULT_MAX_JET_ORDER: usize = 3;

/// Jet order cap of linear fields.
pub const LINEAR_MAX_JET_ORDER: usize = 8;

/// Threshold on `|⟨f⟩|` accepted by the zero-mean Fourier antiderivative.
pub const ZERO_MEAN_TOL: f64 = 1e-8;

/// A vector field written once, generically over the number type, so it can
/// be evaluated on `f64` and on [`Jet`]s.
pub trait FieldFn: Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], t: f64) -> Vec<S>;
}

trait DynField: Send + Sync {
    fn eval_f64(&self, x: &[f64], t: f64) -> Vec<f64>;
    fn eval_jet(&self, x: &[Jet], t: f64) -> Vec<Jet>;
}

impl<F: FieldFn> DynField for F {
    fn eval_f64(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.eval(x, t)
    }
    fn eval_jet(&self, x: &[Jet], t: f64) -> Vec<Jet> {
        self.eval(x, t)
    }
}

type JetFnPtr = Arc<dyn Fn(&[f64], f64, usize) -> JetValue + Send + Sync>;
type PhaseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How `∂_t⁻¹` is realised.
#[derive(Clone, Debug, PartialEq)]
pub enum AntiderivativeMode {
    /// `(x, t) ↦ ∫_0^t f(x, τ) dτ`.
    FromZero,
    /// The unique zero-mean `period`-periodic antiderivative of a zero-mean
    /// periodic field, from its first `modes` Fourier harmonics.
    ZeroMeanFourier { period: f64, modes: usize },
}

#[derive(Clone)]
enum Node {
    Primitive(Arc<dyn DynField>),
    JetFn(JetFnPtr),
    Zero,
    Combination(Vec<(f64, FieldHandle)>),
    Modulated(FieldHandle, PhaseFn),
    Conjugated(Arc<dyn DynField>, Arc<Frame>),
    Bracket(FieldHandle, FieldHandle),
    Antiderivative(FieldHandle, AntiderivativeMode, QuadratureRule),
    Average(FieldHandle, f64, QuadratureRule),
}

struct Inner {
    dim: usize,
    period: Option<f64>,
    autonomous: bool,
    /// Highest jet order this field can be evaluated at; negative when the
    /// field cannot be evaluated at all.
    cap: i32,
    node: Node,
}

/// Shared, immutable handle to a time-dependent vector field on `R^d`.
#[derive(Clone)]
pub struct FieldHandle {
    inner: Arc<Inner>,
}

impl fmt::Debug for FieldHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.inner.node {
            Node::Primitive(_) => "primitive",
            Node::JetFn(_) => "jet-fn",
            Node::Zero => "zero",
            Node::Combination(_) => "combination",
            Node::Modulated(..) => "modulated",
            Node::Conjugated(..) => "conjugated",
            Node::Bracket(..) => "bracket",
            Node::Antiderivative(..) => "antiderivative",
            Node::Average(..) => "average",
        };
        f.debug_struct("FieldHandle")
            .field("kind", &kind)
            .field("dim", &self.inner.dim)
            .field("period", &self.inner.period)
            .field("autonomous", &self.inner.autonomous)
            .field("max_jet_order", &self.inner.cap)
            .finish()
    }
}

fn same_period(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Period shared by a set of fields; time-independent fields are compatible
/// with any period.
fn common_period<'a>(fields: impl IntoIterator<Item = &'a FieldHandle>) -> Option<f64> {
    let mut period = None;
    for f in fields {
        if f.inner.autonomous {
            continue;
        }
        match (period, f.inner.period) {
            (_, None) => return None,
            (None, Some(p)) => period = Some(p),
            (Some(a), Some(b)) if same_period(a, b) => {}
            _ => return None,
        }
    }
    period
}

struct LinearField(MatrixFunction<f64>);

impl FieldFn for LinearField {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval<S: Scalar>(&self, x: &[S], t: f64) -> Vec<S> {
        let a = self.0.eval(t);
        (0..a.nrows())
            .map(|i| {
                let mut acc = S::constant(0.0);
                for (j, xj) in x.iter().enumerate() {
                    let aij = a[(i, j)];
                    if aij != 0.0 {
                        acc = acc + xj.clone() * aij;
                    }
                }
                acc
            })
            .collect()
    }
}

struct ConstantField(Vec<f64>);

impl FieldFn for ConstantField {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval<S: Scalar>(&self, _x: &[S], _t: f64) -> Vec<S> {
        self.0.iter().map(|&c| S::constant(c)).collect()
    }
}

impl FieldHandle {
    fn from_inner(inner: Inner) -> Self {
        FieldHandle {
            inner: Arc::new(inner),
        }
    }

    fn with_flags(&self, f: impl FnOnce(&mut Inner)) -> Self {
        let mut inner = Inner {
            dim: self.inner.dim,
            period: self.inner.period,
            autonomous: self.inner.autonomous,
            cap: self.inner.cap,
            node: self.inner.node.clone(),
        };
        f(&mut inner);
        FieldHandle::from_inner(inner)
    }

    /// Wraps a generic field definition. Jets come from truncated Taylor
    /// arithmetic up to [`DEFAULT_MAX_JET_ORDER`].
    pub fn new<F: FieldFn>(f: F) -> Self {
        let dim = f.dim();
        FieldHandle::from_inner(Inner {
            dim,
            period: None,
            autonomous: false,
            cap: DEFAULT_MAX_JET_ORDER as i32,
            node: Node::Primitive(Arc::new(f)),
        })
    }

    /// A field with a user-supplied jet evaluator `(x, t, k) ↦ JetValue`.
    /// The evaluator must return jets of order at least `k`.
    pub fn from_jet_fn(
        dim: usize,
        max_order: usize,
        f: impl Fn(&[f64], f64, usize) -> JetValue + Send + Sync + 'static,
    ) -> Self {
        FieldHandle::from_inner(Inner {
            dim,
            period: None,
            autonomous: false,
            cap: max_order as i32,
            node: Node::JetFn(Arc::new(f)),
        })
    }

    /// `x ↦ A(t) x`. Its jets terminate at order one, so deep nesting is
    /// allowed up to [`LINEAR_MAX_JET_ORDER`].
    pub fn linear(a: MatrixFunction<f64>) -> Self {
        let period = a.period();
        let h = FieldHandle::new(LinearField(a)).with_max_jet_order(LINEAR_MAX_JET_ORDER);
        match period {
            Some(p) => h.with_period(p),
            None => h,
        }
    }

    /// Constant, time-independent field.
    pub fn constant(c: Vec<f64>) -> Self {
        FieldHandle::new(ConstantField(c)).as_autonomous()
    }

    pub fn zero(dim: usize) -> Self {
        FieldHandle::from_inner(Inner {
            dim,
            period: None,
            autonomous: true,
            cap: i32::MAX,
            node: Node::Zero,
        })
    }

    /// Declares the field `period`-periodic in time.
    pub fn with_period(&self, period: f64) -> Self {
        assert!(period > 0.0, "period must be positive");
        self.with_flags(|i| i.period = Some(period))
    }

    /// Declares the field time-independent.
    pub fn as_autonomous(&self) -> Self {
        self.with_flags(|i| i.autonomous = true)
    }

    /// Overrides the jet order cap of a primitive field.
    pub fn with_max_jet_order(&self, k: usize) -> Self {
        match self.inner.node {
            Node::Primitive(_) | Node::JetFn(_) => self.with_flags(|i| i.cap = k as i32),
            _ => panic!("with_max_jet_order applies to primitive fields only"),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn period(&self) -> Option<f64> {
        self.inner.period
    }

    pub fn is_autonomous(&self) -> bool {
        self.inner.autonomous
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.inner.node, Node::Zero)
    }

    /// Highest jet order available, `None` if the field cannot be evaluated.
    pub fn max_jet_order(&self) -> Option<usize> {
        (self.inner.cap >= 0).then_some(self.inner.cap as usize)
    }

    /// `Σ c_i f_i`.
    pub fn linear_combination(terms: &[(f64, &FieldHandle)]) -> Result<FieldHandle> {
        let first = terms
            .first()
            .ok_or_else(|| Error::ConfigInvalid("empty linear combination".into()))?;
        let dim = first.1.dim();
        let mut kept = Vec::with_capacity(terms.len());
        for (c, f) in terms {
            if f.dim() != dim {
                return Err(Error::dim(dim, f.dim()));
            }
            if *c != 0.0 && !f.is_zero() {
                kept.push((*c, (*f).clone()));
            }
        }
        if kept.is_empty() {
            return Ok(FieldHandle::zero(dim));
        }
        let period = common_period(kept.iter().map(|(_, f)| f));
        let autonomous = kept.iter().all(|(_, f)| f.inner.autonomous);
        let cap = kept.iter().map(|(_, f)| f.inner.cap).min().unwrap_or(i32::MAX);
        Ok(FieldHandle::from_inner(Inner {
            dim,
            period,
            autonomous,
            cap,
            node: Node::Combination(kept),
        }))
    }

    pub fn add(&self, other: &FieldHandle) -> Result<FieldHandle> {
        FieldHandle::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &FieldHandle) -> Result<FieldHandle> {
        FieldHandle::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    pub fn scale(&self, c: f64) -> FieldHandle {
        FieldHandle::linear_combination(&[(c, self)]).expect("single-term combination")
    }

    /// `(x, t) ↦ phase(t) f(x, t)`.
    pub fn modulate(&self, phase: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FieldHandle {
        FieldHandle::from_inner(Inner {
            dim: self.inner.dim,
            period: None,
            autonomous: false,
            cap: self.inner.cap,
            node: Node::Modulated(self.clone(), Arc::new(phase)),
        })
    }

    /// `(x, t) ↦ e^{-tA} f(e^{tA} x)` for a primitive field `f`, with jets
    /// carried through both frame maps.
    pub fn conjugate(&self, frame: &Frame) -> Result<FieldHandle> {
        if frame.dim() != self.dim() {
            return Err(Error::dim(self.dim(), frame.dim()));
        }
        match &self.inner.node {
            Node::Zero => Ok(self.clone()),
            Node::Primitive(f) => Ok(FieldHandle::from_inner(Inner {
                dim: self.inner.dim,
                period: None,
                autonomous: false,
                cap: self.inner.cap,
                node: Node::Conjugated(f.clone(), Arc::new(frame.clone())),
            })),
            _ => Err(Error::ConfigInvalid(
                "frame conjugation needs a primitive field".into(),
            )),
        }
    }

    /// Value and x-derivatives up to order `k` at `(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64, k: usize) -> Result<JetValue> {
        Ok(self.eval_batch(x, &[t], k)?.pop().expect("one time in, one jet out"))
    }

    /// Plain value at `(x, t)`.
    pub fn value(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(self.eval(x, t, 0)?.value())
    }

    /// Evaluates at one point `x` and many times.
    pub fn eval_batch(&self, x: &[f64], ts: &[f64], k: usize) -> Result<Vec<JetValue>> {
        let inner = &*self.inner;
        if x.len() != inner.dim {
            return Err(Error::dim(inner.dim, x.len()));
        }
        if (k as i64) > inner.cap as i64 {
            return Err(Error::JetOrderExceeded {
                requested: k,
                available: inner.cap,
            });
        }
        if ts.is_empty() {
            return Ok(Vec::new());
        }
        if inner.autonomous && ts.len() > 1 {
            let one = self.eval_nodes(x, &ts[..1], k)?.pop().expect("one jet");
            return Ok(vec![one; ts.len()]);
        }
        self.eval_nodes(x, ts, k)
    }

    fn eval_nodes(&self, x: &[f64], ts: &[f64], k: usize) -> Result<Vec<JetValue>> {
        let inner = &*self.inner;
        let n = x.len();
        let d = inner.dim;
        match &inner.node {
            Node::Zero => Ok(vec![JetValue::zeros(d, n, k); ts.len()]),
            Node::Primitive(f) => ts
                .iter()
                .map(|&t| {
                    let out = if k == 0 {
                        JetValue::from_values(&f.eval_f64(x, t), n, 0)
                    } else {
                        JetValue::from_jets(f.eval_jet(&Jet::seed(x, k), t), n, k)
                    };
                    if out.dim() != d {
                        return Err(Error::dim(d, out.dim()));
                    }
                    Ok(out)
                })
                .collect(),
            Node::Conjugated(f, frame) => ts
                .iter()
                .map(|&t| {
                    let out = if k == 0 {
                        let v = f.eval_f64(&frame.apply(t, x), t);
                        JetValue::from_values(&frame.apply(-t, &v), n, 0)
                    } else {
                        let u = frame.apply(t, &Jet::seed(x, k));
                        JetValue::from_jets(frame.apply(-t, &f.eval_jet(&u, t)), n, k)
                    };
                    if out.dim() != d {
                        return Err(Error::dim(d, out.dim()));
                    }
                    Ok(out)
                })
                .collect(),
            Node::JetFn(f) => ts
                .iter()
                .map(|&t| {
                    let out = f(x, t, k);
                    if out.dim() != d {
                        return Err(Error::dim(d, out.dim()));
                    }
                    if out.order() < k {
                        return Err(Error::JetOrderExceeded {
                            requested: k,
                            available: out.order() as i32,
                        });
                    }
                    Ok(if out.order() == k { out } else { out.truncated(k) })
                })
                .collect(),
            Node::Combination(terms) => {
                let mut acc = vec![JetValue::zeros(d, n, k); ts.len()];
                for (c, f) in terms {
                    for (a, v) in acc.iter_mut().zip(f.eval_batch(x, ts, k)?) {
                        a.add_scaled(*c, &v);
                    }
                }
                Ok(acc)
            }
            Node::Modulated(f, phase) => {
                let mut vals = f.eval_batch(x, ts, k)?;
                for (v, &t) in vals.iter_mut().zip(ts) {
                    v.scale(phase(t));
                }
                Ok(vals)
            }
            Node::Bracket(p, q) => {
                let pv = p.eval_batch(x, ts, k + 1)?;
                let qv = q.eval_batch(x, ts, k + 1)?;
                Ok(pv
                    .iter()
                    .zip(&qv)
                    .map(|(a, b)| JetValue::bracket(a, b))
                    .collect())
            }
            Node::Antiderivative(f, mode, quad) => match mode {
                AntiderivativeMode::FromZero => from_zero_antiderivative(f, quad, x, ts, k),
                AntiderivativeMode::ZeroMeanFourier { period, modes } => {
                    fourier_antiderivative(f, *period, *modes, x, ts, k)
                }
            },
            Node::Average(f, period, quad) => {
                let mut avg = f.eval_batch(x, &[0.0], k)?.pop().expect("one jet");
                if !f.inner.autonomous {
                    let grid = quad.grid(*period);
                    let vals = f.eval_grid(x, &grid, k)?;
                    avg = JetValue::zeros(d, n, k);
                    for (w, v) in grid.weights().iter().zip(&vals) {
                        avg.add_scaled(w / period, v);
                    }
                }
                Ok(vec![avg; ts.len()])
            }
        }
    }

    /// Batch evaluation at the nodes of `grid`. Integral-from-zero nodes
    /// built on the grid's own rule reuse the values already computed on
    /// the grid through its running-integral matrix, instead of a fresh
    /// quadrature per node; the cost drops from quadratic to linear in the
    /// number of nodes for every nested antiderivative.
    fn eval_grid(&self, x: &[f64], grid: &TimeGrid, k: usize) -> Result<Vec<JetValue>> {
        let inner = &*self.inner;
        if inner.autonomous || (k as i64) > inner.cap as i64 {
            return self.eval_batch(x, grid.nodes(), k);
        }
        let (d, n) = (inner.dim, x.len());
        match &inner.node {
            Node::Combination(terms) => {
                let mut acc = vec![JetValue::zeros(d, n, k); grid.len()];
                for (c, f) in terms {
                    for (a, v) in acc.iter_mut().zip(f.eval_grid(x, grid, k)?) {
                        a.add_scaled(*c, &v);
                    }
                }
                Ok(acc)
            }
            Node::Modulated(f, phase) => {
                let mut vals = f.eval_grid(x, grid, k)?;
                for (v, &t) in vals.iter_mut().zip(grid.nodes()) {
                    v.scale(phase(t));
                }
                Ok(vals)
            }
            Node::Bracket(p, q) => {
                let pv = p.eval_grid(x, grid, k + 1)?;
                let qv = q.eval_grid(x, grid, k + 1)?;
                Ok(pv
                    .iter()
                    .zip(&qv)
                    .map(|(a, b)| JetValue::bracket(a, b))
                    .collect())
            }
            Node::Antiderivative(f, AntiderivativeMode::FromZero, quad)
                if quad == grid.rule() && !f.is_autonomous() =>
            {
                let vals = f.eval_grid(x, grid, k)?;
                Ok(grid.running_integral(&vals, JetValue::zeros(d, n, k), |acc, w, v| {
                    acc.add_scaled(w, v)
                }))
            }
            _ => self.eval_batch(x, grid.nodes(), k),
        }
    }
}

fn from_zero_antiderivative(
    f: &FieldHandle,
    quad: &QuadratureRule,
    x: &[f64],
    ts: &[f64],
    k: usize,
) -> Result<Vec<JetValue>> {
    if f.is_autonomous() {
        let v = f.eval_batch(x, &ts[..1], k)?.pop().expect("one jet");
        return Ok(ts
            .iter()
            .map(|&t| {
                let mut w = v.clone();
                w.scale(t);
                w
            })
            .collect());
    }
    ts.iter()
        .map(|&t| {
            let grid = quad.grid(t);
            let vals = f.eval_grid(x, &grid, k)?;
            Ok(grid.integral(&vals, JetValue::zeros(f.dim(), x.len(), k), |acc, w, v| {
                acc.add_scaled(w, v)
            }))
        })
        .collect()
}

fn fourier_antiderivative(
    f: &FieldHandle,
    period: f64,
    modes: usize,
    x: &[f64],
    ts: &[f64],
    k: usize,
) -> Result<Vec<JetValue>> {
    let n_samples = 2 * modes + 1;
    let samples: Vec<f64> = (0..n_samples)
        .map(|j| period * j as f64 / n_samples as f64)
        .collect();
    let vals = f.eval_batch(x, &samples, k)?;
    let mut mean = JetValue::zeros(f.dim(), x.len(), k);
    for v in &vals {
        mean.add_scaled(1.0 / n_samples as f64, v);
    }
    let m = mean.value().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > ZERO_MEAN_TOL {
        return Err(Error::NonZeroMean { mean: m });
    }
    let omega = 2.0 * std::f64::consts::PI / period;
    Ok(ts
        .iter()
        .map(|&t| {
            let mut acc = JetValue::zeros(f.dim(), x.len(), k);
            for (tj, v) in samples.iter().zip(&vals) {
                // Pairing harmonics ±m: e^{imθ}/(imω) + c.c. = 2 sin(mθ)/(mω)
                let c = fourier_kernel(omega * (t - tj), modes) / (omega * n_samples as f64);
                acc.add_scaled(c, v);
            }
            acc
        })
        .collect())
}

/// `Σ_{m=1}^{M} 2 sin(mθ)/m`, with the harmonics generated by the
/// Chebyshev recurrence `s_{m+1} = 2 cos θ s_m - s_{m-1}`.
fn fourier_kernel(theta: f64, modes: usize) -> f64 {
    let (s1, c1) = theta.sin_cos();
    let (mut prev, mut cur) = (0.0, s1);
    let mut acc = 0.0;
    for m in 1..=modes {
        acc += 2.0 * cur / m as f64;
        let next = 2.0 * c1 * cur - prev;
        prev = cur;
        cur = next;
    }
    acc
}

/// Evaluates `f` and its x-derivatives through order `k` at `(x, t)`.
pub fn eval_field(f: &FieldHandle, x: &[f64], t: f64, k: usize) -> Result<JetValue> {
    f.eval(x, t, k)
}

/// `[P, Q] = P'Q - Q'P`.
pub fn lie_bracket(p: &FieldHandle, q: &FieldHandle) -> Result<FieldHandle> {
    if p.dim() != q.dim() {
        return Err(Error::dim(p.dim(), q.dim()));
    }
    let dim = p.dim();
    if p.is_zero() || q.is_zero() {
        return Ok(FieldHandle::zero(dim));
    }
    Ok(FieldHandle::from_inner(Inner {
        dim,
        period: common_period([p, q]),
        autonomous: p.is_autonomous() && q.is_autonomous(),
        cap: p.inner.cap.min(q.inner.cap).saturating_sub(1),
        node: Node::Bracket(p.clone(), q.clone()),
    }))
}

/// `∂_t⁻¹ f` in the requested mode.
pub fn antiderivative(
    f: &FieldHandle,
    mode: &AntiderivativeMode,
    quad: &QuadratureRule,
) -> Result<FieldHandle> {
    let dim = f.dim();
    if f.is_zero() {
        return Ok(FieldHandle::zero(dim));
    }
    let period = match mode {
        AntiderivativeMode::FromZero => None,
        AntiderivativeMode::ZeroMeanFourier { period, modes } => {
            if *modes == 0 || *period <= 0.0 {
                return Err(Error::ConfigInvalid(
                    "zero-mean Fourier mode needs a positive period and at least one mode".into(),
                ));
            }
            if !f.is_autonomous() {
                match f.period() {
                    None => return Err(Error::NotPeriodic),
                    Some(p) if !same_period(p, *period) => {
                        return Err(Error::PeriodMismatch {
                            expected: *period,
                            found: p,
                        })
                    }
                    Some(_) => {}
                }
            }
            Some(*period)
        }
    };
    Ok(FieldHandle::from_inner(Inner {
        dim,
        period,
        autonomous: false,
        cap: f.inner.cap,
        node: Node::Antiderivative(f.clone(), mode.clone(), quad.clone()),
    }))
}

/// Time average `⟨f⟩(x) = (1/T) ∫_0^T f(x, t) dt`, a time-independent field.
pub fn time_average(f: &FieldHandle, period: f64, quad: &QuadratureRule) -> Result<FieldHandle> {
    if !f.is_autonomous() {
        match f.period() {
            None => return Err(Error::NotPeriodic),
            Some(p) if !same_period(p, period) => {
                return Err(Error::PeriodMismatch {
                    expected: period,
                    found: p,
                })
            }
            Some(_) => {}
        }
    }
    if f.is_zero() {
        return Ok(FieldHandle::zero(f.dim()));
    }
    Ok(FieldHandle::from_inner(Inner {
        dim: f.dim(),
        period: None,
        autonomous: true,
        cap: f.inner.cap,
        node: Node::Average(f.clone(), period, quad.clone()),
    }))
}

/// `P ⊳ Q = [∂_t⁻¹ P, Q]`. With [`AntiderivativeMode::FromZero`] this is
/// `(x, t) ↦ ∫_0^t (P'(x,τ) Q(x,t) - Q'(x,t) P(x,τ)) dτ`.
pub fn prelie(
    p: &FieldHandle,
    q: &FieldHandle,
    mode: &AntiderivativeMode,
    quad: &QuadratureRule,
) -> Result<FieldHandle> {
    lie_bracket(&antiderivative(p, mode, quad)?, q)
}

/// Associator defect of the pre-Lie relation,
/// `‖(F⊳G⊳H − (F⊳G)⊳H) − (G⊳F⊳H − (G⊳F)⊳H)‖₂` at `(x, t)`.
pub fn prelie_identity_residual(
    f: &FieldHandle,
    g: &FieldHandle,
    h: &FieldHandle,
    x: &[f64],
    t: f64,
    mode: &AntiderivativeMode,
    quad: &QuadratureRule,
) -> Result<f64> {
    let pl = |a: &FieldHandle, b: &FieldHandle| prelie(a, b, mode, quad);
    let assoc = |a: &FieldHandle, b: &FieldHandle| -> Result<FieldHandle> {
        pl(a, &pl(b, h)?)?.sub(&pl(&pl(a, b)?, h)?)
    };
    let defect = assoc(f, g)?.sub(&assoc(g, f)?)?;
    let v = defect.value(x, t)?;
    Ok(v.iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// What a [`SeriesTerms`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermRole {
    /// `R_j = ∂_t W_j`.
    Rate,
    /// Generator terms `W_j`.
    Generator,
    /// Averaged fields `G_j`.
    Averaged,
    /// Anything else, e.g. coefficients of a transported field.
    Other,
}

/// Coefficients `T_1, T_2, …` of a formal series `Σ ε^j T_j`.
#[derive(Clone, Debug)]
pub struct SeriesTerms {
    pub role: TermRole,
    pub terms: Vec<FieldHandle>,
}

impl SeriesTerms {
    pub fn new(role: TermRole, terms: Vec<FieldHandle>) -> Self {
        SeriesTerms { role, terms }
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    /// `T_j`, 1-based.
    pub fn term(&self, j: usize) -> &FieldHandle {
        &self.terms[j - 1]
    }

    /// `Σ_{j ≤ order} ε^j T_j` as a single field.
    pub fn sum(&self, eps: f64) -> Result<FieldHandle> {
        self.truncated_sum(eps, self.order())
    }

    pub fn truncated_sum(&self, eps: f64, order: usize) -> Result<FieldHandle> {
        let weighted: Vec<(f64, &FieldHandle)> = self
            .terms
            .iter()
            .take(order)
            .enumerate()
            .map(|(j, f)| (eps.powi(j as i32 + 1), f))
            .collect();
        if weighted.is_empty() {
            return Err(Error::ConfigInvalid("empty series".into()));
        }
        FieldHandle::linear_combination(&weighted)
    }
}

/// Right-hand side of the transformed system after a continuous change of
/// variables with rate `R = Σ ε^j R_j`:
///
/// `Σ_{m=1}^{order} R^{⊳m}/m! + F + Σ_{m=1}^{order-1} (R^{⊳m} ⊳ F)/m!`
///
/// with right-nested powers `R^{⊳m} = R ⊳ (R ⊳ ⋯ ⊳ R)`. `R` is O(ε) and `F`
/// counts as first order, so every dropped term is O(ε^{order+1}).
pub fn transport_rhs(
    r: &SeriesTerms,
    eps: f64,
    f: &FieldHandle,
    order: usize,
    mode: &AntiderivativeMode,
    quad: &QuadratureRule,
) -> Result<FieldHandle> {
    if order == 0 || r.order() < order {
        return Err(Error::OrderExceeded {
            requested: order,
            max: r.order(),
        });
    }
    let rate = r.truncated_sum(eps, order)?;
    if rate.dim() != f.dim() {
        return Err(Error::dim(rate.dim(), f.dim()));
    }
    let mut terms: Vec<(f64, FieldHandle)> = Vec::new();
    let mut power = rate.clone();
    let mut fact = 1.0;
    for m in 1..=order {
        fact *= m as f64;
        if m > 1 {
            power = prelie(&rate, &power, mode, quad)?;
        }
        terms.push((1.0 / fact, power.clone()));
    }
    terms.push((1.0, f.clone()));
    if !f.is_zero() {
        let mut acted = f.clone();
        let mut fact = 1.0;
        for m in 1..order {
            fact *= m as f64;
            acted = prelie(&rate, &acted, mode, quad)?;
            terms.push((1.0 / fact, acted.clone()));
        }
    }
    let refs: Vec<(f64, &FieldHandle)> = terms.iter().map(|(c, f)| (*c, f)).collect();
    FieldHandle::linear_combination(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    struct Identity;
    impl FieldFn for Identity {
        fn dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S], _t: f64) -> Vec<S> {
            x.to_vec()
        }
    }

    struct TimesT;
    impl FieldFn for TimesT {
        fn dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S], t: f64) -> Vec<S> {
            x.iter().map(|v| v.clone() * t).collect()
        }
    }

    struct Shear(bool);
    impl FieldFn for Shear {
        fn dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S], _t: f64) -> Vec<S> {
            if self.0 {
                vec![x[1].clone(), S::constant(0.0)]
            } else {
                vec![S::constant(0.0), x[0].clone()]
            }
        }
    }

    fn mat(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
    }

    #[test]
    fn identity_field_jet() {
        let f = FieldHandle::new(Identity);
        let j = eval_field(&f, &[3.0, 4.0], 0.0, 1).unwrap();
        assert_eq!(j.value(), vec![3.0, 4.0]);
        assert_eq!(j.jacobian(), DMatrix::identity(2, 2));
    }

    #[test]
    fn time_scaled_field_jet() {
        let f = FieldHandle::new(TimesT);
        let j = f.eval(&[1.0, 0.0], 2.0, 1).unwrap();
        assert_eq!(j.value(), vec![2.0, 0.0]);
        assert_eq!(j.jacobian(), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn errors_on_bad_input() {
        let f = FieldHandle::new(Identity);
        assert!(matches!(
            f.eval(&[1.0], 0.0, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            f.eval(&[1.0, 2.0], 0.0, 4),
            Err(Error::JetOrderExceeded { .. })
        ));
        let g = FieldHandle::constant(vec![1.0, 2.0, 3.0]);
        assert!(lie_bracket(&f, &g).is_err());
    }

    #[test]
    fn shear_bracket_matches_hand_computation() {
        // P = (x2, 0), Q = (0, x1): P'Q - Q'P = (x1, -x2)
        let p = FieldHandle::new(Shear(true));
        let q = FieldHandle::new(Shear(false));
        let b = lie_bracket(&p, &q).unwrap();
        let v = b.value(&[0.3, -1.7], 0.0).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] - 1.7).abs() < 1e-15);
        let same = lie_bracket(&p, &p).unwrap().value(&[0.3, -1.7], 0.0).unwrap();
        assert_eq!(same, vec![0.0, 0.0]);
    }

    #[test]
    fn from_zero_antiderivatives() {
        let quad = QuadratureRule::default();
        let c = FieldHandle::constant(vec![2.0, -1.0]);
        let ic = antiderivative(&c, &AntiderivativeMode::FromZero, &quad).unwrap();
        assert_eq!(ic.value(&[0.0, 0.0], 1.5).unwrap(), vec![3.0, -1.5]);

        let t2 = FieldHandle::new(Identity).modulate(|t| t * t);
        let it2 = antiderivative(&t2, &AntiderivativeMode::FromZero, &quad).unwrap();
        let v = it2.value(&[0.9, -0.6], 1.0).unwrap();
        assert!((v[0] - 0.3).abs() <= 1e-14 && (v[1] + 0.2).abs() <= 1e-14);
        assert_eq!(it2.value(&[0.9, -0.6], 0.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn fourier_antiderivative_of_cosine() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = FieldHandle::new(Identity).modulate(f64::cos).with_flags(|i| i.period = Some(two_pi));
        let mode = AntiderivativeMode::ZeroMeanFourier {
            period: two_pi,
            modes: 4,
        };
        let g = antiderivative(&f, &mode, &QuadratureRule::default()).unwrap();
        for t in [0.0, 0.4, 2.0, 5.5] {
            let v = g.value(&[1.5, -0.5], t).unwrap();
            assert!((v[0] - 1.5 * t.sin()).abs() < 1e-14);
            assert!((v[1] + 0.5 * t.sin()).abs() < 1e-14);
        }
        let not_periodic = FieldHandle::new(Identity).modulate(f64::cos);
        assert_eq!(
            antiderivative(&not_periodic, &mode, &QuadratureRule::default()).unwrap_err(),
            Error::NotPeriodic
        );
        let biased = FieldHandle::new(Identity)
            .modulate(|t| 1.0 + t.cos())
            .with_flags(|i| i.period = Some(two_pi));
        let g = antiderivative(&biased, &mode, &QuadratureRule::default()).unwrap();
        assert!(matches!(
            g.value(&[1.0, 1.0], 0.3),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn prelie_of_matrix_fields() {
        let quad = QuadratureRule::default();
        let alpha = mat([[0.0, 1.0], [0.0, 0.0]]);
        let beta = mat([[0.0, 0.0], [1.0, 0.0]]);
        let p = FieldHandle::linear(MatrixFunction::constant(alpha.clone()));
        let selfp = prelie(&p, &p, &AntiderivativeMode::FromZero, &quad).unwrap();
        assert_eq!(selfp.value(&[0.3, 0.8], 0.7).unwrap(), vec![0.0, 0.0]);

        let q = FieldHandle::linear(MatrixFunction::new(2, move |t| &beta * t));
        let pq = prelie(&p, &q, &AntiderivativeMode::FromZero, &quad).unwrap();
        // [α, β] x = diag(1, -1) x at t = 1
        let v = pq.value(&[0.3, 0.8], 1.0).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] + 0.8).abs() < 1e-15);
        assert_eq!(pq.value(&[0.3, 0.8], 0.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn transport_with_zero_rate_is_identity() {
        let quad = QuadratureRule::default();
        let f = FieldHandle::new(TimesT);
        let r = SeriesTerms::new(TermRole::Rate, vec![FieldHandle::zero(2); 3]);
        let out = transport_rhs(&r, 0.1, &f, 3, &AntiderivativeMode::FromZero, &quad).unwrap();
        assert_eq!(out.value(&[0.2, 0.5], 0.8).unwrap(), f.value(&[0.2, 0.5], 0.8).unwrap());
        let r1 = SeriesTerms::new(TermRole::Rate, vec![FieldHandle::new(Shear(true))]);
        let out = transport_rhs(&r1, 1.0, &f, 1, &AntiderivativeMode::FromZero, &quad).unwrap();
        let v = out.value(&[0.2, 0.5], 0.8).unwrap();
        assert!((v[0] - (0.5 + 0.16)).abs() < 1e-15 && (v[1] - 0.4).abs() < 1e-15);
        assert!(matches!(
            transport_rhs(&r1, 1.0, &f, 2, &AntiderivativeMode::FromZero, &quad),
            Err(Error::OrderExceeded { .. })
        ));
    }
}
