//! Reference integrator: Dormand–Prince 5(4) with PI step-size control.
//!
//! Requested output times are hit exactly by shortening the step that would
//! cross them, so the reported states are genuine integrator states rather
//! than interpolants. Between recorded points, [`Trajectory::sample`] uses
//! cubic Hermite interpolation on the stored derivatives.

use crate::error::{Error, Result};
use crate::fields::FieldHandle;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Times at which states are reported. Empty: every accepted step.
    pub dense_output: Vec<f64>,
    /// Upper bound on the step size.
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::new(1e-10, 1e-10)
    }
}

impl IntegratorConfig {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig {
            rel_tol,
            abs_tol,
            max_steps: 1_000_000,
            dense_output: Vec::new(),
            max_step: f64::INFINITY,
        }
    }

    pub fn with_dense_output(mut self, times: Vec<f64>) -> Self {
        self.dense_output = times;
        self
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::ConfigInvalid("tolerances must be positive".into()));
        }
        if !(t1 >= t0) {
            return Err(Error::ConfigInvalid(format!(
                "integration interval [{t0}, {t1}] is reversed"
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::ConfigInvalid("max_step must be positive".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.dense_output {
            if !(t > prev) || t < t0 || t > t1 {
                return Err(Error::ConfigInvalid(
                    "output times must be strictly increasing and inside [t0, t1]".into(),
                ));
            }
            prev = t;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

/// Time-stamped states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: TrajectoryMeta,
    derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Recorded state at exactly `t`, if `t` is an output time.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.states[i].as_slice())
    }

    /// Cubic Hermite interpolation between recorded points. Accurate to the
    /// integrator tolerance only if every step was recorded.
    pub fn sample(&self, t: f64) -> Option<Vec<f64>> {
        let first = *self.times.first()?;
        let last = self.last_time();
        if t < first || t > last {
            return None;
        }
        let i = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            k if k >= self.times.len() => return Some(self.last_state().to_vec()),
            k => k - 1,
        };
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (ya, yb) = (&self.states[i], &self.states[i + 1]);
        let (fa, fb) = (&self.derivs[i], &self.derivs[i + 1]);
        Some(
            (0..ya.len())
                .map(|k| h00 * ya[k] + h * h10 * fa[k] + h01 * yb[k] + h * h11 * fb[k])
                .collect(),
        )
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<F> {
    rhs: F,
    dim: usize,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    evals: usize,
}

impl<F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>> Stepper<F> {
    fn new(rhs: F, dim: usize) -> Self {
        Stepper {
            rhs,
            dim,
            k: vec![vec![0.0; dim]; 7],
            tmp: vec![0.0; dim],
            evals: 0,
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.evals += 1;
        (self.rhs)(t, y, out)
    }

    /// One step from `(t, y)` with `k[0] = f(t, y)` already set. Writes the
    /// 5th-order solution to `ynew` and the embedded error to `err`; leaves
    /// `f(t + h, ynew)` in `k[6]`.
    fn step(&mut self, t: f64, y: &[f64], h: f64, ynew: &mut [f64], err: &mut [f64]) -> Result<()> {
        for s in 1..7 {
            for i in 0..self.dim {
                let mut acc = y[i];
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += h * a * self.k[j][i];
                    }
                }
                self.tmp[i] = acc;
            }
            let mut ks = std::mem::take(&mut self.k[s]);
            let ts = if s == 6 { t + h } else { t + C[s] * h };
            let tmp = std::mem::take(&mut self.tmp);
            let r = self.eval(ts, &tmp, &mut ks);
            self.tmp = tmp;
            self.k[s] = ks;
            r?;
        }
        ynew.copy_from_slice(&self.tmp);
        for i in 0..self.dim {
            err[i] = h * (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>();
        }
        Ok(())
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn error_norm(err: &[f64], y: &[f64], ynew: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len().max(1) as f64;
    (err.iter()
        .zip(y.iter().zip(ynew))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

fn initial_step(f0: &[f64], y0: &[f64], cfg: &IntegratorConfig, span: f64) -> f64 {
    let sc: Vec<f64> = y0.iter().map(|y| cfg.abs_tol + cfg.rel_tol * y.abs()).collect();
    let n = y0.len().max(1) as f64;
    let d0 = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span).min(cfg.max_step).max(1e-12 * span.max(1.0))
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` adaptively. The right-hand
/// side may fail; its error is propagated unchanged.
pub fn try_integrate_fn(
    rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate(t0, t1)?;
    let dim = y0.len();
    let mut st = Stepper::new(rhs, dim);
    let mut y = y0.to_vec();
    if !all_finite(&y) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let mut f0 = vec![0.0; dim];
    st.eval(t0, &y, &mut f0)?;
    if !all_finite(&f0) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let record_all = cfg.dense_output.is_empty();
    let mut stops: Vec<f64> = cfg.dense_output.clone();
    if stops.last() != Some(&t1) {
        stops.push(t1);
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        meta: TrajectoryMeta {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            ..Default::default()
        },
        derivs: Vec::new(),
    };
    if record_all || stops.first() == Some(&t0) {
        traj.times.push(t0);
        traj.states.push(y.clone());
        traj.derivs.push(f0.clone());
    }
    let mut next_stop = stops.iter().position(|&s| s > t0).unwrap_or(stops.len());
    let mut t = t0;
    if t1 == t0 {
        if traj.times.is_empty() {
            traj.times.push(t0);
            traj.states.push(y);
            traj.derivs.push(f0);
        }
        return Ok(traj);
    }

    let mut h = initial_step(&f0, &y, cfg, t1 - t0);
    let mut err_old: f64 = 1e-4;
    let mut ynew = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut nonfinite = false;
    const BETA: f64 = 0.04;
    const ALPHA: f64 = 0.2 - 0.75 * BETA;

    while next_stop < stops.len() {
        if traj.meta.steps + traj.meta.rejected_steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: cfg.max_steps,
                t,
            });
        }
        let stop = stops[next_stop];
        h = h.min(cfg.max_step);
        let mut hits_stop = false;
        if t + h >= stop || t + 1.01 * h >= stop {
            h = stop - t;
            hits_stop = true;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(if nonfinite {
                Error::NonFiniteState { t }
            } else {
                Error::StepSizeUnderflow { t }
            });
        }
        st.k[0].copy_from_slice(&f0);
        st.step(t, &y, h, &mut ynew, &mut err)?;
        let en = error_norm(&err, &y, &ynew, cfg);
        if !en.is_finite() || !all_finite(&ynew) || !all_finite(&st.k[6]) {
            nonfinite = true;
            traj.meta.rejected_steps += 1;
            h *= 0.2;
            continue;
        }
        if en <= 1.0 {
            traj.meta.steps += 1;
            t = if hits_stop { stop } else { t + h };
            y.copy_from_slice(&ynew);
            f0.copy_from_slice(&st.k[6]);
            nonfinite = false;
            if record_all || hits_stop {
                traj.times.push(t);
                traj.states.push(y.clone());
                traj.derivs.push(f0.clone());
            }
            if hits_stop {
                next_stop += 1;
            }
            let fac = if en == 0.0 {
                10.0
            } else {
                (0.9 * en.powf(-ALPHA) * err_old.powf(BETA)).clamp(0.2, 10.0)
            };
            err_old = en.max(1e-4);
            h *= fac;
        } else {
            traj.meta.rejected_steps += 1;
            h *= (0.9 * en.powf(-ALPHA)).clamp(0.2, 1.0);
        }
    }
    traj.meta.rhs_evals = st.evals;
    Ok(traj)
}

/// Infallible-RHS convenience wrapper around [`try_integrate_fn`].
pub fn integrate_fn(
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    try_integrate_fn(
        move |t, y, out| {
            rhs(t, y, out);
            Ok(())
        },
        y0,
        t0,
        t1,
        cfg,
    )
}

/// Integrates `x' = f(x, t)`.
pub fn integrate(
    f: &FieldHandle,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if x0.len() != f.dim() {
        return Err(Error::dim(f.dim(), x0.len()));
    }
    try_integrate_fn(
        |t, x, out| {
            out.copy_from_slice(&f.value(x, t)?);
            Ok(())
        },
        x0,
        t0,
        t1,
        cfg,
    )
}

/// Fixed-step Dormand–Prince (5th-order solution, no error control); used
/// to measure the convergence order.
pub fn integrate_fixed(
    rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    y0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::ConfigInvalid("need at least one step".into()));
    }
    let dim = y0.len();
    let mut st = Stepper::new(rhs, dim);
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; dim];
    st.eval(t0, &y, &mut f0)?;
    let h = (t1 - t0) / steps as f64;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y.clone()],
        meta: TrajectoryMeta::default(),
        derivs: vec![f0.clone()],
    };
    let mut ynew = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        st.k[0].copy_from_slice(&f0);
        st.step(t, &y, h, &mut ynew, &mut err)?;
        y.copy_from_slice(&ynew);
        f0.copy_from_slice(&st.k[6]);
        if !all_finite(&y) {
            return Err(Error::NonFiniteState { t: t + h });
        }
        let tn = if i + 1 == steps { t1 } else { t0 + (i + 1) as f64 * h };
        traj.times.push(tn);
        traj.states.push(y.clone());
        traj.derivs.push(f0.clone());
    }
    traj.meta.steps = steps;
    traj.meta.rhs_evals = st.evals;
    Ok(traj)
}
