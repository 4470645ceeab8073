//! Autonomous systems `u' = Au + εh(u)` with `exp(TA) = I`, rewritten in the
//! rotating frame `x = e^{-tA}u` as the `T`-periodic system
//! `x' = εg(x, t)`, `g(x, t) = e^{-tA} h(e^{tA} x)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::FieldHandle;
use crate::jet::Scalar;
use crate::linalg::{expm, frobenius};

/// Residual allowed in `‖exp(TA) - I‖`.
pub const FRAME_PERIODICITY_TOL: f64 = 1e-10;

/// The linear flow `t ↦ e^{tA}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    /// General generator; `e^{tA}` by Padé scaling-and-squaring.
    Dense(DMatrix<f64>),
    /// Block-diagonal generator with 2×2 blocks `[[0, ω_l], [-ω_l, 0]]`,
    /// whose flow is the rotation `[[cos ω_l t, sin ω_l t], [-sin ω_l t, cos ω_l t]]`.
    Rotations(Vec<f64>),
}

impl Frame {
    pub fn dim(&self) -> usize {
        match self {
            Frame::Dense(a) => a.nrows(),
            Frame::Rotations(w) => 2 * w.len(),
        }
    }

    /// The generator `A`.
    pub fn generator(&self) -> DMatrix<f64> {
        match self {
            Frame::Dense(a) => a.clone(),
            Frame::Rotations(w) => {
                let mut a = DMatrix::zeros(2 * w.len(), 2 * w.len());
                for (l, &om) in w.iter().enumerate() {
                    a[(2 * l, 2 * l + 1)] = om;
                    a[(2 * l + 1, 2 * l)] = -om;
                }
                a
            }
        }
    }

    /// `e^{tA}`.
    pub fn matrix(&self, t: f64) -> DMatrix<f64> {
        match self {
            Frame::Dense(a) => expm(&(a * t)),
            Frame::Rotations(w) => {
                let mut m = DMatrix::zeros(2 * w.len(), 2 * w.len());
                for (l, &om) in w.iter().enumerate() {
                    let (s, c) = (om * t).sin_cos();
                    m[(2 * l, 2 * l)] = c;
                    m[(2 * l, 2 * l + 1)] = s;
                    m[(2 * l + 1, 2 * l)] = -s;
                    m[(2 * l + 1, 2 * l + 1)] = c;
                }
                m
            }
        }
    }

    /// `e^{tA} x`.
    pub fn apply<S: Scalar>(&self, t: f64, x: &[S]) -> Vec<S> {
        match self {
            Frame::Dense(_) => {
                let m = self.matrix(t);
                (0..m.nrows())
                    .map(|i| {
                        let mut acc = S::constant(0.0);
                        for (j, xj) in x.iter().enumerate() {
                            let mij = m[(i, j)];
                            if mij != 0.0 {
                                acc = acc + xj.clone() * mij;
                            }
                        }
                        acc
                    })
                    .collect()
            }
            Frame::Rotations(w) => {
                let mut out = Vec::with_capacity(x.len());
                for (l, &om) in w.iter().enumerate() {
                    let (s, c) = (om * t).sin_cos();
                    let (a, b) = (&x[2 * l], &x[2 * l + 1]);
                    out.push(a.clone() * c + b.clone() * s);
                    out.push(b.clone() * c - a.clone() * s);
                }
                out
            }
        }
    }
}

/// `u' = Au + εh(u)` together with the period of `e^{tA}`.
#[derive(Clone, Debug)]
pub struct RotatingFrameSystem {
    pub frame: Frame,
    pub h: FieldHandle,
    pub period: f64,
}

impl RotatingFrameSystem {
    pub fn new(a_matrix: DMatrix<f64>, h: FieldHandle, period: f64) -> Result<Self> {
        RotatingFrameSystem::with_frame(Frame::Dense(a_matrix), h, period)
    }

    pub fn with_frame(frame: Frame, h: FieldHandle, period: f64) -> Result<Self> {
        if frame.dim() != h.dim() {
            return Err(Error::dim(h.dim(), frame.dim()));
        }
        if let Frame::Dense(a) = &frame {
            if !a.is_square() {
                return Err(Error::ConfigInvalid("frame generator must be square".into()));
            }
        }
        if !(period > 0.0) {
            return Err(Error::ConfigInvalid("period must be positive".into()));
        }
        Ok(RotatingFrameSystem { frame, h, period })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        self.frame.generator()
    }

    /// `‖exp(TA) - I‖_F`.
    pub fn periodicity_residual(&self) -> f64 {
        let d = self.dim();
        frobenius(&(self.frame.matrix(self.period) - DMatrix::identity(d, d)))
    }

    /// The full autonomous right-hand side `Au + εh(u)`.
    pub fn full_field(&self, eps: f64) -> Result<FieldHandle> {
        let lin = FieldHandle::linear(crate::magnus_linear::MatrixFunction::constant(self.a_matrix()))
            .as_autonomous();
        FieldHandle::linear_combination(&[(1.0, &lin), (eps, &self.h.as_autonomous())])
    }
}

/// `g(x, t) = e^{-tA} h(e^{tA} x)`, declared `T`-periodic. Jets are
/// propagated through the frame maps, so `h` must be a primitive field.
pub fn autonomous_to_periodic(sys: &RotatingFrameSystem) -> Result<FieldHandle> {
    let residual = sys.periodicity_residual();
    if !(residual <= FRAME_PERIODICITY_TOL) {
        return Err(Error::FramePeriodicityViolation { residual });
    }
    Ok(sys.h.conjugate(&sys.frame)?.with_period(sys.period))
}
