//! Van der Pol oscillator `q'' + q = ε(1 - q²)q'` as a perturbed rotation.

use std::f64::consts::PI;

use crate::fields::{FieldFn, FieldHandle};
use crate::jet::Scalar;
use crate::systems::rotating::{Frame, RotatingFrameSystem};

/// `h(u) = (0, (1 - u_1²) u_2)`.
#[derive(Clone, Copy, Debug)]
pub struct VdpNonlinearity;

impl FieldFn for VdpNonlinearity {
    fn dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, u: &[S], _t: f64) -> Vec<S> {
        let damping = S::constant(1.0) - u[0].square();
        vec![S::constant(0.0), damping * u[1].clone()]
    }
}

/// The rotating-frame field in factored form `ξ_t(x) V_t` with
/// `ξ_t(x) = (1 - (cos t x_1 + sin t x_2)²)(-sin t x_1 + cos t x_2)` and
/// `V_t = (-sin t, cos t)`.
#[derive(Clone, Copy, Debug)]
pub struct VdpFactored;

impl FieldFn for VdpFactored {
    fn dim(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, x: &[S], t: f64) -> Vec<S> {
        let (s, c) = t.sin_cos();
        let q = x[0].clone() * c + x[1].clone() * s;
        let p = x[1].clone() * c - x[0].clone() * s;
        let xi = (S::constant(1.0) - q.square()) * p;
        vec![xi.clone() * (-s), xi * c]
    }
}

/// `u' = Au + εh(u)` with `A = [[0, 1], [-1, 0]]`, period `2π`.
pub fn vdp_field() -> RotatingFrameSystem {
    RotatingFrameSystem::with_frame(
        Frame::Rotations(vec![1.0]),
        FieldHandle::new(VdpNonlinearity).as_autonomous(),
        2.0 * PI,
    )
    .expect("Van der Pol data are consistent")
}

/// `ξ_t(x) V_t` as a `2π`-periodic field.
pub fn vdp_factored() -> FieldHandle {
    FieldHandle::new(VdpFactored).with_period(2.0 * PI)
}

/// `G_1(X) = -((‖X‖² - 4)/8) X`.
pub fn vdp_g1_closed(x: &[f64]) -> Vec<f64> {
    let n = x[0] * x[0] + x[1] * x[1];
    let c = -(n - 4.0) / 8.0;
    vec![c * x[0], c * x[1]]
}

/// Second-order averaged field of the rotating Van der Pol system.
pub fn vdp_g2_closed(x: &[f64]) -> Vec<f64> {
    let (x1, x2) = (x[0], x[1]);
    let (a, b) = (x1 * x1, x2 * x2);
    let c1 = -x2 * (32.0 - 24.0 * b + 5.0 * b * b - 88.0 * a + 21.0 * a * a + 10.0 * a * b) / 256.0;
    let c2 = x1 * (21.0 * a * a + 32.0 - 88.0 * a + 40.0 * b + 10.0 * a * b + 5.0 * b * b) / 256.0;
    vec![c1, c2]
}

/// `‖X‖² - 4 - (ε/2) X_1 X_2³`, which vanishes on the refined limit cycle
/// up to O(ε²).
pub fn vdp_limit_cycle_invariant(x: &[f64], eps: f64) -> f64 {
    x[0] * x[0] + x[1] * x[1] - 4.0 - 0.5 * eps * x[0] * x[1].powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rotating::autonomous_to_periodic;

    #[test]
    fn closed_form_values() {
        assert_eq!(vdp_g1_closed(&[2.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(vdp_g1_closed(&[1.0, 1.0]), vec![0.25, 0.25]);
        assert_eq!(vdp_g2_closed(&[2.0, 0.0]), vec![0.0, 0.125]);
        assert_eq!(vdp_limit_cycle_invariant(&[2.0, 0.0], 0.3), 0.0);
        assert_eq!(vdp_limit_cycle_invariant(&[0.0, 2.0], 0.0), 0.0);
    }

    #[test]
    fn rotating_field_values() {
        let g = autonomous_to_periodic(&vdp_field()).unwrap();
        assert_eq!(g.period(), Some(2.0 * PI));
        let v = g.value(&[1.0, 1.0], 0.0).unwrap();
        assert!(v[0].abs() < 1e-16 && v[1].abs() < 1e-16);
        let v = g.value(&[0.0, 1.0], 0.0).unwrap();
        assert!(v[0].abs() < 1e-16 && (v[1] - 1.0).abs() < 1e-16);
        for t in [0.0, 1.0, 4.0] {
            assert_eq!(g.value(&[0.0, 0.0], t).unwrap(), vec![0.0, 0.0]);
        }
    }
}
