//! Fixtures shared by the benchmarks in `benches/`.

use liegen_core::magnus_linear::MatrixFunction;
use liegen_core::systems::{autonomous_to_periodic, vdp_field};
use liegen_core::FieldHandle;
use nalgebra::DMatrix;

/// Deterministic pseudo-random entries in `[-1, 1]`, no RNG needed.
pub fn matrix(seed: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| ((seed * 131 + i * 17 + j * 7 + 1) as f64 * 0.618).sin())
}

/// Degree-3 polynomial `A(t)`.
pub fn poly(dim: usize) -> MatrixFunction<f64> {
    MatrixFunction::polynomial((0..4).map(|k| matrix(k, dim)).collect())
}

/// Van der Pol in the rotating frame.
pub fn vdp_g() -> FieldHandle {
    autonomous_to_periodic(&vdp_field()).expect("Van der Pol frame is 2π-periodic")
}
