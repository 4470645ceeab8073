//! Dense matrix helpers shared by the linear paths.

use nalgebra::{ComplexField, DMatrix};

/// Scalars accepted by the matrix routines: `f64` and `Complex<f64>`.
pub trait MatScalar: ComplexField<RealField = f64> + Copy {}

impl<T: ComplexField<RealField = f64> + Copy> MatScalar for T {}

/// `AB - BA`.
pub fn commutator<T: MatScalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a * b - b * a
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<T: MatScalar>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn frobenius<T: MatScalar>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the degree-13 approximant is accurate to unit
/// roundoff (Higham 2005).
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the diagonal `[13/13]`
/// Padé approximant.
pub fn expm<T: MatScalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = norm1(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * T::from_real(2f64.powi(-s));
    let b = |k: usize| T::from_real(PADE13[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * inner_u;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
