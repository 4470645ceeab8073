//! Pseudospectral truncation of `i ψ_t = -ψ_xx + ε k(|ψ|²) ψ` on the torus
//! `[0, a)`.
//!
//! With `ψ = Σ_{|l| ≤ M} c_l e^{2πilx/a}`, the modes obey
//! `c_l' = -iλ_l c_l - iε P_l[k(|ψ|²)ψ]`, `λ_l = (2πl/a)²`, where `P_l` is the
//! discrete Fourier coefficient on `N` equispaced collocation points. The
//! state interleaves `(Re c_l, Im c_l)` for `l = -M..=M`. The linear flow is
//! a rotation by `λ_l t` in every mode and is `T`-periodic with
//! `T = a²/(2π)`.
//!
//! The truncated system is Hamiltonian: with
//! `H(u) = ½ (a/N) Σ_m K(|ψ(x_m)|²)`, `K(r) = ∫_0^r k`,
//! the perturbation satisfies `J h = ∇H` for the constant
//! [`nls_symplectic_matrix`] `J`, and the mass `Σ|c_l|²` is an exact
//! invariant.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{FieldFn, FieldHandle};
use crate::jet::Scalar;
use crate::systems::rotating::{Frame, RotatingFrameSystem};

/// Largest supported mode cutoff.
pub const MAX_MODES: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralNlsConfig {
    /// Torus length `a`.
    pub length: f64,
    /// Mode cutoff `M`; the state has dimension `2(2M + 1)`.
    pub modes: usize,
    /// `k(r) = Σ_i coeffs[i] r^i`.
    pub nonlinearity: Vec<f64>,
    /// Collocation points; `None` means `4M + 1`.
    pub grid_points: Option<usize>,
}

impl SpectralNlsConfig {
    /// Cubic NLS, `k(r) = r`.
    pub fn cubic(length: f64, modes: usize) -> Self {
        SpectralNlsConfig {
            length,
            modes,
            nonlinearity: vec![0.0, 1.0],
            grid_points: None,
        }
    }

    pub fn dim(&self) -> usize {
        2 * (2 * self.modes + 1)
    }

    pub fn period(&self) -> f64 {
        self.length * self.length / (2.0 * PI)
    }

    pub fn grid_size(&self) -> usize {
        self.grid_points.unwrap_or(4 * self.modes + 1)
    }

    /// `λ_l = (2πl/a)²` for `l = -M..=M`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.modes as i64;
        (-m..=m)
            .map(|l| (2.0 * PI * l as f64 / self.length).powi(2))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::ConfigInvalid("torus length must be positive".into()));
        }
        if self.modes == 0 || self.modes > MAX_MODES {
            return Err(Error::ConfigInvalid(format!(
                "mode cutoff must be in 1..={MAX_MODES}"
            )));
        }
        if self.grid_size() < 4 * self.modes + 1 {
            return Err(Error::ConfigInvalid(
                "collocation grid needs at least 4M + 1 points".into(),
            ));
        }
        if self.nonlinearity.iter().any(|c| !c.is_finite()) {
            return Err(Error::ConfigInvalid("non-finite nonlinearity coefficient".into()));
        }
        Ok(())
    }
}

/// Collocation tables `cos θ_{lm}`, `sin θ_{lm}` with `θ_{lm} = 2πlm/N`.
#[derive(Clone, Debug)]
struct Collocation {
    modes: usize,
    points: usize,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl Collocation {
    fn new(cfg: &SpectralNlsConfig) -> Self {
        let n = cfg.grid_size();
        let m = cfg.modes as i64;
        let mut cos = Vec::new();
        let mut sin = Vec::new();
        for l in -m..=m {
            let row: Vec<(f64, f64)> = (0..n)
                .map(|j| {
                    // reduce l·j mod N first so the angle stays small
                    let r = (l * j as i64).rem_euclid(n as i64) as f64;
                    (2.0 * PI * r / n as f64).sin_cos()
                })
                .collect();
            sin.push(row.iter().map(|p| p.0).collect());
            cos.push(row.iter().map(|p| p.1).collect());
        }
        Collocation {
            modes: 2 * cfg.modes + 1,
            points: n,
            cos,
            sin,
        }
    }

    /// `ψ(x_m)` as (real, imaginary) parts.
    fn synthesize<S: Scalar>(&self, u: &[S]) -> Vec<(S, S)> {
        (0..self.points)
            .map(|j| {
                let mut re = S::constant(0.0);
                let mut im = S::constant(0.0);
                for l in 0..self.modes {
                    let (p, q) = (&u[2 * l], &u[2 * l + 1]);
                    let (c, s) = (self.cos[l][j], self.sin[l][j]);
                    re = re.add_scaled(p, c).add_scaled(q, -s);
                    im = im.add_scaled(p, s).add_scaled(q, c);
                }
                (re, im)
            })
            .collect()
    }

    /// `P_l[f]` for all modes, as (real, imaginary) parts.
    fn analyze<S: Scalar>(&self, f: &[(S, S)]) -> Vec<(S, S)> {
        let inv = 1.0 / self.points as f64;
        (0..self.modes)
            .map(|l| {
                let mut re = S::constant(0.0);
                let mut im = S::constant(0.0);
                for (j, (fr, fi)) in f.iter().enumerate() {
                    let (c, s) = (self.cos[l][j], self.sin[l][j]);
                    re = re.add_scaled(fr, c).add_scaled(fi, s);
                    im = im.add_scaled(fi, c).add_scaled(fr, -s);
                }
                (re * inv, im * inv)
            })
            .collect()
    }
}

fn poly<S: Scalar>(coeffs: &[f64], r: &S) -> S {
    let mut acc = S::constant(0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * r.clone() + c;
    }
    acc
}

/// Nonlinear part `h(u)` of the mode equations: `-i P_l[k(|ψ|²)ψ]`.
#[derive(Clone, Debug)]
pub struct NlsNonlinearity {
    coeffs: Vec<f64>,
    colloc: Collocation,
}

impl NlsNonlinearity {
    pub fn new(cfg: &SpectralNlsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(NlsNonlinearity {
            coeffs: cfg.nonlinearity.clone(),
            colloc: Collocation::new(cfg),
        })
    }
}

impl FieldFn for NlsNonlinearity {
    fn dim(&self) -> usize {
        2 * self.colloc.modes
    }
    fn eval<S: Scalar>(&self, u: &[S], _t: f64) -> Vec<S> {
        let psi = self.colloc.synthesize(u);
        let f: Vec<(S, S)> = psi
            .into_iter()
            .map(|(re, im)| {
                let r = re.square() + im.square();
                let k = poly(&self.coeffs, &r);
                (k.clone() * re, k * im)
            })
            .collect();
        self.colloc
            .analyze(&f)
            .into_iter()
            .flat_map(|(re, im)| [im, -re])
            .collect()
    }
}

/// The mode system as `u' = Au + εh(u)` with blockwise rotations.
pub fn nls_spectral_field(cfg: &SpectralNlsConfig) -> Result<RotatingFrameSystem> {
    let h = NlsNonlinearity::new(cfg)?;
    let h = if cfg.nonlinearity.iter().all(|&c| c == 0.0) {
        FieldHandle::zero(cfg.dim())
    } else {
        FieldHandle::new(h).as_autonomous()
    };
    RotatingFrameSystem::with_frame(Frame::Rotations(cfg.eigenvalues()), h, cfg.period())
}

/// `H(x, t) = ½ (a/N) Σ_m K(|ψ_m|²)` evaluated at `u = e^{tA} x`.
pub fn nls_hamiltonian(cfg: &SpectralNlsConfig, x: &[f64], t: f64) -> Result<f64> {
    cfg.validate()?;
    if x.len() != cfg.dim() {
        return Err(Error::dim(cfg.dim(), x.len()));
    }
    let colloc = Collocation::new(cfg);
    let u = Frame::Rotations(cfg.eigenvalues()).apply(t, x);
    // K(r) = Σ c_i r^{i+1}/(i+1)
    let antider: Vec<f64> = std::iter::once(0.0)
        .chain(cfg.nonlinearity.iter().enumerate().map(|(i, c)| c / (i + 1) as f64))
        .collect();
    let total: f64 = colloc
        .synthesize(&u)
        .iter()
        .map(|(re, im)| poly(&antider, &(re * re + im * im)))
        .sum();
    Ok(0.5 * cfg.length / colloc.points as f64 * total)
}

/// `J` with `J h = ∇H`: block diagonal with blocks `a [[0, -1], [1, 0]]`.
pub fn nls_symplectic_matrix(cfg: &SpectralNlsConfig) -> DMatrix<f64> {
    let d = cfg.dim();
    let mut j = DMatrix::zeros(d, d);
    for l in 0..d / 2 {
        j[(2 * l, 2 * l + 1)] = -cfg.length;
        j[(2 * l + 1, 2 * l)] = cfg.length;
    }
    j
}

/// `Σ_l |c_l|²`.
pub fn nls_mass(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
