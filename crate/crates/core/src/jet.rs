//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] is a polynomial in the displacement `δ ∈ R^n` truncated at a
//! total degree `k`: seeding `x_i + δ_i` and pushing the seeds through a
//! computation yields the value and all partial derivatives up to order `k`
//! at once. Monomials are stored in graded order, so the coefficient vector
//! of an order-`j` jet is a prefix of the order-`k` one for every `j ≤ k`.
//! Truncation is therefore a slice and no re-indexing is ever needed.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use smallvec::{smallvec, SmallVec};

/// Inline capacity covers every order-3 jet in two variables.
type Coeffs = SmallVec<[f64; 10]>;

/// Monomial bookkeeping for jets in `nvars` variables truncated at `order`.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    /// `degree_end[d]` = number of monomials of total degree `<= d`.
    degree_end: Vec<usize>,
    /// `(a, b, out)` triples, sorted by the degree of `out`.
    mul: Vec<(u32, u32, u32)>,
    /// `mul_end[d]` = number of triples whose output degree is `<= d`.
    mul_end: Vec<usize>,
    /// `diff[var][m] = (src, factor)` for every monomial `m` of degree `< order`.
    diff: Vec<Vec<(u32, f64)>>,
}

fn monomials_of_degree(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(var: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        let n = cur.len();
        if var + 1 == n {
            cur[var] = left as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[var] = e as u8;
            rec(var + 1, left - e, cur, out);
        }
        cur[var] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0u8; nvars];
    if nvars == 0 {
        if degree == 0 {
            out.push(cur);
        }
        return out;
    }
    rec(0, degree, &mut cur, &mut out);
    out
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exps = Vec::new();
        let mut degree_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            exps.extend(monomials_of_degree(nvars, d));
            degree_end.push(exps.len());
        }
        let index: HashMap<Vec<u8>, u32> = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&v| v as usize).sum::<usize>();

        let mut by_degree: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); order + 1];
        let mut sum = vec![0u8; nvars];
        for (i, a) in exps.iter().enumerate() {
            let da = degree(a);
            for (j, b) in exps.iter().enumerate() {
                let db = degree(b);
                if da + db > order {
                    continue;
                }
                for v in 0..nvars {
                    sum[v] = a[v] + b[v];
                }
                let out = index[&sum];
                by_degree[da + db].push((i as u32, j as u32, out));
            }
        }
        let mut mul = Vec::new();
        let mut mul_end = Vec::with_capacity(order + 1);
        for bucket in by_degree {
            mul.extend(bucket);
            mul_end.push(mul.len());
        }

        let lower = if order == 0 { 0 } else { degree_end[order - 1] };
        let mut diff = Vec::with_capacity(nvars);
        for var in 0..nvars {
            let mut table = Vec::with_capacity(lower);
            for e in exps.iter().take(lower) {
                let mut up = e.clone();
                up[var] += 1;
                table.push((index[&up], f64::from(e[var]) + 1.0));
            }
            diff.push(table);
        }

        JetSpace {
            nvars,
            order,
            exps,
            degree_end,
            mul,
            mul_end,
            diff,
        }
    }

    /// Shared, immutable space for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> &'static JetSpace {
        thread_local! {
            static LOCAL: RefCell<Vec<(usize, usize, &'static JetSpace)>> = const { RefCell::new(Vec::new()) };
        }
        if let Some(s) = LOCAL.with(|l| {
            l.borrow()
                .iter()
                .find(|(n, k, _)| *n == nvars && *k == order)
                .map(|e| e.2)
        }) {
            return s;
        }
        let s = JetSpace::get_shared(nvars, order);
        LOCAL.with(|l| l.borrow_mut().push((nvars, order, s)));
        s
    }

    fn get_shared(nvars: usize, order: usize) -> &'static JetSpace {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static JetSpace>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(JetSpace::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of monomials (coefficients) in this space.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Number of monomials of total degree at most `degree`.
    pub fn len_up_to(&self, degree: usize) -> usize {
        self.degree_end[degree.min(self.order)]
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.exps.iter().position(|e| e.as_slice() == exps)
    }

    fn lower(&self) -> &'static JetSpace {
        JetSpace::get(self.nvars, self.order.saturating_sub(1))
    }

    /// Truncated product of two coefficient vectors of this space.
    fn mul_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, o) in &self.mul[..self.mul_end[self.order]] {
            out[o as usize] += a[i as usize] * b[j as usize];
        }
    }
}

/// Scalar truncated Taylor polynomial. Constants carry no space and
/// broadcast against any jet.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Option<&'static JetSpace>,
    c: Coeffs,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet {
            space: None,
            c: smallvec![v],
        }
    }

    /// The seed `x + δ_var`.
    pub fn variable(space: &'static JetSpace, x: f64, var: usize) -> Self {
        let mut c: Coeffs = smallvec![0.0; space.len()];
        c[0] = x;
        if space.order >= 1 {
            // Degree-one monomials follow the constant in variable order.
            c[1 + var] = 1.0;
        }
        Jet {
            space: Some(space),
            c,
        }
    }

    /// Seeds `x_i + δ_i` for every coordinate.
    pub fn seed(x: &[f64], order: usize) -> Vec<Jet> {
        let space = JetSpace::get(x.len(), order);
        x.iter()
            .enumerate()
            .map(|(i, &xi)| Jet::variable(space, xi, i))
            .collect()
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn space(&self) -> Option<&'static JetSpace> {
        self.space
    }

    /// Coefficients laid out in `space`; constants are expanded.
    pub fn coefficients_in(&self, space: &'static JetSpace) -> Vec<f64> {
        match self.space {
            Some(_) => self.c[..space.len()].to_vec(),
            None => {
                let mut c = vec![0.0; space.len()];
                c[0] = self.c[0];
                c
            }
        }
    }

    fn zip_space(&self, other: &Jet) -> Option<&'static JetSpace> {
        match (self.space, other.space) {
            (Some(a), Some(b)) => {
                debug_assert!(std::ptr::eq(a, b), "jets from different spaces");
                Some(a)
            }
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        }
    }

    /// Applies a smooth scalar function given its Taylor coefficients at the
    /// value: `taylor[m] = f^(m)(a0) / m!`, for `m = 0..=order`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        let Some(space) = self.space else {
            return Jet::constant(taylor[0]);
        };
        let k = space.order;
        let mut hat = self.c.clone();
        hat[0] = 0.0;
        let mut acc: Coeffs = smallvec![0.0; space.len()];
        acc[0] = taylor.get(k).copied().unwrap_or(0.0);
        let mut tmp: Coeffs = smallvec![0.0; space.len()];
        for m in (0..k).rev() {
            space.mul_into(&acc, &hat, &mut tmp);
            std::mem::swap(&mut acc, &mut tmp);
            acc[0] += taylor[m];
        }
        Jet {
            space: Some(space),
            c: acc,
        }
    }

    fn order(&self) -> usize {
        self.space.map_or(0, |s| s.order)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        match (self.space.is_some(), rhs.space.is_some()) {
            (true, true) => {
                let mut a = self;
                a.c.iter_mut().zip(&rhs.c).for_each(|(x, y)| *x += y);
                a
            }
            (true, false) => self + rhs.c[0],
            (false, _) => rhs + self.c[0],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.c.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        match self.zip_space(&rhs) {
            None => Jet::constant(self.c[0] * rhs.c[0]),
            Some(space) => {
                if self.space.is_none() {
                    return rhs * self.c[0];
                }
                if rhs.space.is_none() {
                    return self * rhs.c[0];
                }
                let mut out: Coeffs = smallvec![0.0; space.len()];
                space.mul_into(&self.c, &rhs.c, &mut out);
                Jet {
                    space: Some(space),
                    c: out,
                }
            }
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.c.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

/// Number type field definitions are written against, so that the same code
/// evaluates on plain `f64` and on jets.
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    /// Applies `f` given a callback returning `[f(a), f'(a)/1!, …, f^(m)(a)/m!]`
    /// for the requested truncation order `m`.
    fn map_taylor(&self, taylor: impl Fn(f64, usize) -> Vec<f64>) -> Self;

    /// `self + x·c`; jets override this to update in place.
    fn add_scaled(self, x: &Self, c: f64) -> Self {
        self + x.clone() * c
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }

    fn sin(&self) -> Self {
        self.map_taylor(|a, m| {
            let (s, c) = a.sin_cos();
            let cycle = [s, c, -s, -c];
            let mut fact = 1.0;
            (0..=m)
                .map(|i| {
                    if i > 0 {
                        fact *= i as f64;
                    }
                    cycle[i % 4] / fact
                })
                .collect()
        })
    }

    fn cos(&self) -> Self {
        self.map_taylor(|a, m| {
            let (s, c) = a.sin_cos();
            let cycle = [c, -s, -c, s];
            let mut fact = 1.0;
            (0..=m)
                .map(|i| {
                    if i > 0 {
                        fact *= i as f64;
                    }
                    cycle[i % 4] / fact
                })
                .collect()
        })
    }

    fn exp(&self) -> Self {
        self.map_taylor(|a, m| {
            let e = a.exp();
            let mut fact = 1.0;
            (0..=m)
                .map(|i| {
                    if i > 0 {
                        fact *= i as f64;
                    }
                    e / fact
                })
                .collect()
        })
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn map_taylor(&self, taylor: impl Fn(f64, usize) -> Vec<f64>) -> Self {
        taylor(*self, 0)[0]
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
}

impl Scalar for Jet {
    fn constant(c: f64) -> Self {
        Jet::constant(c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn map_taylor(&self, taylor: impl Fn(f64, usize) -> Vec<f64>) -> Self {
        self.compose(&taylor(self.c[0], self.order()))
    }
    fn add_scaled(mut self, x: &Self, c: f64) -> Self {
        match (self.space, x.space) {
            (_, None) => self.c[0] += c * x.c[0],
            (None, Some(_)) => {
                let v = self.c[0];
                self = x.clone() * c;
                self.c[0] += v;
            }
            (Some(a), Some(b)) => {
                debug_assert!(std::ptr::eq(a, b), "jets from different spaces");
                self.c.iter_mut().zip(&x.c).for_each(|(s, v)| *s += c * v);
            }
        }
        self
    }
}

/// Vector-valued jet: the value of a field and its x-derivatives up to the
/// space order, one coefficient block per output component, stored
/// contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct JetValue {
    space: &'static JetSpace,
    dim: usize,
    data: Vec<f64>,
}

impl PartialEq for JetSpace {
    fn eq(&self, other: &Self) -> bool {
        self.nvars == other.nvars && self.order == other.order
    }
}

impl JetValue {
    pub fn zeros(dim: usize, nvars: usize, order: usize) -> Self {
        let space = JetSpace::get(nvars, order);
        JetValue {
            space,
            dim,
            data: vec![0.0; dim * space.len()],
        }
    }

    /// A jet whose derivatives all vanish.
    pub fn from_values(values: &[f64], nvars: usize, order: usize) -> Self {
        let mut out = JetValue::zeros(values.len(), nvars, order);
        let len = out.space.len();
        for (c, &v) in out.data.chunks_mut(len).zip(values) {
            c[0] = v;
        }
        out
    }

    pub fn from_jets(jets: Vec<Jet>, nvars: usize, order: usize) -> Self {
        let space = JetSpace::get(nvars, order);
        let len = space.len();
        let mut data = vec![0.0; jets.len() * len];
        for (c, j) in data.chunks_mut(len).zip(&jets) {
            match j.space {
                Some(_) => c.copy_from_slice(&j.c[..len]),
                None => c[0] = j.c[0],
            }
        }
        JetValue {
            space,
            dim: jets.len(),
            data,
        }
    }

    /// Builds a jet from raw coefficient vectors laid out in the space of
    /// `(nvars, order)`.
    pub fn from_coefficients(comps: Vec<Vec<f64>>, nvars: usize, order: usize) -> Self {
        let space = JetSpace::get(nvars, order);
        assert!(comps.iter().all(|c| c.len() == space.len()));
        JetValue {
            space,
            dim: comps.len(),
            data: comps.concat(),
        }
    }

    pub fn space(&self) -> &'static JetSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let len = self.space.len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn value(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.component(i)[0]).collect()
    }

    /// `J[i][j] = ∂ f_i / ∂ x_j`. Requires order ≥ 1.
    pub fn jacobian(&self) -> DMatrix<f64> {
        assert!(self.order() >= 1, "jacobian needs a jet of order >= 1");
        let n = self.space.nvars;
        DMatrix::from_fn(self.dim(), n, |i, j| self.component(i)[1 + j])
    }

    /// Partial derivative `∂^α f_comp` for the multi-index `alpha`.
    pub fn partial(&self, comp: usize, alpha: &[u8]) -> f64 {
        let idx = self
            .space
            .index_of(alpha)
            .expect("multi-index outside the jet space");
        let fact: f64 = alpha
            .iter()
            .map(|&a| (1..=a as u32).map(f64::from).product::<f64>())
            .product();
        self.component(comp)[idx] * fact
    }

    /// Full derivative tensor of order `m` for one component, flattened in
    /// row-major order over `m` slots of size `nvars`.
    pub fn derivative_tensor(&self, comp: usize, m: usize) -> Vec<f64> {
        let n = self.space.nvars;
        let total = n.pow(m as u32);
        let mut out = Vec::with_capacity(total);
        let mut slots = vec![0usize; m];
        for _ in 0..total {
            let mut alpha = vec![0u8; n];
            for &s in &slots {
                alpha[s] += 1;
            }
            out.push(self.partial(comp, &alpha));
            for s in (0..m).rev() {
                slots[s] += 1;
                if slots[s] < n {
                    break;
                }
                slots[s] = 0;
            }
        }
        out
    }

    /// Drops every monomial of degree above `order`.
    pub fn truncated(&self, order: usize) -> JetValue {
        assert!(order <= self.order());
        let space = JetSpace::get(self.space.nvars, order);
        let len = space.len();
        let mut data = Vec::with_capacity(self.dim * len);
        for i in 0..self.dim {
            data.extend_from_slice(&self.component(i)[..len]);
        }
        JetValue {
            space,
            dim: self.dim,
            data,
        }
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &JetValue) {
        debug_assert_eq!(self.space, other.space);
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(u, v)| *u += a * v);
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &JetValue) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Lie bracket `P'Q - Q'P` of two fields given as jets of equal order
    /// `k ≥ 1`. The result is exact to order `k - 1`.
    pub fn bracket(p: &JetValue, q: &JetValue) -> JetValue {
        assert_eq!(p.space, q.space, "bracket operands must share a jet space");
        assert!(p.order() >= 1, "bracket needs operands of order >= 1");
        let d = p.dim();
        let n = p.space.nvars;
        let out_space = p.space.lower();
        let len = out_space.len();
        let mut data = vec![0.0; d * len];
        let mut dp: Coeffs = smallvec![0.0; len];
        let mut dq: Coeffs = smallvec![0.0; len];
        let mut prod: Coeffs = smallvec![0.0; len];
        for j in 0..n {
            // Column j of both Jacobians, as order k-1 jets.
            let qj = &q.component(j)[..len];
            let pj = &p.component(j)[..len];
            let table = &p.space.diff[j];
            for (i, out) in data.chunks_mut(len).enumerate() {
                let (pc, qc) = (p.component(i), q.component(i));
                for (m, &(src, f)) in table.iter().enumerate() {
                    dp[m] = f * pc[src as usize];
                    dq[m] = f * qc[src as usize];
                }
                out_space.mul_into(&dp, qj, &mut prod);
                out.iter_mut().zip(&prod).for_each(|(o, v)| *o += v);
                out_space.mul_into(&dq, pj, &mut prod);
                out.iter_mut().zip(&prod).for_each(|(o, v)| *o -= v);
            }
        }
        JetValue {
            space: out_space,
            dim: d,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn graded_prefix_layout() {
        let s3 = JetSpace::get(2, 3);
        let s1 = JetSpace::get(2, 1);
        assert_eq!(s3.len(), 10);
        assert_eq!(s1.len(), 3);
        for i in 0..s1.len() {
            assert_eq!(s1.exponents(i), s3.exponents(i));
        }
        assert_eq!(JetSpace::get(34, 1).len(), 35);
    }

    #[test]
    fn polynomial_derivatives() {
        // f(x, y) = x^2 y + 3 y^3 at (2, -1)
        let v = Jet::seed(&[2.0, -1.0], 3);
        let f = v[0].clone() * v[0].clone() * v[1].clone() + v[1].powi(3) * 3.0;
        let jv = JetValue::from_jets(vec![f], 2, 3);
        assert!(close(jv.value()[0], -4.0 - 3.0, 1e-14));
        assert!(close(jv.partial(0, &[1, 0]), 2.0 * 2.0 * -1.0, 1e-14));
        assert!(close(jv.partial(0, &[0, 1]), 4.0 + 9.0, 1e-14));
        assert!(close(jv.partial(0, &[1, 1]), 4.0, 1e-14));
        assert!(close(jv.partial(0, &[0, 2]), 18.0 * -1.0, 1e-14));
        assert!(close(jv.partial(0, &[2, 1]), 2.0, 1e-14));
        assert!(close(jv.partial(0, &[0, 3]), 18.0, 1e-14));
    }

    #[test]
    fn transcendental_composition() {
        let v = Jet::seed(&[0.3], 4);
        let s = v[0].sin();
        let e = v[0].exp();
        let js = JetValue::from_jets(vec![s, e], 1, 4);
        for m in 0..=4u8 {
            let sin_d = match m % 4 {
                0 => 0.3f64.sin(),
                1 => 0.3f64.cos(),
                2 => -0.3f64.sin(),
                _ => -0.3f64.cos(),
            };
            assert!(close(js.partial(0, &[m]), sin_d, 1e-14));
            assert!(close(js.partial(1, &[m]), 0.3f64.exp(), 1e-14));
        }
    }

    #[test]
    fn bracket_of_linear_fields_is_commutator_action() {
        // P = A x, Q = B x  =>  P'Q - Q'P = (AB - BA) x
        let a = [[0.0, 1.0], [0.0, 0.0]];
        let b = [[0.0, 0.0], [1.0, 0.0]];
        let x = [0.7, -0.2];
        let s = Jet::seed(&x, 1);
        let lin = |m: [[f64; 2]; 2]| {
            (0..2)
                .map(|i| s[0].clone() * m[i][0] + s[1].clone() * m[i][1])
                .collect::<Vec<_>>()
        };
        let p = JetValue::from_jets(lin(a), 2, 1);
        let q = JetValue::from_jets(lin(b), 2, 1);
        let br = JetValue::bracket(&p, &q);
        // [α, β] = diag(1, -1)
        assert!(close(br.value()[0], 0.7, 1e-15));
        assert!(close(br.value()[1], 0.2, 1e-15));
    }

    #[test]
    fn derivative_tensor_is_symmetric() {
        let v = Jet::seed(&[0.4, 1.1, -0.3], 3);
        let f = (v[0].clone() * v[1].clone()).sin() * v[2].clone() + v[1].exp() * v[0].square();
        let jv = JetValue::from_jets(vec![f], 3, 3);
        let t = jv.derivative_tensor(0, 3);
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = t[(i * n + j) * n + k];
                    for (p, q, r) in [(j, i, k), (k, j, i), (i, k, j)] {
                        assert!(close(a, t[(p * n + q) * n + r], 1e-12));
                    }
                }
            }
        }
    }
}
