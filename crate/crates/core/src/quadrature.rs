//! Composite Gauss–Legendre rules and the iterated-integral machinery built
//! on them.

use std::sync::Arc;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values `P_0(x), …, P_{n}(x)`.
fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 2..=n {
        let kf = k as f64;
        p.push(((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf);
    }
    p
}

#[derive(Debug)]
struct RuleData {
    /// Composite nodes on `[0, 1]`, strictly increasing.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per-panel interpolatory integration matrix on the reference panel
    /// `[0, 1]`: `local[i][j]` integrates the Lagrange basis `ℓ_j` over `[0, u_i]`.
    local: Vec<Vec<f64>>,
}

/// Composite Gauss–Legendre rule. Cloning is cheap.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes_per_panel: usize,
    panels: usize,
    data: Arc<RuleData>,
}

impl PartialEq for QuadratureRule {
    fn eq(&self, other: &Self) -> bool {
        self.nodes_per_panel == other.nodes_per_panel && self.panels == other.panels
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::new(16, 1)
    }
}

impl QuadratureRule {
    pub const DEFAULT_NODES: usize = 16;
    /// Node count used for rotating-frame (trigonometric) integrands.
    pub const TRIG_NODES: usize = 64;

    pub fn new(nodes_per_panel: usize, panels: usize) -> Self {
        assert!(nodes_per_panel >= 1 && panels >= 1);
        let (x, w) = gauss_legendre(nodes_per_panel);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(nodes_per_panel * panels);
        let mut weights = Vec::with_capacity(nodes_per_panel * panels);
        for p in 0..panels {
            let a = p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }

        // Integrate the interpolant through the reference nodes via its
        // Legendre expansion: ∫_{-1}^{ξ} P_k = (P_{k+1}(ξ) - P_{k-1}(ξ)) / (2k+1).
        let n = nodes_per_panel;
        let px: Vec<Vec<f64>> = x.iter().map(|&xj| legendre_all(n, xj)).collect();
        let mut local = vec![vec![0.0; n]; n];
        for (i, &xi) in x.iter().enumerate() {
            let pxi = legendre_all(n, xi);
            let integral: Vec<f64> = (0..n)
                .map(|k| {
                    if k == 0 {
                        xi + 1.0
                    } else {
                        (pxi[k + 1] - pxi[k - 1]) / (2.0 * k as f64 + 1.0)
                    }
                })
                .collect();
            for j in 0..n {
                let s: f64 = (0..n)
                    .map(|k| (2.0 * k as f64 + 1.0) / 2.0 * w[j] * px[j][k] * integral[k])
                    .sum();
                // Reference panel [-1, 1] -> [0, 1].
                local[i][j] = 0.5 * s;
            }
        }

        QuadratureRule {
            nodes_per_panel,
            panels,
            data: Arc::new(RuleData {
                nodes,
                weights,
                local,
            }),
        }
    }

    /// Single panel with `n` nodes.
    pub fn with_nodes(n: usize) -> Self {
        QuadratureRule::new(n, 1)
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.nodes_per_panel
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn len(&self) -> usize {
        self.data.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nodes.is_empty()
    }

    /// Nodes on `[0, 1]`.
    pub fn unit_nodes(&self) -> &[f64] {
        &self.data.nodes
    }

    pub fn unit_weights(&self) -> &[f64] {
        &self.data.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn nodes_weights(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let h = b - a;
        let nodes = self.data.nodes.iter().map(|u| a + h * u).collect();
        let weights = self.data.weights.iter().map(|w| h * w).collect();
        (nodes, weights)
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.data
            .nodes
            .iter()
            .zip(&self.data.weights)
            .map(|(u, w)| w * f(a + h * u))
            .sum::<f64>()
            * h
    }

    /// Collocation grid on `[0, t]` for iterated integrals.
    pub fn grid(&self, t: f64) -> TimeGrid {
        TimeGrid::new(self, t)
    }
}

/// Composite Gauss–Legendre nodes on `[0, t]` together with the
/// interpolatory matrix for running integrals `∫_0^{τ_i}`.
///
/// Running integrals are exact for piecewise polynomials of degree
/// `< nodes_per_panel`; the full integral `∫_0^t` uses the Gauss weights and
/// is exact up to degree `2 nodes_per_panel - 1`.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    rule: QuadratureRule,
    t: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    fn new(rule: &QuadratureRule, t: f64) -> Self {
        let (nodes, weights) = rule.nodes_weights(0.0, t);
        TimeGrid {
            rule: rule.clone(),
            t,
            nodes,
            weights,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_0^{τ_i} f` for every node, for any linear space of values.
    pub fn running_integral<V: Clone>(
        &self,
        values: &[V],
        zero: V,
        axpy: impl Fn(&mut V, f64, &V),
    ) -> Vec<V> {
        let n = self.rule.nodes_per_panel;
        let panel_len = self.t / self.rule.panels as f64;
        let local = &self.rule.data.local;
        let mut out = Vec::with_capacity(values.len());
        let mut before = zero;
        for p in 0..self.rule.panels {
            let chunk = &values[p * n..(p + 1) * n];
            for row in local.iter() {
                let mut acc = before.clone();
                for (lij, v) in row.iter().zip(chunk) {
                    axpy(&mut acc, panel_len * lij, v);
                }
                out.push(acc);
            }
            let wts = &self.weights[p * n..(p + 1) * n];
            for (w, v) in wts.iter().zip(chunk) {
                axpy(&mut before, *w, v);
            }
        }
        out
    }

    /// `∫_0^t f`.
    pub fn integral<V: Clone>(&self, values: &[V], zero: V, axpy: impl Fn(&mut V, f64, &V)) -> V {
        let mut acc = zero;
        for (w, v) in self.weights.iter().zip(values) {
            axpy(&mut acc, *w, v);
        }
        acc
    }
}

/// Tensor Gauss–Legendre rule on the ordered simplex
/// `Δ_n(t) = {0 ≤ t_n ≤ … ≤ t_1 ≤ t}` by the substitution
/// `t_1 = t u_1`, `t_{k+1} = t_k u_{k+1}`.
pub fn simplex_points(n: usize, t: f64, nodes: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_legendre(nodes);
    let u: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
    let wu: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    let mut out = Vec::with_capacity(nodes.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        let mut pts = Vec::with_capacity(n);
        let mut weight = 1.0;
        let mut upper = t;
        for &k in &idx {
            // dt_{k} = upper du
            weight *= wu[k] * upper;
            upper *= u[k];
            pts.push(upper);
        }
        out.push((pts, weight));
        let mut d = n;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
        }
    }
}
