//! Product-integration weights for
//!
//! ```text
//! I^α[(τ−τ_0)^{ξ−1} u](τ_i) ≈ h^{α+ξ−1}/Γ(α) · Σ_j W_ij u_j
//! ```
//!
//! on a uniform τ-grid, with u replaced by its piecewise-linear interpolant.
//! Both singular factors, (τ_i − τ)^{α−1} and (τ − τ_0)^{ξ−1}, are integrated
//! exactly against each hat function, so the rule reproduces the power law
//! I^α(τ−τ_0)^{ξ−1} = Γ(ξ)/Γ(ξ+α) (τ−τ_0)^{α+ξ−1} for constant u.
//!
//! In cell units σ = (τ − τ_0)/h the weights depend only on (α, ξ, i, j), so a
//! matrix is shared by every Ψ and every grid with the same n. Cells touching a
//! singular end use binomial series; the rest use Gauss–Legendre with an order
//! chosen from the distance to the nearest singularity. For ξ = 1 the interior
//! weights are the classical second differences of k^{α+1}.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::special::{beta, gamma};

const SERIES_EPS: f64 = 1e-17;
const CACHE_CAPACITY: usize = 12;

/// Gauss orders paired with the minimum cell distance at which each is used.
const GAUSS_PLAN: [(usize, usize); 5] = [(64, 3), (16, 4), (4, 6), (2, 8), (1, 12)];

#[derive(Debug)]
pub struct FracIntegrator {
    order: f64,
    xi: f64,
    n: usize,
    offsets: Vec<usize>,
    weights: Vec<f64>,
    inv_gamma_order: f64,
}

impl FracIntegrator {
    /// Builds the weight matrix; `order > 0`, `0 < xi ≤ 1`, `n ≥ 1`.
    pub fn new(order: f64, xi: f64, n: usize) -> Self {
        assert!(order > 0.0 && order.is_finite(), "order must be positive, got {order}");
        assert!(xi > 0.0 && xi <= 1.0, "xi must be in (0, 1], got {xi}");
        assert!(n >= 1);

        let rows: Vec<Vec<f64>> = if xi == 1.0 {
            (1..=n).into_par_iter().map(|i| regular_row(order, i)).collect()
        } else {
            let tables = GaussTables::new(order, xi, n);
            (1..=n)
                .into_par_iter()
                .map(|i| weighted_row(order, xi, i, &tables))
                .collect()
        };

        let mut offsets = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n * (n + 3) / 2);
        for row in rows {
            offsets.push(weights.len());
            weights.extend_from_slice(&row);
        }
        offsets.push(weights.len());
        Self {
            order,
            xi,
            n,
            offsets,
            weights,
            inv_gamma_order: 1.0 / gamma(order),
        }
    }

    /// Shared instance from a small process-wide cache.
    pub fn cached(order: f64, xi: f64, n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<VecDeque<Arc<FracIntegrator>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(VecDeque::new()));
        {
            let guard = cache.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(hit) = guard
                .iter()
                .find(|w| w.order.to_bits() == order.to_bits() && w.xi.to_bits() == xi.to_bits() && w.n == n)
            {
                return Arc::clone(hit);
            }
        }
        let built = Arc::new(Self::new(order, xi, n));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if guard.len() >= CACHE_CAPACITY {
            guard.pop_front();
        }
        guard.push_back(Arc::clone(&built));
        built
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unscaled weights W_i0..W_ii for target node `i ≥ 1`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i - 1]..self.offsets[i]]
    }

    fn scale(&self, h: f64) -> f64 {
        h.powf(self.order + self.xi - 1.0) * self.inv_gamma_order
    }

    /// Raw value of I^α x at node `i ≥ 1`, using u at nodes `0..=i` only.
    pub fn apply_node(&self, u: &[f64], h: f64, i: usize) -> f64 {
        let row = self.row(i);
        let mut acc = 0.0;
        for (w, v) in row.iter().zip(&u[..=i]) {
            acc += w * v;
        }
        acc * self.scale(h)
    }

    /// Exponent p with I^α x ~ (τ − τ_0)^p near the start.
    fn start_exponent(&self) -> f64 {
        self.order + self.xi - 1.0
    }

    fn start_limit(&self, u0: f64, exponent: f64) -> f64 {
        if exponent.abs() < 1e-14 {
            u0 * gamma(self.xi) / gamma(self.xi + self.order)
        } else if exponent > 0.0 || u0 == 0.0 {
            0.0
        } else {
            u0 * f64::INFINITY
        }
    }

    /// Raw samples of I^α x at all nodes; node 0 holds the limit at τ_0.
    pub fn apply_raw(&self, u: &[f64], h: f64) -> Vec<f64> {
        assert_eq!(u.len(), self.n + 1);
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(self.start_limit(u[0], self.start_exponent()));
        out.extend((1..=self.n).map(|i| self.apply_node(u, h, i)));
        out
    }

    /// Samples of (τ − τ_0)^{1−out_xi} I^α x, with the limit at node 0.
    pub fn apply_weighted(&self, u: &[f64], h: f64, out_xi: f64) -> Vec<f64> {
        assert_eq!(u.len(), self.n + 1);
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(self.start_limit(u[0], self.start_exponent() + 1.0 - out_xi));
        for i in 1..=self.n {
            let w = if out_xi == 1.0 { 1.0 } else { (i as f64 * h).powf(1.0 - out_xi) };
            out.push(w * self.apply_node(u, h, i));
        }
        out
    }
}

/// Coefficients c_m = scale^{e} binom(e, m) (−1/scale)^m summed against `f(m)`.
///
/// Evaluates ∫_0^1 σ^{p−1}(…)(scale − σ)^{e}dσ-type end-cell integrals; `f(m)`
/// carries the monomial moment. Converges geometrically for scale ≥ 2.
fn binomial_series(scale: f64, e: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut coef = scale.powf(e);
    let mut sum = 0.0;
    for m in 0..2000 {
        let mf = m as f64;
        let term = coef * f(mf);
        sum += term;
        if coef == 0.0 || (mf > e.abs() + 2.0 && term.abs() <= SERIES_EPS * sum.abs()) {
            break;
        }
        coef *= -(e - mf) / ((mf + 1.0) * scale);
    }
    sum
}

/// Hat-function moments (A, B) of the first cell [0, 1] for target i ≥ 2:
/// ∫σ^{ξ−1}(i−σ)^{α−1}(1−σ) and ∫σ^{ξ−1}(i−σ)^{α−1}σ.
fn first_cell(order: f64, xi: f64, i: usize) -> (f64, f64) {
    let s = i as f64;
    let a = binomial_series(s, order - 1.0, |m| 1.0 / ((xi + m) * (xi + m + 1.0)));
    let b = binomial_series(s, order - 1.0, |m| 1.0 / (xi + m + 1.0));
    (a, b)
}

/// Hat-function moments (A for node i−1, B for node i) of the last cell.
fn last_cell(order: f64, xi: f64, i: usize) -> (f64, f64) {
    let s = i as f64;
    let a = binomial_series(s, xi - 1.0, |m| 1.0 / (order + m + 1.0));
    let b = binomial_series(s, xi - 1.0, |m| 1.0 / ((order + m) * (order + m + 1.0)));
    (a, b)
}

/// (k+1)^p − 2k^p + (k−1)^p without cancellation for large k.
fn second_difference(p: f64, k: usize) -> f64 {
    let kf = k as f64;
    if k < 8 {
        return (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
    }
    // k^p Σ_{m even ≥ 2} 2 binom(p, m) k^{-m}
    let inv = 1.0 / kf;
    let mut binom = 1.0;
    let mut pow = 1.0;
    let mut sum = 0.0;
    for m in 1..400 {
        let mf = m as f64;
        binom *= (p - mf + 1.0) / mf;
        pow *= inv;
        if m % 2 == 0 {
            let term = 2.0 * binom * pow;
            sum += term;
            if binom == 0.0 || (mf > p + 2.0 && term.abs() <= SERIES_EPS * sum.abs()) {
                break;
            }
        }
    }
    kf.powf(p) * sum
}

fn regular_row(order: f64, i: usize) -> Vec<f64> {
    let mut row = vec![0.0; i + 1];
    if i == 1 {
        row[0] = beta(1.0, order + 1.0);
        row[1] = beta(2.0, order);
        return row;
    }
    let denom = order * (order + 1.0);
    row[0] = first_cell(order, 1.0, i).0;
    for (j, w) in row.iter_mut().enumerate().take(i).skip(1) {
        *w = second_difference(order + 1.0, i - j) / denom;
    }
    row[i] = 1.0 / denom;
    row
}

struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss–Legendre rule on [0, 1] via Newton iteration on P_m.
fn gauss_legendre(m: usize) -> GaussRule {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for k in 0..m {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for l in 2..=m {
                let lf = l as f64;
                let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = 0.5 * (1.0 - x);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    GaussRule { nodes, weights }
}

fn gauss_rule(m: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<(usize, GaussRule)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| GAUSS_PLAN.iter().map(|&(_, m)| (m, gauss_legendre(m))).collect());
    &rules.iter().find(|(k, _)| *k == m).expect("order from GAUSS_PLAN").1
}

fn gauss_order(distance: usize) -> usize {
    GAUSS_PLAN
        .iter()
        .find(|&&(d, _)| distance >= d)
        .map(|&(_, m)| m)
        .unwrap_or(12)
}

/// Per-order tables of σ^{ξ−1} and (i−σ)^{α−1} at the Gauss nodes of each cell.
struct GaussTables {
    // indexed by plan slot: left[j][p] = (j + x_p)^{ξ−1}, right[k][p] = (k − x_p)^{α−1}
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    orders: Vec<usize>,
}

impl GaussTables {
    fn new(order: f64, xi: f64, n: usize) -> Self {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut orders = Vec::new();
        for &(_, m) in &GAUSS_PLAN {
            let rule = gauss_rule(m);
            let mut l = vec![0.0; (n + 1) * m];
            let mut r = vec![0.0; (n + 1) * m];
            for j in 0..=n {
                for (p, &x) in rule.nodes.iter().enumerate() {
                    l[j * m + p] = (j as f64 + x).powf(xi - 1.0);
                    if j >= 1 {
                        r[j * m + p] = (j as f64 - x).powf(order - 1.0);
                    }
                }
            }
            left.push(l);
            right.push(r);
            orders.push(m);
        }
        Self { left, right, orders }
    }

    fn slot(&self, m: usize) -> usize {
        self.orders.iter().position(|&k| k == m).expect("order from GAUSS_PLAN")
    }
}

fn weighted_row(order: f64, xi: f64, i: usize, tables: &GaussTables) -> Vec<f64> {
    let mut row = vec![0.0; i + 1];
    if i == 1 {
        row[0] = beta(xi, order + 1.0);
        row[1] = beta(xi + 1.0, order);
        return row;
    }
    let (a, b) = first_cell(order, xi, i);
    row[0] += a;
    row[1] += b;
    let (a, b) = last_cell(order, xi, i);
    row[i - 1] += a;
    row[i] += b;

    for j in 1..i.saturating_sub(1) {
        let k = i - j;
        let m = gauss_order(j.min(k - 1));
        let slot = tables.slot(m);
        let rule = gauss_rule(m);
        let left = &tables.left[slot][j * m..(j + 1) * m];
        let right = &tables.right[slot][k * m..(k + 1) * m];
        let (mut a, mut b) = (0.0, 0.0);
        for p in 0..m {
            let x = rule.nodes[p];
            let f = rule.weights[p] * left[p] * right[p];
            a += f * (1.0 - x);
            b += f * x;
        }
        row[j] += a;
        row[j + 1] += b;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Tanh-sinh oracle on the cell [j, j+1]; the double-exponential map
    /// absorbs the endpoint singularities.
    fn brute_moment(order: f64, xi: f64, i: usize, j: usize, hat_left: bool) -> f64 {
        let step = 1.0 / 128.0;
        let mut acc = 0.0;
        for k in -800i32..=800 {
            let t = k as f64 * step;
            let u = 0.5 * PI * t.sinh();
            // distances to both cell ends, computed without cancellation
            let from_lo = 1.0 / (1.0 + (-2.0 * u).exp());
            let to_hi = 1.0 / (1.0 + (2.0 * u).exp());
            let dsigma = 0.25 * PI * t.cosh() / (u.cosh() * u.cosh());
            let sigma = j as f64 + from_lo;
            let to_i = (i - j - 1) as f64 + to_hi;
            let hat = if hat_left { to_hi } else { from_lo };
            let f = sigma.powf(xi - 1.0) * to_i.powf(order - 1.0) * hat * dsigma;
            if f.is_finite() {
                acc += step * f;
            }
        }
        acc
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        for m in [3, 4, 6, 8, 12] {
            let r = gauss_legendre(m);
            let deg = 2 * m - 1;
            let val: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((val - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "m={m}");
        }
    }

    #[test]
    fn second_difference_series_matches_direct() {
        for p in [1.25, 1.5, 1.75, 2.0, 3.5] {
            for k in [8usize, 9, 20, 100] {
                let kf = k as f64;
                let direct = (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
                let s = second_difference(p, k);
                assert!((s - direct).abs() <= 1e-10 * direct.abs().max(1e-3), "p={p} k={k}: {s} vs {direct}");
            }
        }
    }

    #[test]
    fn regular_rows_match_classical_formula() {
        for order in [0.25, 0.5, 1.0, 1.7] {
            let w = FracIntegrator::new(order, 1.0, 12);
            for i in 1..=12 {
                let row = w.row(i);
                let fi = i as f64;
                let d = order * (order + 1.0);
                let w0 = ((fi - 1.0).powf(order + 1.0) - (fi - 1.0 - order) * fi.powf(order)) / d;
                assert!((row[0] - w0).abs() < 1e-12, "order {order} i {i}");
                assert!((row[i] - 1.0 / d).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn weighted_moments_match_brute_force() {
        for (order, xi) in [(0.5, 0.5), (0.25, 0.75), (0.75, 0.25), (1.0, 0.5), (2.5, 0.3)] {
            for i in [1usize, 2, 3, 7, 40] {
                let w = FracIntegrator::new(order, xi, i);
                let row = w.row(i);
                let mut expect = vec![0.0; i + 1];
                for j in 0..i {
                    expect[j] += brute_moment(order, xi, i, j, true);
                    expect[j + 1] += brute_moment(order, xi, i, j, false);
                }
                for j in 0..=i {
                    let tol = 1e-9 * expect[j].abs().max(1e-6);
                    assert!(
                        (row[j] - expect[j]).abs() <= tol,
                        "α={order} ξ={xi} i={i} j={j}: {} vs {}",
                        row[j],
                        expect[j]
                    );
                }
            }
        }
    }

    #[test]
    fn rows_reproduce_power_law_exactly() {
        // Σ_j W_ij = ∫_0^i σ^{ξ−1}(i−σ)^{α−1} dσ = B(ξ, α) i^{α+ξ−1}
        for (order, xi) in [(0.5, 0.25), (0.25, 0.5), (0.75, 0.75), (1.0, 0.5)] {
            let w = FracIntegrator::new(order, xi, 300);
            for i in [1usize, 2, 5, 64, 65, 299, 300] {
                let s: f64 = w.row(i).iter().sum();
                let exact = beta(xi, order) * (i as f64).powf(order + xi - 1.0);
                assert!((s - exact).abs() <= 1e-12 * exact, "α={order} ξ={xi} i={i}: {s} vs {exact}");
            }
        }
    }

    #[test]
    fn cache_returns_shared_instance() {
        let a = FracIntegrator::cached(0.37, 0.91, 16);
        let b = FracIntegrator::cached(0.37, 0.91, 16);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
