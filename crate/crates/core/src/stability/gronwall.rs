//! Discrete check of the generalized Gronwall inequality: from
//! u ≤ v + g·∫Q^μ u ds conclude
//! u ≤ v + Σ_k (gΓ(μ))^k I^{kμ}v, and u ≤ v·E_μ(gΓ(μ)(Ψ(t) − Ψ(a))^μ) for nondecreasing v.

use crate::error::{Error, Result};
use crate::frac_calc::{frac_integral_plain, Grid};
use crate::mittag_leffler::mittag_leffler;
use crate::special::gamma;

pub const DEFAULT_TERMS: usize = 25;
const SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub terms: usize,
    pub series_bound: Vec<f64>,
    /// Absent when v is not nondecreasing.
    pub ml_bound: Option<Vec<f64>>,
    /// Largest ratio of the last two series terms across nodes, and the implied tail.
    pub tail_ratio: f64,
    pub tail_estimate: f64,
    pub slack: f64,
    pub series_failures: Vec<usize>,
    pub ml_failures: Vec<usize>,
}

impl GronwallReport {
    pub fn holds(&self) -> bool {
        self.series_failures.is_empty() && self.ml_failures.is_empty()
    }
}

fn check_inputs(grid: &Grid, u: &[f64], v: &[f64], g: &[f64], mu: f64) -> Result<()> {
    let len = grid.n() + 1;
    for (name, s) in [("u", u), ("v", v), ("g", g)] {
        if s.len() != len {
            return Err(Error::GridMismatch(format!("{name} has {} samples for {len} nodes", s.len())));
        }
        if let Some(i) = s.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain(format!("{name} must be finite and ≥ 0, {name}[{i}] = {}", s[i])));
        }
    }
    if let Some(i) = g.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NotIncreasing { node: i });
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain(format!("μ = {mu} not in (0, 1]")));
    }
    Ok(())
}

/// Checks the hypothesis, then both conclusions at every node.
pub fn gronwall_verify(grid: &Grid, u: &[f64], v: &[f64], g: &[f64], mu: f64, terms: usize) -> Result<GronwallReport> {
    check_inputs(grid, u, v, g, mu)?;
    if terms == 0 {
        return Err(Error::domain("need at least one series term"));
    }
    let n = grid.n();
    let scale = u.iter().chain(v).fold(1.0f64, |m, x| m.max(x.abs()));
    let slack = SLACK * scale;
    let gm = gamma(mu);

    let iu = frac_integral_plain(grid, mu, u)?;
    for i in 0..=n {
        let rhs = v[i] + g[i] * gm * iu[i];
        if u[i] > rhs + slack {
            return Err(Error::HypothesisNotSatisfied { node: i, lhs: u[i], rhs });
        }
    }

    let mut series = v.to_vec();
    let mut last = vec![0.0; n + 1];
    let mut prev = vec![0.0; n + 1];
    for k in 1..=terms {
        let ik = frac_integral_plain(grid, k as f64 * mu, v)?;
        for i in 0..=n {
            let term = (g[i] * gm).powi(k as i32) * ik[i];
            prev[i] = last[i];
            last[i] = term;
            series[i] += term;
        }
    }
    let mut tail_ratio = 0.0f64;
    let mut tail_estimate = 0.0f64;
    for i in 0..=n {
        if prev[i] > 0.0 {
            let r = last[i] / prev[i];
            tail_ratio = tail_ratio.max(r);
            tail_estimate = tail_estimate.max(if r < 1.0 { last[i] * r / (1.0 - r) } else { f64::INFINITY });
        }
    }

    let series_failures = (0..=n).filter(|&i| u[i] > series[i] + slack).collect();

    let ml_bound = if v.windows(2).all(|w| w[0] <= w[1]) {
        let mut b = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let z = g[i] * gm * grid.offset(i).powf(mu);
            b.push(v[i] * mittag_leffler(mu, z)?);
        }
        Some(b)
    } else {
        None
    };
    let ml_failures = match &ml_bound {
        Some(b) => (0..=n).filter(|&i| u[i] > b[i] + slack).collect(),
        None => Vec::new(),
    };

    Ok(GronwallReport {
        terms,
        series_bound: series,
        ml_bound,
        tail_ratio,
        tail_estimate,
        slack,
        series_failures,
        ml_failures,
    })
}

/// Extremal u = v + g·Γ(μ)·I^μ u by fixed-point iteration on the grid.
pub fn gronwall_extremal(grid: &Grid, v: &[f64], g: &[f64], mu: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    check_inputs(grid, v, v, g, mu)?;
    let gm = gamma(mu);
    let mut u = v.to_vec();
    for _ in 0..max_iter {
        let iu = frac_integral_plain(grid, mu, &u)?;
        let next: Vec<f64> = (0..u.len()).map(|i| v[i] + g[i] * gm * iu[i]).collect();
        let step = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        u = next;
        if step <= tol {
            return Ok(u);
        }
    }
    Err(Error::Convergence(format!("Gronwall fixed point not reached in {max_iter} iterations")))
}
