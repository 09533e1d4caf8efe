//! Ψ-fractional integrals and the Ψ-Hilfer derivative on τ-uniform grids.
//!
//! Functions in the weighted space C_{1−ξ,Ψ} are carried as
//! u(t) = (Ψ(t) − Ψ(a))^{1−ξ} x(t), which stays bounded at t = a.

mod grid;
mod weights;

use std::sync::Arc;

pub use grid::Grid;
pub use weights::FracIntegrator;

use crate::error::{Error, Result};
use crate::psi::PsiFunction;
use crate::special::gamma;

/// Minimum number of intervals for [`hilfer_derivative`].
pub const MIN_DERIVATIVE_NODES: usize = 8;

#[derive(Debug, Clone)]
pub struct WeightedFunction {
    grid: Arc<Grid>,
    xi: f64,
    u: Vec<f64>,
}

impl WeightedFunction {
    pub fn new(grid: Arc<Grid>, xi: f64, u: Vec<f64>) -> Result<Self> {
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::domain(format!("ξ = {xi} not in (0, 1]")));
        }
        if u.len() != grid.n() + 1 {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid with {} nodes",
                u.len(),
                grid.n() + 1
            )));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singularity { node: i, t: grid.t(i) });
        }
        Ok(Self { grid, xi, u })
    }

    /// Samples u at each node from a function of the offset Ψ(t) − Ψ(a).
    pub fn from_offset_fn(grid: Arc<Grid>, xi: f64, u: impl Fn(f64) -> f64) -> Result<Self> {
        let vals = (0..=grid.n()).map(|i| u(grid.offset(i))).collect();
        Self::new(grid, xi, vals)
    }

    /// Weights raw samples x(t_i) for i ≥ 1; `u0` supplies the limit at t = a.
    pub fn from_raw(grid: Arc<Grid>, xi: f64, x: impl Fn(f64) -> f64, u0: f64) -> Result<Self> {
        let mut vals = Vec::with_capacity(grid.n() + 1);
        vals.push(u0);
        vals.extend((1..=grid.n()).map(|i| grid.weight(xi, i) * x(grid.t(i))));
        Self::new(grid, xi, vals)
    }

    pub fn constant(grid: Arc<Grid>, xi: f64, u: f64) -> Result<Self> {
        let n = grid.n();
        Self::new(grid, xi, vec![u; n + 1])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn into_u(self) -> Vec<f64> {
        self.u
    }

    /// x(t_i) = u_i / (Ψ(t_i) − Ψ(a))^{1−ξ}; infinite (or NaN) at t_0 when ξ < 1.
    pub fn x(&self, i: usize) -> f64 {
        self.u[i] / self.grid.weight(self.xi, i)
    }

    pub fn raw_values(&self) -> Vec<f64> {
        (0..self.u.len()).map(|i| self.x(i)).collect()
    }

    /// Weighted sup distance; both functions must share grid and ξ.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        if self.xi != other.xi {
            return Err(Error::GridMismatch(format!("ξ = {} vs ξ = {}", self.xi, other.xi)));
        }
        Ok(self
            .u
            .iter()
            .zip(&other.u)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }
}

/// Q(t, s) = Ψ′(s)(Ψ(t) − Ψ(s))^{μ−1}.
pub fn kernel_q(psi: PsiFunction, mu: f64, t: f64, s: f64) -> Result<f64> {
    if s >= t {
        return Err(Error::domain(format!("kernel needs s < t, got s = {s}, t = {t}")));
    }
    Ok(psi.derivative(s)? * (psi.eval(t)? - psi.eval(s)?).powf(mu - 1.0))
}

/// M_ξ(t, a) = (Ψ(t) − Ψ(a))^{ξ−1} / Γ(ξ).
pub fn weight_m(psi: PsiFunction, xi: f64, t: f64, a: f64) -> Result<f64> {
    if xi == 1.0 {
        return Ok(1.0);
    }
    if t <= a {
        return Err(Error::domain(format!("M_ξ is singular at t = {t} ≤ a = {a}")));
    }
    Ok((psi.eval(t)? - psi.eval(a)?).powf(xi - 1.0) / gamma(xi))
}

/// ξ = μ + η(1 − μ).
pub fn xi_of(mu: f64, eta: f64) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain(format!("μ = {mu} not in (0, 1]")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("η = {eta} not in [0, 1]")));
    }
    Ok((mu + eta * (1.0 - mu)).min(1.0))
}

fn check_finite(grid: &Grid, v: &[f64], skip_start: bool) -> Result<()> {
    let start = usize::from(skip_start);
    match v.iter().skip(start).position(|x| !x.is_finite()) {
        Some(p) => Err(Error::Singularity { node: p + start, t: grid.t(p + start) }),
        None => Ok(()),
    }
}

fn check_order(order: f64) -> Result<()> {
    if order > 0.0 && order.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("integration order {order} must be positive")))
    }
}

/// Raw samples of I^{μ,Ψ}x; node 0 holds the limit at t = a (possibly infinite).
pub fn frac_integral(mu: f64, x: &WeightedFunction) -> Result<Vec<f64>> {
    check_order(mu)?;
    let g = x.grid();
    let w = FracIntegrator::cached(mu, x.xi(), g.n());
    Ok(w.apply_raw(x.u(), g.step()))
}

/// I^{μ,Ψ}x as a weighted function with weight exponent `out_xi`.
///
/// The result is bounded when `out_xi ≤ μ + ξ`.
pub fn frac_integral_weighted(mu: f64, x: &WeightedFunction, out_xi: f64) -> Result<WeightedFunction> {
    check_order(mu)?;
    let g = x.grid();
    let w = FracIntegrator::cached(mu, x.xi(), g.n());
    let u = w.apply_weighted(x.u(), g.step(), out_xi);
    WeightedFunction::new(Arc::clone(g), out_xi, u)
}

/// I^{μ,Ψ}f for samples of a function continuous on [a, b].
pub fn frac_integral_plain(grid: &Grid, mu: f64, f: &[f64]) -> Result<Vec<f64>> {
    check_order(mu)?;
    if f.len() != grid.n() + 1 {
        return Err(Error::GridMismatch(format!("{} samples for {} nodes", f.len(), grid.n() + 1)));
    }
    check_finite(grid, f, false)?;
    let w = FracIntegrator::cached(mu, 1.0, grid.n());
    Ok(w.apply_raw(f, grid.step()))
}

/// d/dτ by central differences, one-sided second-order at both ends.
fn tau_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len() - 1;
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    for i in 1..n {
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    }
    d[n] = (3.0 * y[n] - 4.0 * y[n - 1] + y[n - 2]) / (2.0 * h);
    d
}

/// Raw samples of the Ψ-Hilfer derivative ᴴD^{μ,η,Ψ}x.
///
/// Computed as I^{η(1−μ)} ∘ d/dτ ∘ I^{(1−η)(1−μ)}; the inner integral uses the
/// weight exponent of `x` itself. Values near t = a are only as good as the
/// one-sided stencil there.
pub fn hilfer_derivative(mu: f64, eta: f64, x: &WeightedFunction) -> Result<Vec<f64>> {
    let xi = xi_of(mu, eta)?;
    let g = x.grid();
    let n = g.n();
    if n < MIN_DERIVATIVE_NODES {
        return Err(Error::GridTooCoarse { n, min: MIN_DERIVATIVE_NODES });
    }
    let h = g.step();

    let inner_order = 1.0 - xi;
    let outer_order = eta * (1.0 - mu);
    let outer = |xi_d: f64, v: &[f64]| {
        if outer_order > 0.0 {
            FracIntegrator::cached(outer_order, xi_d, n).apply_raw(v, h)
        } else if xi_d == 1.0 {
            v.to_vec()
        } else {
            let mut raw = vec![if v[0] == 0.0 { 0.0 } else { v[0] * f64::INFINITY }];
            raw.extend((1..=n).map(|i| (i as f64 * h).powf(xi_d - 1.0) * v[i]));
            raw
        }
    };

    // I^{1−ξ}x = τ'^p·v with v as smooth as u; differentiate v, not the product
    let p = x.xi() - xi;
    if p >= 0.0 {
        let v = if inner_order > 0.0 {
            FracIntegrator::cached(inner_order, x.xi(), n).apply_weighted(x.u(), h, 1.0 + p)
        } else {
            x.u().to_vec()
        };
        check_finite(g, &v, false)?;
        let dv = tau_derivative(&v, h);
        if p == 0.0 {
            return Ok(outer(1.0, &dv));
        }
        // d/dτ(τ'^p v) = τ'^{p−1}(p·v + τ'·v')
        let w: Vec<f64> = (0..=n).map(|i| p * v[i] + i as f64 * h * dv[i]).collect();
        return Ok(outer(p, &w));
    }

    let y = if inner_order > 0.0 {
        FracIntegrator::cached(inner_order, x.xi(), n).apply_raw(x.u(), h)
    } else {
        x.raw_values()
    };
    check_finite(g, &y, false)?;
    Ok(outer(1.0, &tau_derivative(&y, h)))
}

/// sup_i |u_i|.
pub fn weighted_norm(x: &WeightedFunction) -> f64 {
    x.u().iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}
