//! The Cauchy problem ᴴD^{μ,η,Ψ}x = f(t, x, W(x)), I^{1−ξ,Ψ}x(a) = δ, in its
//! integral form x = δ·M_ξ(t, a) + I^{μ,Ψ}f(·, x, W(x)), solved by undamped
//! Picard iteration on the weighted unknown u = (Ψ(t) − Ψ(a))^{1−ξ} x.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frac_calc::{xi_of, FracIntegrator, Grid, WeightedFunction};
use crate::psi::PsiFunction;
use crate::special::gamma;
use crate::volterra::{Lipschitz, VolterraOperator};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Right-hand side f(t, x, w).
pub trait Rhs: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, t: f64, x: f64, w: f64) -> f64;

    /// lim_{ω→0} ω·f(t, u/ω, wu/ω); the weighted integrand at t = a when ξ < 1.
    fn weighted_limit(&self, t: f64, u: f64, wu: f64) -> f64 {
        let om = 1e-12;
        om * self.eval(t, u / om, wu / om)
    }

    /// L_f with |f(t,x1,w1) − f(t,x2,w2)| ≤ L_f(|x1 − x2| + |w1 − w2|).
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsFamily {
    Zero,
    Const(f64),
    /// f = c·(x + w).
    Linear(f64),
    /// f = 0.1 sin x + 0.05 w + 0.5 cos t.
    SinMix,
}

impl Rhs for RhsFamily {
    fn name(&self) -> String {
        self.to_string()
    }

    fn eval(&self, t: f64, x: f64, w: f64) -> f64 {
        match *self {
            RhsFamily::Zero => 0.0,
            RhsFamily::Const(c) => c,
            RhsFamily::Linear(c) => c * (x + w),
            RhsFamily::SinMix => 0.1 * x.sin() + 0.05 * w + 0.5 * t.cos(),
        }
    }

    fn weighted_limit(&self, _t: f64, u: f64, wu: f64) -> f64 {
        match *self {
            RhsFamily::Zero | RhsFamily::Const(_) => 0.0,
            RhsFamily::Linear(c) => c * (u + wu),
            RhsFamily::SinMix => 0.05 * wu,
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            RhsFamily::Zero | RhsFamily::Const(_) => 0.0,
            RhsFamily::Linear(c) => c.abs(),
            RhsFamily::SinMix => 0.1,
        }
    }
}

impl fmt::Display for RhsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsFamily::Zero => write!(f, "zero"),
            RhsFamily::Const(c) => write!(f, "const:{c}"),
            RhsFamily::Linear(c) => write!(f, "linear:{c}"),
            RhsFamily::SinMix => write!(f, "sin-mix"),
        }
    }
}

impl FromStr for RhsFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let coef = |c: &str| -> Result<f64> {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::domain(format!("bad coefficient {c:?} in f = {s:?}")))
        };
        match s {
            "zero" => Ok(RhsFamily::Zero),
            "sin-mix" => Ok(RhsFamily::SinMix),
            _ => {
                if let Some(c) = s.strip_prefix("const:") {
                    Ok(RhsFamily::Const(coef(c)?))
                } else if let Some(c) = s.strip_prefix("linear:") {
                    Ok(RhsFamily::Linear(coef(c)?))
                } else {
                    Err(Error::domain(format!(
                        "unknown f {s:?} (expected zero, const:<c>, linear:<c> or sin-mix)"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub psi: PsiFunction,
    pub mu: f64,
    pub eta: f64,
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    /// Weighted initial value I^{1−ξ,Ψ}x(a).
    pub delta: f64,
    pub rhs: Arc<dyn Rhs>,
    pub l_f: Lipschitz,
    pub volterra: Arc<dyn VolterraOperator>,
    pub l_w: Lipschitz,
}

impl ProblemSpec {
    /// Lipschitz data defaults to what `rhs` and `volterra` declare.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        psi: PsiFunction,
        mu: f64,
        eta: f64,
        a: f64,
        b: f64,
        delta: f64,
        rhs: Arc<dyn Rhs>,
        volterra: Arc<dyn VolterraOperator>,
    ) -> Result<Self> {
        let xi = xi_of(mu, eta)?;
        let spec = Self {
            psi,
            mu,
            eta,
            xi,
            a,
            b,
            delta,
            l_f: Lipschitz::Const(rhs.lipschitz()),
            l_w: volterra.lipschitz(),
            rhs,
            volterra,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lipschitz(mut self, l_f: Lipschitz, l_w: Lipschitz) -> Result<Self> {
        self.l_f = l_f;
        self.l_w = l_w;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        match xi_of(self.mu, self.eta) {
            Ok(xi) if xi != self.xi => errs.push(format!("ξ = {} but μ + η(1−μ) = {xi}", self.xi)),
            Ok(_) => {}
            Err(e) => errs.push(e.to_string()),
        }
        let report = self.psi.validate(self.a, self.b);
        errs.extend(report.failures());
        if !self.delta.is_finite() {
            errs.push(format!("δ = {} is not finite", self.delta));
        }
        for (name, l) in [("L_f", &self.l_f), ("L_W", &self.l_w)] {
            if !l.is_nondecreasing() || !l.sup().is_finite() {
                errs.push(format!("{name} must be finite, nonnegative and nondecreasing"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn grid(&self, n: usize) -> Result<Arc<Grid>> {
        Grid::shared(self.psi, self.a, self.b, n)
    }

    /// Ψ(b) − Ψ(a).
    pub fn span(&self) -> f64 {
        self.psi.eval(self.b).unwrap_or(f64::NAN) - self.psi.eval(self.a).unwrap_or(f64::NAN)
    }

    pub fn initial_u(&self) -> f64 {
        self.delta / gamma(self.xi)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub final_step_norm: f64,
    pub contraction_q: f64,
    /// q/(1−q)·final_step_norm; infinite when q ≥ 1.
    pub aposteriori_bound: f64,
    pub converged: bool,
    /// Set when q ≥ 1, i.e. the contraction condition does not certify convergence.
    pub contraction_warning: bool,
    pub step_history: Vec<f64>,
}

/// q = L_f(1 + L_W)·Γ(ξ)(Ψ(b) − Ψ(a))^μ / Γ(ξ + μ), using sups of tables.
pub fn contraction_factor(p: &ProblemSpec) -> f64 {
    p.l_f.sup() * (1.0 + p.l_w.sup()) * gamma(p.xi) * p.span().powf(p.mu) / gamma(p.xi + p.mu)
}

fn check_grid(p: &ProblemSpec, x: &WeightedFunction) -> Result<()> {
    let g = x.grid();
    if g.psi() != p.psi || g.a() != p.a || g.b() != p.b {
        return Err(Error::GridMismatch(format!(
            "grid ({}, [{}, {}]) does not match the problem ({}, [{}, {}])",
            g.psi(),
            g.a(),
            g.b(),
            p.psi,
            p.a,
            p.b
        )));
    }
    if x.xi() != p.xi {
        return Err(Error::GridMismatch(format!("ξ = {} vs problem ξ = {}", x.xi(), p.xi)));
    }
    Ok(())
}

/// Weighted samples of f(t, x, W(x)) (+ forcing), with the t = a limit in slot 0.
fn weighted_integrand(p: &ProblemSpec, x: &WeightedFunction, forcing: Option<&[f64]>) -> Result<Vec<f64>> {
    let g = x.grid();
    let u = x.u();
    let wu = p.volterra.apply(x)?;
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let t = g.t(i);
        let om = g.weight(p.xi, i);
        let mut v = if om == 0.0 {
            p.rhs.weighted_limit(t, u[i], wu[i])
        } else {
            om * p.rhs.eval(t, u[i] / om, wu[i] / om)
        };
        if let Some(gf) = forcing {
            v += om * gf[i];
        }
        if !v.is_finite() {
            return Err(Error::Singularity { node: i, t });
        }
        out.push(v);
    }
    Ok(out)
}

/// B_f applied to x; `forcing` adds raw samples g(t_i) to the right-hand side.
pub fn apply_bf(p: &ProblemSpec, x: &WeightedFunction, forcing: Option<&[f64]>) -> Result<WeightedFunction> {
    check_grid(p, x)?;
    let g = x.grid();
    if let Some(gf) = forcing {
        if gf.len() != g.n() + 1 {
            return Err(Error::GridMismatch(format!("forcing has {} samples for {} nodes", gf.len(), g.n() + 1)));
        }
    }
    let integrand = weighted_integrand(p, x, forcing)?;
    let w = FracIntegrator::cached(p.mu, p.xi, g.n());
    let lead = p.initial_u();
    let u = w
        .apply_weighted(&integrand, g.step(), p.xi)
        .into_iter()
        .map(|v| lead + v)
        .collect();
    WeightedFunction::new(Arc::clone(g), p.xi, u)
}

/// Picard iteration from u ≡ δ/Γ(ξ) until the weighted step falls below `tol`.
pub fn picard_solve(p: &ProblemSpec, grid: &Arc<Grid>, tol: f64, max_iter: usize) -> Result<(WeightedFunction, SolveDiagnostics)> {
    picard_solve_forced(p, grid, None, tol, max_iter)
}

pub fn picard_solve_forced(
    p: &ProblemSpec,
    grid: &Arc<Grid>,
    forcing: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(WeightedFunction, SolveDiagnostics)> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::domain(format!("need tol > 0 and max_iter ≥ 1, got {tol}, {max_iter}")));
    }
    let q = contraction_factor(p);
    let mut diag = SolveDiagnostics {
        contraction_q: q,
        contraction_warning: !(q < 1.0),
        ..Default::default()
    };
    let mut u = WeightedFunction::constant(Arc::clone(grid), p.xi, p.initial_u())?;
    for k in 1..=max_iter {
        let next = apply_bf(p, &u, forcing)?;
        let step = next.distance(&u)?;
        u = next;
        diag.iterations = k;
        diag.final_step_norm = step;
        diag.step_history.push(step);
        if step <= tol {
            diag.converged = true;
            break;
        }
    }
    diag.aposteriori_bound = if q < 1.0 { q / (1.0 - q) * diag.final_step_norm } else { f64::INFINITY };
    if diag.converged {
        Ok((u, diag))
    } else {
        Err(Error::NoConvergence(Box::new((u, diag))))
    }
}

/// Weighted sup of x − B_f x.
pub fn residual(p: &ProblemSpec, x: &WeightedFunction) -> Result<f64> {
    residual_forced(p, x, None)
}

pub fn residual_forced(p: &ProblemSpec, x: &WeightedFunction, forcing: Option<&[f64]>) -> Result<f64> {
    apply_bf(p, x, forcing)?.distance(x)
}
