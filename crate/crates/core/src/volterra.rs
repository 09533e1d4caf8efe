//! Abstract Volterra operators W and their shipped instances.
//!
//! Operators act on weighted functions and return weighted samples
//! ω_i·W(x)(t_i), ω_i = (Ψ(t_i) − Ψ(a))^{1−ξ}, with the limit at t = a in slot 0.
//! Lipschitz data is stated in the same weighted scale: at node i,
//! |ω_i(W(x) − W(y))(t_i)| ≤ L_i · max_{j ≤ i} |u_j − v_j|.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frac_calc::{FracIntegrator, Grid, WeightedFunction};
use crate::psi::PsiKind;
use crate::special::gamma;

#[derive(Debug, Clone, PartialEq)]
pub enum Lipschitz {
    Const(f64),
    /// One entry per grid node.
    Table(Vec<f64>),
}

impl Lipschitz {
    pub fn sup(&self) -> f64 {
        match self {
            Lipschitz::Const(c) => *c,
            Lipschitz::Table(t) => t.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        match self {
            Lipschitz::Const(c) => *c,
            Lipschitz::Table(t) => t[i],
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            Lipschitz::Const(c) => *c >= 0.0,
            Lipschitz::Table(t) => t.first().is_none_or(|v| *v >= 0.0) && t.windows(2).all(|w| w[0] <= w[1]),
        }
    }
}

pub trait VolterraOperator: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    /// Weighted samples ω_i·W(x)(t_i); node i may only read x at nodes 0..=i.
    fn apply(&self, x: &WeightedFunction) -> Result<Vec<f64>>;

    fn lipschitz(&self) -> Lipschitz;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOperator;

impl VolterraOperator for ZeroOperator {
    fn name(&self) -> String {
        "zero".into()
    }

    fn apply(&self, x: &WeightedFunction) -> Result<Vec<f64>> {
        Ok(vec![0.0; x.u().len()])
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Const(0.0)
    }
}

/// W(x)(t) = c·x(t).
#[derive(Debug, Clone, Copy)]
pub struct StateOperator {
    pub c: f64,
}

impl VolterraOperator for StateOperator {
    fn name(&self) -> String {
        format!("state:{}", self.c)
    }

    fn apply(&self, x: &WeightedFunction) -> Result<Vec<f64>> {
        Ok(x.u().iter().map(|u| self.c * u).collect())
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Const(self.c.abs())
    }
}

/// Kernel K(t, s, x) of the Hadamard-type operator.
pub trait Kernel: fmt::Debug + Send + Sync {
    fn eval(&self, t: f64, s: f64, x: f64) -> f64;

    /// lim_{ω→0} ω·K(t, s, u/ω), the weighted value at s = a when ξ < 1.
    fn weighted_limit(&self, t: f64, s: f64, u: f64) -> f64;

    /// L_K with |K(t,s,x) − K(t,s,y)| ≤ L_K|x − y|.
    fn lipschitz(&self) -> f64;

    /// Whether K reads its first argument; lets the operator skip per-node rebuilds.
    fn depends_on_t(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// K = c·x.
    Linear(f64),
    /// K = sin x.
    Sin,
}

impl Kernel for KernelFamily {
    fn eval(&self, _t: f64, _s: f64, x: f64) -> f64 {
        match self {
            KernelFamily::Linear(c) => c * x,
            KernelFamily::Sin => x.sin(),
        }
    }

    fn weighted_limit(&self, _t: f64, _s: f64, u: f64) -> f64 {
        match self {
            KernelFamily::Linear(c) => c * u,
            KernelFamily::Sin => 0.0,
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            KernelFamily::Linear(c) => c.abs(),
            KernelFamily::Sin => 1.0,
        }
    }

    fn depends_on_t(&self) -> bool {
        false
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Linear(c) => write!(f, "linear:{c}"),
            KernelFamily::Sin => write!(f, "sin"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "sin" {
            return Ok(KernelFamily::Sin);
        }
        if let Some(c) = s.strip_prefix("linear:") {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad kernel coefficient {c:?}")))?;
            if c.is_finite() {
                return Ok(KernelFamily::Linear(c));
            }
        }
        Err(Error::domain(format!("unknown kernel {s:?} (expected linear:<c> or sin)")))
    }
}

/// Integration weight of the Hadamard-type operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HadamardWeight {
    /// ∫ ln(t/s)^{μ−1} K ds/s, the Hadamard fractional integral.
    #[default]
    InvS,
    /// ∫ ln(t/s)^{μ−1} K ds.
    One,
}

impl fmt::Display for HadamardWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HadamardWeight::InvS => write!(f, "1/s"),
            HadamardWeight::One => write!(f, "1"),
        }
    }
}

impl FromStr for HadamardWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/s" => Ok(HadamardWeight::InvS),
            "1" => Ok(HadamardWeight::One),
            other => Err(Error::domain(format!("unknown hadamard_weight {other:?} (expected 1/s or 1)"))),
        }
    }
}

/// W(x)(t) = (1/Γ(μ)) ∫_a^t ln(t/s)^{μ−1} K(t, s, x(s)) w(s) ds.
#[derive(Debug, Clone)]
pub struct HadamardOperator {
    mu: f64,
    kernel: Arc<dyn Kernel>,
    weight: HadamardWeight,
    grid: Arc<Grid>,
    xi: f64,
    integrator: Arc<FracIntegrator>,
}

impl HadamardOperator {
    /// Configured for functions of weight exponent `xi` on a Hadamard grid.
    pub fn new(mu: f64, kernel: Arc<dyn Kernel>, weight: HadamardWeight, grid: Arc<Grid>, xi: f64) -> Result<Self> {
        if grid.psi().kind() != PsiKind::Hadamard {
            return Err(Error::domain(format!("Hadamard operator needs Ψ = ln t, got {}", grid.psi())));
        }
        if grid.a() <= 0.0 {
            return Err(Error::domain(format!("Hadamard operator needs a > 0, got {}", grid.a())));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::domain(format!("μ = {mu} not in (0, 1]")));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::domain(format!("ξ = {xi} not in (0, 1]")));
        }
        let integrator = FracIntegrator::cached(mu, xi, grid.n());
        Ok(Self { mu, kernel, weight, grid, xi, integrator })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weight(&self) -> HadamardWeight {
        self.weight
    }

    /// L_K as supplied by the kernel.
    pub fn raw_lk(&self) -> f64 {
        self.kernel.lipschitz()
    }

    /// L_K (ln(b/a))^μ / Γ(μ+1) scaled by the weight factor; the ξ = 1 bound.
    pub fn derived_bound(&self) -> f64 {
        self.raw_lk() * self.weight_factor(self.grid.n()) * self.grid.span().powf(self.mu) / gamma(self.mu + 1.0)
    }

    fn weight_factor(&self, i: usize) -> f64 {
        match self.weight {
            HadamardWeight::InvS => 1.0,
            HadamardWeight::One => self.grid.t(i),
        }
    }

    /// Weighted integrand ω_j K(t, s_j, x_j) w̃(s_j), w̃ = 1 or s.
    fn integrand(&self, x: &WeightedFunction, t: f64, upto: usize) -> Vec<f64> {
        let g = &self.grid;
        let u = x.u();
        (0..=upto)
            .map(|j| {
                let s = g.t(j);
                let k = if j == 0 && self.xi < 1.0 {
                    self.kernel.weighted_limit(t, s, u[0])
                } else {
                    let w = g.weight(self.xi, j);
                    w * self.kernel.eval(t, s, u[j] / w)
                };
                k * match self.weight {
                    HadamardWeight::InvS => 1.0,
                    HadamardWeight::One => s,
                }
            })
            .collect()
    }
}

impl VolterraOperator for HadamardOperator {
    fn name(&self) -> String {
        format!("hadamard(mu={}, weight={})", self.mu, self.weight)
    }

    fn apply(&self, x: &WeightedFunction) -> Result<Vec<f64>> {
        self.grid.ensure_same(x.grid())?;
        if x.xi() != self.xi {
            return Err(Error::GridMismatch(format!(
                "operator built for ξ = {}, got ξ = {}",
                self.xi,
                x.xi()
            )));
        }
        let n = self.grid.n();
        let h = self.grid.step();
        let mut out = vec![0.0; n + 1];
        if self.kernel.depends_on_t() {
            for (i, o) in out.iter_mut().enumerate().skip(1) {
                let gvals = self.integrand(x, self.grid.t(i), i);
                *o = self.grid.weight(self.xi, i) * self.integrator.apply_node(&gvals, h, i);
            }
        } else {
            let gvals = self.integrand(x, self.grid.b(), n);
            for (i, o) in out.iter_mut().enumerate().skip(1) {
                *o = self.grid.weight(self.xi, i) * self.integrator.apply_node(&gvals, h, i);
            }
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singularity { node: i, t: self.grid.t(i) });
        }
        Ok(out)
    }

    /// L_i = L_K·w̃(t_i)·Γ(ξ)/Γ(ξ+μ)·(ln t_i − ln a)^μ.
    fn lipschitz(&self) -> Lipschitz {
        let c = self.raw_lk() * gamma(self.xi) / gamma(self.xi + self.mu);
        Lipschitz::Table(
            (0..=self.grid.n())
                .map(|i| c * self.weight_factor(i) * self.grid.offset(i).powf(self.mu))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CausalityReport {
    pub trials: usize,
    /// (trial, node) pairs where the tail leaked into node `i`.
    pub violations: Vec<(usize, usize)>,
}

fn random_function(grid: &Arc<Grid>, xi: f64, rng: &mut ChaCha8Rng) -> Result<WeightedFunction> {
    let u = (0..=grid.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
    WeightedFunction::new(Arc::clone(grid), xi, u)
}

/// Perturbs x beyond a random node and checks that node bitwise.
pub fn causality_check(
    op: &dyn VolterraOperator,
    grid: &Arc<Grid>,
    xi: f64,
    trials: usize,
    seed: u64,
) -> Result<CausalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CausalityReport { trials, violations: Vec::new() };
    let n = grid.n();
    for trial in 0..trials {
        let x = random_function(grid, xi, &mut rng)?;
        let i = rng.random_range(0..n);
        let mut u = x.u().to_vec();
        for v in &mut u[i + 1..] {
            *v = rng.random_range(-2.0..2.0);
        }
        let y = WeightedFunction::new(Arc::clone(grid), xi, u)?;
        let (wx, wy) = (op.apply(&x)?, op.apply(&y)?);
        if wx[i].to_bits() != wy[i].to_bits() {
            report.violations.push((trial, i));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LipschitzReport {
    pub pairs: usize,
    /// Largest observed |ΔW_i| / (L_i · max_{j≤i}|Δu_j|).
    pub max_ratio: f64,
    pub violations: Vec<(usize, usize)>,
}

/// Tests the declared weighted Lipschitz bound on random pairs.
pub fn lipschitz_check(
    op: &dyn VolterraOperator,
    grid: &Arc<Grid>,
    xi: f64,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lip = op.lipschitz();
    let mut report = LipschitzReport { pairs, ..Default::default() };
    for pair in 0..pairs {
        let x = random_function(grid, xi, &mut rng)?;
        let y = random_function(grid, xi, &mut rng)?;
        let (wx, wy) = (op.apply(&x)?, op.apply(&y)?);
        let mut running = 0.0f64;
        for i in 0..=grid.n() {
            running = running.max((x.u()[i] - y.u()[i]).abs());
            let diff = (wx[i] - wy[i]).abs();
            let bound = lip.at(i) * running;
            if diff > bound * (1.0 + 1e-9) + 1e-300 {
                report.violations.push((pair, i));
            }
            if bound > 0.0 {
                report.max_ratio = report.max_ratio.max(diff / bound);
            }
        }
    }
    Ok(report)
}
