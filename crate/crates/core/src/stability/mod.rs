//! Ulam–Hyers and Ulam–Hyers–Rassias experiments.
//!
//! A trial perturbs the right-hand side by a bounded g, solves both the
//! perturbed and the unperturbed problem (the latter with its weighted initial
//! value matched to the perturbed solution) and compares the weighted distance
//! against the certified bound.

mod gronwall;
mod perturbation;

use std::sync::Arc;

use rayon::prelude::*;

pub use gronwall::{gronwall_extremal, gronwall_verify, GronwallReport, DEFAULT_TERMS};
pub use perturbation::{make_perturbation, trial_seed, PerturbationBound};

use crate::error::{Error, Result};
use crate::frac_calc::{frac_integral_plain, Grid, WeightedFunction};
use crate::mittag_leffler::mittag_leffler;
use crate::solver::{contraction_factor, picard_solve_forced, ProblemSpec, DEFAULT_MAX_ITER};
use crate::special::gamma;
use crate::volterra::Lipschitz;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    UlamHyers,
    UlamHyersRassias,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// ε for UH; max_i φ_i for UHR.
    pub bound: f64,
    /// Weighted sup distance between perturbed and matched unperturbed solution.
    pub distance: f64,
    pub ratio: f64,
    pub pass: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub kind: CertificateKind,
    pub epsilon: Option<f64>,
    pub phi_id: Option<String>,
    pub lambda: Option<f64>,
    /// c for UH, c_φ for UHR.
    pub c: f64,
    pub psi_tilde: Option<f64>,
    pub k_tilde: Option<f64>,
    pub contraction_q: f64,
    pub trials: Vec<TrialRecord>,
    pub max_observed_ratio: f64,
    pub pass: bool,
}

impl StabilityCertificate {
    fn finish(mut self) -> Self {
        self.max_observed_ratio = self
            .trials
            .iter()
            .filter(|t| t.failure.is_none())
            .fold(0.0, |m, t| f64::max(m, t.ratio));
        self.pass = !self.trials.is_empty() && self.trials.iter().all(|t| t.pass);
        self
    }

    /// The same trial data judged against another constant.
    pub fn with_constant(&self, c: f64) -> Self {
        let scale = self.c / c;
        let mut out = self.clone();
        out.c = c;
        for t in &mut out.trials {
            if t.failure.is_none() {
                t.ratio = if t.ratio == 0.0 { 0.0 } else { t.ratio * scale };
                t.pass = t.ratio <= 1.0;
            }
        }
        out.finish()
    }
}

/// c = (Ψ(b) − Ψ(a))^{μ+1−ξ}/Γ(μ+1) · E_μ(L_f(1 + L_W)(Ψ(b) − Ψ(a))^μ).
pub fn uh_constant(p: &ProblemSpec) -> Result<f64> {
    let span = p.span();
    let z = p.l_f.sup() * (1.0 + p.l_w.sup()) * span.powf(p.mu);
    Ok(span.powf(p.mu + 1.0 - p.xi) / gamma(p.mu + 1.0) * mittag_leffler(p.mu, z)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UhrConstants {
    pub lambda: f64,
    pub c_phi: f64,
    /// max_i (Ψ(t_i) − Ψ(a))^{1−ξ}.
    pub psi_tilde: f64,
    /// max_i L_f(t_i)(1 + L_W(t_i))(Ψ(t_i) − Ψ(a))^μ.
    pub k_tilde: f64,
}

fn check_table(l: &Lipschitz, grid: &Grid, name: &str) -> Result<()> {
    match l {
        Lipschitz::Table(t) if t.len() != grid.n() + 1 => Err(Error::GridMismatch(format!(
            "{name} table has {} entries for {} nodes",
            t.len(),
            grid.n() + 1
        ))),
        _ => Ok(()),
    }
}

fn check_phi(grid: &Grid, phi: &[f64]) -> Result<()> {
    if phi.len() != grid.n() + 1 {
        return Err(Error::GridMismatch(format!("φ has {} samples for {} nodes", phi.len(), grid.n() + 1)));
    }
    if let Some(i) = phi.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("φ must be positive, φ(t_{i}) = {}", phi[i])));
    }
    if let Some(i) = phi.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::NotIncreasing { node: i });
    }
    Ok(())
}

/// λ = max_i I^μ φ(t_i)/φ(t_i) and c_φ = λ Ψ̃ E_μ(K̃) on the grid (the truncated interval).
pub fn uhr_constants(p: &ProblemSpec, grid: &Grid, phi: &[f64]) -> Result<UhrConstants> {
    check_phi(grid, phi)?;
    check_table(&p.l_f, grid, "L_f")?;
    check_table(&p.l_w, grid, "L_W")?;
    let iphi = frac_integral_plain(grid, p.mu, phi)?;
    let lambda = (1..=grid.n()).map(|i| iphi[i] / phi[i]).fold(0.0, f64::max);
    let psi_tilde = (0..=grid.n()).map(|i| grid.weight(p.xi, i)).fold(0.0, f64::max);
    let k_tilde = (0..=grid.n())
        .map(|i| p.l_f.at(i) * (1.0 + p.l_w.at(i)) * grid.offset(i).powf(p.mu))
        .fold(0.0, f64::max);
    let c_phi = lambda * psi_tilde * mittag_leffler(p.mu, k_tilde)?;
    Ok(UhrConstants { lambda, c_phi, psi_tilde, k_tilde })
}

struct Pair {
    y: WeightedFunction,
    x: WeightedFunction,
}

fn solve_pair(p: &ProblemSpec, grid: &Arc<Grid>, forcing: &[f64], tol: f64) -> Result<Pair> {
    let (y, _) = picard_solve_forced(p, grid, Some(forcing), tol, DEFAULT_MAX_ITER)?;
    let mut matched = p.clone();
    matched.delta = gamma(p.xi) * y.u()[0];
    let (x, _) = picard_solve_forced(&matched, grid, None, tol, DEFAULT_MAX_ITER)?;
    Ok(Pair { y, x })
}

fn failed(trial: usize, seed: u64, bound: f64, e: Error) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        bound,
        distance: f64::NAN,
        ratio: f64::NAN,
        pass: false,
        failure: Some(e.to_string()),
    }
}

/// Ratio ‖y − x‖/(c·ε) over seeded trials.
pub fn uh_experiment(
    p: &ProblemSpec,
    grid: &Arc<Grid>,
    epsilon: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<StabilityCertificate> {
    let c = uh_constant(p)?;
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = trial_seed(seed, trial);
            let run = || -> Result<TrialRecord> {
                let g = make_perturbation(&PerturbationBound::Epsilon(epsilon), grid, s)?;
                let pair = solve_pair(p, grid, &g, tol)?;
                let distance = pair.y.distance(&pair.x)?;
                let ratio = if distance == 0.0 { 0.0 } else { distance / (c * epsilon) };
                Ok(TrialRecord { trial, seed: s, bound: epsilon, distance, ratio, pass: ratio <= 1.0, failure: None })
            };
            run().unwrap_or_else(|e| failed(trial, s, epsilon, e))
        })
        .collect();
    Ok(StabilityCertificate {
        kind: CertificateKind::UlamHyers,
        epsilon: Some(epsilon),
        phi_id: None,
        lambda: None,
        c,
        psi_tilde: None,
        k_tilde: None,
        contraction_q: contraction_factor(p),
        trials: records,
        max_observed_ratio: 0.0,
        pass: false,
    }
    .finish())
}

/// Pointwise ratio max_i ω_i|y_i − x_i|/(c_φ φ_i) over seeded trials.
#[allow(clippy::too_many_arguments)]
pub fn uhr_experiment(
    p: &ProblemSpec,
    grid: &Arc<Grid>,
    phi: &[f64],
    phi_id: &str,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<StabilityCertificate> {
    let k = uhr_constants(p, grid, phi)?;
    let peak = phi.iter().copied().fold(0.0, f64::max);
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = trial_seed(seed, trial);
            let run = || -> Result<TrialRecord> {
                let g = make_perturbation(&PerturbationBound::Phi(phi.to_vec()), grid, s)?;
                let pair = solve_pair(p, grid, &g, tol)?;
                let distance = pair.y.distance(&pair.x)?;
                let ratio = pair
                    .y
                    .u()
                    .iter()
                    .zip(pair.x.u())
                    .zip(phi)
                    .map(|((a, b), f)| (a - b).abs() / (k.c_phi * f))
                    .fold(0.0, f64::max);
                Ok(TrialRecord { trial, seed: s, bound: peak, distance, ratio, pass: ratio <= 1.0, failure: None })
            };
            run().unwrap_or_else(|e| failed(trial, s, peak, e))
        })
        .collect();
    Ok(StabilityCertificate {
        kind: CertificateKind::UlamHyersRassias,
        epsilon: None,
        phi_id: Some(phi_id.to_string()),
        lambda: Some(k.lambda),
        c: k.c_phi,
        psi_tilde: Some(k.psi_tilde),
        k_tilde: Some(k.k_tilde),
        contraction_q: contraction_factor(p),
        trials: records,
        max_observed_ratio: 0.0,
        pass: false,
    }
    .finish())
}
