//! One-parameter Mittag-Leffler function E_μ(z) = Σ z^k / Γ(μk + 1) for
//! 0 < μ ≤ 1 and real z ≥ 0.
//!
//! The fast path sums the power series (terms formed in log space, Neumaier
//! summation) until z^{1/μ} reaches [`ASYMPTOTIC_SWITCH`], then switches to
//!
//! ```text
//! E_μ(z) ≈ exp(z^{1/μ}) / μ − Σ_{k=1}^{N} z^{-k} / Γ(1 − μk)
//! ```
//!
//! The oracle sums a fixed number of series terms in double-double arithmetic
//! and is only meant for certifying the fast path.

use crate::error::{Error, Result};
use crate::special::{ln_gamma, recip_gamma, two_sum, CompensatedSum};

/// Fast path uses the asymptotic branch once z^{1/μ} exceeds this value.
pub const ASYMPTOTIC_SWITCH: f64 = 40.0;

const SERIES_REL_EPS: f64 = 1e-17;
const MAX_SERIES_TERMS: usize = 10_000_000;
const MAX_ASYMPTOTIC_TERMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlMode {
    Fast,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub mu: f64,
    pub z: f64,
    pub mode: MlMode,
}

impl MlQuery {
    pub fn new(mu: f64, z: f64) -> Self {
        Self { mu, z, mode: MlMode::Fast }
    }

    pub fn oracle(mu: f64, z: f64) -> Self {
        Self { mu, z, mode: MlMode::Oracle }
    }

    fn check(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::domain(format!("Mittag-Leffler order μ = {} not in (0, 1]", self.mu)));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(Error::domain(format!("Mittag-Leffler argument z = {} must be finite and ≥ 0", self.z)));
        }
        Ok(())
    }
}

/// E_μ(z) on the fast path.
pub fn mittag_leffler(mu: f64, z: f64) -> Result<f64> {
    ml_eval(&MlQuery::new(mu, z))
}

pub fn ml_eval(q: &MlQuery) -> Result<f64> {
    q.check()?;
    match q.mode {
        MlMode::Fast => fast(q.mu, q.z),
        MlMode::Oracle => ml_oracle(q.mu, q.z, oracle_terms(q.mu, q.z)),
    }
}

/// A term count that takes the oracle series well past its peak.
pub fn oracle_terms(mu: f64, z: f64) -> usize {
    let zt = if z > 0.0 { z.powf(1.0 / mu) } else { 0.0 };
    let est = (3.0 * zt + 200.0) / mu;
    if est.is_finite() && est < 1e9 {
        (est.ceil() as usize).max(100)
    } else {
        usize::MAX
    }
}

/// ln E_μ(z) from the leading asymptotic term; used for overflow diagnostics.
fn ln_leading(mu: f64, z: f64) -> f64 {
    z.powf(1.0 / mu) - mu.ln()
}

fn overflow(mu: f64, z: f64) -> Error {
    Error::Overflow {
        what: format!("E_{mu}({z}) exceeds the f64 range"),
        ln_value: ln_leading(mu, z),
    }
}

fn fast(mu: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(1.0);
    }
    if mu == 1.0 {
        let v = z.exp();
        return if v.is_finite() { Ok(v) } else { Err(overflow(mu, z)) };
    }
    let zt = z.powf(1.0 / mu);
    if zt > ASYMPTOTIC_SWITCH {
        asymptotic(mu, z)
    } else {
        series(mu, z)
    }
}

fn series(mu: f64, z: f64) -> Result<f64> {
    let lnz = z.ln();
    let zt = z.powf(1.0 / mu);
    let mut acc = CompensatedSum::default();
    acc.add(1.0);
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        let term = (kf * lnz - ln_gamma(mu * kf + 1.0)).exp();
        acc.add(term);
        let s = acc.value();
        if !s.is_finite() {
            return Err(overflow(mu, z));
        }
        if mu * kf > zt + 1.0 && term < SERIES_REL_EPS * s {
            return Ok(s);
        }
    }
    Err(Error::Convergence(format!("E_{mu}({z}) series exhausted {MAX_SERIES_TERMS} terms")))
}

fn asymptotic(mu: f64, z: f64) -> Result<f64> {
    let ln_main = ln_leading(mu, z);
    if ln_main >= f64::MAX.ln() {
        return Err(overflow(mu, z));
    }
    let main = z.powf(1.0 / mu).exp() / mu;
    if !main.is_finite() {
        return Err(overflow(mu, z));
    }
    let mut corr = 0.0;
    let mut prev = f64::INFINITY;
    let mut zpow = 1.0;
    for k in 1..=MAX_ASYMPTOTIC_TERMS {
        zpow /= z;
        let term = zpow * recip_gamma(1.0 - mu * k as f64);
        // asymptotic series: stop at the smallest term
        if term.abs() > prev {
            break;
        }
        if term != 0.0 {
            prev = term.abs();
        }
        corr += term;
    }
    Ok(main - corr)
}

/// Brute-force series with exactly `terms` terms, summed in double-double.
pub fn ml_oracle(mu: f64, z: f64, terms: usize) -> Result<f64> {
    MlQuery::oracle(mu, z).check()?;
    if terms < 50 {
        return Err(Error::domain(format!("oracle needs at least 50 terms, got {terms}")));
    }
    if terms == usize::MAX {
        return Err(Error::Convergence(format!(
            "E_{mu}({z}) needs more series terms than the oracle can sum"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let lnz = z.ln();
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    let mut last = 1.0;
    for k in 1..terms {
        let kf = k as f64;
        let term = (kf * lnz - ln_gamma(mu * kf + 1.0)).exp();
        if !term.is_finite() {
            return Err(overflow(mu, z));
        }
        let (s, e) = two_sum(hi, term);
        let (h2, l2) = two_sum(s, lo + e);
        hi = h2;
        lo = l2;
        if !hi.is_finite() {
            return Err(overflow(mu, z));
        }
        last = term;
    }
    let sum = hi + lo;
    if last > 1e-30 * sum {
        return Err(Error::Convergence(format!(
            "E_{mu}({z}): term {terms} is {last:.3e}, partial sum {sum:.3e}"
        )));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn examples() {
        assert!(rel(mittag_leffler(1.0, 1.0).unwrap(), E) < 1e-15);
        assert_eq!(mittag_leffler(0.5, 0.0).unwrap(), 1.0);
        // E_{1/2}(z) = exp(z²) erfc(−z)
        let closed = (1.0f64).exp() * libm::erfc(-1.0);
        let v = mittag_leffler(0.5, 1.0).unwrap();
        assert!(rel(v, closed) < 1e-13, "{v} vs {closed}");
        assert!((v - 5.0090).abs() < 5e-5);
    }

    #[test]
    fn oracle_examples() {
        assert!(rel(ml_oracle(1.0, 2.0, 100).unwrap(), 2.0f64.exp()) < 1e-15);
        let v = ml_oracle(0.5, 0.15, 100).unwrap();
        let closed = (0.15f64 * 0.15).exp() * libm::erfc(-0.15);
        assert!(rel(v, closed) < 1e-14);
        assert!((v - 1.1946).abs() < 5e-5);
        assert_eq!(ml_oracle(0.7, 0.0, 50).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(mittag_leffler(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(mittag_leffler(1.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(mittag_leffler(0.5, -1.0), Err(Error::Domain(_))));
        assert!(matches!(mittag_leffler(0.1, 30.0), Err(Error::Overflow { .. })));
        assert!(matches!(mittag_leffler(1.0, 800.0), Err(Error::Overflow { .. })));
        assert!(matches!(ml_oracle(0.5, 10.0, 60), Err(Error::Convergence(_))));
        assert!(matches!(ml_oracle(0.5, 1.0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn branches_agree_at_switch() {
        for mu in [0.1, 0.2, 0.35, 0.5, 0.75, 0.9, 0.99] {
            let z = ASYMPTOTIC_SWITCH.powf(mu);
            let s = series(mu, z).unwrap();
            let a = asymptotic(mu, z).unwrap();
            assert!(rel(a, s) <= 1e-8, "μ={mu}: series {s} asymptotic {a}");
        }
    }

    #[test]
    fn exponential_case() {
        for k in 0..=200 {
            let z = 0.1 * k as f64;
            assert!(rel(mittag_leffler(1.0, z).unwrap(), z.exp()) <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn at_least_one_and_nondecreasing(mu in 0.1f64..=1.0, z1 in 0.0f64..5.0, dz in 0.0f64..5.0) {
            let e1 = match mittag_leffler(mu, z1) {
                Ok(v) => v,
                Err(Error::Overflow { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let e2 = match mittag_leffler(mu, z1 + dz) {
                Ok(v) => v,
                Err(Error::Overflow { .. }) => f64::INFINITY,
                Err(e) => panic!("{e}"),
            };
            prop_assert!(e1 >= 1.0);
            prop_assert!(e2 >= e1);
        }
    }
}
