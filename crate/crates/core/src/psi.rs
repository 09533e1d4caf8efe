//! Generator functions Ψ for the Ψ-fractional operators.
//!
//! The registry is closed: every kind has a closed-form derivative and inverse,
//! which the quadrature relies on when it substitutes τ = Ψ(s). Adding a kind
//! means adding arms to `eval`, `derivative`, `inverse` and `domain_lo`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of samples `validate` uses on `[a, b]`.
pub const VALIDATION_SAMPLES: usize = 1000;

const ROUNDTRIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiKind {
    /// Ψ(t) = t (Riemann–Liouville / Hilfer).
    Identity,
    /// Ψ(t) = ln t.
    Hadamard,
    /// Ψ(t) = t^σ, σ > 0 (Katugampola-type).
    Power { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiFunction {
    kind: PsiKind,
}

impl PsiFunction {
    pub fn identity() -> Self {
        Self { kind: PsiKind::Identity }
    }

    pub fn hadamard() -> Self {
        Self { kind: PsiKind::Hadamard }
    }

    pub fn power(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("power Ψ needs σ > 0, got {sigma}")));
        }
        Ok(Self { kind: PsiKind::Power { sigma } })
    }

    pub fn kind(&self) -> PsiKind {
        self.kind
    }

    /// Smallest admissible t. Hadamard excludes the bound itself.
    pub fn domain_lo(&self) -> f64 {
        match self.kind {
            PsiKind::Identity => f64::NEG_INFINITY,
            PsiKind::Hadamard | PsiKind::Power { .. } => 0.0,
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let ok = match self.kind {
            PsiKind::Identity => t.is_finite(),
            PsiKind::Hadamard => t.is_finite() && t > 0.0,
            PsiKind::Power { .. } => t.is_finite() && t >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("Ψ = {self} is undefined at t = {t}")))
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(match self.kind {
            PsiKind::Identity => t,
            PsiKind::Hadamard => t.ln(),
            PsiKind::Power { sigma } => t.powf(sigma),
        })
    }

    /// Ψ′(t); requires t strictly inside the domain.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        match self.kind {
            PsiKind::Identity => Ok(1.0),
            PsiKind::Hadamard => Ok(1.0 / t),
            PsiKind::Power { sigma } => {
                if t <= 0.0 {
                    return Err(Error::domain(format!(
                        "Ψ′ of {self} is only evaluated for t > 0, got {t}"
                    )));
                }
                Ok(sigma * t.powf(sigma - 1.0))
            }
        }
    }

    pub fn inverse(&self, tau: f64) -> Result<f64> {
        let ok = match self.kind {
            PsiKind::Identity | PsiKind::Hadamard => tau.is_finite(),
            PsiKind::Power { .. } => tau.is_finite() && tau >= 0.0,
        };
        if !ok {
            return Err(Error::domain(format!("τ = {tau} is outside the image of Ψ = {self}")));
        }
        Ok(match self.kind {
            PsiKind::Identity => tau,
            PsiKind::Hadamard => tau.exp(),
            PsiKind::Power { sigma } => tau.powf(1.0 / sigma),
        })
    }

    /// Samples the standing hypotheses on `[a, b]`; failures are recorded, never raised.
    pub fn validate(&self, a: f64, b: f64) -> ValidationReport {
        let mut report = ValidationReport {
            increasing: false,
            derivative_positive: false,
            inverse_roundtrip: false,
            domain_error: None,
            samples: VALIDATION_SAMPLES,
        };
        if !(a.is_finite() && b.is_finite() && a < b) {
            report.domain_error = Some(format!("need finite a < b, got a = {a}, b = {b}"));
            return report;
        }
        for t in [a, b] {
            if let Err(e) = self.eval(t) {
                report.domain_error = Some(e.to_string());
                return report;
            }
        }

        let m = VALIDATION_SAMPLES;
        let ts: Vec<f64> = (0..m)
            .map(|k| if k + 1 == m { b } else { a + (b - a) * k as f64 / (m - 1) as f64 })
            .collect();
        let mut increasing = true;
        let mut derivative_positive = true;
        let mut roundtrip = true;
        let mut prev = f64::NEG_INFINITY;
        for &t in &ts {
            let v = match self.eval(t) {
                Ok(v) => v,
                Err(e) => {
                    report.domain_error = Some(e.to_string());
                    return report;
                }
            };
            if !(v > prev) {
                increasing = false;
            }
            prev = v;
            match self.derivative(t) {
                Ok(d) if d > 0.0 && d.is_finite() => {}
                _ => derivative_positive = false,
            }
            match self.inverse(v) {
                Ok(back) => {
                    if back != t && (back - t).abs() > ROUNDTRIP_TOL * t.abs() {
                        roundtrip = false;
                    }
                }
                Err(_) => roundtrip = false,
            }
        }
        report.increasing = increasing;
        report.derivative_positive = derivative_positive;
        report.inverse_roundtrip = roundtrip;
        report
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub increasing: bool,
    pub derivative_positive: bool,
    pub inverse_roundtrip: bool,
    pub domain_error: Option<String>,
    pub samples: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.domain_error.is_none()
            && self.increasing
            && self.derivative_positive
            && self.inverse_roundtrip
    }

    /// Human-readable failures, empty when valid.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(e) = &self.domain_error {
            out.push(e.clone());
            return out;
        }
        if !self.increasing {
            out.push("Ψ is not strictly increasing on the interval".into());
        }
        if !self.derivative_positive {
            out.push("Ψ′ is not positive on the interval".into());
        }
        if !self.inverse_roundtrip {
            out.push("Ψ⁻¹(Ψ(t)) = t fails on the interval".into());
        }
        out
    }
}

impl fmt::Display for PsiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PsiKind::Identity => write!(f, "identity"),
            PsiKind::Hadamard => write!(f, "hadamard"),
            PsiKind::Power { sigma } => write!(f, "power:{sigma}"),
        }
    }
}

impl FromStr for PsiFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" => Ok(Self::identity()),
            "hadamard" => Ok(Self::hadamard()),
            _ => {
                if let Some(rest) = s.strip_prefix("power:") {
                    let sigma: f64 = rest
                        .trim()
                        .parse()
                        .map_err(|_| Error::domain(format!("bad power exponent {rest:?}")))?;
                    Self::power(sigma)
                } else {
                    Err(Error::domain(format!(
                        "unknown psi {s:?} (expected identity, hadamard or power:<sigma>)"
                    )))
                }
            }
        }
    }
}
