use std::sync::Arc;

use crate::error::{Error, Result};
use crate::psi::PsiFunction;

/// Nodes a = t_0 < … < t_n = b, uniform in τ = Ψ(t).
#[derive(Debug, Clone)]
pub struct Grid {
    psi: PsiFunction,
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    tau_a: f64,
    step: f64,
}

impl Grid {
    pub fn new(psi: PsiFunction, a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooCoarse { n, min: 2 });
        }
        let report = psi.validate(a, b);
        if !report.is_valid() {
            return Err(Error::domain(format!(
                "Ψ = {psi} is not admissible on [{a}, {b}]: {}",
                report.failures().join("; ")
            )));
        }
        let tau_a = psi.eval(a)?;
        let tau_b = psi.eval(b)?;
        let step = (tau_b - tau_a) / n as f64;
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(a);
        for i in 1..n {
            nodes.push(psi.inverse(tau_a + i as f64 * step)?);
        }
        nodes.push(b);
        Ok(Self { psi, a, b, nodes, tau_a, step })
    }

    pub fn shared(psi: PsiFunction, a: f64, b: f64, n: usize) -> Result<Arc<Self>> {
        Self::new(psi, a, b, n).map(Arc::new)
    }

    pub fn psi(&self) -> PsiFunction {
        self.psi
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of intervals; there are `n + 1` nodes.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Step h in the transformed variable.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Ψ(b) − Ψ(a).
    pub fn span(&self) -> f64 {
        self.step * self.n() as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_a + self.offset(i)
    }

    /// Ψ(t_i) − Ψ(a), taken as i·h.
    pub fn offset(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// (Ψ(t_i) − Ψ(a))^{1−ξ}; zero at t_0 when ξ < 1 and one everywhere when ξ = 1.
    pub fn weight(&self, xi: f64, i: usize) -> f64 {
        if xi == 1.0 {
            1.0
        } else {
            self.offset(i).powf(1.0 - xi)
        }
    }

    pub fn weights(&self, xi: f64) -> Vec<f64> {
        (0..=self.n()).map(|i| self.weight(xi, i)).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.psi == other.psi && self.a == other.a && self.b == other.b && self.n() == other.n()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({}, [{}, {}], n = {}) vs ({}, [{}, {}], n = {})",
                self.psi,
                self.a,
                self.b,
                self.n(),
                other.psi,
                other.a,
                other.b,
                other.n()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn endpoints_and_uniformity() {
        for (psi, a, b) in [
            (PsiFunction::identity(), 0.0, 1.0),
            (PsiFunction::hadamard(), 1.0, E),
            (PsiFunction::power(2.0).unwrap(), 1.0, 2.0),
            (PsiFunction::power(0.5).unwrap(), 0.1, 2.0),
        ] {
            let g = Grid::new(psi, a, b, 64).unwrap();
            assert_eq!(g.t(0), a);
            assert_eq!(g.t(64), b);
            let span = psi.eval(b).unwrap() - psi.eval(a).unwrap();
            for i in 1..=64 {
                assert!(g.t(i) > g.t(i - 1));
                let d = psi.eval(g.t(i)).unwrap() - psi.eval(g.t(i - 1)).unwrap();
                assert!((d - span / 64.0).abs() <= 1e-10 * span);
            }
        }
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(Grid::new(PsiFunction::hadamard(), 0.0, 1.0, 16).is_err());
        assert!(Grid::new(PsiFunction::identity(), 1.0, 1.0, 16).is_err());
        assert!(matches!(
            Grid::new(PsiFunction::identity(), 0.0, 1.0, 1),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn weight_at_start() {
        let g = Grid::new(PsiFunction::identity(), 0.0, 1.0, 4).unwrap();
        assert_eq!(g.weight(0.5, 0), 0.0);
        assert_eq!(g.weight(1.0, 0), 1.0);
        assert!((g.weight(0.5, 4) - 1.0).abs() < 1e-15);
    }
}
