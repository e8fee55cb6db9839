//! Fixed-node Gauss–Legendre rules and the node budget used by the
//! coverage and rate integrals.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `n`-point rule by Newton iteration on the Legendre
    /// polynomial roots.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi's initial guess for the i-th root, counted from +1.
            let k = i as f64 + 1.0;
            let mut z = ((k - 0.25) / (nf + 0.5) * std::f64::consts::PI).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&z, &w)| (mid + half * z, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule: one copy of the rule on every panel between
    /// consecutive breakpoints.
    pub fn panels(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        breaks.windows(2).filter(|w| w[1] > w[0]).flat_map(|w| self.points(w[0], w[1]).collect::<Vec<_>>()).collect()
    }
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Node counts for the nested integrals.
///
/// `nodes_xi` counts nodes on the half-turn `[0, π]`; the angular
/// integrands are symmetric under `ξ → 2π − ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub nodes_u: usize,
    pub nodes_xi: usize,
    pub nodes_x: usize,
    /// Nodes for the Gaussian auxiliary variable of the load terms.
    pub nodes_t: usize,
    /// Half-width, in standard deviations, of the truncated Gaussian
    /// integrals.
    pub gauss_trunc_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_u: 64, nodes_xi: 64, nodes_x: 128, nodes_t: 48, gauss_trunc_sigmas: 6.0 }
    }
}

impl QuadratureSpec {
    /// A lighter budget used by the sweep tooling. Converges to the
    /// default budget well below 1e-6 on the rate integrals.
    pub fn sweep() -> Self {
        Self { nodes_u: 24, nodes_xi: 24, nodes_x: 64, nodes_t: 32, gauss_trunc_sigmas: 6.0 }
    }

    /// Every node count doubled.
    pub fn doubled(&self) -> Self {
        Self {
            nodes_u: 2 * self.nodes_u,
            nodes_xi: 2 * self.nodes_xi,
            nodes_x: 2 * self.nodes_x,
            nodes_t: 2 * self.nodes_t,
            gauss_trunc_sigmas: self.gauss_trunc_sigmas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("nodes_u", self.nodes_u),
            ("nodes_xi", self.nodes_xi),
            ("nodes_x", self.nodes_x),
            ("nodes_t", self.nodes_t),
        ] {
            if n < 8 {
                return Err(config(format!("{name} must be at least 8, got {n}")));
            }
        }
        if !(self.gauss_trunc_sigmas >= 4.0) || !self.gauss_trunc_sigmas.is_finite() {
            return Err(config(format!(
                "gauss_trunc_sigmas must be a finite value >= 4, got {}",
                self.gauss_trunc_sigmas
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_rules_match_tabulated_values() {
        let r = GaussLegendre::new(2);
        assert_abs_diff_eq!(r.nodes()[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
        let r = GaussLegendre::new(3);
        assert_abs_diff_eq!(r.nodes()[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], 0.0);
        assert_abs_diff_eq!(r.weights()[1], 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in [1usize, 4, 9, 64, 128] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
            let deg = (2 * n - 1).min(21) as i32;
            let got = rule.integrate(0.0, 2.0, |x| x.powi(deg));
            let want = 2f64.powi(deg + 1) / (deg + 1) as f64;
            assert!((got - want).abs() < 1e-12 * want, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn smooth_integrand() {
        let rule = GaussLegendre::new(20);
        let got = rule.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_panels_skip_empty_intervals() {
        let rule = GaussLegendre::new(8);
        let pts = rule.panels(&[0.0, 1.0, 1.0, 3.0]);
        assert_eq!(pts.len(), 16);
        let area: f64 = pts.iter().map(|(x, w)| w * x.abs()).sum();
        assert_abs_diff_eq!(area, 4.5, epsilon = 1e-13);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        assert!(QuadratureSpec::sweep().validate().is_ok());
        let bad = QuadratureSpec { nodes_u: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec { gauss_trunc_sigmas: 3.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
