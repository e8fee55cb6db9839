//! SNR coverage of the typical hotspot user.
//!
//! Conditioned on the hotspot centre distance `x`, the user is covered by
//! the SBS when it associates there and both the backhaul and the access
//! link clear their thresholds; it is covered by the ABS when it
//! associates there and the direct link clears its threshold.
//!
//! Every integral is a fixed Gauss–Legendre rule. [`CoverageModel`]
//! evaluates the distance-dependent link factors once per node so that
//! the same tables serve any number of thresholds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{Link, LinkModel, LinkPoint, Threshold};
use crate::error::Result;
use crate::geometry::{angular_breaks, assoc_prob_sbs, center_breaks, distance_to_abs, u_max, AssociationParams};
use crate::params::NetworkParams;
use crate::quadrature::{GaussLegendre, QuadratureSpec};

/// SNR thresholds of the backhaul, SBS access and ABS access links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageThresholds {
    pub theta1: Threshold,
    pub theta2: Threshold,
    pub theta3: Threshold,
}

impl CoverageThresholds {
    pub fn new(theta1: Threshold, theta2: Threshold, theta3: Threshold) -> Self {
        Self { theta1, theta2, theta3 }
    }

    /// The same SNR threshold on every link.
    pub fn uniform(theta: f64) -> Self {
        let t = Threshold::from_snr(theta);
        Self::new(t, t, t)
    }
}

/// A quadrature node of a user-location integral, with the link
/// evaluated at that location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub weight: f64,
    pub p_los: f64,
    pub a_los: f64,
    pub a_nlos: f64,
}

impl WeightedPoint {
    fn new(weight: f64, p: LinkPoint) -> Self {
        Self { weight, p_los: p.p_los, a_los: p.a_los, a_nlos: p.a_nlos }
    }
}

/// Link tables of one hotspot-centre distance.
#[derive(Debug, Clone)]
pub struct CenterNode {
    pub x: f64,
    /// Quadrature weight times the centre density.
    pub weight: f64,
    pub a_s: f64,
    pub backhaul: LinkPoint,
    sbs: Vec<WeightedPoint>,
    abs: Vec<WeightedPoint>,
    m_los: f64,
    m_nlos: f64,
}

impl CenterNode {
    fn sum(&self, pts: &[WeightedPoint], theta: f64) -> f64 {
        let (ml, mn) = (self.m_los, self.m_nlos);
        pts.iter()
            .map(|p| {
                let lp = LinkPoint { p_los: p.p_los, a_los: p.a_los, a_nlos: p.a_nlos, m_los: ml, m_nlos: mn };
                p.weight * lp.coverage(theta)
            })
            .sum()
    }

    /// `P(backhaul SNR > θ)`.
    pub fn backhaul_coverage(&self, theta: Threshold) -> f64 {
        match theta {
            Threshold::AlwaysPass => 1.0,
            Threshold::Never => 0.0,
            Threshold::Snr(t) => self.backhaul.coverage(t),
        }
    }

    /// `P(SBS association, SBS access SNR > θ)`.
    pub fn sbs_access_coverage(&self, theta: Threshold) -> f64 {
        match theta {
            Threshold::AlwaysPass => self.a_s,
            Threshold::Never => 0.0,
            Threshold::Snr(t) => self.sum(&self.sbs, t),
        }
    }

    /// `P(ABS association, ABS access SNR > θ)`.
    pub fn abs_coverage(&self, theta: Threshold) -> f64 {
        match theta {
            Threshold::AlwaysPass => 1.0 - self.a_s,
            Threshold::Never => 0.0,
            Threshold::Snr(t) => self.sum(&self.abs, t),
        }
    }

    /// `Pc_s(θ1, θ2 | x)`.
    pub fn pc_sbs(&self, theta1: Threshold, theta2: Threshold) -> f64 {
        if self.a_s == 0.0 {
            return 0.0;
        }
        let b = self.backhaul_coverage(theta1);
        if b == 0.0 {
            return 0.0;
        }
        b * self.sbs_access_coverage(theta2)
    }

    /// `Pc_m(θ3 | x)`.
    pub fn pc_abs(&self, theta3: Threshold) -> f64 {
        self.abs_coverage(theta3)
    }
}

/// The link models and the per-distance node tables of a network.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    params: NetworkParams,
    assoc: AssociationParams,
    quad: QuadratureSpec,
    backhaul: LinkModel,
    sbs_access: LinkModel,
    abs_access: LinkModel,
    nodes: Vec<CenterNode>,
}

impl CoverageModel {
    pub fn new(params: &NetworkParams, quad: &QuadratureSpec) -> Result<Self> {
        params.validate()?;
        quad.validate()?;
        let (radio, prop) = (&params.radio, &params.propagation);
        let mut model = Self {
            params: *params,
            assoc: params.association()?,
            quad: *quad,
            backhaul: LinkModel::new(Link::Backhaul, radio, prop),
            sbs_access: LinkModel::new(Link::SbsAccess, radio, prop),
            abs_access: LinkModel::new(Link::AbsAccess, radio, prop),
            nodes: Vec::new(),
        };
        let geom = &params.geometry;
        let rule = GaussLegendre::new(quad.nodes_x);
        model.nodes = rule
            .panels(&center_breaks(geom, &model.assoc))
            .into_iter()
            .map(|(x, w)| model.center_node(x, w * geom.center_density(x)))
            .collect();
        Ok(model)
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn association(&self) -> &AssociationParams {
        &self.assoc
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Node tables over the hotspot-centre distance.
    pub fn nodes(&self) -> &[CenterNode] {
        &self.nodes
    }

    /// Link tables at an arbitrary centre distance `x`.
    pub fn center_node(&self, x: f64, weight: f64) -> CenterNode {
        let rs = self.params.geometry.r_hotspot;
        let a_s = assoc_prob_sbs(x, &self.assoc, rs);
        let u_rule = GaussLegendre::new(self.quad.nodes_u);
        let xi_rule = GaussLegendre::new(self.quad.nodes_xi);
        let density = |u: f64| self.params.geometry.offset_density(u) / PI;
        let mut sbs = Vec::new();
        let mut abs = Vec::new();
        for (xi, wxi) in xi_rule.panels(&angular_breaks(x, &self.assoc, rs)) {
            let edge = u_max(x, xi, &self.assoc, rs);
            if edge > 0.0 {
                for (u, wu) in u_rule.points(0.0, edge) {
                    let w = wxi * wu * density(u);
                    sbs.push(WeightedPoint::new(w, self.sbs_access.point(u)));
                }
            }
            if edge < rs {
                for (u, wu) in u_rule.points(edge, rs) {
                    let w = wxi * wu * density(u);
                    abs.push(WeightedPoint::new(w, self.abs_access.point(distance_to_abs(x, u, xi))));
                }
            }
        }
        let prop = &self.params.propagation;
        CenterNode {
            x,
            weight,
            a_s,
            backhaul: self.backhaul.point(x),
            sbs,
            abs,
            m_los: prop.m_los,
            m_nlos: prop.m_nlos,
        }
    }

    /// `Pc_s(θ1, θ2 | x)`.
    pub fn pc_sbs_cond(&self, theta1: Threshold, theta2: Threshold, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.center_node(x, 0.0).pc_sbs(theta1, theta2)
    }

    /// `Pc_m(θ3 | x)`.
    pub fn pc_abs_cond(&self, theta3: Threshold, x: f64) -> f64 {
        self.center_node(x, 0.0).pc_abs(theta3)
    }

    /// Unconditional coverage probability.
    pub fn coverage_probability(&self, th: &CoverageThresholds) -> f64 {
        self.nodes.iter().map(|n| n.weight * (n.pc_sbs(th.theta1, th.theta2) + n.pc_abs(th.theta3))).sum()
    }
}

/// `Pc_s(θ1, θ2 | x)` for one-off evaluations.
pub fn pc_sbs_cond(
    theta1: Threshold,
    theta2: Threshold,
    x: f64,
    params: &NetworkParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(CoverageModel::new(params, quad)?.pc_sbs_cond(theta1, theta2, x))
}

/// `Pc_m(θ3 | x)` for one-off evaluations.
pub fn pc_abs_cond(theta3: Threshold, x: f64, params: &NetworkParams, quad: &QuadratureSpec) -> Result<f64> {
    Ok(CoverageModel::new(params, quad)?.pc_abs_cond(theta3, x))
}

pub fn coverage_probability(
    thresholds: &CoverageThresholds,
    params: &NetworkParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(CoverageModel::new(params, quad)?.coverage_probability(thresholds))
}

/// CDFs of the access SNR without beamforming gain, on a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrCdf {
    pub theta: Vec<f64>,
    /// SNR from the ABS to a user placed uniformly in a uniformly placed
    /// hotspot.
    pub abs: Vec<f64>,
    /// SNR from the SBS to a user placed uniformly in its hotspot.
    pub sbs: Vec<f64>,
}

/// Access SNR CDFs with unit antenna gain, averaged over user locations
/// irrespective of association.
pub fn snr_cdf_curves(theta_grid: &[f64], params: &NetworkParams, quad: &QuadratureSpec) -> Result<SnrCdf> {
    params.validate()?;
    quad.validate()?;
    let (radio, prop) = (&params.radio, &params.propagation);
    let geom = &params.geometry;
    let abs_link = LinkModel::with_gain(Link::AbsAccess, 1.0, radio, prop);
    let sbs_link = LinkModel::with_gain(Link::SbsAccess, 1.0, radio, prop);
    let rs = geom.r_hotspot;

    let u_rule = GaussLegendre::new(quad.nodes_u);
    let sbs_pts: Vec<(f64, LinkPoint)> =
        u_rule.panels(&[0.0, rs]).into_iter().map(|(u, w)| (w * geom.offset_density(u), sbs_link.point(u))).collect();

    // ‖x + u‖ has a kink at u = x when ξ = π; split u there.
    let x_rule = GaussLegendre::new(quad.nodes_x);
    let xi_rule = GaussLegendre::new(quad.nodes_xi);
    let mut abs_pts = Vec::new();
    for (x, wx) in x_rule.panels(&[0.0, geom.max_center_distance()]) {
        let wx = wx * geom.center_density(x);
        let mut ubreaks = vec![0.0, rs];
        if x < rs {
            ubreaks.insert(1, x);
        }
        for (xi, wxi) in xi_rule.panels(&[0.0, PI]) {
            for (u, wu) in u_rule.panels(&ubreaks) {
                let w = wx * wxi * wu * geom.offset_density(u) / PI;
                abs_pts.push((w, abs_link.point(distance_to_abs(x, u, xi))));
            }
        }
    }

    let cdf = |pts: &[(f64, LinkPoint)], theta: f64| {
        if theta <= 0.0 {
            return 0.0;
        }
        let ccdf: f64 = pts.iter().map(|(w, p)| w * p.coverage(theta)).sum();
        (1.0 - ccdf).clamp(0.0, 1.0)
    };
    Ok(SnrCdf {
        theta: theta_grid.to_vec(),
        abs: theta_grid.iter().map(|&t| cdf(&abs_pts, t)).collect(),
        sbs: theta_grid.iter().map(|&t| cdf(&sbs_pts, t)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_los, snr, FadingSampler};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> CoverageModel {
        CoverageModel::new(&NetworkParams::default(), &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn sentinels_reduce_to_association() {
        let m = model();
        let assoc = *m.association();
        let pass = Threshold::AlwaysPass;
        for x in [5.0, 60.0, 100.0, 170.0] {
            let a_s = assoc_prob_sbs(x, &assoc, 30.0);
            assert_eq!(m.pc_sbs_cond(pass, pass, x), a_s);
            assert_eq!(m.pc_abs_cond(pass, x), 1.0 - a_s);
            assert_eq!(m.pc_sbs_cond(Threshold::Never, pass, x), 0.0);
            assert_eq!(m.pc_abs_cond(Threshold::Never, x), 0.0);
            assert_eq!(m.pc_sbs_cond(Threshold::from_snr(f64::INFINITY), pass, x), 0.0);
        }
        let all = CoverageThresholds::new(pass, pass, pass);
        assert!((m.coverage_probability(&all) - 1.0).abs() < 1e-12);
        let none = CoverageThresholds::uniform(f64::INFINITY);
        assert_eq!(m.coverage_probability(&none), 0.0);
    }

    #[test]
    fn quadrature_weights_recover_association_masses() {
        let m = model();
        for n in m.nodes() {
            let s: f64 = n.sbs.iter().map(|p| p.weight).sum();
            let a: f64 = n.abs.iter().map(|p| p.weight).sum();
            assert!((s - n.a_s).abs() < 1e-9, "x={}", n.x);
            assert!((s + a - 1.0).abs() < 1e-12);
        }
        let mass: f64 = m.nodes().iter().map(|n| n.weight).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_association_leaves_nothing_for_the_abs() {
        let mut p = NetworkParams::default();
        p.radio.p_s_dbm = 49.0;
        let m = CoverageModel::new(&p, &QuadratureSpec::default()).unwrap();
        let x = m.association().full_limit(30.0) + 1.0;
        assert!(x < p.geometry.max_center_distance());
        assert_eq!(m.pc_abs_cond(Threshold::Snr(1.0), x), 0.0);
        assert_eq!(m.pc_abs_cond(Threshold::AlwaysPass, x), 0.0);
    }

    #[test]
    fn coverage_is_bounded_and_monotone() {
        let m = model();
        let thetas = [0.01, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4];
        for x in [10.0, 80.0, 150.0] {
            let node = m.center_node(x, 0.0);
            let mut prev_abs = 1.0;
            for &t in &thetas {
                let t = Threshold::Snr(t);
                let abs = node.pc_abs(t);
                assert!(abs <= prev_abs + 1e-15);
                prev_abs = abs;
                let mut prev = f64::INFINITY;
                for &t2 in &thetas {
                    let s = node.pc_sbs(t, Threshold::Snr(t2));
                    assert!(s <= prev + 1e-15 && s >= 0.0);
                    assert!(s + abs <= 1.0 + 1e-12);
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn doubling_the_nodes_changes_little() {
        let p = NetworkParams::default();
        for theta in [0.1, 1.0, 100.0, 1e4] {
            let th = CoverageThresholds::uniform(theta);
            let a = coverage_probability(&th, &p, &QuadratureSpec::default()).unwrap();
            let b = coverage_probability(&th, &p, &QuadratureSpec::default().doubled()).unwrap();
            assert!((a - b).abs() < 1e-6, "θ={theta}: {a} vs {b}");
        }
    }

    struct Conditional {
        sbs: f64,
        abs: f64,
    }

    /// Conditional drop at centre distance `x` with every link sampled.
    fn simulate_at(x: f64, theta: f64, trials: usize, seed: u64) -> Conditional {
        let p = NetworkParams::default();
        let assoc = p.association().unwrap();
        let prop = &p.propagation;
        let fading = FadingSampler::new(prop).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sbs, mut abs) = (0usize, 0usize);
        for _ in 0..trials {
            let off = p.geometry.sample_user_offset(&mut rng);
            let xi = off.phi;
            if assoc.prefers_sbs(x, off.r, xi) {
                let los_b = sample_los(&mut rng, x, prop.mu_b);
                let hb = fading.sample(&mut rng, los_b);
                let los_a = sample_los(&mut rng, off.r, prop.mu_s);
                let ha = fading.sample(&mut rng, los_a);
                let b = snr(Link::Backhaul, x, los_b, hb, &p.radio, prop).unwrap();
                let a = snr(Link::SbsAccess, off.r, los_a, ha, &p.radio, prop).unwrap();
                sbs += usize::from(b > theta && a > theta);
            } else {
                let d = distance_to_abs(x, off.r, xi);
                let los = sample_los(&mut rng, d, prop.mu_m);
                let h = fading.sample(&mut rng, los);
                abs += usize::from(snr(Link::AbsAccess, d, los, h, &p.radio, prop).unwrap() > theta);
            }
        }
        Conditional { sbs: sbs as f64 / trials as f64, abs: abs as f64 / trials as f64 }
    }

    fn within(analytic: f64, empirical: f64, n: usize) -> bool {
        let sd = (analytic * (1.0 - analytic) / n as f64).sqrt();
        (analytic - empirical).abs() <= 3.0 * sd + 1e-12
    }

    #[test]
    fn conditional_coverage_matches_simulation_at_100m() {
        let m = model();
        let n = 1_000_000;
        // θ = 1 is cleared almost surely at default powers; a harder
        // threshold probes the fading tails too.
        for (theta, seed) in [(1.0, 21), (db(40.0), 22)] {
            let sim = simulate_at(100.0, theta, n, seed);
            let t = Threshold::Snr(theta);
            let sbs = m.pc_sbs_cond(t, t, 100.0);
            let abs = m.pc_abs_cond(t, 100.0);
            assert!(within(sbs, sim.sbs, n), "θ={theta} sbs {sbs} vs {}", sim.sbs);
            assert!(within(abs, sim.abs, n), "θ={theta} abs {abs} vs {}", sim.abs);
        }
    }

    #[test]
    fn conditional_coverage_over_a_grid() {
        let m = model();
        let n = 100_000;
        let mut seed = 100;
        for x in [20.0, 60.0, 100.0, 140.0, 165.0] {
            for theta_db in [0.0, 20.0, 30.0, 40.0, 50.0] {
                seed += 1;
                let theta = db(theta_db);
                let sim = simulate_at(x, theta, n, seed);
                let t = Threshold::Snr(theta);
                let total = m.pc_sbs_cond(t, t, x) + m.pc_abs_cond(t, x);
                let sd = (total * (1.0 - total) / n as f64).sqrt();
                assert!((total - sim.sbs - sim.abs).abs() < (3.0 * sd).max(0.01), "x={x} θ={theta_db} dB");
            }
        }
    }

    fn db(v: f64) -> f64 {
        10f64.powf(v / 10.0)
    }

    #[test]
    fn snr_cdfs_are_monotone_with_proper_limits() {
        let p = NetworkParams::default();
        let grid: Vec<f64> = (-4..=16).map(|i| db(5.0 * i as f64)).collect();
        let c = snr_cdf_curves(&grid, &p, &QuadratureSpec::sweep()).unwrap();
        for curve in [&c.abs, &c.sbs] {
            assert!(curve.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        }
        let edge = snr_cdf_curves(&[0.0, 1e30], &p, &QuadratureSpec::sweep()).unwrap();
        assert_eq!(edge.abs[0], 0.0);
        assert_eq!(edge.sbs[0], 0.0);
        assert!(edge.abs[1] > 1.0 - 1e-9 && edge.sbs[1] > 1.0 - 1e-9);
    }
}
