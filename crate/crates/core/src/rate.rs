//! Rate coverage under the three backhaul partition strategies.
//!
//! A user sharing a link of bandwidth `W̃` with `N − 1` others reaches
//! rate `ρ` exactly when its SNR exceeds `2^(ρN/W̃) − 1`, so every rate
//! coverage is an SNR coverage at a load-dependent threshold, averaged
//! over the load of the user's own hotspot and a Gaussian stand-in for
//! the load of the others.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Threshold;
use crate::coverage::{CenterNode, CoverageModel};
use crate::error::{config, Result};
use crate::load::{
    assoc_prob_moments, clt_params_from_moments, mean_load_for_probability, AssocMoments, CltParams, LoadPmf,
    UserCountModel,
};
use crate::quadrature::GaussLegendre;

/// How the ABS splits the backhaul bandwidth between the SBSs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// `W_b / n` to every SBS.
    Equal,
    /// In proportion to the current SBS loads.
    Instantaneous,
    /// In proportion to the mean SBS loads.
    Average,
}

impl PartitionStrategy {
    pub const ALL: [PartitionStrategy; 3] =
        [PartitionStrategy::Equal, PartitionStrategy::Instantaneous, PartitionStrategy::Average];

    pub fn name(self) -> &'static str {
        match self {
            PartitionStrategy::Equal => "equal",
            PartitionStrategy::Instantaneous => "instantaneous",
            PartitionStrategy::Average => "average",
        }
    }
}

/// Fraction `η` of the system bandwidth reserved for backhaul.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSplit {
    pub eta: f64,
}

impl BandwidthSplit {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(config(format!("eta must lie in [0, 1], got {eta}")));
        }
        Ok(Self { eta })
    }

    /// `W_b = ηW`.
    pub fn backhaul(&self, w: f64) -> f64 {
        self.eta * w
    }

    /// `W_a = (1 − η)W`.
    pub fn access(&self, w: f64) -> f64 {
        (1.0 - self.eta) * w
    }
}

/// Whether loads enter exactly or through their conditional means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MeanLoadApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    /// Target rate, bit/s.
    pub rho: f64,
    pub strategy: PartitionStrategy,
    pub split: BandwidthSplit,
    pub model: UserCountModel,
    pub mode: Mode,
}

impl RateQuery {
    pub fn new(rho: f64, strategy: PartitionStrategy, eta: f64, model: UserCountModel, mode: Mode) -> Self {
        Self { rho, strategy, split: BandwidthSplit { eta }, model, mode }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.split.eta = eta;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_strategy(mut self, strategy: PartitionStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) {
            return Err(config(format!("target rate must be nonnegative, got {}", self.rho)));
        }
        BandwidthSplit::new(self.split.eta)?;
        self.model.validate()
    }
}

/// Rate coverage and its split by serving station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub total: f64,
    pub abs: f64,
    pub sbs: f64,
}

/// Nodes and weights of `N(mean, sd²)` truncated at `±k·sd` and
/// renormalized. A zero `sd` gives the point mass at `mean`.
pub fn gaussian_points(mean: f64, sd: f64, nodes: usize, k: f64) -> Vec<(f64, f64)> {
    if !(sd > 0.0) {
        return vec![(mean, 1.0)];
    }
    let rule = GaussLegendre::new(nodes);
    let mut pts: Vec<(f64, f64)> = rule
        .points(mean - k * sd, mean + k * sd)
        .map(|(t, w)| {
            let z = (t - mean) / sd;
            (t, w * (-0.5 * z * z).exp())
        })
        .collect();
    let mass: f64 = pts.iter().map(|p| p.1).sum();
    for p in &mut pts {
        p.1 /= mass;
    }
    pts
}

/// Load of the representative hotspot: its law, or its mean as a point
/// mass.
fn own_load(mode: Mode, model: &UserCountModel, p: f64) -> Vec<(f64, f64)> {
    match mode {
        Mode::Exact => LoadPmf::for_probability(model, p)
            .iter()
            .filter(|&(_, q)| q > 0.0)
            .map(|(k, q)| (f64::from(k), q))
            .collect(),
        Mode::MeanLoadApprox => vec![(mean_load_for_probability(model, p), 1.0)],
    }
}

/// Evaluates rate coverage on the node tables of a [`CoverageModel`].
#[derive(Debug, Clone)]
pub struct RateEngine<'a> {
    cov: &'a CoverageModel,
    moments: AssocMoments,
}

impl<'a> RateEngine<'a> {
    pub fn new(cov: &'a CoverageModel) -> Self {
        let p = cov.params();
        let moments = assoc_prob_moments(cov.association(), &p.geometry, cov.quadrature());
        Self { cov, moments }
    }

    pub fn coverage(&self) -> &CoverageModel {
        self.cov
    }

    pub fn moments(&self) -> &AssocMoments {
        &self.moments
    }

    pub fn clt(&self, model: &UserCountModel) -> CltParams {
        clt_params_from_moments(model, self.cov.params().geometry.n_hotspots, &self.moments)
    }

    fn t_points(&self, mean: f64, sd: f64) -> Vec<(f64, f64)> {
        let q = self.cov.quadrature();
        gaussian_points(mean, sd, q.nodes_t, q.gauss_trunc_sigmas)
    }

    fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&CenterNode) -> f64 + Sync,
    {
        let parts: Vec<f64> = self.cov.nodes().par_iter().map(|n| n.weight * f(n)).collect();
        parts.iter().sum()
    }

    /// `P(served by the ABS, rate > ρ)`.
    pub fn rate_coverage_abs(&self, q: &RateQuery) -> Result<f64> {
        q.validate()?;
        let w_a = q.split.access(self.cov.params().bandwidth());
        if !(w_a > 0.0) {
            return Ok(0.0);
        }
        let clt = self.clt(&q.model);
        let ts = self.t_points(clt.upsilon_m, clt.sigma_m);
        Ok(self.integrate(|node| {
            own_load(q.mode, &q.model, 1.0 - node.a_s)
                .iter()
                .map(|&(k, pk)| {
                    pk * ts
                        .iter()
                        .map(|&(t, wt)| wt * node.pc_abs(Threshold::for_rate(q.rho * (t + k), w_a)))
                        .sum::<f64>()
                })
                .sum()
        }))
    }

    /// `P(served by an SBS, rate > ρ)` under the query's strategy.
    pub fn rate_coverage_sbs(&self, q: &RateQuery) -> Result<f64> {
        q.validate()?;
        let p = self.cov.params();
        let w = p.bandwidth();
        let (w_a, w_b) = (q.split.access(w), q.split.backhaul(w));
        if !(w_a > 0.0 && w_b > 0.0) {
            return Ok(0.0);
        }
        let n = p.geometry.n_hotspots as f64;
        let m_bar = q.model.m_bar();
        let others = p.geometry.n_hotspots.saturating_sub(1) as f64;
        let ts = match q.strategy {
            PartitionStrategy::Equal => vec![(0.0, 1.0)],
            PartitionStrategy::Instantaneous => {
                let clt = self.clt(&q.model);
                self.t_points(clt.upsilon_s, clt.sigma_s)
            }
            PartitionStrategy::Average => {
                self.t_points(others * self.moments.mean_sbs, (others * self.moments.var_sbs).sqrt())
            }
        };
        Ok(self.integrate(|node| {
            if node.a_s == 0.0 {
                return 0.0;
            }
            let mean = mean_load_for_probability(&q.model, node.a_s);
            own_load(q.mode, &q.model, node.a_s)
                .iter()
                .map(|&(k, pk)| {
                    let access = node.sbs_access_coverage(Threshold::for_rate(q.rho * k, w_a));
                    if access == 0.0 {
                        return 0.0;
                    }
                    let backhaul: f64 = ts
                        .iter()
                        .map(|&(t, wt)| {
                            let bits = match q.strategy {
                                PartitionStrategy::Equal => q.rho * n * k,
                                PartitionStrategy::Instantaneous => q.rho * (k + t),
                                PartitionStrategy::Average => q.rho * k * (mean + m_bar * t) / mean,
                            };
                            wt * node.backhaul_coverage(Threshold::for_rate(bits, w_b))
                        })
                        .sum();
                    pk * access * backhaul
                })
                .sum()
        }))
    }

    pub fn rate_coverage(&self, q: &RateQuery) -> Result<RateBreakdown> {
        let abs = self.rate_coverage_abs(q)?;
        let sbs = self.rate_coverage_sbs(q)?;
        Ok(RateBreakdown { total: abs + sbs, abs, sbs })
    }

    /// `max_η |Pr_exact(η) − Pr_approx(η)|` over `etas`.
    pub fn approximation_gap(&self, q: &RateQuery, etas: &[f64]) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for &eta in etas {
            let q = q.with_eta(eta);
            let exact = self.rate_coverage(&q.with_mode(Mode::Exact))?.total;
            let approx = self.rate_coverage(&q.with_mode(Mode::MeanLoadApprox))?.total;
            gap = gap.max((exact - approx).abs());
        }
        Ok(gap)
    }
}
