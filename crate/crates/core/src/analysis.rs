//! Sweeps and searches over the bandwidth split, the target rate and the
//! hotspot population.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rate::{PartitionStrategy, RateEngine, RateQuery};

/// A uniform split grid `{0, step, …, max}` with an optional refinement
/// pass around the coarse maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaGrid {
    pub step: f64,
    pub max: f64,
    pub refine: bool,
}

impl Default for EtaGrid {
    fn default() -> Self {
        Self { step: 0.05, max: 0.95, refine: true }
    }
}

impl EtaGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(config("eta grid step must be positive"));
        }
        if !(0.0..1.0).contains(&self.max) {
            return Err(config("eta grid must stay within [0, 1)"));
        }
        Ok(())
    }

    /// Coarse grid points.
    pub fn points(&self) -> Vec<f64> {
        let n = (self.max / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| round_grid(i as f64 * self.step)).collect()
    }
}

fn round_grid(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Values of an objective over a grid and its maximizer. Ties go to the
/// smallest grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub argmax: f64,
    pub max: f64,
}

impl SweepResult {
    pub fn from_points(mut pts: Vec<(f64, f64)>) -> Result<Self> {
        if pts.is_empty() {
            return Err(config("empty grid"));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        let mut best = pts[0];
        for &p in &pts[1..] {
            if p.1 > best.1 {
                best = p;
            }
        }
        Ok(Self {
            grid: pts.iter().map(|p| p.0).collect(),
            values: pts.iter().map(|p| p.1).collect(),
            argmax: best.0,
            max: best.1,
        })
    }

    pub fn value_at(&self, x: f64) -> Option<f64> {
        self.grid.iter().position(|&g| g == x).map(|i| self.values[i])
    }
}

/// Maximizes `f` over the split grid, then once more over the two
/// midpoints next to the coarse maximizer.
pub fn sweep_eta<F>(grid: &EtaGrid, mut f: F) -> Result<SweepResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    grid.validate()?;
    let mut pts = Vec::new();
    for eta in grid.points() {
        pts.push((eta, f(eta)?));
    }
    let coarse = SweepResult::from_points(pts.clone())?;
    if grid.refine {
        let h = grid.step / 2.0;
        for eta in [coarse.argmax - h, coarse.argmax + h] {
            let eta = round_grid(eta);
            if (0.0..=grid.max).contains(&eta) {
                pts.push((eta, f(eta)?));
            }
        }
    }
    SweepResult::from_points(pts)
}

/// Rate coverage over the split grid.
pub fn optimal_eta(engine: &RateEngine, query: &RateQuery, grid: &EtaGrid) -> Result<SweepResult> {
    sweep_eta(grid, |eta| Ok(engine.rate_coverage(&query.with_eta(eta))?.total))
}

/// Quantile levels of the rate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Percentile {
    /// `ρ50`, where rate coverage is 0.5.
    Median,
    /// `ρ95`, where rate coverage is 0.95.
    Fifth,
}

impl Percentile {
    /// Rate coverage reached at the percentile rate.
    pub fn level(self) -> f64 {
        match self {
            Percentile::Median => 0.5,
            Percentile::Fifth => 0.95,
        }
    }
}

/// Result of a percentile search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileRate {
    Rate(f64),
    /// Rate coverage stays below the level even at zero rate.
    NoSolution,
}

impl PercentileRate {
    pub fn rate(self) -> Option<f64> {
        match self {
            PercentileRate::Rate(r) => Some(r),
            PercentileRate::NoSolution => None,
        }
    }
}

/// Relative width of the final bisection bracket.
pub const PERCENTILE_TOLERANCE: f64 = 1e-4;

/// Largest `ρ` whose rate coverage still reaches the percentile's level,
/// by bisection on the monotone map `ρ ↦ Pr(ρ)`.
pub fn percentile_rate(engine: &RateEngine, query: &RateQuery, which: Percentile) -> Result<PercentileRate> {
    let level = which.level();
    let pr = |rho: f64| -> Result<f64> { Ok(engine.rate_coverage(&query.with_rho(rho))?.total) };
    if pr(0.0)? < level {
        return Ok(PercentileRate::NoSolution);
    }
    let (mut lo, mut hi) = (0.0, engine.coverage().params().bandwidth());
    let mut doublings = 0;
    while pr(hi)? >= level {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(config("rate coverage does not decay with the target rate"));
        }
    }
    while hi - lo > PERCENTILE_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if pr(mid)? >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PercentileRate::Rate(0.5 * (lo + hi)))
}

/// Percentile rate over the split grid. Splits where the level is out of
/// reach count as rate 0.
pub fn percentile_sweep(
    engine: &RateEngine,
    query: &RateQuery,
    which: Percentile,
    grid: &EtaGrid,
) -> Result<SweepResult> {
    sweep_eta(grid, |eta| Ok(percentile_rate(engine, &query.with_eta(eta), which)?.rate().unwrap_or(0.0)))
}

/// Outcome of the critical-load search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalLoad {
    /// Largest `m̄` in the range where the split still beats `η = 0` by
    /// more than `ε`; `None` when even the smallest fails.
    pub m_bar: Option<f64>,
    /// `n · m̄`.
    pub total_load: Option<f64>,
    /// The gain persists up to the end of the range.
    pub at_upper_boundary: bool,
}

/// Gain of the best split over the macro-only network.
pub fn iab_gain(engine: &RateEngine, query: &RateQuery, grid: &EtaGrid) -> Result<f64> {
    let sweep = optimal_eta(engine, query, grid)?;
    let macro_only = engine.rate_coverage(&query.with_eta(0.0))?.total;
    Ok(sweep.max - macro_only)
}

/// Scans `m_bars` (ascending) and returns the last `m̄` before the first
/// one where `max_η Pr(η) ≤ Pr(0) + ε`. The gain is not monotone in `m̄`:
/// it can reappear at heavy loads once the macro-only coverage collapses,
/// so the scan stops at the first failure instead of bisecting.
pub fn critical_load(
    engine: &RateEngine,
    query: &RateQuery,
    m_bars: &[f64],
    epsilon: f64,
    grid: &EtaGrid,
) -> Result<CriticalLoad> {
    if m_bars.is_empty() {
        return Err(config("empty m_bar range"));
    }
    if m_bars.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config("m_bar range must be strictly ascending"));
    }
    let n = engine.coverage().params().geometry.n_hotspots as f64;
    let mut last_good = None;
    for &m in m_bars {
        let q = RateQuery { model: query.model.with_m_bar(m), ..*query };
        if iab_gain(engine, &q, grid)? <= epsilon {
            return Ok(CriticalLoad {
                m_bar: last_good,
                total_load: last_good.map(|m| n * m),
                at_upper_boundary: false,
            });
        }
        last_good = Some(m);
    }
    Ok(CriticalLoad { m_bar: last_good, total_load: last_good.map(|m| n * m), at_upper_boundary: true })
}

/// One row of a strategy comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: PartitionStrategy,
    pub eta_star: f64,
    pub pr_star: f64,
    /// Best median rate over the split grid.
    pub rho50: f64,
    /// Best fifth-percentile rate over the split grid.
    pub rho95: f64,
    pub eta_rho50: f64,
    pub eta_rho95: f64,
}

pub fn summarize_strategy(engine: &RateEngine, query: &RateQuery, grid: &EtaGrid) -> Result<StrategySummary> {
    let pr = optimal_eta(engine, query, grid)?;
    let r50 = percentile_sweep(engine, query, Percentile::Median, grid)?;
    let r95 = percentile_sweep(engine, query, Percentile::Fifth, grid)?;
    Ok(StrategySummary {
        strategy: query.strategy,
        eta_star: pr.argmax,
        pr_star: pr.max,
        rho50: r50.max,
        rho95: r95.max,
        eta_rho50: r50.argmax,
        eta_rho95: r95.argmax,
    })
}

/// Every strategy on a shared grid, in [`PartitionStrategy::ALL`] order.
pub fn compare_strategies(engine: &RateEngine, query: &RateQuery, grid: &EtaGrid) -> Result<Vec<StrategySummary>> {
    PartitionStrategy::ALL
        .iter()
        .map(|&s| summarize_strategy(engine, &RateQuery { strategy: s, ..*query }, grid))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CoverageModel;
    use crate::load::UserCountModel;
    use crate::params::NetworkParams;
    use crate::quadrature::QuadratureSpec;
    use crate::rate::Mode;

    fn query() -> RateQuery {
        RateQuery::new(50e6, PartitionStrategy::Instantaneous, 0.4, UserCountModel::fixed(5), Mode::MeanLoadApprox)
    }

    #[test]
    fn grid_points() {
        let g = EtaGrid::default();
        let pts = g.points();
        assert_eq!(pts.len(), 20);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[19], 0.95);
        assert_eq!(pts[7], 0.35);
        assert!(EtaGrid { max: 1.0, ..g }.validate().is_err());
        assert!(EtaGrid { step: 0.0, ..g }.validate().is_err());
    }

    #[test]
    fn sweep_refines_once_and_breaks_ties_low() {
        let g = EtaGrid::default();
        let s = sweep_eta(&g, |eta| Ok(-(eta - 0.33f64).powi(2))).unwrap();
        assert_eq!(s.grid.len(), 22);
        assert_eq!(s.argmax, 0.325);
        let flat = sweep_eta(&g, |_| Ok(1.0)).unwrap();
        assert_eq!(flat.argmax, 0.0);
        assert!(SweepResult::from_points(Vec::new()).is_err());
    }

    #[test]
    fn sweep_matches_point_evaluations() {
        let p = NetworkParams::default();
        let cov = CoverageModel::new(&p, &QuadratureSpec::sweep()).unwrap();
        let eng = RateEngine::new(&cov);
        let s = optimal_eta(&eng, &query(), &EtaGrid::default()).unwrap();
        for (&eta, &v) in s.grid.iter().zip(&s.values) {
            let direct = eng.rate_coverage(&query().with_eta(eta)).unwrap().total;
            assert!((direct - v).abs() < 1e-12);
        }
        assert!(s.argmax > 0.0 && s.argmax < 0.95);
        let zero = optimal_eta(&eng, &query().with_rho(0.0), &EtaGrid::default()).unwrap();
        assert_eq!(zero.argmax, 0.025);
    }

    #[test]
    fn percentiles_are_ordered() {
        let p = NetworkParams::default();
        let cov = CoverageModel::new(&p, &QuadratureSpec::sweep()).unwrap();
        let eng = RateEngine::new(&cov);
        let q = query();
        let r50 = percentile_rate(&eng, &q, Percentile::Median).unwrap().rate().unwrap();
        let r95 = percentile_rate(&eng, &q, Percentile::Fifth).unwrap().rate().unwrap();
        assert!(r50 > r95 && r95 > 0.0);
        let at = eng.rate_coverage(&q.with_rho(r50)).unwrap().total;
        assert!((at - 0.5).abs() < 1e-2);
        assert_eq!(percentile_rate(&eng, &q.with_eta(0.0), Percentile::Fifth).unwrap(), PercentileRate::NoSolution);
    }

    #[test]
    fn critical_load_flags_the_boundary() {
        let p = NetworkParams::default().with_bandwidth(5e9).with_frozen_noise();
        let cov = CoverageModel::new(&p, &QuadratureSpec::sweep()).unwrap();
        let eng = RateEngine::new(&cov);
        let c = critical_load(&eng, &query(), &[1.0, 2.0, 3.0], 1e-3, &EtaGrid::default()).unwrap();
        assert!(c.at_upper_boundary);
        assert_eq!(c.m_bar, Some(3.0));
        assert!(critical_load(&eng, &query(), &[3.0, 2.0], 1e-3, &EtaGrid::default()).is_err());
    }
}
