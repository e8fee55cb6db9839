//! Run configuration: a flat JSON object whose omitted keys take the
//! reference-scenario defaults.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use iabrate::analysis::EtaGrid;
use iabrate::channel::{PropagationParams, RadioParams};
use iabrate::geometry::CellGeometry;
use iabrate::load::UserCountModel;
use iabrate::params::NetworkParams;
use iabrate::quadrature::QuadratureSpec;
use iabrate::rate::{Mode, PartitionStrategy, RateQuery};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Equal,
    #[serde(alias = "instantaneous")]
    #[value(alias = "instantaneous")]
    Inst,
    #[serde(alias = "average")]
    #[value(alias = "average")]
    Avg,
}

impl From<StrategyName> for PartitionStrategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Equal => PartitionStrategy::Equal,
            StrategyName::Inst => PartitionStrategy::Instantaneous,
            StrategyName::Avg => PartitionStrategy::Average,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    Approx,
}

impl From<ModeName> for Mode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Exact => Mode::Exact,
            ModeName::Approx => Mode::MeanLoadApprox,
        }
    }
}

/// How many users a hotspot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    /// Exactly `m_bar` users per hotspot.
    Fixed,
    /// Poisson with mean `m_bar`.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p_m_dbm: f64,
    pub p_s_dbm: f64,
    pub alpha_los: f64,
    pub alpha_nlos: f64,
    pub beta_db: f64,
    pub gain_db: f64,
    /// LOS range constant shared by every link, metres.
    pub mu: f64,
    pub m_los: f64,
    pub m_nlos: f64,
    pub r_cell: f64,
    pub r_hotspot: f64,
    pub n_hotspots: usize,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Pins the noise power instead of deriving it from the bandwidth.
    pub noise_power_dbm: Option<f64>,
    pub alpha_assoc: f64,

    pub m_bar: f64,
    pub case: CaseName,
    /// Target rate, bit/s.
    pub rho: f64,
    pub eta: f64,
    pub strategy: StrategyName,
    pub mode: ModeName,

    pub trials: usize,
    pub seed: u64,

    pub eta_step: f64,
    pub eta_max: f64,
    pub eta_refine: bool,
    pub theta_db_min: f64,
    pub theta_db_max: f64,
    pub theta_points: usize,
    pub m_bar_min: u32,
    pub m_bar_max: u32,
    pub epsilon: f64,
    /// Bandwidths for `critical-load`; empty means `[bandwidth_hz]`.
    pub bandwidths_hz: Vec<f64>,
    /// Keep the noise power of `bandwidth_hz` when other bandwidths are
    /// evaluated.
    pub freeze_noise: bool,

    pub nodes_u: usize,
    pub nodes_xi: usize,
    pub nodes_x: usize,
    pub nodes_t: usize,
    pub gauss_trunc_sigmas: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = CellGeometry::default();
        let radio = RadioParams::default();
        let prop = PropagationParams::default();
        let quad = QuadratureSpec::sweep();
        let grid = EtaGrid::default();
        Self {
            p_m_dbm: radio.p_m_dbm,
            p_s_dbm: radio.p_s_dbm,
            alpha_los: prop.alpha_los,
            alpha_nlos: prop.alpha_nlos,
            beta_db: prop.beta_db,
            gain_db: prop.gain_db,
            mu: prop.mu_m,
            m_los: prop.m_los,
            m_nlos: prop.m_nlos,
            r_cell: geometry.r_cell,
            r_hotspot: geometry.r_hotspot,
            n_hotspots: geometry.n_hotspots,
            bandwidth_hz: radio.bandwidth_hz,
            noise_psd_dbm_hz: radio.noise_psd_dbm_hz,
            noise_figure_db: radio.noise_figure_db,
            noise_power_dbm: radio.noise_power_dbm,
            alpha_assoc: NetworkParams::default().alpha_assoc,
            m_bar: 5.0,
            case: CaseName::Fixed,
            rho: 50e6,
            eta: 0.4,
            strategy: StrategyName::Inst,
            mode: ModeName::Approx,
            trials: 100_000,
            seed: 1,
            eta_step: grid.step,
            eta_max: grid.max,
            eta_refine: grid.refine,
            theta_db_min: -20.0,
            theta_db_max: 60.0,
            theta_points: 20,
            m_bar_min: 1,
            m_bar_max: 40,
            epsilon: 1e-3,
            bandwidths_hz: Vec::new(),
            freeze_noise: false,
            nodes_u: quad.nodes_u,
            nodes_xi: quad.nodes_xi,
            nodes_x: quad.nodes_x,
            nodes_t: quad.nodes_t,
            gauss_trunc_sigmas: quad.gauss_trunc_sigmas,
        }
    }
}

impl RunConfig {
    pub fn network(&self) -> NetworkParams {
        NetworkParams {
            geometry: CellGeometry { r_cell: self.r_cell, r_hotspot: self.r_hotspot, n_hotspots: self.n_hotspots },
            radio: RadioParams {
                p_m_dbm: self.p_m_dbm,
                p_s_dbm: self.p_s_dbm,
                bandwidth_hz: self.bandwidth_hz,
                noise_psd_dbm_hz: self.noise_psd_dbm_hz,
                noise_figure_db: self.noise_figure_db,
                noise_power_dbm: self.noise_power_dbm,
            },
            propagation: PropagationParams {
                alpha_los: self.alpha_los,
                alpha_nlos: self.alpha_nlos,
                beta_db: self.beta_db,
                mu_b: self.mu,
                mu_s: self.mu,
                mu_m: self.mu,
                m_los: self.m_los,
                m_nlos: self.m_nlos,
                gain_db: self.gain_db,
            },
            alpha_assoc: self.alpha_assoc,
        }
    }

    pub fn model(&self) -> UserCountModel {
        self.model_for(self.m_bar)
    }

    pub fn model_for(&self, m_bar: f64) -> UserCountModel {
        match self.case {
            CaseName::Fixed => UserCountModel::Fixed { m_bar: m_bar.round() as u32 },
            CaseName::Poisson => UserCountModel::Poisson { m_bar },
        }
    }

    pub fn query(&self) -> RateQuery {
        RateQuery::new(self.rho, self.strategy.into(), self.eta, self.model(), self.mode.into())
    }

    pub fn grid(&self) -> EtaGrid {
        EtaGrid { step: self.eta_step, max: self.eta_max, refine: self.eta_refine }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            nodes_u: self.nodes_u,
            nodes_xi: self.nodes_xi,
            nodes_x: self.nodes_x,
            nodes_t: self.nodes_t,
            gauss_trunc_sigmas: self.gauss_trunc_sigmas,
        }
    }

    /// Evenly spaced SNR thresholds in dB.
    pub fn theta_db_grid(&self) -> Vec<f64> {
        let n = self.theta_points;
        if n == 1 {
            return vec![self.theta_db_min];
        }
        let step = (self.theta_db_max - self.theta_db_min) / (n - 1) as f64;
        (0..n).map(|i| self.theta_db_min + step * i as f64).collect()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        if self.bandwidths_hz.is_empty() {
            vec![self.bandwidth_hz]
        } else {
            self.bandwidths_hz.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |msg: String| Err(CliError::Invalid(msg));
        if !(0.0..1.0).contains(&self.eta) {
            return invalid(format!("eta must lie in [0, 1), got {}", self.eta));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return invalid(format!("rho must be finite and nonnegative, got {}", self.rho));
        }
        if !(self.m_bar > 0.0 && self.m_bar.is_finite()) {
            return invalid(format!("m_bar must be positive, got {}", self.m_bar));
        }
        if self.case == CaseName::Fixed && self.m_bar.fract() != 0.0 {
            return invalid(format!("m_bar must be an integer for the fixed case, got {}", self.m_bar));
        }
        if self.trials == 0 {
            return invalid("trials must be positive".into());
        }
        if self.theta_points == 0 || !(self.theta_db_max >= self.theta_db_min) {
            return invalid("theta grid needs at least one point and theta_db_min <= theta_db_max".into());
        }
        if self.m_bar_min == 0 || self.m_bar_min > self.m_bar_max {
            return invalid("m_bar range must satisfy 1 <= m_bar_min <= m_bar_max".into());
        }
        if !(self.epsilon >= 0.0) {
            return invalid(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if let Some(w) = self.bandwidths_hz.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return invalid(format!("bandwidths must be positive, got {w}"));
        }
        self.network().validate()?;
        self.grid().validate()?;
        self.quadrature().validate()?;
        self.query().validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Parses a config from JSON text. A run manifest is accepted too, in
/// which case its embedded config is used.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let value = match value {
        serde_json::Value::Object(mut map) if map.contains_key("config_hash") => {
            map.remove("config").ok_or_else(|| CliError::Parse("manifest has no config".into()))?
        }
        v => v,
    };
    serde_json::from_value(value).map_err(|e| CliError::Parse(e.to_string()))
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.network(), NetworkParams::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = parse_config(r#"{"etaa": 0.3}"#).unwrap_err();
        assert!(matches!(err, CliError::Parse(_)));
    }

    #[test]
    fn eta_must_stay_below_one() {
        let cfg = parse_config(r#"{"eta": 1.0}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Invalid(_))));
    }

    #[test]
    fn strategy_aliases() {
        let cfg = parse_config(r#"{"strategy": "average"}"#).unwrap();
        assert_eq!(cfg.strategy, StrategyName::Avg);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..a.clone() };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
