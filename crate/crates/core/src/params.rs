use serde::{Deserialize, Serialize};

use crate::channel::{PropagationParams, RadioParams};
use crate::error::{config, Result};
use crate::geometry::{AssociationParams, CellGeometry};

/// Every physical and system constant of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub geometry: CellGeometry,
    pub radio: RadioParams,
    pub propagation: PropagationParams,
    /// Pathloss exponent of the sub-6 GHz paging signals used for
    /// association.
    pub alpha_assoc: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            geometry: CellGeometry::default(),
            radio: RadioParams::default(),
            propagation: PropagationParams::default(),
            alpha_assoc: 3.3,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.radio.validate()?;
        self.propagation.validate()?;
        self.association().map(|_| ())
    }

    pub fn association(&self) -> Result<AssociationParams> {
        if !(self.alpha_assoc > 0.0) {
            return Err(config("alpha_assoc must be positive"));
        }
        AssociationParams::from_powers(self.radio.p_m_dbm, self.radio.p_s_dbm, self.alpha_assoc)
    }

    pub fn bandwidth(&self) -> f64 {
        self.radio.bandwidth_hz
    }

    /// Copy with the system bandwidth replaced.
    pub fn with_bandwidth(mut self, hz: f64) -> Self {
        self.radio.bandwidth_hz = hz;
        self
    }

    /// Copy with the noise power pinned at its current value, so that later
    /// bandwidth changes leave every SNR untouched.
    pub fn with_frozen_noise(mut self) -> Self {
        self.radio.noise_power_dbm = Some(self.radio.noise_power_dbm());
        self
    }

    /// Copy with one LOS range constant shared by all three links.
    pub fn with_blockage_range(mut self, mu: f64) -> Self {
        self.propagation.mu_b = mu;
        self.propagation.mu_s = mu;
        self.propagation.mu_m = mu;
        self
    }
}
