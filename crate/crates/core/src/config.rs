//! Deployment configuration file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::StitchTopology;
use crate::composer::{validate_catalog, CatalogError, NfDescriptor};
use crate::emulator::EmulatorSettings;
use crate::pool::{BeamSpec, HostSpec, PoolError, ResourcePool};
use crate::qos::{Altitudes, QosConfigError, QosMapTable, QosMapper};
use crate::slice::{Orbit, TenantControl};

const DEFAULT_CONFIG: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative GBR shortfall tolerated by the isolation verdict.
    pub isolation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { isolation: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub orbit: Orbit,
    #[serde(default)]
    pub altitudes_km: Altitudes,
    pub hosts: Vec<HostSpec>,
    pub beams: Vec<BeamSpec>,
    pub nf_catalog: Vec<NfDescriptor>,
    #[serde(default)]
    pub qos_map: QosMapTable,
    #[serde(default = "default_scheduling_ms")]
    pub scheduling_ms: f64,
    #[serde(default = "default_overbooking")]
    pub overbooking_mbr: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Static tenant name to control level map.
    #[serde(default)]
    pub tenants: BTreeMap<String, TenantControl>,
    #[serde(default)]
    pub emulator: EmulatorSettings,
    #[serde(default)]
    pub topology: StitchTopology,
}

fn default_scheduling_ms() -> f64 {
    10.0
}

fn default_overbooking() -> f64 {
    2.0
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Qos(#[from] QosConfigError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("{0}")]
    Invalid(String),
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig::from_json(DEFAULT_CONFIG).expect("bundled default config is valid")
    }
}

impl ServiceConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mapper().validate()?;
        validate_catalog(&self.nf_catalog)?;
        self.empty_pool()?;
        let tol = self.tolerances.isolation;
        if !(0.0..1.0).contains(&tol) {
            return Err(ConfigError::Invalid(format!("tolerances.isolation must be in [0, 1), got {tol}")));
        }
        let e = &self.emulator;
        if !(e.burst_ms.is_finite() && e.burst_ms >= 0.0) || !(e.bin_s.is_finite() && e.bin_s > 0.0) {
            return Err(ConfigError::Invalid("emulator burst_ms/bin_s out of range".into()));
        }
        if e.queue_bound == 0 || e.default_packet_bytes == 0 {
            return Err(ConfigError::Invalid("emulator queue_bound and default_packet_bytes must be positive".into()));
        }
        Ok(())
    }

    pub fn mapper(&self) -> QosMapper {
        QosMapper {
            table: self.qos_map.clone(),
            altitudes: self.altitudes_km,
            scheduling_ms: self.scheduling_ms,
        }
    }

    /// The pool inventory with nothing reserved.
    pub fn empty_pool(&self) -> Result<ResourcePool, PoolError> {
        ResourcePool::new(self.orbit, self.overbooking_mbr, &self.hosts, &self.beams)
    }
}
