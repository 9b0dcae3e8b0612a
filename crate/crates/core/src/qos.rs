//! Mapping of 5G QoS parameters onto satellite service classes, and latency
//! budget decomposition against orbit propagation delay.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{chain_latency, NfChain};
use crate::slice::{FiveGQos, Orbit, ServiceClass};

/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SatQosClassId {
    #[serde(rename = "RT-Conversational")]
    RtConversational,
    Streaming,
    Interactive,
    Background,
}

impl SatQosClassId {
    pub const ALL: [SatQosClassId; 4] = [
        SatQosClassId::RtConversational,
        SatQosClassId::Streaming,
        SatQosClassId::Interactive,
        SatQosClassId::Background,
    ];
}

impl fmt::Display for SatQosClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SatQosClassId::RtConversational => "RT-Conversational",
            SatQosClassId::Streaming => "Streaming",
            SatQosClassId::Interactive => "Interactive",
            SatQosClassId::Background => "Background",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SatQosClass {
    pub class_id: SatQosClassId,
    pub scheduler_weight: u32,
    pub drop_precedence: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassParams {
    pub scheduler_weight: u32,
    pub drop_precedence: u8,
}

/// Per-deployment mapping table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosMapTable {
    /// Any slice with a delay budget at or below this is real-time.
    pub rt_pdb_ms: f64,
    /// Priority upper bounds for `Custom` slices: RT, Streaming, Interactive.
    pub custom_priority_thresholds: [u8; 3],
    #[serde(rename = "RT-Conversational")]
    pub rt_conversational: ClassParams,
    #[serde(rename = "Streaming")]
    pub streaming: ClassParams,
    #[serde(rename = "Interactive")]
    pub interactive: ClassParams,
    #[serde(rename = "Background")]
    pub background: ClassParams,
}

impl Default for QosMapTable {
    fn default() -> Self {
        QosMapTable {
            rt_pdb_ms: 50.0,
            custom_priority_thresholds: [32, 64, 96],
            rt_conversational: ClassParams {
                scheduler_weight: 8,
                drop_precedence: 0,
            },
            streaming: ClassParams {
                scheduler_weight: 4,
                drop_precedence: 1,
            },
            interactive: ClassParams {
                scheduler_weight: 2,
                drop_precedence: 1,
            },
            background: ClassParams {
                scheduler_weight: 1,
                drop_precedence: 2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QosConfigError {
    #[error("scheduler weights must be positive and strictly decreasing from RT-Conversational to Background")]
    WeightsNotDecreasing,
    #[error("drop precedence for {0} must be in 0..=2")]
    DropPrecedence(SatQosClassId),
    #[error("custom priority thresholds must be non-decreasing")]
    Thresholds,
    #[error("altitude for {0:?} must be finite and non-negative")]
    Altitude(Orbit),
    #[error("scheduling_ms must be finite and non-negative")]
    SchedulingMs,
}

impl QosMapTable {
    pub fn params(&self, id: SatQosClassId) -> ClassParams {
        match id {
            SatQosClassId::RtConversational => self.rt_conversational,
            SatQosClassId::Streaming => self.streaming,
            SatQosClassId::Interactive => self.interactive,
            SatQosClassId::Background => self.background,
        }
    }

    pub fn class(&self, id: SatQosClassId) -> SatQosClass {
        let p = self.params(id);
        SatQosClass {
            class_id: id,
            scheduler_weight: p.scheduler_weight,
            drop_precedence: p.drop_precedence,
        }
    }

    pub fn validate(&self) -> Result<(), QosConfigError> {
        let weights: Vec<u32> = SatQosClassId::ALL
            .iter()
            .map(|&id| self.params(id).scheduler_weight)
            .collect();
        if weights[3] == 0 || weights.windows(2).any(|w| w[0] <= w[1]) {
            return Err(QosConfigError::WeightsNotDecreasing);
        }
        for id in SatQosClassId::ALL {
            if self.params(id).drop_precedence > 2 {
                return Err(QosConfigError::DropPrecedence(id));
            }
        }
        let t = self.custom_priority_thresholds;
        if t[0] > t[1] || t[1] > t[2] {
            return Err(QosConfigError::Thresholds);
        }
        Ok(())
    }
}

/// Orbit altitudes in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Altitudes {
    #[serde(rename = "LEO")]
    pub leo_km: f64,
    #[serde(rename = "MEO")]
    pub meo_km: f64,
    #[serde(rename = "GEO")]
    pub geo_km: f64,
}

impl Default for Altitudes {
    fn default() -> Self {
        Altitudes {
            leo_km: 550.0,
            meo_km: 8000.0,
            geo_km: 35786.0,
        }
    }
}

impl Altitudes {
    pub fn for_orbit(&self, orbit: Orbit) -> f64 {
        match orbit {
            Orbit::LEO => self.leo_km,
            Orbit::MEO => self.meo_km,
            Orbit::GEO => self.geo_km,
        }
    }
}

/// One-way bent-pipe delay (ground, satellite, ground) at the sub-satellite
/// point for a given altitude.
pub fn bent_pipe_delay_ms(altitude_km: f64) -> f64 {
    2.0 * altitude_km / SPEED_OF_LIGHT_KM_S * 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub pdb_ms: f64,
    pub propagation_ms: f64,
    pub chain_ms: f64,
    pub scheduling_ms: f64,
    pub slack_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub budget: LatencyBudget,
    pub feasible: bool,
}

/// Deployment-configured QoS translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosMapper {
    pub table: QosMapTable,
    pub altitudes: Altitudes,
    /// Hub queueing and MAC allowance, ms.
    pub scheduling_ms: f64,
}

impl Default for QosMapper {
    fn default() -> Self {
        QosMapper {
            table: QosMapTable::default(),
            altitudes: Altitudes::default(),
            scheduling_ms: 10.0,
        }
    }
}

impl QosMapper {
    pub fn validate(&self) -> Result<(), QosConfigError> {
        self.table.validate()?;
        for orbit in [Orbit::LEO, Orbit::MEO, Orbit::GEO] {
            let h = self.altitudes.for_orbit(orbit);
            if !(h.is_finite() && h >= 0.0) {
                return Err(QosConfigError::Altitude(orbit));
            }
        }
        if !(self.scheduling_ms.is_finite() && self.scheduling_ms >= 0.0) {
            return Err(QosConfigError::SchedulingMs);
        }
        Ok(())
    }

    /// Total mapping of a slice's QoS onto a satellite class. mMTC always
    /// lands in Background; otherwise URLLC or a tight delay budget wins.
    pub fn map_qos(&self, qos: &FiveGQos, service_class: ServiceClass) -> SatQosClass {
        let id = self.map_class_id(qos, service_class);
        self.table.class(id)
    }

    fn map_class_id(&self, qos: &FiveGQos, service_class: ServiceClass) -> SatQosClassId {
        use SatQosClassId::*;
        if service_class == ServiceClass::MMTC {
            return Background;
        }
        if service_class == ServiceClass::URLLC || qos.pdb_ms <= self.table.rt_pdb_ms {
            return RtConversational;
        }
        match service_class {
            ServiceClass::EMBB if !qos.gbr_mbps.is_zero() => Streaming,
            ServiceClass::EMBB => Interactive,
            _ => {
                let [rt, st, it] = self.table.custom_priority_thresholds;
                match qos.priority {
                    p if p <= rt => RtConversational,
                    p if p <= st => Streaming,
                    p if p <= it => Interactive,
                    _ => Background,
                }
            }
        }
    }

    pub fn propagation_delay_ms(&self, orbit: Orbit) -> f64 {
        bent_pipe_delay_ms(self.altitudes.for_orbit(orbit))
    }

    pub fn latency_feasibility(&self, qos: &FiveGQos, orbit: Orbit, chain: &NfChain) -> Feasibility {
        let propagation_ms = self.propagation_delay_ms(orbit);
        let chain_ms = chain_latency(chain);
        let scheduling_ms = self.scheduling_ms;
        let slack_ms = qos.pdb_ms - (propagation_ms + chain_ms + scheduling_ms);
        Feasibility {
            budget: LatencyBudget {
                pdb_ms: qos.pdb_ms,
                propagation_ms,
                chain_ms,
                scheduling_ms,
                slack_ms,
            },
            feasible: slack_ms >= 0.0,
        }
    }
}
