//! Northbound request and response documents.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use s3_core::classifier::{ClassifierRule, PrefixPair, Snssai, StitchPoint};
use s3_core::pool::Allocation;
use s3_core::qos::SatQosClassId;
use s3_core::slice::{FiveGQos, LifecycleState, SliceInstance, SliceMode, SliceProfile};
use s3_core::Rate;

/// Identifiers an integrated-mode slice is stitched with.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stitching {
    pub ran_edge_ids: Vec<String>,
    pub cn_edge_ids: Vec<String>,
    pub snssai: Option<Snssai>,
    pub qfis: BTreeSet<u8>,
}

/// Allocate request for the satellite slice subnet of an end-to-end slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NssiRequest {
    pub profile: SliceProfile,
    pub e2e_slice_ref: String,
    #[serde(default)]
    pub stitching: Stitching,
}

/// Create request for a satellite-only slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandaloneRequest {
    pub profile: SliceProfile,
    #[serde(default)]
    pub prefixes: Vec<PrefixPair>,
}

/// Partial QoS update; absent fields keep their current value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosDelta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gbr_mbps: Option<Rate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mbr_mbps: Option<Rate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pdb_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priority: Option<u8>,
}

impl QosDelta {
    pub fn is_empty(&self) -> bool {
        *self == QosDelta::default()
    }

    pub fn apply(&self, qos: &FiveGQos) -> FiveGQos {
        FiveGQos {
            gbr_mbps: self.gbr_mbps.unwrap_or(qos.gbr_mbps),
            mbr_mbps: self.mbr_mbps.unwrap_or(qos.mbr_mbps),
            pdb_ms: self.pdb_ms.unwrap_or(qos.pdb_ms),
            per: self.per.unwrap_or(qos.per),
            priority: self.priority.unwrap_or(qos.priority),
        }
    }
}

/// Where a standalone tenant hands traffic to the slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEndpoint {
    pub terminal_edge: String,
    pub hub_edge: String,
    pub prefixes: Vec<PrefixPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceResponse {
    pub slice_id: String,
    pub state: LifecycleState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qos_class: Option<SatQosClassId>,
    pub qos: FiveGQos,
    pub chain: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Allocation>,
    pub rules: Vec<ClassifierRule>,
    pub stitch_points: Vec<StitchPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub service_endpoint: Option<ServiceEndpoint>,
}

/// One line of the inventory listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice_id: String,
    pub mode: SliceMode,
    pub state: LifecycleState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qos_class: Option<SatQosClassId>,
    pub gbr_mbps: Rate,
    pub mbr_mbps: Rate,
    pub beams: Vec<String>,
    pub epoch: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

impl From<&SliceInstance> for SliceSummary {
    fn from(s: &SliceInstance) -> Self {
        SliceSummary {
            slice_id: s.profile.slice_id.clone(),
            mode: s.profile.mode,
            state: s.state,
            qos_class: s.qos_class.map(|c| c.class_id),
            gbr_mbps: s.profile.qos.gbr_mbps,
            mbr_mbps: s.profile.qos.mbr_mbps,
            beams: s.profile.coverage_beams.iter().cloned().collect(),
            epoch: s.epoch,
            failure_reason: s.failure_reason.clone(),
        }
    }
}
