//! Deterministic packet-level emulation of the sliced forward link.
//!
//! Each active slice gets one policed FIFO per covered beam: a two-rate
//! token bucket tags packets as guaranteed (within GBR), excess (between
//! GBR and MBR) or drops them (above MBR). Beam servers serve guaranteed
//! heads first, then share the residual among excess heads in proportion to
//! the slices' scheduler weights. Unclassified traffic lands in a
//! best-effort queue per beam. Time is integer nanoseconds and all
//! randomness comes from the scenario seed, so identical inputs give
//! identical reports.

mod engine;
mod scenario;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{RuleTable, DEFAULT_SLICE};
use crate::composer::chain_latency;
use crate::pool::ResourcePool;
use crate::qos::{QosMapper, SatQosClassId};
use crate::slice::{LifecycleState, SliceInstance};
use crate::units::Rate;

pub use engine::run_scenario;
pub use scenario::{ArrivalPattern, Scenario, ScenarioError, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmulatorSettings {
    /// Token bucket depth expressed as time at the bucket's rate.
    pub burst_ms: f64,
    /// Per-queue bound in packets.
    pub queue_bound: usize,
    pub default_packet_bytes: u32,
    /// Width of the beam utilization bins.
    pub bin_s: f64,
}

impl Default for EmulatorSettings {
    fn default() -> Self {
        EmulatorSettings {
            burst_ms: 50.0,
            queue_bound: 100,
            default_packet_bytes: 1250,
            bin_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamServer {
    pub beam_id: String,
    pub capacity: Rate,
}

/// Policer and queue of one slice on one beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceQueue {
    pub slice_id: String,
    pub beam: usize,
    /// `None` for the best-effort queue, which is unpoliced.
    pub gbr: Option<Rate>,
    pub mbr: Option<Rate>,
    pub weight: u32,
    /// Propagation plus gateway chain latency added at egress.
    pub egress_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatedNetwork {
    pub beams: Vec<BeamServer>,
    pub queues: Vec<SliceQueue>,
    pub ingress: RuleTable,
    pub propagation_ms: f64,
    pub settings: EmulatorSettings,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmulatorError {
    #[error("slice {0} is active but has no allocation or chain")]
    InconsistentState(String),
}

impl EmulatedNetwork {
    /// Queue for `slice_id` on `beam` (or its first covered beam).
    pub(crate) fn queue_for(&self, slice_id: &str, beam: Option<&str>) -> Option<usize> {
        let mut candidates = self.queues.iter().enumerate().filter(|(_, q)| q.slice_id == slice_id);
        let first = candidates.clone().next().map(|(i, _)| i);
        match beam {
            Some(b) => candidates
                .find(|(_, q)| self.beams[q.beam].beam_id == b)
                .map(|(i, _)| i)
                .or(first),
            None => first,
        }
    }

    pub fn slice_queues(&self) -> impl Iterator<Item = &SliceQueue> {
        self.queues.iter().filter(|q| q.gbr.is_some())
    }
}

/// Builds the emulated forward link for every `Active` slice in `slices`.
pub fn build_network(
    slices: &[SliceInstance],
    pool: &ResourcePool,
    ingress: &RuleTable,
    mapper: &QosMapper,
    settings: &EmulatorSettings,
) -> Result<EmulatedNetwork, EmulatorError> {
    let propagation_ms = mapper.propagation_delay_ms(pool.orbit);
    let beams: Vec<BeamServer> = pool
        .beams
        .iter()
        .map(|b| BeamServer {
            beam_id: b.beam_id.clone(),
            capacity: b.fwd_capacity_mbps,
        })
        .collect();
    let mut queues = Vec::new();
    for inst in slices.iter().filter(|s| s.state == LifecycleState::Active) {
        let (Some(allocation), Some(chain)) = (&inst.allocation, &inst.chain) else {
            return Err(EmulatorError::InconsistentState(inst.slice_id().to_string()));
        };
        let class = inst
            .qos_class
            .unwrap_or_else(|| mapper.map_qos(&inst.profile.qos, inst.profile.service_class));
        for (beam_id, res) in &allocation.beams {
            let beam = beams
                .iter()
                .position(|b| &b.beam_id == beam_id)
                .ok_or_else(|| EmulatorError::InconsistentState(inst.slice_id().to_string()))?;
            queues.push(SliceQueue {
                slice_id: inst.slice_id().to_string(),
                beam,
                gbr: Some(res.fwd.gbr),
                mbr: Some(res.fwd.mbr),
                weight: class.scheduler_weight,
                egress_delay_ms: propagation_ms + chain_latency(chain),
            });
        }
    }
    let best_effort = mapper.table.class(SatQosClassId::Background).scheduler_weight;
    for beam in 0..beams.len() {
        queues.push(SliceQueue {
            slice_id: DEFAULT_SLICE.to_string(),
            beam,
            gbr: None,
            mbr: None,
            weight: best_effort,
            egress_delay_ms: propagation_ms,
        });
    }
    Ok(EmulatedNetwork {
        beams,
        queues,
        ingress: ingress.clone(),
        propagation_ms,
        settings: *settings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub offered_mbps: f64,
    pub carried_mbps: f64,
    pub mean_delay_ms: f64,
    pub p99_delay_ms: f64,
    pub loss_ratio: f64,
    pub packets_offered: u64,
    pub packets_carried: u64,
    pub packets_dropped: u64,
    pub packets_in_flight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSeries {
    pub bin_s: f64,
    pub utilization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub duration_s: f64,
    pub seed: u64,
    pub propagation_ms: f64,
    pub slices: BTreeMap<String, SliceMetrics>,
    pub beams: BTreeMap<String, BeamSeries>,
}

impl MetricsReport {
    /// Per-beam utilization time series as CSV.
    pub fn beam_csv(&self) -> String {
        let mut out = String::from("beam_id,bin_start_s,utilization\n");
        for (id, series) in &self.beams {
            for (i, u) in series.utilization.iter().enumerate() {
                let _ = writeln!(out, "{id},{},{u}", i as f64 * series.bin_s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationVerdict {
    pub passed: bool,
    pub offered_mbps: f64,
    pub carried_mbps: f64,
    pub gbr_mbps: f64,
    /// `min(offered, gbr) * (1 - tol)`.
    pub required_mbps: f64,
}

/// A slice passes when it carried at least `min(offered, gbr)` up to the
/// relative tolerance `tol`, whatever the other slices did.
pub fn verify_isolation(
    report: &MetricsReport,
    slices: &[SliceInstance],
    tol: f64,
) -> BTreeMap<String, IsolationVerdict> {
    slices
        .iter()
        .filter(|s| s.state == LifecycleState::Active)
        .map(|s| {
            let gbr_mbps = s.profile.qos.gbr_mbps.mbps();
            let (offered_mbps, carried_mbps) = report
                .slices
                .get(s.slice_id())
                .map(|m| (m.offered_mbps, m.carried_mbps))
                .unwrap_or((0.0, 0.0));
            let required_mbps = offered_mbps.min(gbr_mbps) * (1.0 - tol);
            (
                s.slice_id().to_string(),
                IsolationVerdict {
                    passed: carried_mbps >= required_mbps,
                    offered_mbps,
                    carried_mbps,
                    gbr_mbps,
                    required_mbps,
                },
            )
        })
        .collect()
}
