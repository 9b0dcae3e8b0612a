use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::FlowMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArrivalPattern {
    CBR,
    Poisson,
}

/// One traffic source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_id: Option<String>,
    /// Metadata presented to the ingress classifier.
    #[serde(default)]
    pub meta: FlowMeta,
    /// Beam to load; defaults to the first beam the target slice covers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<String>,
    pub rate_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_size_bytes: Option<u32>,
    pub pattern: ArrivalPattern,
    #[serde(default)]
    pub start_s: f64,
    pub stop_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    pub seed: u64,
    pub flows: Vec<TrafficSpec>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("duration_s must be positive and finite, got {0}")]
    Duration(f64),
    #[error("flow {index}: {problem}")]
    Flow { index: usize, problem: String },
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ScenarioError::Duration(self.duration_s));
        }
        for (index, f) in self.flows.iter().enumerate() {
            let bad = |problem: &str| {
                Err(ScenarioError::Flow {
                    index,
                    problem: problem.to_string(),
                })
            };
            if !(f.rate_mbps.is_finite() && f.rate_mbps >= 0.0) {
                return bad("rate_mbps must be non-negative");
            }
            if !(f.start_s.is_finite() && f.start_s >= 0.0) {
                return bad("start_s must be non-negative");
            }
            if !(f.stop_s.is_finite() && f.stop_s > f.start_s) {
                return bad("stop_s must exceed start_s");
            }
            if f.packet_size_bytes == Some(0) {
                return bad("packet_size_bytes must be positive");
            }
        }
        Ok(())
    }
}
