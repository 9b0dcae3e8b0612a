//! Slice domain types and the lifecycle state machine.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierRule, PrefixPair, Snssai};
use crate::composer::NfChain;
use crate::pool::Allocation;
use crate::qos::SatQosClass;
use crate::units::Rate;

/// Logical, monotonically increasing clock value assigned by the owning service.
pub type Timestamp = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SliceMode {
    Integrated,
    Standalone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ServiceClass {
    EMBB,
    URLLC,
    MMTC,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Isolation {
    Soft,
    Hard,
}

/// How much of the infrastructure a tenant may drive through the API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TenantControl {
    Managed,
    SharedControl,
    FullControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Orbit {
    LEO,
    MEO,
    GEO,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrbitPreference {
    LEO,
    MEO,
    GEO,
    Any,
}

/// 5G QoS characteristics carried across the management API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveGQos {
    pub gbr_mbps: Rate,
    pub mbr_mbps: Rate,
    /// Packet delay budget in milliseconds.
    pub pdb_ms: f64,
    /// Packet error rate target.
    pub per: f64,
    /// 1..=127, lower is more important.
    pub priority: u8,
}

/// Return-link (terminal to hub) demand. When a profile omits it the pool
/// reserves a tenth of the forward demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDemand {
    pub gbr_mbps: Rate,
    pub mbr_mbps: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub slice_id: String,
    pub mode: SliceMode,
    pub service_class: ServiceClass,
    pub qos: FiveGQos,
    pub isolation: Isolation,
    pub tenant_control: TenantControl,
    pub orbit_preference: OrbitPreference,
    pub coverage_beams: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_link: Option<LinkDemand>,
    #[serde(default)]
    pub notes: String,
}

impl SliceProfile {
    /// Forward and return demand as `(gbr, mbr)` pairs.
    pub fn link_demand(&self) -> ((Rate, Rate), (Rate, Rate)) {
        let fwd = (self.qos.gbr_mbps, self.qos.mbr_mbps);
        let rtn = match &self.return_link {
            Some(rl) => (rl.gbr_mbps, rl.mbr_mbps),
            None => (fwd.0.tenth(), fwd.1.tenth()),
        };
        (fwd, rtn)
    }
}

/// Identifiers a slice is stitched with at the subnet boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum Attachment {
    Integrated {
        e2e_slice_ref: String,
        #[serde(default)]
        ran_edge_ids: Vec<String>,
        #[serde(default)]
        cn_edge_ids: Vec<String>,
        snssai: Option<Snssai>,
        #[serde(default)]
        qfis: BTreeSet<u8>,
    },
    Standalone {
        prefixes: Vec<PrefixPair>,
    },
}

impl Attachment {
    pub fn mode(&self) -> SliceMode {
        match self {
            Attachment::Integrated { .. } => SliceMode::Integrated,
            Attachment::Standalone { .. } => SliceMode::Standalone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleState {
    Pending,
    Preparing,
    Instantiating,
    Active,
    Modifying,
    Deactivated,
    Terminating,
    Terminated,
    Failed,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 9] = [
        LifecycleState::Pending,
        LifecycleState::Preparing,
        LifecycleState::Instantiating,
        LifecycleState::Active,
        LifecycleState::Modifying,
        LifecycleState::Deactivated,
        LifecycleState::Terminating,
        LifecycleState::Terminated,
        LifecycleState::Failed,
    ];

    pub fn is_absorbing(self) -> bool {
        matches!(self, LifecycleState::Terminated | LifecycleState::Failed)
    }

    /// States in which a slice holds no reservation.
    pub fn forbids_allocation(self) -> bool {
        matches!(
            self,
            LifecycleState::Pending | LifecycleState::Terminated | LifecycleState::Failed
        )
    }

    /// Slice rules are part of the classifier tables in these states.
    pub fn carries_traffic(self) -> bool {
        matches!(
            self,
            LifecycleState::Instantiating | LifecycleState::Active | LifecycleState::Modifying
        )
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleEvent {
    Prepare,
    Instantiate,
    ActivateDone,
    Modify,
    ModifyDone,
    Deactivate,
    Reactivate,
    Terminate,
    TerminateDone,
    Fail,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 10] = [
        LifecycleEvent::Prepare,
        LifecycleEvent::Instantiate,
        LifecycleEvent::ActivateDone,
        LifecycleEvent::Modify,
        LifecycleEvent::ModifyDone,
        LifecycleEvent::Deactivate,
        LifecycleEvent::Reactivate,
        LifecycleEvent::Terminate,
        LifecycleEvent::TerminateDone,
        LifecycleEvent::Fail,
    ];
}

/// The lifecycle transition table. `None` means the pair is illegal.
pub fn next_state(state: LifecycleState, event: LifecycleEvent) -> Option<LifecycleState> {
    use LifecycleEvent as E;
    use LifecycleState as S;
    match (state, event) {
        (S::Pending, E::Prepare) => Some(S::Preparing),
        (S::Preparing, E::Instantiate) => Some(S::Instantiating),
        (S::Instantiating, E::ActivateDone) => Some(S::Active),
        (S::Active, E::Modify) => Some(S::Modifying),
        (S::Modifying, E::ModifyDone) => Some(S::Active),
        (S::Active, E::Deactivate) => Some(S::Deactivated),
        (S::Deactivated, E::Reactivate) => Some(S::Active),
        (S::Active | S::Deactivated, E::Terminate) => Some(S::Terminating),
        (S::Terminating, E::TerminateDone) => Some(S::Terminated),
        (s, E::Fail) if !s.is_absorbing() => Some(S::Failed),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("illegal transition: {event:?} in state {state}")]
    IllegalTransition {
        state: LifecycleState,
        event: LifecycleEvent,
    },
    #[error("cannot enter {target} without an allocation and a composed chain")]
    MissingResources { target: LifecycleState },
}

/// A live slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceInstance {
    pub profile: SliceProfile,
    pub attachment: Attachment,
    pub state: LifecycleState,
    pub allocation: Option<Allocation>,
    pub chain: Option<NfChain>,
    pub qos_class: Option<SatQosClass>,
    pub rules: Vec<ClassifierRule>,
    /// Reservation generation; bumped by every committed modification.
    pub epoch: u32,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    pub failure_reason: Option<String>,
}

impl SliceInstance {
    pub fn new(profile: SliceProfile, attachment: Attachment, now: Timestamp) -> Self {
        SliceInstance {
            profile,
            attachment,
            state: LifecycleState::Pending,
            allocation: None,
            chain: None,
            qos_class: None,
            rules: Vec::new(),
            epoch: 0,
            created_at: now,
            updated_at: now,
            failure_reason: None,
        }
    }

    pub fn slice_id(&self) -> &str {
        &self.profile.slice_id
    }

    /// Applies `event`, returning the updated instance. Entering a state that
    /// forbids reservations drops the allocation record; the caller is
    /// responsible for having released it from the pool first.
    pub fn transition(
        &self,
        event: LifecycleEvent,
        now: Timestamp,
    ) -> Result<SliceInstance, TransitionError> {
        let target = next_state(self.state, event).ok_or(TransitionError::IllegalTransition {
            state: self.state,
            event,
        })?;
        if target == LifecycleState::Active && (self.allocation.is_none() || self.chain.is_none())
        {
            return Err(TransitionError::MissingResources { target });
        }
        let mut next = self.clone();
        next.state = target;
        next.updated_at = now.max(self.updated_at);
        if target.forbids_allocation() {
            next.allocation = None;
            next.rules.clear();
        }
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptySliceId,
    NoBeams,
    MbrLtGbr,
    PdbNotPositive,
    PerOutOfRange,
    PriorityOutOfRange,
    ReturnMbrLtGbr,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptySliceId => "EMPTY_SLICE_ID",
            ViolationCode::NoBeams => "NO_BEAMS",
            ViolationCode::MbrLtGbr => "MBR_LT_GBR",
            ViolationCode::PdbNotPositive => "PDB_NOT_POSITIVE",
            ViolationCode::PerOutOfRange => "PER_OUT_OF_RANGE",
            ViolationCode::PriorityOutOfRange => "PRIORITY_OUT_OF_RANGE",
            ViolationCode::ReturnMbrLtGbr => "RETURN_MBR_LT_GBR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

/// Outcome of [`validate_profile`]; empty means the profile is well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, code: ViolationCode, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }
}

/// Checks every profile-local invariant. Uniqueness of the id and the
/// presence of stitching identifiers are checked by the service, which owns
/// the inventory and the request envelope.
pub fn validate_profile(profile: &SliceProfile) -> ValidationReport {
    let mut report = ValidationReport::default();
    if profile.slice_id.trim().is_empty() {
        report.push(ViolationCode::EmptySliceId, "slice_id must be non-empty");
    }
    if profile.coverage_beams.is_empty() {
        report.push(ViolationCode::NoBeams, "coverage_beams must name at least one beam");
    }
    let qos = &profile.qos;
    if qos.mbr_mbps < qos.gbr_mbps {
        report.push(
            ViolationCode::MbrLtGbr,
            format!("mbr {} is below gbr {}", qos.mbr_mbps, qos.gbr_mbps),
        );
    }
    if !(qos.pdb_ms.is_finite() && qos.pdb_ms > 0.0) {
        report.push(ViolationCode::PdbNotPositive, format!("pdb_ms {} must be > 0", qos.pdb_ms));
    }
    if !(qos.per > 0.0 && qos.per <= 1.0) {
        report.push(ViolationCode::PerOutOfRange, format!("per {} must be in (0, 1]", qos.per));
    }
    if !(1..=127).contains(&qos.priority) {
        report.push(
            ViolationCode::PriorityOutOfRange,
            format!("priority {} must be in 1..=127", qos.priority),
        );
    }
    if let Some(rl) = &profile.return_link {
        if rl.mbr_mbps < rl.gbr_mbps {
            report.push(
                ViolationCode::ReturnMbrLtGbr,
                format!("return mbr {} is below return gbr {}", rl.mbr_mbps, rl.gbr_mbps),
            );
        }
    }
    report
}

/// Northbound API operations subject to tenant permissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApiOperation {
    Create,
    Delete,
    Status,
    Modify,
    ScenarioRun,
    CatalogEdit,
    PoolInspect,
}

impl ApiOperation {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiOperation::Create => "create",
            ApiOperation::Delete => "delete",
            ApiOperation::Status => "status",
            ApiOperation::Modify => "modify",
            ApiOperation::ScenarioRun => "scenario-run",
            ApiOperation::CatalogEdit => "catalog-edit",
            ApiOperation::PoolInspect => "pool-inspect",
        }
    }
}

pub fn allowed_operations(level: TenantControl) -> BTreeSet<ApiOperation> {
    use ApiOperation::*;
    let mut ops: BTreeSet<ApiOperation> = [Create, Delete, Status].into();
    if level >= TenantControl::SharedControl {
        ops.extend([Modify, ScenarioRun]);
    }
    if level >= TenantControl::FullControl {
        ops.extend([CatalogEdit, PoolInspect]);
    }
    ops
}
