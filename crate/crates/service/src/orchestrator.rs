//! The single-writer orchestrator.
//!
//! Every mutation runs the slice pipeline against staged copies of the pool
//! and inventory and commits them only after the change record has been
//! appended to the event log. A failed request therefore leaves the pool
//! exactly as it was; the only trace it can leave is the slice's own
//! `Failed` record and its events.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use s3_core::classifier::{
    compile_rules, stitch_points, ClassifierError, Mark, RuleTable, StitchPoint, DEFAULT_SLICE,
};
use s3_core::composer::{compose_chain, required_capabilities, validate_catalog, ComposeError, NfDescriptor};
use s3_core::config::ServiceConfig;
use s3_core::pool::{AdmissionDecision, PoolError, ResourcePool};
use s3_core::qos::QosMapper;
use s3_core::slice::{
    allowed_operations, validate_profile, ApiOperation, Attachment, LifecycleEvent, LifecycleState, SliceInstance,
    SliceMode, SliceProfile, TenantControl, Timestamp,
};

use crate::error::{ApiError, Stage};
use crate::requests::{NssiRequest, QosDelta, ServiceEndpoint, SliceResponse, StandaloneRequest};
use crate::store::{Store, StoreError};

/// Log records between automatic snapshots.
pub const SNAPSHOT_EVERY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Created,
    StateChanged,
    Modified,
    Deleted,
    Alarm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceEvent {
    pub slice_id: String,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub old_state: Option<LifecycleState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_state: Option<LifecycleState>,
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Change {
    /// Insert or replace one slice record.
    Slice { instance: Box<SliceInstance> },
    Catalog { catalog: Vec<NfDescriptor> },
    /// Events only; no inventory change.
    Events,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub clock: Timestamp,
    pub change: Change,
    pub events: Vec<SliceEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    pub clock: Timestamp,
    pub catalog: Vec<NfDescriptor>,
    pub slices: Vec<SliceInstance>,
    pub events: Vec<SliceEvent>,
}

/// Everything recovery must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateView {
    pub clock: Timestamp,
    pub catalog: Vec<NfDescriptor>,
    pub slices: Vec<SliceInstance>,
    pub pool: ResourcePool,
    pub rules: RuleTable,
    pub events: Vec<SliceEvent>,
}

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("replayed state is inconsistent: {0}")]
    Inconsistent(String),
}

/// Result of a successful mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub slice: SliceInstance,
    pub events: Vec<SliceEvent>,
    /// False when the call was an idempotent repeat.
    pub changed: bool,
}

/// One classifier table as installed at a stitch point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchTable {
    pub location: String,
    pub direction: Mark,
    pub table: RuleTable,
}

pub struct Orchestrator {
    config: ServiceConfig,
    mapper: QosMapper,
    catalog: Vec<NfDescriptor>,
    pool: ResourcePool,
    slices: Vec<SliceInstance>,
    rules: RuleTable,
    events: Vec<SliceEvent>,
    clock: Timestamp,
    seq: u64,
    store: Option<Store>,
    fault: Option<Stage>,
}

/// Staged result of a pipeline run, committed as a unit.
struct Staged {
    pool: ResourcePool,
    slices: Vec<SliceInstance>,
    rules: RuleTable,
}

impl Orchestrator {
    /// An orchestrator without persistence.
    pub fn new(config: ServiceConfig) -> Self {
        let pool = config.empty_pool().expect("validated config has a valid pool");
        Orchestrator {
            mapper: config.mapper(),
            catalog: config.nf_catalog.clone(),
            pool,
            slices: Vec::new(),
            rules: RuleTable::default(),
            events: Vec::new(),
            clock: 0,
            seq: 0,
            store: None,
            fault: None,
            config,
        }
    }

    /// Opens the store in `dir` and replays it.
    pub fn open(config: ServiceConfig, dir: &Path) -> Result<Self, RecoveryError> {
        let (store, recovered) = Store::open::<Snapshot, LogRecord>(dir)?;
        if recovered.truncated_bytes > 0 {
            tracing::warn!(bytes = recovered.truncated_bytes, "discarded torn log tail");
        }
        let mut orch = Orchestrator::new(config);
        if let Some(snap) = recovered.snapshot {
            orch.seq = snap.seq;
            orch.clock = snap.clock;
            orch.catalog = snap.catalog;
            orch.slices = snap.slices;
            orch.events = snap.events;
        }
        for record in recovered.records {
            if record.seq <= orch.seq {
                continue;
            }
            orch.seq = record.seq;
            orch.clock = record.clock;
            match record.change {
                Change::Slice { instance } => upsert(&mut orch.slices, *instance),
                Change::Catalog { catalog } => orch.catalog = catalog,
                Change::Events => {}
            }
            orch.events.extend(record.events);
        }
        orch.rebuild().map_err(RecoveryError::Inconsistent)?;
        orch.store = Some(store);
        Ok(orch)
    }

    /// Recomputes the pool and rule tables from the slice records.
    fn rebuild(&mut self) -> Result<(), String> {
        let mut pool = self.config.empty_pool().map_err(|e| e.to_string())?;
        for s in &self.slices {
            if let Some(a) = &s.allocation {
                pool.restore(a.clone()).map_err(|e| format!("slice {}: {e}", s.slice_id()))?;
            }
        }
        let rules = compile_rules(&self.slices).map_err(|e| e.to_string())?;
        assign_rules(&mut self.slices, &rules);
        self.pool = pool;
        self.rules = rules;
        Ok(())
    }

    /// Writes a snapshot and empties the log.
    pub fn checkpoint(&mut self) -> std::io::Result<()> {
        let snap = Snapshot {
            seq: self.seq,
            clock: self.clock,
            catalog: self.catalog.clone(),
            slices: self.slices.clone(),
            events: self.events.clone(),
        };
        match self.store.as_mut() {
            Some(store) => store.write_snapshot(&snap),
            None => Ok(()),
        }
    }

    /// Clean shutdown: checkpoint so the next start does not replay.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.checkpoint()
    }

    /// Makes the given stage fail with an internal error on every request
    /// until cleared. Used to exercise the all-or-nothing guarantees.
    pub fn inject_fault(&mut self, stage: Option<Stage>) {
        self.fault = stage;
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn mapper(&self) -> &QosMapper {
        &self.mapper
    }

    pub fn catalog(&self) -> &[NfDescriptor] {
        &self.catalog
    }

    pub fn pool(&self) -> &ResourcePool {
        &self.pool
    }

    pub fn slices(&self) -> &[SliceInstance] {
        &self.slices
    }

    pub fn slice(&self, slice_id: &str) -> Option<&SliceInstance> {
        self.slices.iter().find(|s| s.slice_id() == slice_id)
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    pub fn events(&self) -> &[SliceEvent] {
        &self.events
    }

    pub fn view(&self) -> StateView {
        StateView {
            clock: self.clock,
            catalog: self.catalog.clone(),
            slices: self.slices.clone(),
            pool: self.pool.clone(),
            rules: self.rules.clone(),
            events: self.events.clone(),
        }
    }

    /// The classifier table at every stitch point in use.
    pub fn stitch_tables(&self) -> Vec<StitchTable> {
        stitch_tables(&self.slices, &self.rules, &self.config.topology)
    }

    pub fn describe(&self, slice_id: &str) -> Option<SliceResponse> {
        self.slice(slice_id).map(|s| describe(s, &self.config.topology))
    }

    pub fn authorize(caller: TenantControl, op: ApiOperation) -> Result<(), ApiError> {
        if allowed_operations(caller).contains(&op) {
            Ok(())
        } else {
            Err(ApiError::forbidden(format!(
                "operation {} is not permitted at control level {caller:?}",
                op.as_str()
            )))
        }
    }

    fn fault_point(&self, stage: Stage) -> Result<(), ApiError> {
        if self.fault == Some(stage) {
            Err(ApiError::internal("injected fault", stage))
        } else {
            Ok(())
        }
    }

    fn tick(&mut self) -> Timestamp {
        self.clock += 1;
        self.clock
    }

    // ------------------------------------------------------------ mutations

    /// Integrated-mode allocate.
    pub fn allocate_nssi(&mut self, caller: TenantControl, req: NssiRequest) -> Result<Outcome, ApiError> {
        Self::authorize(caller, ApiOperation::Create)?;
        self.fault_point(Stage::Validate)?;
        validate_common(&req.profile, SliceMode::Integrated, &self.pool)?;
        if req.e2e_slice_ref.trim().is_empty() {
            return Err(invalid("EMPTY_E2E_SLICE_REF", "e2e_slice_ref must be non-empty"));
        }
        let Some(snssai) = req.stitching.snssai else {
            return Err(invalid("MISSING_SNSSAI", "stitching.snssai is required"));
        };
        if !snssai.is_valid() {
            return Err(invalid("INVALID_SNSSAI", "S-NSSAI SD must fit in 24 bits"));
        }
        if let Some(q) = req.stitching.qfis.iter().find(|&&q| q > 63) {
            return Err(invalid("INVALID_QFI", format!("QFI {q} is outside 0..=63")));
        }
        let attachment = Attachment::Integrated {
            e2e_slice_ref: req.e2e_slice_ref,
            ran_edge_ids: req.stitching.ran_edge_ids,
            cn_edge_ids: req.stitching.cn_edge_ids,
            snssai: Some(snssai),
            qfis: req.stitching.qfis,
        };
        self.create(req.profile, attachment)
    }

    /// Standalone-mode create.
    pub fn create_slice(&mut self, caller: TenantControl, req: StandaloneRequest) -> Result<Outcome, ApiError> {
        Self::authorize(caller, ApiOperation::Create)?;
        self.fault_point(Stage::Validate)?;
        validate_common(&req.profile, SliceMode::Standalone, &self.pool)?;
        if req.prefixes.is_empty() {
            return Err(invalid("NO_PREFIXES", "at least one terminal/hub prefix pair is required"));
        }
        self.create(req.profile, Attachment::Standalone { prefixes: req.prefixes })
    }

    fn create(&mut self, profile: SliceProfile, attachment: Attachment) -> Result<Outcome, ApiError> {
        if let Some(existing) = self.slice(&profile.slice_id) {
            if existing.state != LifecycleState::Failed {
                return Err(ApiError::conflict(
                    "DUPLICATE_SLICE_ID",
                    format!("slice {} already exists in state {}", profile.slice_id, existing.state),
                    Stage::Validate,
                ));
            }
        }
        let clock_before = self.clock;
        let now = self.tick();
        let mut inst = SliceInstance::new(profile, attachment, now);
        let mut events = vec![SliceEvent {
            slice_id: inst.slice_id().to_string(),
            kind: EventKind::Created,
            old_state: None,
            new_state: Some(inst.state),
            timestamp: now,
            detail: None,
        }];

        match self.run_create_pipeline(&mut inst, &mut events) {
            Ok(staged) => match self.persist(Change::Slice { instance: Box::new(inst.clone()) }, &events) {
                Ok(()) => {
                    self.pool = staged.pool;
                    self.slices = staged.slices;
                    self.rules = staged.rules;
                    self.events.extend(events.iter().cloned());
                    let slice = self.slice(inst.slice_id()).expect("committed").clone();
                    Ok(Outcome { slice, events, changed: true })
                }
                Err(e) => {
                    self.clock = clock_before;
                    Err(e)
                }
            },
            Err(err) => {
                // Nothing staged is kept; only the Failed record remains.
                inst.allocation = None;
                let failed = self
                    .step(&inst, LifecycleEvent::Fail, &mut events)
                    .expect("Fail is legal from every non-absorbing state");
                let mut failed = failed;
                failed.failure_reason = Some(format!("{}: {}", err.body.code, err.body.reason));
                failed.rules.clear();
                let now = self.tick();
                events.push(SliceEvent {
                    slice_id: failed.slice_id().to_string(),
                    kind: EventKind::Alarm,
                    old_state: None,
                    new_state: None,
                    timestamp: now,
                    detail: Some(format!("{} at {}", err.body.code, err.stage().map(|s| s.to_string()).unwrap_or_default())),
                });
                if let Err(e) = self.persist(Change::Slice { instance: Box::new(failed.clone()) }, &events) {
                    self.clock = clock_before;
                    return Err(e);
                }
                upsert(&mut self.slices, failed);
                self.events.extend(events);
                Err(err)
            }
        }
    }

    fn run_create_pipeline(&mut self, inst: &mut SliceInstance, events: &mut Vec<SliceEvent>) -> Result<Staged, ApiError> {
        *inst = self.step(inst, LifecycleEvent::Prepare, events)?;

        self.fault_point(Stage::MapQos)?;
        let class = self.mapper.map_qos(&inst.profile.qos, inst.profile.service_class);
        inst.qos_class = Some(class);

        self.fault_point(Stage::RequiredCapabilities)?;
        let caps = required_capabilities(&inst.profile, class.class_id);

        self.fault_point(Stage::ComposeChain)?;
        let chain = compose(&caps, &self.catalog)?;

        self.fault_point(Stage::CheckAdmission)?;
        let decision = self
            .pool
            .check_admission(&inst.profile, &chain, &self.mapper)
            .map_err(|e| pool_error(e, Stage::CheckAdmission))?;
        if let AdmissionDecision::Reject { reason, detail } = decision {
            return Err(ApiError::unprocessable(reason.code(), detail, Stage::CheckAdmission));
        }
        *inst = self.step(inst, LifecycleEvent::Instantiate, events)?;

        self.fault_point(Stage::Allocate)?;
        let mut pool = self.pool.clone();
        let allocation = pool
            .allocate(&inst.profile, &chain, inst.epoch)
            .map_err(|e| pool_error(e, Stage::Allocate))?;

        self.fault_point(Stage::PlaceChain)?;
        if chain.members.iter().any(|nf| !allocation.placement.assignments.contains_key(&nf.nf_id)) {
            return Err(ApiError::internal("placement does not cover the chain", Stage::PlaceChain));
        }
        inst.allocation = Some(allocation);
        inst.chain = Some(chain);

        self.fault_point(Stage::CompileRules)?;
        let mut slices = self.slices.clone();
        upsert(&mut slices, inst.clone());
        let rules = compile_rules(&slices).map_err(classifier_error)?;

        self.fault_point(Stage::Activate)?;
        *inst = self.step(inst, LifecycleEvent::ActivateDone, events)?;
        upsert(&mut slices, inst.clone());
        assign_rules(&mut slices, &rules);
        *inst = slices.iter().find(|s| s.slice_id() == inst.slice_id()).expect("staged").clone();

        self.fault_point(Stage::Persist)?;
        Ok(Staged { pool, slices, rules })
    }

    /// Changes the QoS of an `Active` slice. The new reservation is admitted
    /// on the delta; on any failure the slice stays `Active` with its old QoS.
    pub fn modify(&mut self, caller: TenantControl, slice_id: &str, delta: &QosDelta) -> Result<Outcome, ApiError> {
        Self::authorize(caller, ApiOperation::Modify)?;
        let current = self.slice(slice_id).ok_or_else(|| ApiError::not_found(format!("slice {slice_id}")))?.clone();
        if current.state != LifecycleState::Active {
            return Err(illegal_state(&current, "modify"));
        }
        self.fault_point(Stage::Validate)?;
        if delta.is_empty() {
            return Err(invalid("EMPTY_DELTA", "modification names no QoS field"));
        }
        let mut profile = current.profile.clone();
        profile.qos = delta.apply(&current.profile.qos);
        let report = validate_profile(&profile);
        if let Some(first) = report.violations.first() {
            return Err(invalid(first.code.as_str(), join_violations(&report)));
        }

        let clock_before = self.clock;
        let mut events = Vec::new();
        let modifying = self.step(&current, LifecycleEvent::Modify, &mut events)?;
        match self.run_modify_pipeline(&modifying, profile, &mut events) {
            Ok((next, staged)) => match self.persist(Change::Slice { instance: Box::new(next.clone()) }, &events) {
                Ok(()) => {
                    self.pool = staged.pool;
                    self.slices = staged.slices;
                    self.rules = staged.rules;
                    self.events.extend(events.iter().cloned());
                    let slice = self.slice(slice_id).expect("committed").clone();
                    Ok(Outcome { slice, events, changed: true })
                }
                Err(e) => {
                    self.clock = clock_before;
                    Err(e)
                }
            },
            Err(err) => {
                let now = self.tick();
                events.push(SliceEvent {
                    slice_id: slice_id.to_string(),
                    kind: EventKind::Alarm,
                    old_state: None,
                    new_state: None,
                    timestamp: now,
                    detail: Some(format!("modification rejected: {}", err.body.code)),
                });
                let restored = self
                    .step(&modifying, LifecycleEvent::ModifyDone, &mut events)
                    .expect("Modifying -> Active is legal");
                let persisted = self.persist(Change::Slice { instance: Box::new(restored.clone()) }, &events);
                if let Err(e) = persisted {
                    self.clock = clock_before;
                    return Err(e);
                }
                upsert(&mut self.slices, restored);
                self.events.extend(events);
                Err(err)
            }
        }
    }

    fn run_modify_pipeline(
        &mut self,
        modifying: &SliceInstance,
        profile: SliceProfile,
        events: &mut Vec<SliceEvent>,
    ) -> Result<(SliceInstance, Staged), ApiError> {
        let old_allocation = modifying.allocation.clone().ok_or_else(|| {
            ApiError::internal(format!("active slice {} has no allocation", modifying.slice_id()), Stage::Allocate)
        })?;
        self.fault_point(Stage::MapQos)?;
        let class = self.mapper.map_qos(&profile.qos, profile.service_class);
        self.fault_point(Stage::RequiredCapabilities)?;
        let caps = required_capabilities(&profile, class.class_id);
        self.fault_point(Stage::ComposeChain)?;
        let chain = compose(&caps, &self.catalog)?;
        self.fault_point(Stage::CheckAdmission)?;
        let decision = self
            .pool
            .check_readmission(&old_allocation, &profile, &chain, &self.mapper)
            .map_err(|e| pool_error(e, Stage::CheckAdmission))?;
        if let AdmissionDecision::Reject { reason, detail } = decision {
            return Err(ApiError::unprocessable(reason.code(), detail, Stage::CheckAdmission));
        }
        self.fault_point(Stage::Allocate)?;
        let mut pool = self.pool.clone();
        let allocation = pool
            .reallocate(&old_allocation, &profile, &chain)
            .map_err(|e| pool_error(e, Stage::Allocate))?;
        self.fault_point(Stage::PlaceChain)?;

        let mut next = modifying.clone();
        next.profile = profile;
        next.qos_class = Some(class);
        next.chain = Some(chain);
        next.epoch = allocation.epoch;
        next.allocation = Some(allocation);

        self.fault_point(Stage::CompileRules)?;
        let mut slices = self.slices.clone();
        upsert(&mut slices, next.clone());
        let rules = compile_rules(&slices).map_err(classifier_error)?;

        self.fault_point(Stage::Activate)?;
        let now = self.tick();
        events.push(SliceEvent {
            slice_id: next.slice_id().to_string(),
            kind: EventKind::Modified,
            old_state: None,
            new_state: None,
            timestamp: now,
            detail: Some(format!("epoch {}", next.epoch)),
        });
        next = self.step(&next, LifecycleEvent::ModifyDone, events)?;
        upsert(&mut slices, next.clone());
        assign_rules(&mut slices, &rules);
        let next = slices.iter().find(|s| s.slice_id() == next.slice_id()).expect("staged").clone();

        self.fault_point(Stage::Persist)?;
        Ok((next, Staged { pool, slices, rules }))
    }

    /// Terminates a slice and releases its reservation. Repeating the call
    /// on a `Terminated` slice is a no-op success.
    pub fn deallocate(&mut self, caller: TenantControl, slice_id: &str) -> Result<Outcome, ApiError> {
        Self::authorize(caller, ApiOperation::Delete)?;
        let current = self.slice(slice_id).ok_or_else(|| ApiError::not_found(format!("slice {slice_id}")))?.clone();
        match current.state {
            LifecycleState::Terminated => {
                return Ok(Outcome {
                    slice: current,
                    events: Vec::new(),
                    changed: false,
                })
            }
            LifecycleState::Active | LifecycleState::Deactivated => {}
            _ => return Err(illegal_state(&current, "deallocate")),
        }
        let clock_before = self.clock;
        let mut events = Vec::new();
        let result = (|| {
            let terminating = self.step(&current, LifecycleEvent::Terminate, &mut events)?;
            self.fault_point(Stage::Release)?;
            let mut pool = self.pool.clone();
            if let Some(a) = &terminating.allocation {
                pool.release(a).map_err(|e| pool_error(e, Stage::Release))?;
            }
            let done = self.step(&terminating, LifecycleEvent::TerminateDone, &mut events)?;
            self.fault_point(Stage::CompileRules)?;
            let mut slices = self.slices.clone();
            upsert(&mut slices, done.clone());
            let rules = compile_rules(&slices).map_err(classifier_error)?;
            assign_rules(&mut slices, &rules);
            let now = self.tick();
            events.push(SliceEvent {
                slice_id: slice_id.to_string(),
                kind: EventKind::Deleted,
                old_state: None,
                new_state: None,
                timestamp: now,
                detail: None,
            });
            self.fault_point(Stage::Persist)?;
            Ok::<_, ApiError>((done, Staged { pool, slices, rules }))
        })();
        let committed = result.and_then(|(done, staged)| {
            self.persist(Change::Slice { instance: Box::new(done) }, &events)?;
            Ok(staged)
        });
        match committed {
            Ok(staged) => {
                self.pool = staged.pool;
                self.slices = staged.slices;
                self.rules = staged.rules;
                self.events.extend(events.iter().cloned());
                let slice = self.slice(slice_id).expect("committed").clone();
                Ok(Outcome { slice, events, changed: true })
            }
            Err(e) => {
                self.clock = clock_before;
                Err(e)
            }
        }
    }

    /// Replaces the NF catalog used for future compositions.
    pub fn set_catalog(&mut self, caller: TenantControl, catalog: Vec<NfDescriptor>) -> Result<(), ApiError> {
        Self::authorize(caller, ApiOperation::CatalogEdit)?;
        validate_catalog(&catalog).map_err(|e| invalid("INVALID_CATALOG", e.to_string()))?;
        self.persist(Change::Catalog { catalog: catalog.clone() }, &[])?;
        self.catalog = catalog;
        Ok(())
    }

    fn step(
        &mut self,
        inst: &SliceInstance,
        event: LifecycleEvent,
        events: &mut Vec<SliceEvent>,
    ) -> Result<SliceInstance, ApiError> {
        let now = self.tick();
        let next = inst
            .transition(event, now)
            .map_err(|e| ApiError::internal(e.to_string(), Stage::Lifecycle))?;
        events.push(SliceEvent {
            slice_id: inst.slice_id().to_string(),
            kind: EventKind::StateChanged,
            old_state: Some(inst.state),
            new_state: Some(next.state),
            timestamp: now,
            detail: None,
        });
        Ok(next)
    }

    fn persist(&mut self, change: Change, events: &[SliceEvent]) -> Result<(), ApiError> {
        self.fault_point(Stage::Persist)?;
        let Some(store) = self.store.as_mut() else {
            self.seq += 1;
            return Ok(());
        };
        let record = LogRecord {
            seq: self.seq + 1,
            clock: self.clock,
            change,
            events: events.to_vec(),
        };
        store
            .append(&record)
            .map_err(|e| ApiError::internal(format!("event log append failed: {e}"), Stage::Persist))?;
        self.seq += 1;
        if store.records_in_log() >= SNAPSHOT_EVERY {
            // The record is durable; a failed snapshot only delays compaction.
            if let Err(e) = self.checkpoint() {
                tracing::warn!(error = %e, "snapshot failed");
            }
        }
        Ok(())
    }
}

/// Replaces the record with the same id in place, or appends. A new slice
/// reusing the id of a `Failed` record moves to the end so creation order
/// stays meaningful.
fn upsert(slices: &mut Vec<SliceInstance>, inst: SliceInstance) {
    match slices.iter().position(|s| s.slice_id() == inst.slice_id()) {
        Some(i) if slices[i].created_at == inst.created_at => slices[i] = inst,
        Some(i) => {
            slices.remove(i);
            slices.push(inst);
        }
        None => slices.push(inst),
    }
}

/// Copies each slice's compiled rules onto its record.
fn assign_rules(slices: &mut [SliceInstance], table: &RuleTable) {
    let mut by_slice: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for r in table.rules() {
        by_slice.entry(r.slice_id.as_str()).or_default().push(r.clone());
    }
    for s in slices.iter_mut() {
        let mut rules = by_slice.remove(s.slice_id()).unwrap_or_default();
        rules.sort_by_key(|r| r.rule_id);
        s.rules = rules;
    }
}

fn invalid(code: impl Into<String>, reason: impl Into<String>) -> ApiError {
    ApiError::bad_request(code, reason, Stage::Validate)
}

fn join_violations(report: &s3_core::slice::ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(|v| format!("{}: {}", v.code.as_str(), v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn validate_common(profile: &SliceProfile, mode: SliceMode, pool: &ResourcePool) -> Result<(), ApiError> {
    let report = validate_profile(profile);
    if let Some(first) = report.violations.first() {
        return Err(invalid(first.code.as_str(), join_violations(&report)));
    }
    if profile.mode != mode {
        return Err(invalid(
            "MODE_MISMATCH",
            format!("profile mode {:?} does not match a {mode:?} request", profile.mode),
        ));
    }
    if profile.slice_id == DEFAULT_SLICE {
        return Err(invalid("RESERVED_SLICE_ID", format!("{DEFAULT_SLICE} is reserved")));
    }
    if let Some(b) = profile.coverage_beams.iter().find(|b| pool.beam(b).is_none()) {
        return Err(invalid("UNKNOWN_BEAM", format!("beam {b} is not in the pool")));
    }
    Ok(())
}

fn illegal_state(inst: &SliceInstance, op: &str) -> ApiError {
    ApiError::conflict(
        "ILLEGAL_STATE",
        format!("cannot {op} slice {} in state {}", inst.slice_id(), inst.state),
        Stage::Lifecycle,
    )
}

fn compose(caps: &std::collections::BTreeSet<String>, catalog: &[NfDescriptor]) -> Result<s3_core::composer::NfChain, ApiError> {
    compose_chain(caps, catalog).map_err(|e| match e {
        ComposeError::Uncoverable(missing) => ApiError::unprocessable(
            "UNCOVERABLE",
            format!("no catalog NF provides {}", missing.into_iter().collect::<Vec<_>>().join(", ")),
            Stage::ComposeChain,
        ),
        ComposeError::Catalog(e) => ApiError::internal(e.to_string(), Stage::ComposeChain),
    })
}

fn pool_error(e: PoolError, stage: Stage) -> ApiError {
    match e {
        PoolError::AdmissionRace(reason) => ApiError::unprocessable(reason.code(), e.to_string(), stage),
        PoolError::UnknownBeam(_) => invalid("UNKNOWN_BEAM", e.to_string()),
        other => ApiError::internal(other.to_string(), stage),
    }
}

fn classifier_error(e: ClassifierError) -> ApiError {
    match e {
        ClassifierError::ConflictingRules { .. } => ApiError::conflict("RULE_CONFLICT", e.to_string(), Stage::CompileRules),
        other => ApiError::internal(other.to_string(), Stage::CompileRules),
    }
}

pub fn stitch_tables(
    slices: &[SliceInstance],
    rules: &RuleTable,
    topology: &s3_core::classifier::StitchTopology,
) -> Vec<StitchTable> {
    let mut points: BTreeMap<StitchPoint, Vec<&str>> = BTreeMap::new();
    for s in slices.iter().filter(|s| s.state.carries_traffic()) {
        for p in stitch_points(s.profile.mode, topology) {
            points.entry(p).or_default().push(s.slice_id());
        }
    }
    points
        .into_iter()
        .map(|(point, members)| {
            let kept = rules
                .rules()
                .iter()
                .filter(|r| members.contains(&r.slice_id.as_str()))
                .cloned()
                .collect();
            let table = RuleTable::new(kept, rules.default_slice().to_string())
                .expect("subset of a valid table")
                .for_direction(point.direction);
            StitchTable {
                location: point.location,
                direction: point.direction,
                table,
            }
        })
        .collect()
}

pub fn describe(s: &SliceInstance, topology: &s3_core::classifier::StitchTopology) -> SliceResponse {
    let service_endpoint = match &s.attachment {
        Attachment::Standalone { prefixes } => Some(ServiceEndpoint {
            terminal_edge: topology.terminal_edge.clone(),
            hub_edge: topology.hub_edge.clone(),
            prefixes: prefixes.clone(),
        }),
        Attachment::Integrated { .. } => None,
    };
    SliceResponse {
        slice_id: s.slice_id().to_string(),
        state: s.state,
        qos_class: s.qos_class.map(|c| c.class_id),
        qos: s.profile.qos.clone(),
        chain: s
            .chain
            .as_ref()
            .map(|c| c.nf_ids().into_iter().map(String::from).collect())
            .unwrap_or_default(),
        allocation: s.allocation.clone(),
        rules: s.rules.clone(),
        stitch_points: stitch_points(s.profile.mode, topology),
        service_endpoint,
    }
}
