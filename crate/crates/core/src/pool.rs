//! The shared HUB resource pool: compute hosts and beam capacity, admission
//! control and reservation bookkeeping.
//!
//! Every reservation the pool has committed is kept in its live set, so the
//! running totals can be audited against the reservations at any time and
//! a release that does not match a live reservation is rejected.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{place_chain, NfChain, Placement};
use crate::qos::{LatencyBudget, QosMapper};
use crate::slice::{Isolation, Orbit, SliceProfile};
use crate::units::Rate;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSpec {
    pub id: String,
    pub cpu: u32,
    pub mem: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub id: String,
    pub fwd_mbps: Rate,
    pub rtn_mbps: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostResource {
    pub host_id: String,
    pub cpu_units: u32,
    pub mem_mb: u32,
    pub allocated_cpu: u32,
    pub allocated_mem: u32,
}

/// Running totals for one link direction of a beam.
///
/// `committed` is the plain capacity taken exclusively: GBR of soft slices
/// plus the full MBR of hard-isolation slices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTotals {
    pub gbr: Rate,
    pub mbr: Rate,
    pub committed: Rate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamResource {
    pub beam_id: String,
    pub fwd_capacity_mbps: Rate,
    pub rtn_capacity_mbps: Rate,
    pub fwd: LinkTotals,
    pub rtn: LinkTotals,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkReservation {
    pub gbr: Rate,
    pub mbr: Rate,
    pub committed: Rate,
}

impl LinkReservation {
    fn new(gbr: Rate, mbr: Rate, isolation: Isolation) -> Self {
        let committed = match isolation {
            Isolation::Soft => gbr,
            Isolation::Hard => mbr,
        };
        LinkReservation { gbr, mbr, committed }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamReservation {
    pub fwd: LinkReservation,
    pub rtn: LinkReservation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostReservation {
    pub cpu: u32,
    pub mem: u32,
}

/// A committed reservation. `(slice_id, epoch)` identifies it in the pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub slice_id: String,
    pub epoch: u32,
    pub beams: BTreeMap<String, BeamReservation>,
    pub placement: Placement,
    pub hosts: BTreeMap<String, HostReservation>,
}

impl Allocation {
    pub fn empty(slice_id: &str, epoch: u32) -> Self {
        Allocation {
            slice_id: slice_id.to_string(),
            epoch,
            beams: BTreeMap::new(),
            placement: Placement::default(),
            hosts: BTreeMap::new(),
        }
    }

    fn key(&self) -> (&str, u32) {
        (self.slice_id.as_str(), self.epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    GbrCapacity,
    MbrCapacity,
    Latency,
    Compute,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::GbrCapacity => "GBR_CAPACITY",
            RejectReason::MbrCapacity => "MBR_CAPACITY",
            RejectReason::Latency => "LATENCY",
            RejectReason::Compute => "COMPUTE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum AdmissionDecision {
    Admit {
        placement: Placement,
        budget: LatencyBudget,
    },
    Reject {
        reason: RejectReason,
        detail: String,
    },
}

impl AdmissionDecision {
    pub fn is_admit(&self) -> bool {
        matches!(self, AdmissionDecision::Admit { .. })
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        match self {
            AdmissionDecision::Reject { reason, .. } => Some(*reason),
            AdmissionDecision::Admit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoolError {
    #[error("unknown beam {0}")]
    UnknownBeam(String),
    #[error("capacity changed since admission: {}", .0.code())]
    AdmissionRace(RejectReason),
    #[error("no live allocation for slice {slice_id} epoch {epoch}")]
    UnknownAllocation { slice_id: String, epoch: u32 },
    #[error("slice {slice_id} already holds an allocation at epoch {epoch}")]
    DuplicateAllocation { slice_id: String, epoch: u32 },
    #[error("invalid pool inventory: {0}")]
    InvalidInventory(String),
    #[error("pool invariant violated: {0}")]
    InvariantViolated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub orbit: Orbit,
    pub overbooking_mbr: f64,
    pub hosts: Vec<HostResource>,
    pub beams: Vec<BeamResource>,
    live: Vec<Allocation>,
}

fn check_link(
    totals: &LinkTotals,
    capacity: Rate,
    overbooking: f64,
    req: &LinkReservation,
    hard: bool,
) -> Option<RejectReason> {
    if totals.committed + req.gbr > capacity {
        return Some(RejectReason::GbrCapacity);
    }
    if hard && totals.committed + req.mbr > capacity {
        return Some(RejectReason::MbrCapacity);
    }
    if totals.mbr + req.mbr > capacity.scale(overbooking) {
        return Some(RejectReason::MbrCapacity);
    }
    None
}

impl ResourcePool {
    pub fn new(
        orbit: Orbit,
        overbooking_mbr: f64,
        hosts: &[HostSpec],
        beams: &[BeamSpec],
    ) -> Result<Self, PoolError> {
        if !(overbooking_mbr.is_finite() && overbooking_mbr >= 1.0) {
            return Err(PoolError::InvalidInventory(format!(
                "overbooking_mbr must be >= 1, got {overbooking_mbr}"
            )));
        }
        let mut ids = BTreeSet::new();
        for h in hosts {
            if !ids.insert(h.id.as_str()) {
                return Err(PoolError::InvalidInventory(format!("duplicate host id {}", h.id)));
            }
        }
        ids.clear();
        for b in beams {
            if !ids.insert(b.id.as_str()) {
                return Err(PoolError::InvalidInventory(format!("duplicate beam id {}", b.id)));
            }
        }
        Ok(ResourcePool {
            orbit,
            overbooking_mbr,
            hosts: hosts
                .iter()
                .map(|h| HostResource {
                    host_id: h.id.clone(),
                    cpu_units: h.cpu,
                    mem_mb: h.mem,
                    allocated_cpu: 0,
                    allocated_mem: 0,
                })
                .collect(),
            beams: beams
                .iter()
                .map(|b| BeamResource {
                    beam_id: b.id.clone(),
                    fwd_capacity_mbps: b.fwd_mbps,
                    rtn_capacity_mbps: b.rtn_mbps,
                    fwd: LinkTotals::default(),
                    rtn: LinkTotals::default(),
                })
                .collect(),
            live: Vec::new(),
        })
    }

    pub fn beam(&self, beam_id: &str) -> Option<&BeamResource> {
        self.beams.iter().find(|b| b.beam_id == beam_id)
    }

    pub fn live_allocations(&self) -> &[Allocation] {
        &self.live
    }

    pub fn is_live(&self, allocation: &Allocation) -> bool {
        self.live.iter().any(|a| a == allocation)
    }

    fn reservations(&self, profile: &SliceProfile) -> Result<Vec<(usize, BeamReservation)>, PoolError> {
        let ((fg, fm), (rg, rm)) = profile.link_demand();
        profile
            .coverage_beams
            .iter()
            .map(|id| {
                let idx = self
                    .beams
                    .iter()
                    .position(|b| &b.beam_id == id)
                    .ok_or_else(|| PoolError::UnknownBeam(id.clone()))?;
                Ok((
                    idx,
                    BeamReservation {
                        fwd: LinkReservation::new(fg, fm, profile.isolation),
                        rtn: LinkReservation::new(rg, rm, profile.isolation),
                    },
                ))
            })
            .collect()
    }

    fn capacity_check(&self, profile: &SliceProfile) -> Result<Option<(RejectReason, String)>, PoolError> {
        let hard = profile.isolation == Isolation::Hard;
        for (idx, res) in self.reservations(profile)? {
            let beam = &self.beams[idx];
            let links = [
                ("fwd", &beam.fwd, beam.fwd_capacity_mbps, &res.fwd),
                ("rtn", &beam.rtn, beam.rtn_capacity_mbps, &res.rtn),
            ];
            for (dir, totals, cap, req) in links {
                if let Some(reason) = check_link(totals, cap, self.overbooking_mbr, req, hard) {
                    let detail = format!("beam {} {dir}: capacity {cap}, committed {}, mbr total {}", beam.beam_id, totals.committed, totals.mbr);
                    return Ok(Some((reason, detail)));
                }
            }
        }
        Ok(None)
    }

    /// Admission in fixed check order: link capacity, latency, compute.
    pub fn check_admission(
        &self,
        profile: &SliceProfile,
        chain: &NfChain,
        mapper: &QosMapper,
    ) -> Result<AdmissionDecision, PoolError> {
        if let Some((reason, detail)) = self.capacity_check(profile)? {
            return Ok(AdmissionDecision::Reject { reason, detail });
        }
        let feasibility = mapper.latency_feasibility(&profile.qos, self.orbit, chain);
        if !feasibility.feasible {
            let b = feasibility.budget;
            return Ok(AdmissionDecision::Reject {
                reason: RejectReason::Latency,
                detail: format!(
                    "pdb {} ms < propagation {:.3} + chain {:.3} + scheduling {:.3} ms",
                    b.pdb_ms, b.propagation_ms, b.chain_ms, b.scheduling_ms
                ),
            });
        }
        match place_chain(chain, &self.hosts) {
            Ok(placement) => Ok(AdmissionDecision::Admit {
                placement,
                budget: feasibility.budget,
            }),
            Err(e) => Ok(AdmissionDecision::Reject {
                reason: RejectReason::Compute,
                detail: e.to_string(),
            }),
        }
    }

    /// Commits the profile's link demand on every covered beam and places the
    /// chain. Capacity and placement are revalidated; nothing is mutated
    /// unless everything fits.
    pub fn allocate(
        &mut self,
        profile: &SliceProfile,
        chain: &NfChain,
        epoch: u32,
    ) -> Result<Allocation, PoolError> {
        if self.live.iter().any(|a| a.key() == (profile.slice_id.as_str(), epoch)) {
            return Err(PoolError::DuplicateAllocation {
                slice_id: profile.slice_id.clone(),
                epoch,
            });
        }
        if let Some((reason, _)) = self.capacity_check(profile)? {
            return Err(PoolError::AdmissionRace(reason));
        }
        let placement =
            place_chain(chain, &self.hosts).map_err(|_| PoolError::AdmissionRace(RejectReason::Compute))?;

        let mut hosts: BTreeMap<String, HostReservation> = BTreeMap::new();
        for nf in &chain.members {
            let h = hosts.entry(placement.assignments[&nf.nf_id].clone()).or_default();
            h.cpu += nf.cpu_units;
            h.mem += nf.mem_mb;
        }
        let beams = self
            .reservations(profile)?
            .into_iter()
            .map(|(idx, r)| (self.beams[idx].beam_id.clone(), r))
            .collect();
        let allocation = Allocation {
            slice_id: profile.slice_id.clone(),
            epoch,
            beams,
            placement,
            hosts,
        };
        self.apply(&allocation, true);
        self.live.push(allocation.clone());
        self.live.sort_by(|a, b| a.key().cmp(&b.key()));
        Ok(allocation)
    }

    /// Replaces `old` with a reservation for `profile` at `old.epoch + 1`.
    /// The new reservation is admitted against the pool without `old`, so
    /// only the delta has to fit. Either both steps happen or neither does.
    pub fn reallocate(
        &mut self,
        old: &Allocation,
        profile: &SliceProfile,
        chain: &NfChain,
    ) -> Result<Allocation, PoolError> {
        let mut next = self.clone();
        next.release(old)?;
        let new = next.allocate(profile, chain, old.epoch + 1)?;
        *self = next;
        Ok(new)
    }

    /// `check_admission` as if `old` were not reserved.
    pub fn check_readmission(
        &self,
        old: &Allocation,
        profile: &SliceProfile,
        chain: &NfChain,
        mapper: &QosMapper,
    ) -> Result<AdmissionDecision, PoolError> {
        let mut without = self.clone();
        without.release(old)?;
        without.check_admission(profile, chain, mapper)
    }

    pub fn release(&mut self, allocation: &Allocation) -> Result<(), PoolError> {
        let pos = self
            .live
            .iter()
            .position(|a| a == allocation)
            .ok_or_else(|| PoolError::UnknownAllocation {
                slice_id: allocation.slice_id.clone(),
                epoch: allocation.epoch,
            })?;
        let live = self.live.remove(pos);
        self.apply(&live, false);
        Ok(())
    }

    /// Re-commits a previously granted allocation without admission, as done
    /// when rebuilding the pool from persisted state. Fails if the result
    /// would break a capacity invariant.
    pub fn restore(&mut self, allocation: Allocation) -> Result<(), PoolError> {
        if self.live.iter().any(|a| a.key() == allocation.key()) {
            return Err(PoolError::DuplicateAllocation {
                slice_id: allocation.slice_id,
                epoch: allocation.epoch,
            });
        }
        for beam in allocation.beams.keys() {
            if self.beam(beam).is_none() {
                return Err(PoolError::UnknownBeam(beam.clone()));
            }
        }
        for host in allocation.hosts.keys() {
            if !self.hosts.iter().any(|h| &h.host_id == host) {
                return Err(PoolError::InvariantViolated(format!("unknown host {host}")));
            }
        }
        let mut next = self.clone();
        next.apply(&allocation, true);
        next.live.push(allocation);
        next.live.sort_by(|a, b| a.key().cmp(&b.key()));
        next.audit()?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, allocation: &Allocation, add: bool) {
        fn bump(t: &mut LinkTotals, r: &LinkReservation, add: bool) {
            if add {
                t.gbr += r.gbr;
                t.mbr += r.mbr;
                t.committed += r.committed;
            } else {
                t.gbr -= r.gbr;
                t.mbr -= r.mbr;
                t.committed -= r.committed;
            }
        }
        for (id, res) in &allocation.beams {
            let beam = self
                .beams
                .iter_mut()
                .find(|b| &b.beam_id == id)
                .expect("allocation references a pool beam");
            bump(&mut beam.fwd, &res.fwd, add);
            bump(&mut beam.rtn, &res.rtn, add);
        }
        for (id, res) in &allocation.hosts {
            let host = self
                .hosts
                .iter_mut()
                .find(|h| &h.host_id == id)
                .expect("allocation references a pool host");
            if add {
                host.allocated_cpu += res.cpu;
                host.allocated_mem += res.mem;
            } else {
                host.allocated_cpu -= res.cpu;
                host.allocated_mem -= res.mem;
            }
        }
    }

    /// Recomputes every total from the live reservations and checks them
    /// against the recorded totals and the capacity invariants.
    pub fn audit(&self) -> Result<(), PoolError> {
        let bad = |m: String| Err(PoolError::InvariantViolated(m));
        for beam in &self.beams {
            let mut fwd = LinkTotals::default();
            let mut rtn = LinkTotals::default();
            for res in self.live.iter().filter_map(|a| a.beams.get(&beam.beam_id)) {
                for (t, r) in [(&mut fwd, &res.fwd), (&mut rtn, &res.rtn)] {
                    t.gbr += r.gbr;
                    t.mbr += r.mbr;
                    t.committed += r.committed;
                }
            }
            if fwd != beam.fwd || rtn != beam.rtn {
                return bad(format!("beam {} totals drifted from live reservations", beam.beam_id));
            }
            for (dir, t, cap) in [("fwd", fwd, beam.fwd_capacity_mbps), ("rtn", rtn, beam.rtn_capacity_mbps)] {
                if t.gbr > cap || t.committed > cap {
                    return bad(format!("beam {} {dir} guaranteed load exceeds capacity", beam.beam_id));
                }
                if t.mbr > cap.scale(self.overbooking_mbr) {
                    return bad(format!("beam {} {dir} MBR exceeds overbooked capacity", beam.beam_id));
                }
            }
        }
        for host in &self.hosts {
            let (cpu, mem) = self
                .live
                .iter()
                .filter_map(|a| a.hosts.get(&host.host_id))
                .fold((0u32, 0u32), |(c, m), r| (c + r.cpu, m + r.mem));
            if cpu != host.allocated_cpu || mem != host.allocated_mem {
                return bad(format!("host {} totals drifted from live reservations", host.host_id));
            }
            if cpu > host.cpu_units || mem > host.mem_mb {
                return bad(format!("host {} overcommitted", host.host_id));
            }
        }
        Ok(())
    }

    pub fn utilization(&self) -> UtilizationReport {
        fn frac(used: u64, cap: u64) -> f64 {
            if cap == 0 {
                0.0
            } else {
                (used as f64 / cap as f64).clamp(0.0, 1.0)
            }
        }
        let ob = self.overbooking_mbr;
        UtilizationReport {
            beams: self
                .beams
                .iter()
                .map(|b| {
                    (
                        b.beam_id.clone(),
                        BeamUtilization {
                            fwd_gbr: frac(b.fwd.gbr.bps(), b.fwd_capacity_mbps.bps()),
                            rtn_gbr: frac(b.rtn.gbr.bps(), b.rtn_capacity_mbps.bps()),
                            fwd_mbr: frac(b.fwd.mbr.bps(), b.fwd_capacity_mbps.scale(ob).bps()),
                            rtn_mbr: frac(b.rtn.mbr.bps(), b.rtn_capacity_mbps.scale(ob).bps()),
                        },
                    )
                })
                .collect(),
            hosts: self
                .hosts
                .iter()
                .map(|h| {
                    (
                        h.host_id.clone(),
                        HostUtilization {
                            cpu: frac(h.allocated_cpu.into(), h.cpu_units.into()),
                            mem: frac(h.allocated_mem.into(), h.mem_mb.into()),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamUtilization {
    pub fwd_gbr: f64,
    pub rtn_gbr: f64,
    pub fwd_mbr: f64,
    pub rtn_mbr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostUtilization {
    pub cpu: f64,
    pub mem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub beams: BTreeMap<String, BeamUtilization>,
    pub hosts: BTreeMap<String, HostUtilization>,
}
