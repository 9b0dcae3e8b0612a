//! Per-slice gateway composition.
//!
//! A gateway is an ordered chain of network functions drawn from a catalog.
//! Selection is a weighted set cover over capability tags: the cheapest set
//! of NFs whose capabilities cover what the slice needs, ordered by stage.
//! Catalogs of up to [`EXACT_SEARCH_LIMIT`] NFs are solved exactly by
//! branch-and-bound; larger ones fall back to the greedy cost-per-capability
//! heuristic. Both paths share the same tie-breaks so results are total.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool::HostResource;
use crate::qos::SatQosClassId;
use crate::slice::{Isolation, ServiceClass, SliceProfile};

pub const CLASSIFY: &str = "classify";
pub const ENCAPSULATE: &str = "encapsulate";
pub const SCHEDULE: &str = "schedule";
pub const ACCELERATE: &str = "accelerate";
pub const LOW_LATENCY_SCHED: &str = "low-latency-sched";
pub const ENCRYPT: &str = "encrypt";

pub const EXACT_SEARCH_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NfDescriptor {
    pub nf_id: String,
    /// Ingress-to-egress position, 0..=9.
    pub stage: u8,
    pub provides: BTreeSet<String>,
    #[serde(rename = "cpu")]
    pub cpu_units: u32,
    #[serde(rename = "mem")]
    pub mem_mb: u32,
    pub latency_ms: f64,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("NF catalog is empty")]
    Empty,
    #[error("duplicate nf_id {0}")]
    DuplicateNf(String),
    #[error("NF {nf_id}: {problem}")]
    InvalidDescriptor { nf_id: String, problem: &'static str },
}

impl NfDescriptor {
    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |problem| {
            Err(CatalogError::InvalidDescriptor {
                nf_id: self.nf_id.clone(),
                problem,
            })
        };
        if self.nf_id.is_empty() {
            return bad("nf_id must be non-empty");
        }
        if self.provides.is_empty() {
            return bad("provides must be non-empty");
        }
        if self.stage > 9 {
            return bad("stage must be in 0..=9");
        }
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return bad("latency_ms must be >= 0");
        }
        if self.cost == 0 {
            return bad("cost must be positive");
        }
        Ok(())
    }
}

pub fn validate_catalog(catalog: &[NfDescriptor]) -> Result<(), CatalogError> {
    if catalog.is_empty() {
        return Err(CatalogError::Empty);
    }
    let mut seen = BTreeSet::new();
    for nf in catalog {
        nf.validate()?;
        if !seen.insert(nf.nf_id.as_str()) {
            return Err(CatalogError::DuplicateNf(nf.nf_id.clone()));
        }
    }
    Ok(())
}

/// The artifact's default catalog.
pub fn default_catalog() -> Vec<NfDescriptor> {
    let nf = |id: &str, stage, provides: &[&str], cpu, mem, latency_ms, cost| NfDescriptor {
        nf_id: id.to_string(),
        stage,
        provides: provides.iter().map(|s| s.to_string()).collect(),
        cpu_units: cpu,
        mem_mb: mem,
        latency_ms,
        cost,
    };
    vec![
        nf("classifier-attach", 0, &[CLASSIFY], 1, 256, 0.1, 1),
        nf("pep-accelerator", 1, &[ACCELERATE], 2, 1024, 2.0, 4),
        nf("ipsec-encryptor", 2, &[ENCRYPT], 2, 512, 0.5, 3),
        nf("gse-encapsulator", 3, &[ENCAPSULATE], 1, 256, 0.2, 2),
        nf("qos-scheduler", 4, &[SCHEDULE], 1, 256, 1.0, 2),
        nf("ll-scheduler", 5, &[SCHEDULE, LOW_LATENCY_SCHED], 1, 512, 0.3, 3),
    ]
}

/// Ordered NF composition of one slice gateway.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NfChain {
    pub members: Vec<NfDescriptor>,
}

impl NfChain {
    /// Orders members by (stage, nf_id).
    pub fn from_members(mut members: Vec<NfDescriptor>) -> Self {
        members.sort_by(|a, b| a.stage.cmp(&b.stage).then_with(|| a.nf_id.cmp(&b.nf_id)));
        NfChain { members }
    }

    pub fn total_cost(&self) -> u64 {
        self.members.iter().map(|m| m.cost).sum()
    }

    pub fn nf_ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.nf_id.as_str()).collect()
    }

    pub fn capabilities(&self) -> BTreeSet<&str> {
        self.members
            .iter()
            .flat_map(|m| m.provides.iter().map(String::as_str))
            .collect()
    }

    pub fn is_stage_ordered(&self) -> bool {
        self.members.windows(2).all(|w| w[0].stage <= w[1].stage)
    }
}

pub fn chain_latency(chain: &NfChain) -> f64 {
    chain.members.iter().map(|m| m.latency_ms).sum()
}

pub fn required_capabilities(profile: &SliceProfile, class: SatQosClassId) -> BTreeSet<String> {
    let mut caps: BTreeSet<String> = [CLASSIFY, ENCAPSULATE, SCHEDULE]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if profile.service_class == ServiceClass::EMBB && !profile.qos.gbr_mbps.is_zero() {
        caps.insert(ACCELERATE.to_string());
    }
    if class == SatQosClassId::RtConversational {
        caps.insert(LOW_LATENCY_SCHED.to_string());
    }
    if profile.isolation == Isolation::Hard {
        caps.insert(ENCRYPT.to_string());
    }
    caps
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("no catalog NF provides {0:?}")]
    Uncoverable(BTreeSet<String>),
}

/// Minimum-cost capability cover, ordered by stage. Ties go to fewer NFs,
/// then to the lexicographically smallest sorted id sequence.
pub fn compose_chain(
    required: &BTreeSet<String>,
    catalog: &[NfDescriptor],
) -> Result<NfChain, ComposeError> {
    validate_catalog(catalog)?;

    let offered: BTreeSet<&str> = catalog
        .iter()
        .flat_map(|nf| nf.provides.iter().map(String::as_str))
        .collect();
    let missing: BTreeSet<String> = required
        .iter()
        .filter(|t| !offered.contains(t.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(ComposeError::Uncoverable(missing));
    }
    if required.is_empty() {
        return Ok(NfChain::default());
    }

    let mut ordered: Vec<&NfDescriptor> = catalog.iter().collect();
    ordered.sort_by(|a, b| a.nf_id.cmp(&b.nf_id));

    let picked = if catalog.len() <= EXACT_SEARCH_LIMIT && required.len() <= 128 {
        exact_cover(required, &ordered)
    } else {
        greedy_cover(required, &ordered)
    };
    Ok(NfChain::from_members(picked.into_iter().cloned().collect()))
}

struct ExactSearch<'a> {
    cands: Vec<(&'a NfDescriptor, u128)>,
    suffix_union: Vec<u128>,
    full: u128,
    best: Option<(u64, Vec<usize>)>,
}

impl ExactSearch<'_> {
    fn better(&self, cost: u64, chosen: &[usize]) -> bool {
        match &self.best {
            None => true,
            Some((best_cost, best)) => match cost.cmp(best_cost) {
                Ordering::Less => true,
                Ordering::Greater => false,
                // `cands` is sorted by nf_id, so index order is id order.
                Ordering::Equal => (chosen.len(), chosen) < (best.len(), best.as_slice()),
            },
        }
    }

    fn search(&mut self, i: usize, covered: u128, cost: u64, chosen: &mut Vec<usize>) {
        if covered == self.full {
            if self.better(cost, chosen) {
                self.best = Some((cost, chosen.clone()));
            }
            return;
        }
        if i == self.cands.len() || covered | self.suffix_union[i] != self.full {
            return;
        }
        // Any completion adds at least one positive-cost NF.
        if let Some((best_cost, _)) = &self.best {
            if cost >= *best_cost {
                return;
            }
        }
        let (nf, mask) = self.cands[i];
        if mask & !covered != 0 {
            chosen.push(i);
            self.search(i + 1, covered | mask, cost + nf.cost, chosen);
            chosen.pop();
        }
        self.search(i + 1, covered, cost, chosen);
    }
}

fn exact_cover<'a>(required: &BTreeSet<String>, ordered: &[&'a NfDescriptor]) -> Vec<&'a NfDescriptor> {
    let bit: BTreeMap<&str, u32> = required
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();
    let cands: Vec<(&NfDescriptor, u128)> = ordered
        .iter()
        .map(|nf| {
            let mask = nf
                .provides
                .iter()
                .filter_map(|t| bit.get(t.as_str()))
                .fold(0u128, |m, b| m | (1u128 << b));
            (*nf, mask)
        })
        .filter(|(_, mask)| *mask != 0)
        .collect();
    let mut suffix_union = vec![0u128; cands.len() + 1];
    for i in (0..cands.len()).rev() {
        suffix_union[i] = suffix_union[i + 1] | cands[i].1;
    }
    let full = if required.len() == 128 {
        u128::MAX
    } else {
        (1u128 << required.len()) - 1
    };
    let mut search = ExactSearch {
        cands,
        suffix_union,
        full,
        best: None,
    };
    search.search(0, 0, 0, &mut Vec::new());
    let (_, chosen) = search.best.expect("coverability checked before search");
    chosen.into_iter().map(|i| search.cands[i].0).collect()
}

fn greedy_cover<'a>(required: &BTreeSet<String>, ordered: &[&'a NfDescriptor]) -> Vec<&'a NfDescriptor> {
    let mut uncovered: BTreeSet<&str> = required.iter().map(String::as_str).collect();
    let mut picked: Vec<&NfDescriptor> = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(&NfDescriptor, u64)> = None;
        for nf in ordered {
            if picked.iter().any(|p| p.nf_id == nf.nf_id) {
                continue;
            }
            let gain = nf.provides.iter().filter(|t| uncovered.contains(t.as_str())).count() as u64;
            if gain == 0 {
                continue;
            }
            // cost/gain compared by cross-multiplication; `ordered` is by id,
            // so the first of equal ratios keeps the smallest id.
            let wins = match best {
                None => true,
                Some((b, b_gain)) => (nf.cost as u128) * (b_gain as u128) < (b.cost as u128) * (gain as u128),
            };
            if wins {
                best = Some((nf, gain));
            }
        }
        let (nf, _) = best.expect("coverability checked before search");
        for t in &nf.provides {
            uncovered.remove(t.as_str());
        }
        picked.push(nf);
    }
    picked
}

/// NF to host assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub assignments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlaceError {
    #[error("insufficient compute for NF {0}")]
    InsufficientCompute(String),
}

/// First-fit-decreasing by CPU demand over hosts sorted by id, using each
/// host's residual capacity.
pub fn place_chain(chain: &NfChain, hosts: &[HostResource]) -> Result<Placement, PlaceError> {
    let mut residual: Vec<(&str, u32, u32)> = hosts
        .iter()
        .map(|h| {
            (
                h.host_id.as_str(),
                h.cpu_units.saturating_sub(h.allocated_cpu),
                h.mem_mb.saturating_sub(h.allocated_mem),
            )
        })
        .collect();
    residual.sort_by(|a, b| a.0.cmp(b.0));

    let mut nfs: Vec<&NfDescriptor> = chain.members.iter().collect();
    nfs.sort_by(|a, b| b.cpu_units.cmp(&a.cpu_units).then_with(|| a.nf_id.cmp(&b.nf_id)));

    let mut placement = Placement::default();
    for nf in nfs {
        let slot = residual
            .iter_mut()
            .find(|(_, cpu, mem)| *cpu >= nf.cpu_units && *mem >= nf.mem_mb)
            .ok_or_else(|| PlaceError::InsufficientCompute(nf.nf_id.clone()))?;
        slot.1 -= nf.cpu_units;
        slot.2 -= nf.mem_mb;
        placement
            .assignments
            .insert(nf.nf_id.clone(), slot.0.to_string());
    }
    Ok(placement)
}
