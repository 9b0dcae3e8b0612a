//! Reference implementations and random instance generators shared by the
//! integration and acceptance tests. Nothing here calls into the code under
//! test except for plain data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use ipnet::IpNet;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use s3_core::classifier::{ClassifierRule, FlowMeta, Mark, MatchSpec, Snssai};
use s3_core::composer::NfDescriptor;
use s3_core::pool::{BeamSpec, HostSpec};
use s3_core::slice::{
    FiveGQos, Isolation, LinkDemand, OrbitPreference, ServiceClass, SliceMode, SliceProfile, TenantControl,
};
use s3_core::Rate;

pub const TAGS: [&str; 6] = ["classify", "encapsulate", "schedule", "accelerate", "encrypt", "low-latency-sched"];

// ---------------------------------------------------------------- composer

pub fn random_catalog(rng: &mut impl Rng, max_nfs: usize) -> Vec<NfDescriptor> {
    let n = rng.random_range(1..=max_nfs);
    (0..n)
        .map(|i| {
            let k = rng.random_range(1..=3);
            let provides = TAGS.choose_multiple(rng, k).map(|s| s.to_string()).collect();
            NfDescriptor {
                nf_id: format!("nf-{:02}", (i * 7 + 3) % 97),
                stage: rng.random_range(0..=9),
                provides,
                cpu_units: rng.random_range(1..=4),
                mem_mb: rng.random_range(1..=8) * 128,
                latency_ms: rng.random_range(0..=20) as f64 / 10.0,
                cost: rng.random_range(1..=6),
            }
        })
        .collect()
}

pub fn random_required(rng: &mut impl Rng) -> BTreeSet<String> {
    let k = rng.random_range(1..=TAGS.len());
    TAGS.choose_multiple(rng, k).map(|s| s.to_string()).collect()
}

/// Exhaustive subset search. Returns the optimal NF ids, sorted, or `None`
/// when no subset covers `required`. Ties: fewer NFs, then smallest sorted
/// id sequence.
pub fn brute_force_cover(required: &BTreeSet<String>, catalog: &[NfDescriptor]) -> Option<(u64, Vec<String>)> {
    let n = catalog.len();
    let mut best: Option<(u64, usize, Vec<String>)> = None;
    for mask in 0u32..(1 << n) {
        let picked: Vec<&NfDescriptor> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &catalog[i]).collect();
        let covered: BTreeSet<&String> = picked.iter().flat_map(|nf| nf.provides.iter()).collect();
        if !required.iter().all(|t| covered.contains(t)) {
            continue;
        }
        let cost = picked.iter().map(|nf| nf.cost).sum::<u64>();
        let mut ids: Vec<String> = picked.iter().map(|nf| nf.nf_id.clone()).collect();
        ids.sort();
        let key = (cost, ids.len(), ids);
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    best.map(|(cost, _, ids)| (cost, ids))
}

// ---------------------------------------------------------------- admission

pub fn mbps(v: f64) -> Rate {
    Rate::from_mbps(v).unwrap()
}

pub fn random_inventory(rng: &mut impl Rng) -> (Vec<HostSpec>, Vec<BeamSpec>) {
    let hosts = (0..rng.random_range(1..=5))
        .map(|i| HostSpec {
            id: format!("host-{i}"),
            cpu: rng.random_range(1..=8),
            mem: rng.random_range(1..=16) * 256,
        })
        .collect();
    let beams = (0..rng.random_range(1..=5))
        .map(|i| BeamSpec {
            id: format!("beam-{i}"),
            fwd_mbps: mbps(rng.random_range(10..=200) as f64),
            rtn_mbps: mbps(rng.random_range(1..=40) as f64),
        })
        .collect();
    (hosts, beams)
}

pub fn random_profile(rng: &mut impl Rng, id: &str, beams: &[BeamSpec]) -> SliceProfile {
    let k = rng.random_range(1..=beams.len());
    let coverage_beams = beams.choose_multiple(rng, k).map(|b| b.id.clone()).collect();
    let gbr = rng.random_range(0..=600) as f64 / 10.0;
    let mbr = gbr + rng.random_range(0..=600) as f64 / 10.0;
    let return_link = rng.random_bool(0.3).then(|| {
        let g = rng.random_range(0..=100) as f64 / 10.0;
        LinkDemand { gbr_mbps: mbps(g), mbr_mbps: mbps(g + rng.random_range(0..=100) as f64 / 10.0) }
    });
    SliceProfile {
        slice_id: id.to_string(),
        mode: if rng.random_bool(0.5) { SliceMode::Integrated } else { SliceMode::Standalone },
        service_class: [ServiceClass::EMBB, ServiceClass::URLLC, ServiceClass::MMTC, ServiceClass::Custom]
            [rng.random_range(0..4)],
        qos: FiveGQos {
            gbr_mbps: mbps(gbr),
            mbr_mbps: mbps(mbr),
            pdb_ms: rng.random_range(100.0..400.0),
            per: 1e-4,
            priority: rng.random_range(1..=127),
        },
        isolation: if rng.random_bool(0.4) { Isolation::Hard } else { Isolation::Soft },
        tenant_control: TenantControl::Managed,
        orbit_preference: OrbitPreference::Any,
        coverage_beams,
        return_link,
        notes: String::new(),
    }
}

/// Demand on one link direction in bit/s: (gbr, mbr, committed).
fn link_bps(profile: &SliceProfile, forward: bool) -> (u64, u64, u64) {
    let (gbr, mbr) = if forward {
        (profile.qos.gbr_mbps.bps(), profile.qos.mbr_mbps.bps())
    } else {
        match &profile.return_link {
            Some(rl) => (rl.gbr_mbps.bps(), rl.mbr_mbps.bps()),
            None => (profile.qos.gbr_mbps.bps() / 10, profile.qos.mbr_mbps.bps() / 10),
        }
    };
    let committed = if profile.isolation == Isolation::Hard { mbr } else { gbr };
    (gbr, mbr, committed)
}

/// Profile, chain members and NF placement of one live slice.
pub type LiveEntry = (SliceProfile, Vec<NfDescriptor>, BTreeMap<String, String>);

/// Independent model of the resource pool: reservations are kept as the
/// admitted profiles and chains, and every check recomputes sums from them.
#[derive(Debug, Clone)]
pub struct PoolModel {
    pub hosts: Vec<HostSpec>,
    pub beams: Vec<BeamSpec>,
    pub overbooking: f64,
    pub propagation_ms: f64,
    pub scheduling_ms: f64,
    /// slice id -> (profile, chain, host per NF)
    pub live: BTreeMap<String, LiveEntry>,
}

impl PoolModel {
    pub fn new(hosts: Vec<HostSpec>, beams: Vec<BeamSpec>, overbooking: f64, altitude_km: f64) -> Self {
        PoolModel {
            hosts,
            beams,
            overbooking,
            propagation_ms: 2.0 * altitude_km / 299_792.458 * 1000.0,
            scheduling_ms: 10.0,
            live: BTreeMap::new(),
        }
    }

    /// Σ over live slices on `beam`, one direction: (gbr, mbr, committed).
    pub fn link_sums(&self, beam: &str, forward: bool) -> (u64, u64, u64) {
        self.live
            .values()
            .filter(|(p, _, _)| p.coverage_beams.contains(beam))
            .map(|(p, _, _)| link_bps(p, forward))
            .fold((0, 0, 0), |a, d| (a.0 + d.0, a.1 + d.1, a.2 + d.2))
    }

    pub fn host_used(&self, host: &str) -> (u32, u32) {
        let mut used = (0, 0);
        for (_, chain, placement) in self.live.values() {
            for nf in chain {
                if placement[&nf.nf_id] == host {
                    used.0 += nf.cpu_units;
                    used.1 += nf.mem_mb;
                }
            }
        }
        used
    }

    /// First fit over hosts in id order, NFs by descending CPU then id.
    pub fn first_fit(&self, chain: &[NfDescriptor]) -> Option<BTreeMap<String, String>> {
        let mut hosts: Vec<(String, u32, u32)> = self
            .hosts
            .iter()
            .map(|h| {
                let (c, m) = self.host_used(&h.id);
                (h.id.clone(), h.cpu - c, h.mem - m)
            })
            .collect();
        hosts.sort();
        let mut nfs: Vec<&NfDescriptor> = chain.iter().collect();
        nfs.sort_by(|a, b| (b.cpu_units, &a.nf_id).cmp(&(a.cpu_units, &b.nf_id)));
        let mut out = BTreeMap::new();
        for nf in nfs {
            let h = hosts.iter_mut().find(|h| h.1 >= nf.cpu_units && h.2 >= nf.mem_mb)?;
            h.1 -= nf.cpu_units;
            h.2 -= nf.mem_mb;
            out.insert(nf.nf_id.clone(), h.0.clone());
        }
        Some(out)
    }

    /// `None` to admit, otherwise the reason code.
    pub fn decide(&self, profile: &SliceProfile, chain: &[NfDescriptor]) -> Option<&'static str> {
        for beam_id in &profile.coverage_beams {
            let beam = self.beams.iter().find(|b| &b.id == beam_id).expect("known beam");
            for (forward, cap) in [(true, beam.fwd_mbps.bps()), (false, beam.rtn_mbps.bps())] {
                let (_, sum_mbr, sum_committed) = self.link_sums(beam_id, forward);
                let (gbr, mbr, _) = link_bps(profile, forward);
                if sum_committed + gbr > cap {
                    return Some("GBR_CAPACITY");
                }
                if profile.isolation == Isolation::Hard && sum_committed + mbr > cap {
                    return Some("MBR_CAPACITY");
                }
                if sum_mbr + mbr > (cap as f64 * self.overbooking).round() as u64 {
                    return Some("MBR_CAPACITY");
                }
            }
        }
        let chain_ms: f64 = chain.iter().map(|nf| nf.latency_ms).sum();
        if profile.qos.pdb_ms < self.propagation_ms + chain_ms + self.scheduling_ms {
            return Some("LATENCY");
        }
        if self.first_fit(chain).is_none() {
            return Some("COMPUTE");
        }
        None
    }
}

// ---------------------------------------------------------------- classifier

fn random_prefix(rng: &mut impl Rng) -> IpNet {
    if rng.random_bool(0.85) {
        let len = rng.random_range(8..=32u8);
        let addr = u32::from_be_bytes([10, rng.random_range(0..4), rng.random_range(0..4), rng.random()]);
        let masked = if len == 0 { 0 } else { addr & (u32::MAX << (32 - len)) };
        IpNet::new(IpAddr::from(masked.to_be_bytes()), len).unwrap()
    } else {
        let len = rng.random_range(16..=64u8);
        let addr = (0xfd00u128 << 112) | (u128::from(rng.random_range(0..4u16)) << 96);
        let masked = addr & (u128::MAX << (128 - len));
        IpNet::new(IpAddr::from(masked.to_be_bytes()), len).unwrap()
    }
}

fn random_addr(rng: &mut impl Rng) -> IpAddr {
    if rng.random_bool(0.85) {
        IpAddr::from([10, rng.random_range(0..4), rng.random_range(0..4), rng.random()])
    } else {
        let addr = (0xfd00u128 << 112) | (u128::from(rng.random_range(0..4u16)) << 96) | u128::from(rng.random::<u16>());
        IpAddr::from(addr.to_be_bytes())
    }
}

fn random_snssai(rng: &mut impl Rng) -> Snssai {
    Snssai { sst: rng.random_range(1..=4), sd: rng.random_bool(0.3).then(|| rng.random_range(0..3)) }
}

fn random_spec(rng: &mut impl Rng) -> MatchSpec {
    loop {
        let spec = MatchSpec {
            snssai: rng.random_bool(0.5).then(|| random_snssai(rng)),
            qfi: rng.random_bool(0.3).then(|| rng.random_range(0..4)),
            dscp: rng.random_bool(0.2).then(|| rng.random_range(0..4)),
            src_prefix: rng.random_bool(0.4).then(|| random_prefix(rng)),
            dst_prefix: rng.random_bool(0.4).then(|| random_prefix(rng)),
        };
        if spec.snssai.is_some()
            || spec.qfi.is_some()
            || spec.dscp.is_some()
            || spec.src_prefix.is_some()
            || spec.dst_prefix.is_some()
        {
            return spec;
        }
    }
}

pub fn random_rules(rng: &mut impl Rng, n: usize) -> Vec<ClassifierRule> {
    let mut ids: Vec<u32> = (1..=(n as u32 * 3)).collect();
    ids.shuffle(rng);
    (0..n)
        .map(|i| ClassifierRule {
            rule_id: ids[i],
            priority: rng.random_range(0..20),
            match_spec: random_spec(rng),
            slice_id: format!("slice-{}", rng.random_range(0..8)),
            mark: Mark::ToSatellite,
        })
        .collect()
}

pub fn random_meta(rng: &mut impl Rng) -> FlowMeta {
    FlowMeta {
        snssai: rng.random_bool(0.7).then(|| random_snssai(rng)),
        qfi: rng.random_bool(0.6).then(|| rng.random_range(0..4)),
        dscp: rng.random_bool(0.5).then(|| rng.random_range(0..4)),
        src: rng.random_bool(0.7).then(|| random_addr(rng)),
        dst: rng.random_bool(0.7).then(|| random_addr(rng)),
    }
}

fn prefix_contains(prefix: &IpNet, addr: &IpAddr) -> bool {
    match (prefix.addr(), addr) {
        (IpAddr::V4(p), IpAddr::V4(a)) => {
            let len = u32::from(prefix.prefix_len());
            let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
            u32::from(p) & mask == u32::from(*a) & mask
        }
        (IpAddr::V6(p), IpAddr::V6(a)) => {
            let len = u32::from(prefix.prefix_len());
            let mask = if len == 0 { 0 } else { u128::MAX << (128 - len) };
            u128::from(p) & mask == u128::from(*a) & mask
        }
        _ => false,
    }
}

fn rule_matches(spec: &MatchSpec, meta: &FlowMeta) -> bool {
    if let Some(want) = spec.snssai {
        match meta.snssai {
            Some(got) if got.sst == want.sst && (want.sd.is_none() || want.sd == got.sd) => {}
            _ => return false,
        }
    }
    if spec.qfi.is_some() && spec.qfi != meta.qfi {
        return false;
    }
    if spec.dscp.is_some() && spec.dscp != meta.dscp {
        return false;
    }
    for (prefix, addr) in [(&spec.src_prefix, &meta.src), (&spec.dst_prefix, &meta.dst)] {
        if let Some(p) = prefix {
            match addr {
                Some(a) if prefix_contains(p, a) => {}
                _ => return false,
            }
        }
    }
    true
}

/// Linear scan in (priority, rule_id) order.
pub fn linear_classify<'a>(rules: &'a [ClassifierRule], default: &'a str, meta: &FlowMeta) -> &'a str {
    let mut order: Vec<&ClassifierRule> = rules.iter().collect();
    order.sort_by_key(|r| (r.priority, r.rule_id));
    order
        .into_iter()
        .find(|r| rule_matches(&r.match_spec, meta))
        .map(|r| r.slice_id.as_str())
        .unwrap_or(default)
}
