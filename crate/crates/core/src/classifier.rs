//! Slice classifiers: rule tables that map flow metadata to slice ids at the
//! boundaries where the satellite subnet is stitched to its neighbours.

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use ipnet::IpNet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::slice::{Attachment, SliceInstance, SliceMode};

pub const DEFAULT_SLICE: &str = "default";

/// Priority tiers, most specific first. Prefix rules are further ordered by
/// combined prefix length so longer prefixes win.
pub const TIER_SNSSAI_QFI: u32 = 100;
pub const TIER_SNSSAI: u32 = 200;
pub const TIER_PREFIX: u32 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Snssai {
    pub sst: u8,
    /// 24-bit slice differentiator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<u32>,
}

impl Snssai {
    pub fn is_valid(&self) -> bool {
        self.sd.is_none_or(|sd| sd <= 0x00FF_FFFF)
    }

    fn matches(&self, other: &Snssai) -> bool {
        self.sst == other.sst && self.sd.is_none_or(|sd| other.sd == Some(sd))
    }
}

/// Terminal-side and hub-side prefixes of a standalone slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrefixPair {
    pub terminal: IpNet,
    pub hub: IpNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mark {
    ToSatellite,
    FromSatellite,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snssai: Option<Snssai>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qfi: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dscp: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_prefix: Option<IpNet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_prefix: Option<IpNet>,
}

impl MatchSpec {
    pub fn is_valid(&self) -> bool {
        let any = self.snssai.is_some()
            || self.qfi.is_some()
            || self.dscp.is_some()
            || self.src_prefix.is_some()
            || self.dst_prefix.is_some();
        any && self.snssai.is_none_or(|s| s.is_valid())
            && self.qfi.is_none_or(|q| q <= 63)
            && self.dscp.is_none_or(|d| d <= 63)
    }

    /// Every present field must equal (or, for prefixes, contain) the
    /// corresponding metadata field; absent fields are wildcards.
    pub fn matches(&self, meta: &FlowMeta) -> bool {
        fn contains(prefix: &Option<IpNet>, addr: &Option<IpAddr>) -> bool {
            match (prefix, addr) {
                (None, _) => true,
                (Some(p), Some(a)) => p.contains(a),
                (Some(_), None) => false,
            }
        }
        fn equal<T: PartialEq>(want: &Option<T>, got: &Option<T>) -> bool {
            want.is_none() || want == got
        }
        let snssai_ok = match (&self.snssai, &meta.snssai) {
            (None, _) => true,
            (Some(r), Some(m)) => r.matches(m),
            (Some(_), None) => false,
        };
        snssai_ok
            && equal(&self.qfi, &meta.qfi)
            && equal(&self.dscp, &meta.dscp)
            && contains(&self.src_prefix, &meta.src)
            && contains(&self.dst_prefix, &meta.dst)
    }
}

/// Flow metadata seen at a stitch point.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snssai: Option<Snssai>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qfi: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dscp: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<IpAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<IpAddr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierRule {
    #[serde(rename = "id")]
    pub rule_id: u32,
    /// Lower wins.
    pub priority: u32,
    #[serde(rename = "match")]
    pub match_spec: MatchSpec,
    #[serde(rename = "slice")]
    pub slice_id: String,
    pub mark: Mark,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifierError {
    #[error("slices {first} and {second} produce identical match {spec}")]
    ConflictingRules {
        first: String,
        second: String,
        spec: String,
    },
    #[error("slice {0} lacks stitching identifiers")]
    MissingStitching(String),
    #[error("duplicate rule id {0}")]
    DuplicateRuleId(u32),
    #[error("rule {0} has an empty or out-of-range match")]
    InvalidMatch(u32),
}

/// JSON shape of an exported table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTableDoc {
    pub rules: Vec<ClassifierRule>,
    pub default: String,
}

/// Immutable, sorted rule snapshot with an index on the S-NSSAI SST.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RuleTableDoc", try_from = "RuleTableDoc")]
pub struct RuleTable {
    rules: Vec<ClassifierRule>,
    default_slice: String,
    by_sst: BTreeMap<u8, Vec<usize>>,
    any_sst: Vec<usize>,
}

impl From<RuleTable> for RuleTableDoc {
    fn from(t: RuleTable) -> Self {
        RuleTableDoc {
            rules: t.rules,
            default: t.default_slice,
        }
    }
}

impl TryFrom<RuleTableDoc> for RuleTable {
    type Error = ClassifierError;
    fn try_from(doc: RuleTableDoc) -> Result<Self, Self::Error> {
        RuleTable::new(doc.rules, doc.default)
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable::new(Vec::new(), DEFAULT_SLICE.to_string()).expect("empty table is valid")
    }
}

impl RuleTable {
    pub fn new(mut rules: Vec<ClassifierRule>, default_slice: String) -> Result<Self, ClassifierError> {
        let mut ids = BTreeSet::new();
        for r in &rules {
            if !ids.insert(r.rule_id) {
                return Err(ClassifierError::DuplicateRuleId(r.rule_id));
            }
            if !r.match_spec.is_valid() {
                return Err(ClassifierError::InvalidMatch(r.rule_id));
            }
        }
        rules.sort_by_key(|r| (r.priority, r.rule_id));
        let mut by_sst: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        let mut any_sst = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            match r.match_spec.snssai {
                Some(s) => by_sst.entry(s.sst).or_default().push(i),
                None => any_sst.push(i),
            }
        }
        Ok(RuleTable {
            rules,
            default_slice,
            by_sst,
            any_sst,
        })
    }

    pub fn rules(&self) -> &[ClassifierRule] {
        &self.rules
    }

    pub fn default_slice(&self) -> &str {
        &self.default_slice
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// The first matching rule in (priority, rule_id) order, if any.
    pub fn lookup(&self, meta: &FlowMeta) -> Option<&ClassifierRule> {
        let keyed: &[usize] = meta
            .snssai
            .and_then(|s| self.by_sst.get(&s.sst))
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let (mut a, mut b) = (keyed.iter().peekable(), self.any_sst.iter().peekable());
        loop {
            let next = match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) if x < y => a.next(),
                (Some(_), Some(_)) => b.next(),
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (None, None) => return None,
            };
            let rule = &self.rules[*next.expect("peeked")];
            if rule.match_spec.matches(meta) {
                return Some(rule);
            }
        }
    }

    pub fn classify(&self, meta: &FlowMeta) -> &str {
        self.lookup(meta)
            .map(|r| r.slice_id.as_str())
            .unwrap_or(&self.default_slice)
    }

    /// The table as applied to the opposite direction: marks flip to
    /// `FromSatellite` and source/destination prefixes swap.
    pub fn for_direction(&self, mark: Mark) -> RuleTable {
        if mark == Mark::ToSatellite {
            return self.clone();
        }
        let rules = self
            .rules
            .iter()
            .map(|r| {
                let mut r = r.clone();
                std::mem::swap(&mut r.match_spec.src_prefix, &mut r.match_spec.dst_prefix);
                r.mark = mark;
                r
            })
            .collect();
        RuleTable::new(rules, self.default_slice.clone()).expect("relabelling keeps ids and matches valid")
    }
}

fn prefix_priority(pair: &PrefixPair) -> u32 {
    TIER_PREFIX + 256 - u32::from(pair.terminal.prefix_len()) - u32::from(pair.hub.prefix_len())
}

/// Match specs (with priorities) one slice contributes.
pub fn slice_matches(instance: &SliceInstance) -> Result<Vec<(u32, MatchSpec)>, ClassifierError> {
    let mut out: Vec<(u32, MatchSpec)> = Vec::new();
    match &instance.attachment {
        Attachment::Integrated { snssai, qfis, .. } => {
            let snssai = snssai.ok_or_else(|| ClassifierError::MissingStitching(instance.slice_id().to_string()))?;
            if qfis.is_empty() {
                out.push((
                    TIER_SNSSAI,
                    MatchSpec {
                        snssai: Some(snssai),
                        ..MatchSpec::default()
                    },
                ));
            }
            for &qfi in qfis {
                out.push((
                    TIER_SNSSAI_QFI,
                    MatchSpec {
                        snssai: Some(snssai),
                        qfi: Some(qfi),
                        ..MatchSpec::default()
                    },
                ));
            }
        }
        Attachment::Standalone { prefixes } => {
            if prefixes.is_empty() {
                return Err(ClassifierError::MissingStitching(instance.slice_id().to_string()));
            }
            for pair in prefixes {
                let spec = MatchSpec {
                    src_prefix: Some(pair.terminal),
                    dst_prefix: Some(pair.hub),
                    ..MatchSpec::default()
                };
                if !out.iter().any(|(_, s)| s == &spec) {
                    out.push((prefix_priority(pair), spec));
                }
            }
        }
    }
    Ok(out)
}

/// Compiles the ingress (`ToSatellite`) table from every slice that carries
/// traffic. `slices` must be in creation order; rule ids follow it.
pub fn compile_rules(slices: &[SliceInstance]) -> Result<RuleTable, ClassifierError> {
    let mut owners: BTreeMap<MatchSpec, &str> = BTreeMap::new();
    let mut rules = Vec::new();
    let mut next_id = 1u32;
    for inst in slices.iter().filter(|s| s.state.carries_traffic()) {
        for (priority, spec) in slice_matches(inst)? {
            if let Some(first) = owners.get(&spec) {
                return Err(ClassifierError::ConflictingRules {
                    first: first.to_string(),
                    second: inst.slice_id().to_string(),
                    spec: serde_json::to_string(&spec).unwrap_or_default(),
                });
            }
            owners.insert(spec.clone(), inst.slice_id());
            rules.push(ClassifierRule {
                rule_id: next_id,
                priority,
                match_spec: spec,
                slice_id: inst.slice_id().to_string(),
                mark: Mark::ToSatellite,
            });
            next_id += 1;
        }
    }
    RuleTable::new(rules, DEFAULT_SLICE.to_string())
}

/// Names of the four boundary locations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchTopology {
    pub ran_edge: String,
    pub cn_edge: String,
    pub terminal_edge: String,
    pub hub_edge: String,
}

impl Default for StitchTopology {
    fn default() -> Self {
        StitchTopology {
            ran_edge: "ran_edge".into(),
            cn_edge: "cn_edge".into(),
            terminal_edge: "terminal_edge".into(),
            hub_edge: "hub_edge".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StitchPoint {
    pub location: String,
    pub direction: Mark,
}

/// Where classifiers sit for a slice of the given mode. Integrated slices
/// are stitched to the RAN and core, standalone slices only at the terminal
/// and the hub.
pub fn stitch_points(mode: SliceMode, topology: &StitchTopology) -> Vec<StitchPoint> {
    let at = |location: &String, direction| StitchPoint {
        location: location.clone(),
        direction,
    };
    match mode {
        SliceMode::Integrated => vec![
            at(&topology.ran_edge, Mark::ToSatellite),
            at(&topology.cn_edge, Mark::FromSatellite),
            at(&topology.hub_edge, Mark::ToSatellite),
            at(&topology.hub_edge, Mark::FromSatellite),
        ],
        SliceMode::Standalone => vec![
            at(&topology.terminal_edge, Mark::ToSatellite),
            at(&topology.hub_edge, Mark::FromSatellite),
        ],
    }
}
