use std::collections::BTreeSet;

use proptest::prelude::*;
use s3_core::classifier::Snssai;
use s3_core::config::ServiceConfig;
use s3_core::slice::{LifecycleState, TenantControl};
use s3_core::Rate;
use s3_service::orchestrator::Orchestrator;
use s3_service::requests::{NssiRequest, QosDelta, StandaloneRequest};
use s3_service::Stage;

const OP: TenantControl = TenantControl::FullControl;

#[derive(Debug, Clone)]
enum Op {
    Integrated { id: u8, gbr: u32, mbr_extra: u32, sst: u8, beam: u8 },
    Standalone { id: u8, gbr: u32, net: u8 },
    Modify { id: u8, gbr: u32 },
    Delete { id: u8 },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..8u8, 0..60u32, 0..80u32, 1..4u8, 0..3u8)
            .prop_map(|(id, gbr, mbr_extra, sst, beam)| Op::Integrated { id, gbr, mbr_extra, sst, beam }),
        2 => (0..8u8, 0..40u32, 0..16u8).prop_map(|(id, gbr, net)| Op::Standalone { id, gbr, net }),
        2 => (0..8u8, 0..80u32).prop_map(|(id, gbr)| Op::Modify { id, gbr }),
        2 => (0..8u8).prop_map(|id| Op::Delete { id }),
    ]
}

fn fault() -> impl Strategy<Value = Option<Stage>> {
    prop_oneof![
        4 => Just(None),
        1 => proptest::sample::select(Stage::CREATE_PIPELINE.to_vec()).prop_map(Some),
    ]
}

fn apply(o: &mut Orchestrator, op: &Op) -> bool {
    let beams = ["beam-1", "beam-2", "beam-3"];
    match op {
        Op::Integrated { id, gbr, mbr_extra, sst, beam } => {
            let mut r: NssiRequest = serde_json::from_str(include_str!("../../../samples/integrated-request.json")).unwrap();
            r.profile.slice_id = format!("s{id}");
            r.profile.qos.gbr_mbps = Rate::from_bps(*gbr as u64 * 1_000_000);
            r.profile.qos.mbr_mbps = Rate::from_bps((gbr + mbr_extra) as u64 * 1_000_000);
            r.profile.coverage_beams = [beams[*beam as usize].to_string()].into();
            r.stitching.snssai = Some(Snssai { sst: *sst, sd: Some(*id as u32) });
            o.allocate_nssi(OP, r).is_ok()
        }
        Op::Standalone { id, gbr, net } => {
            let mut r: StandaloneRequest =
                serde_json::from_str(include_str!("../../../samples/standalone-request.json")).unwrap();
            r.profile.slice_id = format!("s{id}");
            r.profile.qos.gbr_mbps = Rate::from_bps(*gbr as u64 * 1_000_000);
            r.profile.qos.mbr_mbps = Rate::from_bps(*gbr as u64 * 1_000_000);
            r.prefixes[0].terminal = format!("10.{net}.0.0/16").parse().unwrap();
            o.create_slice(OP, r).is_ok()
        }
        Op::Modify { id, gbr } => {
            let delta = QosDelta { gbr_mbps: Some(Rate::from_bps(*gbr as u64 * 1_000_000)), ..QosDelta::default() };
            o.modify(OP, &format!("s{id}"), &delta).is_ok()
        }
        Op::Delete { id } => o.deallocate(OP, &format!("s{id}")).is_ok(),
    }
}

fn check(o: &Orchestrator, cfg: &ServiceConfig) -> Result<(), TestCaseError> {
    o.pool().audit().map_err(|e| TestCaseError::fail(e.to_string()))?;

    let ids: Vec<&str> = o.slices().iter().map(|s| s.slice_id()).collect();
    let unique: BTreeSet<&str> = ids.iter().copied().collect();
    prop_assert_eq!(ids.len(), unique.len());

    // Pool totals are exactly the sum of the allocations held by live slices.
    let mut rebuilt = Orchestrator::new(cfg.clone()).pool().clone();
    let mut holders = BTreeSet::new();
    for s in o.slices() {
        let holds = s.allocation.is_some();
        prop_assert_eq!(holds, matches!(s.state, LifecycleState::Active | LifecycleState::Deactivated), "{}", s.slice_id());
        if let Some(a) = &s.allocation {
            rebuilt.restore(a.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
            holders.insert(s.slice_id());
        }
    }
    prop_assert_eq!(&rebuilt.beams, &o.pool().beams);
    prop_assert_eq!(&rebuilt.hosts, &o.pool().hosts);

    // Only live slices have classifier rules, and each of them has some.
    let ruled: BTreeSet<&str> = o.rules().rules().iter().map(|r| r.slice_id.as_str()).collect();
    prop_assert_eq!(ruled, holders);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn faulted_operations_change_nothing_but_the_record(
        steps in proptest::collection::vec((op(), fault()), 1..30)
    ) {
        let cfg = ServiceConfig::default();
        let mut o = Orchestrator::new(cfg.clone());
        for (op, fault) in &steps {
            let pool_before = o.pool().clone();
            let rules_before = o.rules().clone();
            o.inject_fault(*fault);
            let ok = apply(&mut o, op);
            o.inject_fault(None);
            if fault.is_some() && !matches!(op, Op::Delete { .. }) {
                prop_assert!(!ok);
                prop_assert_eq!(&pool_before, o.pool());
                prop_assert_eq!(&rules_before, o.rules());
            }
            check(&o, &cfg)?;
        }
    }
}
