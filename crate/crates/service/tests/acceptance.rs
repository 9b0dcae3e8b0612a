//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! with its timing, and exits non-zero if any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::net::IpAddr;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ipnet::IpNet;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use s3_core::classifier::{FlowMeta, Mark, PrefixPair, RuleTable, Snssai, StitchPoint};
use s3_core::composer::{compose_chain, default_catalog, ComposeError, NfChain};
use s3_core::config::ServiceConfig;
use s3_core::emulator::{build_network, run_scenario, ArrivalPattern, Scenario, TrafficSpec};
use s3_core::pool::{AdmissionDecision, Allocation, BeamSpec, ResourcePool};
use s3_core::qos::QosMapper;
use s3_core::slice::{
    Attachment, Isolation, LifecycleEvent, LifecycleState, Orbit, SliceInstance, SliceMode, TenantControl,
    TransitionError,
};
use s3_core::Rate;
use s3_service::orchestrator::Orchestrator;
use s3_service::requests::{NssiRequest, QosDelta, StandaloneRequest, Stitching};

use common::*;

const OPERATOR: TenantControl = TenantControl::FullControl;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ------------------------------------------------------------------ 1

/// The legal transitions, written out independently of the implementation.
fn expected_transition(s: LifecycleState, e: LifecycleEvent) -> Option<LifecycleState> {
    use LifecycleEvent as E;
    use LifecycleState as S;
    const TABLE: [(S, E, S); 10] = [
        (S::Pending, E::Prepare, S::Preparing),
        (S::Preparing, E::Instantiate, S::Instantiating),
        (S::Instantiating, E::ActivateDone, S::Active),
        (S::Active, E::Modify, S::Modifying),
        (S::Modifying, E::ModifyDone, S::Active),
        (S::Active, E::Deactivate, S::Deactivated),
        (S::Deactivated, E::Reactivate, S::Active),
        (S::Active, E::Terminate, S::Terminating),
        (S::Deactivated, E::Terminate, S::Terminating),
        (S::Terminating, E::TerminateDone, S::Terminated),
    ];
    if let Some((_, _, to)) = TABLE.iter().find(|(from, ev, _)| *from == s && *ev == e) {
        return Some(*to);
    }
    (e == E::Fail && !matches!(s, S::Terminated | S::Failed)).then_some(S::Failed)
}

fn lifecycle_exhaustiveness() -> Check {
    let profile = serde_json::from_str::<NssiRequest>(include_str!("../../../samples/integrated-request.json"))
        .unwrap()
        .profile;
    let mut resourced = SliceInstance::new(profile.clone(), Attachment::Standalone { prefixes: vec![] }, 0);
    resourced.allocation = Some(Allocation::empty(&profile.slice_id, 0));
    resourced.chain = Some(NfChain::default());

    let mut agree = 0;
    for state in LifecycleState::ALL {
        for event in LifecycleEvent::ALL {
            let want = expected_transition(state, event);
            let got = s3_core::slice::next_state(state, event);
            ensure(got == want, || format!("next_state({state}, {event:?}) = {got:?}, expected {want:?}"))?;
            let inst = SliceInstance { state, ..resourced.clone() };
            match (inst.transition(event, 1), want) {
                (Ok(next), Some(to)) => ensure(next.state == to, || format!("{state} --{event:?}--> {}", next.state))?,
                (Err(TransitionError::IllegalTransition { .. }), None) => {}
                (other, _) => return Err(format!("transition({state}, {event:?}) gave {other:?}, expected {want:?}")),
            }
            agree += 1;
        }
    }
    Ok(format!("{agree}/90 state-event pairs agree"))
}

// ------------------------------------------------------------------ 2

fn propagation_bounds() -> Check {
    let mut parts = Vec::new();
    // The stated bounds are 2h/c rounded; the check itself is against 2h/c with no slack.
    for (orbit, stated, rounding, altitude) in [(Orbit::GEO, 238.7_f64, 0.1, 35_786.0), (Orbit::LEO, 3.67, 0.01, 550.0)] {
        let started = Instant::now();
        let cfg = ServiceConfig { orbit, ..ServiceConfig::default() };
        let mut o = Orchestrator::new(cfg.clone());
        o.allocate_nssi(OPERATOR, demo_integrated()).map_err(|e| e.to_string())?;
        o.create_slice(OPERATOR, demo_standalone()).map_err(|e| e.to_string())?;
        let net = build_network(o.slices(), o.pool(), o.rules(), o.mapper(), &cfg.emulator).map_err(|e| e.to_string())?;
        let scenario: Scenario = serde_json::from_str(include_str!("../../../samples/demo-scenario.json")).unwrap();
        let report = run_scenario(&net, &scenario).map_err(|e| e.to_string())?;
        let two_h_over_c = 2.0 * altitude / 299_792.458 * 1000.0;
        ensure((two_h_over_c - stated).abs() <= rounding, || format!("{orbit:?}: 2h/c = {two_h_over_c}"))?;
        let bound = two_h_over_c;
        for (id, m) in &report.slices {
            if m.packets_carried > 0 {
                ensure(m.mean_delay_ms >= bound, || {
                    format!("{orbit:?} slice {id}: mean delay {} ms below {bound:.4}", m.mean_delay_ms)
                })?;
            }
        }
        let elapsed = started.elapsed();
        ensure(elapsed < Duration::from_secs(10), || format!("{orbit:?} scenario took {elapsed:?}"))?;
        let min = report
            .slices
            .values()
            .filter(|m| m.packets_carried > 0)
            .map(|m| m.mean_delay_ms)
            .fold(f64::INFINITY, f64::min);
        parts.push(format!("{orbit:?} min mean delay {min:.3} ms >= {bound:.4} (~{stated})"));
    }
    Ok(parts.join(", "))
}

// ------------------------------------------------------------------ 3

fn isolation_property() -> Check {
    let mut worst: f64 = 0.0;
    let seeds = 24;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let victim_gbr = rng.random_range(2..=20) as f64;
        let aggressor_gbr = rng.random_range(1..=10) as f64;
        let aggressor_mbr = aggressor_gbr + rng.random_range(0..=20) as f64;
        let capacity = victim_gbr + aggressor_gbr + rng.random_range(1..=40) as f64;

        let cfg = ServiceConfig {
            beams: vec![BeamSpec { id: "beam-1".into(), fwd_mbps: mbps(capacity), rtn_mbps: mbps(capacity) }],
            ..ServiceConfig::default()
        };
        let mut o = Orchestrator::new(cfg.clone());
        let mut victim = demo_integrated();
        victim.profile.slice_id = "victim".into();
        victim.profile.isolation = Isolation::Hard;
        victim.profile.qos.gbr_mbps = mbps(victim_gbr);
        victim.profile.qos.mbr_mbps = mbps(victim_gbr);
        victim.stitching.snssai = Some(Snssai { sst: 1, sd: None });
        victim.stitching.qfis.clear();
        let mut aggressor = demo_integrated();
        aggressor.profile.slice_id = "aggressor".into();
        aggressor.profile.qos.gbr_mbps = mbps(aggressor_gbr);
        aggressor.profile.qos.mbr_mbps = mbps(aggressor_mbr);
        aggressor.stitching.snssai = Some(Snssai { sst: 2, sd: None });
        aggressor.stitching.qfis.clear();
        o.allocate_nssi(OPERATOR, victim).map_err(|e| format!("seed {seed}: victim {e}"))?;
        o.allocate_nssi(OPERATOR, aggressor).map_err(|e| format!("seed {seed}: aggressor {e}"))?;

        let net = build_network(o.slices(), o.pool(), o.rules(), o.mapper(), &cfg.emulator).map_err(|e| e.to_string())?;
        let mut flow = |sst, rate, pattern| TrafficSpec {
            flow_id: None,
            meta: FlowMeta { snssai: Some(Snssai { sst, sd: None }), ..FlowMeta::default() },
            beam: None,
            rate_mbps: rate,
            packet_size_bytes: Some(rng.random_range(200..=1500)),
            pattern,
            start_s: 0.0,
            stop_s: 5.0,
        };
        let scenario = Scenario {
            duration_s: 5.0,
            seed,
            flows: vec![flow(1, victim_gbr, ArrivalPattern::CBR), flow(2, 10.0 * aggressor_mbr, ArrivalPattern::Poisson)],
        };
        let report = run_scenario(&net, &scenario).map_err(|e| e.to_string())?;
        let v = &report.slices["victim"];
        ensure(v.packets_offered > 0, || format!("seed {seed}: victim offered nothing"))?;
        ensure(v.loss_ratio <= 0.02, || format!("seed {seed}: victim loss {} ({v:?})", v.loss_ratio))?;
        worst = worst.max(v.loss_ratio);
    }
    Ok(format!("{seeds} seeds, worst victim loss {worst:.4} <= 0.02"))
}

// ------------------------------------------------------------------ 4

fn composer_optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut solved, mut uncoverable) = (0, 0);
    for i in 0..200 {
        let catalog = random_catalog(&mut rng, 10);
        let required = random_required(&mut rng);
        match (compose_chain(&required, &catalog), brute_force_cover(&required, &catalog)) {
            (Ok(chain), Some((cost, ids))) => {
                ensure(chain.total_cost() == cost, || format!("catalog {i}: cost {} vs optimum {cost}", chain.total_cost()))?;
                let mut got: Vec<String> = chain.nf_ids().into_iter().map(String::from).collect();
                got.sort();
                ensure(got == ids, || format!("catalog {i}: picked {got:?}, tie-break optimum {ids:?}"))?;
                solved += 1;
            }
            (Err(ComposeError::Uncoverable(_)), None) => uncoverable += 1,
            (got, want) => return Err(format!("catalog {i}: composer {got:?}, oracle {want:?}")),
        }
    }
    Ok(format!("200/200 agree ({solved} optimal covers, {uncoverable} uncoverable)"))
}

// ------------------------------------------------------------------ 5

fn random_chain(rng: &mut ChaCha8Rng) -> NfChain {
    let catalog = random_catalog(rng, 6);
    let k = rng.random_range(1..=catalog.len());
    NfChain::from_members(catalog.choose_multiple(rng, k).cloned().collect())
}

fn admission_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mapper = QosMapper::default();
    let mut tally = std::collections::BTreeMap::<&str, usize>::new();
    for i in 0..500 {
        let (hosts, beams) = random_inventory(&mut rng);
        let orbit = [Orbit::LEO, Orbit::MEO, Orbit::GEO][rng.random_range(0..3)];
        let altitude = mapper.altitudes.for_orbit(orbit);
        let mut pool = ResourcePool::new(orbit, 2.0, &hosts, &beams).unwrap();
        let mut model = PoolModel::new(hosts, beams.clone(), 2.0, altitude);
        // Background load admitted through the pool and mirrored in the model.
        for j in 0..rng.random_range(0..6) {
            let p = random_profile(&mut rng, &format!("bg{j}"), &beams);
            let c = random_chain(&mut rng);
            if model.decide(&p, &c.members).is_none() {
                let a = pool.allocate(&p, &c, 0).map_err(|e| format!("instance {i}: background {e}"))?;
                model.live.insert(p.slice_id.clone(), (p, c.members, a.placement.assignments));
            }
        }
        let profile = random_profile(&mut rng, "candidate", &beams);
        let chain = random_chain(&mut rng);
        let decision = pool.check_admission(&profile, &chain, &mapper).map_err(|e| e.to_string())?;
        let expected = model.decide(&profile, &chain.members);
        let got = decision.reject_reason().map(|r| r.code());
        ensure(got == expected, || format!("instance {i}: check_admission {got:?}, direct evaluation {expected:?}"))?;
        if let AdmissionDecision::Admit { placement, .. } = &decision {
            let ff = model.first_fit(&chain.members);
            ensure(Some(&placement.assignments) == ff.as_ref(), || format!("instance {i}: placement differs"))?;
        }
        *tally.entry(expected.unwrap_or("ADMIT")).or_default() += 1;
    }
    Ok(format!("500/500 agree {tally:?}"))
}

// ------------------------------------------------------------------ 6

fn capacity_conservation() -> Check {
    let mut total_ops = 0;
    for run in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(60 + run);
        let (hosts, beams) = random_inventory(&mut rng);
        let mut pool = ResourcePool::new(Orbit::LEO, 2.0, &hosts, &beams).unwrap();
        let mut model = PoolModel::new(hosts.clone(), beams.clone(), 2.0, 550.0);
        let mut live: Vec<Allocation> = Vec::new();
        for op in 0..1000 {
            match rng.random_range(0..3) {
                0 => {
                    let p = random_profile(&mut rng, &format!("r{run}-s{op}"), &beams);
                    let c = random_chain(&mut rng);
                    if let Ok(a) = pool.allocate(&p, &c, 0) {
                        model.live.insert(p.slice_id.clone(), (p, c.members, a.placement.assignments.clone()));
                        live.push(a);
                    }
                }
                1 if !live.is_empty() => {
                    let a = live.swap_remove(rng.random_range(0..live.len()));
                    pool.release(&a).map_err(|e| format!("op {op}: release {e}"))?;
                    model.live.remove(&a.slice_id);
                }
                _ if !live.is_empty() => {
                    let idx = rng.random_range(0..live.len());
                    let old = live[idx].clone();
                    let p = random_profile(&mut rng, &old.slice_id, &beams);
                    let c = random_chain(&mut rng);
                    if let Ok(new) = pool.reallocate(&old, &p, &c) {
                        model.live.insert(p.slice_id.clone(), (p, c.members, new.placement.assignments.clone()));
                        live[idx] = new;
                    }
                }
                _ => {}
            }
            total_ops += 1;
            for b in &beams {
                let r = pool.beam(&b.id).unwrap();
                for (forward, totals, cap) in [(true, r.fwd, b.fwd_mbps), (false, r.rtn, b.rtn_mbps)] {
                    let (g, m, c) = model.link_sums(&b.id, forward);
                    ensure(
                        (totals.gbr.bps(), totals.mbr.bps(), totals.committed.bps()) == (g, m, c),
                        || format!("run {run} op {op}: beam {} totals drifted", b.id),
                    )?;
                    let residual = cap.checked_sub(totals.committed).map(Rate::bps);
                    ensure(residual == Some(cap.bps() - c), || format!("run {run} op {op}: residual mismatch"))?;
                }
            }
            for h in &pool.hosts {
                let (cpu, mem) = model.host_used(&h.host_id);
                ensure((h.allocated_cpu, h.allocated_mem) == (cpu, mem), || {
                    format!("run {run} op {op}: host {} totals drifted", h.host_id)
                })?;
            }
            pool.audit().map_err(|e| format!("run {run} op {op}: {e}"))?;
        }
    }
    Ok(format!("{total_ops} operations, totals exact after every step"))
}

// ------------------------------------------------------------------ 7

fn classifier_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut samples = 0;
    let mut defaulted = 0;
    for t in 0..20 {
        let rules = random_rules(&mut rng, 50);
        let table = RuleTable::new(rules.clone(), "default".into()).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let meta = random_meta(&mut rng);
            let want = linear_classify(&rules, "default", &meta);
            let got = table.classify(&meta);
            ensure(got == want, || format!("table {t}: {meta:?} -> {got}, linear scan {want}"))?;
            samples += 1;
            defaulted += usize::from(want == "default");
        }
    }
    Ok(format!("{samples}/10000 agree ({defaulted} fell through to default)"))
}

// ------------------------------------------------------------------ 8

#[derive(Debug, Clone)]
enum Op {
    Integrated(NssiRequest),
    Standalone(StandaloneRequest),
    Modify(String, QosDelta),
    Delete(String),
    DropCatalogNf,
    RestoreCatalog,
    Checkpoint,
}

fn random_op(rng: &mut ChaCha8Rng, n: usize) -> Op {
    let id = format!("s{}", rng.random_range(0..n.max(1) + 2));
    let beams = ServiceConfig::default().beams;
    match rng.random_range(0..20) {
        0..=5 => {
            let mut profile = random_profile(rng, &id, &beams);
            profile.mode = SliceMode::Integrated;
            profile.qos.pdb_ms = rng.random_range(200.0..500.0);
            Op::Integrated(NssiRequest {
                profile,
                e2e_slice_ref: format!("e2e-{id}"),
                stitching: Stitching {
                    snssai: Some(Snssai { sst: rng.random_range(1..=3), sd: Some(rng.random_range(0..4)) }),
                    qfis: (0..rng.random_range(0..3)).map(|_| rng.random_range(0..8)).collect(),
                    ..Stitching::default()
                },
            })
        }
        6..=10 => {
            let mut profile = random_profile(rng, &id, &beams);
            profile.mode = SliceMode::Standalone;
            profile.qos.pdb_ms = rng.random_range(200.0..500.0);
            let net = |a: u8, len| IpNet::new(IpAddr::from([10, a, 0, 0]), len).unwrap().trunc();
            Op::Standalone(StandaloneRequest {
                profile,
                prefixes: vec![PrefixPair {
                    terminal: net(rng.random_range(0..8), rng.random_range(8..=24)),
                    hub: net(100 + rng.random_range(0..8), 16),
                }],
            })
        }
        11..=14 => Op::Modify(
            id,
            QosDelta {
                gbr_mbps: Some(mbps(rng.random_range(0..=60) as f64)),
                mbr_mbps: Some(mbps(rng.random_range(60..=120) as f64)),
                ..QosDelta::default()
            },
        ),
        15..=17 => Op::Delete(id),
        18 => {
            if rng.random_bool(0.5) {
                Op::DropCatalogNf
            } else {
                Op::RestoreCatalog
            }
        }
        _ => Op::Checkpoint,
    }
}

fn apply(o: &mut Orchestrator, op: &Op) {
    // Rejections are part of the history too.
    let _ = match op.clone() {
        Op::Integrated(r) => o.allocate_nssi(OPERATOR, r).map(|_| ()),
        Op::Standalone(r) => o.create_slice(OPERATOR, r).map(|_| ()),
        Op::Modify(id, d) => o.modify(OPERATOR, &id, &d).map(|_| ()),
        Op::Delete(id) => o.deallocate(OPERATOR, &id).map(|_| ()),
        Op::DropCatalogNf => {
            let cat: Vec<_> = o.catalog().iter().filter(|nf| nf.nf_id != "pep-accelerator").cloned().collect();
            o.set_catalog(OPERATOR, cat)
        }
        Op::RestoreCatalog => o.set_catalog(OPERATOR, default_catalog()),
        Op::Checkpoint => {
            o.checkpoint().unwrap();
            Ok(())
        }
    };
}

fn crash_recovery() -> Check {
    let cfg = ServiceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut total_ops = 0;
    let mut torn = 0;
    for trial in 0..100 {
        let len = rng.random_range(0..=40);
        let ops: Vec<Op> = (0..len).map(|i| random_op(&mut rng, i)).collect();
        total_ops += len;

        let crashed = tempfile::tempdir().unwrap();
        let clean = tempfile::tempdir().unwrap();
        let live_view = {
            let mut o = Orchestrator::open(cfg.clone(), crashed.path()).map_err(|e| e.to_string())?;
            for op in &ops {
                apply(&mut o, op);
            }
            o.view()
        };
        if rng.random_bool(0.5) {
            // A torn write of a further record.
            let tail = rng.random_range(1..64);
            let mut f = std::fs::OpenOptions::new().append(true).open(crashed.path().join("events.log")).unwrap();
            std::io::Write::write_all(&mut f, &vec![0xAB; tail][..tail.min(7)]).unwrap();
            torn += 1;
        }
        {
            let mut o = Orchestrator::open(cfg.clone(), clean.path()).map_err(|e| e.to_string())?;
            for op in &ops {
                apply(&mut o, op);
            }
            o.shutdown().map_err(|e| e.to_string())?;
        }
        let recovered = Orchestrator::open(cfg.clone(), crashed.path()).map_err(|e| format!("trial {trial}: {e}"))?;
        let restarted = Orchestrator::open(cfg.clone(), clean.path()).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure(recovered.view() == live_view, || format!("trial {trial}: crash replay differs from live state"))?;
        ensure(restarted.view() == recovered.view(), || format!("trial {trial}: crash replay differs from clean restart"))?;
        recovered.pool().audit().map_err(|e| e.to_string())?;
    }
    Ok(format!("100/100 prefixes ({total_ops} ops, {torn} with torn tails) recover exactly"))
}

// ------------------------------------------------------------------ 9

fn dual_mode_stitching() -> Check {
    let mut o = Orchestrator::new(ServiceConfig::default());
    o.allocate_nssi(OPERATOR, demo_integrated()).map_err(|e| e.to_string())?;
    o.create_slice(OPERATOR, demo_standalone()).map_err(|e| e.to_string())?;
    let at = |l: &str, d| StitchPoint { location: l.into(), direction: d };
    let integrated: BTreeSet<_> = [
        at("ran_edge", Mark::ToSatellite),
        at("cn_edge", Mark::FromSatellite),
        at("hub_edge", Mark::ToSatellite),
        at("hub_edge", Mark::FromSatellite),
    ]
    .into();
    let standalone: BTreeSet<_> = [at("terminal_edge", Mark::ToSatellite), at("hub_edge", Mark::FromSatellite)].into();

    let points = |id: &str| -> BTreeSet<StitchPoint> { o.describe(id).unwrap().stitch_points.into_iter().collect() };
    ensure(points("embb-video") == integrated, || format!("integrated: {:?}", points("embb-video")))?;
    ensure(points("maritime-fleet") == standalone, || format!("standalone: {:?}", points("maritime-fleet")))?;
    ensure(o.describe("embb-video").unwrap().stitch_points.len() == 4, || "integrated count".into())?;
    ensure(o.describe("maritime-fleet").unwrap().stitch_points.len() == 2, || "standalone count".into())?;

    // Each installed table holds exactly the slices stitched there.
    for t in o.stitch_tables() {
        let point = at(&t.location, t.direction);
        let mut owners: BTreeSet<&str> = t.table.rules().iter().map(|r| r.slice_id.as_str()).collect();
        let mut want = BTreeSet::new();
        if integrated.contains(&point) {
            want.insert("embb-video");
        }
        if standalone.contains(&point) {
            want.insert("maritime-fleet");
        }
        ensure(owners == want, || format!("{point:?}: tables for {owners:?}, expected {want:?}"))?;
        ensure(t.table.rules().iter().all(|r| r.mark == t.direction), || format!("{point:?}: wrong marks"))?;
        owners.clear();
    }
    Ok("integrated {ran_edge, cn_edge, hub_edge x2}; standalone {terminal_edge, hub_edge}".into())
}

// ------------------------------------------------------------------ 10

fn demo_integrated() -> NssiRequest {
    serde_json::from_str(include_str!("../../../samples/integrated-request.json")).unwrap()
}

fn demo_standalone() -> StandaloneRequest {
    serde_json::from_str(include_str!("../../../samples/standalone-request.json")).unwrap()
}

fn demo_run() -> Result<(String, String), String> {
    let cfg = ServiceConfig::default();
    let mut o = Orchestrator::new(cfg.clone());
    o.allocate_nssi(OPERATOR, demo_integrated()).map_err(|e| e.to_string())?;
    o.create_slice(OPERATOR, demo_standalone()).map_err(|e| e.to_string())?;
    let net = build_network(o.slices(), o.pool(), o.rules(), o.mapper(), &cfg.emulator).map_err(|e| e.to_string())?;
    let scenario: Scenario = serde_json::from_str(include_str!("../../../samples/demo-scenario.json")).unwrap();
    let report = run_scenario(&net, &scenario).map_err(|e| e.to_string())?;
    Ok((serde_json::to_string_pretty(&report).unwrap(), report.beam_csv()))
}

fn emulator_determinism() -> Check {
    let (a_json, a_csv) = demo_run()?;
    let (b_json, b_csv) = demo_run()?;
    ensure(a_json.as_bytes() == b_json.as_bytes(), || "reports differ".into())?;
    ensure(a_csv.as_bytes() == b_csv.as_bytes(), || "utilization series differ".into())?;
    ensure(a_json.contains("\"seed\": 42"), || "demo scenario is not seed 42".into())?;
    Ok(format!("seed 42: two reports byte-identical ({} bytes)", a_json.len()))
}

// ------------------------------------------------------------------ main

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 lifecycle exhaustiveness", lifecycle_exhaustiveness, Duration::from_secs(1)),
        ("2 propagation bounds", propagation_bounds, Duration::from_secs(20)),
        ("3 isolation property", isolation_property, Duration::from_secs(60)),
        ("4 composer optimality", composer_optimality, Duration::from_secs(30)),
        ("5 admission oracle", admission_oracle, Duration::from_secs(10)),
        ("6 capacity conservation", capacity_conservation, Duration::from_secs(10)),
        ("7 classifier oracle", classifier_oracle, Duration::from_secs(5)),
        ("8 crash recovery", crash_recovery, Duration::from_secs(30)),
        ("9 dual-mode stitching", dual_mode_stitching, Duration::from_secs(1)),
        ("10 emulator determinism", emulator_determinism, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let started = Instant::now();
        let result = check();
        let elapsed = started.elapsed();
        let result = result.and_then(|detail| {
            if elapsed < limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS  {name:<28} {:>9.3?}  {detail}", elapsed),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<28} {:>9.3?}  {why}", elapsed);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
