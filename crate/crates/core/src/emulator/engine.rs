//! The event loop.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{
    ArrivalPattern, BeamSeries, EmulatedNetwork, MetricsReport, Scenario, ScenarioError, SliceMetrics,
};

const NS_PER_S: f64 = 1e9;
const NS: u128 = 1_000_000_000;

fn secs_to_ns(s: f64) -> u64 {
    (s * NS_PER_S).round() as u64
}

/// Token bucket with tokens held in bit-nanoseconds so refills are exact.
#[derive(Debug)]
struct Bucket {
    rate_bps: u128,
    depth: u128,
    tokens: u128,
    last: u64,
}

impl Bucket {
    fn new(rate_bps: u64, burst_ms: f64, min_depth_bits: u64) -> Self {
        let burst_bits = (rate_bps as f64 * burst_ms / 1000.0).round() as u64;
        let depth = u128::from(burst_bits.max(min_depth_bits)) * NS;
        Bucket {
            rate_bps: rate_bps.into(),
            depth,
            tokens: depth,
            last: 0,
        }
    }

    fn refill(&mut self, now: u64) {
        let dt = u128::from(now - self.last);
        self.tokens = (self.tokens + self.rate_bps * dt).min(self.depth);
        self.last = now;
    }

    fn has(&self, bits: u64) -> bool {
        self.tokens >= u128::from(bits) * NS
    }

    fn take(&mut self, bits: u64) {
        self.tokens -= u128::from(bits) * NS;
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    bits: u64,
    arrival: u64,
    guaranteed: bool,
}

struct QueueState {
    packets: VecDeque<Packet>,
    committed: Option<Bucket>,
    peak: Option<Bucket>,
    vtime: f64,
    egress_ns: u64,
    slice: usize,
}

struct BeamState {
    capacity_bps: u64,
    in_service: Option<(usize, Packet)>,
    vclock: f64,
    busy_ns: Vec<u64>,
    queues: Vec<usize>,
}

struct FlowState {
    queue: usize,
    bits: u64,
    rate_bps: f64,
    start_ns: u64,
    end_ns: u64,
    pattern: ArrivalPattern,
    sent: u64,
    next_at: u64,
    rng: ChaCha8Rng,
}

impl FlowState {
    /// Advances to the next arrival time; `None` once the window closes.
    fn advance(&mut self) -> Option<u64> {
        let next = match self.pattern {
            ArrivalPattern::CBR => {
                let interval_ns = self.bits as f64 * NS_PER_S / self.rate_bps;
                self.start_ns + (self.sent as f64 * interval_ns).floor() as u64
            }
            ArrivalPattern::Poisson => {
                let pps = self.rate_bps / self.bits as f64;
                let gap = Exp::new(pps).expect("positive rate").sample(&mut self.rng);
                let base = if self.sent == 0 { self.start_ns } else { self.next_at };
                base + secs_to_ns(gap)
            }
        };
        self.next_at = next;
        (next < self.end_ns).then_some(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Arrival(usize),
    Departure(usize),
}

#[derive(Default)]
struct Acc {
    offered_pkts: u64,
    offered_bits: u64,
    carried_pkts: u64,
    carried_bits: u64,
    dropped: u64,
    delays_ns: Vec<u64>,
}

struct Sim<'a> {
    net: &'a EmulatedNetwork,
    duration_ns: u64,
    bin_ns: u64,
    queues: Vec<QueueState>,
    beams: Vec<BeamState>,
    acc: Vec<Acc>,
    heap: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
}

impl Sim<'_> {
    fn schedule(&mut self, at: u64, ev: Event) {
        self.heap.push(Reverse((at, self.seq, ev)));
        self.seq += 1;
    }

    fn arrive(&mut self, q: usize, bits: u64, now: u64) {
        let bound = self.net.settings.queue_bound;
        let queue = &mut self.queues[q];
        let acc = &mut self.acc[queue.slice];
        acc.offered_pkts += 1;
        acc.offered_bits += bits;

        if let Some(peak) = queue.peak.as_mut() {
            peak.refill(now);
            if !peak.has(bits) {
                acc.dropped += 1;
                return;
            }
        }
        if queue.packets.len() >= bound {
            acc.dropped += 1;
            return;
        }
        if let Some(peak) = queue.peak.as_mut() {
            peak.take(bits);
        }
        let guaranteed = match queue.committed.as_mut() {
            Some(c) => {
                c.refill(now);
                let ok = c.has(bits);
                if ok {
                    c.take(bits);
                }
                ok
            }
            None => false,
        };
        let beam = self.net.queues[q].beam;
        if queue.packets.is_empty() {
            queue.vtime = queue.vtime.max(self.beams[beam].vclock);
        }
        queue.packets.push_back(Packet {
            bits,
            arrival: now,
            guaranteed,
        });
        if self.beams[beam].in_service.is_none() {
            self.serve(beam, now);
        }
    }

    /// Starts the next transmission on `beam`: the oldest guaranteed head,
    /// otherwise the excess head with the least weighted service.
    fn serve(&mut self, beam: usize, now: u64) {
        let state = &self.beams[beam];
        if state.capacity_bps == 0 {
            return;
        }
        let heads = state
            .queues
            .iter()
            .filter_map(|&q| self.queues[q].packets.front().map(|p| (q, *p)));
        let pick = heads
            .clone()
            .filter(|(_, p)| p.guaranteed)
            .min_by_key(|(q, p)| (p.arrival, *q))
            .or_else(|| {
                heads.min_by(|(qa, _), (qb, _)| {
                    self.queues[*qa]
                        .vtime
                        .total_cmp(&self.queues[*qb].vtime)
                        .then(qa.cmp(qb))
                })
            });
        let Some((q, _)) = pick else { return };

        let packet = self.queues[q].packets.pop_front().expect("head exists");
        if !packet.guaranteed {
            let weight = f64::from(self.net.queues[q].weight.max(1));
            let vt = self.queues[q].vtime;
            self.beams[beam].vclock = vt;
            self.queues[q].vtime = vt + packet.bits as f64 / weight;
        }
        let capacity = self.beams[beam].capacity_bps;
        let service_ns = (u128::from(packet.bits) * NS).div_ceil(u128::from(capacity)) as u64;
        let finish = now + service_ns;
        self.account_busy(beam, now, finish.min(self.duration_ns));
        self.beams[beam].in_service = Some((q, packet));
        self.schedule(finish, Event::Departure(beam));
    }

    fn account_busy(&mut self, beam: usize, from: u64, to: u64) {
        let bins = &mut self.beams[beam].busy_ns;
        let mut t = from;
        while t < to {
            let bin = (t / self.bin_ns) as usize;
            let bin_end = ((bin as u64) + 1) * self.bin_ns;
            let end = bin_end.min(to);
            if let Some(slot) = bins.get_mut(bin) {
                *slot += end - t;
            }
            t = end;
        }
    }

    fn depart(&mut self, beam: usize, now: u64) {
        let (q, packet) = self.beams[beam].in_service.take().expect("departure without service");
        let queue = &self.queues[q];
        let acc = &mut self.acc[queue.slice];
        acc.carried_pkts += 1;
        acc.carried_bits += packet.bits;
        acc.delays_ns.push(now - packet.arrival + queue.egress_ns);
        self.serve(beam, now);
    }
}

/// Runs `scenario` on `net`. Identical inputs give bit-identical reports.
pub fn run_scenario(net: &EmulatedNetwork, scenario: &Scenario) -> Result<MetricsReport, ScenarioError> {
    scenario.validate()?;
    let duration_ns = secs_to_ns(scenario.duration_s);
    let bin_ns = secs_to_ns(net.settings.bin_s).max(1);
    let n_bins = duration_ns.div_ceil(bin_ns) as usize;

    // Per-slice accumulators, in slice id order.
    let slice_ids: Vec<String> = {
        let mut ids: Vec<String> = net.queues.iter().map(|q| q.slice_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    };
    let slice_index = |id: &str| slice_ids.binary_search_by(|s| s.as_str().cmp(id)).expect("known slice");

    let default_bits = u64::from(net.settings.default_packet_bytes) * 8;
    let mut flows = Vec::new();
    for (i, spec) in scenario.flows.iter().enumerate() {
        let slice = net.ingress.classify(&spec.meta);
        let queue = net
            .queue_for(slice, spec.beam.as_deref())
            .or_else(|| net.queue_for(crate::classifier::DEFAULT_SLICE, spec.beam.as_deref()));
        let Some(queue) = queue else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(i as u64);
        flows.push(FlowState {
            queue,
            bits: spec.packet_size_bytes.map(|b| u64::from(b) * 8).unwrap_or(default_bits),
            rate_bps: spec.rate_mbps * 1e6,
            start_ns: secs_to_ns(spec.start_s),
            end_ns: secs_to_ns(spec.stop_s).min(duration_ns),
            pattern: spec.pattern,
            sent: 0,
            next_at: 0,
            rng,
        });
    }

    let queues = net
        .queues
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let max_bits = flows
                .iter()
                .filter(|f| f.queue == qi)
                .map(|f| f.bits)
                .max()
                .unwrap_or(default_bits);
            let bucket = |r: Option<crate::units::Rate>| r.map(|r| Bucket::new(r.bps(), net.settings.burst_ms, max_bits));
            QueueState {
                packets: VecDeque::new(),
                committed: bucket(q.gbr),
                peak: bucket(q.mbr),
                vtime: 0.0,
                egress_ns: (q.egress_delay_ms * 1e6).round() as u64,
                slice: slice_index(&q.slice_id),
            }
        })
        .collect();
    let beams = net
        .beams
        .iter()
        .enumerate()
        .map(|(bi, b)| BeamState {
            capacity_bps: b.capacity.bps(),
            in_service: None,
            vclock: 0.0,
            busy_ns: vec![0; n_bins],
            queues: net.queues.iter().enumerate().filter(|(_, q)| q.beam == bi).map(|(i, _)| i).collect(),
        })
        .collect();

    let mut sim = Sim {
        net,
        duration_ns,
        bin_ns,
        queues,
        beams,
        acc: slice_ids.iter().map(|_| Acc::default()).collect(),
        heap: BinaryHeap::new(),
        seq: 0,
    };

    for (i, flow) in flows.iter_mut().enumerate() {
        if flow.rate_bps <= 0.0 {
            continue;
        }
        if let Some(t) = flow.advance() {
            sim.schedule(t, Event::Arrival(i));
        }
    }

    while let Some(Reverse((now, _, event))) = sim.heap.pop() {
        if now > duration_ns {
            break;
        }
        match event {
            Event::Arrival(f) => {
                let (queue, bits) = (flows[f].queue, flows[f].bits);
                sim.arrive(queue, bits, now);
                flows[f].sent += 1;
                if let Some(t) = flows[f].advance() {
                    sim.schedule(t, Event::Arrival(f));
                }
            }
            Event::Departure(b) => sim.depart(b, now),
        }
    }

    let mut in_flight = vec![0u64; slice_ids.len()];
    for q in &sim.queues {
        in_flight[q.slice] += q.packets.len() as u64;
    }
    for b in &sim.beams {
        if let Some((q, _)) = b.in_service {
            in_flight[sim.queues[q].slice] += 1;
        }
    }

    let secs = scenario.duration_s;
    let slices = slice_ids
        .iter()
        .zip(sim.acc.iter_mut())
        .zip(in_flight)
        .map(|((id, acc), in_flight)| {
            acc.delays_ns.sort_unstable();
            let n = acc.delays_ns.len();
            let mean_delay_ms = if n == 0 {
                0.0
            } else {
                acc.delays_ns.iter().map(|&d| d as f64).sum::<f64>() / n as f64 / 1e6
            };
            let p99_delay_ms = if n == 0 {
                0.0
            } else {
                let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
                acc.delays_ns[rank - 1] as f64 / 1e6
            };
            let loss_ratio = if acc.offered_pkts == 0 {
                0.0
            } else {
                acc.dropped as f64 / acc.offered_pkts as f64
            };
            (
                id.clone(),
                SliceMetrics {
                    offered_mbps: acc.offered_bits as f64 / secs / 1e6,
                    carried_mbps: acc.carried_bits as f64 / secs / 1e6,
                    mean_delay_ms,
                    p99_delay_ms,
                    loss_ratio,
                    packets_offered: acc.offered_pkts,
                    packets_carried: acc.carried_pkts,
                    packets_dropped: acc.dropped,
                    packets_in_flight: in_flight,
                },
            )
        })
        .collect();

    let beams = net
        .beams
        .iter()
        .zip(&sim.beams)
        .map(|(b, state)| {
            let utilization = state
                .busy_ns
                .iter()
                .enumerate()
                .map(|(i, &busy)| {
                    let start = i as u64 * bin_ns;
                    let len = ((i as u64 + 1) * bin_ns).min(duration_ns) - start;
                    busy as f64 / len as f64
                })
                .collect();
            (
                b.beam_id.clone(),
                BeamSeries {
                    bin_s: net.settings.bin_s,
                    utilization,
                },
            )
        })
        .collect::<BTreeMap<_, _>>();

    Ok(MetricsReport {
        duration_s: scenario.duration_s,
        seed: scenario.seed,
        propagation_ms: net.propagation_ms,
        slices,
        beams,
    })
}
