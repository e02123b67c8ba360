//! Demand-aware plane: each large flow claims a circuit between its source
//! and destination on one switch, pays the reconfiguration delay, then
//! transmits single-hop at line rate.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};

use super::result::{AuditReport, FlowRecord};
use super::{Admission, PlaneFlow, PlaneRun};

/// Event time ordered by `total_cmp`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Circuit {
    flow: PlaneFlow,
    /// Reconfiguration plus transmission time.
    cost: f64,
    started: Option<(usize, f64)>,
}

/// Per-ToR bitset of switches whose port is free.
#[derive(Debug, Clone)]
struct PortMap {
    words: usize,
    bits: Vec<u64>,
}

impl PortMap {
    fn all_free(n: usize, switches: usize) -> Self {
        let words = switches.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for tor in 0..n {
            for s in 0..switches {
                bits[tor * words + s / 64] |= 1 << (s % 64);
            }
        }
        PortMap { words, bits }
    }

    fn row(&self, tor: usize) -> &[u64] {
        &self.bits[tor * self.words..(tor + 1) * self.words]
    }

    fn is_free(&self, tor: usize, s: usize) -> bool {
        self.bits[tor * self.words + s / 64] & (1 << (s % 64)) != 0
    }

    fn set(&mut self, tor: usize, s: usize, free: bool) {
        let w = &mut self.bits[tor * self.words + s / 64];
        if free {
            *w |= 1 << (s % 64);
        } else {
            *w &= !(1 << (s % 64));
        }
    }
}

/// Lowest switch index free in both rows.
fn first_common(a: &[u64], b: &[u64]) -> Option<usize> {
    a.iter().zip(b).enumerate().find_map(|(w, (x, y))| {
        let m = x & y;
        (m != 0).then(|| w * 64 + m.trailing_zeros() as usize)
    })
}

pub(crate) struct CachePlane {
    k_c: usize,
    rate: f64,
    reconfig: f64,
    horizon: f64,
    admission: Admission,
    src_ports: PortMap,
    dst_ports: PortMap,
    /// Committed, unfinished circuit time per ToR (uplink and downlink side).
    src_work: Vec<f64>,
    dst_work: Vec<f64>,
    circuits: Vec<Circuit>,
    pending_by_src: Vec<BTreeSet<usize>>,
    pending_by_dst: Vec<BTreeSet<usize>>,
    finishes: BinaryHeap<Reverse<(Time, usize)>>,
    now: f64,
    injected_bits: u64,
    delivered_bits: u64,
    in_service_bits: u64,
    pending_bits: u64,
    reconfig_violations: u64,
    link_bits: u64,
    completions: Vec<(usize, f64)>,
    events: u64,
    conservation_violations: u64,
    audit: bool,
}

impl CachePlane {
    pub(crate) fn new(
        n: usize,
        k_c: usize,
        rate: f64,
        reconfig: f64,
        horizon: f64,
        admission: Admission,
        audit: bool,
    ) -> Self {
        CachePlane {
            k_c,
            rate,
            reconfig,
            horizon,
            admission,
            src_ports: PortMap::all_free(n, k_c),
            dst_ports: PortMap::all_free(n, k_c),
            src_work: vec![0.0; n],
            dst_work: vec![0.0; n],
            circuits: Vec::new(),
            pending_by_src: vec![BTreeSet::new(); n],
            pending_by_dst: vec![BTreeSet::new(); n],
            finishes: BinaryHeap::new(),
            now: 0.0,
            injected_bits: 0,
            delivered_bits: 0,
            in_service_bits: 0,
            pending_bits: 0,
            reconfig_violations: 0,
            link_bits: 0,
            completions: Vec::new(),
            events: 0,
            conservation_violations: 0,
            audit,
        }
    }

    fn check(&mut self) {
        if self.audit {
            self.events += 1;
            if self.injected_bits != self.delivered_bits + self.in_service_bits + self.pending_bits {
                self.conservation_violations += 1;
            }
        }
    }

    /// Offers a flow at its arrival time. Returns false if it should spill
    /// to another plane instead; `force` queues it regardless.
    pub(crate) fn offer(&mut self, flow: PlaneFlow, force: bool) -> bool {
        if self.k_c == 0 {
            return false;
        }
        self.advance_to(flow.arrival_s);
        let now = self.now.max(flow.arrival_s);
        self.now = now;
        let cost = self.reconfig + flow.size_bits as f64 / self.rate;
        let (i, j) = (flow.src, flow.dst);
        let common = first_common(self.src_ports.row(i), self.dst_ports.row(j));
        let admit = force
            || match self.admission {
                Admission::Immediate => common.is_some(),
                Admission::Horizon => {
                    let backlog = self.src_work[i].max(self.dst_work[j]);
                    (backlog + cost) / self.k_c as f64 <= self.horizon * (1.0 + 1e-12)
                }
            };
        if !admit {
            return false;
        }
        self.src_work[i] += cost;
        self.dst_work[j] += cost;
        self.injected_bits += flow.size_bits;
        self.pending_bits += flow.size_bits;
        let id = self.circuits.len();
        self.circuits.push(Circuit {
            flow,
            cost,
            started: None,
        });
        match common {
            Some(s) => self.start(id, s, now),
            None => {
                self.pending_by_src[i].insert(id);
                self.pending_by_dst[j].insert(id);
            }
        }
        self.check();
        true
    }

    fn start(&mut self, id: usize, switch: usize, t: f64) {
        let c = &mut self.circuits[id];
        let (i, j) = (c.flow.src, c.flow.dst);
        debug_assert!(self.src_ports.is_free(i, switch) && self.dst_ports.is_free(j, switch));
        c.started = Some((switch, t));
        let finish = t + c.cost;
        let bits = c.flow.size_bits;
        self.src_ports.set(i, switch, false);
        self.dst_ports.set(j, switch, false);
        self.pending_by_src[i].remove(&id);
        self.pending_by_dst[j].remove(&id);
        self.pending_bits -= bits;
        self.in_service_bits += bits;
        self.finishes.push(Reverse((Time(finish), id)));
    }

    /// First pending flow (in admission order) from `src` whose destination
    /// port on `switch` is free.
    fn candidate_from_src(&self, src: usize, switch: usize) -> Option<usize> {
        if !self.src_ports.is_free(src, switch) {
            return None;
        }
        self.pending_by_src[src]
            .iter()
            .copied()
            .find(|&id| self.dst_ports.is_free(self.circuits[id].flow.dst, switch))
    }

    fn candidate_to_dst(&self, dst: usize, switch: usize) -> Option<usize> {
        if !self.dst_ports.is_free(dst, switch) {
            return None;
        }
        self.pending_by_dst[dst]
            .iter()
            .copied()
            .find(|&id| self.src_ports.is_free(self.circuits[id].flow.src, switch))
    }

    /// Hands the ports just released on `switch` to waiting flows, oldest
    /// admission first.
    fn refill(&mut self, switch: usize, src: usize, dst: usize, t: f64) {
        loop {
            let a = self.candidate_from_src(src, switch);
            let b = self.candidate_to_dst(dst, switch);
            let pick = match (a, b) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            self.start(pick, switch, t);
        }
    }

    fn finish_next(&mut self) {
        let Reverse((Time(t), id)) = self.finishes.pop().expect("no finish event");
        self.now = self.now.max(t);
        let c = &self.circuits[id];
        let (switch, started) = c.started.expect("finished circuit never started");
        let (i, j, bits, cost) = (c.flow.src, c.flow.dst, c.flow.size_bits, c.cost);
        self.completions.push((c.flow.record, t));
        // transmission occupies the tail |f|/r of the circuit's lifetime
        let tx_start = t - bits as f64 / self.rate;
        if tx_start < started + self.reconfig - 1e-12 * t.max(1.0) {
            self.reconfig_violations += 1;
        }
        self.in_service_bits -= bits;
        self.delivered_bits += bits;
        self.link_bits += bits;
        self.src_work[i] = (self.src_work[i] - cost).max(0.0);
        self.dst_work[j] = (self.dst_work[j] - cost).max(0.0);
        self.src_ports.set(i, switch, true);
        self.dst_ports.set(j, switch, true);
        self.refill(switch, i, j, t);
        self.check();
    }

    /// Processes every finish strictly before `t`.
    pub(crate) fn advance_to(&mut self, t: f64) {
        while let Some(Reverse((Time(ft), _))) = self.finishes.peek() {
            if *ft >= t {
                break;
            }
            self.finish_next();
        }
    }

    /// Runs all remaining finishes up to `max_time` and writes completions.
    pub(crate) fn drain(
        &mut self,
        max_time: f64,
        records: &mut [FlowRecord],
        audit: Option<&mut AuditReport>,
    ) -> PlaneRun {
        while let Some(Reverse((Time(ft), _))) = self.finishes.peek() {
            if *ft > max_time {
                break;
            }
            self.finish_next();
        }
        for &(rec, t) in &self.completions {
            records[rec].completion_s = Some(t);
            records[rec].hops = 1;
        }
        if let Some(a) = audit {
            a.events_checked += self.events;
            a.conservation_violations += self.conservation_violations;
            a.cache_reconfig_violations += self.reconfig_violations;
        }
        PlaneRun {
            completed: self.finishes.is_empty() && self.pending_bits == 0,
            delivered_bits: self.delivered_bits,
            link_bits: self.link_bits as f64,
        }
    }
}
