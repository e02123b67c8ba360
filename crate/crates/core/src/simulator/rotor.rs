//! Rotor plane: synchronized round-robin matchings with direct-first
//! service and two-hop relaying over spare slot capacity.

use std::collections::VecDeque;

use super::result::{AuditReport, FlowRecord};
use super::{PlaneFlow, PlaneRun};

#[derive(Debug, Clone, Copy)]
struct Queued {
    record: usize,
    /// Cumulative pair offset at which this flow's last bit sits.
    end: u64,
}

#[derive(Debug, Clone, Copy)]
struct Chunk {
    origin: u32,
    bits: u64,
}

pub(crate) struct RotorPlane {
    n: usize,
    k_r: usize,
    rate: f64,
    period: f64,
    slot_capacity: u64,
    /// Bits still at the source, per (src, dst).
    unsent: Vec<u64>,
    /// Bits that reached dst, per (src, dst).
    delivered: Vec<u64>,
    injected: Vec<u64>,
    fifo: Vec<VecDeque<Queued>>,
    /// Relay bits parked at a ToR, per (relay, dst).
    held: Vec<VecDeque<Chunk>>,
    held_bits: Vec<u64>,
    /// First-hop relay bits in flight this slot, applied at slot end.
    arriving: Vec<(usize, Chunk)>,
    arriving_bits: Vec<u64>,
    /// Destinations with unsent bits, per source, with positions for O(1) removal.
    active: Vec<Vec<usize>>,
    active_pos: Vec<usize>,
    backlog: u64,
    link_bits: u64,
    max_link_bits: u64,
    relay_order: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl RotorPlane {
    pub(crate) fn new(n: usize, k_r: usize, rate: f64, slot_s: f64, reconfig_s: f64) -> Self {
        let pairs = n * n;
        RotorPlane {
            n,
            k_r,
            rate,
            period: slot_s + reconfig_s,
            // guard against δ·r landing a hair below an integer
            slot_capacity: (slot_s * rate * (1.0 + 1e-12)).floor() as u64,
            unsent: vec![0; pairs],
            delivered: vec![0; pairs],
            injected: vec![0; pairs],
            fifo: vec![VecDeque::new(); pairs],
            held: vec![VecDeque::new(); pairs],
            held_bits: vec![0; pairs],
            arriving: Vec::new(),
            arriving_bits: vec![0; pairs],
            active: vec![Vec::new(); n],
            active_pos: vec![ABSENT; pairs],
            backlog: 0,
            link_bits: 0,
            max_link_bits: 0,
            relay_order: Vec::new(),
        }
    }

    fn pair(&self, src: usize, dst: usize) -> usize {
        src * self.n + dst
    }

    /// Target of `src` on rotor switch `switch` during slot `slot`.
    pub(crate) fn peer(&self, switch: usize, slot: u64, src: usize) -> usize {
        let cycle = (self.n - 1) as u64;
        let shift = ((switch as u64 + slot) % cycle) as usize + 1;
        (src + shift) % self.n
    }

    fn inject(&mut self, f: &PlaneFlow) {
        let p = self.pair(f.src, f.dst);
        self.injected[p] += f.size_bits;
        self.fifo[p].push_back(Queued {
            record: f.record,
            end: self.injected[p],
        });
        if self.unsent[p] == 0 {
            self.active_pos[p] = self.active[f.src].len();
            self.active[f.src].push(f.dst);
        }
        self.unsent[p] += f.size_bits;
        self.backlog += f.size_bits;
    }

    fn take_unsent(&mut self, src: usize, dst: usize, bits: u64) {
        let p = self.pair(src, dst);
        self.unsent[p] -= bits;
        if self.unsent[p] == 0 {
            let pos = self.active_pos[p];
            let list = &mut self.active[src];
            list.swap_remove(pos);
            if let Some(&moved) = list.get(pos) {
                self.active_pos[src * self.n + moved] = pos;
            }
            self.active_pos[p] = ABSENT;
        }
    }

    /// Credits `bits` to pair `p`, the first of which lands at `t0`.
    fn deliver(&mut self, p: usize, bits: u64, t0: f64, relayed: bool, records: &mut [FlowRecord]) {
        let before = self.delivered[p];
        let after = before + bits;
        self.delivered[p] = after;
        self.backlog -= bits;
        let fifo = &mut self.fifo[p];
        while let Some(head) = fifo.front() {
            let rec = &mut records[head.record];
            if relayed {
                rec.hops = 2;
            }
            if head.end > after {
                break;
            }
            rec.completion_s = Some(t0 + (head.end - before) as f64 / self.rate);
            fifo.pop_front();
        }
    }

    fn serve_link(&mut self, i: usize, j: usize, start: f64, records: &mut [FlowRecord]) {
        let cap = self.slot_capacity;
        let mut used = 0u64;

        let direct = self.pair(i, j);
        let b = self.unsent[direct].min(cap);
        if b > 0 {
            self.take_unsent(i, j, b);
            self.deliver(direct, b, start, false, records);
            used += b;
        }

        let parked = self.pair(i, j);
        while used < cap && self.held_bits[parked] > 0 {
            let chunk = self.held[parked].front_mut().expect("held bits without chunk");
            let take = chunk.bits.min(cap - used);
            let origin = chunk.origin as usize;
            chunk.bits -= take;
            if chunk.bits == 0 {
                self.held[parked].pop_front();
            }
            self.held_bits[parked] -= take;
            let t0 = start + used as f64 / self.rate;
            self.deliver(origin * self.n + j, take, t0, true, records);
            used += take;
        }

        if used < cap && !self.active[i].is_empty() {
            let mut order = std::mem::take(&mut self.relay_order);
            order.clear();
            order.extend(self.active[i].iter().copied().filter(|&d| d != j));
            order.sort_unstable_by(|&a, &b| {
                self.unsent[i * self.n + b]
                    .cmp(&self.unsent[i * self.n + a])
                    .then(a.cmp(&b))
            });
            for &d in &order {
                if used >= cap {
                    break;
                }
                let slot_key = self.pair(j, d);
                let space = cap.saturating_sub(self.held_bits[slot_key] + self.arriving_bits[slot_key]);
                let take = self.unsent[i * self.n + d].min(cap - used).min(space);
                if take == 0 {
                    continue;
                }
                self.take_unsent(i, d, take);
                self.arriving.push((
                    slot_key,
                    Chunk {
                        origin: i as u32,
                        bits: take,
                    },
                ));
                self.arriving_bits[slot_key] += take;
                used += take;
            }
            self.relay_order = order;
        }

        self.link_bits += used;
        self.max_link_bits = self.max_link_bits.max(used);
    }

    fn land_relays(&mut self) {
        for (key, chunk) in self.arriving.drain(..) {
            self.arriving_bits[key] -= chunk.bits;
            self.held_bits[key] += chunk.bits;
            self.held[key].push_back(chunk);
        }
    }

    /// Serves every rotor link for slot `slot`.
    pub(crate) fn step(&mut self, slot: u64, records: &mut [FlowRecord]) {
        let start = slot as f64 * self.period;
        for s in 0..self.k_r {
            for i in 0..self.n {
                let j = self.peer(s, slot, i);
                self.serve_link(i, j, start, records);
            }
        }
        self.land_relays();
    }

    fn conserved(&self) -> bool {
        let injected: u64 = self.injected.iter().sum();
        let unsent: u64 = self.unsent.iter().sum();
        let held: u64 = self.held_bits.iter().sum();
        let delivered: u64 = self.delivered.iter().sum();
        injected == unsent + held + delivered && unsent + held == self.backlog
    }

    fn first_slot_at_or_after(&self, t: f64) -> u64 {
        let s = t / self.period;
        let r = s.round();
        if (s - r).abs() < 1e-9 {
            r as u64
        } else {
            s.ceil() as u64
        }
    }

    /// Drives the plane until all injected traffic drains or the next slot
    /// would start after `max_time`. `flows` must be sorted by arrival.
    pub(crate) fn run(
        &mut self,
        flows: &[PlaneFlow],
        records: &mut [FlowRecord],
        max_time: f64,
        mut audit: Option<&mut AuditReport>,
    ) -> PlaneRun {
        let mut next = 0;
        let mut slot = 0u64;
        let mut completed = true;
        loop {
            if self.backlog == 0 {
                match flows.get(next) {
                    None => break,
                    Some(f) => slot = slot.max(self.first_slot_at_or_after(f.arrival_s)),
                }
            }
            let start = slot as f64 * self.period;
            if start > max_time {
                completed = false;
                break;
            }
            while let Some(f) = flows.get(next) {
                if self.first_slot_at_or_after(f.arrival_s) > slot {
                    break;
                }
                self.inject(f);
                next += 1;
            }
            if self.backlog > 0 {
                self.step(slot, records);
                if let Some(a) = audit.as_deref_mut() {
                    a.events_checked += 1;
                    if !self.conserved() {
                        a.conservation_violations += 1;
                    }
                }
            }
            slot += 1;
        }
        if let Some(a) = audit {
            a.max_rotor_link_bits = a.max_rotor_link_bits.max(self.max_link_bits);
            a.rotor_slot_capacity_bits = self.slot_capacity;
        }
        PlaneRun {
            completed,
            delivered_bits: self.delivered.iter().sum(),
            link_bits: self.link_bits as f64,
        }
    }
}
