//! Static expander plane: fluid flows pinned to one shortest path each,
//! sharing link capacity max-min fairly.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::result::{AuditReport, FlowRecord};
use super::{PlaneFlow, PlaneRun};
use crate::error::Result;
use crate::topology::{ExpanderGraph, ShortestPaths};

#[derive(Debug, Clone)]
struct FluidFlow {
    record: usize,
    arrival: f64,
    size: f64,
    remaining: f64,
    rate: f64,
    links: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Share(f64);

impl Eq for Share {}

impl PartialOrd for Share {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Share {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub(crate) struct ExpanderPlane {
    capacity: Vec<f64>,
    flows: Vec<FluidFlow>,
}

impl ExpanderPlane {
    /// Pins each flow to a shortest path drawn uniformly with `seed`.
    pub(crate) fn new(graph: &ExpanderGraph, rate: f64, flows: &[PlaneFlow], seed: u64) -> Result<Self> {
        let n = graph.n();
        let mut link_id = HashMap::new();
        let mut capacity = Vec::new();
        for u in 0..n {
            for &v in graph.out_neighbors(u) {
                link_id.entry((u, v)).or_insert_with(|| {
                    capacity.push(graph.multiplicity(u, v) as f64 * rate);
                    capacity.len() - 1
                });
            }
        }
        let mut trees: Vec<Option<ShortestPaths>> = vec![None; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fluid = Vec::with_capacity(flows.len());
        for f in flows {
            let tree = trees[f.src].get_or_insert_with(|| graph.shortest_paths_from(f.src));
            let path = graph.sample_shortest_path(tree, f.dst, &mut rng)?;
            let links = path.windows(2).map(|w| link_id[&(w[0], w[1])]).collect();
            fluid.push(FluidFlow {
                record: f.record,
                arrival: f.arrival_s,
                size: f.size_bits as f64,
                remaining: f.size_bits as f64,
                rate: 0.0,
                links,
            });
        }
        Ok(ExpanderPlane { capacity, flows: fluid })
    }

    /// Progressive filling over the active set: repeatedly saturate the link
    /// with the smallest fair share and freeze its flows at that share.
    fn assign_rates(&mut self, active: &[usize]) {
        let links = self.capacity.len();
        let mut residual = self.capacity.clone();
        let mut unfrozen = vec![0usize; links];
        let mut on_link: Vec<Vec<usize>> = vec![Vec::new(); links];
        for &f in active {
            for &l in &self.flows[f].links {
                unfrozen[l] += 1;
                on_link[l].push(f);
            }
        }
        let mut frozen = vec![false; self.flows.len()];
        let mut heap = BinaryHeap::new();
        for l in 0..links {
            if unfrozen[l] > 0 {
                heap.push(Reverse((Share(residual[l] / unfrozen[l] as f64), l, unfrozen[l])));
            }
        }
        while let Some(Reverse((Share(share), l, count))) = heap.pop() {
            // stale entry: the link changed since this share was computed
            if unfrozen[l] != count || count == 0 {
                continue;
            }
            for &f in &on_link[l] {
                if std::mem::replace(&mut frozen[f], true) {
                    continue;
                }
                self.flows[f].rate = share;
                for &m in &self.flows[f].links {
                    residual[m] = (residual[m] - share).max(0.0);
                    unfrozen[m] -= 1;
                    if m != l && unfrozen[m] > 0 {
                        heap.push(Reverse((Share(residual[m] / unfrozen[m] as f64), m, unfrozen[m])));
                    }
                }
            }
        }
    }

    fn max_link_load(&self, active: &[usize]) -> f64 {
        let mut load = vec![0.0; self.capacity.len()];
        for &f in active {
            for &l in &self.flows[f].links {
                load[l] += self.flows[f].rate;
            }
        }
        load.iter().zip(&self.capacity).map(|(a, c)| a / c).fold(0.0, f64::max)
    }

    /// Runs to drain or `max_time`. Flows are in arrival order.
    pub(crate) fn run(
        &mut self,
        records: &mut [FlowRecord],
        max_time: f64,
        mut audit: Option<&mut AuditReport>,
    ) -> PlaneRun {
        let mut t = 0.0;
        let mut next = 0;
        let mut active: Vec<usize> = Vec::new();
        let mut injected = 0.0;
        let mut delivered = 0.0;
        let mut delivered_bits = 0u64;
        let mut link_bits = 0.0;
        let mut completed = true;
        loop {
            while let Some(f) = self.flows.get(next) {
                if f.arrival > t {
                    break;
                }
                injected += f.size;
                records[f.record].hops = f.links.len() as u32;
                active.push(next);
                next += 1;
            }
            if active.is_empty() {
                match self.flows.get(next) {
                    None => break,
                    Some(f) => {
                        t = f.arrival;
                        continue;
                    }
                }
            }
            self.assign_rates(&active);
            if let Some(a) = audit.as_deref_mut() {
                a.events_checked += 1;
                a.max_expander_link_load = a.max_expander_link_load.max(self.max_link_load(&active));
                let queued: f64 = active.iter().map(|&f| self.flows[f].remaining).sum();
                if (queued + delivered - injected).abs() > 1e-9 * injected.max(1.0) {
                    a.conservation_violations += 1;
                }
            }
            let dt_finish = active
                .iter()
                .map(|&f| self.flows[f].remaining / self.flows[f].rate)
                .fold(f64::INFINITY, f64::min);
            let t_arrival = self.flows.get(next).map_or(f64::INFINITY, |f| f.arrival);
            let finishing = t + dt_finish <= t_arrival;
            let t_next = if finishing { t + dt_finish } else { t_arrival };
            if t_next > max_time {
                completed = false;
                break;
            }
            let dt = t_next - t;
            let mut still = Vec::with_capacity(active.len());
            for &f in &active {
                let flow = &mut self.flows[f];
                let done = finishing && flow.remaining / flow.rate <= dt_finish * (1.0 + 1e-12);
                if done {
                    delivered += flow.remaining;
                    link_bits += flow.size * flow.links.len() as f64;
                    delivered_bits += flow.size as u64;
                    flow.remaining = 0.0;
                    records[flow.record].completion_s = Some(t_next);
                } else {
                    let sent = flow.rate * dt;
                    flow.remaining -= sent;
                    delivered += sent;
                    still.push(f);
                }
            }
            active = still;
            t = t_next;
        }
        PlaneRun {
            completed,
            delivered_bits,
            link_bits,
        }
    }
}
