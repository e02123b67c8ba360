//! Flow-level simulator. Flows are classified, assigned to a plane and
//! served there until the demand drains.
//!
//! The three planes use disjoint spine switches, so once a flow is
//! assigned its plane evolves independently of the other two. The driver
//! therefore replays arrivals through the demand-aware admission (the
//! only decision that depends on live state), then drains each plane with
//! its own clock: slot boundaries for the rotor plane, circuit finish
//! events for the demand-aware plane, and rate-change events for the
//! expander.

mod cache;
mod expander;
mod result;
mod rotor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Flow, FlowClass, NetworkConfig};
use crate::topology::{build_expander, ExpanderGraph};

pub use result::{AuditReport, FlowRecord, Plane, PlaneStats, SimResult};

use cache::CachePlane;
use expander::ExpanderPlane;
use rotor::RotorPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalMode {
    /// Every flow is released at t = 0: the whole window's demand is
    /// accumulated and then drained.
    Batch,
    /// Flows enter at their generated arrival times.
    Online,
}

/// When a large flow is allowed onto the demand-aware plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Admission {
    /// Queue the flow if its endpoints' committed circuit time, spread over
    /// k_c switches, still fits within the cache horizon; else spill.
    Horizon,
    /// Spill unless some switch has both endpoint ports free right now.
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub arrival: ArrivalMode,
    pub admission: Admission,
    /// Check conservation at every event and record per-link peaks.
    pub audit: bool,
    pub cache_horizon_s: f64,
    /// Cutoff for non-draining runs.
    pub max_sim_time_s: f64,
    /// Seed for shortest-path sampling.
    pub seed: u64,
    /// Seed for the static expander when the simulator builds it.
    pub expander_seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            arrival: ArrivalMode::Batch,
            admission: Admission::Horizon,
            audit: false,
            cache_horizon_s: 1.0,
            max_sim_time_s: 100.0,
            seed: 0,
            expander_seed: 0,
        }
    }
}

/// A flow as seen by one plane.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlaneFlow {
    /// Index into the result's flow records.
    pub record: usize,
    pub src: usize,
    pub dst: usize,
    pub size_bits: u64,
    pub arrival_s: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PlaneRun {
    pub completed: bool,
    pub delivered_bits: u64,
    pub link_bits: f64,
}

/// The plane a flow of `class` is sent to first. Small flows go to the
/// expander, medium flows to the rotor, large flows to the demand-aware
/// switches; a class whose plane is absent falls back to the rotor, then
/// the expander, then the demand-aware plane.
pub fn assign(class: FlowClass, config: &NetworkConfig) -> Plane {
    let has = |p: Plane| match p {
        Plane::Expander => config.k_static() > 0,
        Plane::Rotor => config.k_rotor() > 0,
        Plane::Cache => config.k_cache() > 0,
    };
    let preference: [Plane; 3] = match class {
        FlowClass::Small => [Plane::Expander, Plane::Rotor, Plane::Cache],
        FlowClass::Medium => [Plane::Rotor, Plane::Expander, Plane::Cache],
        FlowClass::Large => [Plane::Cache, Plane::Rotor, Plane::Expander],
    };
    preference
        .into_iter()
        .find(|&p| has(p))
        .expect("validated config has at least one switch")
}

/// Where a large flow goes when the demand-aware plane refuses it.
fn spill_target(config: &NetworkConfig) -> Option<Plane> {
    if config.k_rotor() > 0 {
        Some(Plane::Rotor)
    } else if config.k_static() > 0 {
        Some(Plane::Expander)
    } else {
        None
    }
}

/// Runs `flows` on `config`, building the static expander from
/// `opts.expander_seed` when one is needed.
pub fn simulate(flows: &[Flow], config: &NetworkConfig, opts: &SimOptions) -> Result<SimResult> {
    let needs_graph = config.k_static() > 0;
    let graph = if needs_graph {
        Some(build_expander(config.n(), config.k_static(), opts.expander_seed)?)
    } else {
        None
    };
    simulate_on(flows, config, graph.as_ref(), opts)
}

/// As [`simulate`], on a caller-supplied expander.
pub fn simulate_on(
    flows: &[Flow],
    config: &NetworkConfig,
    graph: Option<&ExpanderGraph>,
    opts: &SimOptions,
) -> Result<SimResult> {
    let n = config.n();
    for f in flows {
        if f.src >= n || f.dst >= n || f.src == f.dst || f.size_bits == 0 {
            return Err(Error::input(format!(
                "flow {} ({} -> {}, {} bits) is invalid for n = {n}",
                f.id, f.src, f.dst, f.size_bits
            )));
        }
    }
    if opts.max_sim_time_s.is_nan() || opts.max_sim_time_s <= 0.0 {
        return Err(Error::config("max_sim_time_s", "must be positive"));
    }

    let release = |f: &Flow| match opts.arrival {
        ArrivalMode::Batch => 0.0,
        ArrivalMode::Online => f.arrival_s,
    };
    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by(|&a, &b| {
        release(&flows[a])
            .total_cmp(&release(&flows[b]))
            .then(flows[a].id.cmp(&flows[b].id))
    });

    let mut records: Vec<FlowRecord> = flows
        .iter()
        .map(|f| FlowRecord {
            flow_id: f.id,
            arrival_s: release(f),
            completion_s: None,
            plane: Plane::Rotor,
            hops: 1,
        })
        .collect();

    let mut cache = CachePlane::new(
        n,
        config.k_cache(),
        config.rate_bps(),
        config.cache_reconfig_s(),
        opts.cache_horizon_s,
        opts.admission,
        opts.audit,
    );
    let spill = spill_target(config);
    let mut rotor_flows = Vec::new();
    let mut expander_flows = Vec::new();
    let mut spill_count = 0;
    for &idx in &order {
        let f = &flows[idx];
        let pf = PlaneFlow {
            record: idx,
            src: f.src,
            dst: f.dst,
            size_bits: f.size_bits,
            arrival_s: release(f),
        };
        let mut plane = assign(f.class, config);
        if plane == Plane::Cache && !cache.offer(pf, spill.is_none()) {
            plane = spill.expect("forced admission cannot fail");
            spill_count += 1;
        }
        records[idx].plane = plane;
        match plane {
            Plane::Rotor => rotor_flows.push(pf),
            Plane::Expander => expander_flows.push(pf),
            Plane::Cache => {}
        }
    }

    let mut audit = opts.audit.then(AuditReport::default);
    let mut runs = [PlaneRun::default(); 3];
    runs[Plane::Cache.index()] = cache.drain(opts.max_sim_time_s, &mut records, audit.as_mut());
    runs[Plane::Rotor.index()] = if rotor_flows.is_empty() {
        PlaneRun {
            completed: true,
            ..PlaneRun::default()
        }
    } else {
        let mut rotor = RotorPlane::new(
            n,
            config.k_rotor(),
            config.rate_bps(),
            config.slot_s(),
            config.rotor_reconfig_s(),
        );
        rotor.run(&rotor_flows, &mut records, opts.max_sim_time_s, audit.as_mut())
    };
    runs[Plane::Expander.index()] = if expander_flows.is_empty() {
        PlaneRun {
            completed: true,
            ..PlaneRun::default()
        }
    } else {
        let graph = graph.ok_or_else(|| Error::input("expander flows but no expander graph"))?;
        if graph.n() != n {
            return Err(Error::input(format!("expander has {} ToRs, config has {n}", graph.n())));
        }
        let mut plane = ExpanderPlane::new(graph, config.rate_bps(), &expander_flows, opts.seed)?;
        plane.run(&mut records, opts.max_sim_time_s, audit.as_mut())
    };

    let dct_s = records.iter().filter_map(|r| r.completion_s).fold(0.0, f64::max);
    let switches = |p: Plane| match p {
        Plane::Expander => config.k_static(),
        Plane::Rotor => config.k_rotor(),
        Plane::Cache => config.k_cache(),
    };
    let mut planes = [PlaneStats::default(); 3];
    for p in Plane::ALL {
        let run = runs[p.index()];
        let capacity = (n * switches(p)) as f64 * config.rate_bps() * dct_s;
        planes[p.index()] = PlaneStats {
            flows: records.iter().filter(|r| r.plane == p).count(),
            bits: run.delivered_bits,
            link_bits: run.link_bits,
            utilization: if capacity > 0.0 { run.link_bits / capacity } else { 0.0 },
        };
    }
    Ok(SimResult {
        dct_s,
        completed: runs.iter().all(|r| r.completed),
        flows: records,
        planes,
        spill_count,
        audit,
    })
}
