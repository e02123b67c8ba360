use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Which set of spine switches carried a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Expander,
    Rotor,
    Cache,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Expander, Plane::Rotor, Plane::Cache];

    pub fn as_str(self) -> &'static str {
        match self {
            Plane::Expander => "expander",
            Plane::Rotor => "rotor",
            Plane::Cache => "cache",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Plane::Expander => 0,
            Plane::Rotor => 1,
            Plane::Cache => 2,
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub flow_id: usize,
    /// Time the flow was released into the network.
    pub arrival_s: f64,
    /// `None` if the run was cut off before the flow drained.
    pub completion_s: Option<f64>,
    pub plane: Plane,
    /// Rotor: 2 if any of the flow's bits were relayed. Expander: path length.
    pub hops: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlaneStats {
    pub flows: usize,
    /// Payload bits delivered.
    pub bits: u64,
    /// Bits carried summed over every link traversal.
    pub link_bits: f64,
    /// link_bits over the plane's total capacity during [0, dct].
    pub utilization: f64,
}

impl PlaneStats {
    /// Link traversals per delivered bit.
    pub fn bandwidth_tax(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.link_bits / self.bits as f64
        }
    }
}

/// Counters collected when [`super::SimOptions::audit`] is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AuditReport {
    /// Number of state transitions at which conservation was checked.
    pub events_checked: u64,
    pub conservation_violations: u64,
    /// Largest bit count any rotor link carried in one slot.
    pub max_rotor_link_bits: u64,
    pub rotor_slot_capacity_bits: u64,
    /// Largest load/capacity ratio seen on any expander link.
    pub max_expander_link_load: f64,
    /// Cache flows whose transmission overlapped their reconfiguration.
    pub cache_reconfig_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    /// Time of the last delivered bit, measured from window start.
    pub dct_s: f64,
    /// False if the run hit the time cutoff with traffic still queued.
    pub completed: bool,
    pub flows: Vec<FlowRecord>,
    pub planes: [PlaneStats; 3],
    /// Large flows routed through the rotor plane.
    pub spill_count: usize,
    pub audit: Option<AuditReport>,
}

impl SimResult {
    pub fn plane(&self, plane: Plane) -> &PlaneStats {
        &self.planes[plane.index()]
    }

    /// Latest completion among flows carried by `plane`.
    pub fn plane_dct(&self, plane: Plane) -> f64 {
        self.flows
            .iter()
            .filter(|r| r.plane == plane)
            .filter_map(|r| r.completion_s)
            .fold(0.0, f64::max)
    }

    /// Writes per-flow records as CSV `flow_id,arrival_s,completion_s,plane,hops`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["flow_id", "arrival_s", "completion_s", "plane", "hops"])?;
        for r in &self.flows {
            wtr.write_record([
                r.flow_id.to_string(),
                r.arrival_s.to_string(),
                r.completion_s.map(|c| c.to_string()).unwrap_or_default(),
                r.plane.to_string(),
                r.hops.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        let util: Vec<String> = Plane::ALL
            .iter()
            .map(|p| format!("{}={:.3}", p, self.plane(*p).utilization))
            .collect();
        format!(
            "dct_s={} completed={} flows={} spill_count={} utilization[{}]",
            self.dct_s,
            self.completed,
            self.flows.len(),
            self.spill_count,
            util.join(" ")
        )
    }
}
