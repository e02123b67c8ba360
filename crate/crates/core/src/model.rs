//! Shared domain types: network parameters, switch descriptions, flows and
//! demand matrices.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, TimingParams};
use crate::error::{Error, Result};
use crate::scalar::exact_decimal;
use crate::Exact;

/// Unvalidated network parameters, in SI units (bits, seconds, bits/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n: usize,
    pub k_static: usize,
    pub k_rotor: usize,
    pub k_cache: usize,
    pub rate_bps: f64,
    pub slot_s: f64,
    pub rotor_reconfig_s: f64,
    pub cache_reconfig_s: f64,
    /// |m|; defaults to `slot_s * rate_bps`.
    pub medium_threshold_bits: Option<f64>,
    /// |ℓ|; defaults to the large-flow threshold evaluated at `threshold_phi`.
    pub large_threshold_bits: Option<f64>,
    /// Skewness used to derive |ℓ| when it is not given explicitly.
    pub threshold_phi: f64,
}

impl NetworkSpec {
    /// Table-1 parameters with the 10 Gbps rate that every worked number
    /// uses, and the 125 MB large threshold used in the evaluation.
    pub fn paper_numeric() -> Self {
        NetworkSpec {
            n: 256,
            k_static: 5,
            k_rotor: 16,
            k_cache: 16,
            rate_bps: 10e9,
            slot_s: 100e-6,
            rotor_reconfig_s: 10e-6,
            cache_reconfig_s: 15e-3,
            medium_threshold_bits: None,
            large_threshold_bits: Some(1e9),
            threshold_phi: 1.0,
        }
    }

    /// Table-1 parameters verbatim (40 Gbps). |ℓ| is derived at φ = 1.
    pub fn paper_table1() -> Self {
        NetworkSpec {
            rate_bps: 40e9,
            large_threshold_bits: None,
            ..Self::paper_numeric()
        }
    }

    pub fn validate(self) -> Result<NetworkConfig> {
        validate(self)
    }
}

/// Validated, immutable network configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    n: usize,
    k_static: usize,
    k_rotor: usize,
    k_cache: usize,
    rate_bps: f64,
    slot_s: f64,
    rotor_reconfig_s: f64,
    cache_reconfig_s: f64,
    medium_threshold_bits: f64,
    large_threshold_bits: f64,
    threshold_phi: f64,
}

fn positive_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

/// Checks every invariant of a [`NetworkSpec`] and fills derived defaults.
pub fn validate(spec: NetworkSpec) -> Result<NetworkConfig> {
    if spec.n < 2 {
        return Err(Error::config("n", format!("need n >= 2, got {}", spec.n)));
    }
    if spec.k_static + spec.k_rotor + spec.k_cache == 0 {
        return Err(Error::config("k", "k >= 1 required (no spine switches)"));
    }
    positive_finite("rate_bps", spec.rate_bps)?;
    positive_finite("slot_s", spec.slot_s)?;
    nonnegative_finite("rotor_reconfig_s", spec.rotor_reconfig_s)?;
    nonnegative_finite("cache_reconfig_s", spec.cache_reconfig_s)?;
    if spec.rotor_reconfig_s > spec.cache_reconfig_s {
        return Err(Error::config(
            "rotor_reconfig_s",
            format!(
                "rotor reconfiguration ({}) exceeds demand-aware reconfiguration ({})",
                spec.rotor_reconfig_s, spec.cache_reconfig_s
            ),
        ));
    }
    if spec.rotor_reconfig_s * 10.0 > spec.cache_reconfig_s {
        warn!(
            "rotor reconfiguration {} s is not much smaller than demand-aware reconfiguration {} s",
            spec.rotor_reconfig_s, spec.cache_reconfig_s
        );
    }
    if !(0.0..=1.0).contains(&spec.threshold_phi) {
        return Err(Error::config(
            "threshold_phi",
            format!("must lie in [0, 1], got {}", spec.threshold_phi),
        ));
    }

    let medium = spec.medium_threshold_bits.unwrap_or(spec.slot_s * spec.rate_bps);
    positive_finite("medium_threshold_bits", medium)?;

    let large = match spec.large_threshold_bits {
        Some(v) => v,
        None => {
            let timing = TimingParams {
                rate: spec.rate_bps,
                slot: spec.slot_s,
                rotor_reconfig: spec.rotor_reconfig_s,
                cache_reconfig: spec.cache_reconfig_s,
                medium_threshold: medium,
            };
            analytics::large_flow_threshold(spec.threshold_phi, &timing)?
        }
    };
    if !(large.is_finite() && large > medium) {
        return Err(Error::config(
            "large_threshold_bits",
            format!("need medium ({medium}) < large ({large})"),
        ));
    }

    Ok(NetworkConfig {
        n: spec.n,
        k_static: spec.k_static,
        k_rotor: spec.k_rotor,
        k_cache: spec.k_cache,
        rate_bps: spec.rate_bps,
        slot_s: spec.slot_s,
        rotor_reconfig_s: spec.rotor_reconfig_s,
        cache_reconfig_s: spec.cache_reconfig_s,
        medium_threshold_bits: medium,
        large_threshold_bits: large,
        threshold_phi: spec.threshold_phi,
    })
}

impl NetworkConfig {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k_static(&self) -> usize {
        self.k_static
    }
    pub fn k_rotor(&self) -> usize {
        self.k_rotor
    }
    pub fn k_cache(&self) -> usize {
        self.k_cache
    }
    /// Total number of spine switches (= uplinks per ToR).
    pub fn k(&self) -> usize {
        self.k_static + self.k_rotor + self.k_cache
    }
    pub fn rate_bps(&self) -> f64 {
        self.rate_bps
    }
    pub fn slot_s(&self) -> f64 {
        self.slot_s
    }
    pub fn rotor_reconfig_s(&self) -> f64 {
        self.rotor_reconfig_s
    }
    pub fn cache_reconfig_s(&self) -> f64 {
        self.cache_reconfig_s
    }
    pub fn medium_threshold_bits(&self) -> f64 {
        self.medium_threshold_bits
    }
    pub fn large_threshold_bits(&self) -> f64 {
        self.large_threshold_bits
    }
    pub fn threshold_phi(&self) -> f64 {
        self.threshold_phi
    }

    /// Same network with a different switch mix. Thresholds are kept.
    pub fn with_switches(&self, k_static: usize, k_rotor: usize, k_cache: usize) -> Result<Self> {
        let mut spec = self.to_spec();
        spec.k_static = k_static;
        spec.k_rotor = k_rotor;
        spec.k_cache = k_cache;
        validate(spec)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        let mut spec = self.to_spec();
        spec.n = n;
        validate(spec)
    }

    /// The spec this config validates from, with derived thresholds pinned.
    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            n: self.n,
            k_static: self.k_static,
            k_rotor: self.k_rotor,
            k_cache: self.k_cache,
            rate_bps: self.rate_bps,
            slot_s: self.slot_s,
            rotor_reconfig_s: self.rotor_reconfig_s,
            cache_reconfig_s: self.cache_reconfig_s,
            medium_threshold_bits: Some(self.medium_threshold_bits),
            large_threshold_bits: Some(self.large_threshold_bits),
            threshold_phi: self.threshold_phi,
        }
    }

    pub fn timing(&self) -> TimingParams<f64> {
        TimingParams {
            rate: self.rate_bps,
            slot: self.slot_s,
            rotor_reconfig: self.rotor_reconfig_s,
            cache_reconfig: self.cache_reconfig_s,
            medium_threshold: self.medium_threshold_bits,
        }
    }

    /// Timing parameters as exact rationals of their decimal values.
    pub fn exact_timing(&self) -> TimingParams<Exact> {
        let conv = |v: f64| exact_decimal(v).expect("validated values are finite");
        TimingParams {
            rate: conv(self.rate_bps),
            slot: conv(self.slot_s),
            rotor_reconfig: conv(self.rotor_reconfig_s),
            cache_reconfig: conv(self.cache_reconfig_s),
            medium_threshold: conv(self.medium_threshold_bits),
        }
    }

    /// Switch descriptions for the three families present in this network.
    pub fn switch_specs(&self) -> Vec<(usize, SwitchSpec)> {
        let mut out = Vec::new();
        if self.k_static > 0 {
            out.push((self.k_static, SwitchSpec::static_switch()));
        }
        if self.k_rotor > 0 {
            out.push((
                self.k_rotor,
                SwitchSpec::rotor(self.n, self.slot_s, self.rotor_reconfig_s),
            ));
        }
        if self.k_cache > 0 {
            out.push((self.k_cache, SwitchSpec::demand_aware(self.n, self.cache_reconfig_s)));
        }
        out
    }

    pub fn class_of(&self, size_bits: u64) -> Result<FlowClass> {
        class_of(size_bits, self)
    }
}

/// Size class of a flow; determines the plane it is assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowClass {
    Small,
    Medium,
    Large,
}

impl FlowClass {
    pub const ALL: [FlowClass; 3] = [FlowClass::Small, FlowClass::Medium, FlowClass::Large];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowClass::Small => "small",
            FlowClass::Medium => "medium",
            FlowClass::Large => "large",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FlowClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(FlowClass::Small),
            "medium" => Ok(FlowClass::Medium),
            "large" => Ok(FlowClass::Large),
            other => Err(Error::input(format!("unknown flow class `{other}`"))),
        }
    }
}

/// Classifies a flow size with half-open intervals: `[0,|m|)` small,
/// `[|m|,|ℓ|)` medium, `[|ℓ|,∞)` large.
pub fn class_of(size_bits: u64, config: &NetworkConfig) -> Result<FlowClass> {
    if size_bits == 0 {
        return Err(Error::input("flow size must be positive"));
    }
    Ok(classify(size_bits as f64, config))
}

pub(crate) fn classify(size_bits: f64, config: &NetworkConfig) -> FlowClass {
    if size_bits < config.medium_threshold_bits {
        FlowClass::Small
    } else if size_bits < config.large_threshold_bits {
        FlowClass::Medium
    } else {
        FlowClass::Large
    }
}

/// Set of matchings a switch can realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingFamily {
    /// One fixed matching (patch panel).
    SingleFixed,
    /// The n-1 matchings of a rotor cycle.
    RotorCycle,
    /// Any of the n! permutations; never enumerated.
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchingCount {
    Finite(usize),
    /// n! for an unconstrained switch.
    Factorial(usize),
}

/// The (m, M, S, R) description of a spine switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchSpec {
    pub matching_count: MatchingCount,
    pub matching_family: MatchingFamily,
    /// Minimal circuit hold time in seconds; `None` is infinite.
    pub hold_time_s: Option<f64>,
    pub reconfig_time_s: f64,
}

impl SwitchSpec {
    pub fn static_switch() -> Self {
        SwitchSpec {
            matching_count: MatchingCount::Finite(1),
            matching_family: MatchingFamily::SingleFixed,
            hold_time_s: None,
            reconfig_time_s: 0.0,
        }
    }

    pub fn rotor(n: usize, slot_s: f64, reconfig_s: f64) -> Self {
        SwitchSpec {
            matching_count: MatchingCount::Finite(n - 1),
            matching_family: MatchingFamily::RotorCycle,
            hold_time_s: Some(slot_s),
            reconfig_time_s: reconfig_s,
        }
    }

    pub fn demand_aware(n: usize, reconfig_s: f64) -> Self {
        SwitchSpec {
            matching_count: MatchingCount::Factorial(n),
            matching_family: MatchingFamily::Unconstrained,
            // hold time is chosen at runtime
            hold_time_s: None,
            reconfig_time_s: reconfig_s,
        }
    }
}

/// One rack-level flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    pub size_bits: u64,
    pub arrival_s: f64,
    pub class: FlowClass,
}

impl Flow {
    pub fn new(
        id: usize,
        src: usize,
        dst: usize,
        size_bits: u64,
        arrival_s: f64,
        config: &NetworkConfig,
    ) -> Result<Self> {
        if src == dst {
            return Err(Error::input(format!("flow {id} has src == dst == {src}")));
        }
        if src >= config.n() || dst >= config.n() {
            return Err(Error::input(format!(
                "flow {id} endpoint out of range for n = {}",
                config.n()
            )));
        }
        if !(arrival_s.is_finite() && arrival_s >= 0.0) {
            return Err(Error::input(format!("flow {id} has invalid arrival {arrival_s}")));
        }
        let class = class_of(size_bits, config)?;
        Ok(Flow {
            id,
            src,
            dst,
            size_bits,
            arrival_s,
            class,
        })
    }
}

/// n×n accumulated bits over a window, diagonal zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    n: usize,
    cells: Vec<u64>,
    window_s: f64,
}

impl DemandMatrix {
    pub fn zeros(n: usize, window_s: f64) -> Self {
        DemandMatrix {
            n,
            cells: vec![0; n * n],
            window_s,
        }
    }

    pub fn from_rows(rows: &[Vec<u64>], window_s: f64) -> Result<Self> {
        let n = rows.len();
        let mut m = DemandMatrix::zeros(n, window_s);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::input(format!("row {i} has length {} != {n}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 0 {
                    return Err(Error::input(format!("diagonal entry ({i},{i}) must be zero")));
                }
                m.cells[i * n + j] = v;
            }
        }
        Ok(m)
    }

    /// Accumulates the flows of the selected classes.
    pub fn from_flows<'a>(
        n: usize,
        window_s: f64,
        flows: impl IntoIterator<Item = &'a Flow>,
        filter: ClassFilter,
    ) -> Self {
        let mut m = DemandMatrix::zeros(n, window_s);
        for f in flows {
            if filter.accepts(f.class) {
                m.add(f.src, f.dst, f.size_bits);
            }
        }
        m
    }

    pub fn add(&mut self, src: usize, dst: usize, bits: u64) {
        debug_assert_ne!(src, dst);
        self.cells[src * self.n + dst] += bits;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn get(&self, src: usize, dst: usize) -> u64 {
        self.cells[src * self.n + dst]
    }

    pub fn row(&self, src: usize) -> &[u64] {
        &self.cells[src * self.n..(src + 1) * self.n]
    }

    pub fn row_sum(&self, src: usize) -> u64 {
        self.row(src).iter().sum()
    }

    pub fn col_sum(&self, dst: usize) -> u64 {
        (0..self.n).map(|i| self.get(i, dst)).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }
}

/// Which flow classes a query considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    Only(FlowClass),
}

impl ClassFilter {
    pub fn accepts(self, class: FlowClass) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::Only(c) => c == class,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn numeric() -> NetworkConfig {
        NetworkSpec::paper_numeric().validate().unwrap()
    }

    #[test]
    fn paper_numeric_profile_validates() {
        let c = numeric();
        assert_eq!(c.n(), 256);
        assert_eq!(c.k(), 37);
        assert_relative_eq!(c.medium_threshold_bits(), 1e6, max_relative = 1e-12);
        assert_relative_eq!(c.large_threshold_bits(), 1e9);
    }

    #[test]
    fn medium_threshold_defaults_to_slot_times_rate() {
        let spec = NetworkSpec {
            rate_bps: 40e9,
            large_threshold_bits: Some(1e10),
            ..NetworkSpec::paper_numeric()
        };
        let c = spec.validate().unwrap();
        assert_relative_eq!(c.medium_threshold_bits(), 4e6, max_relative = 1e-12);
    }

    #[test]
    fn empty_network_rejected() {
        let spec = NetworkSpec {
            k_static: 0,
            k_rotor: 0,
            k_cache: 0,
            ..NetworkSpec::paper_numeric()
        };
        let err = spec.validate().unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "k", .. }));
        assert!(err.to_string().contains("k >= 1"));
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let cases: Vec<(NetworkSpec, &str)> = vec![
            (
                NetworkSpec {
                    n: 1,
                    ..NetworkSpec::paper_numeric()
                },
                "n",
            ),
            (
                NetworkSpec {
                    rate_bps: 0.0,
                    ..NetworkSpec::paper_numeric()
                },
                "rate_bps",
            ),
            (
                NetworkSpec {
                    slot_s: -1.0,
                    ..NetworkSpec::paper_numeric()
                },
                "slot_s",
            ),
            (
                NetworkSpec {
                    rotor_reconfig_s: 1.0,
                    ..NetworkSpec::paper_numeric()
                },
                "rotor_reconfig_s",
            ),
            (
                NetworkSpec {
                    large_threshold_bits: Some(1e5),
                    ..NetworkSpec::paper_numeric()
                },
                "large_threshold_bits",
            ),
            (
                NetworkSpec {
                    threshold_phi: 1.5,
                    ..NetworkSpec::paper_numeric()
                },
                "threshold_phi",
            ),
        ];
        for (spec, field) in cases {
            match spec.validate() {
                Err(Error::InvalidConfig { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected rejection of {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn derived_large_threshold_uses_configured_phi() {
        let spec = NetworkSpec {
            large_threshold_bits: None,
            threshold_phi: 0.0,
            ..NetworkSpec::paper_numeric()
        };
        let c = spec.validate().unwrap();
        assert_relative_eq!(c.large_threshold_bits(), 1.25e8, max_relative = 1e-9);
    }

    #[test]
    fn singular_threshold_is_all_medium_error() {
        // r·(R_r+δ) = |m| at φ = 1
        let spec = NetworkSpec {
            medium_threshold_bits: Some(10e9 * 110e-6),
            large_threshold_bits: None,
            threshold_phi: 1.0,
            ..NetworkSpec::paper_numeric()
        };
        assert!(matches!(spec.validate(), Err(Error::NoLargeThreshold { .. })));
    }

    #[test]
    fn classification_boundaries() {
        let c = numeric();
        assert_eq!(c.class_of(500_000).unwrap(), FlowClass::Small);
        assert_eq!(c.class_of(1_000_000).unwrap(), FlowClass::Medium);
        assert_eq!(c.class_of(999_999_999).unwrap(), FlowClass::Medium);
        assert_eq!(c.class_of(1_000_000_000).unwrap(), FlowClass::Large);
        assert!(c.class_of(0).is_err());
    }

    #[test]
    fn switch_specs_follow_families() {
        let c = numeric();
        let specs = c.switch_specs();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[0].1.matching_count, MatchingCount::Finite(1));
        assert_eq!(specs[0].1.hold_time_s, None);
        assert_eq!(specs[0].1.reconfig_time_s, 0.0);
        assert_eq!(specs[1].1.matching_count, MatchingCount::Finite(255));
        assert_eq!(specs[2].1.matching_family, MatchingFamily::Unconstrained);
    }

    #[test]
    fn flow_rejects_self_loops() {
        let c = numeric();
        assert!(Flow::new(0, 3, 3, 10, 0.0, &c).is_err());
        let f = Flow::new(0, 3, 4, 2_000_000, 0.5, &c).unwrap();
        assert_eq!(f.class, FlowClass::Medium);
    }

    #[test]
    fn demand_matrix_sums() {
        let m = DemandMatrix::from_rows(&[vec![0, 1, 2], vec![3, 0, 4], vec![0, 0, 0]], 1.0).unwrap();
        assert_eq!(m.total(), 10);
        assert_eq!(m.row_sum(1), 7);
        assert_eq!(m.col_sum(2), 6);
        assert!(DemandMatrix::from_rows(&[vec![1, 0], vec![0, 0]], 1.0).is_err());
    }
}
