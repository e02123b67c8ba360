//! Run configuration: named profiles plus a flat file grammar of dotted
//! keys in human units.
//!
//! ```text
//! profile = "paper-numeric"
//! network.n = 64
//! network.k_static = 5
//! link.rate_gbps = 10
//! timing.demand_aware_reconfig_ms = 15
//! traffic.load_x = 0.5
//! traffic.distribution.kind = "log-uniform"
//! traffic.distribution.min_bits = 1e4
//! traffic.distribution.max_bits = 1e10
//! thresholds.large_mb = "derived"
//! ```
//!
//! The text is TOML, so dotted keys and `[section]` tables both work. Keys
//! not set fall back to the selected profile.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use toml::Value;

use crate::distribution::FlowSizeDistribution;
use crate::error::{Error, Result};
use crate::model::{NetworkConfig, NetworkSpec};
use crate::traffic::{TrafficModel, TrafficSpec};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Profile {
    /// Table values at 10 Gbps with a 125 MB large threshold.
    PaperNumeric,
    /// Table values verbatim (40 Gbps); large threshold derived at φ = 1.
    PaperTable1,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::PaperNumeric, Profile::PaperTable1];

    pub fn name(self) -> &'static str {
        match self {
            Profile::PaperNumeric => "paper-numeric",
            Profile::PaperTable1 => "paper-table1",
        }
    }

    pub fn network_spec(self) -> NetworkSpec {
        match self {
            Profile::PaperNumeric => NetworkSpec::paper_numeric(),
            Profile::PaperTable1 => NetworkSpec::paper_table1(),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Profile::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::input(format!(
                "unknown profile `{s}` (expected paper-numeric or paper-table1)"
            ))
        })
    }
}

/// A flow-size distribution given inline or by CSV path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DistributionSource {
    Inline(FlowSizeDistribution),
    /// Resolved relative to the config file's directory.
    File(PathBuf),
}

/// Everything a run needs, in the units of the file grammar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub profile: Profile,
    pub n: usize,
    pub k_static: usize,
    pub k_rotor: usize,
    pub k_demand_aware: usize,
    pub rate_gbps: f64,
    pub slot_us: f64,
    pub rotor_reconfig_us: f64,
    pub demand_aware_reconfig_ms: f64,
    pub medium_mbit: Option<f64>,
    pub large_mb: Option<f64>,
    pub threshold_phi: f64,
    pub traffic_model: TrafficModel,
    pub load_x: f64,
    pub per_tor_rate: f64,
    pub window_s: f64,
    pub traffic_seed: u64,
    pub distribution: DistributionSource,
    pub phi: f64,
    pub phi_m: f64,
    pub expander_seed: u64,
}

const KEYS: &[&str] = &[
    "profile",
    "network.n",
    "network.k_static",
    "network.k_rotor",
    "network.k_demand_aware",
    "link.rate_gbps",
    "timing.slot_us",
    "timing.rotor_reconfig_us",
    "timing.demand_aware_reconfig_ms",
    "thresholds.medium_mbit",
    "thresholds.large_mb",
    "thresholds.phi",
    "traffic.model",
    "traffic.load_x",
    "traffic.per_tor_rate",
    "traffic.window_s",
    "traffic.seed",
    "traffic.distribution.kind",
    "traffic.distribution.file",
    "traffic.distribution.points",
    "traffic.distribution.size_bits",
    "traffic.distribution.small_bits",
    "traffic.distribution.large_bits",
    "traffic.distribution.p_large",
    "traffic.distribution.min_bits",
    "traffic.distribution.max_bits",
    "traffic.distribution.scale_bits",
    "traffic.distribution.shape",
    "traffic.distribution.cap_bits",
    "analysis.phi",
    "analysis.phi_m",
    "expander.seed",
];

impl RunConfig {
    pub fn from_profile(profile: Profile) -> Self {
        // literal table values in file units, so they convert exactly
        let (rate_gbps, large_mb) = match profile {
            Profile::PaperNumeric => (10.0, Some(125.0)),
            Profile::PaperTable1 => (40.0, None),
        };
        RunConfig {
            profile,
            n: 256,
            k_static: 5,
            k_rotor: 16,
            k_demand_aware: 16,
            rate_gbps,
            slot_us: 100.0,
            rotor_reconfig_us: 10.0,
            demand_aware_reconfig_ms: 15.0,
            medium_mbit: None,
            large_mb,
            threshold_phi: 1.0,
            traffic_model: TrafficModel::Uniform,
            load_x: 0.5,
            per_tor_rate: 1.0,
            window_s: 1.0,
            traffic_seed: 1,
            distribution: DistributionSource::Inline(
                FlowSizeDistribution::log_uniform(1e4, 1e10).expect("valid default"),
            ),
            phi: 1.0,
            phi_m: 1.0,
            expander_seed: 0,
        }
    }

    /// Parses config text. `base` is used unless the text names a profile.
    pub fn parse(text: &str, base: Profile) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            reason: e.message().to_string(),
        })?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        for key in flat.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line: find_key_line(text, key),
                    reason: format!("unknown key `{key}`"),
                });
            }
        }
        let get = Getter { text, flat: &flat };
        let profile = match get.string("profile")? {
            Some(name) => name.parse()?,
            None => base,
        };
        let mut c = RunConfig::from_profile(profile);
        get.usize_into("network.n", &mut c.n)?;
        get.usize_into("network.k_static", &mut c.k_static)?;
        get.usize_into("network.k_rotor", &mut c.k_rotor)?;
        get.usize_into("network.k_demand_aware", &mut c.k_demand_aware)?;
        get.float_into("link.rate_gbps", &mut c.rate_gbps)?;
        get.float_into("timing.slot_us", &mut c.slot_us)?;
        get.float_into("timing.rotor_reconfig_us", &mut c.rotor_reconfig_us)?;
        get.float_into("timing.demand_aware_reconfig_ms", &mut c.demand_aware_reconfig_ms)?;
        get.threshold_into("thresholds.medium_mbit", &mut c.medium_mbit)?;
        get.threshold_into("thresholds.large_mb", &mut c.large_mb)?;
        get.float_into("thresholds.phi", &mut c.threshold_phi)?;
        if let Some(m) = get.string("traffic.model")? {
            c.traffic_model = match m.as_str() {
                "uniform" => TrafficModel::Uniform,
                "skewed" => TrafficModel::Skewed,
                other => return Err(get.bad("traffic.model", format!("expected uniform or skewed, got `{other}`"))),
            };
        }
        get.float_into("traffic.load_x", &mut c.load_x)?;
        get.float_into("traffic.per_tor_rate", &mut c.per_tor_rate)?;
        get.float_into("traffic.window_s", &mut c.window_s)?;
        if let Some(v) = get.uint("traffic.seed")? {
            c.traffic_seed = v;
        }
        if let Some(d) = parse_distribution(&get)? {
            c.distribution = d;
        }
        get.float_into("analysis.phi", &mut c.phi)?;
        get.float_into("analysis.phi_m", &mut c.phi_m)?;
        if let Some(v) = get.uint("expander.seed")? {
            c.expander_seed = v;
        }
        Ok(c)
    }

    pub fn from_path(path: impl AsRef<Path>, base: Profile) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut c = Self::parse(&text, base)?;
        if let DistributionSource::File(f) = &c.distribution {
            if f.is_relative() {
                let dir = path.parent().unwrap_or(Path::new("."));
                c.distribution = DistributionSource::File(dir.join(f));
            }
        }
        Ok(c)
    }

    /// Writes every key explicitly, so the output parses back to `self`
    /// under any base profile.
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: Value| out.push_str(&format!("{k} = {v}\n"));
        line("profile", Value::String(self.profile.name().into()));
        line("network.n", int(self.n as u64));
        line("network.k_static", int(self.k_static as u64));
        line("network.k_rotor", int(self.k_rotor as u64));
        line("network.k_demand_aware", int(self.k_demand_aware as u64));
        line("link.rate_gbps", Value::Float(self.rate_gbps));
        line("timing.slot_us", Value::Float(self.slot_us));
        line("timing.rotor_reconfig_us", Value::Float(self.rotor_reconfig_us));
        line(
            "timing.demand_aware_reconfig_ms",
            Value::Float(self.demand_aware_reconfig_ms),
        );
        let threshold = |v: Option<f64>| v.map_or(Value::String(DERIVED.into()), Value::Float);
        line("thresholds.medium_mbit", threshold(self.medium_mbit));
        line("thresholds.large_mb", threshold(self.large_mb));
        line("thresholds.phi", Value::Float(self.threshold_phi));
        let model = match self.traffic_model {
            TrafficModel::Uniform => "uniform",
            TrafficModel::Skewed => "skewed",
        };
        line("traffic.model", Value::String(model.into()));
        line("traffic.load_x", Value::Float(self.load_x));
        line("traffic.per_tor_rate", Value::Float(self.per_tor_rate));
        line("traffic.window_s", Value::Float(self.window_s));
        line("traffic.seed", int(self.traffic_seed));
        match &self.distribution {
            DistributionSource::File(p) => {
                line("traffic.distribution.kind", Value::String("empirical".into()));
                line("traffic.distribution.file", Value::String(p.display().to_string()));
            }
            DistributionSource::Inline(d) => {
                for (k, v) in distribution_entries(d) {
                    line(&format!("traffic.distribution.{k}"), v);
                }
            }
        }
        line("analysis.phi", Value::Float(self.phi));
        line("analysis.phi_m", Value::Float(self.phi_m));
        line("expander.seed", int(self.expander_seed));
        out
    }

    /// Converts to SI units and validates.
    pub fn network(&self) -> Result<NetworkConfig> {
        NetworkSpec {
            n: self.n,
            k_static: self.k_static,
            k_rotor: self.k_rotor,
            k_cache: self.k_demand_aware,
            rate_bps: units::gbps_to_bps(self.rate_gbps),
            slot_s: units::us_to_s(self.slot_us),
            rotor_reconfig_s: units::us_to_s(self.rotor_reconfig_us),
            cache_reconfig_s: units::ms_to_s(self.demand_aware_reconfig_ms),
            medium_threshold_bits: self.medium_mbit.map(units::mbit_to_bits),
            large_threshold_bits: self.large_mb.map(units::megabytes_to_bits),
            threshold_phi: self.threshold_phi,
        }
        .validate()
    }

    /// Loads the flow-size distribution, reading the CSV if needed.
    pub fn load_distribution(&self) -> Result<FlowSizeDistribution> {
        match &self.distribution {
            DistributionSource::Inline(d) => Ok(d.clone()),
            DistributionSource::File(p) => FlowSizeDistribution::from_csv_path(p),
        }
    }

    pub fn traffic(&self) -> Result<TrafficSpec> {
        let spec = TrafficSpec {
            model: self.traffic_model,
            load_x: self.load_x,
            per_tor_rate_l: self.per_tor_rate,
            distribution: self.load_distribution()?,
            window_s: self.window_s,
            seed: self.traffic_seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Threshold value meaning "compute from the timing parameters".
const DERIVED: &str = "derived";

fn int(v: u64) -> Value {
    Value::Integer(v as i64)
}

fn distribution_entries(d: &FlowSizeDistribution) -> Vec<(&'static str, Value)> {
    let float = Value::Float;
    match d {
        FlowSizeDistribution::EmpiricalHistogram { points } => vec![
            ("kind", Value::String("empirical".into())),
            (
                "points",
                Value::Array(
                    points
                        .iter()
                        .map(|&(s, p)| Value::Array(vec![int(s), float(p)]))
                        .collect(),
                ),
            ),
        ],
        FlowSizeDistribution::TwoPointMixture {
            small_bits,
            large_bits,
            p_large,
        } => vec![
            ("kind", Value::String("two-point".into())),
            ("small_bits", int(*small_bits)),
            ("large_bits", int(*large_bits)),
            ("p_large", float(*p_large)),
        ],
        FlowSizeDistribution::LogUniform { min_bits, max_bits } => vec![
            ("kind", Value::String("log-uniform".into())),
            ("min_bits", float(*min_bits)),
            ("max_bits", float(*max_bits)),
        ],
        FlowSizeDistribution::Pareto {
            scale_bits,
            shape,
            cap_bits,
        } => {
            let mut v = vec![
                ("kind", Value::String("pareto".into())),
                ("scale_bits", float(*scale_bits)),
                ("shape", float(*shape)),
            ];
            if let Some(c) = cap_bits {
                v.push(("cap_bits", float(*c)));
            }
            v
        }
    }
}

fn parse_distribution(get: &Getter<'_>) -> Result<Option<DistributionSource>> {
    const P: &str = "traffic.distribution.";
    let kind = match get.string("traffic.distribution.kind")? {
        Some(k) => k,
        None => {
            if let Some(k) = get.flat.keys().find(|k| k.starts_with(P)) {
                return Err(get.bad(k, "distribution parameters need `traffic.distribution.kind`".into()));
            }
            return Ok(None);
        }
    };
    let need = |key: &str| -> Result<f64> {
        let full = format!("{P}{key}");
        get.float(&full)?
            .ok_or_else(|| get.bad("traffic.distribution.kind", format!("kind `{kind}` needs `{full}`")))
    };
    let need_bits = |key: &str| -> Result<u64> {
        let full = format!("{P}{key}");
        get.uint(&full)?
            .ok_or_else(|| get.bad("traffic.distribution.kind", format!("kind `{kind}` needs `{full}`")))
    };
    let dist = match kind.as_str() {
        "empirical" => {
            if let Some(f) = get.string("traffic.distribution.file")? {
                return Ok(Some(DistributionSource::File(PathBuf::from(f))));
            }
            let key = "traffic.distribution.points";
            let arr = match get.flat.get(key) {
                Some(Value::Array(a)) => a,
                _ => {
                    return Err(get.bad(
                        key,
                        "empirical kind needs `file` or `points = [[size_bits, p], ...]`".into(),
                    ))
                }
            };
            let mut points = Vec::with_capacity(arr.len());
            for item in arr {
                let pair = item.as_array().filter(|a| a.len() == 2);
                let parsed = pair.and_then(|a| Some((as_uint(&a[0])?, as_float(&a[1])?)));
                match parsed {
                    Some(p) => points.push(p),
                    None => return Err(get.bad(key, format!("bad point {item}"))),
                }
            }
            FlowSizeDistribution::empirical(points)
        }
        "point" => FlowSizeDistribution::point(need_bits("size_bits")?),
        "two-point" => {
            FlowSizeDistribution::two_point(need_bits("small_bits")?, need_bits("large_bits")?, need("p_large")?)
        }
        "log-uniform" => FlowSizeDistribution::log_uniform(need("min_bits")?, need("max_bits")?),
        "pareto" => FlowSizeDistribution::pareto(
            need("scale_bits")?,
            need("shape")?,
            get.float("traffic.distribution.cap_bits")?,
        ),
        other => return Err(get.bad("traffic.distribution.kind", format!("unknown kind `{other}`"))),
    };
    Ok(Some(DistributionSource::Inline(
        dist.map_err(|e| get.bad("traffic.distribution.kind", e.to_string()))?,
    )))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Best-effort line of a key: the first line mentioning its last segment.
fn find_key_line(text: &str, key: &str) -> usize {
    let last = key.rsplit('.').next().unwrap_or(key);
    text.lines()
        .position(|l| l.split('=').next().is_some_and(|lhs| lhs.contains(last)))
        .map_or(0, |i| i + 1)
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_uint(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 && *f < 1.8e19 => Some(*f as u64),
        _ => None,
    }
}

struct Getter<'a> {
    text: &'a str,
    flat: &'a BTreeMap<String, Value>,
}

impl Getter<'_> {
    fn bad(&self, key: &str, reason: String) -> Error {
        Error::Parse {
            line: find_key_line(self.text, key),
            reason: format!("{key}: {reason}"),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.flat.get(key) {
            None => Ok(None),
            Some(v) => as_float(v)
                .map(Some)
                .ok_or_else(|| self.bad(key, format!("expected a number, got {v}"))),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.flat.get(key) {
            None => Ok(None),
            Some(v) => as_uint(v)
                .map(Some)
                .ok_or_else(|| self.bad(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.flat.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.bad(key, format!("expected a string, got {v}"))),
        }
    }

    /// A number, or `"derived"` to clear the profile's value.
    fn threshold_into(&self, key: &str, slot: &mut Option<f64>) -> Result<()> {
        match self.flat.get(key) {
            None => Ok(()),
            Some(Value::String(s)) if s == DERIVED => {
                *slot = None;
                Ok(())
            }
            Some(v) => match as_float(v) {
                Some(f) => {
                    *slot = Some(f);
                    Ok(())
                }
                None => Err(self.bad(key, format!("expected a number or \"{DERIVED}\", got {v}"))),
            },
        }
    }

    fn float_into(&self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.float(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn usize_into(&self, key: &str, slot: &mut usize) -> Result<()> {
        if let Some(v) = self.uint(key)? {
            *slot = v as usize;
        }
        Ok(())
    }
}
