//! Traffic generation under the uniform U(x) and skewed S_L(x) models,
//! per-class byte rates, and skewness estimation.

use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::distribution::FlowSizeDistribution;
use crate::error::{Error, Result};
use crate::model::{classify, ClassFilter, DemandMatrix, Flow, FlowClass, NetworkConfig};

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficModel {
    /// Every ToR active at x·k·r, destinations uniform over all others.
    Uniform,
    /// ⌈x·n⌉ active ToRs at L·k·r, destinations uniform over active ToRs.
    Skewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    pub model: TrafficModel,
    /// Load (uniform) or active fraction (skewed).
    pub load_x: f64,
    /// Per-active-ToR load L; skewed model only.
    pub per_tor_rate_l: f64,
    pub distribution: FlowSizeDistribution,
    pub window_s: f64,
    pub seed: u64,
}

impl TrafficSpec {
    pub fn uniform(load_x: f64, distribution: FlowSizeDistribution, seed: u64) -> Self {
        TrafficSpec {
            model: TrafficModel::Uniform,
            load_x,
            per_tor_rate_l: 1.0,
            distribution,
            window_s: 1.0,
            seed,
        }
    }

    pub fn skewed(active_x: f64, per_tor_rate_l: f64, distribution: FlowSizeDistribution, seed: u64) -> Self {
        TrafficSpec {
            model: TrafficModel::Skewed,
            load_x: active_x,
            per_tor_rate_l,
            distribution,
            window_s: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.load_x) {
            return Err(Error::config(
                "load_x",
                format!("must lie in [0, 1], got {}", self.load_x),
            ));
        }
        if self.model == TrafficModel::Skewed && !(self.per_tor_rate_l > 0.0 && self.per_tor_rate_l <= 1.0) {
            return Err(Error::config(
                "per_tor_rate_l",
                format!("must lie in (0, 1], got {}", self.per_tor_rate_l),
            ));
        }
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::config(
                "window_s",
                format!("must be positive, got {}", self.window_s),
            ));
        }
        self.distribution.validate()
    }

    /// Offered bits/s of each active ToR.
    pub fn per_tor_rate_bps(&self, config: &NetworkConfig) -> f64 {
        let full = config.k() as f64 * config.rate_bps();
        match self.model {
            TrafficModel::Uniform => self.load_x * full,
            TrafficModel::Skewed => self.per_tor_rate_l * full,
        }
    }

    /// The active ToR set, sorted. Deterministic in the seed.
    pub fn active_tors(&self, n: usize) -> Result<Vec<usize>> {
        match self.model {
            TrafficModel::Uniform => Ok((0..n).collect()),
            TrafficModel::Skewed => {
                let count = active_count(self.load_x, n);
                if count < 2 {
                    return Err(Error::input(format!(
                        "skewed traffic with {count} active ToRs has no valid destinations"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_ac71_e000_0000);
                let mut active = index::sample(&mut rng, n, count).into_vec();
                active.sort_unstable();
                Ok(active)
            }
        }
    }
}

/// ⌈x·n⌉, guarding against float noise just above an integer.
fn active_count(x: f64, n: usize) -> usize {
    let v = x * n as f64;
    let r = v.round();
    let c = if (v - r).abs() < 1e-9 { r } else { v.ceil() };
    (c as usize).min(n)
}

/// A generated flow sequence with its active ToR set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    pub flows: Vec<Flow>,
    pub active: Vec<usize>,
    pub window_s: f64,
}

impl TrafficTrace {
    pub fn total_bits(&self) -> u64 {
        self.flows.iter().map(|f| f.size_bits).sum()
    }

    pub fn demand(&self, n: usize) -> ClassedDemand {
        ClassedDemand::from_flows(n, self.window_s, &self.flows)
    }

    /// Destination scope matching the generating model.
    pub fn scope(&self, n: usize) -> DestinationScope {
        if self.active.len() == n {
            DestinationScope::AllOthers
        } else {
            DestinationScope::Active(self.active.clone())
        }
    }
}

/// Draws Poisson flow arrivals per active source with rate
/// λ = (offered bits/s) / E[size], i.i.d. sizes, uniform destinations.
pub fn generate(spec: &TrafficSpec, config: &NetworkConfig) -> Result<TrafficTrace> {
    spec.validate()?;
    let n = config.n();
    let active = spec.active_tors(n)?;
    let mut flows = Vec::new();
    let rate_bps = spec.per_tor_rate_bps(config);
    let lambda = rate_bps / spec.distribution.mean();
    if lambda > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let gap = Exp::new(lambda).map_err(|e| Error::input(e.to_string()))?;
        let dests: &[usize] = &active;
        for &src in &active {
            let mut t = gap.sample(&mut rng);
            while t < spec.window_s {
                let size = spec.distribution.sample(&mut rng);
                let dst = match spec.model {
                    TrafficModel::Uniform => {
                        let d = rng.random_range(0..n - 1);
                        if d >= src {
                            d + 1
                        } else {
                            d
                        }
                    }
                    TrafficModel::Skewed => loop {
                        let d = dests[rng.random_range(0..dests.len())];
                        if d != src {
                            break d;
                        }
                    },
                };
                flows.push(Flow {
                    id: 0,
                    src,
                    dst,
                    size_bits: size,
                    arrival_s: t,
                    class: classify(size as f64, config),
                });
                t += gap.sample(&mut rng);
            }
        }
    }
    flows.sort_by(|a, b| a.arrival_s.total_cmp(&b.arrival_s).then(a.src.cmp(&b.src)));
    for (i, f) in flows.iter_mut().enumerate() {
        f.id = i;
    }
    Ok(TrafficTrace {
        flows,
        active,
        window_s: spec.window_s,
    })
}

/// Expected bits/s per ToR in each class, U(x,τ).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassRates {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

impl ClassRates {
    pub fn total(&self) -> f64 {
        self.small + self.medium + self.large
    }

    pub fn get(&self, class: FlowClass) -> f64 {
        match class {
            FlowClass::Small => self.small,
            FlowClass::Medium => self.medium,
            FlowClass::Large => self.large,
        }
    }
}

/// U(x,τ) = x·k·r·(byte share of class τ), from the distribution's moments.
pub fn class_rates(dist: &FlowSizeDistribution, x: f64, config: &NetworkConfig) -> ClassRates {
    let full = config.k() as f64 * config.rate_bps();
    let mean = dist.mean();
    let share = |c| dist.class_moments(c, config).first / mean;
    ClassRates {
        small: x * full * share(FlowClass::Small),
        medium: x * full * share(FlowClass::Medium),
        large: x * full * share(FlowClass::Large),
    }
}

/// Total variation distance from uniform: ½ Σ |p_i − 1/n|.
pub fn variation_distance(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::input("empty distribution"));
    }
    let mut total = 0.0;
    for &v in p {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::input(format!("negative or invalid mass {v}")));
        }
        total += v;
    }
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::input(format!("masses sum to {total}, expected 1")));
    }
    let u = 1.0 / p.len() as f64;
    Ok(0.5 * p.iter().map(|&v| (v - u).abs()).sum::<f64>())
}

/// Destination set each source's load is compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum DestinationScope {
    /// All n − 1 other ToRs (uniform model).
    AllOthers,
    /// Only the listed active ToRs, excluding the source (skewed model).
    Active(Vec<usize>),
}

/// Per-class demand matrices accumulated from one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassedDemand {
    by_class: [DemandMatrix; 3],
}

impl ClassedDemand {
    pub fn from_flows(n: usize, window_s: f64, flows: &[Flow]) -> Self {
        let mut by_class = [
            DemandMatrix::zeros(n, window_s),
            DemandMatrix::zeros(n, window_s),
            DemandMatrix::zeros(n, window_s),
        ];
        for f in flows {
            by_class[f.class.index()].add(f.src, f.dst, f.size_bits);
        }
        ClassedDemand { by_class }
    }

    pub fn class(&self, c: FlowClass) -> &DemandMatrix {
        &self.by_class[c.index()]
    }

    /// Sum of the selected classes.
    pub fn select(&self, filter: ClassFilter) -> DemandMatrix {
        match filter {
            ClassFilter::Only(c) => self.class(c).clone(),
            ClassFilter::All => {
                let base = &self.by_class[0];
                let n = base.n();
                let mut out = DemandMatrix::zeros(n, base.window_s());
                for m in &self.by_class {
                    for i in 0..n {
                        for j in 0..n {
                            let v = m.get(i, j);
                            if v > 0 {
                                out.add(i, j, v);
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// φ for the selected classes: byte-weighted mean over active rows of
/// 1 − Δ(row), each row normalized over its destination scope.
pub fn skewness_phi(demand: &ClassedDemand, filter: ClassFilter, scope: &DestinationScope) -> Result<f64> {
    matrix_skewness(&demand.select(filter), scope)
}

/// φ of a single demand matrix.
pub fn matrix_skewness(m: &DemandMatrix, scope: &DestinationScope) -> Result<f64> {
    let n = m.n();
    let mut weighted = 0.0;
    let mut weight = 0.0;
    let mut probs = Vec::with_capacity(n);
    for src in 0..n {
        let row = m.row(src);
        let sum: u64 = row.iter().sum();
        if sum == 0 {
            continue;
        }
        probs.clear();
        let mut covered = 0u64;
        match scope {
            DestinationScope::AllOthers => {
                for (d, &v) in row.iter().enumerate() {
                    if d != src {
                        probs.push(v as f64 / sum as f64);
                        covered += v;
                    }
                }
            }
            DestinationScope::Active(active) => {
                for &d in active {
                    if d != src {
                        probs.push(row[d] as f64 / sum as f64);
                        covered += row[d];
                    }
                }
            }
        }
        if covered != sum {
            return Err(Error::input(format!(
                "row {src} sends traffic outside its destination scope"
            )));
        }
        if probs.is_empty() {
            continue;
        }
        let delta = variation_distance(&probs)?;
        weighted += sum as f64 * (1.0 - delta);
        weight += sum as f64;
    }
    if weight == 0.0 {
        return Err(Error::input("demand matrix has no traffic"));
    }
    Ok(weighted / weight)
}

/// Writes a flow trace as CSV `arrival_s,src,dst,size_bits,class`.
pub fn write_trace_csv<W: Write>(flows: &[Flow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["arrival_s", "src", "dst", "size_bits", "class"])?;
    for f in flows {
        wtr.write_record([
            f.arrival_s.to_string(),
            f.src.to_string(),
            f.dst.to_string(),
            f.size_bits.to_string(),
            f.class.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]; classes are recomputed
/// against `config` and must match the recorded column.
pub fn read_trace_csv<R: Read>(r: R, config: &NetworkConfig) -> Result<Vec<Flow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let expected = ["arrival_s", "src", "dst", "size_bits", "class"];
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut flows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse_err = |field: &str, e: String| Error::Parse {
            line,
            reason: format!("{field}: {e}"),
        };
        let arrival: f64 = rec[0]
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err("arrival_s", e.to_string()))?;
        let src: usize = rec[1]
            .parse()
            .map_err(|e: std::num::ParseIntError| parse_err("src", e.to_string()))?;
        let dst: usize = rec[2]
            .parse()
            .map_err(|e: std::num::ParseIntError| parse_err("dst", e.to_string()))?;
        let size: u64 = rec[3]
            .parse()
            .map_err(|e: std::num::ParseIntError| parse_err("size_bits", e.to_string()))?;
        let class: FlowClass = rec[4].parse()?;
        let flow = Flow::new(i, src, dst, size, arrival, config)?;
        if flow.class != class {
            return Err(parse_err(
                "class",
                format!("recorded `{class}` but thresholds give `{}`", flow.class),
            ));
        }
        flows.push(flow);
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg() -> NetworkConfig {
        NetworkSpec {
            k_static: 0,
            k_rotor: 32,
            k_cache: 0,
            ..NetworkSpec::paper_numeric()
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn zero_load_is_empty() {
        let c = cfg();
        let spec = TrafficSpec::uniform(0.0, FlowSizeDistribution::point(4_000_000).unwrap(), 1);
        assert!(generate(&spec, &c).unwrap().flows.is_empty());
    }

    #[test]
    fn uniform_total_within_compound_poisson_band() {
        let c = cfg();
        let d = FlowSizeDistribution::log_uniform(1e7, 1e9).unwrap();
        let spec = TrafficSpec::uniform(0.5, d.clone(), 42);
        let trace = generate(&spec, &c).unwrap();
        // compound Poisson: mean = Λ E[S], var = Λ E[S²]
        let rate = 0.5 * 32.0 * 1e10;
        let lambda_total = 256.0 * rate / d.mean();
        let (a, b) = (1e7f64, 1e9f64);
        let second = (b * b - a * a) / (2.0 * (b / a).ln());
        let mean = lambda_total * d.mean();
        let sd = (lambda_total * second).sqrt();
        assert_relative_eq!(mean, 4.096e13, max_relative = 1e-12);
        let total = trace.total_bits() as f64;
        assert!((total - mean).abs() <= 3.0 * sd, "total {total} mean {mean} sd {sd}");
    }

    #[test]
    fn skewed_sources_and_destinations_stay_active() {
        let c = cfg();
        let spec = TrafficSpec::skewed(0.25, 1.0, FlowSizeDistribution::point(100_000_000).unwrap(), 9);
        let trace = generate(&spec, &c).unwrap();
        assert_eq!(trace.active.len(), 64);
        let mut srcs: Vec<usize> = trace.flows.iter().map(|f| f.src).collect();
        srcs.sort_unstable();
        srcs.dedup();
        assert_eq!(srcs, trace.active);
        assert!(trace
            .flows
            .iter()
            .all(|f| trace.active.binary_search(&f.dst).is_ok() && f.dst != f.src));
    }

    #[test]
    fn skewed_with_one_active_is_rejected() {
        let c = cfg();
        let spec = TrafficSpec::skewed(1.0 / 256.0, 1.0, FlowSizeDistribution::point(10).unwrap(), 1);
        assert!(generate(&spec, &c).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let c = cfg().with_n(16).unwrap();
        let spec = TrafficSpec::uniform(0.3, FlowSizeDistribution::log_uniform(1e6, 1e8).unwrap(), 5);
        assert_eq!(generate(&spec, &c).unwrap(), generate(&spec, &c).unwrap());
        let other = TrafficSpec {
            seed: 6,
            ..spec.clone()
        };
        assert_ne!(generate(&spec, &c).unwrap(), generate(&other, &c).unwrap());
    }

    #[test]
    fn demand_conserves_bits() {
        let c = cfg().with_n(16).unwrap();
        let spec = TrafficSpec::uniform(0.2, FlowSizeDistribution::log_uniform(1e5, 1e9).unwrap(), 3);
        let trace = generate(&spec, &c).unwrap();
        let d = trace.demand(16);
        assert_eq!(d.select(ClassFilter::All).total(), trace.total_bits());
        let by_class: u64 = FlowClass::ALL.iter().map(|&k| d.class(k).total()).sum();
        assert_eq!(by_class, trace.total_bits());
    }

    #[test]
    fn class_rate_examples() {
        let c = cfg();
        let tiny = FlowSizeDistribution::point(1000).unwrap();
        let r = class_rates(&tiny, 0.4, &c);
        assert_relative_eq!(r.small, 0.4 * 32e10);
        assert_eq!((r.medium, r.large), (0.0, 0.0));

        let mix = FlowSizeDistribution::two_point_by_bytes(1_000_000, 1_000_000_000, 0.5).unwrap();
        let r = class_rates(&mix, 1.0, &c);
        assert_relative_eq!(r.small, 0.0);
        assert_relative_eq!(r.medium, 1.6e11, max_relative = 1e-12);
        assert_relative_eq!(r.large, 1.6e11, max_relative = 1e-12);
        assert_relative_eq!(r.total(), 32e10, max_relative = 1e-6);
    }

    #[test]
    fn class_rates_linear_in_x() {
        let c = cfg();
        let d = FlowSizeDistribution::pareto(1e4, 1.1, Some(1e11)).unwrap();
        let one = class_rates(&d, 1.0, &c);
        for x in [0.0, 0.25, 0.5, 1.0] {
            let r = class_rates(&d, x, &c);
            assert_eq!(r.small, x * one.small);
            assert_eq!(r.medium, x * one.medium);
            assert_eq!(r.large, x * one.large);
        }
        assert_relative_eq!(one.total(), 32e10, max_relative = 1e-6);
    }

    #[test]
    fn variation_distance_examples() {
        assert_eq!(variation_distance(&[0.25; 4]).unwrap(), 0.0);
        assert_relative_eq!(variation_distance(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.75);
        assert_relative_eq!(variation_distance(&[0.5, 0.5, 0.0, 0.0]).unwrap(), 0.5);
        assert!(variation_distance(&[1.2, -0.2]).is_err());
        assert!(variation_distance(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn variation_distance_brute_force_grid() {
        // every distribution on a 0.05 grid for n <= 4
        fn rec(n: usize, left: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if acc.len() == n - 1 {
                acc.push(left);
                f(acc);
                acc.pop();
                return;
            }
            for v in 0..=left {
                acc.push(v);
                rec(n, left - v, acc, f);
                acc.pop();
            }
        }
        for n in 1..=4usize {
            let mut count = 0;
            rec(n, 20, &mut Vec::new(), &mut |units| {
                let p: Vec<f64> = units.iter().map(|&u| u as f64 * 0.05).collect();
                let d = variation_distance(&p).unwrap();
                // independent route: mass above the mean
                let above: f64 = p.iter().map(|&v| (v - 1.0 / n as f64).max(0.0)).sum();
                assert!((d - above).abs() < 1e-12);
                assert!(d >= -1e-15 && d <= 1.0 - 1.0 / n as f64 + 1e-12);
                count += 1;
            });
            assert!(count > 0);
        }
    }

    proptest! {
        #[test]
        fn variation_distance_bounds(raw in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-9);
            let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let d = variation_distance(&p).unwrap();
            let n = p.len() as f64;
            prop_assert!(d >= 0.0);
            prop_assert!(d <= 1.0 - 1.0 / n + 1e-12);
        }
    }

    #[test]
    fn phi_uniform_matrix_is_one() {
        let n = 8;
        let rows: Vec<Vec<u64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0 } else { 1000 }).collect())
            .collect();
        let m = DemandMatrix::from_rows(&rows, 1.0).unwrap();
        assert!((matrix_skewness(&m, &DestinationScope::AllOthers).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phi_point_mass_rows() {
        let n = 64;
        let rows: Vec<Vec<u64>> = (0..n)
            .map(|i| (0..n).map(|j| if j == (i + 1) % n { 5 } else { 0 }).collect())
            .collect();
        let m = DemandMatrix::from_rows(&rows, 1.0).unwrap();
        let phi = matrix_skewness(&m, &DestinationScope::AllOthers).unwrap();
        assert_relative_eq!(phi, 1.0 / (n as f64 - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn phi_active_scope_ignores_inactive() {
        // ToRs 0..3 active, uniform among themselves
        let n = 8;
        let active = vec![0, 1, 2];
        let rows: Vec<Vec<u64>> = (0..n)
            .map(|i| (0..n).map(|j| if i != j && i < 3 && j < 3 { 10 } else { 0 }).collect())
            .collect();
        let m = DemandMatrix::from_rows(&rows, 1.0).unwrap();
        assert!((matrix_skewness(&m, &DestinationScope::Active(active)).unwrap() - 1.0).abs() < 1e-12);
        // against all others the same rows look skewed
        assert!(matrix_skewness(&m, &DestinationScope::AllOthers).unwrap() < 0.5);
        assert!(matrix_skewness(&DemandMatrix::zeros(4, 1.0), &DestinationScope::AllOthers).is_err());
    }

    #[test]
    fn phi_per_class_filter() {
        let c = cfg().with_n(8).unwrap();
        let mix = FlowSizeDistribution::two_point_by_bytes(2_000_000, 2_000_000_000, 0.5).unwrap();
        let trace = generate(&TrafficSpec::uniform(0.5, mix, 4), &c).unwrap();
        let d = trace.demand(8);
        let phi_m = skewness_phi(&d, ClassFilter::Only(FlowClass::Medium), &DestinationScope::AllOthers).unwrap();
        let phi_l = skewness_phi(&d, ClassFilter::Only(FlowClass::Large), &DestinationScope::AllOthers).unwrap();
        // many small medium flows are close to uniform; few elephants are not
        assert!(phi_m > phi_l);
        assert!(phi_m > 0.9);
    }

    #[test]
    fn trace_csv_round_trip() {
        let c = cfg().with_n(8).unwrap();
        let spec = TrafficSpec::uniform(0.05, FlowSizeDistribution::log_uniform(1e5, 1e9).unwrap(), 8);
        let trace = generate(&spec, &c).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace.flows, &mut buf).unwrap();
        let back = read_trace_csv(buf.as_slice(), &c).unwrap();
        assert_eq!(back, trace.flows);
    }
}
