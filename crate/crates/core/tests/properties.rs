//! Property tests over the closed forms and the simulator.

use proptest::prelude::*;
use tmt_core::analytics::{
    dct_cache_component, dct_expander, dct_rotor, dct_rotor_component, dct_skewed_hybrid, hybrid_components,
    large_flow_threshold, optimal_split, throughput_expander, throughput_hybrid, throughput_rotor, BisectionOptions,
    HybridSkewModel, Split,
};
use tmt_core::distribution::FlowSizeDistribution;
use tmt_core::error::Error;
use tmt_core::model::{NetworkConfig, NetworkSpec};
use tmt_core::simulator::{simulate, ArrivalMode, SimOptions};
use tmt_core::traffic::{generate, TrafficSpec};

fn numeric() -> NetworkConfig {
    NetworkSpec::paper_numeric().validate().unwrap()
}

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn mixture() -> impl Strategy<Value = FlowSizeDistribution> {
    (
        0.01f64..0.99,
        1_000_000u64..100_000_000,
        1_000_000_000u64..20_000_000_000,
    )
        .prop_map(|(share, m, l)| FlowSizeDistribution::two_point_by_bytes(m, l, share).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dcts_nonnegative_zero_at_origin_and_monotone(x1 in unit(), x2 in unit(), phi in unit(), epl in 1.0f64..4.0) {
        let t = numeric().timing();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert_eq!(dct_rotor(0.0, phi, &t), 0.0);
        prop_assert_eq!(dct_expander(0.0, epl), 0.0);
        prop_assert!(dct_rotor(lo, phi, &t) >= 0.0);
        prop_assert!(dct_rotor(lo, phi, &t) <= dct_rotor(hi, phi, &t));
        prop_assert!(dct_expander(lo, epl) <= dct_expander(hi, epl));
        let bits = 1e11;
        prop_assert!(dct_rotor_component(lo * bits, phi, 16, &t).unwrap() <= dct_rotor_component(hi * bits, phi, 16, &t).unwrap());
        prop_assert!(dct_cache_component(lo * bits, 16, 1e-10).unwrap() <= dct_cache_component(hi * bits, 16, 1e-10).unwrap());
    }

    #[test]
    fn rotor_dct_falls_and_threshold_rises_with_phi(x in unit(), p1 in unit(), p2 in unit()) {
        let t = numeric().timing();
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        prop_assert!(dct_rotor(x, hi, &t) <= dct_rotor(x, lo, &t));
        let a = large_flow_threshold(lo, &t).unwrap();
        let b = large_flow_threshold(hi, &t).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-12));
    }

    #[test]
    fn single_type_throughput_is_proportional(phi in unit(), epl in 1.0f64..4.0, x1 in unit(), x2 in unit()) {
        let t = numeric().timing();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        let rotor = |x: f64| throughput_rotor(x, phi, &t);
        let expander = |x: f64| throughput_expander(x, epl);
        prop_assert!(rotor(hi) <= rotor(lo));
        prop_assert!(expander(hi) <= expander(lo));
        // L* = 1 on an initial interval
        prop_assert_eq!(rotor(1e-3), 1.0);
        prop_assert_eq!(expander(1e-3), 1.0);
        prop_assert!(rotor(lo) > 0.0 && rotor(lo) <= 1.0);
    }

    #[test]
    fn hybrid_bisection_meets_tolerance(
        x in 0.01f64..=1.0,
        phi in unit(),
        dist in mixture(),
        k_c in 1usize..31,
    ) {
        let cfg = numeric();
        let t = cfg.timing();
        let full = tmt_core::traffic::class_rates(&dist, 1.0, &cfg);
        let cost = t.cache_cost_per_bit(dist.large_reciprocal_mean(&cfg).unwrap());
        let model = HybridSkewModel {
            medium_rate_full: full.medium,
            large_rate_full: full.large,
            z: (k_c as f64 / (full.large * cost)).min(1.0),
            k_rotor: 32 - k_c,
        };
        let l = throughput_hybrid(x, phi, &model, &t, BisectionOptions::default()).unwrap();
        prop_assert!(l > 0.0 && l <= 1.0);
        let dct = dct_skewed_hybrid(x, l, phi, &model, &t).unwrap();
        if l < 1.0 {
            prop_assert!((dct - 1.0).abs() <= 1e-5, "L = {l}, DCT = {dct}");
        } else {
            prop_assert!(dct <= 1.0 + 1e-9);
        }
        let smaller = throughput_hybrid((x * 0.5).max(1e-3), phi, &model, &t, BisectionOptions::default()).unwrap();
        prop_assert!(smaller >= l - 1e-6);
    }

    #[test]
    fn optimal_split_is_locally_optimal(x in 0.05f64..=1.0, phi_m in unit(), dist in mixture()) {
        let cfg = numeric();
        let split = optimal_split(&dist, x, phi_m, &cfg).unwrap();
        prop_assert_eq!(split.k_rotor + split.k_cache, 32);
        let cost = |k_c: usize| {
            let s = Split { k_rotor: 32 - k_c, k_cache: k_c, ratio: None };
            hybrid_components(x, &dist, phi_m, 3.0, s, &cfg).unwrap().max_rotor_cache()
        };
        let here = cost(split.k_cache);
        if split.k_cache > 1 {
            prop_assert!(here <= cost(split.k_cache - 1) * (1.0 + 1e-12));
        }
        if split.k_cache < 31 {
            prop_assert!(here <= cost(split.k_cache + 1) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulator_conserves_and_respects_capacity(
        seed in 0u64..1_000,
        x in 0.05f64..0.6,
        k in (0usize..4, 1usize..4, 1usize..3),
        online in any::<bool>(),
    ) {
        let cfg = numeric().with_n(12).unwrap().with_switches(k.0, k.1, k.2).unwrap();
        let dist = FlowSizeDistribution::empirical(vec![(200_000, 0.85), (3_000_000, 0.14), (1_500_000_000, 0.01)]).unwrap();
        let spec = TrafficSpec { window_s: 0.05, ..TrafficSpec::uniform(x, dist, seed) };
        let trace = generate(&spec, &cfg).unwrap();
        let opts = SimOptions {
            audit: true,
            arrival: if online { ArrivalMode::Online } else { ArrivalMode::Batch },
            seed,
            expander_seed: seed,
            ..SimOptions::default()
        };
        let r = match simulate(&trace.flows, &cfg, &opts) {
            // a sparse random expander may split; that is reported, not simulated
            Err(Error::Disconnected { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(r.completed);
        let audit = r.audit.clone().unwrap();
        prop_assert_eq!(audit.conservation_violations, 0);
        prop_assert_eq!(audit.cache_reconfig_violations, 0);
        prop_assert!(audit.max_rotor_link_bits <= audit.rotor_slot_capacity_bits);
        prop_assert!(audit.max_expander_link_load <= 1.0 + 1e-9);
        let delivered: u64 = r.planes.iter().map(|p| p.bits).sum();
        prop_assert_eq!(delivered, trace.total_bits());
        let biggest = trace.flows.iter().map(|f| f.size_bits).max().unwrap_or(0) as f64;
        prop_assert!(r.dct_s >= biggest / (cfg.k() as f64 * cfg.rate_bps()) - 1e-12);
        // replay is identical
        prop_assert_eq!(simulate(&trace.flows, &cfg, &opts).unwrap(), r);
    }
}
