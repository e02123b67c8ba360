//! Closed-form demand completion times, thresholds, switch split and
//! throughput for expander-net, rotor-net and the hybrid design.
//!
//! The kernels are generic over [`Scalar`] so they can be evaluated in
//! floating point or exactly over rationals. The distribution-aware wrappers
//! work in `f64`.

use num_traits::Float;
use serde::Serialize;

use crate::distribution::FlowSizeDistribution;
use crate::error::{Error, Result};
use crate::model::{FlowClass, NetworkConfig};
use crate::scalar::Scalar;
use crate::traffic::{class_rates, ClassRates};

/// Link and switch timing: rate r, slot δ, R_r, R_c and |m|.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingParams<S> {
    pub rate: S,
    pub slot: S,
    pub rotor_reconfig: S,
    pub cache_reconfig: S,
    pub medium_threshold: S,
}

impl<S: Scalar> TimingParams<S> {
    /// δ + R_r
    pub fn rotor_period(&self) -> S {
        self.slot.clone() + self.rotor_reconfig.clone()
    }

    /// (R_r + δ) / δ
    pub fn rotor_stretch(&self) -> S {
        self.rotor_period() / self.slot.clone()
    }

    /// E[R_c/|f|] + 1/r given the byte-weighted mean of 1/|f| over large flows.
    pub fn cache_cost_per_bit(&self, large_reciprocal_mean: S) -> S {
        self.cache_reconfig.clone() * large_reciprocal_mean + S::one() / self.rate.clone()
    }

    /// Rotor time per bit sent through `k` switches at skewness φ:
    /// (2 − φ)(R_r + δ) / (|m| k).
    fn rotor_cost_per_bit(&self, phi: S) -> S {
        (S::int(2) - phi) * self.rotor_period() / self.medium_threshold.clone()
    }
}

/// DCT of expander-net under U(x): x · epl.
pub fn dct_expander<S: Scalar>(x: S, epl: S) -> S {
    x * epl
}

/// Lower bound on the DCT of rotor-net under U(x): x (2 − φ)(R_r + δ)/δ.
pub fn dct_rotor<S: Scalar>(x: S, phi: S, t: &TimingParams<S>) -> S {
    x * (S::int(2) - phi) * t.rotor_stretch()
}

/// DCT of `k` rotor switches for all-to-all demand of `total_bits_per_tor`:
/// (Ū / |m|) (R_r + δ) / k.
pub fn dct_all_to_all_rotor<S: Scalar>(total_bits_per_tor: S, k: usize, t: &TimingParams<S>) -> Result<S> {
    if k == 0 {
        return Err(Error::input("rotor DCT needs k >= 1"));
    }
    Ok(total_bits_per_tor / t.medium_threshold.clone() * t.rotor_period() / S::int(k as i64))
}

/// DCT of `k_r` rotor switches carrying `bits_per_tor` at skewness φ.
pub fn dct_rotor_component<S: Scalar>(bits_per_tor: S, phi: S, k_r: usize, t: &TimingParams<S>) -> Result<S> {
    if bits_per_tor.is_zero() {
        return Ok(S::zero());
    }
    if k_r == 0 {
        return Err(Error::input("rotor traffic present but k_r = 0"));
    }
    Ok(bits_per_tor * t.rotor_cost_per_bit(phi) / S::int(k_r as i64))
}

/// Smallest flow size that completes faster on a demand-aware switch than
/// on the rotor plane: R_c |m| r / ((2 − φ) r (R_r + δ) − |m|).
pub fn large_flow_threshold<S: Scalar>(phi: S, t: &TimingParams<S>) -> Result<S> {
    let denominator = (S::int(2) - phi) * t.rate.clone() * t.rotor_period() - t.medium_threshold.clone();
    if denominator <= S::zero() {
        return Err(Error::NoLargeThreshold {
            denominator: denominator.to_f64_lossy(),
        });
    }
    Ok(t.cache_reconfig.clone() * t.medium_threshold.clone() * t.rate.clone() / denominator)
}

/// Expected DCT of `k_c` demand-aware switches for `large_bits` per ToR:
/// (U_ℓ / k_c)(E[R_c/|f|] + 1/r), with `cost_per_bit` the bracket.
pub fn dct_cache_component<S: Scalar>(large_bits: S, k_c: usize, cost_per_bit: S) -> Result<S> {
    if large_bits.is_zero() {
        return Ok(S::zero());
    }
    if k_c == 0 {
        return Err(Error::input("large traffic present but k_c = 0"));
    }
    Ok(large_bits / S::int(k_c as i64) * cost_per_bit)
}

/// Worst-case cache DCT where every large flow has exactly the threshold
/// size: (U_ℓ / k_c)(R_c / |ℓ| + 1/r).
pub fn dct_cache_worst_case<S: Scalar>(
    large_bits: S,
    k_c: usize,
    large_threshold: S,
    t: &TimingParams<S>,
) -> Result<S> {
    let cost = t.cache_cost_per_bit(S::one() / large_threshold);
    dct_cache_component(large_bits, k_c, cost)
}

/// Fraction of a ToR's full-rate large traffic that `k_c` demand-aware
/// switches drain in one second: k_c / (U(1,ℓ)(E[R_c/|f|] + 1/r)).
pub fn cache_capacity_z<S: Scalar>(k_c: usize, large_rate_full: S, cost_per_bit: S) -> Result<S> {
    if k_c == 0 {
        return Ok(S::zero());
    }
    let denom = large_rate_full * cost_per_bit;
    if denom <= S::zero() {
        return Err(Error::NoClassMass("large"));
    }
    Ok(S::int(k_c as i64) / denom)
}

/// Fraction of large traffic that does not fit the cache at load L:
/// max((L − z)/L, 0).
pub fn spill_fraction<S: Scalar>(load: S, z: S) -> Result<S> {
    if load <= S::zero() {
        return Err(Error::input(format!("spill fraction needs L > 0, got {load:?}")));
    }
    let x = (load.clone() - z) / load;
    Ok(S::max_of(x, S::zero()))
}

/// Throughput of expander-net under S(x): min(1/(x epl), 1).
pub fn throughput_expander<S: Scalar>(x: S, epl: S) -> S {
    if x.is_zero() {
        return S::one();
    }
    S::min_of(S::one() / (x * epl), S::one())
}

/// Throughput of rotor-net under S(x): min(1/(x (2 − φx)(R_r + δ)/δ), 1).
pub fn throughput_rotor<S: Scalar>(x: S, phi: S, t: &TimingParams<S>) -> S {
    if x.is_zero() {
        return S::one();
    }
    let hops = S::int(2) - phi * x.clone();
    S::min_of(S::one() / (x * hops * t.rotor_stretch()), S::one())
}

/// Real-valued ratio k_c*/k_r* that equalizes the cache and rotor DCTs.
pub fn split_ratio<S: Scalar>(
    large_rate: S,
    medium_rate: S,
    cache_cost_per_bit: S,
    phi_m: S,
    t: &TimingParams<S>,
) -> S {
    (large_rate * cache_cost_per_bit) / (medium_rate * t.rotor_cost_per_bit(phi_m))
}

/// Which single-type or combined system a query concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Expander,
    Rotor,
    Hybrid,
}

/// Integer rotor/demand-aware split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Split {
    pub k_rotor: usize,
    pub k_cache: usize,
    /// k_c*/k_r* before rounding; `None` for degenerate (single-class) cases.
    pub ratio: Option<f64>,
}

/// Per-ToR traffic of each class plus the large-class cache cost.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ClassLoad {
    rates: ClassRates,
    cache_cost: Option<f64>,
}

fn class_load(dist: &FlowSizeDistribution, x: f64, config: &NetworkConfig) -> Result<ClassLoad> {
    let rates = class_rates(dist, x, config);
    let cache_cost = if dist.class_moments(FlowClass::Large, config).first > 0.0 {
        Some(config.timing().cache_cost_per_bit(dist.large_reciprocal_mean(config)?))
    } else {
        None
    };
    Ok(ClassLoad { rates, cache_cost })
}

/// Expected cache DCT for `large_bits` per ToR on `k_c` switches, using the
/// large-class reciprocal size moment of `dist`.
pub fn dct_cache(large_bits: f64, k_c: usize, dist: &FlowSizeDistribution, config: &NetworkConfig) -> Result<f64> {
    let recip = dist.large_reciprocal_mean(config)?;
    if large_bits > 0.0 && k_c == 0 {
        return Err(Error::input("large traffic present but k_c = 0"));
    }
    dct_cache_component(large_bits, k_c, config.timing().cache_cost_per_bit(recip))
}

/// Component DCTs of the hybrid for a given split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridDct {
    pub expander_s: f64,
    pub rotor_s: f64,
    pub cache_s: f64,
    pub split: Split,
}

impl HybridDct {
    /// The hybrid finishes when its slowest component does.
    pub fn total_s(&self) -> f64 {
        self.expander_s.max(self.rotor_s).max(self.cache_s)
    }

    pub fn max_rotor_cache(&self) -> f64 {
        self.rotor_s.max(self.cache_s)
    }
}

/// Evaluates the three hybrid components under U(x) for an explicit split.
/// `epl_static` is the expected path length of G(k_s).
pub fn hybrid_components(
    x: f64,
    dist: &FlowSizeDistribution,
    phi_m: f64,
    epl_static: f64,
    split: Split,
    config: &NetworkConfig,
) -> Result<HybridDct> {
    let t = config.timing();
    let load = class_load(dist, x, config)?;
    let expander_s = if load.rates.small > 0.0 {
        if config.k_static() == 0 {
            return Err(Error::input("small flows present but k_s = 0"));
        }
        load.rates.small * epl_static / (config.k_static() as f64 * t.rate)
    } else {
        0.0
    };
    let rotor_s = dct_rotor_component(load.rates.medium, phi_m, split.k_rotor, &t)?;
    let cache_s = match load.cache_cost {
        Some(cost) => dct_cache_component(load.rates.large, split.k_cache, cost)?,
        None => 0.0,
    };
    Ok(HybridDct {
        expander_s,
        rotor_s,
        cache_s,
        split,
    })
}

/// Optimal (k_r*, k_c*) for the k − k_s non-static switches: the real ratio
/// that equalizes rotor and cache DCTs, rounded to whichever neighbouring
/// integer split has the smaller max-component DCT (ties go to the rotor).
pub fn optimal_split(dist: &FlowSizeDistribution, x: f64, phi_m: f64, config: &NetworkConfig) -> Result<Split> {
    let total = config.k() - config.k_static();
    // the ratio does not depend on x; evaluate at full load if x = 0
    let x_eval = if x > 0.0 { x } else { 1.0 };
    let load = class_load(dist, x_eval, config)?;
    let has_medium = load.rates.medium > 0.0;
    let has_large = load.cache_cost.is_some() && load.rates.large > 0.0;
    match (has_medium, has_large) {
        (_, false) => {
            return Ok(Split {
                k_rotor: total,
                k_cache: 0,
                ratio: None,
            })
        }
        (false, true) => {
            return Ok(Split {
                k_rotor: 0,
                k_cache: total,
                ratio: None,
            })
        }
        (true, true) => {}
    }
    if total < 2 {
        return Err(Error::input(format!(
            "medium and large traffic need k - k_s >= 2, got {total}"
        )));
    }
    let t = config.timing();
    let cost = load.cache_cost.expect("checked above");
    let ratio = split_ratio(load.rates.large, load.rates.medium, cost, phi_m, &t);
    let k_cache_real = total as f64 * ratio / (1.0 + ratio);
    let lo = (k_cache_real.floor() as usize).clamp(1, total - 1);
    let hi = (k_cache_real.ceil() as usize).clamp(1, total - 1);
    let eval = |k_c: usize| -> Result<f64> {
        let rotor = dct_rotor_component(load.rates.medium, phi_m, total - k_c, &t)?;
        let cache = dct_cache_component(load.rates.large, k_c, cost)?;
        Ok(rotor.max(cache))
    };
    // ties toward more rotor switches, i.e. the smaller k_c
    let k_cache = if eval(hi)? < eval(lo)? { hi } else { lo };
    Ok(Split {
        k_rotor: total - k_cache,
        k_cache,
        ratio: Some(ratio),
    })
}

/// Hybrid DCT under U(x) at the optimal split: the max of the expander,
/// rotor and cache components.
pub fn dct_hybrid_uniform(
    x: f64,
    dist: &FlowSizeDistribution,
    phi_m: f64,
    epl_static: f64,
    config: &NetworkConfig,
) -> Result<HybridDct> {
    let split = optimal_split(dist, x, phi_m, config)?;
    hybrid_components(x, dist, phi_m, epl_static, split, config)
}

/// The hybrid slope coefficient α = U(x,ℓ)/k_c* (E[R_c/|f|] + 1/r),
/// evaluated at the given x.
pub fn hybrid_alpha(x: f64, dist: &FlowSizeDistribution, split: Split, config: &NetworkConfig) -> Result<f64> {
    let load = class_load(dist, x, config)?;
    match load.cache_cost {
        Some(cost) => dct_cache_component(load.rates.large, split.k_cache, cost),
        None => Ok(0.0),
    }
}

/// Upper bound x · α on the hybrid DCT, with α evaluated at the same x.
pub fn hybrid_upper_bound(x: f64, dist: &FlowSizeDistribution, split: Split, config: &NetworkConfig) -> Result<f64> {
    Ok(x * hybrid_alpha(x, dist, split, config)?)
}

/// Termination settings for the hybrid throughput solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            tolerance: 1e-6,
            max_iterations: 60,
        }
    }
}

/// Inputs to the hybrid skewed-traffic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSkewModel<F> {
    /// U(1,m) in bits/s per ToR.
    pub medium_rate_full: F,
    /// U(1,ℓ) in bits/s per ToR.
    pub large_rate_full: F,
    /// Cache capacity fraction z.
    pub z: F,
    pub k_rotor: usize,
}

/// Hybrid DCT under S_L(x): x L (U(1,m) + x* U(1,ℓ))/|m| (2 − φx)(R_r + δ)/k_r*.
pub fn dct_skewed_hybrid<F: Float + Scalar>(
    x: F,
    load: F,
    phi: F,
    model: &HybridSkewModel<F>,
    t: &TimingParams<F>,
) -> Result<F> {
    if x.is_zero() || load.is_zero() {
        return Ok(F::zero());
    }
    let spill = spill_fraction(load, model.z)?;
    let rotor_bits = x * load * (model.medium_rate_full + spill * model.large_rate_full);
    if rotor_bits.is_zero() {
        return Ok(F::zero());
    }
    if model.k_rotor == 0 {
        return Ok(F::infinity());
    }
    let hops = F::int(2) - phi * x;
    Ok(rotor_bits / t.medium_threshold * hops * t.rotor_period() / F::int(model.k_rotor as i64))
}

/// Rotor-net DCT under S_L(x): L x (2 − φx)(R_r + δ)/δ.
pub fn dct_skewed_rotor<S: Scalar>(x: S, load: S, phi: S, t: &TimingParams<S>) -> S {
    let hops = S::int(2) - phi * x.clone();
    load * x * hops * t.rotor_stretch()
}

/// Expander-net DCT under S_L(x): L x epl.
pub fn dct_skewed_expander<S: Scalar>(x: S, load: S, epl: S) -> S {
    load * x * epl
}

/// Largest L in (0, 1] with hybrid DCT(S_L(x)) ≤ 1, by bisection on L.
pub fn throughput_hybrid<F: Float + Scalar>(
    x: F,
    phi: F,
    model: &HybridSkewModel<F>,
    t: &TimingParams<F>,
    opts: BisectionOptions,
) -> Result<F> {
    if x.is_zero() {
        return Ok(F::one());
    }
    if model.k_rotor == 0 {
        if model.medium_rate_full > F::zero() {
            return Err(Error::input("medium traffic present but k_r = 0"));
        }
        // spill has nowhere to go: the cache alone bounds L
        return Ok(if model.large_rate_full > F::zero() {
            F::min_of(model.z, F::one())
        } else {
            F::one()
        });
    }
    let f = |l: F| dct_skewed_hybrid(x, l, phi, model, t);
    if f(F::one())? <= F::one() {
        return Ok(F::one());
    }
    let tol = F::from(opts.tolerance).expect("tolerance representable");
    let (mut lo, mut hi) = (F::zero(), F::one());
    let (mut f_lo, mut f_hi) = (F::zero(), f(F::one())?);
    let mut iterations = 0;
    while hi - lo > tol {
        if iterations >= opts.max_iterations {
            let mid = (lo + hi) / F::int(2);
            return Err(Error::NoConvergence {
                iterations,
                residual: (f(mid)? - F::one()).to_f64_lossy(),
            });
        }
        let mid = (lo + hi) / F::int(2);
        let f_mid = f(mid)?;
        if f_mid <= F::one() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        iterations += 1;
    }
    // final interpolation step inside the bracket; exact where f is linear
    let span = f_hi - f_lo;
    let l = if span > F::zero() {
        lo + (hi - lo) * (F::one() - f_lo) / span
    } else {
        lo
    };
    Ok(F::max_of(lo, F::min_of(l, hi)))
}

/// Path lengths the expander terms need: epl(G(k)) for expander-net and
/// epl(G(k_s)) for the hybrid's static part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathLengths {
    pub full: f64,
    pub static_part: f64,
}

/// Everything the closed forms say about one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsReport {
    pub x: f64,
    pub phi: f64,
    pub phi_m: f64,
    pub dct_expander_s: f64,
    pub dct_rotor_s: f64,
    pub dct_hybrid_s: f64,
    /// β = (2 − φ)(R_r + δ)/δ
    pub beta: f64,
    /// γ = epl(G(k))
    pub gamma: f64,
    /// α evaluated at x
    pub alpha: f64,
    pub k_r_star: usize,
    pub k_c_star: usize,
    pub large_threshold_bits: Option<f64>,
    pub z: f64,
    pub x_star: f64,
    pub l_star_expander: f64,
    pub l_star_rotor: f64,
    pub l_star_hybrid: f64,
}

/// Optional override of the optimal split (used by k_c sweeps).
pub fn analyze_point(
    x: f64,
    phi: f64,
    phi_m: f64,
    dist: &FlowSizeDistribution,
    epl: PathLengths,
    split_override: Option<Split>,
    config: &NetworkConfig,
) -> Result<AnalyticsReport> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::input(format!("x must lie in [0, 1], got {x}")));
    }
    if !(0.0..=1.0).contains(&phi) || !(0.0..=1.0).contains(&phi_m) {
        return Err(Error::input(format!("phi must lie in [0, 1], got {phi}, {phi_m}")));
    }
    let t = config.timing();
    let split = match split_override {
        Some(s) => s,
        None => optimal_split(dist, x, phi_m, config)?,
    };
    let hybrid = hybrid_components(x, dist, phi_m, epl.static_part, split, config)?;
    let alpha = hybrid_alpha(x, dist, split, config)?;

    let full = class_rates(dist, 1.0, config);
    let z = if full.large > 0.0 {
        let cost = t.cache_cost_per_bit(dist.large_reciprocal_mean(config)?);
        cache_capacity_z(split.k_cache, full.large, cost)?
    } else {
        0.0
    };
    let model = HybridSkewModel {
        medium_rate_full: full.medium,
        large_rate_full: full.large,
        z,
        k_rotor: split.k_rotor,
    };
    let l_star_hybrid = throughput_hybrid(x, phi, &model, &t, BisectionOptions::default())?;
    let x_star = if full.large > 0.0 {
        spill_fraction(l_star_hybrid, z)?
    } else {
        0.0
    };

    Ok(AnalyticsReport {
        x,
        phi,
        phi_m,
        dct_expander_s: dct_expander(x, epl.full),
        dct_rotor_s: dct_rotor(x, phi, &t),
        dct_hybrid_s: hybrid.total_s(),
        beta: (2.0 - phi) * t.rotor_stretch(),
        gamma: epl.full,
        alpha,
        k_r_star: split.k_rotor,
        k_c_star: split.k_cache,
        large_threshold_bits: large_flow_threshold(phi, &t).ok(),
        z,
        x_star,
        l_star_expander: throughput_expander(x, epl.full),
        l_star_rotor: throughput_rotor(x, phi, &t),
        l_star_hybrid,
    })
}

/// Throughput L*(x) of one system; for the hybrid φ is estimated once and
/// held fixed across candidate L.
pub fn throughput_star(
    system: System,
    x: f64,
    phi: f64,
    dist: &FlowSizeDistribution,
    epl: PathLengths,
    config: &NetworkConfig,
) -> Result<f64> {
    let t = config.timing();
    match system {
        System::Expander => Ok(throughput_expander(x, epl.full)),
        System::Rotor => Ok(throughput_rotor(x, phi, &t)),
        System::Hybrid => Ok(analyze_point(x, phi, phi, dist, epl, None, config)?.l_star_hybrid),
    }
}
