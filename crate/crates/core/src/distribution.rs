//! Flow-size distributions with closed-form class-conditional moments.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FlowClass, NetworkConfig};

const PROB_TOLERANCE: f64 = 1e-9;

/// Distribution 𝒟 over flow sizes in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FlowSizeDistribution {
    /// Discrete histogram of `(size_bits, probability)` points.
    EmpiricalHistogram { points: Vec<(u64, f64)> },
    /// Two sizes; `p_large` is the flow-count probability of `large_bits`.
    TwoPointMixture {
        small_bits: u64,
        large_bits: u64,
        p_large: f64,
    },
    /// Density ∝ 1/s on `[min_bits, max_bits]`.
    LogUniform { min_bits: f64, max_bits: f64 },
    /// Pareto with scale `scale_bits` and tail index `shape`, optionally
    /// truncated at `cap_bits`.
    Pareto {
        scale_bits: f64,
        shape: f64,
        cap_bits: Option<f64>,
    },
}

/// Moments of the restriction of a distribution to a size interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartialMoments {
    /// P(S ∈ I)
    pub prob: f64,
    /// E[S · 1{S ∈ I}]
    pub first: f64,
    /// E[1/S · 1{S ∈ I}]
    pub reciprocal: f64,
}

impl FlowSizeDistribution {
    pub fn empirical(points: Vec<(u64, f64)>) -> Result<Self> {
        let d = FlowSizeDistribution::EmpiricalHistogram { points };
        d.validate()?;
        Ok(d.normalized())
    }

    /// Single size with probability one.
    pub fn point(size_bits: u64) -> Result<Self> {
        Self::empirical(vec![(size_bits, 1.0)])
    }

    pub fn two_point(small_bits: u64, large_bits: u64, p_large: f64) -> Result<Self> {
        let d = FlowSizeDistribution::TwoPointMixture {
            small_bits,
            large_bits,
            p_large,
        };
        d.validate()?;
        Ok(d)
    }

    /// Two-point mixture parameterized by the share of *bytes* carried by
    /// the larger size.
    pub fn two_point_by_bytes(small_bits: u64, large_bits: u64, large_byte_share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&large_byte_share) {
            return Err(Error::input(format!(
                "byte share must lie in [0, 1], got {large_byte_share}"
            )));
        }
        // p·L / (p·L + (1-p)·S) = b  =>  p = b·S / (b·S + (1-b)·L)
        let s = small_bits as f64;
        let l = large_bits as f64;
        let b = large_byte_share;
        let p = b * s / (b * s + (1.0 - b) * l);
        Self::two_point(small_bits, large_bits, p)
    }

    pub fn log_uniform(min_bits: f64, max_bits: f64) -> Result<Self> {
        let d = FlowSizeDistribution::LogUniform { min_bits, max_bits };
        d.validate()?;
        Ok(d)
    }

    pub fn pareto(scale_bits: f64, shape: f64, cap_bits: Option<f64>) -> Result<Self> {
        let d = FlowSizeDistribution::Pareto {
            scale_bits,
            shape,
            cap_bits,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FlowSizeDistribution::EmpiricalHistogram { points } => {
                if points.is_empty() {
                    return Err(Error::input("empirical histogram has no points"));
                }
                let mut total = 0.0;
                for &(size, p) in points {
                    if size == 0 {
                        return Err(Error::input("flow sizes must be positive"));
                    }
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Error::input(format!("invalid probability {p}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    return Err(Error::input(format!("probabilities sum to {total}, expected 1")));
                }
            }
            FlowSizeDistribution::TwoPointMixture {
                small_bits,
                large_bits,
                p_large,
            } => {
                if *small_bits == 0 || *large_bits == 0 {
                    return Err(Error::input("flow sizes must be positive"));
                }
                if !(0.0..=1.0).contains(p_large) {
                    return Err(Error::input(format!("p_large must lie in [0, 1], got {p_large}")));
                }
            }
            FlowSizeDistribution::LogUniform { min_bits, max_bits } => {
                if !(min_bits.is_finite() && *min_bits >= 1.0 && max_bits > min_bits && max_bits.is_finite()) {
                    return Err(Error::input(format!(
                        "log-uniform needs 1 <= min < max, got [{min_bits}, {max_bits}]"
                    )));
                }
            }
            FlowSizeDistribution::Pareto {
                scale_bits,
                shape,
                cap_bits,
            } => {
                if !(scale_bits.is_finite() && *scale_bits >= 1.0) {
                    return Err(Error::input(format!("pareto scale must be >= 1 bit, got {scale_bits}")));
                }
                if !(shape.is_finite() && *shape > 0.0) {
                    return Err(Error::input(format!("pareto shape must be positive, got {shape}")));
                }
                match cap_bits {
                    Some(cap) if !(cap.is_finite() && cap > scale_bits) => {
                        return Err(Error::input(format!("pareto cap {cap} must exceed scale")));
                    }
                    None if *shape <= 1.0 => {
                        return Err(Error::input("untruncated pareto needs shape > 1 (finite mean)"));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn normalized(self) -> Self {
        match self {
            FlowSizeDistribution::EmpiricalHistogram { mut points } => {
                points.retain(|&(_, p)| p > 0.0);
                // masses are kept as given (already within tolerance of 1) so
                // that re-parsing a written histogram reproduces it exactly
                points.sort_by_key(|&(s, _)| s);
                FlowSizeDistribution::EmpiricalHistogram { points }
            }
            other => other,
        }
    }

    /// Smallest and largest size with positive probability (density).
    pub fn support(&self) -> (f64, f64) {
        match self {
            FlowSizeDistribution::EmpiricalHistogram { points } => {
                let lo = points.iter().map(|p| p.0).min().unwrap_or(0);
                let hi = points.iter().map(|p| p.0).max().unwrap_or(0);
                (lo as f64, hi as f64)
            }
            FlowSizeDistribution::TwoPointMixture {
                small_bits,
                large_bits,
                p_large,
            } => {
                let (a, b) = (*small_bits as f64, *large_bits as f64);
                if *p_large == 0.0 {
                    (a, a)
                } else if *p_large == 1.0 {
                    (b, b)
                } else {
                    (a.min(b), a.max(b))
                }
            }
            FlowSizeDistribution::LogUniform { min_bits, max_bits } => (*min_bits, *max_bits),
            FlowSizeDistribution::Pareto {
                scale_bits, cap_bits, ..
            } => (*scale_bits, cap_bits.unwrap_or(f64::INFINITY)),
        }
    }

    /// Moments restricted to sizes in `[lo, hi)`.
    pub fn partial(&self, lo: f64, hi: f64) -> PartialMoments {
        match self {
            FlowSizeDistribution::EmpiricalHistogram { points } => discrete_partial(points.iter().copied(), lo, hi),
            FlowSizeDistribution::TwoPointMixture {
                small_bits,
                large_bits,
                p_large,
            } => discrete_partial([(*small_bits, 1.0 - p_large), (*large_bits, *p_large)], lo, hi),
            FlowSizeDistribution::LogUniform { min_bits, max_bits } => {
                let a = lo.max(*min_bits);
                let b = hi.min(*max_bits);
                if b <= a {
                    return PartialMoments::default();
                }
                let norm = (max_bits / min_bits).ln();
                PartialMoments {
                    prob: (b / a).ln() / norm,
                    first: (b - a) / norm,
                    reciprocal: (1.0 / a - 1.0 / b) / norm,
                }
            }
            FlowSizeDistribution::Pareto {
                scale_bits,
                shape,
                cap_bits,
            } => {
                let xm = *scale_bits;
                let alpha = *shape;
                let cap = cap_bits.unwrap_or(f64::INFINITY);
                let a = lo.max(xm);
                let b = hi.min(cap);
                if b <= a {
                    return PartialMoments::default();
                }
                // untruncated mass on [xm, cap]
                let norm = 1.0 - (xm / cap).powf(alpha);
                let c = alpha * xm.powf(alpha);
                let prob = (xm / a).powf(alpha) - (xm / b).powf(alpha);
                let first = if (alpha - 1.0).abs() < 1e-12 {
                    c * (b / a).ln()
                } else {
                    c * (a.powf(1.0 - alpha) - b.powf(1.0 - alpha)) / (alpha - 1.0)
                };
                let reciprocal = c * (a.powf(-alpha - 1.0) - b.powf(-alpha - 1.0)) / (alpha + 1.0);
                PartialMoments {
                    prob: prob / norm,
                    first: first / norm,
                    reciprocal: reciprocal / norm,
                }
            }
        }
    }

    /// E[S] in bits.
    pub fn mean(&self) -> f64 {
        self.partial(0.0, f64::INFINITY).first
    }

    /// Moments of one flow class under the thresholds of `config`.
    pub fn class_moments(&self, class: FlowClass, config: &NetworkConfig) -> PartialMoments {
        let (lo, hi) = class_interval(class, config);
        self.partial(lo, hi)
    }

    /// Fraction of bytes carried by flows of `class`.
    pub fn byte_share(&self, class: FlowClass, config: &NetworkConfig) -> f64 {
        self.class_moments(class, config).first / self.mean()
    }

    /// Byte-weighted mean of 1/|f| over the large class, i.e. the number of
    /// large flows per large bit. Equals 1 / E[|f| | large].
    pub fn large_reciprocal_mean(&self, config: &NetworkConfig) -> Result<f64> {
        let m = self.class_moments(FlowClass::Large, config);
        if m.first <= 0.0 {
            return Err(Error::NoClassMass("large"));
        }
        Ok(m.prob / m.first)
    }

    /// Flow-count-weighted E[1/|f| | large]; the worst-case diagnostics use it.
    pub fn large_reciprocal_mean_by_count(&self, config: &NetworkConfig) -> Result<f64> {
        let m = self.class_moments(FlowClass::Large, config);
        if m.prob <= 0.0 {
            return Err(Error::NoClassMass("large"));
        }
        Ok(m.reciprocal / m.prob)
    }

    /// Draws one flow size, at least one bit.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let bits = match self {
            FlowSizeDistribution::EmpiricalHistogram { points } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = points[points.len() - 1].0;
                for &(size, p) in points {
                    acc += p;
                    if u < acc {
                        chosen = size;
                        break;
                    }
                }
                return chosen;
            }
            FlowSizeDistribution::TwoPointMixture {
                small_bits,
                large_bits,
                p_large,
            } => {
                return if rng.random::<f64>() < *p_large {
                    *large_bits
                } else {
                    *small_bits
                };
            }
            FlowSizeDistribution::LogUniform { min_bits, max_bits } => {
                let u: f64 = rng.random();
                min_bits * (max_bits / min_bits).powf(u)
            }
            FlowSizeDistribution::Pareto {
                scale_bits,
                shape,
                cap_bits,
            } => {
                let u: f64 = rng.random();
                let tail = match cap_bits {
                    Some(cap) => 1.0 - (scale_bits / cap).powf(*shape),
                    None => 1.0,
                };
                // inverse CDF of the (truncated) Pareto
                scale_bits / (1.0 - u * tail).powf(1.0 / shape)
            }
        };
        (bits.round() as u64).max(1)
    }

    /// Reads an empirical histogram from CSV with header `size_bits,probability`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "size_bits" || &headers[1] != "probability" {
            return Err(Error::Parse {
                line: 1,
                reason: format!(
                    "expected header `size_bits,probability`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let size: u64 = rec[0].parse().map_err(|e| Error::Parse {
                line,
                reason: format!("size_bits: {e}"),
            })?;
            let p: f64 = rec[1].parse().map_err(|e| Error::Parse {
                line,
                reason: format!("probability: {e}"),
            })?;
            points.push((size, p));
        }
        Self::empirical(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }
}

fn discrete_partial(points: impl IntoIterator<Item = (u64, f64)>, lo: f64, hi: f64) -> PartialMoments {
    let mut m = PartialMoments::default();
    for (size, p) in points {
        let s = size as f64;
        if s >= lo && s < hi && p > 0.0 {
            m.prob += p;
            m.first += p * s;
            m.reciprocal += p / s;
        }
    }
    m
}

pub(crate) fn class_interval(class: FlowClass, config: &NetworkConfig) -> (f64, f64) {
    match class {
        FlowClass::Small => (0.0, config.medium_threshold_bits()),
        FlowClass::Medium => (config.medium_threshold_bits(), config.large_threshold_bits()),
        FlowClass::Large => (config.large_threshold_bits(), f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSpec;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetworkConfig {
        NetworkSpec::paper_numeric().validate().unwrap()
    }

    /// Numerical integration of a density over [a, b) with log-spaced
    /// midpoints; independent of the closed forms.
    fn quad(density: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let steps = 200_000;
        let (la, lb) = (a.ln(), b.ln());
        let h = (lb - la) / steps as f64;
        (0..steps)
            .map(|i| {
                let u = la + (i as f64 + 0.5) * h;
                let s = u.exp();
                density(s) * g(s) * s * h
            })
            .sum()
    }

    #[test]
    fn empirical_rejects_bad_mass() {
        assert!(FlowSizeDistribution::empirical(vec![(10, 0.5), (20, 0.4)]).is_err());
        assert!(FlowSizeDistribution::empirical(vec![(0, 1.0)]).is_err());
        assert!(FlowSizeDistribution::empirical(vec![(10, 1.1), (20, -0.1)]).is_err());
        assert!(FlowSizeDistribution::empirical(vec![]).is_err());
    }

    #[test]
    fn two_point_by_bytes_hits_share() {
        let c = cfg();
        let d = FlowSizeDistribution::two_point_by_bytes(1_000_000, 1_000_000_000, 0.5).unwrap();
        assert_relative_eq!(d.byte_share(FlowClass::Medium, &c), 0.5, max_relative = 1e-12);
        assert_relative_eq!(d.byte_share(FlowClass::Large, &c), 0.5, max_relative = 1e-12);
        assert_relative_eq!(d.byte_share(FlowClass::Small, &c), 0.0);
    }

    #[test]
    fn log_uniform_moments_match_quadrature() {
        let (a, b) = (1e5, 1e10);
        let d = FlowSizeDistribution::log_uniform(a, b).unwrap();
        let dens = |s: f64| 1.0 / (s * (b / a).ln());
        let (lo, hi) = (1e6, 1e9);
        let m = d.partial(lo, hi);
        assert_relative_eq!(m.prob, quad(dens, |_| 1.0, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(m.first, quad(dens, |s| s, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(m.reciprocal, quad(dens, |s| 1.0 / s, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(d.partial(0.0, f64::INFINITY).prob, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pareto_moments_match_quadrature() {
        let (xm, alpha, cap) = (1e4, 1.2, 1e10);
        let d = FlowSizeDistribution::pareto(xm, alpha, Some(cap)).unwrap();
        let norm = 1.0 - (xm / cap).powf(alpha);
        let dens = |s: f64| alpha * xm.powf(alpha) / s.powf(alpha + 1.0) / norm;
        let (lo, hi) = (1e6, 1e9);
        let m = d.partial(lo, hi);
        assert_relative_eq!(m.prob, quad(dens, |_| 1.0, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(m.first, quad(dens, |s| s, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(m.reciprocal, quad(dens, |s| 1.0 / s, lo, hi), max_relative = 1e-6);
        assert_relative_eq!(d.partial(0.0, f64::INFINITY).prob, 1.0, max_relative = 1e-12);
        assert!(FlowSizeDistribution::pareto(xm, 0.9, None).is_err());
    }

    #[test]
    fn sample_mean_tracks_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [
            FlowSizeDistribution::log_uniform(1e3, 1e7).unwrap(),
            FlowSizeDistribution::pareto(1e4, 1.5, Some(1e8)).unwrap(),
            FlowSizeDistribution::empirical(vec![(100, 0.25), (1000, 0.75)]).unwrap(),
        ] {
            let n = 200_000;
            let mean: f64 = (0..n).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / n as f64;
            assert_relative_eq!(mean, d.mean(), max_relative = 0.03);
        }
    }

    #[test]
    fn large_reciprocal_means() {
        let c = cfg();
        let d = FlowSizeDistribution::empirical(vec![(2_000_000, 0.5), (1_000_000_000, 0.25), (4_000_000_000, 0.25)])
            .unwrap();
        // byte-weighted: P(large)/E[S·1_large] = 0.5 / (0.25e9 + 1e9)
        assert_relative_eq!(d.large_reciprocal_mean(&c).unwrap(), 0.5 / 1.25e9, max_relative = 1e-12);
        // count-weighted: (0.25/1e9 + 0.25/4e9)/0.5
        assert_relative_eq!(
            d.large_reciprocal_mean_by_count(&c).unwrap(),
            (0.25 / 1e9 + 0.25 / 4e9) / 0.5,
            max_relative = 1e-12
        );
        let none = FlowSizeDistribution::point(2_000_000).unwrap();
        assert_eq!(none.large_reciprocal_mean(&c), Err(Error::NoClassMass("large")));
    }

    #[test]
    fn csv_histogram_parses() {
        let text = "size_bits,probability\n1000,0.25\n2000,0.75\n";
        let d = FlowSizeDistribution::from_csv_reader(text.as_bytes()).unwrap();
        assert_relative_eq!(d.mean(), 1750.0);
        let bad = "size,prob\n1,1\n";
        assert!(FlowSizeDistribution::from_csv_reader(bad.as_bytes()).is_err());
        let bad_mass = "size_bits,probability\n1000,0.5\n";
        assert!(FlowSizeDistribution::from_csv_reader(bad_mass.as_bytes()).is_err());
    }
}
