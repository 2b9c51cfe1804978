//! Time instants, clock-domain mappings and simulated imperfect clocks.
//!
//! Every sensor keeps time in its own domain. Instants are integer
//! nanoseconds so sub-microsecond assertions stay exact; mappings between
//! domains are affine (`offset` plus optional `skew`) and rounding happens
//! exactly once, half away from zero.

use std::fmt;
use std::ops::{Add, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nanosecond count used for offsets, periods and durations.
pub type Nanos = i64;

/// A point in time in some clock domain, in integer nanoseconds since the
/// domain's epoch.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeInstant(i64);

impl TimeInstant {
    pub const fn from_nanos(ns: i64) -> Self {
        TimeInstant(ns)
    }

    pub const fn nanos(self) -> i64 {
        self.0
    }

    /// Nearest-nanosecond instant for a time given in seconds.
    pub fn from_secs_f64(seconds: f64) -> Self {
        TimeInstant((seconds * 1e9).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn checked_add(self, ns: Nanos) -> Option<Self> {
        self.0.checked_add(ns).map(TimeInstant)
    }
}

impl fmt::Debug for TimeInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ns", self.0)
    }
}

impl Add<Nanos> for TimeInstant {
    type Output = TimeInstant;
    fn add(self, rhs: Nanos) -> TimeInstant {
        TimeInstant(self.0 + rhs)
    }
}

impl Sub<Nanos> for TimeInstant {
    type Output = TimeInstant;
    fn sub(self, rhs: Nanos) -> TimeInstant {
        TimeInstant(self.0 - rhs)
    }
}

impl Sub for TimeInstant {
    type Output = Nanos;
    fn sub(self, rhs: TimeInstant) -> Nanos {
        self.0 - rhs.0
    }
}

/// Affine relation between two clock domains:
/// `t_dst = t_src * (1 + skew) + offset`.
///
/// The offset is kept as fractional nanoseconds so that inverses compose to
/// the identity within 1 ns and estimated offsets keep their sub-sample
/// resolution; mapped instants are rounded once, half away from zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockMapping {
    pub offset_ns: f64,
    /// Rate deviation in seconds of drift per second of source time.
    pub skew: f64,
}

impl ClockMapping {
    pub fn new(offset_ns: f64, skew: f64) -> Self {
        ClockMapping { offset_ns, skew }
    }

    pub fn identity() -> Self {
        ClockMapping::new(0.0, 0.0)
    }

    pub fn from_offset(offset_ns: f64) -> Self {
        ClockMapping::new(offset_ns, 0.0)
    }

    /// Map an instant into the destination domain.
    pub fn map_instant(&self, t: TimeInstant) -> Result<TimeInstant> {
        // t*(1+skew) + offset == t + (t*skew + offset); the left term is an
        // integer, so the single rounding applies to the fractional part.
        let frac = (t.nanos() as f64).mul_add(self.skew, self.offset_ns);
        if !frac.is_finite() || frac.abs() >= i64::MAX as f64 {
            return Err(Error::Range(format!(
                "mapping {} ns with offset {} skew {} overflows",
                t.nanos(),
                self.offset_ns,
                self.skew
            )));
        }
        let shifted = (t.nanos() as i128) + (frac.round() as i128);
        i64::try_from(shifted)
            .map(TimeInstant::from_nanos)
            .map_err(|_| Error::Range(format!("mapped instant {shifted} exceeds i64 nanoseconds")))
    }

    /// Map without rounding; used where sub-nanosecond resolution matters.
    pub fn map_ns_f64(&self, t_ns: f64) -> f64 {
        t_ns.mul_add(self.skew, self.offset_ns) + t_ns
    }

    /// Inverse mapping. Requires `skew > -1`.
    pub fn invert(&self) -> Result<ClockMapping> {
        if self.skew <= -1.0 {
            return Err(Error::argument(format!(
                "skew {} must be greater than -1 to invert",
                self.skew
            )));
        }
        let rate = 1.0 + self.skew;
        Ok(ClockMapping::new(-self.offset_ns / rate, -self.skew / rate))
    }

    /// Composition `self ∘ inner`: apply `inner` first, then `self`.
    pub fn compose(&self, inner: &ClockMapping) -> ClockMapping {
        let skew = self.skew + inner.skew + self.skew * inner.skew;
        let offset = inner.offset_ns.mul_add(1.0 + self.skew, self.offset_ns);
        ClockMapping::new(offset, skew)
    }
}

/// Simulated imperfect clock: an affine error plus zero-mean Gaussian
/// timestamping jitter, deterministic for a fixed seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub offset_ns: i64,
    pub skew: f64,
    pub jitter_sd_ns: f64,
    pub seed: u64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            offset_ns: 0,
            skew: 0.0,
            jitter_sd_ns: 0.0,
            seed: 0,
        }
    }
}

impl ClockModel {
    /// The deterministic part of the model as a domain mapping
    /// (true time -> this clock's reading).
    pub fn mapping(&self) -> ClockMapping {
        ClockMapping::new(self.offset_ns as f64, self.skew)
    }

    /// Timestamp a strictly increasing list of true instants.
    ///
    /// With zero jitter and zero skew the output equals the input shifted by
    /// `offset_ns` exactly.
    pub fn sample(&self, true_times: &[TimeInstant]) -> Result<Vec<TimeInstant>> {
        for pair in true_times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::argument(
                    "true_times must be strictly increasing".to_string(),
                ));
            }
        }
        let mapping = self.mapping();
        if self.jitter_sd_ns == 0.0 {
            return true_times.iter().map(|&t| mapping.map_instant(t)).collect();
        }
        let normal = Normal::new(0.0, self.jitter_sd_ns)
            .map_err(|e| Error::argument(format!("bad jitter sd: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        true_times
            .iter()
            .map(|&t| {
                let jitter = normal.sample(&mut rng);
                let frac = (t.nanos() as f64).mul_add(self.skew, self.offset_ns as f64) + jitter;
                if !frac.is_finite() || frac.abs() >= i64::MAX as f64 {
                    return Err(Error::Range("jittered timestamp overflows".to_string()));
                }
                let shifted = (t.nanos() as i128) + (frac.round() as i128);
                i64::try_from(shifted)
                    .map(TimeInstant::from_nanos)
                    .map_err(|_| Error::Range("jittered timestamp overflows".to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const SEC: i64 = 1_000_000_000;

    #[test]
    fn pure_translation() {
        let m = ClockMapping::from_offset(250_000.0);
        let out = m.map_instant(TimeInstant::from_nanos(0)).unwrap();
        assert_eq!(out.nanos(), 250_000);
    }

    #[test]
    fn opposite_offsets_cancel() {
        let fwd = ClockMapping::from_offset(1_234_567.0);
        let back = ClockMapping::from_offset(-1_234_567.0);
        for t in [-5 * SEC, -1, 0, 17, 3 * SEC] {
            let t = TimeInstant::from_nanos(t);
            assert_eq!(back.map_instant(fwd.map_instant(t).unwrap()).unwrap(), t);
        }
    }

    #[test]
    fn skew_accumulates_linearly() {
        // 1 ppm over 60 s adds 60 us
        let m = ClockMapping::new(0.0, 1.0e-6);
        let out = m.map_instant(TimeInstant::from_nanos(60 * SEC)).unwrap();
        assert_eq!(out.nanos(), 60 * SEC + 60_000);
    }

    #[test]
    fn invert_of_pure_offset_flips_sign() {
        let m = ClockMapping::from_offset(99.0).invert().unwrap();
        assert_eq!(m.offset_ns, -99.0);
        assert_eq!(m.skew, 0.0);
        let id = ClockMapping::identity().invert().unwrap();
        assert_eq!(id, ClockMapping::identity());
    }

    #[test]
    fn invert_round_trip_within_1ns() {
        let m = ClockMapping::new(1.0e6, 1.0e-6);
        let inv = m.invert().unwrap();
        // grid out to +/-100 s per the skewed example, then the full
        // +/-1000 s contract range
        for &t in &[-1000 * SEC, -100 * SEC, -7, 0, 13, 100 * SEC, 1000 * SEC] {
            let t = TimeInstant::from_nanos(t);
            let round = inv.map_instant(m.map_instant(t).unwrap()).unwrap();
            assert!((round - t).abs() <= 1, "round trip error {} ns", round - t);
        }
    }

    #[test]
    fn invert_rejects_degenerate_skew() {
        assert!(ClockMapping::new(0.0, -1.0).invert().is_err());
    }

    #[test]
    fn compose_identity_and_offsets() {
        let m = ClockMapping::new(42.0, 3.0e-7);
        assert_eq!(ClockMapping::identity().compose(&m), m);
        assert_eq!(m.compose(&ClockMapping::identity()), m);
        let sum = ClockMapping::from_offset(10.0).compose(&ClockMapping::from_offset(32.0));
        assert_eq!(sum.offset_ns, 42.0);
        assert_eq!(sum.skew, 0.0);
    }

    #[test]
    fn compose_matches_pointwise_application() {
        let a = ClockMapping::new(5_000.0, 1.0e-6);
        let b = ClockMapping::new(-2_500.0, 2.0e-6);
        let ab = a.compose(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let t = TimeInstant::from_nanos(rng.random_range(-1000 * SEC..1000 * SEC));
            let chained = a.map_instant(b.map_instant(t).unwrap()).unwrap();
            let direct = ab.map_instant(t).unwrap();
            assert!((chained - direct).abs() <= 1, "{} ns apart", chained - direct);
        }
    }

    #[test]
    fn map_overflow_is_reported() {
        let m = ClockMapping::from_offset(1.0e18);
        assert!(m.map_instant(TimeInstant::from_nanos(i64::MAX - 5)).is_err());
    }

    #[test]
    fn clean_clock_is_exact() {
        let model = ClockModel {
            offset_ns: 5_000,
            ..ClockModel::default()
        };
        let input: Vec<_> = (0..10).map(|i| TimeInstant::from_nanos(i * 1_000)).collect();
        let out = model.sample(&input).unwrap();
        for (o, i) in out.iter().zip(&input) {
            assert_eq!(*o - *i, 5_000);
        }

        let identity = ClockModel::default();
        assert_eq!(identity.sample(&input).unwrap(), input);
    }

    #[test]
    fn sample_rejects_non_monotonic_input() {
        let model = ClockModel::default();
        let ts = vec![TimeInstant::from_nanos(5), TimeInstant::from_nanos(5)];
        assert!(model.sample(&ts).is_err());
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let model = ClockModel {
            jitter_sd_ns: 20_000.0,
            seed: 99,
            ..ClockModel::default()
        };
        let input: Vec<_> = (0..1000)
            .map(|i| TimeInstant::from_nanos(i * 2_000_000))
            .collect();
        assert_eq!(model.sample(&input).unwrap(), model.sample(&input).unwrap());
        let other = ClockModel { seed: 100, ..model.clone() };
        assert_ne!(other.sample(&input).unwrap(), model.sample(&input).unwrap());
    }

    #[test]
    fn jitter_sd_matches_request() {
        let sd = 20_000.0;
        let model = ClockModel {
            jitter_sd_ns: sd,
            seed: 1,
            ..ClockModel::default()
        };
        let n = 100_000usize;
        let input: Vec<_> = (0..n as i64)
            .map(|i| TimeInstant::from_nanos(i * 2_000_000))
            .collect();
        let out = model.sample(&input).unwrap();
        let residuals: Vec<f64> = out
            .iter()
            .zip(&input)
            .map(|(o, i)| (*o - *i) as f64)
            .collect();
        let mean = residuals.iter().sum::<f64>() / n as f64;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
        let measured = var.sqrt();
        assert!(
            (measured - sd).abs() < 0.05 * sd,
            "sample sd {measured} not within 5% of {sd}"
        );
    }
}
