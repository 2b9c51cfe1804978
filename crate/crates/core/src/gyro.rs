//! Data-driven clock-offset estimation between two IMU-bearing devices that
//! rigidly share a rotation event.
//!
//! Angular-velocity magnitudes are correlated, not per-axis signals, so the
//! estimator is independent of the unknown mutual mounting orientation of
//! the two IMUs.

use serde::{Deserialize, Serialize};

use crate::clock::TimeInstant;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::{cross_correlation_lag, refine_peak, resample_uniform, Series};

/// Timestamped 3-axis angular velocity (rad/s), optionally with
/// acceleration (m/s^2), all in the device's own clock domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ImuSequence<F> {
    pub timestamps: Vec<TimeInstant>,
    pub angular_velocity: Vec<[F; 3]>,
    pub acceleration: Option<Vec<[F; 3]>>,
}

impl<F: Real> ImuSequence<F> {
    pub fn new(
        timestamps: Vec<TimeInstant>,
        angular_velocity: Vec<[F; 3]>,
        acceleration: Option<Vec<[F; 3]>>,
    ) -> Result<Self> {
        if angular_velocity.len() != timestamps.len() {
            return Err(Error::argument(format!(
                "{} gyro samples vs {} timestamps",
                angular_velocity.len(),
                timestamps.len()
            )));
        }
        if let Some(acc) = &acceleration {
            if acc.len() != timestamps.len() {
                return Err(Error::argument(format!(
                    "{} accel samples vs {} timestamps",
                    acc.len(),
                    timestamps.len()
                )));
            }
        }
        for pair in timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::argument("timestamps must be strictly increasing"));
            }
        }
        Ok(ImuSequence {
            timestamps,
            angular_velocity,
            acceleration,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Mean sample rate implied by the timestamps.
    pub fn native_rate_hz(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let span = (self.timestamps[self.len() - 1] - self.timestamps[0]) as f64;
        (self.len() - 1) as f64 * 1e9 / span
    }
}

/// Result of a gyro-correlation offset estimate.
///
/// Sign convention: a positive offset means the second device's clock reads
/// later than the first one's for the same physical instant, i.e.
/// `t_b = t_a + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    pub offset_ns: f64,
    pub peak_correlation: f64,
    pub grid_step_ns: f64,
}

/// Estimates whose correlation peak falls below this are rejected: the two
/// recordings most likely do not share a twist event.
pub const LOW_CONFIDENCE_THRESHOLD: f64 = 0.6;

/// Per-sample Euclidean norm of the angular velocity.
pub fn magnitude_series<F: Real>(s: &ImuSequence<F>) -> Result<Series<F>> {
    if s.is_empty() {
        return Err(Error::argument("empty IMU sequence"));
    }
    let values = s
        .angular_velocity
        .iter()
        .map(|w| (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt())
        .collect();
    Series::new(s.timestamps.clone(), values)
}

/// Clock offset of `b` relative to `a` from a shared rotation event.
///
/// Combines the first-timestamp difference, the integer correlation lag and
/// a three-point parabolic sub-sample refinement.
pub fn estimate_offset<F: Real>(
    a: &ImuSequence<F>,
    b: &ImuSequence<F>,
    rate_hz: f64,
) -> Result<OffsetEstimate> {
    if rate_hz.is_nan() || rate_hz <= 0.0 {
        return Err(Error::argument(format!("rate {rate_hz} Hz must be positive")));
    }
    let native = a.native_rate_hz().min(b.native_rate_hz());
    if rate_hz > native * 1.0001 {
        return Err(Error::argument(format!(
            "correlation rate {rate_hz} Hz exceeds the slower native rate {native:.3} Hz"
        )));
    }
    let ua = resample_uniform(&magnitude_series(a)?, rate_hz)?;
    let ub = resample_uniform(&magnitude_series(b)?, rate_hz)?;
    let step_ns = ua.step_ns;

    let corr = cross_correlation_lag(&ua, &ub)?;
    let frac_lag = match refine_peak(&corr.curve, corr.peak_index) {
        Ok(refined) => corr.lag_min as f64 + refined,
        // peak on the window edge: fall back to the integer lag
        Err(Error::BoundaryPeak { .. }) => corr.peak_lag() as f64,
        Err(e) => return Err(e),
    };
    let peak_correlation = corr.peak_value().as_f64();
    if peak_correlation < LOW_CONFIDENCE_THRESHOLD {
        return Err(Error::LowConfidence { peak_correlation });
    }

    let start_diff = (ub.start - ua.start) as f64;
    Ok(OffsetEstimate {
        offset_ns: start_diff + frac_lag * step_ns,
        peak_correlation,
        grid_step_ns: step_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn twist_samples(n: usize, rate: f64) -> Vec<[f64; 3]> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let s = 2.0 * (2.0 * std::f64::consts::PI * 0.7 * t).sin()
                    + 0.8 * (2.0 * std::f64::consts::PI * 4.3 * t + 0.3).sin();
                // fixed axis, roughly diagonal
                [s * 0.267, s * 0.535, s * 0.802]
            })
            .collect()
    }

    fn imu(ts_offset_ns: i64, n: usize, rate: f64) -> ImuSequence<f64> {
        let step = (1e9 / rate) as i64;
        let timestamps = (0..n as i64)
            .map(|i| TimeInstant::from_nanos(ts_offset_ns + i * step))
            .collect();
        ImuSequence::new(timestamps, twist_samples(n, rate), None).unwrap()
    }

    #[test]
    fn magnitude_of_zero_is_zero() {
        let s = ImuSequence::new(
            vec![TimeInstant::from_nanos(0), TimeInstant::from_nanos(10)],
            vec![[0.0; 3], [0.0; 3]],
            None,
        )
        .unwrap();
        assert_eq!(magnitude_series(&s).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn magnitude_three_four_five() {
        let s = ImuSequence::new(
            vec![TimeInstant::from_nanos(0)],
            vec![[3.0, 4.0, 0.0]],
            None,
        )
        .unwrap();
        assert_eq!(magnitude_series(&s).unwrap().values, vec![5.0]);
    }

    #[test]
    fn magnitude_rejects_empty_input() {
        let s = ImuSequence::<f64>::new(vec![], vec![], None).unwrap();
        assert!(magnitude_series(&s).is_err());
    }

    #[test]
    fn magnitude_is_rotation_invariant() {
        let samples = twist_samples(100, 500.0);
        let ts: Vec<_> = (0..100)
            .map(|i| TimeInstant::from_nanos(i * 2_000_000))
            .collect();
        // rotation by 90 degrees around z
        let rotated: Vec<[f64; 3]> = samples.iter().map(|w| [-w[1], w[0], w[2]]).collect();
        let a = magnitude_series(&ImuSequence::new(ts.clone(), samples, None).unwrap()).unwrap();
        let b = magnitude_series(&ImuSequence::new(ts, rotated, None).unwrap()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            let scale = x.abs().max(1.0);
            assert!((x - y).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn identical_sequences_give_zero_offset() {
        let a = imu(0, 1000, 500.0);
        let est = estimate_offset(&a, &a, 500.0).unwrap();
        let grid = est.grid_step_ns;
        assert!(est.offset_ns.abs() <= grid / 20.0, "offset {}", est.offset_ns);
        assert!(est.peak_correlation > 0.999);
    }

    #[test]
    fn pure_timestamp_shift_is_recovered() {
        let shift = 1_234_567_000i64;
        let a = imu(0, 1000, 500.0);
        let b = imu(shift, 1000, 500.0);
        let est = estimate_offset(&a, &b, 500.0).unwrap();
        assert_abs_diff_eq!(est.offset_ns, shift as f64, epsilon = 2_000.0);
    }

    #[test]
    fn estimate_is_antisymmetric() {
        let a = imu(0, 1000, 500.0);
        let b = imu(5_000_000, 1000, 500.0);
        let ab = estimate_offset(&a, &b, 500.0).unwrap();
        let ba = estimate_offset(&b, &a, 500.0).unwrap();
        let tol = 2.0 * ab.grid_step_ns / 10.0;
        assert!((ab.offset_ns + ba.offset_ns).abs() <= tol);
    }

    #[test]
    fn uncorrelated_signals_are_rejected() {
        let a = imu(0, 1000, 500.0);
        // deterministic pseudo-noise with no twist structure
        let ts: Vec<_> = (0..1000)
            .map(|i| TimeInstant::from_nanos(i * 2_000_000))
            .collect();
        let noise: Vec<[f64; 3]> = (0..1000u64)
            .map(|i| {
                let x = ((i.wrapping_mul(2654435761) >> 7) % 1000) as f64 / 500.0 - 1.0;
                let y = ((i.wrapping_mul(40503) >> 3) % 1000) as f64 / 500.0 - 1.0;
                [x, y, x * y]
            })
            .collect();
        let b = ImuSequence::new(ts, noise, None).unwrap();
        match estimate_offset(&a, &b, 500.0) {
            Err(Error::LowConfidence { peak_correlation }) => {
                assert!(peak_correlation < LOW_CONFIDENCE_THRESHOLD)
            }
            other => panic!("expected low-confidence error, got {other:?}"),
        }
    }

    #[test]
    fn excessive_rate_is_rejected() {
        let a = imu(0, 100, 500.0);
        assert!(matches!(
            estimate_offset(&a, &a, 1000.0),
            Err(Error::Argument(_))
        ));
    }
}
