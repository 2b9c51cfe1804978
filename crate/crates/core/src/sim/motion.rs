//! Ground-truth rotational motion and simulated IMU sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clock::{ClockModel, TimeInstant};
use crate::error::{Error, Result};
use crate::gyro::ImuSequence;
use crate::scalar::Real;
use crate::util::derive_rng;

/// One component of the scalar angular-rate signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
}

/// Description of a twist event: the signed angular rate is a sum of
/// sinusoids over `[start_s, start_s + duration_s]` and zero outside, around
/// an axis that wanders slowly and deterministically per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub sinusoids: Vec<Sinusoid>,
    pub start_s: f64,
    pub duration_s: f64,
    /// Peak wander of the rotation axis direction, radians.
    pub axis_wander: f64,
    pub seed: u64,
}

impl MotionProfile {
    /// Hand-twist surrogate: a few incommensurate tones peaking near
    /// 3 rad/s over a 2 s window.
    pub fn twist_default(seed: u64) -> Self {
        MotionProfile {
            sinusoids: vec![
                Sinusoid { amplitude: 1.5, frequency_hz: 0.6, phase: 0.0 },
                Sinusoid { amplitude: 1.0, frequency_hz: 2.3, phase: 0.9 },
                Sinusoid { amplitude: 0.5, frequency_hz: 6.1, phase: 2.1 },
                Sinusoid { amplitude: 0.3, frequency_hz: 11.0, phase: 4.2 },
            ],
            start_s: 0.0,
            duration_s: 2.0,
            axis_wander: 0.3,
            seed,
        }
    }

    pub fn max_frequency_hz(&self) -> f64 {
        self.sinusoids
            .iter()
            .map(|s| s.frequency_hz)
            .fold(0.0, f64::max)
    }
}

/// Continuous angular-velocity function synthesized from a profile,
/// queryable at any instant.
#[derive(Clone, Debug)]
pub struct Motion {
    profile: MotionProfile,
    base_theta: f64,
    base_phi: f64,
    wander: [(f64, f64, f64); 2], // (frequency, phase, weight) per spherical angle
}

/// Deterministically realize a motion profile.
pub fn synth_motion(profile: &MotionProfile) -> Motion {
    let mut rng = derive_rng(profile.seed, "motion-axis", 0);
    let base_theta = rng.random_range(0.0..std::f64::consts::PI);
    let base_phi = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    let mut wander = [(0.0, 0.0, 0.0); 2];
    for w in &mut wander {
        *w = (
            rng.random_range(0.1..0.4),
            rng.random_range(0.0..2.0 * std::f64::consts::PI),
            rng.random_range(0.5..1.0),
        );
    }
    Motion {
        profile: profile.clone(),
        base_theta,
        base_phi,
        wander,
    }
}

impl Motion {
    pub fn profile(&self) -> &MotionProfile {
        &self.profile
    }

    /// Signed scalar angular rate; its absolute value is |omega|.
    pub fn scalar_rate(&self, t: TimeInstant) -> f64 {
        self.scalar_rate_at_secs(t.as_secs_f64())
    }

    pub fn scalar_rate_at_secs(&self, t_s: f64) -> f64 {
        let u = t_s - self.profile.start_s;
        if u < 0.0 || u > self.profile.duration_s {
            return 0.0;
        }
        self.profile
            .sinusoids
            .iter()
            .map(|s| s.amplitude * (2.0 * std::f64::consts::PI * s.frequency_hz * u + s.phase).sin())
            .sum()
    }

    fn axis_at(&self, u: f64) -> [f64; 3] {
        let two_pi = 2.0 * std::f64::consts::PI;
        let (f0, p0, w0) = self.wander[0];
        let (f1, p1, w1) = self.wander[1];
        let theta = self.base_theta + self.profile.axis_wander * w0 * (two_pi * f0 * u + p0).sin();
        let phi = self.base_phi + self.profile.axis_wander * w1 * (two_pi * f1 * u + p1).sin();
        [
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        ]
    }

    pub fn angular_velocity(&self, t: TimeInstant) -> [f64; 3] {
        self.angular_velocity_at_secs(t.as_secs_f64())
    }

    pub fn angular_velocity_at_secs(&self, t_s: f64) -> [f64; 3] {
        let rate = self.scalar_rate_at_secs(t_s);
        if rate == 0.0 {
            return [0.0; 3];
        }
        let axis = self.axis_at(t_s - self.profile.start_s);
        [rate * axis[0], rate * axis[1], rate * axis[2]]
    }
}

/// How a simulated IMU samples the motion: uniform true-time grid from
/// `start_s`, with an optional sub-sample grid offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuCapture {
    pub rate_hz: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub start_s: f64,
    pub duration_s: f64,
    pub grid_offset_ns: f64,
}

const GRAVITY: f64 = 9.81;

/// Sample the motion with an imperfect clock and white gyro noise.
///
/// Deterministic per capture seed; with zero noise and an identity clock
/// the samples equal the analytic motion exactly.
pub fn simulate_imu<F: Real>(
    motion: &Motion,
    clock: &ClockModel,
    capture: &ImuCapture,
) -> Result<ImuSequence<F>> {
    if capture.rate_hz.is_nan() || capture.rate_hz <= 0.0 {
        return Err(Error::argument("IMU rate must be positive"));
    }
    if capture.duration_s < 2.0 / capture.rate_hz {
        return Err(Error::argument(
            "capture window shorter than two sample periods",
        ));
    }
    let max_f = motion.profile().max_frequency_hz();
    if max_f > capture.rate_hz / 10.0 {
        return Err(Error::argument(format!(
            "motion content at {max_f} Hz violates the rate/10 band limit at {} Hz",
            capture.rate_hz
        )));
    }

    let n = (capture.duration_s * capture.rate_hz).floor() as usize + 1;
    let step_ns = 1e9 / capture.rate_hz;
    let base_ns = capture.start_s * 1e9 + capture.grid_offset_ns;
    let true_times: Vec<TimeInstant> = (0..n)
        .map(|i| TimeInstant::from_nanos((base_ns + i as f64 * step_ns).round() as i64))
        .collect();
    let timestamps = clock.sample(&true_times)?;

    let mut gyro = Vec::with_capacity(n);
    let mut accel = Vec::with_capacity(n);
    if capture.noise_sd == 0.0 {
        for &t in &true_times {
            let w = motion.angular_velocity(t);
            gyro.push([F::of_f64(w[0]), F::of_f64(w[1]), F::of_f64(w[2])]);
            accel.push([F::zero(), F::zero(), F::of_f64(GRAVITY)]);
        }
    } else {
        let normal = Normal::new(0.0, capture.noise_sd)
            .map_err(|e| Error::argument(format!("bad noise sd: {e}")))?;
        let mut rng: ChaCha8Rng = derive_rng(capture.seed, "imu-noise", 0);
        for &t in &true_times {
            let w = motion.angular_velocity(t);
            gyro.push([
                F::of_f64(w[0] + normal.sample(&mut rng)),
                F::of_f64(w[1] + normal.sample(&mut rng)),
                F::of_f64(w[2] + normal.sample(&mut rng)),
            ]);
            accel.push([
                F::of_f64(normal.sample(&mut rng)),
                F::of_f64(normal.sample(&mut rng)),
                F::of_f64(GRAVITY + normal.sample(&mut rng)),
            ]);
        }
    }
    ImuSequence::new(timestamps, gyro, Some(accel))
}
