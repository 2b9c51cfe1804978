//! End-to-end session simulation: trigger the depth camera and log trigger
//! timestamps, record the twist on both IMUs, start the smartphone video,
//! compute and apply the trigger-phase correction, then render every
//! requested smartphone frame as a row-intensity profile.
//!
//! Physics happens in true time; each sensor only ever reports timestamps in
//! its own clock domain.

use serde::{Deserialize, Serialize};

use crate::bundle::{RecordingBundle, SessionInfo, BUNDLE_VERSION};
use crate::clock::{ClockModel, Nanos, TimeInstant};
use crate::error::{Error, Result};
use crate::frame::{compute_phase_shift, quantize_phase};
use crate::gyro::{estimate_offset, ImuSequence};
use crate::scalar::Real;
use crate::sim::camera::{render_rows, NoiseFloor, RowIntensityProfile, StrobeTrainConfig};
use crate::sim::motion::{simulate_imu, synth_motion, ImuCapture, MotionProfile, Sinusoid};
use crate::util::{derive_rng, derive_seed};

/// Clock imperfection of one device; the RNG stream is derived from the
/// session seed and the device role.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ClockSpec {
    pub offset_ns: i64,
    pub skew: f64,
    pub jitter_sd_ns: f64,
}

impl ClockSpec {
    fn to_model(self, seed: u64) -> ClockModel {
        ClockModel {
            offset_ns: self.offset_ns,
            skew: self.skew,
            jitter_sd_ns: self.jitter_sd_ns,
            seed,
        }
    }
}

/// IMU sampling shared by both devices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuSetup {
    pub rate_hz: f64,
    pub noise_sd: f64,
    /// Both IMUs record `[0, window_s]` of true time.
    pub window_s: f64,
    pub mcu_grid_offset_ns: f64,
    pub phone_grid_offset_ns: f64,
}

impl Default for ImuSetup {
    fn default() -> Self {
        ImuSetup {
            rate_hz: 500.0,
            noise_sd: 0.02,
            window_s: 3.0,
            mcu_grid_offset_ns: 0.0,
            phone_grid_offset_ns: 0.0,
        }
    }
}

/// The hand-twist event both IMUs observe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwistConfig {
    pub start_s: f64,
    pub duration_s: f64,
    pub sinusoids: Vec<Sinusoid>,
    pub axis_wander: f64,
}

impl Default for TwistConfig {
    fn default() -> Self {
        let template = MotionProfile::twist_default(0);
        TwistConfig {
            start_s: 0.5,
            duration_s: template.duration_s,
            sinusoids: template.sinusoids,
            axis_wander: template.axis_wander,
        }
    }
}

impl TwistConfig {
    fn profile(&self, seed: u64) -> MotionProfile {
        MotionProfile {
            sinusoids: self.sinusoids.clone(),
            start_s: self.start_s,
            duration_s: self.duration_s,
            axis_wander: self.axis_wander,
            seed,
        }
    }
}

/// Smartphone camera and clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhoneConfig {
    pub fps: f64,
    pub rows: usize,
    pub row_readout_ns: Nanos,
    pub exposure_ns: Nanos,
    /// True time of the first frame's exposure midpoint.
    pub video_start_s: f64,
    pub clock: ClockSpec,
}

impl Default for PhoneConfig {
    fn default() -> Self {
        PhoneConfig {
            fps: 30.0,
            rows: 1080,
            row_readout_ns: 10_200,
            exposure_ns: 125_000,
            video_start_s: 3.5,
            clock: ClockSpec::default(),
        }
    }
}

impl PhoneConfig {
    pub fn period_ns(&self) -> Nanos {
        (1e9 / self.fps).round() as Nanos
    }
}

fn integer_rate_ratio(fast_fps: f64, slow_fps: f64) -> Option<i64> {
    let ratio = fast_fps / slow_fps;
    let k = ratio.round();
    if k >= 1.0 && ((ratio - k) / k).abs() < 1e-9 {
        Some(k as i64)
    } else {
        None
    }
}

/// Triggered depth camera, its projector and its internal clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthConfig {
    pub fps: f64,
    /// First trigger instant in the MCU domain.
    pub trigger_start_ns: i64,
    /// Constant trigger-to-exposure-midpoint latency (true time); absorbs
    /// the light re-transmission path, default 0.
    pub latency_ns: Nanos,
    pub strobe: StrobeTrainConfig,
    pub clock: ClockSpec,
    /// Positions within the session's trigger stream that produce no
    /// delivered depth frame (simulated frame drops).
    pub drop_triggers: Vec<u64>,
}

impl Default for DepthConfig {
    fn default() -> Self {
        DepthConfig {
            fps: 30.0,
            trigger_start_ns: 100_000_000,
            latency_ns: 0,
            strobe: StrobeTrainConfig::default(),
            clock: ClockSpec::default(),
            drop_triggers: Vec::new(),
        }
    }
}


/// Where the smartphone-to-MCU offset used for frame alignment comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSource {
    /// Gyro-correlation estimate from the two simulated IMU records.
    Estimated,
    /// The simulator's exact clock relation at video start.
    True,
    /// Caller-supplied offset in nanoseconds.
    Manual { offset_ns: f64 },
}

impl OffsetSource {
    pub fn label(&self) -> &'static str {
        match self {
            OffsetSource::Estimated => "estimated",
            OffsetSource::True => "true",
            OffsetSource::Manual { .. } => "manual",
        }
    }
}

/// Full description of one simulated recording session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub seed: u64,
    /// Length of the rendered recording, seconds.
    pub duration_s: f64,
    /// Render every n-th smartphone frame.
    pub render_stride: usize,
    pub imu: ImuSetup,
    pub twist: TwistConfig,
    pub phone: PhoneConfig,
    pub depth: DepthConfig,
    pub mcu_clock: ClockSpec,
    /// Per-row additive sensor noise, in units of a fully captured strobe.
    pub noise_floor_sd: f64,
    /// Extra depth trigger shift applied after the computed correction; the
    /// injected-offset knob of the evaluation procedure.
    pub extra_phase_ns: Nanos,
    pub phase_step_ns: Nanos,
    pub offset_source: OffsetSource,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            seed: 0,
            duration_s: 1.0,
            render_stride: 1,
            imu: ImuSetup::default(),
            twist: TwistConfig::default(),
            phone: PhoneConfig::default(),
            depth: DepthConfig::default(),
            mcu_clock: ClockSpec::default(),
            noise_floor_sd: 0.01,
            extra_phase_ns: 0,
            phase_step_ns: 390,
            offset_source: OffsetSource::Estimated,
        }
    }
}

impl SessionConfig {
    pub fn phone_period_ns(&self) -> Nanos {
        self.phone.period_ns()
    }

    /// Depth trigger period, derived from the smartphone period so that the
    /// two stay exactly commensurate on the integer time base.
    pub fn depth_period_ns(&self) -> Result<Nanos> {
        let t_s = self.phone.period_ns();
        if let Some(k) = integer_rate_ratio(self.phone.fps, self.depth.fps) {
            return Ok(t_s * k);
        }
        if let Some(k) = integer_rate_ratio(self.depth.fps, self.phone.fps) {
            if t_s % k == 0 {
                return Ok(t_s / k);
            }
        }
        Err(Error::config(format!(
            "frame rates {} and {} fps must be equal or integer multiples with a representable period",
            self.phone.fps, self.depth.fps
        )))
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s.is_nan() || self.duration_s <= 0.0 {
            return Err(Error::config("session duration must be positive"));
        }
        if self.render_stride == 0 {
            return Err(Error::config("render stride must be at least 1"));
        }
        if self.phone.fps.is_nan()
            || self.depth.fps.is_nan()
            || self.phone.fps <= 0.0
            || self.depth.fps <= 0.0
        {
            return Err(Error::config("frame rates must be positive"));
        }
        self.depth_period_ns()?;
        let t_s = self.phone.period_ns();
        if self.phone.rows == 0 {
            return Err(Error::config("camera needs at least one row"));
        }
        if self.phone.rows as i64 * self.phone.row_readout_ns >= t_s {
            return Err(Error::config("row readout does not fit in the frame period"));
        }
        self.depth.strobe.validate()?;
        if self.phase_step_ns <= 0 {
            return Err(Error::config("phase step must be positive"));
        }
        if self.noise_floor_sd < 0.0 {
            return Err(Error::config("noise floor SD cannot be negative"));
        }
        if self.twist.start_s + self.twist.duration_s > self.imu.window_s {
            return Err(Error::config(
                "twist event does not fit inside the IMU recording window",
            ));
        }
        if self.imu.noise_sd < 0.0 {
            return Err(Error::config("gyro noise SD cannot be negative"));
        }
        Ok(())
    }

    fn phone_clock(&self) -> ClockModel {
        self.phone.clock.to_model(derive_seed(self.seed, "phone-clock", 0))
    }

    fn mcu_clock_model(&self) -> ClockModel {
        self.mcu_clock.to_model(derive_seed(self.seed, "mcu-clock", 0))
    }

    fn depth_clock(&self) -> ClockModel {
        self.depth.clock.to_model(derive_seed(self.seed, "depth-clock", 0))
    }
}

/// Simulate the two IMU records of the twist event (the time-sync part of a
/// session) without rendering anything.
pub fn simulate_sync_imus<F: Real>(
    cfg: &SessionConfig,
) -> Result<(ImuSequence<F>, ImuSequence<F>)> {
    cfg.validate()?;
    let motion = synth_motion(&cfg.twist.profile(derive_seed(cfg.seed, "motion", 0)));
    let mcu_capture = ImuCapture {
        rate_hz: cfg.imu.rate_hz,
        noise_sd: cfg.imu.noise_sd,
        seed: derive_seed(cfg.seed, "imu-mcu", 0),
        start_s: 0.0,
        duration_s: cfg.imu.window_s,
        grid_offset_ns: cfg.imu.mcu_grid_offset_ns,
    };
    let phone_capture = ImuCapture {
        seed: derive_seed(cfg.seed, "imu-phone", 0),
        grid_offset_ns: cfg.imu.phone_grid_offset_ns,
        ..mcu_capture.clone()
    };
    let mcu_imu = simulate_imu(&motion, &cfg.mcu_clock_model(), &mcu_capture)?;
    let phone_imu = simulate_imu(&motion, &cfg.phone_clock(), &phone_capture)?;
    Ok((mcu_imu, phone_imu))
}

/// Run the whole simulated pipeline and return the recording bundle.
pub fn simulate_session<F: Real>(cfg: &SessionConfig) -> Result<RecordingBundle<F>> {
    cfg.validate()?;
    let phone_clock = cfg.phone_clock();
    let mcu_clock = cfg.mcu_clock_model();
    let depth_clock = cfg.depth_clock();
    let phone_map = phone_clock.mapping();
    let mcu_map = mcu_clock.mapping();
    let mcu_inverse = mcu_map.invert()?;
    let phone_inverse = phone_map.invert()?;

    // twist event and its two IMU records
    let (mcu_imu, phone_imu) = simulate_sync_imus::<F>(cfg)?;

    let period_s = cfg.phone.period_ns();
    let period_d = cfg.depth_period_ns()?;
    let align_period = period_s.min(period_d);

    // depth triggering starts before the video; the first trigger timestamp
    // anchors the depth schedule in the MCU domain
    let t_d0_m = cfg.depth.trigger_start_ns;

    // the phone starts recording and reports its first-frame midpoint; the
    // physical frame times follow the oscillator, the reported stamp may
    // additionally carry timestamping jitter
    let video_start_true_ns = cfg.phone.video_start_s * 1e9;
    let midpoint0_phone = phone_map.map_ns_f64(video_start_true_ns);
    let t_s0_s = if cfg.phone.clock.jitter_sd_ns > 0.0 {
        use rand_distr::Distribution;
        let normal = rand_distr::Normal::new(0.0, cfg.phone.clock.jitter_sd_ns)
            .map_err(|e| Error::config(format!("bad phone jitter: {e}")))?;
        let mut rng = derive_rng(cfg.seed, "phone-stamp", 0);
        (midpoint0_phone + normal.sample(&mut rng)).round() as i64
    } else {
        midpoint0_phone.round() as i64
    };

    // smartphone-to-MCU offset for the alignment step
    let (offset_used_ns, peak_correlation) = match cfg.offset_source {
        OffsetSource::Estimated => {
            let est = estimate_offset(&mcu_imu, &phone_imu, cfg.imu.rate_hz)?;
            (est.offset_ns, Some(est.peak_correlation))
        }
        OffsetSource::True => {
            let t = video_start_true_ns;
            (phone_map.map_ns_f64(t) - mcu_map.map_ns_f64(t), None)
        }
        OffsetSource::Manual { offset_ns } => (offset_ns, None),
    };

    // phase correction from the midpoints expressed in the MCU domain
    let t_s0_m = TimeInstant::from_nanos(t_s0_s - offset_used_ns.round() as i64);
    let phase_ns = compute_phase_shift(t_s0_m, TimeInstant::from_nanos(t_d0_m), align_period)?;
    let phase = quantize_phase(phase_ns, cfg.phase_step_ns)?;
    let applied_shift = phase.applied_shift_ns() + cfg.extra_phase_ns;

    // rendered smartphone frames
    let frame_count = ((cfg.duration_s * cfg.phone.fps).round() as u64).max(1);
    let mid_row_offset =
        (cfg.phone.rows / 2) as i64 * cfg.phone.row_readout_ns + cfg.phone.exposure_ns / 2;

    // corrected trigger stream wide enough to cover the render window
    let strobe_margin = cfg.depth.strobe.span_ns() / 2
        + cfg.depth.strobe.strobe_duration_ns
        + cfg.depth.latency_ns.abs()
        + period_d;
    let win_start_true = phone_inverse.map_ns_f64(midpoint0_phone) - mid_row_offset as f64;
    let win_end_true = phone_inverse
        .map_ns_f64(midpoint0_phone + (frame_count as i64 * period_s) as f64)
        + (cfg.phone.rows as i64 * cfg.phone.row_readout_ns + cfg.phone.exposure_ns) as f64;
    let trig0 = t_d0_m + applied_shift;
    let m_lo = ((mcu_map.map_ns_f64(win_start_true - strobe_margin as f64) - trig0 as f64)
        / period_d as f64)
        .floor()
        .max(0.0) as u64;
    let m_hi = ((mcu_map.map_ns_f64(win_end_true + strobe_margin as f64) - trig0 as f64)
        / period_d as f64)
        .ceil()
        .max(0.0) as u64;

    let mut triggers = Vec::with_capacity((m_hi - m_lo + 1) as usize);
    let mut depth_mid_true = Vec::with_capacity(triggers.capacity());
    for m in m_lo..=m_hi {
        let stamp = trig0 + m as i64 * period_d;
        let true_ns = mcu_inverse
            .map_instant(TimeInstant::from_nanos(stamp))?
            .nanos()
            + cfg.depth.latency_ns;
        triggers.push((m, TimeInstant::from_nanos(stamp)));
        depth_mid_true.push((m, TimeInstant::from_nanos(true_ns)));
    }

    // delivered depth frames: dropped triggers produce no frame, the camera
    // numbers what it delivers
    let delivered: Vec<TimeInstant> = depth_mid_true
        .iter()
        .enumerate()
        .filter(|(position, _)| !cfg.depth.drop_triggers.contains(&(*position as u64)))
        .map(|(_, (_, t))| *t)
        .collect();
    let depth_stamps = depth_clock.sample(&delivered)?;
    let depth_frames: Vec<(u64, TimeInstant)> = depth_stamps
        .into_iter()
        .enumerate()
        .map(|(i, t)| (i as u64, t))
        .collect();

    // every strobe instant in true time, sorted (trains do not overlap)
    let strobe_cfg = &cfg.depth.strobe;
    let mut strobes = Vec::with_capacity(depth_mid_true.len() * strobe_cfg.strobes_per_train);
    for (_, mid) in &depth_mid_true {
        for k in 1..=strobe_cfg.strobes_per_train {
            strobes
                .push(*mid + (k as i64 - strobe_cfg.center_index as i64) * strobe_cfg.interval_ns);
        }
    }
    debug_assert!(strobes.windows(2).all(|w| w[0] <= w[1]));

    let readout_span = cfg.phone.rows as i64 * cfg.phone.row_readout_ns;
    let pulse = strobe_cfg.strobe_duration_ns;
    let mut profiles = Vec::new();
    let mut n = 0u64;
    while n < frame_count {
        // per-frame mapping keeps rounding errors from accumulating
        let midpoint_phone = midpoint0_phone + (n as i64 * period_s) as f64;
        let midpoint_true = phone_inverse.map_ns_f64(midpoint_phone).round() as i64;
        let row0_true = midpoint_true - mid_row_offset;

        let lo = strobes.partition_point(|s| s.nanos() < row0_true - pulse);
        let hi = strobes
            .partition_point(|s| s.nanos() <= row0_true + readout_span + cfg.phone.exposure_ns + pulse);
        let noise = NoiseFloor {
            sd: cfg.noise_floor_sd,
            seed: derive_seed(cfg.seed, "noise-floor", n),
        };
        let intensities = render_rows(
            &strobes[lo..hi],
            pulse,
            row0_true,
            cfg.phone.rows,
            cfg.phone.row_readout_ns,
            cfg.phone.exposure_ns,
            &noise,
        )?;
        // observable frame start, phone domain, from the reported stamp
        let frame_start =
            TimeInstant::from_nanos(t_s0_s + n as i64 * period_s - mid_row_offset);
        profiles.push(RowIntensityProfile {
            frame_index: n,
            frame_start,
            intensities,
        });
        n += cfg.render_stride as u64;
    }

    let info = SessionInfo {
        version: BUNDLE_VERSION.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        t_s0_s_ns: t_s0_s,
        t_d0_m_ns: t_d0_m,
        offset_used_ns,
        offset_source: cfg.offset_source.label().to_string(),
        peak_correlation,
        phase,
    };
    Ok(RecordingBundle {
        info,
        mcu_imu,
        phone_imu,
        triggers,
        depth_frames,
        profiles,
    })
}
