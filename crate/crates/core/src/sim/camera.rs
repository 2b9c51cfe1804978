//! Rolling-shutter camera model and strobe-train rendering.
//!
//! Images are reduced to per-row intensity vectors: row `r` of a frame is
//! exposed over `[row0_start + r*row_readout, +exposure]`, and each strobe
//! pulse contributes its temporal overlap with that window, normalized so a
//! fully captured pulse contributes 1.0.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clock::{Nanos, TimeInstant};
use crate::error::{Error, Result};
use crate::frame::FrameSchedule;
use crate::scalar::Real;
use crate::util::derive_rng;

/// Strobe train emitted by the depth camera's projector at every frame
/// exposure; the center strobe coincides with the exposure midpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrobeTrainConfig {
    pub strobes_per_train: usize,
    pub interval_ns: Nanos,
    pub strobe_duration_ns: Nanos,
    /// 1-based index of the strobe that marks the exposure midpoint.
    pub center_index: usize,
}

impl Default for StrobeTrainConfig {
    fn default() -> Self {
        StrobeTrainConfig {
            strobes_per_train: 9,
            interval_ns: 1_600_000,
            strobe_duration_ns: 125_000,
            center_index: 5,
        }
    }
}

impl StrobeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strobes_per_train == 0 {
            return Err(Error::config("strobe train must contain at least one strobe"));
        }
        if self.center_index == 0 || self.center_index > self.strobes_per_train {
            return Err(Error::config(format!(
                "center index {} outside 1..={}",
                self.center_index, self.strobes_per_train
            )));
        }
        if self.interval_ns <= 0 || self.strobe_duration_ns <= 0 {
            return Err(Error::config("strobe interval and duration must be positive"));
        }
        Ok(())
    }

    /// Time from the first to the last strobe of one train.
    pub fn span_ns(&self) -> Nanos {
        (self.strobes_per_train as i64 - 1) * self.interval_ns
    }
}

/// Rolling-shutter geometry plus the exposure-midpoint schedule of the
/// frame's middle row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingShutterConfig {
    pub rows: usize,
    pub row_readout_ns: Nanos,
    pub exposure_ns: Nanos,
    pub schedule: FrameSchedule,
}

impl RollingShutterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::config("camera needs at least one row"));
        }
        if self.row_readout_ns <= 0 || self.exposure_ns <= 0 {
            return Err(Error::config("row readout and exposure must be positive"));
        }
        if self.rows as i64 * self.row_readout_ns >= self.schedule.period_ns {
            return Err(Error::config(format!(
                "readout {} ns does not fit in the {} ns frame period",
                self.rows as i64 * self.row_readout_ns,
                self.schedule.period_ns
            )));
        }
        Ok(())
    }

    pub fn middle_row(&self) -> usize {
        self.rows / 2
    }

    /// Total time from the start of row 0's exposure to the start of the
    /// last row's exposure.
    pub fn readout_span_ns(&self) -> Nanos {
        self.rows as i64 * self.row_readout_ns
    }

    /// Start of row 0's exposure for frame `n`. The schedule midpoint is the
    /// middle of the middle row's exposure.
    pub fn row0_start(&self, frame: u64) -> Result<TimeInstant> {
        let midpoint = self.schedule.exposure_time(frame)?;
        Ok(midpoint - self.middle_row() as i64 * self.row_readout_ns - self.exposure_ns / 2)
    }
}

/// Per-row brightness of one rolling-shutter frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RowIntensityProfile<F> {
    pub frame_index: u64,
    pub frame_start: TimeInstant,
    pub intensities: Vec<F>,
}

impl<F: Real> RowIntensityProfile<F> {
    pub fn rows(&self) -> usize {
        self.intensities.len()
    }
}

/// Instants of every strobe of frame `m`'s train; strobe `k` (1-based) fires
/// at `midpoint + (k - center_index) * interval`.
pub fn strobe_times(
    depth: &FrameSchedule,
    cfg: &StrobeTrainConfig,
    frame: u64,
) -> Result<Vec<TimeInstant>> {
    cfg.validate()?;
    let midpoint = depth.exposure_time(frame)?;
    Ok((1..=cfg.strobes_per_train)
        .map(|k| midpoint + (k as i64 - cfg.center_index as i64) * cfg.interval_ns)
        .collect())
}

/// Additive per-row sensor noise, Gaussian with the given SD (in units of a
/// fully captured strobe), clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFloor {
    pub sd: f64,
    pub seed: u64,
}

impl NoiseFloor {
    pub fn none() -> Self {
        NoiseFloor { sd: 0.0, seed: 0 }
    }
}

/// Render the rows of frame `frame` given the strobe instants near it.
pub fn render_row_profile<F: Real>(
    strobes: &[TimeInstant],
    pulse_ns: Nanos,
    shutter: &RollingShutterConfig,
    frame: u64,
    noise: &NoiseFloor,
) -> Result<RowIntensityProfile<F>> {
    shutter.validate()?;
    let row0 = shutter.row0_start(frame)?;
    let intensities = render_rows(
        strobes,
        pulse_ns,
        row0.nanos(),
        shutter.rows,
        shutter.row_readout_ns,
        shutter.exposure_ns,
        noise,
    )?;
    Ok(RowIntensityProfile {
        frame_index: frame,
        frame_start: row0,
        intensities,
    })
}

/// Overlap integration shared by the public renderer and the session
/// simulator (which anchors frames by true time rather than a schedule).
pub(crate) fn render_rows<F: Real>(
    strobes: &[TimeInstant],
    pulse_ns: Nanos,
    row0_start_ns: i64,
    rows: usize,
    row_readout_ns: Nanos,
    exposure_ns: Nanos,
    noise: &NoiseFloor,
) -> Result<Vec<F>> {
    if pulse_ns <= 0 {
        return Err(Error::argument("strobe pulse duration must be positive"));
    }
    let mut intensities = vec![0.0f64; rows];
    for strobe in strobes {
        // pulse centered on the strobe instant
        let pulse_start = strobe.nanos() - pulse_ns / 2;
        let pulse_end = pulse_start + pulse_ns;
        // rows whose exposure window can overlap the pulse
        let first = (pulse_start - exposure_ns - row0_start_ns).div_euclid(row_readout_ns);
        let last = (pulse_end - row0_start_ns).div_euclid(row_readout_ns) + 1;
        let first = first.max(0) as usize;
        let last = (last.max(0) as usize).min(rows.saturating_sub(1));
        for (row, acc) in intensities.iter_mut().enumerate().take(last + 1).skip(first) {
            let row_start = row0_start_ns + row as i64 * row_readout_ns;
            let row_end = row_start + exposure_ns;
            let overlap = pulse_end.min(row_end) - pulse_start.max(row_start);
            if overlap > 0 {
                *acc += overlap as f64 / pulse_ns as f64;
            }
        }
    }
    if noise.sd > 0.0 {
        let normal = Normal::new(0.0, noise.sd)
            .map_err(|e| Error::argument(format!("bad noise floor sd: {e}")))?;
        let mut rng: ChaCha8Rng = derive_rng(noise.seed, "row-noise", 0);
        for v in &mut intensities {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
    }
    Ok(intensities.into_iter().map(F::of_f64).collect())
}
