//! Frame-exposure schedules and trigger-phase alignment.
//!
//! A camera with a locked frame rate is an arithmetic sequence of exposure
//! midpoints `t0 + period * n`. Aligning a triggered depth camera with a
//! smartphone camera reduces to folding the midpoint difference into one
//! framing period and quantizing it to the trigger hardware's step.

use serde::{Deserialize, Serialize};

use crate::clock::{Nanos, TimeInstant};
use crate::error::{Error, Result};

/// Discrete step of the trigger-phase hardware, nanoseconds.
pub const PHASE_STEP_NS: Nanos = 390;

/// Periodic exposure-midpoint model `t0 + period * n` for one camera in one
/// clock domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub t0: TimeInstant,
    pub period_ns: Nanos,
    pub count: Option<u64>,
}

impl FrameSchedule {
    pub fn new(t0: TimeInstant, period_ns: Nanos) -> Result<Self> {
        if period_ns <= 0 {
            return Err(Error::argument(format!("period {period_ns} ns must be positive")));
        }
        Ok(FrameSchedule {
            t0,
            period_ns,
            count: None,
        })
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = Some(count);
        self
    }

    /// Exposure midpoint of frame `n`, exact integer arithmetic.
    pub fn exposure_time(&self, n: u64) -> Result<TimeInstant> {
        if let Some(count) = self.count {
            if n >= count {
                return Err(Error::argument(format!(
                    "frame {n} out of range, schedule has {count} frames"
                )));
            }
        }
        let offset = i64::try_from(n)
            .ok()
            .and_then(|n| self.period_ns.checked_mul(n))
            .ok_or_else(|| Error::Range(format!("frame {n} overflows the schedule")))?;
        self.t0
            .checked_add(offset)
            .ok_or_else(|| Error::Range(format!("frame {n} overflows the schedule")))
    }

    /// Same schedule with the origin shifted forward by `shift_ns`.
    pub fn shifted(&self, shift_ns: Nanos) -> FrameSchedule {
        FrameSchedule {
            t0: self.t0 + shift_ns,
            period_ns: self.period_ns,
            count: self.count,
        }
    }
}

/// Trigger-phase shift that aligns a depth schedule with a reference
/// schedule, folded into `[0, period)`.
///
/// Both instants must already be expressed in the same clock domain.
pub fn compute_phase_shift(
    t_s0: TimeInstant,
    t_d0: TimeInstant,
    period_ns: Nanos,
) -> Result<Nanos> {
    if period_ns <= 0 {
        return Err(Error::argument(format!("period {period_ns} ns must be positive")));
    }
    let diff = t_s0.nanos() as i128 - t_d0.nanos() as i128;
    Ok(diff.rem_euclid(period_ns as i128) as Nanos)
}

/// A phase shift quantized to the trigger hardware's discrete step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    /// Requested phase in `[0, period)`.
    pub phase_ns: Nanos,
    /// Number of hardware steps actually applied.
    pub ticks: i64,
    pub step_ns: Nanos,
    /// `phase - ticks * step`, always within half a step.
    pub residual_ns: Nanos,
}

impl PhaseCorrection {
    /// The shift the hardware applies: `ticks * step`.
    pub fn applied_shift_ns(&self) -> Nanos {
        self.ticks * self.step_ns
    }
}

/// Quantize a non-negative phase to `step_ns` ticks, rounding half up.
pub fn quantize_phase(phase_ns: Nanos, step_ns: Nanos) -> Result<PhaseCorrection> {
    if phase_ns < 0 {
        return Err(Error::argument(format!("phase {phase_ns} ns must be non-negative")));
    }
    if step_ns <= 0 {
        return Err(Error::argument(format!("step {step_ns} ns must be positive")));
    }
    // round-half-up(phase/step) = floor((2*phase + step) / (2*step))
    let ticks =
        ((2 * phase_ns as i128 + step_ns as i128).div_euclid(2 * step_ns as i128)) as i64;
    let residual_ns = (phase_ns as i128 - ticks as i128 * step_ns as i128) as Nanos;
    debug_assert!(2 * residual_ns.abs() <= step_ns);
    Ok(PhaseCorrection {
        phase_ns,
        ticks,
        step_ns,
        residual_ns,
    })
}

/// Fold a nanosecond difference into `(-period/2, period/2]`.
pub fn fold_into_half_period(diff_ns: Nanos, period_ns: Nanos) -> Nanos {
    let r = diff_ns.rem_euclid(period_ns);
    if 2 * r > period_ns {
        r - period_ns
    } else {
        r
    }
}

/// Smallest midpoint misalignment between two schedules in the same domain,
/// as a non-negative nanosecond count. Zero means frame-synced.
///
/// The frame rates must be equal or integer multiples of each other; the
/// alignment is then periodic in the smaller period.
pub fn residual_misalignment(s: &FrameSchedule, d: &FrameSchedule) -> Result<Nanos> {
    let (t_min, t_max) = if s.period_ns <= d.period_ns {
        (s.period_ns, d.period_ns)
    } else {
        (d.period_ns, s.period_ns)
    };
    if t_max % t_min != 0 {
        return Err(Error::argument(format!(
            "periods {} ns and {} ns are not integer multiples of each other",
            s.period_ns, d.period_ns
        )));
    }
    Ok(fold_into_half_period(s.t0 - d.t0, t_min).abs())
}
