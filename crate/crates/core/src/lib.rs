//! Synchronization toolkit for a rigid smartphone + depth-camera rig.
//!
//! The crate covers the whole pipeline: clock-domain mappings, gyroscope
//! cross-correlation time sync, trigger-phase frame alignment, a
//! deterministic rig simulator, the strobe-band evaluation pipeline
//! (precision and drift statistics), and the on-disk recording bundle.
//!
//! Signal-carrying types are generic over the [`scalar::Real`] scalar
//! (`f32` or `f64`); the aliases below fix the default `f64` instantiation.
//! Time itself is always exact integer nanoseconds.

pub mod bundle;
pub mod clock;
pub mod error;
pub mod eval;
pub mod frame;
pub mod gyro;
pub mod pipeline;
pub mod scalar;
pub mod series;
pub mod sim;
pub mod util;

pub use clock::{ClockMapping, ClockModel, Nanos, TimeInstant};
pub use error::{Error, Result};
pub use eval::{DriftReport, EvalConfig, PeakSet, PrecisionReport};
pub use frame::{
    compute_phase_shift, quantize_phase, residual_misalignment, FrameSchedule, PhaseCorrection,
    PHASE_STEP_NS,
};
pub use gyro::{estimate_offset, OffsetEstimate};
pub use scalar::Real;

/// Default-scalar aliases; the generic types live in their modules.
pub type Series = series::Series<f64>;
pub type UniformSeries = series::UniformSeries<f64>;
pub type ImuSequence = gyro::ImuSequence<f64>;
pub type RowIntensityProfile = sim::RowIntensityProfile<f64>;
pub type RecordingBundle = bundle::RecordingBundle<f64>;
