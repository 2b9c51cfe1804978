//! Deterministic simulator of the rigid sensor platform: shared rotation
//! sampled by two IMUs in different clock domains, a rolling-shutter camera
//! and a triggered depth camera whose projector emits strobe trains.

mod camera;
mod motion;
mod session;

pub use camera::{
    render_row_profile, strobe_times, NoiseFloor, RollingShutterConfig, RowIntensityProfile,
    StrobeTrainConfig,
};
pub use motion::{simulate_imu, synth_motion, ImuCapture, Motion, MotionProfile, Sinusoid};
pub use session::{
    simulate_session, simulate_sync_imus, ClockSpec, DepthConfig, ImuSetup, OffsetSource,
    PhoneConfig, SessionConfig, TwistConfig,
};
