//! Whole-experiment orchestration: time sync, phase correction, repeated
//! launches for precision statistics, a long session for drift, and the
//! extraction step, all against the simulator.

use serde::{Deserialize, Serialize};

use crate::bundle::{associate_triggers, remap_timestamps, RecordingBundle, BUNDLE_VERSION};
use crate::error::{Error, Result};
use crate::eval::{
    average_profiles, detect_peaks, drift_fit, gaussian_smooth, precision_stats, row_time_scale,
    track_strobe_row, DriftReport, EvalConfig, PeakSet, PrecisionReport,
};
use crate::frame::{fold_into_half_period, PhaseCorrection};
use crate::gyro::estimate_offset;
use crate::scalar::Real;
use crate::sim::{simulate_session, simulate_sync_imus, OffsetSource, RowIntensityProfile, SessionConfig};
use crate::util::{derive_rng, derive_seed, fnv1a64};

/// Configuration of a full pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Template for every simulated session of the run.
    pub session: SessionConfig,
    /// Number of short launches for the precision statistic.
    pub launches: u32,
    /// Frames averaged per launch.
    pub frames_per_launch: u32,
    /// Launch-to-launch alignment jitter injected as extra depth phase.
    pub launch_jitter_sd_ns: f64,
    /// Length of the drift recording.
    pub drift_duration_s: f64,
    /// Every n-th frame enters the drift regression.
    pub drift_stride: usize,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            session: SessionConfig::default(),
            launches: 52,
            frames_per_launch: 16,
            launch_jitter_sd_ns: 0.0,
            drift_duration_s: 420.0,
            drift_stride: 6,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    pub offset_ns: f64,
    pub source: String,
    pub peak_correlation: Option<f64>,
    pub grid_step_ns: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationSummary {
    pub pairs: usize,
    pub dropped_triggers: usize,
    pub unmatched_triggers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub bundle_version: String,
}

/// Everything a pipeline run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub offset: OffsetReport,
    pub phase: PhaseCorrection,
    /// Misalignment of the believed schedules after correction, MCU domain.
    pub believed_residual_ns: i64,
    pub association: AssociationSummary,
    pub precision: PrecisionReport,
    pub drift: DriftReport,
    pub provenance: Provenance,
}

/// Band peaks of one trial: average the trial's profiles, smooth, detect.
pub fn trial_peaks<F: Real>(
    profiles: &[RowIntensityProfile<F>],
    eval: &EvalConfig,
) -> Result<PeakSet> {
    let averaged = average_profiles(profiles)?;
    let smoothed = gaussian_smooth(&averaged.intensities, eval.kernel_rows)?;
    detect_peaks(
        &smoothed,
        eval.min_height,
        eval.min_separation_rows,
        eval.kernel_rows,
    )
}

/// Intensity of a fully captured strobe; frames whose maximum stays well
/// below this carry no band (slow depth rates) and are skipped.
const LIT_FRAME_THRESHOLD: f64 = 0.3;

/// `(frame timestamp, tracked band row)` pairs over a bundle's profiles,
/// one per lit frame.
pub fn drift_pairs<F: Real>(
    bundle: &RecordingBundle<F>,
    eval: &EvalConfig,
) -> Result<Vec<(i64, f64)>> {
    let mut pairs = Vec::with_capacity(bundle.profiles.len());
    for profile in &bundle.profiles {
        let max = profile
            .intensities
            .iter()
            .cloned()
            .fold(F::neg_infinity(), F::max)
            .as_f64();
        if max < LIT_FRAME_THRESHOLD {
            continue;
        }
        let smoothed = gaussian_smooth(&profile.intensities, eval.kernel_rows)?;
        let peaks = detect_peaks(
            &smoothed,
            eval.min_height,
            eval.min_separation_rows,
            eval.kernel_rows,
        )?;
        if let Some(Some(row)) = track_strobe_row(&[peaks], eval.strobe_index).first() {
            pairs.push((profile.frame_start.nanos(), *row));
        }
    }
    Ok(pairs)
}

fn hash_config(cfg: &PipelineConfig) -> String {
    let bytes = serde_json::to_vec(cfg).unwrap_or_default();
    format!("fnv1a64:{:016x}", fnv1a64(&bytes))
}

/// Run the five pipeline steps end to end against the simulator and emit
/// the full report. Deterministic for a fixed config.
pub fn run_pipeline<F: Real>(cfg: &PipelineConfig) -> Result<SyncReport> {
    if cfg.launches < 4 {
        return Err(Error::config("need at least 4 launches for precision statistics"));
    }
    if cfg.frames_per_launch == 0 || cfg.drift_stride == 0 {
        return Err(Error::config("frames per launch and drift stride must be positive"));
    }
    cfg.session.validate().map_err(Error::in_stage("config"))?;

    // time sync: one twist, one offset for the whole experiment
    let offset = resolve_offset::<F>(cfg).map_err(Error::in_stage("sync-offset"))?;

    // repeated short launches, each with its own phase correction
    let fps = cfg.session.phone.fps;
    let period_ns = cfg.session.phone.period_ns();
    let mut peak_sets: Vec<PeakSet> = Vec::with_capacity(cfg.launches as usize);
    let mut scale: Option<f64> = None;
    for launch in 0..cfg.launches {
        let mut session = cfg.session.clone();
        session.seed = derive_seed(cfg.seed, "launch", launch as u64);
        session.duration_s = f64::from(cfg.frames_per_launch) / fps;
        session.render_stride = 1;
        session.offset_source = OffsetSource::Manual { offset_ns: offset.offset_ns };
        // the phone restarts at an arbitrary point of the trigger period
        let mut rng = derive_rng(cfg.seed, "launch-start", launch as u64);
        use rand::Rng;
        session.phone.video_start_s += rng.random_range(0.0..period_ns as f64) * 1e-9;
        if cfg.launch_jitter_sd_ns > 0.0 {
            use rand_distr::Distribution;
            let normal = rand_distr::Normal::new(0.0, cfg.launch_jitter_sd_ns)
                .map_err(|e| Error::config(format!("bad launch jitter: {e}")))?;
            let mut jitter_rng = derive_rng(cfg.seed, "launch-misalignment", launch as u64);
            session.extra_phase_ns += normal.sample(&mut jitter_rng).round() as i64;
        }
        let bundle =
            simulate_session::<F>(&session).map_err(Error::in_stage("launch-simulation"))?;
        let peaks =
            trial_peaks(&bundle.profiles, &cfg.eval).map_err(Error::in_stage("launch-eval"))?;
        if scale.is_none() && peaks.len() >= 2 {
            scale = Some(
                row_time_scale(&peaks, cfg.session.depth.strobe.interval_ns)
                    .map_err(Error::in_stage("row-time-scale"))?,
            );
        }
        peak_sets.push(peaks);
    }
    let scale = scale.ok_or(Error::InsufficientPeaks { found: 1, needed: 2 })
        .map_err(Error::in_stage("row-time-scale"))?;
    let rows: Vec<f64> = track_strobe_row(&peak_sets, cfg.eval.strobe_index)
        .into_iter()
        .flatten()
        .collect();
    let precision = precision_stats(&rows, scale).map_err(Error::in_stage("precision"))?;

    // one long session for drift, then the extraction step on its bundle
    let mut drift_session = cfg.session.clone();
    drift_session.seed = derive_seed(cfg.seed, "drift-session", 0);
    drift_session.duration_s = cfg.drift_duration_s;
    drift_session.render_stride = cfg.drift_stride;
    drift_session.offset_source = OffsetSource::Manual { offset_ns: offset.offset_ns };
    let drift_bundle =
        simulate_session::<F>(&drift_session).map_err(Error::in_stage("drift-simulation"))?;
    let pairs = drift_pairs(&drift_bundle, &cfg.eval).map_err(Error::in_stage("drift-eval"))?;
    let drift = drift_fit(&pairs, scale).map_err(Error::in_stage("drift-fit"))?;

    let trigger_ts: Vec<_> = drift_bundle.triggers.iter().map(|(_, t)| *t).collect();
    let frame_ts: Vec<_> = drift_bundle.depth_frames.iter().map(|(_, t)| *t).collect();
    let depth_period_ns = drift_session.depth_period_ns()?;
    let association = associate_triggers(&trigger_ts, &frame_ts, depth_period_ns)
        .map_err(Error::in_stage("associate"))?;
    let _remapped = remap_timestamps(&drift_bundle, offset.offset_ns)
        .map_err(Error::in_stage("remap"))?;

    let info = &drift_bundle.info;
    let believed_residual_ns = fold_into_half_period(
        info.t_s0_s_ns
            - info.offset_used_ns.round() as i64
            - info.t_d0_m_ns
            - info.phase.applied_shift_ns(),
        period_ns.min(depth_period_ns),
    )
    .abs();

    Ok(SyncReport {
        offset,
        phase: info.phase,
        believed_residual_ns,
        association: AssociationSummary {
            pairs: association.pairs.len(),
            dropped_triggers: association.dropped_triggers.len(),
            unmatched_triggers: association.unmatched_triggers,
        },
        precision,
        drift,
        provenance: Provenance {
            config_hash: hash_config(cfg),
            seed: cfg.seed,
            bundle_version: BUNDLE_VERSION.to_string(),
        },
    })
}

fn resolve_offset<F: Real>(cfg: &PipelineConfig) -> Result<OffsetReport> {
    match cfg.session.offset_source {
        OffsetSource::Estimated => {
            let mut sync_session = cfg.session.clone();
            sync_session.seed = derive_seed(cfg.seed, "sync-session", 0);
            let (mcu_imu, phone_imu) = simulate_sync_imus::<F>(&sync_session)?;
            let est = estimate_offset(&mcu_imu, &phone_imu, cfg.session.imu.rate_hz)?;
            Ok(OffsetReport {
                offset_ns: est.offset_ns,
                source: "estimated".to_string(),
                peak_correlation: Some(est.peak_correlation),
                grid_step_ns: Some(est.grid_step_ns),
            })
        }
        OffsetSource::True => {
            let phone = cfg.session.phone.clock;
            let mcu = cfg.session.mcu_clock;
            let t = cfg.session.phone.video_start_s * 1e9;
            let offset_ns = (t * phone.skew + phone.offset_ns as f64)
                - (t * mcu.skew + mcu.offset_ns as f64);
            Ok(OffsetReport {
                offset_ns,
                source: "true".to_string(),
                peak_correlation: None,
                grid_step_ns: None,
            })
        }
        OffsetSource::Manual { offset_ns } => Ok(OffsetReport {
            offset_ns,
            source: "manual".to_string(),
            peak_correlation: None,
            grid_step_ns: None,
        }),
    }
}
