//! On-disk recording bundle, trigger-to-frame association and timestamp
//! remapping into the common MCU domain.
//!
//! A bundle is a directory: `manifest.json` plus one CSV per stream and one
//! row-profile file per rendered frame (or a packed little-endian f32
//! matrix with a JSON sidecar). Integers round-trip bit-exactly; reals are
//! written in shortest scientific notation, which also round-trips.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clock::{Nanos, TimeInstant};
use crate::error::{Error, Result};
use crate::frame::PhaseCorrection;
use crate::gyro::ImuSequence;
use crate::scalar::Real;
use crate::sim::{RowIntensityProfile, SessionConfig};

pub const BUNDLE_VERSION: &str = "sds-bundle/1";

const IMU_HEADER: &str = "timestamp_ns,wx,wy,wz,ax,ay,az";
const TRIGGER_HEADER: &str = "trigger_index,timestamp_ns";
const DEPTH_HEADER: &str = "frame_index,timestamp_ns";
const PROFILE_HEADER: &str = "frame_index,frame_start_ns";

/// Sync metadata of one session: configuration echo plus everything the
/// alignment steps produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub version: String,
    pub seed: u64,
    pub config: SessionConfig,
    /// Reported first-frame midpoint, smartphone domain.
    pub t_s0_s_ns: i64,
    /// First trigger timestamp, MCU domain.
    pub t_d0_m_ns: i64,
    /// Smartphone-to-MCU offset used for the alignment step.
    pub offset_used_ns: f64,
    pub offset_source: String,
    pub peak_correlation: Option<f64>,
    pub phase: PhaseCorrection,
}

/// All streams of one recording session.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordingBundle<F> {
    pub info: SessionInfo,
    pub mcu_imu: ImuSequence<F>,
    pub phone_imu: ImuSequence<F>,
    /// `(trigger_index, timestamp)` in the MCU domain.
    pub triggers: Vec<(u64, TimeInstant)>,
    /// `(frame_index, timestamp)` in the depth camera's own domain.
    pub depth_frames: Vec<(u64, TimeInstant)>,
    pub profiles: Vec<RowIntensityProfile<F>>,
}

/// Storage layout of the row profiles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileFormat {
    /// One text file per frame.
    Csv,
    /// One little-endian 32-bit-real matrix plus a JSON sidecar.
    Packed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StreamMeta {
    file: String,
    rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ProfilesMeta {
    format: ProfileFormat,
    path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sidecar: Option<String>,
    count: usize,
    rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StreamIndex {
    mcu_imu: StreamMeta,
    phone_imu: StreamMeta,
    triggers: StreamMeta,
    depth_frames: StreamMeta,
    profiles: ProfilesMeta,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    info: SessionInfo,
    streams: StreamIndex,
}

#[derive(Serialize, Deserialize)]
struct PackedSidecar {
    frames: usize,
    rows: usize,
    frame_indices: Vec<u64>,
    frame_starts_ns: Vec<i64>,
}

fn parse_err(path: &Path, line: usize, what: &str) -> Error {
    Error::format(format!("{}:{}: {}", path.display(), line + 1, what))
}

/// Write an IMU stream in the bundle CSV format.
pub fn write_imu_csv<F: Real>(path: &Path, imu: &ImuSequence<F>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{IMU_HEADER}")?;
    for (i, ts) in imu.timestamps.iter().enumerate() {
        let g = imu.angular_velocity[i];
        let a = imu
            .acceleration
            .as_ref()
            .map(|acc| acc[i])
            .unwrap_or([F::zero(); 3]);
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            ts.nanos(),
            g[0],
            g[1],
            g[2],
            a[0],
            a[1],
            a[2]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read an IMU stream written by [`write_imu_csv`].
pub fn read_imu_csv<F: Real>(path: &Path) -> Result<ImuSequence<F>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut timestamps = Vec::new();
    let mut gyro = Vec::new();
    let mut accel = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != IMU_HEADER {
                return Err(parse_err(path, 0, "expected IMU header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(path, i, "expected 7 fields"));
        }
        let ts: i64 = fields[0]
            .parse()
            .map_err(|_| parse_err(path, i, "bad timestamp"))?;
        let mut vals = [F::zero(); 6];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = fields[j + 1]
                .parse::<F>()
                .map_err(|_| parse_err(path, i, "bad real value"))?;
        }
        timestamps.push(TimeInstant::from_nanos(ts));
        gyro.push([vals[0], vals[1], vals[2]]);
        accel.push([vals[3], vals[4], vals[5]]);
    }
    ImuSequence::new(timestamps, gyro, Some(accel))
}

fn write_indexed_csv(path: &Path, header: &str, rows: &[(u64, TimeInstant)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{header}")?;
    for (idx, ts) in rows {
        writeln!(w, "{},{}", idx, ts.nanos())?;
    }
    w.flush()?;
    Ok(())
}

fn read_indexed_csv(path: &Path, header: &str) -> Result<Vec<(u64, TimeInstant)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != header {
                return Err(parse_err(path, 0, "unexpected header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (idx, ts) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, i, "expected 2 fields"))?;
        rows.push((
            idx.parse().map_err(|_| parse_err(path, i, "bad index"))?,
            TimeInstant::from_nanos(
                ts.parse().map_err(|_| parse_err(path, i, "bad timestamp"))?,
            ),
        ));
    }
    Ok(rows)
}

fn profile_file_name(frame_index: u64) -> String {
    format!("frame_{frame_index:06}.csv")
}

fn write_profile_csv<F: Real>(path: &Path, profile: &RowIntensityProfile<F>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{PROFILE_HEADER}")?;
    writeln!(w, "{},{}", profile.frame_index, profile.frame_start.nanos())?;
    for v in &profile.intensities {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_profile_csv<F: Real>(path: &Path) -> Result<RowIntensityProfile<F>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "empty profile file"))?;
    if header?.trim() != PROFILE_HEADER {
        return Err(parse_err(path, 0, "expected profile header"));
    }
    let (_, id_line) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing frame identity line"))?;
    let id_line = id_line?;
    let (idx, start) = id_line
        .split_once(',')
        .ok_or_else(|| parse_err(path, 1, "expected 2 fields"))?;
    let frame_index = idx.parse().map_err(|_| parse_err(path, 1, "bad frame index"))?;
    let frame_start = TimeInstant::from_nanos(
        start.parse().map_err(|_| parse_err(path, 1, "bad frame start"))?,
    );
    let mut intensities = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        intensities.push(
            line.trim()
                .parse::<F>()
                .map_err(|_| parse_err(path, i, "bad intensity"))?,
        );
    }
    Ok(RowIntensityProfile {
        frame_index,
        frame_start,
        intensities,
    })
}

fn write_packed_profiles<F: Real>(
    bin_path: &Path,
    sidecar_path: &Path,
    profiles: &[RowIntensityProfile<F>],
    rows: usize,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(bin_path)?);
    for p in profiles {
        for v in &p.intensities {
            let bits = v.to_f32().unwrap_or(f32::NAN);
            w.write_all(&bits.to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = PackedSidecar {
        frames: profiles.len(),
        rows,
        frame_indices: profiles.iter().map(|p| p.frame_index).collect(),
        frame_starts_ns: profiles.iter().map(|p| p.frame_start.nanos()).collect(),
    };
    let json = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| Error::format(format!("sidecar serialization: {e}")))?;
    fs::write(sidecar_path, json)?;
    Ok(())
}

fn read_packed_profiles<F: Real>(
    bin_path: &Path,
    sidecar_path: &Path,
) -> Result<Vec<RowIntensityProfile<F>>> {
    let sidecar: PackedSidecar = serde_json::from_slice(&fs::read(sidecar_path)?)
        .map_err(|e| Error::format(format!("{}: {e}", sidecar_path.display())))?;
    if sidecar.frame_indices.len() != sidecar.frames
        || sidecar.frame_starts_ns.len() != sidecar.frames
    {
        return Err(Error::format(format!(
            "{}: frame lists do not match the frame count",
            sidecar_path.display()
        )));
    }
    let mut data = Vec::new();
    fs::File::open(bin_path)?.read_to_end(&mut data)?;
    let expected = sidecar.frames * sidecar.rows * 4;
    if data.len() != expected {
        return Err(Error::format(format!(
            "{}: {} bytes, expected {expected}",
            bin_path.display(),
            data.len()
        )));
    }
    let mut profiles = Vec::with_capacity(sidecar.frames);
    for f in 0..sidecar.frames {
        let mut intensities = Vec::with_capacity(sidecar.rows);
        for r in 0..sidecar.rows {
            let at = (f * sidecar.rows + r) * 4;
            let bits = [data[at], data[at + 1], data[at + 2], data[at + 3]];
            intensities.push(F::of_f64(f32::from_le_bytes(bits) as f64));
        }
        profiles.push(RowIntensityProfile {
            frame_index: sidecar.frame_indices[f],
            frame_start: TimeInstant::from_nanos(sidecar.frame_starts_ns[f]),
            intensities,
        });
    }
    Ok(profiles)
}

/// Write a bundle into `dir` (created if missing).
pub fn write_bundle<F: Real>(
    bundle: &RecordingBundle<F>,
    dir: &Path,
    format: ProfileFormat,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let profile_rows = bundle.profiles.first().map(|p| p.rows()).unwrap_or(0);
    for p in &bundle.profiles {
        if p.rows() != profile_rows {
            return Err(Error::argument("profiles have inconsistent row counts"));
        }
    }

    write_imu_csv(&dir.join("mcu_imu.csv"), &bundle.mcu_imu)?;
    write_imu_csv(&dir.join("phone_imu.csv"), &bundle.phone_imu)?;
    write_indexed_csv(&dir.join("triggers.csv"), TRIGGER_HEADER, &bundle.triggers)?;
    write_indexed_csv(&dir.join("depth_frames.csv"), DEPTH_HEADER, &bundle.depth_frames)?;

    let profiles_meta = match format {
        ProfileFormat::Csv => {
            let subdir = dir.join("profiles");
            fs::create_dir_all(&subdir)?;
            for p in &bundle.profiles {
                write_profile_csv(&subdir.join(profile_file_name(p.frame_index)), p)?;
            }
            ProfilesMeta {
                format,
                path: "profiles".to_string(),
                sidecar: None,
                count: bundle.profiles.len(),
                rows: profile_rows,
            }
        }
        ProfileFormat::Packed => {
            write_packed_profiles(
                &dir.join("profiles.bin"),
                &dir.join("profiles.json"),
                &bundle.profiles,
                profile_rows,
            )?;
            ProfilesMeta {
                format,
                path: "profiles.bin".to_string(),
                sidecar: Some("profiles.json".to_string()),
                count: bundle.profiles.len(),
                rows: profile_rows,
            }
        }
    };

    let manifest = Manifest {
        info: bundle.info.clone(),
        streams: StreamIndex {
            mcu_imu: StreamMeta { file: "mcu_imu.csv".into(), rows: bundle.mcu_imu.len() },
            phone_imu: StreamMeta { file: "phone_imu.csv".into(), rows: bundle.phone_imu.len() },
            triggers: StreamMeta { file: "triggers.csv".into(), rows: bundle.triggers.len() },
            depth_frames: StreamMeta {
                file: "depth_frames.csv".into(),
                rows: bundle.depth_frames.len(),
            },
            profiles: profiles_meta,
        },
    };
    let json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| Error::format(format!("manifest serialization: {e}")))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Read a bundle directory, validating stream counts against the manifest.
pub fn read_bundle<F: Real>(dir: &Path) -> Result<RecordingBundle<F>> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)
        .map_err(|e| Error::format(format!("{}: {e}", manifest_path.display())))?;
    if manifest.info.version != BUNDLE_VERSION {
        return Err(Error::format(format!(
            "unsupported bundle version '{}', expected '{BUNDLE_VERSION}'",
            manifest.info.version
        )));
    }
    let streams = &manifest.streams;

    let mcu_imu = read_imu_csv(&dir.join(&streams.mcu_imu.file))?;
    let phone_imu = read_imu_csv(&dir.join(&streams.phone_imu.file))?;
    let triggers = read_indexed_csv(&dir.join(&streams.triggers.file), TRIGGER_HEADER)?;
    let depth_frames = read_indexed_csv(&dir.join(&streams.depth_frames.file), DEPTH_HEADER)?;

    let check = |name: &str, got: usize, want: usize| -> Result<()> {
        if got != want {
            return Err(Error::format(format!(
                "{name}: {got} rows on disk, manifest says {want}"
            )));
        }
        Ok(())
    };
    check("mcu_imu", mcu_imu.len(), streams.mcu_imu.rows)?;
    check("phone_imu", phone_imu.len(), streams.phone_imu.rows)?;
    check("triggers", triggers.len(), streams.triggers.rows)?;
    check("depth_frames", depth_frames.len(), streams.depth_frames.rows)?;
    for (name, stream) in [("triggers", &triggers), ("depth_frames", &depth_frames)] {
        if stream.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(Error::format(format!(
                "{name}: timestamps are not strictly increasing"
            )));
        }
    }

    let profiles: Vec<RowIntensityProfile<F>> = match streams.profiles.format {
        ProfileFormat::Csv => {
            let subdir = dir.join(&streams.profiles.path);
            let mut names: Vec<PathBuf> = fs::read_dir(&subdir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
                .collect();
            names.sort();
            names
                .iter()
                .map(|p| read_profile_csv(p))
                .collect::<Result<Vec<_>>>()?
        }
        ProfileFormat::Packed => {
            let sidecar = streams
                .profiles
                .sidecar
                .as_ref()
                .ok_or_else(|| Error::format("packed profiles need a sidecar"))?;
            read_packed_profiles(&dir.join(&streams.profiles.path), &dir.join(sidecar))?
        }
    };
    check("profiles", profiles.len(), streams.profiles.count)?;
    for p in &profiles {
        check("profile rows", p.rows(), streams.profiles.rows)?;
    }

    Ok(RecordingBundle {
        info: manifest.info,
        mcu_imu,
        phone_imu,
        triggers,
        depth_frames,
        profiles,
    })
}

/// Monotone pairing of trigger timestamps with delivered depth frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// `(trigger position, frame position)` pairs, both 0-based positions
    /// into the given lists.
    pub pairs: Vec<(usize, usize)>,
    /// Trigger positions that produced no delivered frame.
    pub dropped_triggers: Vec<usize>,
    /// Triggers after the last delivered frame.
    pub unmatched_triggers: usize,
}

/// Greedily associate triggers with depth frames. A gap of about `k`
/// periods in the frame-internal deltas (within a quarter period) advances
/// the trigger index by `k` and flags `k - 1` drops.
pub fn associate_triggers(
    triggers: &[TimeInstant],
    frames: &[TimeInstant],
    period_ns: Nanos,
) -> Result<Association> {
    if period_ns <= 0 {
        return Err(Error::argument("period must be positive"));
    }
    for list in [triggers, frames] {
        for pair in list.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::argument("timestamps must be strictly increasing"));
            }
        }
    }
    if frames.is_empty() {
        return Ok(Association {
            pairs: Vec::new(),
            dropped_triggers: Vec::new(),
            unmatched_triggers: triggers.len(),
        });
    }
    if triggers.is_empty() {
        return Err(Error::Association(
            "frames present but no triggers logged".to_string(),
        ));
    }

    let mut pairs = Vec::with_capacity(frames.len());
    let mut dropped = Vec::new();
    let mut trigger_at = 0usize;
    pairs.push((0usize, 0usize));
    for fi in 1..frames.len() {
        let delta = frames[fi] - frames[fi - 1];
        let k = ((delta as f64) / (period_ns as f64)).round() as i64;
        let deviation = delta - k * period_ns;
        if k < 1 || 4 * deviation.abs() > period_ns {
            return Err(Error::Association(format!(
                "frame {fi} delta {delta} ns is not near a multiple of the {period_ns} ns period"
            )));
        }
        let next = trigger_at + k as usize;
        if next >= triggers.len() {
            return Err(Error::Association(format!(
                "frame {fi} needs trigger {next} but only {} were logged",
                triggers.len()
            )));
        }
        dropped.extend(trigger_at + 1..next);
        pairs.push((next, fi));
        trigger_at = next;
    }
    Ok(Association {
        pairs,
        dropped_triggers: dropped,
        unmatched_triggers: triggers.len() - trigger_at - 1,
    })
}

/// Express every stream in the MCU domain: smartphone streams are shifted
/// by `-offset`, depth frames take their associated trigger timestamps,
/// MCU-native streams stay untouched.
pub fn remap_timestamps<F: Real>(
    bundle: &RecordingBundle<F>,
    offset_ns: f64,
) -> Result<RecordingBundle<F>> {
    if !offset_ns.is_finite() {
        return Err(Error::argument(format!("offset {offset_ns} ns is not finite")));
    }
    let trigger_ts: Vec<TimeInstant> = bundle.triggers.iter().map(|(_, t)| *t).collect();
    let frame_ts: Vec<TimeInstant> = bundle.depth_frames.iter().map(|(_, t)| *t).collect();
    let period = bundle.info.config.depth_period_ns()?;
    let association = associate_triggers(&trigger_ts, &frame_ts, period)?;

    let shift = offset_ns.round() as i64;
    let mut remapped = bundle.clone();
    for ts in &mut remapped.phone_imu.timestamps {
        *ts = *ts - shift;
    }
    for p in &mut remapped.profiles {
        p.frame_start = p.frame_start - shift;
    }
    for &(trigger_at, frame_at) in &association.pairs {
        remapped.depth_frames[frame_at].1 = trigger_ts[trigger_at];
    }
    Ok(remapped)
}

/// Write the remapped copies of the smartphone and depth streams next to
/// the originals. Returns the created file names.
pub fn write_remapped<F: Real>(dir: &Path, remapped: &RecordingBundle<F>) -> Result<Vec<String>> {
    let mut written = Vec::new();
    write_imu_csv(&dir.join("phone_imu.mcu.csv"), &remapped.phone_imu)?;
    written.push("phone_imu.mcu.csv".to_string());
    write_indexed_csv(
        &dir.join("depth_frames.mcu.csv"),
        DEPTH_HEADER,
        &remapped.depth_frames,
    )?;
    written.push("depth_frames.mcu.csv".to_string());
    let index: Vec<(u64, TimeInstant)> = remapped
        .profiles
        .iter()
        .map(|p| (p.frame_index, p.frame_start))
        .collect();
    write_indexed_csv(&dir.join("profiles_index.mcu.csv"), PROFILE_HEADER, &index)?;
    written.push("profiles_index.mcu.csv".to_string());
    Ok(written)
}
