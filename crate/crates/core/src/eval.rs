//! Strobe-band measurement pipeline: turn per-row intensity profiles into
//! sync precision (IQR/SD in microseconds) and drift (microseconds per
//! minute) reports.
//!
//! Per trial: average the frame profiles, Gaussian-smooth, detect band
//! peaks, refine them to fractional rows, then convert row statistics to
//! time through the measured row-readout scale.

use serde::{Deserialize, Serialize};

use crate::clock::Nanos;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::parabola_vertex;
use crate::sim::RowIntensityProfile;
use crate::util::compensated_sum;

/// Knobs of the measurement pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Gaussian kernel size in rows, odd.
    pub kernel_rows: usize,
    /// Peak threshold as a fraction of the profile maximum.
    pub min_height: f64,
    /// Minimum row separation between detected peaks.
    pub min_separation_rows: usize,
    /// 1-based index of the tracked strobe band, counted from the first
    /// visible one.
    pub strobe_index: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            kernel_rows: 7,
            min_height: 0.5,
            min_separation_rows: 78,
            strobe_index: 4,
        }
    }
}

/// Detected band peaks of one trial, rows strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub rows: Vec<f64>,
    pub heights: Vec<f64>,
    pub kernel_rows: usize,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Element-wise mean of equally sized profiles. Frame index and start are
/// taken from the first profile.
pub fn average_profiles<F: Real>(
    profiles: &[RowIntensityProfile<F>],
) -> Result<RowIntensityProfile<F>> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::argument("cannot average zero profiles"))?;
    let rows = first.rows();
    for p in profiles {
        if p.rows() != rows {
            return Err(Error::argument(format!(
                "profile row counts differ: {} vs {}",
                p.rows(),
                rows
            )));
        }
    }
    let scale = F::one() / F::of_usize(profiles.len());
    let mut intensities = vec![F::zero(); rows];
    for p in profiles {
        for (acc, v) in intensities.iter_mut().zip(&p.intensities) {
            *acc += *v;
        }
    }
    for v in &mut intensities {
        *v *= scale;
    }
    Ok(RowIntensityProfile {
        frame_index: first.frame_index,
        frame_start: first.frame_start,
        intensities,
    })
}

/// Convolve with a normalized Gaussian window (`sigma = kernel_rows / 4`)
/// truncated to `kernel_rows` taps, mirrored at the boundaries so the total
/// intensity is conserved.
pub fn gaussian_smooth<F: Real>(values: &[F], kernel_rows: usize) -> Result<Vec<F>> {
    if kernel_rows.is_multiple_of(2) {
        return Err(Error::argument(format!(
            "kernel size {kernel_rows} must be odd"
        )));
    }
    if kernel_rows < 1 || kernel_rows >= values.len() {
        return Err(Error::argument(format!(
            "kernel size {kernel_rows} outside 1..{}",
            values.len()
        )));
    }
    if kernel_rows == 1 {
        return Ok(values.to_vec());
    }
    let half = (kernel_rows / 2) as i64;
    let sigma = kernel_rows as f64 / 4.0;
    let mut taps: Vec<F> = (-half..=half)
        .map(|j| F::of_f64((-((j * j) as f64) / (2.0 * sigma * sigma)).exp()))
        .collect();
    let norm = taps.iter().fold(F::zero(), |acc, &t| acc + t);
    for t in &mut taps {
        *t /= norm;
    }

    let n = values.len() as i64;
    let mirror = |idx: i64| -> usize {
        // half-sample symmetric: -1 -> 0, -2 -> 1, n -> n-1, ...
        let m = if idx < 0 {
            -idx - 1
        } else if idx >= n {
            2 * n - 1 - idx
        } else {
            idx
        };
        m.clamp(0, n - 1) as usize
    };
    let out = (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .fold(F::zero(), |acc, (k, &w)| {
                    acc + w * values[mirror(i + k as i64 - half)]
                })
        })
        .collect();
    Ok(out)
}

/// Local maxima above `min_height * max`, separated by at least
/// `min_separation_rows`, each refined to a fractional row by a three-point
/// parabola. `kernel_rows` records the smoothing the caller applied.
pub fn detect_peaks<F: Real>(
    values: &[F],
    min_height: f64,
    min_separation_rows: usize,
    kernel_rows: usize,
) -> Result<PeakSet> {
    let n = values.len();
    if n < 3 {
        return Err(Error::argument("profile too short for peak detection"));
    }
    let max = values.iter().cloned().fold(F::neg_infinity(), F::max);
    let min = values.iter().cloned().fold(F::infinity(), F::min);
    if max == min {
        return Err(Error::DegenerateSignal("constant profile has no peaks".to_string()));
    }
    let threshold = max.as_f64() * min_height;

    // plateau-aware local maxima
    let mut candidates: Vec<(usize, F)> = Vec::new();
    let mut i = 1usize;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] && values[i].as_f64() >= threshold {
                candidates.push(((i + j) / 2, values[i]));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    // enforce separation, highest peaks win
    let mut by_height = candidates.clone();
    by_height.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept: Vec<(usize, F)> = Vec::new();
    for (idx, height) in by_height {
        if kept
            .iter()
            .all(|(k, _)| idx.abs_diff(*k) >= min_separation_rows.max(1))
        {
            kept.push((idx, height));
        }
    }
    kept.sort_by_key(|(idx, _)| *idx);

    let mut rows = Vec::with_capacity(kept.len());
    let mut heights = Vec::with_capacity(kept.len());
    for (idx, height) in kept {
        let row = if idx > 0 && idx + 1 < n {
            idx as f64 + parabola_vertex(values[idx - 1], values[idx], values[idx + 1]).as_f64()
        } else {
            idx as f64
        };
        rows.push(row);
        heights.push(height.as_f64());
    }
    Ok(PeakSet {
        rows,
        heights,
        kernel_rows,
    })
}

/// Row-to-time scale from the mean spacing of neighbouring strobe bands:
/// `strobe_interval / mean(consecutive peak-row differences)`, ns per row.
pub fn row_time_scale(peaks: &PeakSet, strobe_interval_ns: Nanos) -> Result<f64> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientPeaks {
            found: peaks.len(),
            needed: 2,
        });
    }
    let diffs: Vec<f64> = peaks.rows.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = compensated_sum(diffs.iter().copied()) / diffs.len() as f64;
    if mean <= 0.0 {
        return Err(Error::argument("peak rows are not increasing"));
    }
    Ok(strobe_interval_ns as f64 / mean)
}

/// Fractional row of the k-th enumerated band per trial (1-based `k`,
/// counted from the first visible strobe). Trials with fewer peaks are
/// flagged `None` rather than failing the whole experiment.
pub fn track_strobe_row(trials: &[PeakSet], strobe_index: usize) -> Vec<Option<f64>> {
    trials
        .iter()
        .map(|peaks| {
            if strobe_index == 0 {
                None
            } else {
                peaks.rows.get(strobe_index - 1).copied()
            }
        })
        .collect()
}

/// Inter-launch precision: IQR and population SD of per-trial rows,
/// converted to microseconds through the row-time scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub rows: Vec<f64>,
    pub iqr_us: f64,
    pub sd_us: f64,
    pub row_time_scale_ns: f64,
}

/// Linearly interpolated quantile of sorted data (the order-statistic
/// convention where `h = (n-1) p`).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn precision_stats(rows: &[f64], scale_ns_per_row: f64) -> Result<PrecisionReport> {
    if rows.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} valid trials, need at least 4",
            rows.len()
        )));
    }
    if scale_ns_per_row.is_nan() || scale_ns_per_row <= 0.0 {
        return Err(Error::argument("row-time scale must be positive"));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let iqr_rows = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    let n = rows.len() as f64;
    let mean = compensated_sum(rows.iter().copied()) / n;
    let var = compensated_sum(rows.iter().map(|r| (r - mean) * (r - mean))) / n;
    let sd_rows = var.sqrt();

    Ok(PrecisionReport {
        rows: rows.to_vec(),
        iqr_us: iqr_rows * scale_ns_per_row / 1_000.0,
        sd_us: sd_rows * scale_ns_per_row / 1_000.0,
        row_time_scale_ns: scale_ns_per_row,
    })
}

/// Alignment drift over a recording: OLS slope of band row versus frame
/// timestamp, converted to microseconds per minute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub slope_us_per_min: f64,
    pub intercept_row: f64,
    pub residual_sd_rows: f64,
    pub pair_count: usize,
}

/// Ordinary least squares on `(timestamp_ns, fractional row)` pairs.
pub fn drift_fit(pairs: &[(i64, f64)], scale_ns_per_row: f64) -> Result<DriftReport> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} pairs, need at least 2",
            pairs.len()
        )));
    }
    if scale_ns_per_row.is_nan() || scale_ns_per_row <= 0.0 {
        return Err(Error::argument("row-time scale must be positive"));
    }
    let n = pairs.len() as f64;
    let mean_t = compensated_sum(pairs.iter().map(|(t, _)| *t as f64)) / n;
    let mean_r = compensated_sum(pairs.iter().map(|(_, r)| *r)) / n;
    let sxx = compensated_sum(pairs.iter().map(|(t, _)| {
        let d = *t as f64 - mean_t;
        d * d
    }));
    if sxx == 0.0 {
        return Err(Error::argument("all timestamps are equal, slope undefined"));
    }
    let sxy = compensated_sum(
        pairs
            .iter()
            .map(|(t, r)| (*t as f64 - mean_t) * (r - mean_r)),
    );
    let slope_rows_per_ns = sxy / sxx;
    let intercept_row = mean_r - slope_rows_per_ns * mean_t;

    let res_var = compensated_sum(pairs.iter().map(|(t, r)| {
        let fit = intercept_row + slope_rows_per_ns * *t as f64;
        (r - fit) * (r - fit)
    })) / n;

    // rows/ns -> dimensionless drift -> us per minute
    let slope_us_per_min = slope_rows_per_ns * scale_ns_per_row * 6.0e7;
    Ok(DriftReport {
        slope_us_per_min,
        intercept_row,
        residual_sd_rows: res_var.sqrt(),
        pair_count: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::TimeInstant;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn profile(values: Vec<f64>) -> RowIntensityProfile<f64> {
        RowIntensityProfile {
            frame_index: 0,
            frame_start: TimeInstant::from_nanos(0),
            intensities: values,
        }
    }

    /// Triangular band of the given half-width centered at `center`.
    fn band_profile(rows: usize, center: f64, half_width: f64) -> Vec<f64> {
        (0..rows)
            .map(|r| (1.0 - (r as f64 - center).abs() / half_width).max(0.0))
            .collect()
    }

    #[test]
    fn averaging_single_profile_is_identity() {
        let p = profile(vec![1.0, 2.0, 3.0]);
        assert_eq!(average_profiles(std::slice::from_ref(&p)).unwrap(), p);
    }

    #[test]
    fn averaging_with_zero_profile_halves() {
        let p = profile(vec![2.0, 4.0]);
        let z = profile(vec![0.0, 0.0]);
        assert_eq!(
            average_profiles(&[p, z]).unwrap().intensities,
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn averaging_rejects_mismatched_lengths() {
        let p = profile(vec![1.0, 2.0]);
        let q = profile(vec![1.0]);
        assert!(average_profiles(&[p, q]).is_err());
        assert!(average_profiles::<f64>(&[]).is_err());
    }

    #[test]
    fn averaging_sixteen_profiles_shrinks_noise_by_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = Normal::new(0.0, 0.1).unwrap();
        let rows = 4000usize;
        let trials: Vec<RowIntensityProfile<f64>> = (0..16)
            .map(|_| profile((0..rows).map(|_| 0.5 + normal.sample(&mut rng)).collect()))
            .collect();
        let avg = average_profiles(&trials).unwrap();
        let mean = avg.intensities.iter().sum::<f64>() / rows as f64;
        let var = avg
            .intensities
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / rows as f64;
        let sd = var.sqrt();
        let expected = 0.1 / 4.0;
        assert!(
            (sd - expected).abs() < 0.2 * expected,
            "averaged sd {sd} vs {expected}"
        );
    }

    #[test]
    fn unit_kernel_is_identity() {
        let v = vec![1.0, 5.0, 2.0, 8.0];
        assert_eq!(gaussian_smooth(&v, 1).unwrap(), v);
        assert!(gaussian_smooth(&v, 2).is_err());
        assert!(gaussian_smooth(&v, 5).is_err());
    }

    #[test]
    fn smoothing_keeps_a_symmetric_band_centered() {
        let values = band_profile(1080, 540.0, 6.0);
        let smoothed = gaussian_smooth(&values, 7).unwrap();
        let argmax = smoothed
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 540);
    }

    #[test]
    fn impulse_response_is_the_kernel() {
        let mut values = vec![0.0; 201];
        values[100] = 1.0;
        let smoothed = gaussian_smooth(&values, 7).unwrap();
        let sum: f64 = smoothed.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        // direct convolution oracle
        let sigma = 7.0 / 4.0;
        let taps: Vec<f64> = (-3i64..=3).map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let norm: f64 = taps.iter().sum();
        for (j, tap) in taps.iter().enumerate() {
            assert_abs_diff_eq!(smoothed[97 + j], tap / norm, epsilon = 1e-12);
        }
        assert_eq!(smoothed[90], 0.0);
    }

    #[test]
    fn smoothing_conserves_mass_at_boundaries() {
        let mut values = vec![0.0; 50];
        values[0] = 1.0;
        values[49] = 2.5;
        values[7] = 0.3;
        let smoothed = gaussian_smooth(&values, 7).unwrap();
        let input: f64 = values.iter().sum();
        let output: f64 = smoothed.iter().sum();
        assert!(((output - input) / input).abs() < 1e-9);
    }

    #[test]
    fn single_band_yields_single_peak() {
        let values = gaussian_smooth(&band_profile(1080, 540.3, 6.0), 7).unwrap();
        let peaks = detect_peaks(&values, 0.5, 50, 7).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks.rows[0] - 540.3).abs() <= 0.5, "row {}", peaks.rows[0]);
    }

    #[test]
    fn seven_bands_are_all_found() {
        let mut values = vec![0.0; 1080];
        let truth: Vec<f64> = (0..7).map(|k| 69.4 + k as f64 * 156.86).collect();
        for &c in &truth {
            for (r, v) in band_profile(1080, c, 6.127).iter().enumerate() {
                values[r] += v;
            }
        }
        let smoothed = gaussian_smooth(&values, 7).unwrap();
        let peaks = detect_peaks(&smoothed, 0.5, 78, 7).unwrap();
        assert_eq!(peaks.len(), 7);
        for (found, expected) in peaks.rows.iter().zip(&truth) {
            assert!(
                (found - expected).abs() <= 0.5,
                "peak {found} vs {expected}"
            );
        }
    }

    #[test]
    fn threshold_above_max_gives_empty_peak_set() {
        let values = band_profile(100, 50.0, 5.0);
        let peaks = detect_peaks(&values, 1.01, 5, 1).unwrap();
        assert!(peaks.is_empty());
    }

    #[test]
    fn constant_profile_is_degenerate() {
        let values = vec![1.0; 100];
        assert!(matches!(
            detect_peaks(&values, 0.5, 5, 1),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn row_time_scale_from_three_peaks() {
        let peaks = PeakSet {
            rows: vec![100.0, 257.0, 414.0],
            heights: vec![1.0; 3],
            kernel_rows: 7,
        };
        let scale = row_time_scale(&peaks, 1_600_000).unwrap();
        assert_abs_diff_eq!(scale, 1_600_000.0 / 157.0, epsilon = 1e-9);
        assert!((scale - 10_200.0).abs() / 10_200.0 < 0.002);
    }

    #[test]
    fn row_time_scale_round_trips_the_configured_spacing() {
        let rows: Vec<f64> = (0..7).map(|k| 60.0 + k as f64 * 156.86).collect();
        let peaks = PeakSet { rows, heights: vec![1.0; 7], kernel_rows: 7 };
        let scale = row_time_scale(&peaks, 1_600_000).unwrap();
        assert!((scale - 10_200.0).abs() / 10_200.0 < 0.01);

        let two = PeakSet {
            rows: vec![10.0, 170.0],
            heights: vec![1.0; 2],
            kernel_rows: 7,
        };
        assert_abs_diff_eq!(
            row_time_scale(&two, 1_600_000).unwrap(),
            1_600_000.0 / 160.0,
            epsilon = 1e-12
        );

        let one = PeakSet { rows: vec![10.0], heights: vec![1.0], kernel_rows: 7 };
        assert!(matches!(
            row_time_scale(&one, 1_600_000),
            Err(Error::InsufficientPeaks { .. })
        ));
    }

    #[test]
    fn tracking_returns_identical_rows_for_identical_trials() {
        let peaks = PeakSet {
            rows: vec![100.0, 260.0, 420.0, 580.0],
            heights: vec![1.0; 4],
            kernel_rows: 7,
        };
        let rows = track_strobe_row(&[peaks.clone(), peaks.clone()], 4);
        assert_eq!(rows, vec![Some(580.0), Some(580.0)]);
    }

    #[test]
    fn tracking_flags_trials_missing_the_strobe() {
        let full = PeakSet {
            rows: vec![100.0, 260.0, 420.0, 580.0],
            heights: vec![1.0; 4],
            kernel_rows: 7,
        };
        let short = PeakSet {
            rows: vec![260.0, 420.0],
            heights: vec![1.0; 2],
            kernel_rows: 7,
        };
        let rows = track_strobe_row(&[full, short], 4);
        assert_eq!(rows[0], Some(580.0));
        assert_eq!(rows[1], None);
    }

    #[test]
    fn tracked_row_sd_matches_injected_clock_jitter() {
        // injected 61.6 us jitter should read back as ~6.04 rows of spread
        let sd_ns = 61_600.0;
        let scale = 10_200.0;
        let normal = Normal::new(0.0, sd_ns / scale).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let trials: Vec<PeakSet> = (0..400)
            .map(|_| {
                let jitter = normal.sample(&mut rng);
                PeakSet {
                    rows: (0..5).map(|k| 60.0 + jitter + k as f64 * 156.86).collect(),
                    heights: vec![1.0; 5],
                    kernel_rows: 7,
                }
            })
            .collect();
        let rows: Vec<f64> = track_strobe_row(&trials, 4)
            .into_iter()
            .flatten()
            .collect();
        let report = precision_stats(&rows, scale).unwrap();
        let sd_rows = report.sd_us * 1_000.0 / scale;
        assert!(
            (sd_rows - 6.04).abs() < 0.6,
            "row sd {sd_rows} vs expected 6.04"
        );
    }

    #[test]
    fn precision_of_constant_rows_is_zero() {
        let report = precision_stats(&[5.0; 8], 10_200.0).unwrap();
        assert_eq!(report.iqr_us, 0.0);
        assert_eq!(report.sd_us, 0.0);
    }

    #[test]
    fn precision_hand_computed_quartiles() {
        let report = precision_stats(&[0.0, 1.0, 2.0, 3.0], 10_200.0).unwrap();
        assert_abs_diff_eq!(report.iqr_us, 15.3, epsilon = 1e-9);
        assert_abs_diff_eq!(report.sd_us, 1.25f64.sqrt() * 10.2, epsilon = 1e-9);
        assert!(precision_stats(&[1.0, 2.0, 3.0], 10_200.0).is_err());
    }

    #[test]
    fn noiseless_line_recovers_the_constructed_slope() {
        // 0.0266993... rows/s on a 10 200 ns/row sensor is 16.34 us/min
        let scale = 10_200.0;
        let slope_rows_per_ns = 16.34 / (scale * 6.0e7);
        let pairs: Vec<(i64, f64)> = (0..2100)
            .map(|i| {
                let t = i * 200_000_000i64;
                (t, 540.0 + slope_rows_per_ns * t as f64)
            })
            .collect();
        let report = drift_fit(&pairs, scale).unwrap();
        assert!(
            ((report.slope_us_per_min - 16.34) / 16.34).abs() < 1e-9,
            "slope {}",
            report.slope_us_per_min
        );
        assert_abs_diff_eq!(report.intercept_row, 540.0, epsilon = 1e-6);
        assert!(report.residual_sd_rows < 1e-9);
    }

    #[test]
    fn constant_rows_have_zero_slope() {
        let pairs: Vec<(i64, f64)> = (0..100).map(|i| (i * 1_000_000, 42.0)).collect();
        let report = drift_fit(&pairs, 10_200.0).unwrap();
        assert_eq!(report.slope_us_per_min, 0.0);
        assert!(drift_fit(&[(5, 1.0), (5, 2.0)], 10_200.0).is_err());
    }

    #[test]
    fn noisy_slope_recovered_within_ten_percent() {
        // 2100 pairs over 7 simulated minutes, 2-row noise
        let scale = 10_200.0;
        let injected_us_per_min = 16.34;
        let slope_rows_per_ns = injected_us_per_min / (scale * 6.0e7);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<(i64, f64)> = (0..2100)
            .map(|i| {
                let t = i * 200_000_000i64;
                (t, 540.0 + slope_rows_per_ns * t as f64 + normal.sample(&mut rng))
            })
            .collect();
        let report = drift_fit(&pairs, scale).unwrap();
        assert!(
            ((report.slope_us_per_min - injected_us_per_min) / injected_us_per_min).abs() < 0.10,
            "slope {}",
            report.slope_us_per_min
        );
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.random_range(10..200);
            let pairs: Vec<(i64, f64)> = (0..n)
                .map(|i| {
                    (
                        i * 33_333_333 + rng.random_range(0..1000),
                        rng.random_range(-100.0..100.0),
                    )
                })
                .collect();
            // plain normal equations in extended precision via compensated sums
            let nf = pairs.len() as f64;
            let st: f64 = pairs.iter().map(|(t, _)| *t as f64).sum();
            let sr: f64 = pairs.iter().map(|(_, r)| *r).sum();
            let stt: f64 = pairs.iter().map(|(t, _)| (*t as f64).powi(2)).sum();
            let str_: f64 = pairs.iter().map(|(t, r)| *t as f64 * r).sum();
            let expected = (nf * str_ - st * sr) / (nf * stt - st * st);
            let report = drift_fit(&pairs, 10_200.0).unwrap();
            let got = report.slope_us_per_min / (10_200.0 * 6.0e7);
            let scale = expected.abs().max(1e-12);
            assert!(
                ((got - expected) / scale).abs() < 1e-6,
                "slope {got} vs oracle {expected}"
            );
        }
    }

    #[test]
    fn shift_equivariance_of_the_whole_pipeline() {
        let base = band_profile(1080, 400.0, 6.0);
        let shift = 37.0;
        let shifted = band_profile(1080, 400.0 + shift, 6.0);
        let peaks_a = detect_peaks(&gaussian_smooth(&base, 7).unwrap(), 0.5, 50, 7).unwrap();
        let peaks_b = detect_peaks(&gaussian_smooth(&shifted, 7).unwrap(), 0.5, 50, 7).unwrap();
        assert_eq!(peaks_a.len(), peaks_b.len());
        for (a, b) in peaks_a.rows.iter().zip(&peaks_b.rows) {
            assert_abs_diff_eq!(b - a, shift, epsilon = 1e-9);
        }
    }

    #[test]
    fn scale_covariance_multiplies_all_microsecond_outputs() {
        let peaks = PeakSet {
            rows: vec![100.0, 257.0, 414.0],
            heights: vec![1.0; 3],
            kernel_rows: 7,
        };
        let s1 = row_time_scale(&peaks, 1_600_000).unwrap();
        let s3 = row_time_scale(&peaks, 4_800_000).unwrap();
        assert_abs_diff_eq!(s3, 3.0 * s1, epsilon = 1e-9);
        let rows = [10.0, 11.0, 12.0, 14.0];
        let p1 = precision_stats(&rows, s1).unwrap();
        let p3 = precision_stats(&rows, s3).unwrap();
        assert_abs_diff_eq!(p3.iqr_us, 3.0 * p1.iqr_us, epsilon = 1e-12);
        assert_abs_diff_eq!(p3.sd_us, 3.0 * p1.sd_us, epsilon = 1e-12);
    }
}
