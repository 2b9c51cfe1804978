//! Scalar time series, uniform resampling, normalized cross-correlation and
//! sub-sample peak refinement.

use crate::clock::TimeInstant;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One scalar value per timestamp, timestamps strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Series<F> {
    pub timestamps: Vec<TimeInstant>,
    pub values: Vec<F>,
}

impl<F: Real> Series<F> {
    pub fn new(timestamps: Vec<TimeInstant>, values: Vec<F>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::argument(format!(
                "{} timestamps vs {} values",
                timestamps.len(),
                values.len()
            )));
        }
        for pair in timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::argument("timestamps must be strictly increasing"));
            }
        }
        Ok(Series { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniformly sampled series. The grid step is fractional nanoseconds so that
/// arbitrary rates are representable; the grid origin stays on the integer
/// time base.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformSeries<F> {
    pub start: TimeInstant,
    pub step_ns: f64,
    pub values: Vec<F>,
}

impl<F: Real> UniformSeries<F> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        1e9 / self.step_ns
    }

    /// Grid time of sample `k`, in fractional nanoseconds.
    pub fn time_at(&self, k: usize) -> f64 {
        self.start.nanos() as f64 + k as f64 * self.step_ns
    }
}

/// Linear interpolation of `series` onto a uniform grid starting at the
/// first timestamp with step `1/rate_hz`. The grid never extends past the
/// last sample.
pub fn resample_uniform<F: Real>(series: &Series<F>, rate_hz: f64) -> Result<UniformSeries<F>> {
    if series.len() < 2 {
        return Err(Error::argument("resampling needs at least two samples"));
    }
    if !rate_hz.is_finite() || rate_hz <= 0.0 {
        return Err(Error::argument(format!("rate {rate_hz} Hz must be positive")));
    }
    let step_ns = 1e9 / rate_hz;
    let t0 = series.timestamps[0].nanos();
    let span = (series.timestamps[series.len() - 1].nanos() - t0) as f64;
    // tiny slack so a grid point that lands exactly on the last sample stays in
    let count = ((span / step_ns) * (1.0 + 1e-12)).floor() as usize + 1;

    let mut values = Vec::with_capacity(count);
    let mut seg = 0usize;
    for k in 0..count {
        let target = t0 as f64 + k as f64 * step_ns;
        while seg + 2 < series.len() && (series.timestamps[seg + 1].nanos() as f64) < target {
            seg += 1;
        }
        let left_t = series.timestamps[seg].nanos() as f64;
        let right_t = series.timestamps[seg + 1].nanos() as f64;
        let alpha = ((target - left_t) / (right_t - left_t)).clamp(0.0, 1.0);
        let left = series.values[seg];
        let right = series.values[seg + 1];
        // grid points that land on a sample reproduce it exactly
        let value = if alpha == 0.0 {
            left
        } else if alpha == 1.0 {
            right
        } else {
            left + F::of_f64(alpha) * (right - left)
        };
        values.push(value);
    }
    Ok(UniformSeries {
        start: series.timestamps[0],
        step_ns,
        values,
    })
}

/// Normalized cross-correlation of `b` against `a` over all integer lags
/// with sufficient overlap.
///
/// Lag convention: the peak sits at lag `L` when `b` looks like `a` delayed
/// by `L` samples (`b[i] ~ a[i-L]`).
#[derive(Clone, Debug)]
pub struct Correlation<F> {
    pub lag_min: i64,
    pub curve: Vec<F>,
    pub peak_index: usize,
}

impl<F: Real> Correlation<F> {
    pub fn peak_lag(&self) -> i64 {
        self.lag_min + self.peak_index as i64
    }

    pub fn peak_value(&self) -> F {
        self.curve[self.peak_index]
    }

    /// Curve value at an absolute lag, if that lag was evaluated.
    pub fn value_at_lag(&self, lag: i64) -> Option<F> {
        let idx = lag.checked_sub(self.lag_min)?;
        if idx < 0 {
            return None;
        }
        self.curve.get(idx as usize).copied()
    }
}

const MIN_CORRELATION_SAMPLES: usize = 16;

pub fn cross_correlation_lag<F: Real>(
    a: &UniformSeries<F>,
    b: &UniformSeries<F>,
) -> Result<Correlation<F>> {
    if a.len() < MIN_CORRELATION_SAMPLES || b.len() < MIN_CORRELATION_SAMPLES {
        return Err(Error::argument(format!(
            "series too short for correlation: {} and {} samples, need {}",
            a.len(),
            b.len(),
            MIN_CORRELATION_SAMPLES
        )));
    }
    let rel = (a.step_ns - b.step_ns).abs() / a.step_ns.max(b.step_ns);
    if rel > 1e-9 {
        return Err(Error::argument(format!(
            "rate mismatch: steps {} ns vs {} ns",
            a.step_ns, b.step_ns
        )));
    }
    if !has_variation(&a.values) || !has_variation(&b.values) {
        return Err(Error::DegenerateSignal(
            "zero-variance series cannot be correlated".to_string(),
        ));
    }

    let na = a.len() as i64;
    let nb = b.len() as i64;
    let min_overlap = ((na.min(nb) + 1) / 2).max(2);

    // overlap(L) = min(nb, na + L) - max(0, L); solve overlap >= min_overlap
    let lag_min = min_overlap - na;
    let lag_max = nb - min_overlap;
    if lag_min > lag_max {
        return Err(Error::argument("no lag offers the required overlap"));
    }

    let mut curve = Vec::with_capacity((lag_max - lag_min + 1) as usize);
    let mut peak_index = 0usize;
    let mut peak_value = F::neg_infinity();
    for lag in lag_min..=lag_max {
        let i0 = 0.max(lag) as usize;
        let i1 = nb.min(na + lag) as usize;
        let value = window_correlation(&a.values, &b.values, lag, i0, i1);
        if value > peak_value {
            peak_value = value;
            peak_index = curve.len();
        }
        curve.push(value);
    }

    Ok(Correlation {
        lag_min,
        curve,
        peak_index,
    })
}

fn has_variation<F: Real>(values: &[F]) -> bool {
    values.windows(2).any(|w| w[1] != w[0])
}

/// Pearson correlation of `b[i0..i1]` against `a[i0-lag..i1-lag]`, zero-mean
/// and unit-variance over the overlap window. Returns 0 when either window
/// is flat.
fn window_correlation<F: Real>(a: &[F], b: &[F], lag: i64, i0: usize, i1: usize) -> F {
    let n = i1 - i0;
    let n_f = F::of_usize(n);
    let mut sum_a = F::zero();
    let mut sum_b = F::zero();
    for i in i0..i1 {
        sum_a += a[(i as i64 - lag) as usize];
        sum_b += b[i];
    }
    let mean_a = sum_a / n_f;
    let mean_b = sum_b / n_f;
    let mut cov = F::zero();
    let mut var_a = F::zero();
    let mut var_b = F::zero();
    for i in i0..i1 {
        let da = a[(i as i64 - lag) as usize] - mean_a;
        let db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    let denom = (var_a * var_b).sqrt();
    if denom > F::zero() && denom.is_finite() {
        (cov / denom).clamp(-F::one(), F::one())
    } else {
        F::zero()
    }
}

/// Vertex abscissa offset of the parabola through three equally spaced
/// points `(-1, y_minus)`, `(0, y_center)`, `(1, y_plus)`.
pub fn parabola_vertex<F: Real>(y_minus: F, y_center: F, y_plus: F) -> F {
    let denom = y_minus - y_center - y_center + y_plus;
    if denom.abs() <= F::epsilon() * (y_minus.abs() + y_center.abs() + y_plus.abs()) {
        return F::zero();
    }
    (y_minus - y_plus) / (F::of_f64(2.0) * denom)
}

/// Refine an interior curve peak to a fractional index with a three-point
/// parabola. The result stays within one sample of the integer peak.
pub fn refine_peak<F: Real>(curve: &[F], peak_index: usize) -> Result<f64> {
    if peak_index == 0 || peak_index + 1 >= curve.len() {
        return Err(Error::BoundaryPeak {
            index: peak_index,
            len: curve.len(),
        });
    }
    let delta = parabola_vertex(
        curve[peak_index - 1],
        curve[peak_index],
        curve[peak_index + 1],
    )
    .as_f64();
    Ok(peak_index as f64 + delta)
}
