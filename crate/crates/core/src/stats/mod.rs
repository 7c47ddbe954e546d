//! Validation statistics over `(seconds, value)` series.
//!
//! Energy is integrated with a zero-order hold: each reading holds until
//! the next one.

mod report;

use crate::error::{Error, Result};

pub use report::{report, Histogram, ReportOptions, ValidationReport};

/// The two-minute rule: longer gaps are treated as the meter being off.
pub const LARGE_GAP_THRESHOLD: f64 = 120.0;
pub const CORRELATION_PERIOD: f64 = 60.0;

/// Fraction of expected readings that never arrived.
///
/// Each gap shorter than `large_gap_threshold` is expected to hold
/// `round(gap / expected_period)` reading intervals (at least one). Longer
/// gaps are deliberate outages and expect nothing.
pub fn dropout_rate(timestamps: &[f64], expected_period: f64, large_gap_threshold: f64) -> Result<f64> {
    if timestamps.len() < 2 {
        return Err(Error::InsufficientData("dropout rate needs at least two readings".into()));
    }
    if !(expected_period > 0.0) {
        return Err(Error::invalid("expected period must be positive"));
    }
    let (observed, expected) = dropout_counts(timestamps, expected_period, large_gap_threshold);
    Ok(1.0 - observed as f64 / expected as f64)
}

/// `(observed, expected)` reading counts behind [`dropout_rate`].
pub fn dropout_counts(timestamps: &[f64], expected_period: f64, large_gap_threshold: f64) -> (u64, u64) {
    let mut expected = timestamps.len().min(1) as u64;
    let mut observed = expected;
    for w in timestamps.windows(2) {
        let gap = w[1] - w[0];
        observed += 1;
        expected += if gap >= large_gap_threshold {
            1
        } else {
            ((gap / expected_period).round() as u64).max(1)
        };
    }
    (observed, expected)
}

/// Integral of a zero-order-hold series over `[t0, t1]`. The series must
/// have a reading at or before `t0`.
pub fn integrate(series: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    if t1 <= t0 || series.is_empty() {
        return 0.0;
    }
    let first = series.partition_point(|&(t, _)| t <= t0).saturating_sub(1);
    let mut acc = 0.0;
    for (k, &(t, v)) in series.iter().enumerate().skip(first) {
        if t >= t1 {
            break;
        }
        let next = series.get(k + 1).map_or(t1, |n| n.0.min(t1));
        let lo = t.max(t0);
        if next > lo {
            acc += v * (next - lo);
        }
    }
    acc
}

fn span(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    Some((series.first()?.0, series.last()?.0))
}

/// Submetered energy as a fraction of mains energy over the span of the
/// mains record. A submeter contributes nothing outside its own first and
/// last readings.
pub fn proportion_submetered(mains: &[(f64, f64)], submeters: &[&[(f64, f64)]]) -> Result<f64> {
    let (t0, t1) = span(mains).ok_or_else(|| Error::InsufficientData("mains series is empty".into()))?;
    if t1 <= t0 {
        return Err(Error::InsufficientData("mains series covers no time".into()));
    }
    let mains_energy = integrate(mains, t0, t1);
    if mains_energy <= 0.0 {
        return Err(Error::DegenerateInput("mains energy is zero".into()));
    }
    let sub: f64 = submeters
        .iter()
        .filter_map(|s| span(s).map(|(a, b)| integrate(s, a.max(t0), b.min(t1))))
        .sum();
    Ok(sub / mains_energy)
}

/// Mean of the readings falling in each `period`-long bin, keyed by
/// `floor(t / period)`.
pub fn bin_means(series: &[(f64, f64)], period: f64) -> Vec<(i64, f64)> {
    let mut out: Vec<(i64, f64)> = Vec::new();
    let mut count = 0usize;
    for &(t, v) in series {
        let bin = (t / period).floor() as i64;
        match out.last_mut() {
            Some((b, sum)) if *b == bin => {
                *sum += v;
                count += 1;
            }
            _ => {
                if let Some(last) = out.last_mut() {
                    last.1 /= count as f64;
                }
                out.push((bin, v));
                count = 1;
            }
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 /= count as f64;
    }
    out
}

/// Streaming Pearson correlation (co-moment update).
#[derive(Debug, Clone, Copy, Default)]
pub struct Pearson {
    n: f64,
    mean_x: f64,
    mean_y: f64,
    m2_x: f64,
    m2_y: f64,
    c_xy: f64,
}

impl Pearson {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        let dx = x - self.mean_x;
        self.mean_x += dx / self.n;
        let dy = y - self.mean_y;
        self.mean_y += dy / self.n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.c_xy += dx * (y - self.mean_y);
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    pub fn r(&self) -> Result<f64> {
        if self.n < 2.0 {
            return Err(Error::InsufficientData("correlation needs at least two samples".into()));
        }
        if self.m2_x <= 0.0 || self.m2_y <= 0.0 {
            return Err(Error::UndefinedCorrelation("one of the series is constant".into()));
        }
        Ok((self.c_xy / (self.m2_x * self.m2_y).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Pearson correlation between binned mains and the binned sum of submeters.
/// Only bins holding mains data count; a submeter with no reading in a bin
/// contributes zero to it.
pub fn mains_submeter_correlation(mains: &[(f64, f64)], submeters: &[&[(f64, f64)]], resample_period: f64) -> Result<f64> {
    if !(resample_period > 0.0) {
        return Err(Error::invalid("resample period must be positive"));
    }
    let mains_bins = bin_means(mains, resample_period);
    let mut sums = vec![0.0; mains_bins.len()];
    for s in submeters {
        for (bin, mean) in bin_means(s, resample_period) {
            if let Ok(k) = mains_bins.binary_search_by_key(&bin, |&(b, _)| b) {
                sums[k] += mean;
            }
        }
    }
    let mut p = Pearson::default();
    for ((_, m), s) in mains_bins.iter().zip(&sums) {
        p.push(*m, *s);
    }
    p.r()
}

/// Fill gaps wider than one cadence. Gaps longer than
/// `long_gap_threshold` get zeros, shorter ones repeat the previous value.
/// Inserted readings are spaced evenly so a second pass changes nothing.
pub fn gap_fill(series: &[(f64, f64)], cadence: f64, long_gap_threshold: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(series.len());
    for (k, &(t, v)) in series.iter().enumerate() {
        out.push((t, v));
        let Some(&(next, _)) = series.get(k + 1) else { break };
        let gap = next - t;
        let steps = (gap / cadence).round();
        if steps < 2.0 {
            continue;
        }
        let fill = if gap > long_gap_threshold { 0.0 } else { v };
        let step = gap / steps;
        for j in 1..steps as usize {
            out.push((t + step * j as f64, fill));
        }
    }
    out
}
