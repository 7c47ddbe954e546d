//! Waveform synthesis and reduction to 1 Hz power metrics.
//!
//! A [`WaveformChunk`] holds simultaneously sampled voltage and current
//! vectors. [`compute_metrics`] splits a chunk into fixed-duration windows
//! and reports, per window, apparent power `S = Vrms * Irms`, active power
//! `P = mean(v[i] * i[i])` and the RMS voltage.

mod quantize;
mod resample;

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use quantize::{quantize, AdcConfig, AdcSpan, Quantized};
pub use resample::downsample;

/// Where the sample values of a chunk came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Physical volts and amps, full floating-point precision.
    Physical,
    /// Physical units, rounded onto an ADC step grid.
    Quantized,
    /// Uncalibrated ADC values in `[-1, 1)`.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformChunk {
    /// Start of the first sample, microseconds since the Unix epoch.
    pub start_us: i64,
    pub sample_rate: u32,
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub provenance: Provenance,
}

impl WaveformChunk {
    pub fn new(
        start_us: i64,
        sample_rate: u32,
        voltage: Vec<f64>,
        current: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if voltage.is_empty() {
            return Err(Error::invalid("waveform chunk must hold at least one sample"));
        }
        if voltage.len() != current.len() {
            return Err(Error::invalid(format!(
                "voltage has {} samples but current has {}",
                voltage.len(),
                current.len()
            )));
        }
        if voltage.iter().chain(current.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("waveform samples must be finite"));
        }
        Ok(Self {
            start_us,
            sample_rate,
            voltage,
            current,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    pub fn start_seconds(&self) -> f64 {
        self.start_us as f64 * 1e-6
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn voltage_rms(&self) -> f64 {
        rms(&self.voltage)
    }

    pub fn current_rms(&self) -> f64 {
        rms(&self.current)
    }
}

/// One current component of a synthetic load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    /// Multiple of the fundamental, starting at 1.
    pub order: u32,
    pub amps_rms: f64,
    /// Phase relative to the voltage zero crossing, radians. Negative lags.
    pub phase: f64,
}

impl Harmonic {
    pub fn new(order: u32, amps_rms: f64, phase: f64) -> Self {
        Self {
            order,
            amps_rms,
            phase,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub fundamental_hz: f64,
    pub duration: f64,
    pub sample_rate: u32,
    pub v_rms: f64,
    pub current: Vec<Harmonic>,
    pub start_us: i64,
}

impl SynthParams {
    pub fn new(fundamental_hz: f64, duration: f64, sample_rate: u32, v_rms: f64) -> Self {
        Self {
            fundamental_hz,
            duration,
            sample_rate,
            v_rms,
            current: Vec::new(),
            start_us: 0,
        }
    }

    pub fn with_current(mut self, component: Harmonic) -> Self {
        self.current.push(component);
        self
    }

    pub fn starting_at(mut self, start_us: i64) -> Self {
        self.start_us = start_us;
        self
    }
}

/// Number of whole samples in `duration` seconds, rejecting fractional counts.
pub(crate) fn whole_sample_count(duration: f64, sample_rate: u32) -> Result<usize> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !duration.is_finite() || duration <= 0.0 {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    let exact = duration * sample_rate as f64;
    let n = exact.round();
    if (exact - n).abs() > 1e-6 * exact.max(1.0) {
        return Err(Error::invalid(format!(
            "{duration} s at {sample_rate} Hz is not a whole number of samples"
        )));
    }
    Ok(n as usize)
}

/// Pure sinusoidal voltage plus a sum of harmonic current sinusoids.
pub fn synth_waveform(params: &SynthParams) -> Result<WaveformChunk> {
    let n = whole_sample_count(params.duration, params.sample_rate)?;
    if n < 2 {
        return Err(Error::invalid("waveform needs at least two samples"));
    }
    if let Some(h) = params.current.iter().find(|h| h.order == 0) {
        return Err(Error::invalid(format!("harmonic order must be >= 1, got {}", h.order)));
    }
    let omega = 2.0 * PI * params.fundamental_hz;
    let dt = 1.0 / params.sample_rate as f64;
    let v_peak = params.v_rms * SQRT_2;

    let mut voltage = Vec::with_capacity(n);
    let mut current = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        voltage.push(v_peak * (omega * t).sin());
        current.push(
            params
                .current
                .iter()
                .map(|h| h.amps_rms * SQRT_2 * (h.order as f64 * omega * t + h.phase).sin())
                .sum(),
        );
    }
    WaveformChunk::new(
        params.start_us,
        params.sample_rate,
        voltage,
        current,
        Provenance::Physical,
    )
}

/// Per-window power figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMetrics {
    /// Window start, seconds since the Unix epoch.
    pub timestamp: f64,
    pub active_power: f64,
    pub apparent_power: f64,
    pub rms_voltage: f64,
}

impl PowerMetrics {
    pub fn power_factor(&self) -> Option<f64> {
        (self.apparent_power > 0.0).then(|| self.active_power / self.apparent_power)
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
}

fn window_metrics(timestamp: f64, voltage: &[f64], current: &[f64]) -> PowerMetrics {
    let n = voltage.len() as f64;
    let (mut vv, mut ii, mut vi) = (0.0, 0.0, 0.0);
    for (&v, &i) in voltage.iter().zip(current) {
        vv += v * v;
        ii += i * i;
        vi += v * i;
    }
    let v_rms = (vv / n).sqrt();
    let i_rms = (ii / n).sqrt();
    PowerMetrics {
        timestamp,
        active_power: vi / n,
        apparent_power: v_rms * i_rms,
        rms_voltage: v_rms,
    }
}

/// Reduce a chunk to one [`PowerMetrics`] per `chunk_period` seconds.
///
/// A trailing window shorter than `chunk_period` is dropped.
pub fn compute_metrics(chunk: &WaveformChunk, chunk_period: f64) -> Result<Vec<PowerMetrics>> {
    if chunk.is_empty() {
        return Err(Error::invalid("cannot compute metrics on an empty chunk"));
    }
    if !chunk_period.is_finite() || chunk_period <= 0.0 {
        return Err(Error::invalid(format!("chunk period must be positive, got {chunk_period}")));
    }
    let window = (chunk_period * chunk.sample_rate as f64).round() as usize;
    if window == 0 {
        return Err(Error::invalid(format!(
            "chunk period {chunk_period} s is shorter than one sample at {} Hz",
            chunk.sample_rate
        )));
    }
    let start = chunk.start_seconds();
    let period = window as f64 / chunk.sample_rate as f64;
    Ok(chunk
        .voltage
        .par_chunks_exact(window)
        .zip(chunk.current.par_chunks_exact(window))
        .enumerate()
        .map(|(k, (v, i))| window_metrics(start + k as f64 * period, v, i))
        .collect())
}

/// A whole-house current transformer transmitter: it sees only current and
/// multiplies by a hard-coded voltage, so it can only report apparent power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtClampMeter {
    pub assumed_voltage: f64,
}

impl Default for CtClampMeter {
    fn default() -> Self {
        Self {
            assumed_voltage: 230.0,
        }
    }
}

impl CtClampMeter {
    pub fn apparent_power(&self, current_rms: f64) -> f64 {
        current_rms * self.assumed_voltage
    }

    pub fn read(&self, chunk: &WaveformChunk) -> f64 {
        self.apparent_power(chunk.current_rms())
    }
}
