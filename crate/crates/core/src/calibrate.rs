//! Per-installation ADC conversion constants.
//!
//! ADC readings are expressed in ADC steps of a signed 32-bit sample, so a
//! normalised sample `x` in `[-1, 1)` corresponds to `x * 2^31` steps and
//! to `x * 2^31 * volts_per_adc_step` volts.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powercalc::{rms, Provenance, WaveformChunk};

/// ADC steps per unit of normalised sample value.
pub const STEPS_PER_UNIT: f64 = 2_147_483_648.0;

/// Reference power factor above which the sensor phase shift is estimated.
pub const PHASE_CALIBRATION_MIN_PF: f64 = 0.97;

const PHASE_SEARCH_LIMIT_DEG: f64 = 5.0;
const PHASE_SEARCH_STEP_DEG: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    pub volts_per_adc_step: f64,
    pub amps_per_adc_step: f64,
    /// Current lag behind voltage introduced by the sensors, radians.
    pub phase_difference: f64,
}

impl CalibrationConstants {
    pub fn new(volts_per_adc_step: f64, amps_per_adc_step: f64, phase_difference: f64) -> Result<Self> {
        let c = Self {
            volts_per_adc_step,
            amps_per_adc_step,
            phase_difference,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volts_per_adc_step.is_finite() && self.volts_per_adc_step > 0.0) {
            return Err(Error::invalid("volts_per_adc_step must be positive"));
        }
        if !(self.amps_per_adc_step.is_finite() && self.amps_per_adc_step > 0.0) {
            return Err(Error::invalid("amps_per_adc_step must be positive"));
        }
        if !(self.phase_difference.abs() < PI / 2.0) {
            return Err(Error::invalid("phase_difference must lie within (-pi/2, pi/2)"));
        }
        Ok(())
    }

    pub fn volts(&self, normalized: f64) -> f64 {
        normalized * self.volts_per_adc_step * STEPS_PER_UNIT
    }

    pub fn amps(&self, normalized: f64) -> f64 {
        normalized * self.amps_per_adc_step * STEPS_PER_UNIT
    }

    /// Convert a normalised chunk to physical units.
    pub fn apply(&self, chunk: &WaveformChunk) -> Result<WaveformChunk> {
        if chunk.provenance != Provenance::Normalized {
            return Err(Error::invalid("calibration applies only to normalised ADC data"));
        }
        WaveformChunk::new(
            chunk.start_us,
            chunk.sample_rate,
            chunk.voltage.iter().map(|&x| self.volts(x)).collect(),
            chunk.current.iter().map(|&x| self.amps(x)).collect(),
            Provenance::Physical,
        )
    }
}

/// One steady reading of the reference meter alongside the ADC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    /// RMS of the voltage channel, in ADC steps.
    pub adc_v_rms: f64,
    /// RMS of the current channel, in ADC steps.
    pub adc_i_rms: f64,
    pub ref_volts_rms: f64,
    pub ref_amps_rms: f64,
    pub ref_power_factor: f64,
}

impl ReferenceSample {
    /// Pair a normalised recording with what the reference meter displayed.
    pub fn from_normalized_chunk(
        chunk: &WaveformChunk,
        ref_volts_rms: f64,
        ref_amps_rms: f64,
        ref_power_factor: f64,
    ) -> Self {
        Self {
            adc_v_rms: rms(&chunk.voltage) * STEPS_PER_UNIT,
            adc_i_rms: rms(&chunk.current) * STEPS_PER_UNIT,
            ref_volts_rms,
            ref_amps_rms,
            ref_power_factor,
        }
    }
}

/// Least-squares gain through the origin: minimises `sum (ref - c * adc)^2`.
fn fit_gain(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (adc, reference)| {
        (n + adc * reference, d + adc * adc)
    });
    num / den
}

pub fn estimate_constants(samples: &[ReferenceSample]) -> Result<CalibrationConstants> {
    if samples.is_empty() {
        return Err(Error::invalid("at least one reference sample is required"));
    }
    for (k, s) in samples.iter().enumerate() {
        let values = [s.adc_v_rms, s.adc_i_rms, s.ref_volts_rms, s.ref_amps_rms];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("sample {k}: RMS values must be finite and non-negative")));
        }
        if !(0.0..=1.0).contains(&s.ref_power_factor) {
            return Err(Error::invalid(format!("sample {k}: power factor outside [0, 1]")));
        }
        if s.adc_v_rms == 0.0 || s.adc_i_rms == 0.0 {
            return Err(Error::DegenerateInput(format!("sample {k}: zero ADC RMS")));
        }
    }
    let volts = fit_gain(samples.iter().map(|s| (s.adc_v_rms, s.ref_volts_rms)));
    let amps = fit_gain(samples.iter().map(|s| (s.adc_i_rms, s.ref_amps_rms)));
    if volts <= 0.0 || amps <= 0.0 {
        return Err(Error::DegenerateInput("fitted constants are not positive".into()));
    }
    Ok(CalibrationConstants {
        volts_per_adc_step: volts,
        amps_per_adc_step: amps,
        phase_difference: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseEstimate {
    /// The reference load was not resistive enough to attribute any phase
    /// shift to the sensors.
    Skipped,
    /// Current lag behind voltage, radians.
    Estimated(f64),
}

/// Times (in samples) of upward zero crossings, linearly interpolated.
fn rising_crossings(x: &[f64]) -> Vec<f64> {
    x.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
        .map(|(k, w)| k as f64 + w[0] / (w[0] - w[1]))
        .collect()
}

fn spectrum(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Estimate the sensor-chain phase shift from a steady resistive-load
/// recording.
///
/// The voltage/current cross-correlation is evaluated at fractional lags from
/// the cross-spectrum over a whole number of mains cycles, searched on a
/// 0.01 degree grid over +/-5 degrees, and the peak refined with a parabola.
pub fn estimate_phase(chunk: &WaveformChunk, reference: &ReferenceSample) -> Result<PhaseEstimate> {
    let crossings = rising_crossings(&chunk.voltage);
    if crossings.len() < 2 {
        return Err(Error::invalid("chunk is shorter than one fundamental cycle"));
    }
    if reference.ref_power_factor <= PHASE_CALIBRATION_MIN_PF {
        return Ok(PhaseEstimate::Skipped);
    }
    let (first, last) = (crossings[0], crossings[crossings.len() - 1]);
    let cycles = (crossings.len() - 1) as f64;
    let samples_per_cycle = (last - first) / cycles;

    let lo = first.ceil() as usize;
    let hi = (lo as f64 + (cycles * samples_per_cycle).round()) as usize;
    let hi = hi.min(chunk.len());
    let voltage = &chunk.voltage[lo..hi];
    let current = &chunk.current[lo..hi];
    let n = voltage.len();

    let mut planner = FftPlanner::new();
    let v = spectrum(voltage, &mut planner);
    let i = spectrum(current, &mut planner);
    let cross: Vec<(usize, Complex<f64>)> = {
        let all: Vec<(usize, Complex<f64>)> = (1..=n / 2).map(|k| (k, v[k].conj() * i[k])).collect();
        let peak = all.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        all.into_iter().filter(|(_, c)| c.norm() > 1e-9 * peak).collect()
    };
    if cross.is_empty() {
        return Err(Error::DegenerateInput("no correlated signal between voltage and current".into()));
    }

    // Lag in samples for a phase angle at the fundamental.
    let lag_for = |theta: f64| theta / (2.0 * PI) * samples_per_cycle;
    let correlation = |theta: f64| -> f64 {
        let tau = lag_for(theta);
        cross
            .iter()
            .map(|&(k, c)| {
                let arg = 2.0 * PI * k as f64 * tau / n as f64;
                c.re * arg.cos() - c.im * arg.sin()
            })
            .sum()
    };

    let step = PHASE_SEARCH_STEP_DEG.to_radians();
    let points = (2.0 * PHASE_SEARCH_LIMIT_DEG / PHASE_SEARCH_STEP_DEG).round() as i64;
    let grid: Vec<(f64, f64)> = (0..=points)
        .map(|g| {
            let theta = (-PHASE_SEARCH_LIMIT_DEG).to_radians() + g as f64 * step;
            (theta, correlation(theta))
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(k, _)| k)
        .unwrap();

    let mut theta = grid[best].0;
    if best > 0 && best + 1 < grid.len() {
        let (y0, y1, y2) = (grid[best - 1].1, grid[best].1, grid[best + 1].1);
        let denom = y0 - 2.0 * y1 + y2;
        if denom.abs() > 0.0 {
            theta += 0.5 * (y0 - y2) / denom * step;
        }
    }
    Ok(PhaseEstimate::Estimated(theta))
}
