use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::powercalc::{synth_waveform, Harmonic, SynthParams, WaveformChunk};

use super::Demand;

/// Deterministic supply voltage with a daily sag and recovery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageModel {
    pub mean_rms: f64,
    pub daily_swing: f64,
    /// UTC hour of the voltage peak.
    pub peak_hour: f64,
    pub frequency: f64,
}

impl Default for VoltageModel {
    fn default() -> Self {
        Self {
            mean_rms: 233.0,
            daily_swing: 3.0,
            peak_hour: 4.0,
            frequency: 50.0,
        }
    }
}

impl VoltageModel {
    pub fn rms_at(&self, t: f64) -> f64 {
        let day_phase = (t / 86_400.0 - self.peak_hour / 24.0).rem_euclid(1.0);
        self.mean_rms + self.daily_swing * (TAU * day_phase).cos()
    }
}

/// Voltage and current waveforms that reproduce a demand's mains active and
/// apparent power.
///
/// The current is a fundamental lagging the voltage by `acos(P/S)` plus a
/// third harmonic carrying `third_harmonic` of the fundamental's RMS. The
/// harmonic is reduced where the power factor leaves no room for it.
pub fn mains_waveform(
    demand: &Demand,
    voltage: &VoltageModel,
    start_us: i64,
    duration: f64,
    sample_rate: u32,
    third_harmonic: f64,
) -> Result<WaveformChunk> {
    if !(third_harmonic >= 0.0) {
        return Err(Error::invalid("harmonic fraction must be non-negative"));
    }
    let v = voltage.rms_at(start_us as f64 * 1e-6);
    let (p, s) = (demand.mains_active, demand.mains_apparent.max(demand.mains_active));
    let mut params = SynthParams::new(voltage.frequency, duration, sample_rate, v).starting_at(start_us);
    if s > 0.0 {
        let pf = p / s;
        // Need pf * sqrt(1 + h^2) <= 1 for a real phase angle.
        let h_max = if pf > 0.0 { (1.0 / (pf * pf) - 1.0).sqrt() } else { f64::INFINITY };
        let h = third_harmonic.min(h_max);
        let i1 = s / v / (1.0 + h * h).sqrt();
        let cos_phi = (p / (v * i1)).clamp(-1.0, 1.0);
        params = params.with_current(Harmonic::new(1, i1, -cos_phi.acos()));
        if h > 0.0 {
            params = params.with_current(Harmonic::new(3, h * i1, 0.0));
        }
    }
    synth_waveform(&params)
}
