use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

use super::{Provenance, WaveformChunk};

/// How the ADC's signal bits are spread over the measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdcSpan {
    /// Codes cover the full peak-to-peak swing of a full-scale RMS sinusoid
    /// (`rms * 2 * sqrt(2)`). This is the sound card line input.
    #[default]
    PeakToPeak,
    /// Codes cover `0..full_scale` only, as for a converter that spends one
    /// bit on the sign and quotes its range as an RMS figure.
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    pub effective_bits: u32,
    pub full_scale_voltage_rms: f64,
    pub full_scale_current_rms: f64,
    /// Clamp level as a fraction of full-scale peak.
    pub line_input_clip: f64,
    pub span: AdcSpan,
}

impl Default for AdcConfig {
    fn default() -> Self {
        Self {
            effective_bits: 15,
            full_scale_voltage_rms: 253.0,
            full_scale_current_rms: 30.0,
            line_input_clip: 1.0,
            span: AdcSpan::PeakToPeak,
        }
    }
}

impl AdcConfig {
    pub fn new(effective_bits: u32, full_scale_voltage_rms: f64, full_scale_current_rms: f64) -> Result<Self> {
        let cfg = Self {
            effective_bits,
            full_scale_voltage_rms,
            full_scale_current_rms,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_span(mut self, span: AdcSpan) -> Self {
        self.span = span;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(8..=24).contains(&self.effective_bits) {
            return Err(Error::invalid(format!(
                "effective bits must be in 8..=24, got {}",
                self.effective_bits
            )));
        }
        for (name, v) in [
            ("full-scale voltage", self.full_scale_voltage_rms),
            ("full-scale current", self.full_scale_current_rms),
            ("line input clip", self.line_input_clip),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn step_for(&self, full_scale_rms: f64) -> f64 {
        let span = match self.span {
            AdcSpan::PeakToPeak => full_scale_rms * 2.0 * SQRT_2,
            AdcSpan::Range => full_scale_rms,
        };
        span / 2f64.powi(self.effective_bits as i32)
    }

    /// Volts per ADC code.
    pub fn voltage_step(&self) -> f64 {
        self.step_for(self.full_scale_voltage_rms)
    }

    /// Amps per ADC code.
    pub fn current_step(&self) -> f64 {
        self.step_for(self.full_scale_current_rms)
    }

    /// Smallest resolvable change in power at a fixed `volts`.
    pub fn power_resolution_at(&self, volts: f64) -> f64 {
        self.current_step() * volts
    }

    fn voltage_limit(&self) -> f64 {
        self.full_scale_voltage_rms * SQRT_2 * self.line_input_clip
    }

    fn current_limit(&self) -> f64 {
        self.full_scale_current_rms * SQRT_2 * self.line_input_clip
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub chunk: WaveformChunk,
    /// Samples (voltage and current combined) that hit the clamp.
    pub clipped: usize,
}

fn quantize_channel(samples: &[f64], step: f64, limit: f64, clipped: &mut usize) -> Vec<f64> {
    samples
        .iter()
        .map(|&x| {
            let x = if x.abs() > limit {
                *clipped += 1;
                limit.copysign(x)
            } else {
                x
            };
            (x / step).round() * step
        })
        .collect()
}

/// Round every sample onto the ADC grid, saturating beyond full scale.
pub fn quantize(chunk: &WaveformChunk, cfg: &AdcConfig) -> Result<Quantized> {
    cfg.validate()?;
    let mut clipped = 0;
    let voltage = quantize_channel(&chunk.voltage, cfg.voltage_step(), cfg.voltage_limit(), &mut clipped);
    let current = quantize_channel(&chunk.current, cfg.current_step(), cfg.current_limit(), &mut clipped);
    Ok(Quantized {
        chunk: WaveformChunk {
            start_us: chunk.start_us,
            sample_rate: chunk.sample_rate,
            voltage,
            current,
            provenance: Provenance::Quantized,
        },
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powercalc::{compute_metrics, synth_waveform, Harmonic, SynthParams};

    #[test]
    fn sound_card_current_step() {
        let cfg = AdcConfig::default();
        // 30 A rms -> ~85 A peak-to-peak over 2^15 codes.
        assert!((cfg.current_step() - 30.0 * 2.0 * SQRT_2 / 32768.0).abs() < 1e-15);
        assert!((cfg.current_step() - 0.00259).abs() < 1e-5);
    }

    #[test]
    fn sound_card_voltage_step() {
        let cfg = AdcConfig::default();
        assert!((cfg.voltage_step() - 0.02184).abs() < 1e-4);
    }

    #[test]
    fn nine_bit_range_resolution() {
        let cfg = AdcConfig::new(9, 253.0, 30.0).unwrap().with_span(AdcSpan::Range);
        assert!((cfg.current_step() - 30.0 / 512.0).abs() < 1e-15);
        assert!((cfg.power_resolution_at(230.0) - 13.48).abs() < 0.01);
    }

    #[test]
    fn rejects_out_of_range_bits() {
        assert!(AdcConfig::new(7, 253.0, 30.0).is_err());
        assert!(AdcConfig::new(25, 253.0, 30.0).is_err());
        assert!(AdcConfig::new(16, 0.0, 30.0).is_err());
    }

    #[test]
    fn values_land_on_grid() {
        let cfg = AdcConfig::default();
        let chunk = synth_waveform(
            &SynthParams::new(50.0, 0.1, 16_000, 230.0).with_current(Harmonic::new(1, 7.3, -0.2)),
        )
        .unwrap();
        let q = quantize(&chunk, &cfg).unwrap();
        assert_eq!(q.clipped, 0);
        for (&raw, &qi) in chunk.current.iter().zip(&q.chunk.current) {
            let codes = qi / cfg.current_step();
            assert!((codes - codes.round()).abs() < 1e-6);
            assert!((raw - qi).abs() <= cfg.current_step() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn overload_clips_and_counts() {
        let cfg = AdcConfig::default();
        let chunk = synth_waveform(
            &SynthParams::new(50.0, 0.02, 16_000, 230.0).with_current(Harmonic::new(1, 31.0, 0.0)),
        )
        .unwrap();
        let q = quantize(&chunk, &cfg).unwrap();
        assert!(q.clipped > 0);
        let limit = 30.0 * SQRT_2;
        assert!(q.chunk.current.iter().all(|i| i.abs() <= limit + cfg.current_step()));
    }

    #[test]
    fn quantized_power_within_resolution() {
        let cfg = AdcConfig::default();
        for (amps, phase) in [(0.3, 0.0), (4.0, -0.4), (12.5, -1.0)] {
            let chunk = synth_waveform(
                &SynthParams::new(50.0, 1.0, 16_000, 240.0)
                    .with_current(Harmonic::new(1, amps, phase))
                    .with_current(Harmonic::new(3, amps * 0.2, 0.3)),
            )
            .unwrap();
            let raw = compute_metrics(&chunk, 1.0).unwrap()[0];
            let q = compute_metrics(&quantize(&chunk, &cfg).unwrap().chunk, 1.0).unwrap()[0];
            assert!((raw.active_power - q.active_power).abs() < 0.150);
            assert!((raw.apparent_power - q.apparent_power).abs() < 0.150);
        }
    }
}
