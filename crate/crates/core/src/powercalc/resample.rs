//! Band-limited sample-rate reduction.
//!
//! Each output sample is a Kaiser-windowed sinc interpolation of the input,
//! with the low-pass cutoff at 0.45 of the output rate. Weights are
//! renormalised per output sample so that the gain at DC is exactly one, which
//! also keeps the chunk edges (where the kernel is truncated) unbiased.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::WaveformChunk;

const CUTOFF_FRACTION: f64 = 0.45;
/// Sinc zero crossings on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;
/// Above this many distinct fractional phases, kernels are computed on the fly.
const MAX_PHASE_TABLE: u64 = 4096;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    /// Half-width in input samples.
    half_width: f64,
    taps_each_side: i64,
    i0_beta: f64,
}

impl Kernel {
    fn new(source_rate: u32, target_rate: u32) -> Self {
        let cutoff = CUTOFF_FRACTION * target_rate as f64 / source_rate as f64;
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        Self {
            cutoff,
            half_width,
            taps_each_side: half_width.ceil() as i64,
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    fn weight(&self, offset: f64) -> f64 {
        let r = offset / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let arg = 2.0 * PI * self.cutoff * offset;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        sinc * window
    }

    /// Weights for input indices `base - taps + 1 ..= base + taps` around the
    /// fractional position `base + frac`.
    fn weights(&self, frac: f64) -> Vec<f64> {
        (-self.taps_each_side + 1..=self.taps_each_side)
            .map(|j| self.weight(j as f64 - frac))
            .collect()
    }
}

fn interpolate(input: &[f64], base: i64, weights: &[f64], taps_each_side: i64) -> f64 {
    let first = base - taps_each_side + 1;
    let (mut acc, mut norm) = (0.0, 0.0);
    for (k, &w) in weights.iter().enumerate() {
        let idx = first + k as i64;
        if idx >= 0 && (idx as usize) < input.len() {
            acc += w * input[idx as usize];
            norm += w;
        }
    }
    if norm.abs() > 1e-12 {
        acc / norm
    } else {
        0.0
    }
}

/// Reduce `chunk` to `target_rate` through an anti-alias low-pass.
///
/// Requesting the chunk's own rate returns an identical copy.
pub fn downsample(chunk: &WaveformChunk, target_rate: u32) -> Result<WaveformChunk> {
    if target_rate == 0 {
        return Err(Error::invalid("target rate must be positive"));
    }
    let source_rate = chunk.sample_rate;
    if target_rate > source_rate {
        return Err(Error::invalid(format!(
            "cannot downsample from {source_rate} Hz up to {target_rate} Hz"
        )));
    }
    if target_rate == source_rate {
        return Ok(chunk.clone());
    }

    let (src, dst) = (source_rate as u64, target_rate as u64);
    let n_out = (chunk.len() as u64 * dst / src) as usize;
    if n_out == 0 {
        return Err(Error::invalid("chunk too short to produce a single output sample"));
    }
    let kernel = Kernel::new(source_rate, target_rate);
    // Output sample k sits at input position k * src / dst. The fractional
    // part takes one of dst / gcd distinct values.
    let phases = dst / gcd(src, dst);
    let table: Option<Vec<Vec<f64>>> = (phases <= MAX_PHASE_TABLE).then(|| {
        (0..phases)
            .map(|p| kernel.weights(p as f64 / phases as f64))
            .collect()
    });
    let step = dst / phases;

    let run = |input: &[f64]| -> Vec<f64> {
        (0..n_out)
            .into_par_iter()
            .map(|k| {
                let pos = k as u64 * src;
                let base = (pos / dst) as i64;
                let rem = pos % dst;
                match &table {
                    Some(t) => interpolate(input, base, &t[(rem / step) as usize], kernel.taps_each_side),
                    None => interpolate(
                        input,
                        base,
                        &kernel.weights(rem as f64 / dst as f64),
                        kernel.taps_each_side,
                    ),
                }
            })
            .collect()
    };

    Ok(WaveformChunk {
        start_us: chunk.start_us,
        sample_rate: target_rate,
        voltage: run(&chunk.voltage),
        current: run(&chunk.current),
        provenance: chunk.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powercalc::{synth_waveform, Harmonic, Provenance, SynthParams};

    /// Hann-windowed single-bin DFT magnitude, used as an independent
    /// spectral probe.
    fn tone_amplitude(x: &[f64], rate: f64, freq: f64) -> f64 {
        let n = x.len() as f64;
        let (mut re, mut im, mut wsum) = (0.0, 0.0, 0.0);
        for (k, &v) in x.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1.0)).cos();
            let ph = 2.0 * PI * freq * k as f64 / rate;
            re += w * v * ph.cos();
            im -= w * v * ph.sin();
            wsum += w;
        }
        2.0 * (re * re + im * im).sqrt() / wsum
    }

    fn tones(rate: u32, freqs: &[(f64, f64)]) -> WaveformChunk {
        let n = rate as usize;
        let sig: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / rate as f64;
                freqs.iter().map(|(f, a)| a * (2.0 * PI * f * t).sin()).sum()
            })
            .collect();
        WaveformChunk::new(0, rate, sig.clone(), sig, Provenance::Physical).unwrap()
    }

    #[test]
    fn mains_sine_survives() {
        let chunk = synth_waveform(
            &SynthParams::new(50.0, 1.0, 44_100, 230.0).with_current(Harmonic::new(1, 3.0, -0.1)),
        )
        .unwrap();
        let out = downsample(&chunk, 16_000).unwrap();
        assert_eq!(out.sample_rate, 16_000);
        assert_eq!(out.len(), 16_000);
        assert!(((out.voltage_rms() - chunk.voltage_rms()) / chunk.voltage_rms()).abs() < 0.005);
        assert!(((out.current_rms() - chunk.current_rms()) / chunk.current_rms()).abs() < 0.005);
    }

    #[test]
    fn same_rate_is_identity() {
        let chunk = tones(8_000, &[(50.0, 1.0), (1234.0, 0.3)]);
        let out = downsample(&chunk, 8_000).unwrap();
        assert_eq!(out, chunk);
    }

    #[test]
    fn rejects_zero_and_upsampling() {
        let chunk = tones(8_000, &[(50.0, 1.0)]);
        assert!(downsample(&chunk, 0).is_err());
        assert!(downsample(&chunk, 16_000).is_err());
    }

    #[test]
    fn passband_kept_and_alias_band_rejected() {
        let chunk = tones(44_100, &[(6_000.0, 1.0), (18_000.0, 1.0)]);
        let out = downsample(&chunk, 16_000).unwrap();
        let kept = tone_amplitude(&out.voltage, 16_000.0, 6_000.0);
        // 18 kHz folds to 2 kHz at a 16 kHz rate.
        let alias = tone_amplitude(&out.voltage, 16_000.0, 2_000.0);
        assert!((kept - 1.0).abs() < 0.01, "passband amplitude {kept}");
        assert!(20.0 * alias.log10() < -40.0, "alias amplitude {alias}");
    }

    #[test]
    fn above_nyquist_tone_is_suppressed() {
        // 10 kHz cannot be represented at 16 kHz; it must not fold to 6 kHz.
        let chunk = tones(44_100, &[(10_000.0, 1.0)]);
        let out = downsample(&chunk, 16_000).unwrap();
        let alias = tone_amplitude(&out.voltage, 16_000.0, 6_000.0);
        assert!(20.0 * alias.log10() < -40.0, "alias amplitude {alias}");
    }

    #[test]
    fn repeated_downsampling_is_stable() {
        let chunk = tones(44_100, &[(50.0, 300.0), (350.0, 20.0)]);
        let once = downsample(&chunk, 16_000).unwrap();
        let twice = downsample(&once, 16_000).unwrap();
        assert!(((twice.voltage_rms() - once.voltage_rms()) / once.voltage_rms()).abs() < 0.001);
    }

    #[test]
    fn coprime_rates_use_direct_kernels() {
        let chunk = tones(44_101, &[(50.0, 1.0)]);
        let out = downsample(&chunk, 16_000).unwrap();
        assert!(((out.voltage_rms() - chunk.voltage_rms()) / chunk.voltage_rms()).abs() < 0.005);
    }
}
