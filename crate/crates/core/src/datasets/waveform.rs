//! Stereo waveform chunks stored as 32-bit PCM in a RIFF/WAVE container.
//!
//! Channel 0 carries voltage and channel 1 current. Each sample is the
//! signed ADC value scaled to the full `i32` range, so a normalised value
//! `x` is stored as `round(x * 2^31)`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::calibrate::{CalibrationConstants, STEPS_PER_UNIT};
use crate::error::{Error, Result};
use crate::powercalc::{Provenance, WaveformChunk};

pub const MAX_CHUNK_SECONDS: f64 = 3600.0;
const HEADER_LEN: usize = 44;
const CHANNELS: u16 = 2;
const BITS: u16 = 32;

/// Raw integer samples exactly as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveformRecord {
    pub start_us: i64,
    pub sample_rate: u32,
    pub voltage: Vec<i32>,
    pub current: Vec<i32>,
}

/// `vi-<seconds>_<microseconds>.wav` for a non-negative start time.
pub fn waveform_file_name(start_us: i64) -> Result<String> {
    if start_us < 0 {
        return Err(Error::invalid("waveform start time precedes the Unix epoch"));
    }
    Ok(format!("vi-{}_{:06}.wav", start_us / 1_000_000, start_us % 1_000_000))
}

/// Inverse of [`waveform_file_name`]; `None` for names that do not match.
pub fn parse_waveform_file_name(name: &str) -> Option<i64> {
    let stem = name.strip_prefix("vi-")?.strip_suffix(".wav")?;
    let (secs, micros) = stem.split_once('_')?;
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(secs) || micros.len() != 6 || !all_digits(micros) {
        return None;
    }
    secs.parse::<i64>()
        .ok()?
        .checked_mul(1_000_000)?
        .checked_add(micros.parse::<i64>().ok()?)
}

fn to_i32(x: f64) -> i32 {
    x.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32
}

impl WaveformRecord {
    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    /// Physical chunks need calibration constants to map back onto ADC steps.
    pub fn from_chunk(chunk: &WaveformChunk, calib: Option<&CalibrationConstants>) -> Result<Self> {
        let (v_scale, i_scale) = match (chunk.provenance, calib) {
            (Provenance::Normalized, _) => (STEPS_PER_UNIT, STEPS_PER_UNIT),
            (_, Some(c)) => {
                c.validate()?;
                (1.0 / c.volts_per_adc_step, 1.0 / c.amps_per_adc_step)
            }
            (_, None) => {
                return Err(Error::invalid(
                    "physical waveforms need calibration constants to be stored",
                ))
            }
        };
        Ok(Self {
            start_us: chunk.start_us,
            sample_rate: chunk.sample_rate,
            voltage: chunk.voltage.iter().map(|&x| to_i32(x * v_scale)).collect(),
            current: chunk.current.iter().map(|&x| to_i32(x * i_scale)).collect(),
        })
    }

    /// Physical units with calibration, raw normalised values without.
    pub fn to_chunk(&self, calib: Option<&CalibrationConstants>) -> Result<WaveformChunk> {
        let normalized = |s: &[i32]| s.iter().map(|&x| x as f64 / STEPS_PER_UNIT).collect::<Vec<_>>();
        let raw = WaveformChunk::new(
            self.start_us,
            self.sample_rate,
            normalized(&self.voltage),
            normalized(&self.current),
            Provenance::Normalized,
        )?;
        match calib {
            Some(c) => {
                c.validate()?;
                c.apply(&raw)
            }
            None => Ok(raw),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.voltage.len() != self.current.len() {
            return Err(Error::invalid("voltage and current lengths differ"));
        }
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.len() as f64 / self.sample_rate as f64 > MAX_CHUNK_SECONDS {
            return Err(Error::invalid("waveform chunks are limited to one hour"));
        }
        let block_align = CHANNELS * BITS / 8;
        let data_len = u32::try_from(self.len() * block_align as usize)
            .map_err(|_| Error::invalid("waveform chunk too large"))?;
        let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize);
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&CHANNELS.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.sample_rate * block_align as u32).to_le_bytes());
        out.extend_from_slice(&block_align.to_le_bytes());
        out.extend_from_slice(&BITS.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for (v, i) in self.voltage.iter().zip(&self.current) {
            out.extend_from_slice(&v.to_le_bytes());
            out.extend_from_slice(&i.to_le_bytes());
        }
        Ok(out)
    }

    /// Only the layout written by [`WaveformRecord::encode`] is accepted.
    pub fn decode(bytes: &[u8], start_us: i64, file: &Path) -> Result<Self> {
        let bad = |msg: &str| Error::parse(file, 0, msg);
        if bytes.len() < HEADER_LEN || &bytes[0..4] != b"RIFF" || &bytes[8..16] != b"WAVEfmt " {
            return Err(bad("not a RIFF/WAVE file"));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if u32_at(16) != 16 || u16_at(20) != 1 {
            return Err(bad("expected an uncompressed PCM format block"));
        }
        if u16_at(22) != CHANNELS || u16_at(34) != BITS {
            return Err(bad("expected 2-channel 32-bit samples"));
        }
        let sample_rate = u32_at(24);
        if sample_rate == 0 {
            return Err(bad("sample rate is zero"));
        }
        if &bytes[36..40] != b"data" {
            return Err(bad("missing data block"));
        }
        let data_len = u32_at(40) as usize;
        let data = bytes
            .get(HEADER_LEN..HEADER_LEN + data_len)
            .ok_or_else(|| bad("data block truncated"))?;
        if !data_len.is_multiple_of(8) {
            return Err(bad("data block is not a whole number of frames"));
        }
        let frames = data_len / 8;
        let mut voltage = Vec::with_capacity(frames);
        let mut current = Vec::with_capacity(frames);
        for frame in data.chunks_exact(8) {
            voltage.push(i32::from_le_bytes(frame[0..4].try_into().unwrap()));
            current.push(i32::from_le_bytes(frame[4..8].try_into().unwrap()));
        }
        Ok(Self {
            start_us,
            sample_rate,
            voltage,
            current,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(waveform_file_name(self.start_us)?);
        let bytes = self.encode()?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let start_us = parse_waveform_file_name(name)
            .ok_or_else(|| Error::parse(path, 0, "file name is not vi-<seconds>_<microseconds>.wav"))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, start_us, path)
    }
}

pub fn write_waveform_chunk(
    chunk: &WaveformChunk,
    calib: Option<&CalibrationConstants>,
    dir: &Path,
) -> Result<PathBuf> {
    WaveformRecord::from_chunk(chunk, calib)?.write(dir)
}

/// Without calibration the chunk comes back normalised.
pub fn read_waveform_chunk(path: &Path, calib: Option<&CalibrationConstants>) -> Result<WaveformChunk> {
    WaveformRecord::read(path)?.to_chunk(calib)
}
