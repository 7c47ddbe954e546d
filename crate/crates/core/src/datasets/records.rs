//! Line-oriented text files: channel series, mains, labels, button presses
//! and the calibration config. Columns are separated by a single space and
//! every line ends with `\n`.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrationConstants;
use crate::error::{Error, Result};
use crate::powercalc::PowerMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    Watts,
    VoltAmperes,
}

/// Integer power readings for one meter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSeries {
    pub channel: u32,
    pub unit: Unit,
    /// `(unix seconds, power)`, timestamps non-decreasing.
    pub readings: Vec<(i64, u32)>,
}

impl ChannelSeries {
    pub fn new(channel: u32, unit: Unit) -> Self {
        Self {
            channel,
            unit,
            readings: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.readings.len() * 16);
        for (ts, power) in &self.readings {
            writeln!(out, "{ts} {power}").unwrap();
        }
        out
    }

    pub fn parse(channel: u32, unit: Unit, text: &str, file: &Path) -> Result<Self> {
        let mut readings = Vec::new();
        let mut last = i64::MIN;
        for (k, line) in text.lines().enumerate() {
            let [ts, power] = columns::<2>(line, file, k + 1)?;
            let ts: i64 = ts
                .parse()
                .map_err(|_| Error::parse(file, k + 1, format!("bad timestamp `{ts}`")))?;
            let power: u32 = power
                .parse()
                .map_err(|_| Error::parse(file, k + 1, format!("bad power value `{power}`")))?;
            if ts < last {
                return Err(Error::parse(file, k + 1, "timestamp goes backwards"));
            }
            last = ts;
            readings.push((ts, power));
        }
        Ok(Self {
            channel,
            unit,
            readings,
        })
    }
}

fn columns<'a, const N: usize>(line: &'a str, file: &Path, number: usize) -> Result<[&'a str; N]> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    fields
        .try_into()
        .map_err(|f: Vec<&str>| Error::parse(file, number, format!("expected {N} columns, found {}", f.len())))
}

/// A decimal with a fixed number of fractional digits, stored as an integer
/// count of `10^-DIGITS` units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed<const DIGITS: u32>(pub i64);

pub type Deci = Fixed<1>;
pub type Centi = Fixed<2>;

impl<const D: u32> Fixed<D> {
    const SCALE: i64 = 10i64.pow(D);

    /// Round half away from zero on the shortest decimal form of `x`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        parse_decimal(&format!("{x}"), D).map(Self)
    }

    pub fn parse(s: &str) -> Option<Self> {
        parse_decimal(s, D).map(Self)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl<const D: u32> fmt::Display for Fixed<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let scale = Self::SCALE as u64;
        write!(f, "{sign}{}.{:0width$}", abs / scale, abs % scale, width = D as usize)
    }
}

/// Parse a plain decimal string into units of `10^-digits`, rounding any
/// extra fractional digits half away from zero.
fn parse_decimal(s: &str, digits: u32) -> Option<i64> {
    let (negative, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value: i64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let frac = frac_part.as_bytes();
    for k in 0..digits as usize {
        let d = frac.get(k).map_or(0, |b| (b - b'0') as i64);
        value = value.checked_mul(10)?.checked_add(d)?;
    }
    if frac.get(digits as usize).is_some_and(|&b| b >= b'5') {
        value = value.checked_add(1)?;
    }
    Some(if negative { -value } else { value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MainsRow {
    pub timestamp: Deci,
    pub active_power: Centi,
    pub apparent_power: Centi,
    pub rms_voltage: Centi,
}

impl MainsRow {
    pub fn from_metrics(m: &PowerMetrics) -> Result<Self> {
        let fixed = |x: f64| Centi::from_f64(x).ok_or_else(|| Error::invalid(format!("cannot serialise {x}")));
        Ok(Self {
            timestamp: Deci::from_f64(m.timestamp)
                .ok_or_else(|| Error::invalid(format!("cannot serialise timestamp {}", m.timestamp)))?,
            active_power: fixed(m.active_power)?,
            apparent_power: fixed(m.apparent_power)?,
            rms_voltage: fixed(m.rms_voltage)?,
        })
    }

    pub fn to_metrics(&self) -> PowerMetrics {
        PowerMetrics {
            timestamp: self.timestamp.to_f64(),
            active_power: self.active_power.to_f64(),
            apparent_power: self.apparent_power.to_f64(),
            rms_voltage: self.rms_voltage.to_f64(),
        }
    }
}

impl fmt::Display for MainsRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.timestamp, self.active_power, self.apparent_power, self.rms_voltage
        )
    }
}

/// Whole-house 1 Hz data: timestamp, active power, apparent power, RMS volts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MainsSeries {
    pub rows: Vec<MainsRow>,
}

impl MainsSeries {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 36);
        for row in &self.rows {
            writeln!(out, "{row}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, file: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let cols = columns::<4>(line, file, k + 1)?;
            let bad = |what: &str, v: &str| Error::parse(file, k + 1, format!("bad {what} `{v}`"));
            let row = MainsRow {
                timestamp: Deci::parse(cols[0]).ok_or_else(|| bad("timestamp", cols[0]))?,
                active_power: Centi::parse(cols[1]).ok_or_else(|| bad("active power", cols[1]))?,
                apparent_power: Centi::parse(cols[2]).ok_or_else(|| bad("apparent power", cols[2]))?,
                rms_voltage: Centi::parse(cols[3]).ok_or_else(|| bad("RMS voltage", cols[3]))?,
            };
            if rows.last().is_some_and(|prev: &MainsRow| prev.timestamp >= row.timestamp) {
                return Err(Error::parse(file, k + 1, "timestamps must increase"));
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ButtonEvent {
    pub timestamp: i64,
    /// `true` when the switch was toggled on.
    pub on: bool,
}

pub fn write_button_events(events: &[ButtonEvent]) -> String {
    let mut out = String::new();
    for e in events {
        writeln!(out, "{} {}", e.timestamp, u8::from(e.on)).unwrap();
    }
    out
}

pub fn read_button_events(text: &str, file: &Path) -> Result<Vec<ButtonEvent>> {
    text.lines()
        .enumerate()
        .map(|(k, line)| {
            let [ts, value] = columns::<2>(line, file, k + 1)?;
            let timestamp = ts
                .parse()
                .map_err(|_| Error::parse(file, k + 1, format!("bad timestamp `{ts}`")))?;
            let on = match value {
                "1" => true,
                "0" => false,
                v => return Err(Error::parse(file, k + 1, format!("button value must be 0 or 1, got `{v}`"))),
            };
            Ok(ButtonEvent { timestamp, on })
        })
        .collect()
}

pub fn write_labels(labels: &[(u32, String)]) -> String {
    let mut out = String::new();
    for (channel, name) in labels {
        writeln!(out, "{channel} {name}").unwrap();
    }
    out
}

pub fn read_labels(text: &str, file: &Path) -> Result<Vec<(u32, String)>> {
    let mut labels: Vec<(u32, String)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let (channel, name) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(file, k + 1, "expected `<channel> <name>`"))?;
        let channel: u32 = channel
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::parse(file, k + 1, format!("bad channel number `{channel}`")))?;
        if name.trim().is_empty() {
            return Err(Error::parse(file, k + 1, "empty label"));
        }
        if labels.iter().any(|(c, _)| *c == channel) {
            return Err(Error::Consistency(format!(
                "{}:{}: channel {channel} labelled twice",
                file.display(),
                k + 1
            )));
        }
        labels.push((channel, name.to_string()));
    }
    Ok(labels)
}

pub fn write_calibration(c: &CalibrationConstants) -> String {
    format!(
        "[Calibration]\nvolts_per_adc_step = {:?}\namps_per_adc_step = {:?}\nphase_difference = {:?}\n",
        c.volts_per_adc_step, c.amps_per_adc_step, c.phase_difference
    )
}

/// Reads `key = value` lines; section headers, `#`/`;` comments and unknown
/// keys are ignored. `phase_difference` defaults to zero.
pub fn read_calibration(text: &str, file: &Path) -> Result<CalibrationConstants> {
    let (mut volts, mut amps, mut phase) = (None, None, 0.0);
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(['#', ';', '[']) {
            continue;
        }
        let (key, value) = line
            .split_once(['=', ':'])
            .ok_or_else(|| Error::parse(file, k + 1, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let number = || -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::parse(file, k + 1, format!("bad number `{value}` for {key}")))
        };
        match key {
            "volts_per_adc_step" => volts = Some(number()?),
            "amps_per_adc_step" => amps = Some(number()?),
            "phase_difference" => phase = number()?,
            _ => log::debug!("{}:{}: ignoring key {key}", file.display(), k + 1),
        }
    }
    let missing = |key: &str| Error::parse(file, 0, format!("missing {key}"));
    let constants = CalibrationConstants {
        volts_per_adc_step: volts.ok_or_else(|| missing("volts_per_adc_step"))?,
        amps_per_adc_step: amps.ok_or_else(|| missing("amps_per_adc_step"))?,
        phase_difference: phase,
    };
    constants
        .validate()
        .map_err(|e| Error::parse(file, 0, e.to_string()))?;
    Ok(constants)
}
