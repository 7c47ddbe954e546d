use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::datasets::{ChannelSeries, HouseDataset};
use crate::error::{Error, Result};

use super::{dropout_counts, gap_fill, integrate, mains_submeter_correlation, proportion_submetered};

const JOULES_PER_KWH: f64 = 3.6e6;
const DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub large_gap_threshold: f64,
    pub resample_period: f64,
    pub mains_bin_width: f64,
    pub mains_bin_max: f64,
    pub appliance_bin_width: f64,
    pub top_k: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            large_gap_threshold: super::LARGE_GAP_THRESHOLD,
            resample_period: super::CORRELATION_PERIOD,
            mains_bin_width: 1.0,
            mains_bin_max: 500.0,
            appliance_bin_width: 10.0,
            top_k: 10,
        }
    }
}

/// Fixed-width bins from `lo`; values outside `[lo, hi)` are not counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && hi > lo) {
            return Err(Error::invalid("histogram needs positive width and hi > lo"));
        }
        let n = ((hi - lo) / width).ceil() as usize;
        Ok(Self {
            lo,
            width,
            counts: vec![0; n],
        })
    }

    pub fn add(&mut self, x: f64) {
        let k = ((x - self.lo) / self.width).floor();
        if k >= 0.0 && (k as usize) < self.counts.len() {
            self.counts[k as usize] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_lo(&self, k: usize) -> f64 {
        self.lo + self.width * k as f64
    }

    /// Bins that outnumber both neighbours; plateaus count once.
    pub fn modes(&self, min_count: u64) -> Vec<usize> {
        let c = &self.counts;
        let mut out = Vec::new();
        let mut k = 0;
        while k < c.len() {
            let mut end = k;
            while end + 1 < c.len() && c[end + 1] == c[k] {
                end += 1;
            }
            let left = if k == 0 { 0 } else { c[k - 1] };
            let right = c.get(end + 1).copied().unwrap_or(0);
            if c[k] >= min_count && c[k] > left && c[k] > right {
                out.push(k);
            }
            k = end + 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub channel: u32,
    pub label: String,
    pub site_meter: bool,
    pub readings: usize,
    pub dropout_rate: f64,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub house: u32,
    /// Seconds the whole-house record was live, large gaps excluded.
    pub uptime: f64,
    pub total_duration: f64,
    pub mean_energy_per_day: f64,
    pub mains_vs_submeter_correlation: Option<f64>,
    pub proportion_submetered: Option<f64>,
    pub dropout_rate: f64,
    pub channels: Vec<ChannelSummary>,
    pub mains_histogram: Histogram,
    pub appliance_histograms: Vec<(u32, Histogram)>,
    /// Per submeter, fraction of on-readings falling in each UTC hour.
    pub hourly_usage: Vec<(u32, [f64; 24])>,
    pub top_k: Vec<(u32, String, f64)>,
    /// `(day number since the epoch, kWh)`.
    pub daily_energy: Vec<(i64, f64)>,
}

fn as_f64(series: &ChannelSeries) -> Vec<(f64, f64)> {
    series.readings.iter().map(|&(t, p)| (t as f64, p as f64)).collect()
}

fn uptime(ts: &[f64], threshold: f64) -> f64 {
    ts.windows(2).map(|w| w[1] - w[0]).filter(|&g| g < threshold).sum()
}

/// Energy per UTC day of a gap-filled series, joules.
fn daily(series: &[(f64, f64)]) -> Vec<(i64, f64)> {
    let Some(((first, _), (last, _))) = series.first().zip(series.last()) else {
        return Vec::new();
    };
    let d0 = (first / DAY).floor() as i64;
    let d1 = (last / DAY).floor() as i64;
    (d0..=d1)
        .map(|d| {
            let lo = (d as f64 * DAY).max(*first);
            let hi = ((d + 1) as f64 * DAY).min(*last);
            (d, integrate(series, lo, hi))
        })
        .collect()
}

pub fn report(ds: &HouseDataset, opts: &ReportOptions) -> Result<ValidationReport> {
    let meta = &ds.metadata;
    let threshold = opts.large_gap_threshold;
    let period_of = |c: u32| meta.sample_period_of(c).unwrap_or(6.0);

    // Whole-house signal: mains.dat active power if present, else the site meter.
    let (mains, mains_cadence): (Vec<(f64, f64)>, f64) = match &ds.mains {
        Some(m) if !m.rows.is_empty() => (
            m.rows
                .iter()
                .map(|r| (r.timestamp.to_f64(), r.active_power.to_f64()))
                .collect(),
            1.0,
        ),
        _ => match ds.site_channels().find(|c| !c.readings.is_empty()) {
            Some(site) => (as_f64(site), period_of(site.channel)),
            None => {
                return Err(Error::InsufficientData(
                    "dataset has neither mains.dat nor site-meter readings".into(),
                ))
            }
        },
    };
    if mains.len() < 2 {
        return Err(Error::InsufficientData("whole-house record holds fewer than two readings".into()));
    }
    let mains_ts: Vec<f64> = mains.iter().map(|r| r.0).collect();
    let up = uptime(&mains_ts, threshold);
    let total_duration = mains_ts[mains_ts.len() - 1] - mains_ts[0];
    let mains_filled = gap_fill(&mains, mains_cadence, threshold);
    let mains_energy = integrate(&mains_filled, mains_ts[0], total_duration + mains_ts[0]);
    let mean_energy_per_day = if up > 0.0 {
        mains_energy / JOULES_PER_KWH / (up / DAY)
    } else {
        0.0
    };

    let mut mains_histogram = Histogram::new(0.0, opts.mains_bin_max, opts.mains_bin_width)?;
    mains.iter().for_each(|&(_, p)| mains_histogram.add(p));

    let mut channels = Vec::new();
    let (mut observed, mut expected) = (0u64, 0u64);
    let mut submeters_raw: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut submeters_filled: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut appliance_histograms = Vec::new();
    let mut hourly_usage = Vec::new();
    let mut energies = Vec::new();
    for series in &ds.channels {
        let site = meta.meter(series.channel).is_some_and(|m| m.site_meter);
        let label = meta.label(series.channel).unwrap_or_default();
        let raw = as_f64(series);
        let ts: Vec<f64> = raw.iter().map(|r| r.0).collect();
        let cadence = period_of(series.channel);
        let (o, e) = dropout_counts(&ts, cadence, threshold);
        observed += o;
        expected += e;
        let filled = gap_fill(&raw, cadence, threshold);
        let energy = match span(&filled) {
            Some((a, b)) => integrate(&filled, a, b),
            None => 0.0,
        };
        channels.push(ChannelSummary {
            channel: series.channel,
            label: label.clone(),
            site_meter: site,
            readings: raw.len(),
            dropout_rate: if e == 0 { 0.0 } else { 1.0 - o as f64 / e as f64 },
            energy_kwh: energy / JOULES_PER_KWH,
        });
        if site {
            continue;
        }
        let on = meta.on_power_threshold(series.channel);
        let max = raw.iter().map(|r| r.1).fold(0.0, f64::max);
        let mut h = Histogram::new(0.0, (max + opts.appliance_bin_width).max(opts.appliance_bin_width), opts.appliance_bin_width)?;
        let mut hours = [0.0; 24];
        let mut on_count = 0.0;
        for &(t, p) in &raw {
            if p >= on {
                h.add(p);
                hours[((t / 3600.0).floor() as i64).rem_euclid(24) as usize] += 1.0;
                on_count += 1.0;
            }
        }
        if on_count > 0.0 {
            hours.iter_mut().for_each(|x| *x /= on_count);
        }
        appliance_histograms.push((series.channel, h));
        hourly_usage.push((series.channel, hours));
        energies.push((series.channel, label, energy / JOULES_PER_KWH));
        if !raw.is_empty() {
            submeters_raw.push(raw);
            submeters_filled.push(filled);
        }
    }

    energies.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    energies.truncate(opts.top_k);

    let raw_refs: Vec<&[(f64, f64)]> = submeters_raw.iter().map(Vec::as_slice).collect();
    let filled_refs: Vec<&[(f64, f64)]> = submeters_filled.iter().map(Vec::as_slice).collect();
    let correlation = if raw_refs.is_empty() {
        None
    } else {
        match mains_submeter_correlation(&mains, &raw_refs, opts.resample_period) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_) | Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let proportion = match proportion_submetered(&mains_filled, &filled_refs) {
        Ok(p) => Some(p),
        Err(Error::DegenerateInput(_) | Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(ValidationReport {
        house: ds.house(),
        uptime: up,
        total_duration,
        mean_energy_per_day,
        mains_vs_submeter_correlation: correlation,
        proportion_submetered: proportion,
        dropout_rate: if expected == 0 { 0.0 } else { 1.0 - observed as f64 / expected as f64 },
        channels,
        mains_histogram,
        appliance_histograms,
        hourly_usage,
        top_k: energies,
        daily_energy: daily(&mains_filled)
            .into_iter()
            .map(|(d, j)| (d, j / JOULES_PER_KWH))
            .collect(),
    })
}

fn span(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    Some((series.first()?.0, series.last()?.0))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl ValidationReport {
    /// `key=value` summary lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        writeln!(s, "house={}", self.house).unwrap();
        writeln!(s, "uptime_s={:.1}", self.uptime).unwrap();
        writeln!(s, "total_duration_s={:.1}", self.total_duration).unwrap();
        writeln!(s, "mean_energy_per_day_kwh={:.4}", self.mean_energy_per_day).unwrap();
        writeln!(s, "mains_vs_submeter_correlation={}", opt(self.mains_vs_submeter_correlation)).unwrap();
        writeln!(s, "proportion_submetered={}", opt(self.proportion_submetered)).unwrap();
        writeln!(s, "dropout_rate={:.6}", self.dropout_rate).unwrap();
        writeln!(s, "channels={}", self.channels.len()).unwrap();
        s
    }

    fn channels_csv(&self) -> String {
        let mut s = String::from("channel,label,site_meter,readings,dropout_rate,energy_kwh\n");
        for c in &self.channels {
            writeln!(
                s,
                "{},{},{},{},{:.6},{:.4}",
                c.channel,
                csv_field(&c.label),
                c.site_meter,
                c.readings,
                c.dropout_rate,
                c.energy_kwh
            )
            .unwrap();
        }
        s
    }

    fn mains_histogram_csv(&self) -> String {
        let h = &self.mains_histogram;
        let mut s = String::from("bin_lo_w,bin_hi_w,count\n");
        for (k, c) in h.counts.iter().enumerate() {
            writeln!(s, "{},{},{c}", h.bin_lo(k), h.bin_lo(k + 1)).unwrap();
        }
        s
    }

    fn appliance_histograms_csv(&self) -> String {
        let mut s = String::from("channel,bin_lo_w,bin_hi_w,count\n");
        for (ch, h) in &self.appliance_histograms {
            for (k, c) in h.counts.iter().enumerate().filter(|(_, c)| **c > 0) {
                writeln!(s, "{ch},{},{},{c}", h.bin_lo(k), h.bin_lo(k + 1)).unwrap();
            }
        }
        s
    }

    fn hourly_usage_csv(&self) -> String {
        let mut s = String::from("channel");
        for h in 0..24 {
            write!(s, ",h{h:02}").unwrap();
        }
        s.push('\n');
        for (ch, hours) in &self.hourly_usage {
            write!(s, "{ch}").unwrap();
            for x in hours {
                write!(s, ",{x:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    fn top_k_csv(&self) -> String {
        let mut s = String::from("rank,channel,label,energy_kwh\n");
        for (k, (ch, label, e)) in self.top_k.iter().enumerate() {
            writeln!(s, "{},{ch},{},{e:.4}", k + 1, csv_field(label)).unwrap();
        }
        s
    }

    fn daily_energy_csv(&self) -> String {
        let mut s = String::from("day,energy_kwh\n");
        for (d, e) in &self.daily_energy {
            writeln!(s, "{d},{e:.4}").unwrap();
        }
        s
    }

    /// Writes `report.txt` and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.txt", self.to_key_value()),
            ("channels.csv", self.channels_csv()),
            ("mains_histogram.csv", self.mains_histogram_csv()),
            ("appliance_histograms.csv", self.appliance_histograms_csv()),
            ("hourly_usage.csv", self.hourly_usage_csv()),
            ("top_k_energy.csv", self.top_k_csv()),
            ("daily_energy.csv", self.daily_energy_csv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
