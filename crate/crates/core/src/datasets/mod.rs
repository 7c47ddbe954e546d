//! On-disk house directories.
//!
//! A house lives in `house_<n>/` and holds one `channel_<i>.dat` per meter,
//! optional `channel_<i>_button_press.dat` files, `labels.dat`, `mains.dat`,
//! `calibration.cfg`, `metadata.yaml` and any number of
//! `vi-<seconds>_<micros>.wav` waveform chunks.

mod doc;
mod metadata;
mod records;
mod waveform;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::calibrate::CalibrationConstants;
use crate::error::{Error, Result};

pub use doc::{Doc, MapBuilder};
pub use metadata::{ApplianceMeta, ElecMeter, HouseMetadata, MeterDevice, DEFAULT_ON_POWER_THRESHOLD};
pub(crate) use metadata::Reader as DocReader;
pub use records::{
    read_button_events, read_calibration, read_labels, write_button_events, write_calibration,
    write_labels, ButtonEvent, Centi, ChannelSeries, Deci, Fixed, MainsRow, MainsSeries, Unit,
};
pub use waveform::{
    parse_waveform_file_name, read_waveform_chunk, waveform_file_name, write_waveform_chunk,
    WaveformRecord, MAX_CHUNK_SECONDS,
};

pub const METADATA_FILE: &str = "metadata.yaml";
pub const LABELS_FILE: &str = "labels.dat";
pub const MAINS_FILE: &str = "mains.dat";
pub const CALIBRATION_FILE: &str = "calibration.cfg";
const CALIBRATION_FILE_ALT: &str = "calibration.dat";

#[derive(Debug, Clone, PartialEq)]
pub struct HouseDataset {
    pub metadata: HouseMetadata,
    /// Sorted by channel number.
    pub channels: Vec<ChannelSeries>,
    /// Only channels with at least one event.
    pub button_presses: BTreeMap<u32, Vec<ButtonEvent>>,
    pub mains: Option<MainsSeries>,
    pub calibration: Option<CalibrationConstants>,
    /// Sorted by start time.
    pub waveforms: Vec<WaveformRecord>,
}

impl HouseDataset {
    pub fn new(metadata: HouseMetadata) -> Self {
        Self {
            metadata,
            channels: Vec::new(),
            button_presses: BTreeMap::new(),
            mains: None,
            calibration: None,
            waveforms: Vec::new(),
        }
    }

    pub fn house(&self) -> u32 {
        self.metadata.instance
    }

    pub fn channel(&self, channel: u32) -> Option<&ChannelSeries> {
        self.channels.iter().find(|c| c.channel == channel)
    }

    /// Channels fed by a site meter.
    pub fn site_channels(&self) -> impl Iterator<Item = &ChannelSeries> {
        self.channels.iter().filter(|c| {
            self.metadata
                .meter(c.channel)
                .is_some_and(|m| m.site_meter)
        })
    }

    /// Individually metered channels.
    pub fn submeter_channels(&self) -> impl Iterator<Item = &ChannelSeries> {
        self.channels.iter().filter(|c| {
            self.metadata
                .meter(c.channel)
                .is_some_and(|m| !m.site_meter)
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.metadata.validate()?;
        let consistency = |msg: String| Err(Error::Consistency(msg));
        for pair in self.channels.windows(2) {
            if pair[0].channel >= pair[1].channel {
                return consistency(format!(
                    "channels must be unique and sorted ({} then {})",
                    pair[0].channel, pair[1].channel
                ));
            }
        }
        for series in &self.channels {
            match self.metadata.unit_of(series.channel) {
                None => return consistency(format!("channel {} has no metadata entry", series.channel)),
                Some(u) if u != series.unit => {
                    return consistency(format!("channel {} unit disagrees with its meter device", series.channel))
                }
                Some(_) => {}
            }
            if series.readings.windows(2).any(|w| w[0].0 > w[1].0) {
                return consistency(format!("channel {} timestamps decrease", series.channel));
            }
        }
        for (channel, events) in &self.button_presses {
            if events.is_empty() {
                return consistency(format!("channel {channel} has an empty button-press list"));
            }
            if self.metadata.meter(*channel).is_none() {
                return consistency(format!("button presses recorded for unknown channel {channel}"));
            }
        }
        if let Some(c) = &self.calibration {
            c.validate()?;
        }
        if self.waveforms.windows(2).any(|w| w[0].start_us >= w[1].start_us) {
            return consistency("waveform chunks must have distinct, sorted start times".into());
        }
        Ok(())
    }
}

pub fn house_dir(root: &Path, house: u32) -> PathBuf {
    root.join(format!("house_{house}"))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `house_<n>/` under `root` and returns its path.
pub fn write_house(dataset: &HouseDataset, root: &Path) -> Result<PathBuf> {
    dataset.validate()?;
    let dir = house_dir(root, dataset.house());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_file(&dir.join(METADATA_FILE), dataset.metadata.to_doc().to_text())?;
    write_file(&dir.join(LABELS_FILE), write_labels(&dataset.metadata.labels()))?;
    for series in &dataset.channels {
        write_file(&dir.join(format!("channel_{}.dat", series.channel)), series.to_text())?;
    }
    for (channel, events) in &dataset.button_presses {
        write_file(
            &dir.join(format!("channel_{channel}_button_press.dat")),
            write_button_events(events),
        )?;
    }
    if let Some(mains) = &dataset.mains {
        write_file(&dir.join(MAINS_FILE), mains.to_text())?;
    }
    if let Some(c) = &dataset.calibration {
        write_file(&dir.join(CALIBRATION_FILE), write_calibration(c))?;
    }
    for w in &dataset.waveforms {
        w.write(&dir)?;
    }
    Ok(dir)
}

enum Entry {
    Channel(u32),
    Buttons(u32),
    Waveform,
    Known,
}

fn classify(name: &str) -> Option<Entry> {
    if let Some(rest) = name.strip_prefix("channel_") {
        if let Some(n) = rest.strip_suffix("_button_press.dat") {
            return n.parse().ok().filter(|&c| c > 0).map(Entry::Buttons);
        }
        return rest
            .strip_suffix(".dat")?
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .map(Entry::Channel);
    }
    if parse_waveform_file_name(name).is_some() {
        return Some(Entry::Waveform);
    }
    [METADATA_FILE, LABELS_FILE, MAINS_FILE, CALIBRATION_FILE, CALIBRATION_FILE_ALT]
        .contains(&name)
        .then_some(Entry::Known)
}

fn instance_from_dir(dir: &Path) -> Option<u32> {
    dir.file_name()?.to_str()?.strip_prefix("house_")?.parse().ok()
}

/// Reads a `house_<n>` directory. Unrecognised files are skipped with a warning.
pub fn read_house(dir: &Path) -> Result<HouseDataset> {
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        Some(read_labels(&read_text(&labels_path)?, &labels_path)?)
    } else {
        None
    };
    let meta_path = dir.join(METADATA_FILE);
    let metadata = if meta_path.exists() {
        let doc = Doc::parse(&read_text(&meta_path)?, &meta_path)?;
        let meta = HouseMetadata::from_doc(&doc, &meta_path)?;
        if let Some(labels) = &labels {
            meta.check_labels(labels)?;
        }
        meta
    } else {
        let labels = labels.ok_or_else(|| {
            Error::Consistency(format!("{} has neither {METADATA_FILE} nor {LABELS_FILE}", dir.display()))
        })?;
        let instance = instance_from_dir(dir).unwrap_or(0);
        HouseMetadata::from_labels(instance, &labels)
    };
    metadata.validate()?;
    if let Some(n) = instance_from_dir(dir) {
        if n != metadata.instance {
            log::warn!("{} holds metadata for house {}", dir.display(), metadata.instance);
        }
    }

    let mut dataset = HouseDataset::new(metadata);
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        match classify(&name) {
            Some(Entry::Channel(channel)) => {
                let unit = dataset.metadata.unit_of(channel).ok_or_else(|| {
                    Error::Consistency(format!("{name} has no metadata entry"))
                })?;
                dataset
                    .channels
                    .push(ChannelSeries::parse(channel, unit, &read_text(&path)?, &path)?);
            }
            Some(Entry::Buttons(channel)) => {
                let events = read_button_events(&read_text(&path)?, &path)?;
                if !events.is_empty() {
                    dataset.button_presses.insert(channel, events);
                }
            }
            Some(Entry::Waveform) => dataset.waveforms.push(WaveformRecord::read(&path)?),
            Some(Entry::Known) => {}
            None => log::warn!("ignoring unrecognised file {}", path.display()),
        }
    }
    dataset.channels.sort_by_key(|c| c.channel);
    dataset.waveforms.sort_by_key(|w| w.start_us);

    let mains_path = dir.join(MAINS_FILE);
    if mains_path.exists() {
        dataset.mains = Some(MainsSeries::parse(&read_text(&mains_path)?, &mains_path)?);
    }
    for name in [CALIBRATION_FILE, CALIBRATION_FILE_ALT] {
        let path = dir.join(name);
        if path.exists() {
            dataset.calibration = Some(read_calibration(&read_text(&path)?, &path)?);
            break;
        }
    }
    dataset.validate()?;
    Ok(dataset)
}
