//! House metadata: building facts, meter inventory, meter wiring and the
//! appliances each meter feeds.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::doc::Doc;
use super::records::Unit;

/// Below this power (watts) an appliance counts as off unless overridden.
pub const DEFAULT_ON_POWER_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MeterDevice {
    pub name: String,
    /// Nominal seconds between readings.
    pub sample_period: f64,
    pub measures: Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElecMeter {
    pub channel: u32,
    pub device: String,
    pub site_meter: bool,
    pub submeter_of: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceMeta {
    pub name: String,
    pub meters: Vec<u32>,
    pub room: Option<String>,
    /// Only present when it differs from [`DEFAULT_ON_POWER_THRESHOLD`].
    pub on_power_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HouseMetadata {
    pub instance: u32,
    pub building_type: Option<String>,
    pub construction_year: Option<u32>,
    pub heating: Option<String>,
    pub ownership: Option<String>,
    pub n_occupants: Option<u32>,
    pub description_of_occupants: Option<String>,
    pub meter_devices: Vec<MeterDevice>,
    pub elec_meters: Vec<ElecMeter>,
    pub appliances: Vec<ApplianceMeta>,
}

fn unit_name(u: Unit) -> &'static str {
    match u {
        Unit::Watts => "active",
        Unit::VoltAmperes => "apparent",
    }
}

impl HouseMetadata {
    pub fn meter(&self, channel: u32) -> Option<&ElecMeter> {
        self.elec_meters.iter().find(|m| m.channel == channel)
    }

    pub fn device(&self, name: &str) -> Option<&MeterDevice> {
        self.meter_devices.iter().find(|d| d.name == name)
    }

    pub fn unit_of(&self, channel: u32) -> Option<Unit> {
        self.meter(channel)
            .and_then(|m| self.device(&m.device))
            .map(|d| d.measures)
    }

    pub fn sample_period_of(&self, channel: u32) -> Option<f64> {
        self.meter(channel)
            .and_then(|m| self.device(&m.device))
            .map(|d| d.sample_period)
    }

    pub fn appliances_on(&self, channel: u32) -> impl Iterator<Item = &ApplianceMeta> {
        self.appliances.iter().filter(move |a| a.meters.contains(&channel))
    }

    pub fn on_power_threshold(&self, channel: u32) -> f64 {
        self.appliances_on(channel)
            .find_map(|a| a.on_power_threshold)
            .unwrap_or(DEFAULT_ON_POWER_THRESHOLD)
    }

    pub fn site_meters(&self) -> impl Iterator<Item = &ElecMeter> {
        self.elec_meters.iter().filter(|m| m.site_meter)
    }

    /// Name shown for a channel in `labels.dat`.
    pub fn label(&self, channel: u32) -> Option<String> {
        let meter = self.meter(channel)?;
        if meter.site_meter {
            return Some("aggregate".to_string());
        }
        let names: Vec<&str> = self.appliances_on(channel).map(|a| a.name.as_str()).collect();
        Some(if names.is_empty() {
            format!("meter_{channel}")
        } else {
            names.join("+")
        })
    }

    pub fn labels(&self) -> Vec<(u32, String)> {
        let mut channels: Vec<u32> = self.elec_meters.iter().map(|m| m.channel).collect();
        channels.sort_unstable();
        channels
            .into_iter()
            .map(|c| (c, self.label(c).expect("channel has a meter")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let consistency = |msg: String| Err(Error::Consistency(msg));
        let mut devices = BTreeSet::new();
        for d in &self.meter_devices {
            if !devices.insert(d.name.as_str()) {
                return consistency(format!("meter device `{}` declared twice", d.name));
            }
            if !(d.sample_period > 0.0) {
                return consistency(format!("meter device `{}` needs a positive sample period", d.name));
            }
        }
        let mut channels = BTreeSet::new();
        for m in &self.elec_meters {
            if m.channel == 0 {
                return consistency("channel numbers start at 1".into());
            }
            if !channels.insert(m.channel) {
                return consistency(format!("duplicate channel index {}", m.channel));
            }
            if !devices.contains(m.device.as_str()) {
                return consistency(format!("channel {} uses unknown device `{}`", m.channel, m.device));
            }
        }
        for m in &self.elec_meters {
            if let Some(parent) = m.submeter_of {
                if !channels.contains(&parent) || parent == m.channel {
                    return consistency(format!("channel {} is a submeter of missing channel {parent}", m.channel));
                }
            }
        }
        for a in &self.appliances {
            if a.name.trim().is_empty() || a.name.contains('\n') {
                return consistency("appliance names must be non-empty single-line text".into());
            }
            if let Some(c) = a.meters.iter().find(|c| !channels.contains(c)) {
                return consistency(format!("appliance `{}` is wired to missing channel {c}", a.name));
            }
            if let Some(t) = a.on_power_threshold {
                if !(t > 0.0 && t.is_finite()) {
                    return consistency(format!("appliance `{}` has non-positive on_power_threshold", a.name));
                }
            }
        }
        Ok(())
    }

    /// Check `labels.dat` against this metadata.
    pub fn check_labels(&self, labels: &[(u32, String)]) -> Result<()> {
        for (channel, name) in labels {
            match self.label(*channel) {
                None => {
                    return Err(Error::Consistency(format!(
                        "labels.dat lists channel {channel} ({name}) but the metadata has no such meter"
                    )))
                }
                Some(expected) if &expected != name => {
                    log::warn!("channel {channel}: labels.dat says `{name}`, metadata implies `{expected}`");
                }
                Some(_) => {}
            }
        }
        for m in &self.elec_meters {
            if !labels.iter().any(|(c, _)| *c == m.channel) {
                return Err(Error::Consistency(format!(
                    "metadata channel {} is missing from labels.dat",
                    m.channel
                )));
            }
        }
        Ok(())
    }

    /// Minimal metadata for a directory that only carries `labels.dat`.
    pub fn from_labels(instance: u32, labels: &[(u32, String)]) -> Self {
        let mut meta = HouseMetadata {
            instance,
            meter_devices: vec![
                MeterDevice {
                    name: "unknown_site_meter".into(),
                    sample_period: 6.0,
                    measures: Unit::VoltAmperes,
                },
                MeterDevice {
                    name: "unknown_submeter".into(),
                    sample_period: 6.0,
                    measures: Unit::Watts,
                },
            ],
            ..Default::default()
        };
        for (channel, name) in labels {
            let site = name == "aggregate";
            meta.elec_meters.push(ElecMeter {
                channel: *channel,
                device: if site { "unknown_site_meter" } else { "unknown_submeter" }.into(),
                site_meter: site,
                submeter_of: None,
            });
            if !site {
                meta.appliances.push(ApplianceMeta {
                    name: name.clone(),
                    meters: vec![*channel],
                    room: None,
                    on_power_threshold: None,
                });
            }
        }
        meta
    }

    pub fn to_doc(&self) -> Doc {
        let devices = self
            .meter_devices
            .iter()
            .map(|d| {
                Doc::map()
                    .scalar("name", &d.name)
                    .scalar("sample_period", d.sample_period)
                    .scalar("measurement", unit_name(d.measures))
                    .build()
            })
            .collect();
        let meters = self
            .elec_meters
            .iter()
            .map(|m| {
                Doc::map()
                    .scalar("channel", m.channel)
                    .scalar("device", &m.device)
                    .scalar("site_meter", m.site_meter)
                    .opt_scalar("submeter_of", m.submeter_of)
                    .build()
            })
            .collect();
        let appliances = self
            .appliances
            .iter()
            .map(|a| {
                Doc::map()
                    .scalar("name", &a.name)
                    .entry("meters", Doc::List(a.meters.iter().map(Doc::scalar).collect()))
                    .opt_scalar("room", a.room.as_ref())
                    .opt_scalar("on_power_threshold", a.on_power_threshold)
                    .build()
            })
            .collect();
        Doc::map()
            .scalar("instance", self.instance)
            .opt_scalar("building_type", self.building_type.as_ref())
            .opt_scalar("construction_year", self.construction_year)
            .opt_scalar("heating", self.heating.as_ref())
            .opt_scalar("ownership", self.ownership.as_ref())
            .opt_scalar("n_occupants", self.n_occupants)
            .opt_scalar("description_of_occupants", self.description_of_occupants.as_ref())
            .entry("meter_devices", Doc::List(devices))
            .entry("elec_meters", Doc::List(meters))
            .entry("appliances", Doc::List(appliances))
            .build()
    }

    /// Unknown keys are ignored.
    pub fn from_doc(doc: &Doc, file: &Path) -> Result<Self> {
        let r = Reader { file };
        let meter_devices = r
            .list(doc, "meter_devices")?
            .iter()
            .map(|d| {
                Ok(MeterDevice {
                    name: r.string(d, "name")?,
                    sample_period: r.number(d, "sample_period")?,
                    measures: match r.string(d, "measurement")?.as_str() {
                        "active" => Unit::Watts,
                        "apparent" => Unit::VoltAmperes,
                        other => return Err(r.err(format!("unknown measurement `{other}`"))),
                    },
                })
            })
            .collect::<Result<_>>()?;
        let elec_meters = r
            .list(doc, "elec_meters")?
            .iter()
            .map(|m| {
                Ok(ElecMeter {
                    channel: r.number(m, "channel")?,
                    device: r.string(m, "device")?,
                    site_meter: r.opt_number(m, "site_meter")?.unwrap_or(false),
                    submeter_of: r.opt_number(m, "submeter_of")?,
                })
            })
            .collect::<Result<_>>()?;
        let appliances = r
            .list(doc, "appliances")?
            .iter()
            .map(|a| {
                Ok(ApplianceMeta {
                    name: r.string(a, "name")?,
                    meters: r
                        .list(a, "meters")?
                        .iter()
                        .map(|c| r.parse_scalar(c, "meters"))
                        .collect::<Result<_>>()?,
                    room: r.opt_string(a, "room")?,
                    on_power_threshold: r.opt_number(a, "on_power_threshold")?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(HouseMetadata {
            instance: r.number(doc, "instance")?,
            building_type: r.opt_string(doc, "building_type")?,
            construction_year: r.opt_number(doc, "construction_year")?,
            heating: r.opt_string(doc, "heating")?,
            ownership: r.opt_string(doc, "ownership")?,
            n_occupants: r.opt_number(doc, "n_occupants")?,
            description_of_occupants: r.opt_string(doc, "description_of_occupants")?,
            meter_devices,
            elec_meters,
            appliances,
        })
    }
}

/// Typed field access on a [`Doc`] with file-scoped errors.
pub(crate) struct Reader<'a> {
    pub file: &'a Path,
}

impl Reader<'_> {
    pub fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.file, 0, msg)
    }

    pub fn opt_string(&self, doc: &Doc, key: &str) -> Result<Option<String>> {
        match doc.get(key) {
            None => Ok(None),
            Some(Doc::Scalar(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.err(format!("`{key}` must be a scalar"))),
        }
    }

    pub fn string(&self, doc: &Doc, key: &str) -> Result<String> {
        self.opt_string(doc, key)?
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    pub fn parse_scalar<T: FromStr>(&self, doc: &Doc, key: &str) -> Result<T> {
        let s = doc
            .as_str()
            .ok_or_else(|| self.err(format!("`{key}` must be a scalar")))?;
        s.parse()
            .map_err(|_| self.err(format!("`{key}`: cannot parse `{s}`")))
    }

    pub fn opt_number<T: FromStr>(&self, doc: &Doc, key: &str) -> Result<Option<T>> {
        doc.get(key).map(|v| self.parse_scalar(v, key)).transpose()
    }

    pub fn number<T: FromStr>(&self, doc: &Doc, key: &str) -> Result<T> {
        self.opt_number(doc, key)?
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    pub fn list<'d>(&self, doc: &'d Doc, key: &str) -> Result<&'d [Doc]> {
        match doc.get(key) {
            None => Ok(&[]),
            Some(Doc::List(items)) => Ok(items),
            Some(_) => Err(self.err(format!("`{key}` must be a list"))),
        }
    }
}
