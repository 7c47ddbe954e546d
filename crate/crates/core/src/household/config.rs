//! House configuration documents.
//!
//! ```text
//! preset: small            # optional starting point
//! iam_count: 6             # defaults to the preset's plus one per added IAM-metered appliance
//! vampire_power: 25
//! appliances:              # appended to the preset's list
//!   - preset: kettle
//!     name: second kettle
//!   - name: heater
//!     meter: unmetered     # iam | clamp | unmetered
//!     iam_behavior: always_on   # always_on | button | unplugged
//!     states:
//!       - name: off
//!         active: 0
//!         apparent: 0
//!         mean_dwell: 3600
//!       - name: on
//!         active: 2000
//!         apparent: 2000
//!         mean_dwell: 600
//!     transitions:
//!       - - 0
//!         - 1
//!       - - 1
//!         - 0
//! ```

use std::fs;
use std::path::Path;

use crate::datasets::{Doc, DocReader};
use crate::error::{Error, Result};

use super::{presets, ApplianceModel, ApplianceState, House, IamBehavior, MeterKind};

fn meter_name(m: MeterKind) -> &'static str {
    match m {
        MeterKind::Iam => "iam",
        MeterKind::Clamp => "clamp",
        MeterKind::Unmetered => "unmetered",
    }
}

fn behavior_name(b: IamBehavior) -> &'static str {
    match b {
        IamBehavior::AlwaysOn => "always_on",
        IamBehavior::ButtonOperated => "button",
        IamBehavior::UnpluggedWhenOff => "unplugged",
    }
}

pub fn house_to_doc(house: &House) -> Doc {
    let appliances = house.appliances.iter().map(appliance_to_doc).collect();
    Doc::map()
        .scalar("iam_count", house.iam_count)
        .scalar("vampire_power", house.vampire_power)
        .scalar("vampire_apparent", house.vampire_apparent)
        .entry("appliances", Doc::List(appliances))
        .build()
}

fn appliance_to_doc(a: &ApplianceModel) -> Doc {
    let states = a
        .states
        .iter()
        .map(|s| {
            Doc::map()
                .scalar("name", &s.name)
                .scalar("active", s.active)
                .scalar("apparent", s.apparent)
                .scalar("mean_dwell", s.mean_dwell)
                .build()
        })
        .collect();
    let transitions = a
        .transitions
        .iter()
        .map(|row| Doc::List(row.iter().map(Doc::scalar).collect()))
        .collect();
    Doc::map()
        .scalar("name", &a.name)
        .scalar("meter", meter_name(a.meter))
        .scalar("iam_behavior", behavior_name(a.iam_behavior))
        .scalar("on_power_threshold", a.on_power_threshold)
        .opt_scalar("room", a.room.as_ref())
        .entry("states", Doc::List(states))
        .entry("transitions", Doc::List(transitions))
        .build()
}

pub fn house_from_doc(doc: &Doc, file: &Path) -> Result<House> {
    let r = DocReader { file };
    let base = match r.opt_string(doc, "preset")? {
        Some(name) => Some(presets::house(&name).ok_or_else(|| {
            r.err(format!("unknown house preset `{name}` (known: {})", presets::HOUSE_PRESETS.join(", ")))
        })?),
        None => None,
    };
    let mut appliances = base.as_ref().map(|h| h.appliances.clone()).unwrap_or_default();
    let mut extra_iams = 0;
    for item in r.list(doc, "appliances")? {
        let a = appliance_from_doc(&r, item)?;
        extra_iams += u32::from(a.meter == MeterKind::Iam);
        appliances.push(a);
    }
    let iam_count = match r.opt_number(doc, "iam_count")? {
        Some(n) => n,
        None => base.as_ref().map_or(0, |h| h.iam_count) + extra_iams,
    };
    let vampire_power = r
        .opt_number(doc, "vampire_power")?
        .or(base.as_ref().map(|h| h.vampire_power))
        .unwrap_or(0.0);
    let vampire_apparent = r
        .opt_number(doc, "vampire_apparent")?
        .or(base.as_ref().map(|h| h.vampire_apparent).filter(|&va| va >= vampire_power))
        .unwrap_or(vampire_power);
    House::new(appliances, iam_count, vampire_power)
        .and_then(|h| h.with_vampire_apparent(vampire_apparent))
        .map_err(|e| r.err(e.to_string()))
}

fn appliance_from_doc(r: &DocReader, doc: &Doc) -> Result<ApplianceModel> {
    let mut model = match r.opt_string(doc, "preset")? {
        Some(name) => {
            let mut m = presets::appliance(&name).ok_or_else(|| r.err(format!("unknown appliance preset `{name}`")))?;
            if let Some(n) = r.opt_string(doc, "name")? {
                m.name = n;
            }
            m
        }
        None => {
            let states = r
                .list(doc, "states")?
                .iter()
                .map(|s| {
                    let active: f64 = r.number(s, "active")?;
                    Ok(ApplianceState {
                        name: r.opt_string(s, "name")?.unwrap_or_default(),
                        active,
                        apparent: r.opt_number(s, "apparent")?.unwrap_or(active),
                        mean_dwell: r.number(s, "mean_dwell")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let transitions = match doc.get("transitions") {
                Some(_) => r
                    .list(doc, "transitions")?
                    .iter()
                    .map(|row| {
                        row.as_list()
                            .ok_or_else(|| r.err("each transition row must be a list"))?
                            .iter()
                            .map(|p| r.parse_scalar(p, "transitions"))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
                None if states.len() == 1 => vec![vec![1.0]],
                None => {
                    let n = states.len();
                    (0..n)
                        .map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect())
                        .collect()
                }
            };
            let mut m = ApplianceModel {
                name: r.string(doc, "name")?,
                states,
                transitions,
                ..presets::always_on("placeholder", 0.0, 0.0)
            };
            m.room = None;
            m
        }
    };
    if let Some(meter) = r.opt_string(doc, "meter")? {
        model.meter = match meter.as_str() {
            "iam" => MeterKind::Iam,
            "clamp" => MeterKind::Clamp,
            "unmetered" => MeterKind::Unmetered,
            other => return Err(r.err(format!("unknown meter kind `{other}`"))),
        };
    }
    if let Some(b) = r.opt_string(doc, "iam_behavior")? {
        model.iam_behavior = match b.as_str() {
            "always_on" => IamBehavior::AlwaysOn,
            "button" => IamBehavior::ButtonOperated,
            "unplugged" => IamBehavior::UnpluggedWhenOff,
            other => return Err(r.err(format!("unknown iam_behavior `{other}`"))),
        };
    }
    if let Some(t) = r.opt_number(doc, "on_power_threshold")? {
        model.on_power_threshold = t;
    }
    if let Some(room) = r.opt_string(doc, "room")? {
        model.room = Some(room);
    }
    model.validate().map_err(|e| r.err(e.to_string()))?;
    Ok(model)
}

pub fn load_house_config(path: &Path) -> Result<House> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    house_from_doc(&Doc::parse(&text, path)?, path)
}
