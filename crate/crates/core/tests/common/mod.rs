//! Random dataset generator shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dale_forge::calibrate::CalibrationConstants;
use dale_forge::datasets::{
    ApplianceMeta, ButtonEvent, ChannelSeries, ElecMeter, Fixed, HouseDataset, HouseMetadata, MainsRow, MainsSeries,
    MeterDevice, Unit, WaveformRecord,
};
use proptest::prelude::*;

const DEVICES: [(&str, f64, Unit); 3] = [
    ("EcoManagerWholeHouseTx", 6.0, Unit::VoltAmperes),
    ("EcoManagerTxPlug", 6.0, Unit::Watts),
    ("SoundCardPowerMeter", 1.0, Unit::Watts),
];

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.'#:()-]{0,24}[A-Za-z0-9.)]".prop_map(|s| s)
}

fn readings(max: usize) -> impl Strategy<Value = Vec<(i64, u32)>> {
    (1_300_000_000i64..1_500_000_000, prop::collection::vec((1i64..400, 0u32..25_000), 0..max)).prop_map(
        |(mut t, steps)| {
            steps
                .into_iter()
                .map(|(dt, v)| {
                    t += dt;
                    (t, v)
                })
                .collect()
        },
    )
}

fn mains(max: usize) -> impl Strategy<Value = MainsSeries> {
    (
        13_000_000_000i64..15_000_000_000,
        prop::collection::vec((1i64..100, -50_000i64..2_000_000, 0i64..2_000_000, 20_000i64..26_000), 1..max),
    )
        .prop_map(|(mut t, rows)| MainsSeries {
            rows: rows
                .into_iter()
                .map(|(dt, p, s, v)| {
                    t += dt;
                    MainsRow {
                        timestamp: Fixed::<1>(t),
                        active_power: Fixed::<2>(p),
                        apparent_power: Fixed::<2>(s),
                        rms_voltage: Fixed::<2>(v),
                    }
                })
                .collect(),
        })
}

fn waveform() -> impl Strategy<Value = WaveformRecord> {
    (0i64..2_000_000_000_000_000, prop::sample::select(vec![8_000u32, 16_000, 44_100]), 1usize..64).prop_flat_map(
        |(start_us, sample_rate, n)| {
            (
                prop::collection::vec(any::<i32>(), n),
                prop::collection::vec(any::<i32>(), n),
            )
                .prop_map(move |(voltage, current)| WaveformRecord { start_us, sample_rate, voltage, current })
        },
    )
}

#[derive(Debug, Clone)]
struct Submeter {
    device: usize,
    appliances: Vec<(String, Option<String>, Option<f64>)>,
    readings: Vec<(i64, u32)>,
    presses: Vec<(i64, bool)>,
}

fn submeter() -> impl Strategy<Value = Submeter> {
    (
        1usize..3,
        prop::collection::vec(
            (
                "[a-z][a-z ]{0,10}[a-z]",
                prop::option::of("[a-z]{3,9}"),
                prop::option::of(prop::sample::select(vec![5.0, 10.0, 20.5, 100.0])),
            ),
            0..3,
        ),
        readings(30),
        prop::collection::vec((1_300_000_000i64..1_500_000_000, any::<bool>()), 0..4),
    )
        .prop_map(|(device, appliances, readings, mut presses)| {
            presses.sort();
            Submeter { device, appliances, readings, presses }
        })
}

/// A valid house dataset of modest size.
pub fn arb_dataset() -> impl Strategy<Value = HouseDataset> {
    (
        1u32..30,
        prop::option::of(text()),
        prop::option::of(1850u32..2020),
        prop::option::of(text()),
        prop::option::of(1u32..8),
        readings(40),
        prop::collection::vec(submeter(), 0..5),
        prop::option::of(mains(40)),
        prop::option::of((1e-9..1e-6f64, 1e-10..1e-7f64, -0.5..0.5f64)),
        prop::collection::vec(waveform(), 0..3),
    )
        .prop_map(|(instance, building, year, heating, occupants, site, subs, mains, calib, waves)| {
            let mut meta = HouseMetadata {
                instance,
                building_type: building,
                construction_year: year,
                heating,
                n_occupants: occupants,
                meter_devices: DEVICES
                    .iter()
                    .map(|&(name, sample_period, measures)| MeterDevice { name: name.into(), sample_period, measures })
                    .collect(),
                ..Default::default()
            };
            meta.elec_meters.push(ElecMeter {
                channel: 1,
                device: DEVICES[0].0.into(),
                site_meter: true,
                submeter_of: None,
            });
            let mut channels = vec![ChannelSeries { channel: 1, unit: Unit::VoltAmperes, readings: site }];
            let mut button_presses = BTreeMap::new();
            let mut used_names = std::collections::BTreeSet::new();
            for (k, s) in subs.into_iter().enumerate() {
                let channel = k as u32 + 2;
                meta.elec_meters.push(ElecMeter {
                    channel,
                    device: DEVICES[s.device].0.into(),
                    site_meter: false,
                    submeter_of: Some(1),
                });
                for (name, room, threshold) in s.appliances {
                    if used_names.insert(name.clone()) {
                        meta.appliances.push(ApplianceMeta {
                            name,
                            meters: vec![channel],
                            room,
                            on_power_threshold: threshold,
                        });
                    }
                }
                channels.push(ChannelSeries { channel, unit: DEVICES[s.device].2, readings: s.readings });
                if !s.presses.is_empty() {
                    button_presses.insert(
                        channel,
                        s.presses.into_iter().map(|(timestamp, on)| ButtonEvent { timestamp, on }).collect(),
                    );
                }
            }
            let mut ds = HouseDataset::new(meta);
            ds.channels = channels;
            ds.button_presses = button_presses;
            ds.mains = mains;
            ds.calibration = calib.map(|(v, a, p)| CalibrationConstants::new(v, a, p).unwrap());
            let mut waves = waves;
            waves.sort_by_key(|w| w.start_us);
            waves.dedup_by_key(|w| w.start_us);
            ds.waveforms = waves;
            ds
        })
}
