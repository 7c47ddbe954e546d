//! End-to-end synthesis of one house directory.

use std::f64::consts::SQRT_2;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calibrate::CalibrationConstants;
use crate::datasets::{
    ApplianceMeta, ButtonEvent, ChannelSeries, ElecMeter, HouseDataset, HouseMetadata, MainsRow, MainsSeries,
    MeterDevice, Unit, WaveformRecord, MAX_CHUNK_SECONDS,
};
use crate::error::{Error, Result};
use crate::household::{mains_waveform, House, HouseTrace, IamBehavior, MeterKind, VoltageModel};
use crate::powercalc::{compute_metrics, quantize, AdcConfig, CtClampMeter, PowerMetrics, Provenance, WaveformChunk};
use crate::rfnet::{derive_button_events, run_simulation, DemandSource, IamObservation, IamState, SimConfig, SimResult};

pub const SITE_DEVICE: &str = "EcoManagerWholeHouseTx";
pub const PLUG_DEVICE: &str = "EcoManagerTxPlug";
pub const CLAMP_DEVICE: &str = "CurrentCostTx";

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub house: House,
    pub instance: u32,
    /// Whole seconds since the Unix epoch.
    pub start: i64,
    pub duration: f64,
    pub seed: u64,
    /// RF parameters; `start`, `duration` and `seed` are overwritten.
    pub rf: SimConfig,
    pub voltage: VoltageModel,
    pub ct: CtClampMeter,
    pub adc: AdcConfig,
    /// Seconds of raw waveform to store from the start of the run.
    pub waveform_seconds: u32,
    pub sample_rate: u32,
    pub third_harmonic: f64,
}

impl SimulationPlan {
    pub fn new(house: House, seed: u64, duration: f64) -> Self {
        Self {
            house,
            instance: 1,
            start: 1_420_070_400,
            duration,
            seed,
            rf: SimConfig::default(),
            voltage: VoltageModel::default(),
            ct: CtClampMeter::default(),
            adc: AdcConfig::default(),
            waveform_seconds: 0,
            sample_rate: 16_000,
            third_harmonic: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub dataset: HouseDataset,
    pub trace: HouseTrace,
    pub rf: SimResult,
}

/// Calibration that maps a full-scale peak onto the full `i32` range.
pub fn calibration_for(adc: &AdcConfig) -> Result<CalibrationConstants> {
    let steps = 2f64.powi(31);
    CalibrationConstants::new(
        adc.full_scale_voltage_rms * SQRT_2 / steps,
        adc.full_scale_current_rms * SQRT_2 / steps,
        0.0,
    )
}

struct TraceSource<'a> {
    trace: &'a HouseTrace,
    iams: &'a [usize],
    clamps: &'a [usize],
    voltage: VoltageModel,
    ct: CtClampMeter,
}

impl DemandSource for TraceSource<'_> {
    fn iam_state(&mut self, iam: usize, t: f64) -> IamState {
        let a = self.iams[iam];
        let model = &self.trace.house.appliances[a];
        let state = self.trace.state_at(a, t);
        let active = state != 0;
        IamState {
            powered: model.iam_behavior != IamBehavior::UnpluggedWhenOff || active,
            switch_on: model.iam_behavior != IamBehavior::ButtonOperated || active,
            watts: model.states[state].active,
        }
    }

    fn cctx_reading(&mut self, cctx: usize, t: f64) -> f64 {
        let va = match cctx {
            0 => self.trace.sample_demand(t).mains_apparent,
            k => {
                let a = self.clamps[k - 1];
                self.trace.house.appliances[a].states[self.trace.state_at(a, t)].apparent
            }
        };
        // The clamp sees current only.
        self.ct.apparent_power(va / self.voltage.rms_at(t))
    }
}

fn observations(trace: &HouseTrace, appliance: usize) -> Vec<(i64, IamObservation)> {
    let behavior = trace.house.appliances[appliance].iam_behavior;
    let mut out = Vec::new();
    let mut previous_on = true;
    for seg in trace.segments(appliance) {
        let on = seg.state != 0;
        if on == previous_on {
            continue;
        }
        previous_on = on;
        let t = seg.start.floor() as i64;
        match behavior {
            IamBehavior::AlwaysOn => {}
            IamBehavior::ButtonOperated => out.push((t, IamObservation::Press { on })),
            IamBehavior::UnpluggedWhenOff => out.push((
                t,
                if on { IamObservation::PowerRestored } else { IamObservation::PowerLost },
            )),
        }
    }
    out
}

/// One row per whole second: mean mains P and S over the second.
pub fn analytic_mains(trace: &HouseTrace, voltage: &VoltageModel) -> Result<MainsSeries> {
    let house = &trace.house;
    let mut events: Vec<(f64, usize, usize)> = trace
        .timelines
        .iter()
        .enumerate()
        .flat_map(|(a, line)| line.iter().skip(1).map(move |&(t, s)| (t, a, s)))
        .collect();
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut states = trace.states_at(trace.start);
    let mut demand = house.demand_for(&states);
    let mut next = 0;
    let seconds = trace.duration().floor() as i64;
    let mut rows = Vec::with_capacity(seconds as usize);
    for k in 0..seconds {
        let t0 = trace.start + k as f64;
        let t1 = t0 + 1.0;
        let (mut p, mut s, mut cursor) = (0.0, 0.0, t0);
        while next < events.len() && events[next].0 < t1 {
            let (t, a, state) = events[next];
            p += demand.mains_active * (t - cursor);
            s += demand.mains_apparent * (t - cursor);
            cursor = t.max(cursor);
            states[a] = state;
            demand = house.demand_for(&states);
            next += 1;
        }
        p += demand.mains_active * (t1 - cursor);
        s += demand.mains_apparent * (t1 - cursor);
        rows.push(MainsRow::from_metrics(&PowerMetrics {
            timestamp: t0,
            active_power: p,
            apparent_power: s,
            rms_voltage: voltage.rms_at(t0 + 0.5),
        })?);
    }
    Ok(MainsSeries { rows })
}

fn waveform_records(plan: &SimulationPlan, trace: &HouseTrace, calib: &CalibrationConstants) -> Result<Vec<WaveformRecord>> {
    let per_file = MAX_CHUNK_SECONDS as u32;
    let mut records = Vec::new();
    let mut second = 0;
    while second < plan.waveform_seconds {
        let len = per_file.min(plan.waveform_seconds - second);
        let (mut voltage, mut current) = (Vec::new(), Vec::new());
        for k in second..second + len {
            let t = (plan.start + k as i64) as f64;
            let piece = mains_waveform(
                &trace.sample_demand(t),
                &plan.voltage,
                (plan.start + k as i64) * 1_000_000,
                1.0,
                plan.sample_rate,
                plan.third_harmonic,
            )?;
            voltage.extend(piece.voltage);
            current.extend(piece.current);
        }
        let chunk = WaveformChunk::new(
            (plan.start + second as i64) * 1_000_000,
            plan.sample_rate,
            voltage,
            current,
            Provenance::Physical,
        )?;
        let q = quantize(&chunk, &plan.adc)?;
        if q.clipped > 0 {
            log::warn!("{} waveform samples clipped at full scale", q.clipped);
        }
        records.push(WaveformRecord::from_chunk(&q.chunk, Some(calib))?);
        second += len;
    }
    Ok(records)
}

/// House trace, RF network and metering for one house.
pub fn synthesize(plan: &SimulationPlan) -> Result<Synthesis> {
    if plan.duration < 1.0 || !plan.duration.is_finite() {
        return Err(Error::invalid("simulation must cover at least one second"));
    }
    if plan.waveform_seconds as f64 > plan.duration {
        return Err(Error::invalid("waveform capture is longer than the simulation"));
    }
    plan.house.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let start = plan.start as f64;
    let trace = plan.house.simulate(start, plan.duration, &mut rng)?;

    let apps = &plan.house.appliances;
    let iams: Vec<usize> = (0..apps.len()).filter(|&a| apps[a].meter == MeterKind::Iam).collect();
    let clamps: Vec<usize> = (0..apps.len()).filter(|&a| apps[a].meter == MeterKind::Clamp).collect();
    let rf_cfg = SimConfig {
        start,
        duration: plan.duration,
        seed: rng.next_u64(),
        ..plan.rf.clone()
    };
    let mut source = TraceSource {
        trace: &trace,
        iams: &iams,
        clamps: &clamps,
        voltage: plan.voltage,
        ct: plan.ct,
    };
    let rf = run_simulation(&rf_cfg, iams.len(), clamps.len() + 1, &mut source)?;

    let period = plan.rf.poll_cycle;
    let mut meta = HouseMetadata {
        instance: plan.instance,
        meter_devices: vec![
            MeterDevice { name: SITE_DEVICE.into(), sample_period: plan.rf.cctx_period_mean, measures: Unit::VoltAmperes },
            MeterDevice { name: PLUG_DEVICE.into(), sample_period: period, measures: Unit::Watts },
            MeterDevice { name: CLAMP_DEVICE.into(), sample_period: plan.rf.cctx_period_mean, measures: Unit::VoltAmperes },
        ],
        ..Default::default()
    };
    meta.elec_meters.push(ElecMeter { channel: 1, device: SITE_DEVICE.into(), site_meter: true, submeter_of: None });
    let mut ds_channels = vec![to_series(1, Unit::VoltAmperes, &rf.cctx_readings[0])];
    let mut button_presses = std::collections::BTreeMap::new();
    let mut channel = 1;
    for (a, model) in apps.iter().enumerate() {
        let (device, unit, readings) = match model.meter {
            MeterKind::Unmetered => continue,
            MeterKind::Iam => {
                let i = iams.binary_search(&a).expect("indexed above");
                (PLUG_DEVICE, Unit::Watts, &rf.iam_readings[i])
            }
            MeterKind::Clamp => {
                let j = clamps.binary_search(&a).expect("indexed above");
                (CLAMP_DEVICE, Unit::VoltAmperes, &rf.cctx_readings[j + 1])
            }
        };
        channel += 1;
        meta.elec_meters.push(ElecMeter { channel, device: device.into(), site_meter: false, submeter_of: Some(1) });
        meta.appliances.push(ApplianceMeta {
            name: model.name.clone(),
            meters: vec![channel],
            room: model.room.clone(),
            on_power_threshold: (model.on_power_threshold != crate::household::DEFAULT_ON_POWER_THRESHOLD)
                .then_some(model.on_power_threshold),
        });
        ds_channels.push(to_series(channel, unit, readings));
        if model.meter == MeterKind::Iam {
            let events: Vec<ButtonEvent> = derive_button_events(&observations(&trace, a));
            if !events.is_empty() {
                button_presses.insert(channel, events);
            }
        }
    }

    let mut dataset = HouseDataset::new(meta);
    dataset.channels = ds_channels;
    dataset.button_presses = button_presses;
    dataset.mains = Some(analytic_mains(&trace, &plan.voltage)?);
    if plan.waveform_seconds > 0 {
        let calib = calibration_for(&plan.adc)?;
        dataset.waveforms = waveform_records(plan, &trace, &calib)?;
        dataset.calibration = Some(calib);
    }
    dataset.validate()?;
    Ok(Synthesis { dataset, trace, rf })
}

fn to_series(channel: u32, unit: Unit, readings: &[(i64, u32)]) -> ChannelSeries {
    let mut series = ChannelSeries::new(channel, unit);
    series.readings = readings.iter().map(|&(us, v)| (us.div_euclid(1_000_000), v)).collect();
    series.readings.dedup_by_key(|r| r.0);
    series
}

/// Meter stored waveform chunks into 1 Hz (or `chunk_period`) mains rows.
pub fn meter_records(
    records: &[WaveformRecord],
    calib: &CalibrationConstants,
    chunk_period: f64,
) -> Result<MainsSeries> {
    let mut metrics = Vec::new();
    for r in records {
        metrics.extend(compute_metrics(&r.to_chunk(Some(calib))?, chunk_period)?);
    }
    metrics.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let rows = metrics.iter().map(MainsRow::from_metrics).collect::<Result<Vec<_>>>()?;
    Ok(MainsSeries { rows })
}

/// Every `vi-*.wav` chunk in `dir`, in start-time order.
pub fn read_waveform_dir(dir: &Path) -> Result<Vec<WaveformRecord>> {
    let mut paths: Vec<(i64, std::path::PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_str().map(str::to_string)?;
            crate::datasets::parse_waveform_file_name(&name).map(|t| (t, e.path()))
        })
        .collect();
    paths.sort();
    paths.iter().map(|(_, p)| WaveformRecord::read(p)).collect()
}
