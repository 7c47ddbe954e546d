use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::household::{presets, VoltageModel};

#[test]
fn durations() {
    assert_eq!(parse_duration("3600"), Ok(3600.0));
    assert_eq!(parse_duration("90m"), Ok(5400.0));
    assert_eq!(parse_duration("24h"), Ok(86_400.0));
    assert_eq!(parse_duration("7d"), Ok(604_800.0));
    assert_eq!(parse_duration("1.5s"), Ok(1.5));
    assert!(parse_duration("-1h").is_err());
    assert!(parse_duration("d").is_err());
    assert!(parse_duration("week").is_err());
}

#[test]
fn error_classes() {
    assert_eq!(exit_code(&Error::invalid("x")), 1);
    assert_eq!(exit_code(&Error::Consistency("x".into())), 2);
    assert_eq!(exit_code(&Error::parse("f", 3, "x")), 2);
    assert_eq!(exit_code(&Error::io("f", std::io::Error::other("x"))), 3);
}

#[test]
fn analytic_mains_matches_trace_means() {
    let house = presets::small_house();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trace = house.simulate(1_420_070_400.0, 7200.0, &mut rng).unwrap();
    let vm = VoltageModel::default();
    let m = analytic_mains(&trace, &vm).unwrap();
    assert_eq!(m.rows.len(), 7200);
    for (k, row) in m.rows.iter().enumerate().step_by(37) {
        let t0 = trace.start + k as f64;
        let (p, s) = trace.mean_mains(t0, t0 + 1.0);
        assert_eq!(row.timestamp.to_f64(), t0);
        assert!((row.active_power.to_f64() - p).abs() <= 0.005 + 1e-9);
        assert!((row.apparent_power.to_f64() - s).abs() <= 0.005 + 1e-9);
    }
}

#[test]
fn synthesis_layout() {
    let plan = SimulationPlan::new(presets::small_house(), 21, 3600.0);
    let s = synthesize(&plan).unwrap();
    let ds = &s.dataset;
    assert_eq!(ds.channels.len(), 6);
    assert!(ds.metadata.meter(1).unwrap().site_meter);
    assert_eq!(ds.metadata.label(1).as_deref(), Some("aggregate"));
    assert!(ds.channels.iter().all(|c| c.readings.windows(2).all(|w| w[0].0 < w[1].0)));
    assert!(ds.calibration.is_none() && ds.waveforms.is_empty());
    let again = synthesize(&plan).unwrap();
    assert_eq!(again.dataset, s.dataset);
}

#[test]
fn button_monitor_reports_presses() {
    let house = House::iams_for_metered(vec![presets::tv()], 0.0).unwrap();
    let s = synthesize(&SimulationPlan::new(house, 8, 5.0 * 86_400.0)).unwrap();
    let presses = &s.dataset.button_presses[&2];
    let changes = s.trace.timelines[0].windows(2).filter(|w| (w[0].1 == 0) != (w[1].1 == 0)).count();
    assert!(!presses.is_empty());
    assert!(presses.len() <= changes + 1);
    assert!(presses.windows(2).all(|w| w[0].on != w[1].on));
}

#[test]
fn waveform_capture_is_calibrated() {
    let mut plan = SimulationPlan::new(presets::small_house(), 2, 60.0);
    plan.waveform_seconds = 5;
    plan.sample_rate = 4000;
    let s = synthesize(&plan).unwrap();
    let calib = s.dataset.calibration.unwrap();
    let metered = meter_records(&s.dataset.waveforms, &calib, 1.0).unwrap();
    let analytic = s.dataset.mains.as_ref().unwrap();
    assert_eq!(metered.rows.len(), 5);
    for (m, a) in metered.rows.iter().zip(&analytic.rows) {
        assert_eq!(m.timestamp, a.timestamp);
        let (mp, ap) = (m.apparent_power.to_f64(), a.apparent_power.to_f64());
        assert!((mp - ap).abs() <= 0.02 * ap + 1.0, "{mp} vs {ap}");
    }
}
