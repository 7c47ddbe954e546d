//! One line per acceptance criterion, then a single assertion over all of them.
//!
//! Run with `cargo test -p dale-forge --test acceptance`; the lines go
//! straight to stderr so they show without `--nocapture`.

mod common;

use std::f64::consts::SQRT_2;
use std::io::Write;

use dale_forge::cli::{meter_records, synthesize, SimulationPlan};
use dale_forge::datasets::{read_house, waveform_file_name, write_house, MAINS_FILE};
use dale_forge::household::presets;
use dale_forge::powercalc::{compute_metrics, synth_waveform, AdcConfig, AdcSpan, Harmonic, SynthParams};
use dale_forge::rfnet::{
    cctx_frame, decode_iam, encode_iam, flip_bit, parse_cctx, run_simulation, ConstantSource, SimConfig,
};
use dale_forge::stats::{gap_fill, report, ReportOptions};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn emit(o: &Outcome) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {}: {verdict}: {}", o.id, o.detail);
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn power_math() -> Outcome {
    let (v, i) = (230.0, 10.0);
    let run = |hz: f64| {
        let chunk = synth_waveform(
            &SynthParams::new(hz, 10.0, 16_000, v).with_current(Harmonic::new(1, i, 0.0)),
        )
        .unwrap();
        let m = compute_metrics(&chunk, 1.0).unwrap();
        m.iter()
            .map(|w| rel(w.active_power, v * i).max(rel(w.apparent_power, v * i)))
            .fold(0.0, f64::max)
    };
    let integer = run(50.0);
    let fractional = run(50.5).max(run(50.3)).max(run(49.7));
    Outcome {
        id: 1,
        pass: integer < 5e-4 && fractional < 0.02,
        detail: format!(
            "power math: worst error {:.2e} at 50 Hz (limit 5e-4), {:.2e} at 49.7/50.3/50.5 Hz (limit 2e-2)",
            integer, fractional
        ),
    }
}

fn resolution() -> Outcome {
    let adc = AdcConfig::default();
    let current = adc.current_step();
    let voltage = adc.voltage_step();
    let exact_i = 30.0 * SQRT_2 * 2.0 / 32_768.0;
    let exact_v = 253.0 * SQRT_2 * 2.0 / 32_768.0;
    let emontx = AdcConfig::new(9, 253.0, 30.0).unwrap().with_span(AdcSpan::Range);
    let watts = emontx.power_resolution_at(230.0);
    // Reference figures as printed: 85 A and 716 V peak-to-peak over 2^15 codes.
    let checks = [
        current == exact_i && voltage == exact_v,
        rel(current, 85.0 / 32_768.0) < 0.05,
        format!("{:.0}", current * 1e3) == "3",
        rel(voltage, 0.022) < 0.05,
        rel(emontx.current_step(), 0.06) < 0.05,
        rel(watts, 13.8) < 0.05,
    ];
    Outcome {
        id: 2,
        pass: checks.iter().all(|&c| c),
        detail: format!(
            "resolution: current {:.3} mA/step (85 App / 2^15 = {:.3} mA, rounds to 3 mA), voltage {:.2} mV/step (22 mV), 9-bit {:.4} A/step x 230 V = {:.2} W (13.8 W)",
            current * 1e3,
            85.0 / 32.768,
            voltage * 1e3,
            emontx.current_step(),
            watts
        ),
    }
}

fn codec() -> Outcome {
    let payloads: [&[u8]; 4] = [&[0x00], &[0xff; 6], &[0x12, 0x34, 0x56, 0x78, 0x9a], &[0x01, 0x80, 0x7f, 0xfe]];
    let (mut flips, mut caught) = (0usize, 0usize);
    for p in payloads {
        let frame = encode_iam(p).unwrap();
        for bit in 0..frame.len() * 8 {
            let mut f = frame.clone();
            flip_bit(&mut f, bit);
            flips += 1;
            caught += usize::from(decode_iam(&f).is_err());
        }
    }
    let (mut m_flips, mut m_caught) = (0usize, 0usize);
    for (id, reading) in [(0u16, 0u16), (0xffff, 0xffff), (0x1234, 2990), (7, 1)] {
        let frame = cctx_frame(id, reading);
        for bit in 0..frame.len() * 8 {
            let mut f = frame.clone();
            flip_bit(&mut f, bit);
            m_flips += 1;
            m_caught += usize::from(parse_cctx(&f).is_err());
        }
    }
    let frame = cctx_frame(7, 1);
    let mut swapped = frame.clone();
    let last = frame.len() * 8 - 2;
    flip_bit(&mut swapped, last);
    flip_bit(&mut swapped, last + 1);
    let undetected = matches!(parse_cctx(&swapped), Ok((7, r)) if r != 1);
    Outcome {
        id: 3,
        pass: caught == flips && m_caught == m_flips && undetected,
        detail: format!(
            "codec: checksum caught {caught}/{flips} single flips, Manchester caught {m_caught}/{m_flips}, swapped pair decodes silently to a wrong reading: {undetected}"
        ),
    }
}

fn dropout() -> Outcome {
    let cfg = SimConfig {
        duration: 86_400.0,
        start: 1_420_070_400.0,
        seed: 2024,
        ..SimConfig::default()
    };
    let blind = run_simulation(&cfg, 0, 46, &mut ConstantSource(300.0)).unwrap().cctx_totals().dropout();
    let polled = run_simulation(&cfg, 52, 3, &mut ConstantSource(100.0)).unwrap().iam_totals().dropout();
    Outcome {
        id: 4,
        pass: (0.04..=0.08).contains(&blind) && polled < 1e-3,
        detail: format!(
            "dropout over 24 h: 46 blind transmitters {:.2}% (6 +/- 2%), 52 polled monitors {:.4}% (< 0.1%)",
            blind * 100.0,
            polled * 100.0
        ),
    }
}

struct House1 {
    proportion: f64,
    correlation: f64,
    ct_vs_meter_day: f64,
    ct_vs_meter_window: f64,
}

fn house1_run() -> House1 {
    let mut plan = SimulationPlan::new(presets::house1(), 1, 7.0 * 86_400.0);
    plan.waveform_seconds = 600;
    let s = synthesize(&plan).unwrap();
    let r = report(&s.dataset, &ReportOptions::default()).unwrap();

    // Site CT channel against the waveform meter's apparent power.
    let site = &s.dataset.channels[0].readings;
    let ct_energy = |t0: i64, t1: i64| -> f64 {
        site.windows(2)
            .filter(|w| w[0].0 >= t0 && w[1].0 <= t1)
            .map(|w| w[0].1 as f64 * (w[1].0 - w[0].0) as f64)
            .sum()
    };
    let ct_span = |t0: i64, t1: i64| -> f64 {
        site.windows(2)
            .filter(|w| w[0].0 >= t0 && w[1].0 <= t1)
            .map(|w| (w[1].0 - w[0].0) as f64)
            .sum()
    };
    let mains = s.dataset.mains.as_ref().unwrap();
    let day0 = plan.start;
    let day1 = day0 + 86_400;
    let meter_day: f64 = mains
        .rows
        .iter()
        .filter(|r| (day0 as f64..day1 as f64).contains(&r.timestamp.to_f64()))
        .map(|r| r.apparent_power.to_f64())
        .sum();
    let ct_day = ct_energy(day0, day1) / ct_span(day0, day1) * 86_400.0;

    let metered = meter_records(&s.dataset.waveforms, s.dataset.calibration.as_ref().unwrap(), 1.0).unwrap();
    let w0 = plan.start;
    let w1 = w0 + 600;
    let meter_window: f64 = metered.rows.iter().map(|r| r.apparent_power.to_f64()).sum();
    let ct_window = ct_energy(w0, w1) / ct_span(w0, w1) * 600.0;

    House1 {
        proportion: r.proportion_submetered.unwrap_or(f64::NAN),
        correlation: r.mains_vs_submeter_correlation.unwrap_or(f64::NAN),
        ct_vs_meter_day: rel(ct_day, meter_day),
        ct_vs_meter_window: rel(ct_window, meter_window),
    }
}

fn house1_targets(h: &House1) -> Outcome {
    Outcome {
        id: 5,
        pass: (h.proportion - 0.80).abs() <= 0.03 && (h.correlation - 0.96).abs() <= 0.02,
        detail: format!(
            "house-1 preset over 7 days (by construction): proportion submetered {:.3} (0.80 +/- 0.03), mains vs submeter correlation {:.3} (0.96 +/- 0.02)",
            h.proportion, h.correlation
        ),
    }
}

fn format_fidelity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let k = std::cell::Cell::new(0u32);
    let result = runner.run(&common::arb_dataset(), |ds| {
        k.set(k.get() + 1);
        let root = dir.path().join(format!("r{}", k.get()));
        let house = write_house(&ds, &root).map_err(|e| TestCaseError::fail(e.to_string()))?;
        if let Some(m) = &ds.mains {
            let text = std::fs::read_to_string(house.join(MAINS_FILE)).unwrap();
            for line in text.lines() {
                let fields: Vec<&str> = line.split(' ').collect();
                let dp = |s: &str| s.split_once('.').map_or(0, |(_, f)| f.len());
                prop_assert_eq!(fields.len(), 4);
                prop_assert_eq!(dp(fields[0]), 1);
                prop_assert!(fields[1..].iter().all(|f| dp(f) == 2));
            }
            prop_assert_eq!(text.lines().count(), m.rows.len());
        }
        let back = read_house(&house).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, ds);
        std::fs::remove_dir_all(&root).unwrap();
        Ok(())
    });
    let name = waveform_file_name(1_422_000_000_123_456).unwrap();
    let pass = result.is_ok() && name == "vi-1422000000_123456.wav";
    Outcome {
        id: 6,
        pass,
        detail: format!(
            "format fidelity: {} generated datasets round-tripped{}, mains.dat at 1 dp / 2 dp, waveform name {name}",
            k.get(),
            result.err().map(|e| format!(" ({e})")).unwrap_or_default()
        ),
    }
}

fn preprocessing() -> Outcome {
    let series = (1_400_000_000u32..1_400_000_100, prop::collection::vec((1u32..600, 0u32..4000), 1..300)).prop_map(
        |(t0, steps)| {
            let mut t = t0 as f64;
            steps
                .into_iter()
                .map(|(dt, v)| {
                    t += dt as f64;
                    (t, v as f64)
                })
                .collect::<Vec<_>>()
        },
    );
    let mut runner = TestRunner::new(Config {
        cases: 512,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&series, |s| {
        let once = gap_fill(&s, 6.0, 120.0);
        prop_assert_eq!(&gap_fill(&once, 6.0, 120.0), &once);
        for w in s.windows(2) {
            let gap = w[1].0 - w[0].0;
            for r in once.iter().filter(|r| r.0 > w[0].0 && r.0 < w[1].0) {
                prop_assert_eq!(r.1, if gap > 120.0 { 0.0 } else { w[0].1 });
            }
        }
        Ok(())
    });
    Outcome {
        id: 7,
        pass: result.is_ok(),
        detail: format!(
            "preprocessing: gap_fill idempotent, gaps over 120 s zero-filled and shorter gaps forward-filled over 512 generated series{}",
            result.err().map(|e| format!(" ({e})")).unwrap_or_default()
        ),
    }
}

fn meters_agree(h: &House1) -> Outcome {
    Outcome {
        id: 8,
        pass: h.ct_vs_meter_day < 0.03 && h.ct_vs_meter_window < 0.03,
        detail: format!(
            "meter agreement: CT clamp at an assumed 230 V vs waveform meter apparent energy differ by {:.2}% over day one and {:.2}% over a 600 s metered capture (< 3%); field-scale results are not reproducible here",
            h.ct_vs_meter_day * 100.0,
            h.ct_vs_meter_window * 100.0
        ),
    }
}

#[test]
fn acceptance() {
    let h1 = house1_run();
    let outcomes = [
        power_math(),
        resolution(),
        codec(),
        dropout(),
        house1_targets(&h1),
        format_fidelity(),
        preprocessing(),
        meters_agree(&h1),
    ];
    outcomes.iter().for_each(emit);
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
