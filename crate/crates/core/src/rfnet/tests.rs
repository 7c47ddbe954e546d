use super::*;

fn cfg(duration: f64, seed: u64) -> SimConfig {
    SimConfig {
        duration,
        seed,
        start: 1_400_000_000.0,
        ..SimConfig::default()
    }
}

#[test]
fn single_iam_uncontended() {
    let r = run_simulation(&cfg(60.0, 1), 1, 0, &mut ConstantSource(95.0)).unwrap();
    assert_eq!(r.iam_readings[0].len(), 10);
    assert_eq!(r.iam_totals().lost(), 0);
    assert!(r.iam_readings[0].iter().all(|&(_, w)| w == 95));
    let gaps: Vec<i64> = r.iam_readings[0].windows(2).map(|w| w[1].0 - w[0].0).collect();
    assert!(gaps.iter().all(|&g| g == 6_000_000), "{gaps:?}");
}

#[test]
fn lone_transmitter_never_loses_without_corruption() {
    let c = SimConfig {
        bit_flip_probability: 0.0,
        ..cfg(86_400.0, 2)
    };
    let r = run_simulation(&c, 0, 1, &mut ConstantSource(400.0)).unwrap();
    assert_eq!(r.cctx_totals().lost(), 0);
    assert!(r.cctx_totals().expected > 13_000);
    let p = r.cctx[0].period;
    assert!((5.7..=6.3).contains(&p));
}

#[test]
fn periods_within_tolerance() {
    let r = run_simulation(&cfg(10.0, 3), 0, 200, &mut ConstantSource(1.0)).unwrap();
    assert!(r.cctx.iter().all(|n| (5.7..=6.3).contains(&n.period)));
    let mut ids: Vec<u16> = r.cctx.iter().map(|n| n.id).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 200);
}

#[test]
fn transmitters_are_strictly_periodic() {
    let c = SimConfig {
        bit_flip_probability: 0.0,
        record_log: true,
        ..cfg(600.0, 4)
    };
    let r = run_simulation(&c, 0, 1, &mut ConstantSource(1.0)).unwrap();
    let period = (r.cctx[0].period * 1e6).round() as i64;
    for w in r.cctx_readings[0].windows(2) {
        assert!((w[1].0 - w[0].0 - period).abs() <= 1);
    }
}

#[test]
fn collision_destroys_both() {
    let c = SimConfig {
        bit_flip_probability: 0.0,
        ..cfg(86_400.0, 5)
    };
    let r = run_simulation(&c, 0, 2, &mut ConstantSource(1.0)).unwrap();
    let t = r.cctx_totals();
    assert_eq!(t.checksum + t.manchester, 0);
    assert_eq!(r.cctx_stats[0].collisions, r.cctx_stats[1].collisions);
}

#[test]
fn blind_broadcasters_lose_about_six_percent() {
    let r = run_simulation(&cfg(86_400.0, 6), 0, 46, &mut ConstantSource(300.0)).unwrap();
    let d = r.cctx_totals().dropout();
    assert!((0.04..=0.08).contains(&d), "dropout {d}");
}

#[test]
fn polled_iams_rarely_lose() {
    let r = run_simulation(&cfg(6.0 * 3600.0, 7), 52, 3, &mut ConstantSource(100.0)).unwrap();
    let d = r.iam_totals().dropout();
    assert!(d < 1e-3, "dropout {d}");
    for readings in &r.iam_readings {
        assert!(readings.windows(2).all(|w| w[1].0 / 1_000_000 > w[0].0 / 1_000_000));
    }
}

#[test]
fn guard_window_never_adds_collisions() {
    for seed in 0..4 {
        let with = run_simulation(&cfg(3.0 * 3600.0, seed), 40, 6, &mut ConstantSource(50.0)).unwrap();
        let without = run_simulation(&cfg(3.0 * 3600.0, seed).without_guard(), 40, 6, &mut ConstantSource(50.0)).unwrap();
        assert_eq!(with.cctx, without.cctx);
        assert!(with.collisions() <= without.collisions(), "seed {seed}: {} > {}", with.collisions(), without.collisions());
        assert!(without.iam_totals().collisions > 0);
    }
}

#[test]
fn identical_seeds_identical_logs() {
    let c = SimConfig {
        record_log: true,
        bit_flip_probability: 1e-3,
        ..cfg(600.0, 8)
    };
    let a = run_simulation(&c, 10, 5, &mut ConstantSource(12.0)).unwrap();
    let b = run_simulation(&c, 10, 5, &mut ConstantSource(12.0)).unwrap();
    assert_eq!(a.log, b.log);
    assert!(a.log.iter().any(|e| matches!(e, SimEvent::Loss { cause: LossKind::Checksum, .. })));
    assert!(a.log.iter().any(|e| matches!(e, SimEvent::Loss { cause: LossKind::Manchester, .. })));
    let mut buf = Vec::new();
    write_event_log(&a.log, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), a.log.len());
    let first: SimEvent = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first, a.log[0]);
}

#[test]
fn oversized_readings_rejected() {
    let r = run_simulation(&cfg(60.0, 9), 1, 0, &mut ConstantSource(4500.0)).unwrap();
    assert!(r.iam_readings[0].is_empty());
    assert_eq!(r.iam_stats[0].rejected, 10);
}

struct Unplugged;

impl DemandSource for Unplugged {
    fn iam_state(&mut self, _: usize, t: f64) -> IamState {
        IamState {
            powered: t < 1_400_000_030.0,
            switch_on: true,
            watts: 10.0,
        }
    }
    fn cctx_reading(&mut self, _: usize, _: f64) -> f64 {
        0.0
    }
}

#[test]
fn unpowered_monitor_is_absent_not_lost() {
    let r = run_simulation(&cfg(60.0, 10), 1, 0, &mut Unplugged).unwrap();
    assert_eq!(r.iam_stats[0].expected, 5);
    assert_eq!(r.iam_stats[0].lost(), 0);
}

#[test]
fn config_checks() {
    assert!(SimConfig { bit_flip_probability: 1.5, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { guard_window: -0.1, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { iam_turnaround: 0.018, ..SimConfig::default() }.validate().is_err());
    assert!(run_simulation(&SimConfig::default(), 0, 0, &mut ConstantSource(0.0)).is_err());
}
