use std::path::Path;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::powercalc::compute_metrics;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn empty_house_draws_nothing() {
    let h = House::new(vec![], 0, 0.0).unwrap();
    let d = h.demand();
    assert_eq!(d.mains_active, 0.0);
    assert_eq!(d.mains_apparent, 0.0);
}

#[test]
fn idle_monitors_alone() {
    let h = House::new(vec![presets::kettle(), presets::washing_machine()], 52, 0.0).unwrap();
    let d = h.demand_for(&[0, 0]);
    assert!((d.mains_active - 46.8).abs() < 1e-9);
    assert!((d.mains_apparent - 52.0 * 2.4).abs() < 1e-9);
}

#[test]
fn too_few_monitors_rejected() {
    assert!(House::new(vec![presets::kettle()], 0, 0.0).is_err());
    assert!(House::new(vec![presets::kettle()], 1, -1.0).is_err());
}

#[test]
fn zero_step_rejected() {
    let mut h = presets::small_house();
    assert!(h.advance(0.0, &mut rng(1)).is_err());
    assert!(h.advance(-1.0, &mut rng(1)).is_err());
}

#[test]
fn same_seed_same_trajectory() {
    let h = presets::house1();
    let a = h.simulate(0.0, 86_400.0, &mut rng(9)).unwrap();
    let b = h.simulate(0.0, 86_400.0, &mut rng(9)).unwrap();
    assert_eq!(a, b);
    let c = h.simulate(0.0, 86_400.0, &mut rng(10)).unwrap();
    assert_ne!(a, c);
}

/// Stationary vector of the jump chain by repeated multiplication; the lazy
/// chain `(I + P) / 2` avoids oscillation on periodic chains.
fn jump_chain_oracle(m: &ApplianceModel) -> Vec<f64> {
    let n = m.states.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] += 0.5 * v[i];
            for j in 0..n {
                next[j] += 0.5 * v[i] * m.transitions[i][j];
            }
        }
        v = next;
    }
    let w: Vec<f64> = v.iter().zip(&m.states).map(|(x, s)| x * s.mean_dwell).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

#[test]
fn stationary_fractions_match_oracle() {
    for m in [presets::fridge(), presets::washing_machine(), presets::vacuum(), presets::boiler()] {
        let got = m.stationary_fractions();
        let want = jump_chain_oracle(&m);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{}: {got:?} vs {want:?}", m.name);
        }
    }
}

#[test]
fn long_run_occupancy_matches_dwell_means() {
    let fridge = presets::fridge();
    let h = House::new(vec![fridge.clone()], 1, 0.0).unwrap();
    let trace = h.simulate(0.0, 400.0 * 86_400.0, &mut rng(3)).unwrap();
    let occ = trace.occupancy(0);
    let want = jump_chain_oracle(&fridge);
    for (state, (o, w)) in occ.iter().zip(&want).enumerate() {
        if *w > 0.01 {
            assert!((o - w).abs() / w < 0.05, "state {state}: {o} vs {w}");
        }
    }
}

#[test]
fn fridge_power_modes() {
    let h = House::new(vec![presets::fridge()], 1, 0.0).unwrap();
    let trace = h.simulate(0.0, 60.0 * 86_400.0, &mut rng(4)).unwrap();
    let mut seconds = std::collections::BTreeMap::<u64, f64>::new();
    for s in trace.segments(0) {
        let w = trace.house.appliances[0].states[s.state].active;
        if w >= 5.0 {
            *seconds.entry(w as u64).or_default() += s.end - s.start;
        }
    }
    let modes: Vec<u64> = seconds.keys().copied().collect();
    assert_eq!(modes, vec![17, 90, 250]);
    let top = seconds.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(*top.0, 90);
}

#[test]
fn vacuum_has_six_separated_settings() {
    let v = presets::vacuum();
    let mut powers: Vec<f64> = v.states.iter().map(|s| s.active).filter(|&p| p > 0.0).collect();
    powers.sort_by(f64::total_cmp);
    assert_eq!(powers.len(), 6);
    assert!(powers.windows(2).all(|w| w[1] - w[0] > 50.0));
}

#[test]
fn trace_sampling_matches_live_state() {
    let h = presets::small_house();
    let trace = h.simulate(1000.0, 7200.0, &mut rng(5)).unwrap();
    for line in &trace.timelines {
        assert!(line.windows(2).all(|w| w[0].0 <= w[1].0));
        assert_eq!(line[0].0, 1000.0);
    }
    let (p, s) = trace.mean_mains(1000.0, 8200.0);
    assert!(s >= p);
}

#[test]
fn mean_mains_of_constant_house() {
    let h = House::new(vec![presets::always_on("router", 7.0, 12.0)], 1, 10.0).unwrap();
    let trace = h.simulate(0.0, 100.0, &mut rng(0)).unwrap();
    let (p, _) = trace.mean_mains(10.0, 90.0);
    assert!((p - (7.0 + 0.9 + 10.0)).abs() < 1e-12);
}

#[test]
fn config_round_trip() {
    for h in [presets::house1(), presets::small_house()] {
        let text = house_to_doc(&h).to_text();
        let back = house_from_doc(&crate::datasets::Doc::parse(&text, Path::new("h")).unwrap(), Path::new("h")).unwrap();
        assert_eq!(back, h);
    }
}

#[test]
fn config_with_preset_and_extras() {
    let text = "\
preset: small
vampire_power: 30
appliances:
  - preset: kettle
    name: second kettle
  - name: heater
    meter: unmetered
    states:
      - name: off
        active: 0
        mean_dwell: 3600
      - name: on
        active: 2000
        mean_dwell: 600
";
    let h = house_from_doc(&crate::datasets::Doc::parse(text, Path::new("h")).unwrap(), Path::new("h")).unwrap();
    assert_eq!(h.appliances.len(), 7);
    assert_eq!(h.iam_count, 6);
    assert_eq!(h.vampire_power, 30.0);
    assert_eq!(h.appliances[6].meter, MeterKind::Unmetered);
    assert_eq!(h.appliances[6].transitions, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

    let bad = "preset: mansion\n";
    assert!(house_from_doc(&crate::datasets::Doc::parse(bad, Path::new("h")).unwrap(), Path::new("h")).is_err());
}

#[test]
fn waveform_reproduces_demand() {
    let h = presets::house1();
    let v = VoltageModel::default();
    for states in [vec![0; 57], h.appliances.iter().map(|a| a.states.len() - 1).collect()] {
        let d = h.demand_for(&states);
        for harmonic in [0.0, 0.1] {
            let chunk = mains_waveform(&d, &v, 1_000_000, 1.0, 8000, harmonic).unwrap();
            let m = compute_metrics(&chunk, 1.0).unwrap();
            assert!((m[0].active_power - d.mains_active).abs() / d.mains_active < 1e-3);
            assert!((m[0].apparent_power - d.mains_apparent).abs() / d.mains_apparent < 1e-3);
            assert!((m[0].rms_voltage - v.rms_at(1.0)).abs() < 0.05);
        }
    }
}

#[test]
fn voltage_model_daily_cycle() {
    let v = VoltageModel::default();
    assert!((v.rms_at(4.0 * 3600.0) - 236.0).abs() < 1e-9);
    assert!((v.rms_at(16.0 * 3600.0) - 230.0).abs() < 1e-9);
    assert!((v.rms_at(86_400.0 + 4.0 * 3600.0) - 236.0).abs() < 1e-9);
}

fn arb_house() -> impl Strategy<Value = House> {
    let state = (0.0..3000.0f64, 1.0..2.0f64, 1.0..5000.0f64)
        .prop_map(|(p, ratio, dwell)| ApplianceState::new("s", p, p * ratio, dwell));
    let appliance = prop::collection::vec(state, 1..5);
    (prop::collection::vec(appliance, 0..8), 0u32..60, 0.0..200.0f64).prop_map(|(apps, extra, vampire)| {
        let models: Vec<ApplianceModel> = apps
            .into_iter()
            .enumerate()
            .map(|(k, states)| ApplianceModel::cycle(&format!("a{k}"), states).unwrap())
            .collect();
        let n = models.len() as u32;
        House::new(models, n + extra, vampire).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mains_is_appliances_plus_standing_draw(house in arb_house(), seed in any::<u64>(), t in 0.0..20_000.0f64) {
        let trace = house.simulate(0.0, 20_000.0, &mut rng(seed)).unwrap();
        let d = trace.sample_demand(t);
        let appliances: f64 = d.active.iter().sum();
        let standing = house.iam_count as f64 * IAM_SELF_ACTIVE + house.vampire_power;
        prop_assert!((d.mains_active - appliances - standing).abs() <= 1e-9 * d.mains_active.max(1.0));
        for (p, s) in d.active.iter().zip(&d.apparent) {
            prop_assert!(s >= p);
        }
        prop_assert!(d.mains_apparent >= d.mains_active - 1e-9);
    }
}
