//! Illustrative appliance and house catalogue. Figures are plausible
//! round numbers, not measurements.

use super::{ApplianceModel, ApplianceState as S, House, IamBehavior, MeterKind};

const HOUR: f64 = 3600.0;
const DAY: f64 = 86_400.0;

fn ok(r: crate::Result<ApplianceModel>) -> ApplianceModel {
    r.expect("catalogue entries are valid")
}

/// Idle (with optional standby draw) alternating with a single active state.
pub fn occasional(name: &str, standby: f64, watts: f64, va: f64, idle_mean: f64, on_mean: f64) -> ApplianceModel {
    ok(ApplianceModel::star(
        name,
        vec![S::resistive("idle", standby, idle_mean), S::new("on", watts, va, on_mean)],
        &[1.0],
    ))
}

/// Steady load that never changes state.
pub fn always_on(name: &str, watts: f64, va: f64) -> ApplianceModel {
    ok(ApplianceModel::constant(name, watts, va))
}

/// Compressor cycling with an occasional door lamp and defrost heater.
pub fn fridge() -> ApplianceModel {
    ok(ApplianceModel::new(
        "fridge",
        vec![
            S::resistive("off", 0.0, 1500.0),
            S::new("compressor", 90.0, 150.0, 900.0),
            S::resistive("lamp", 17.0, 40.0),
            S::resistive("defrost", 250.0, 1200.0),
        ],
        vec![
            vec![0.0, 0.95, 0.04, 0.01],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ],
    ))
    .in_room("kitchen")
}

pub fn freezer() -> ApplianceModel {
    ok(ApplianceModel::cycle(
        "freezer",
        vec![S::resistive("off", 0.0, 2400.0), S::new("compressor", 80.0, 135.0, 1200.0)],
    ))
    .in_room("kitchen")
}

pub fn kettle() -> ApplianceModel {
    occasional("kettle", 0.0, 2800.0, 2800.0, 6.0 * HOUR, 150.0).in_room("kitchen")
}

pub fn toaster() -> ApplianceModel {
    occasional("toaster", 0.0, 1100.0, 1100.0, DAY, 150.0).in_room("kitchen")
}

pub fn microwave() -> ApplianceModel {
    occasional("microwave", 2.0, 1200.0, 1500.0, 10.0 * HOUR, 180.0).in_room("kitchen")
}

pub fn washing_machine() -> ApplianceModel {
    ok(ApplianceModel::cycle(
        "washing machine",
        vec![
            S::resistive("idle", 0.0, 1.5 * DAY),
            S::new("fill", 10.0, 30.0, 300.0),
            S::resistive("heat", 2000.0, 900.0),
            S::new("wash", 200.0, 330.0, 1800.0),
            S::new("spin", 400.0, 600.0, 600.0),
        ],
    ))
    .in_room("kitchen")
}

pub fn dishwasher() -> ApplianceModel {
    ok(ApplianceModel::cycle(
        "dish washer",
        vec![
            S::resistive("idle", 0.0, 1.5 * DAY),
            S::resistive("heat", 2000.0, 900.0),
            S::new("wash", 100.0, 150.0, 1800.0),
            S::resistive("rinse heat", 2000.0, 600.0),
            S::resistive("dry", 10.0, 1200.0),
        ],
    ))
    .in_room("kitchen")
}

pub fn lights(name: &str, watts: f64) -> ApplianceModel {
    occasional(name, 0.0, watts, watts, 6.0 * HOUR, 2.0 * HOUR)
}

pub fn tv() -> ApplianceModel {
    occasional("television", 1.0, 110.0, 130.0, 8.0 * HOUR, 3.0 * HOUR)
        .with_threshold(20.0)
        .with_iam_behavior(IamBehavior::ButtonOperated)
        .in_room("lounge")
}

/// Six distinct suction settings, each well separated from the next.
pub fn vacuum() -> ApplianceModel {
    let mut states = vec![S::resistive("stored", 0.0, 2.0 * DAY)];
    for k in 0..6 {
        let watts = 350.0 + 210.0 * k as f64;
        states.push(S::new(&format!("setting {}", k + 1), watts, watts / 0.6, 600.0));
    }
    ok(ApplianceModel::star("vacuum cleaner", states, &[1.0; 6]))
        .with_iam_behavior(IamBehavior::UnpluggedWhenOff)
}

pub fn boiler() -> ApplianceModel {
    ok(ApplianceModel::cycle(
        "boiler",
        vec![S::new("standby", 8.0, 20.0, 1.5 * HOUR), S::new("firing", 110.0, 140.0, 40.0 * 60.0)],
    ))
    .with_meter(MeterKind::Clamp)
}

pub fn solar_thermal_pump() -> ApplianceModel {
    occasional("solar thermal pump", 0.0, 60.0, 100.0, 10.0 * HOUR, 3.0 * HOUR).with_meter(MeterKind::Clamp)
}

/// Catalogue entry by name, for house configuration files.
pub fn appliance(name: &str) -> Option<ApplianceModel> {
    Some(match name {
        "fridge" => fridge(),
        "freezer" => freezer(),
        "kettle" => kettle(),
        "toaster" => toaster(),
        "microwave" => microwave(),
        "washing machine" | "washing_machine" => washing_machine(),
        "dish washer" | "dishwasher" => dishwasher(),
        "lights" => lights("lights", 60.0),
        "television" | "tv" => tv(),
        "vacuum cleaner" | "vacuum" => vacuum(),
        "boiler" => boiler(),
        "solar thermal pump" => solar_thermal_pump(),
        _ => return None,
    })
}

/// Five plug-monitored appliances and nothing unmetered but the floor.
pub fn small_house() -> House {
    House::iams_for_metered(
        vec![fridge(), kettle(), washing_machine(), tv(), lights("lounge lamp", 60.0)],
        25.0,
    )
    .expect("preset is valid")
}

/// A heavily submetered house: 52 plug monitors, two clamp submeters and a
/// handful of hard-wired loads that no submeter sees.
pub fn house1() -> House {
    let mut a = vec![
        fridge(),
        freezer(),
        kettle(),
        toaster(),
        microwave(),
        washing_machine(),
        dishwasher(),
        tv(),
        vacuum(),
        occasional("hair dryer", 0.0, 1800.0, 1800.0, DAY, 300.0).with_iam_behavior(IamBehavior::UnpluggedWhenOff),
        occasional("straighteners", 0.0, 60.0, 60.0, 2.0 * DAY, 900.0).with_iam_behavior(IamBehavior::UnpluggedWhenOff),
        occasional("iron", 0.0, 1200.0, 1200.0, 4.0 * DAY, 1200.0),
        occasional("electric space heater", 0.0, 2000.0, 2000.0, 3.0 * DAY, 2.0 * HOUR),
        occasional("kitchen radio", 1.0, 8.0, 12.0, 10.0 * HOUR, 2.0 * HOUR),
        occasional("coffee maker", 0.0, 1000.0, 1000.0, DAY, 240.0),
        occasional("bread maker", 0.0, 500.0, 500.0, 4.0 * DAY, 3.0 * HOUR),
        occasional("food mixer", 0.0, 300.0, 500.0, 3.0 * DAY, 300.0),
        occasional("laptop", 0.0, 45.0, 70.0, 8.0 * HOUR, 4.0 * HOUR),
        occasional("office pc", 3.0, 90.0, 100.0, 12.0 * HOUR, 5.0 * HOUR),
        occasional("office monitor", 0.5, 30.0, 40.0, 12.0 * HOUR, 5.0 * HOUR),
        occasional("second monitor", 0.5, 25.0, 35.0, 16.0 * HOUR, 4.0 * HOUR),
        occasional("laser printer", 2.0, 600.0, 650.0, DAY, 60.0),
        occasional("htpc", 2.0, 60.0, 70.0, 10.0 * HOUR, 3.0 * HOUR),
        occasional("amplifier", 1.0, 40.0, 55.0, 10.0 * HOUR, 3.0 * HOUR).with_iam_behavior(IamBehavior::ButtonOperated),
        occasional("subwoofer", 1.0, 25.0, 40.0, 10.0 * HOUR, 3.0 * HOUR),
        occasional("dvd player", 1.0, 15.0, 20.0, 2.0 * DAY, 2.0 * HOUR),
        occasional("hifi", 2.0, 30.0, 40.0, DAY, 2.0 * HOUR),
        occasional("phone charger", 0.0, 6.0, 10.0, 12.0 * HOUR, 2.0 * HOUR),
        occasional("tablet charger", 0.0, 10.0, 15.0, 12.0 * HOUR, 3.0 * HOUR),
        occasional("toothbrush charger", 1.0, 6.0, 9.0, DAY, 4.0 * HOUR),
        occasional("electric blanket", 0.0, 60.0, 60.0, 20.0 * HOUR, 1.5 * HOUR),
        occasional("fan", 0.0, 40.0, 60.0, 2.0 * DAY, 4.0 * HOUR),
        occasional("dehumidifier", 0.0, 200.0, 260.0, DAY, 3.0 * HOUR),
        occasional("soldering iron", 0.0, 40.0, 40.0, 3.0 * DAY, 2.0 * HOUR),
        occasional("lamp drill charger", 0.0, 30.0, 45.0, 4.0 * DAY, 3.0 * HOUR),
        always_on("broadband router", 7.0, 12.0),
        always_on("adsl modem", 6.0, 10.0),
        always_on("network switch", 5.0, 8.0),
        always_on("network attached storage", 18.0, 25.0),
        always_on("alarm panel", 4.0, 7.0),
        always_on("aquarium pump", 5.0, 8.0),
    ];
    for (name, watts) in [
        ("kitchen lights", 50.0),
        ("lounge lamp", 60.0),
        ("bedroom lamp", 40.0),
        ("hall lamp", 25.0),
        ("office lamp", 30.0),
        ("childs lamp", 20.0),
        ("landing lamp", 20.0),
        ("utility lights", 40.0),
        ("outside lights", 50.0),
        ("bathroom lights", 30.0),
        ("dining room lamp", 40.0),
    ] {
        a.push(lights(name, watts));
    }
    debug_assert_eq!(a.len(), 52);
    a.push(boiler());
    a.push(solar_thermal_pump());
    a.push(occasional("electric hob", 0.0, 400.0, 400.0, HOUR, 240.0).with_meter(MeterKind::Unmetered));
    a.push(occasional("extractor fan", 0.0, 40.0, 60.0, 6.0 * HOUR, 1800.0).with_meter(MeterKind::Unmetered));
    a.push(occasional("ceiling lights", 0.0, 120.0, 120.0, 8.0 * HOUR, 3.0 * HOUR).with_meter(MeterKind::Unmetered));
    House::new(a, 52, 60.0).expect("preset is valid")
}

/// House preset by name.
pub fn house(name: &str) -> Option<House> {
    match name {
        "house1" | "house_1" => Some(house1()),
        "small" => Some(small_house()),
        _ => None,
    }
}

pub const HOUSE_PRESETS: &[&str] = &["house1", "small"];
