//! Regenerates `data/relations.csv` and `data/descriptions.jsonl`, the
//! bundled nine-task corpus. Output is deterministic.
//!
//!     cargo run -p iem-core --example gen_bundled

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

use iem_core::corpus::EntityKind;
use iem_core::prompting::EntityDescription;
use iem_core::rng::{stream, StreamRng};

const SEED: u64 = 20_250_301;

const COLUMNS: [&str; 11] = [
    "Asset",
    "Category",
    "Fault",
    "Sensor",
    "Component",
    "Equipment category",
    "Equipment class",
    "Equipment unit",
    "Failure description",
    "Asset name",
    "Failure mode class",
];

struct Row {
    task: &'static str,
    fields: Vec<(&'static str, String)>,
    item: String,
}

fn row(task: &'static str, fields: &[(&'static str, &str)], item: &str) -> Row {
    Row {
        task,
        fields: fields.iter().map(|(k, v)| (*k, v.to_string())).collect(),
        item: item.to_string(),
    }
}

const CATEGORIES: [&str; 3] = ["electric", "rotating", "fluid"];

const ELECTRIC_SENSORS: [&str; 17] = [
    "current", "voltage", "axial flux", "partial discharge", "insulation resistance",
    "winding temperature", "cooling gas", "output power", "power factor", "frequency",
    "harmonic distortion", "dissolved gas", "oil level", "tap position", "earth leakage current",
    "phase imbalance", "load current",
];
const ROTATING_SENSORS: [&str; 19] = [
    "vibration", "speed", "shaft displacement", "bearing temperature", "exhaust gas temperature",
    "inlet pressure", "discharge pressure", "lube oil pressure", "lube oil temperature", "amps",
    "thrust position", "fuel flow", "acoustic emission", "surge margin", "blade tip clearance",
    "keyphasor", "oil debris", "torque", "casing expansion",
];
const FLUID_SENSORS: [&str; 17] = [
    "flow", "suction pressure", "differential pressure", "temperature", "valve position",
    "cavitation noise", "seal leakage", "level", "ph", "turbidity", "fouling factor",
    "inlet temperature", "outlet temperature", "actuator pressure", "stem travel",
    "corrosion rate", "conductivity",
];

fn pool(category: usize) -> &'static [&'static str] {
    match category {
        0 => &ELECTRIC_SENSORS,
        1 => &ROTATING_SENSORS,
        _ => &FLUID_SENSORS,
    }
}

const CORE_ASSETS: [&[&str]; 3] = [
    &["electric motor", "electric generator", "power transformer"],
    &["compressor", "aero gas turbine", "steam turbine", "fan"],
    &["pump", "heat exchanger", "control valve"],
];
const EXTRA_ASSETS: [&[&str]; 3] = [
    &["induction motor", "wind turbine generator", "distribution transformer"],
    &["reciprocating compressor", "industrial gas turbine", "cooling fan", "gearbox"],
    &["centrifugal pump", "shell and tube heat exchanger", "isolation valve"],
];

fn a2s() -> Vec<Row> {
    // (asset sizes, first dropped pool position) per category
    let plan: [(&[usize], usize); 3] = [(&[13, 13, 12], 13), (&[13, 12, 13, 12], 10), (&[13, 12, 13], 0)];
    let mut rows = Vec::new();
    for (c, (sizes, start)) in plan.iter().enumerate() {
        let p = pool(c);
        let mut offset = *start;
        for (a, &size) in sizes.iter().enumerate() {
            let drop = p.len() - size;
            let dropped: BTreeSet<usize> = (0..drop).map(|k| (offset + k) % p.len()).collect();
            offset += drop;
            for (i, s) in p.iter().enumerate() {
                if !dropped.contains(&i) {
                    rows.push(row("A2S", &[("Asset", CORE_ASSETS[c][a]), ("Category", CATEGORIES[c])], s));
                }
            }
        }
    }
    rows
}

const FAULTS: [[&str; 12]; 3] = [
    [
        "stator windings fault", "rotor windings fault", "insulation breakdown", "overheating",
        "loose connection", "phase imbalance fault", "core lamination fault", "winding short circuit",
        "cooling system failure", "partial discharge activity", "rotor eccentricity", "bushing failure",
    ],
    [
        "imbalance", "misalignment", "bearing wear", "blade erosion", "compressor surge", "fouling",
        "overheating", "seal wear", "lubrication failure", "shaft crack", "mechanical looseness", "rotor rub",
    ],
    [
        "cavitation", "impeller wear", "seal leak", "fouling", "blockage", "valve sticking", "overheating",
        "corrosion", "tube leak", "actuator failure", "erosion", "dry running",
    ],
];

fn fm2s(rng: &mut StreamRng) -> Vec<Row> {
    let mut signatures: Vec<Vec<Vec<&str>>> = Vec::new();
    for c in 0..3 {
        let mut p = pool(c).to_vec();
        p.shuffle(rng);
        let mut at = 0;
        let sigs = (0..12)
            .map(|f| {
                let n = 4 + f % 2;
                let s: Vec<&str> = (0..n).map(|k| p[(at + k) % p.len()]).collect();
                at += n;
                s
            })
            .collect();
        signatures.push(sigs);
    }
    let mut queries: Vec<(usize, &str, &str, Vec<&str>)> = Vec::new();
    for c in 0..3 {
        for (a, asset) in CORE_ASSETS[c].iter().enumerate() {
            for (f, fault) in FAULTS[c].iter().enumerate() {
                if *asset != "compressor" && f == a + 1 {
                    continue;
                }
                let sensors = if *asset == "electric motor" && f == 0 {
                    vec!["current", "vibration", "temperature", "axial flux", "cooling gas", "output power"]
                } else {
                    signatures[c][f].clone()
                };
                queries.push((c, asset, fault, sensors));
            }
        }
    }
    assert_eq!(queries.len(), 111);
    let mut total: usize = queries.iter().map(|q| q.3.len()).sum();
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.shuffle(rng);
    let mut cursor = 0;
    while total != 500 {
        let qi = order[cursor % order.len()];
        cursor += 1;
        let (c, asset, fault, sensors) = &mut queries[qi];
        if *asset == "electric motor" && *fault == "stator windings fault" {
            continue;
        }
        if total < 500 {
            let spare: Vec<&str> = pool(*c).iter().copied().filter(|s| !sensors.contains(s)).collect();
            sensors.push(spare[rng.gen_range(0..spare.len())]);
            total += 1;
        } else if sensors.len() > 3 {
            let k = rng.gen_range(0..sensors.len());
            sensors.remove(k);
            total -= 1;
        }
    }
    let mut rows = Vec::new();
    for (c, asset, fault, sensors) in &queries {
        for s in sensors {
            rows.push(row("FM2S", &[("Asset", asset), ("Category", CATEGORIES[*c]), ("Fault", fault)], s));
        }
    }
    rows
}

const FAILURE_MODES: [&[&str]; 3] = [
    &[
        "Stator Windings Fault", "Rotor Windings Fault", "Insulation Breakdown", "Winding Overheating",
        "Loose Connection", "Phase Imbalance Fault", "Core Lamination Fault", "Winding Short Circuit",
        "Cooling System Failure", "Partial Discharge Activity", "Rotor Eccentricity", "Bushing Failure",
        "Rotor Bar Breakage", "Ground Fault", "Overvoltage", "Undervoltage", "Harmonic Overload",
        "Tap Changer Fault",
    ],
    &[
        "Imbalance", "Misalignment", "Bearing Wear", "Blade Erosion", "Compressor Surge",
        "Compressor Fouling", "Bearing Overheating", "Seal Wear", "Lubrication Failure", "Shaft Crack",
        "Mechanical Looseness", "Rotor Rub", "Thrust Bearing Failure", "Gear Tooth Wear", "Combustor Fault",
        "Oil Whirl", "Coupling Failure", "Flame Out", "Resonance",
    ],
    &[
        "Cavitation", "Impeller Wear", "Seal Leak", "Heat Exchanger Fouling", "Blockage", "Valve Sticking",
        "Process Overheating", "Corrosion", "Tube Leak", "Actuator Failure", "Erosion", "Dry Running",
        "Air Lock", "Water Hammer", "Gasket Failure", "Scaling", "Strainer Clogging", "Packing Leak",
    ],
];

fn s2fm(rng: &mut StreamRng) -> Vec<Row> {
    let mut per_asset: Vec<(usize, &str, Vec<&str>)> = Vec::new();
    for c in 0..3 {
        let others: Vec<&str> = (0..3).filter(|&o| o != c).flat_map(|o| pool(o).iter().copied()).collect();
        let assets: Vec<&str> = CORE_ASSETS[c].iter().chain(EXTRA_ASSETS[c].iter()).copied().collect();
        for (a, asset) in assets.iter().enumerate() {
            let cross = match c {
                1 if a >= 5 => 5,
                1 => 6,
                _ => 7,
            };
            let mut sensors = pool(c).to_vec();
            sensors.extend(others.choose_multiple(rng, cross).copied());
            per_asset.push((c, asset, sensors));
        }
    }
    let mut positions: Vec<Vec<&str>> = (0..3).map(|c| pool(c).to_vec()).collect();
    for (c, _, sensors) in &per_asset {
        for s in sensors {
            if !positions[*c].contains(s) {
                positions[*c].push(s);
            }
        }
    }
    let mut rows = Vec::new();
    let mut covered = BTreeSet::new();
    for (c, asset, sensors) in &per_asset {
        let modes = FAILURE_MODES[*c];
        for s in sensors {
            let pos = positions[*c].iter().position(|x| x == s).unwrap();
            let fm = (pos + 1) % modes.len();
            covered.insert(modes[fm]);
            rows.push(row("S2FM", &[("Asset", asset), ("Category", CATEGORIES[*c]), ("Sensor", s)], modes[fm]));
        }
    }
    assert_eq!(covered.len(), 55, "every failure mode must be reachable");
    rows
}

const DOMAIN_ASSETS: [&[&str]; 4] = [
    &["electric motor", "electric generator", "power transformer", "induction motor"],
    &["compressor", "aero gas turbine", "steam turbine", "fan", "gearbox"],
    &["pump", "heat exchanger", "control valve", "centrifugal pump"],
    &["well completion", "subsea wellhead", "christmas tree"],
];
const FM_CLASSES: [&str; 20] = [
    "Low output", "High output", "Overheating", "Vibration", "Noise", "External leakage",
    "Internal leakage", "Fail to start on demand", "Fail to stop on demand", "Spurious stop", "Breakdown",
    "Erratic output", "Abnormal instrument reading", "Structural deficiency", "Plugged/choked",
    "Parameter deviation", "Minor in-service problems", "Insufficient heat transfer", "Delayed operation",
    "Spurious operation",
];
const DOMAIN_COMPONENTS: [[&str; 11]; 4] = [
    [
        "Stator", "Rotor", "Windings", "Insulation", "Terminal box", "Brushes", "Core", "Bushings",
        "Tap changer", "Cooling fan", "Slip rings",
    ],
    [
        "Aerofoil blades", "Shaft", "Bearings", "Seals", "Coupling", "Lube oil system", "Outer housing",
        "Governor", "Combustor", "Gears", "Diaphragm",
    ],
    [
        "Impeller", "Mechanical seal", "Volute", "Stem", "Actuator", "Seat insert", "Tubes",
        "Baffles", "Gaskets", "Strainer", "Piping",
    ],
    [
        "Top drives", "Tubing hanger", "Packer", "Subsurface safety device", "Wellhead connector",
        "Production tubing", "Control line", "Choke", "Master gate", "Annulus wing", "Hanger spool",
    ],
];

fn fm2cmp(rng: &mut StreamRng) -> Vec<Row> {
    let roles = |k: usize| -> Vec<usize> {
        let all = [k % 11, (k + 4) % 11, (k + 8) % 11];
        all[..if k < 14 { 3 } else { 2 }].to_vec()
    };
    let mut queries: Vec<(usize, &str, usize, Vec<usize>)> = Vec::new();
    let mut j = 0;
    for (d, assets) in DOMAIN_ASSETS.iter().enumerate() {
        for asset in assets.iter() {
            let drop = if matches!(*asset, "fan" | "gearbox") { 5 } else { 4 };
            let dropped: BTreeSet<usize> = (0..drop).map(|t| (4 * j + t) % 20).collect();
            j += 1;
            for k in (0..20).filter(|k| !dropped.contains(k)) {
                queries.push((d, asset, k, roles(k)));
            }
        }
    }
    assert_eq!(queries.len(), 254);
    let mut total: usize = queries.iter().map(|q| q.3.len()).sum();
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.shuffle(rng);
    let mut cursor = 0;
    while total != 686 {
        let (_, asset, k, set) = &mut queries[order[cursor % order.len()]];
        cursor += 1;
        if *asset == "well completion" && *k == 0 {
            continue;
        }
        if total < 686 {
            let spare: Vec<usize> = (0..11).filter(|r| !set.contains(r)).collect();
            set.push(spare[rng.gen_range(0..spare.len())]);
            total += 1;
        } else if set.len() > 2 {
            set.pop();
            total -= 1;
        }
    }
    let mut rows = Vec::new();
    for (d, asset, k, set) in &queries {
        for &r in set {
            rows.push(row(
                "FM2CMP",
                &[("Asset name", asset), ("Failure mode class", FM_CLASSES[*k])],
                DOMAIN_COMPONENTS[*d][r],
            ));
        }
    }
    assert!(
        rows.iter().any(|r| r.fields[0].1 == "well completion" && r.fields[1].1 == "Low output" && r.item == "Top drives")
    );
    rows
}

const C2FM_FAMILIES: [(&str, &[&str], usize); 6] = [
    ("Fail to close on demand (FTC)", &["Gate valves", "Ball valves", "Butterfly valves"], 8),
    ("Fail to start on demand (FTS)", &["Diesel engines", "Gas engines", "Dual fuel engines"], 7),
    ("Failure to set/retrieve (SET)", &["Production packers", "Isolation packers", "Retrievable packers"], 7),
    ("External leakage - process medium (ELP)", &["Spiral wound gaskets", "Ring joint gaskets", "Sheet gaskets"], 7),
    ("Spurious operation (SPO)", &["Fire detectors", "Gas detectors", "Smoke detectors"], 7),
    ("Structural deficiency (STD)", &["Flexible risers", "Rigid risers", "Hybrid risers"], 7),
];
const MODIFIERS: [&str; 4] = ["subsea", "topside", "onshore", "platform"];

fn c2fm_components() -> Vec<(String, &'static str, &'static str)> {
    let mut out = vec![("Turbo-expanders".to_string(), C2FM_FAMILIES[2].0, "")];
    for (mode, nouns, n) in C2FM_FAMILIES {
        let names = MODIFIERS
            .iter()
            .flat_map(|m| nouns.iter().map(move |noun| (format!("{noun}, {m}"), *m)))
            .take(n);
        out.extend(names.map(|(name, m)| (name, mode, m)));
    }
    out
}

fn c2fm() -> Vec<Row> {
    c2fm_components()
        .iter()
        .map(|(name, mode, _)| row("C2FM", &[("Component", name)], mode))
        .collect()
}

const EQUIPMENT: [(&str, &[&str]); 10] = [
    ("Rotating", &[
        "Combustion engines", "Compressors", "Electric generators", "Electric motors", "Gas turbines",
        "Liquid expanders", "Pumps", "Steam turbines", "Turbo-expanders", "Blowers and fans", "Centrifuges",
        "Mixers",
    ]),
    ("Mechanical", &[
        "Cranes", "Heat exchangers", "Heaters and boilers", "Vessels", "Piping", "Winches", "Swivels",
        "Turrets", "Loading arms", "Filters and strainers", "Storage tanks", "Plate heat exchangers",
        "Conveyors and elevators", "Steam boilers",
    ]),
    ("Electrical", &[
        "Power transformers", "Frequency converters", "Switchgear", "Uninterruptible power supply",
        "Power cables and terminations", "Circuit breakers", "Lighting fixtures", "Battery banks",
        "Motor control centers", "Coiled tubing, work strings",
    ]),
    ("Safety and control", &[
        "Fire and gas detectors", "Input devices", "Control logic units", "Valves", "Nozzles", "Lifeboats",
        "Emergency communication equipment", "Evacuation equipment", "Fire-fighting equipment",
        "Flare ignition", "Telecommunications", "Inert-gas equipment", "Deluge systems",
    ]),
    ("Subsea", &[
        "Subsea production control", "Subsea wellheads and X-mas trees", "Risers", "Subsea pumps",
        "Subsea vessels", "Subsea pipelines", "Subsea electrical power distribution", "Subsea compressors",
        "Subsea manifolds", "Subsea diverless connectors", "Subsea templates", "Umbilicals",
        "Subsea isolation valves",
    ]),
    ("Well completion", &[
        "Downhole safety valves", "Electrical submersible pumps", "Surface wellheads", "Christmas trees",
        "Tubing hangers", "Production packers", "Gas lift valves", "Downhole gauges",
    ]),
    ("Drilling", &[
        "Derrick", "Top drives", "Drawworks", "Mud pumps", "Drilling risers", "Blowout preventers",
        "Diverters", "Choke and kill manifolds", "Drill strings", "Mud treatment equipment",
        "Cementing equipment", "Rotary tables",
    ]),
    ("Well intervention", &[
        "Wireline equipment", "Snubbing equipment", "Intervention risers", "Well control packages",
        "Coiled tubing injectors", "Pressure control heads", "Lubricators", "Tool strings",
        "Well testing equipment",
    ]),
    ("Marine", &[
        "Anchor windlasses", "Mooring systems", "Dynamic positioning equipment", "Thrusters",
        "Towing equipment", "Ballast systems", "Jacking systems", "Helidecks",
    ]),
    ("Utilities", &[
        "Air compressors", "Cooling water systems", "Nitrogen generators", "Fresh water makers",
        "Hydraulic power units", "HVAC systems", "Chemical injection packages", "Sewage treatment units",
    ]),
];

fn e2cat() -> Vec<Row> {
    EQUIPMENT
        .iter()
        .flat_map(|(cat, items)| items.iter().map(move |i| row("E2CAT", &[("Equipment category", cat)], i)))
        .collect()
}

const CLASS_FAMILIES: [(&str, [&str; 6], &[&str]); 7] = [
    ("rotating machinery", ["Compressors", "Gas turbines", "Steam turbines", "Pumps", "Electric motors", "Combustion engines"], &[
        "Centrifugal", "Reciprocating", "Axial flow", "Screw", "Diaphragm", "Aero-derivative",
        "Industrial heavy duty", "Condensing", "Back pressure", "Extraction", "Induction", "Synchronous",
        "Direct current", "Diesel", "Gas fuelled", "Dual fuel", "Rotary lobe", "Vane", "Piston", "Plunger",
        "Single stage", "Multi stage", "Variable speed",
    ]),
    ("electrical power distribution", ["Power transformers", "Frequency converters", "Switchgear", "Uninterruptible power supply", "Circuit breakers", "Battery banks"], &[
        "Oil immersed", "Dry type", "Step-up", "Step-down", "Low voltage", "Medium voltage", "High voltage",
        "Air insulated", "Gas insulated", "Vacuum interrupter", "Online double conversion", "Line interactive",
        "Offline standby", "Lead acid", "Nickel cadmium", "Lithium ion", "Pulse width modulated",
        "Cycloconverter", "Current source inverter", "Voltage source inverter", "Moulded case", "Miniature",
        "Solid state",
    ]),
    ("fire and gas safety", ["Fire and gas detectors", "Swivels", "Input devices", "Fire-fighting equipment", "Flare ignition", "Inert-gas equipment"], &[
        "Toxic gases", "Flammable gases", "Smoke", "Heat", "Flame", "Hydrogen sulphide", "Carbon monoxide",
        "Oxygen depletion", "Manual call points", "Pressure sensing", "Level sensing", "Temperature sensing",
        "Flow sensing", "Foam", "Water mist", "Dry chemical", "Carbon dioxide", "Pilot burners",
        "Spark ignition", "Ballistic ignition", "Nitrogen blanketing", "Exhaust gas inerting",
    ]),
    ("subsea production", ["Subsea production control", "Risers", "Subsea pumps", "Subsea pipelines", "Subsea manifolds", "Umbilicals"], &[
        "Electro-hydraulic multiplexed", "Direct hydraulic", "All-electric", "Flexible", "Rigid steel catenary",
        "Hybrid tower", "Helico-axial", "Booster", "Injection", "Rigid flowline", "Pipe-in-pipe",
        "Bundled flowline", "Cluster", "Template mounted", "Pipeline end", "Steel tube", "Thermoplastic hose",
        "Power and signal", "Top tensioned", "Lazy wave", "Seabed separation", "Wet gas",
    ]),
    ("drilling", ["Top drives", "Drawworks", "Mud pumps", "Blowout preventers", "Diverters", "Derrick"], &[
        "Hydraulic top drive", "Electric top drive", "AC drawworks", "DC drawworks", "Triplex", "Quintuplex",
        "Annular", "Ram", "Shear ram", "Pipe ram", "Insert type", "Low pressure diverter", "Mast",
        "Fixed derrick", "Telescopic", "Dual activity", "Active heave", "Passive heave", "Power swivel",
        "Racking system", "Iron roughneck", "Mud bucket",
    ]),
    ("topside handling and process", ["Cranes", "Winches", "Heat exchangers", "Vessels", "Heaters and boilers", "Storage tanks"], &[
        "Lattice boom", "Knuckle boom", "Telescopic boom", "Overhead gantry", "Anchor handling",
        "Towing winch", "Capstan", "Shell and tube", "Plate", "Air cooled", "Printed circuit", "Separator",
        "Scrubber", "Coalescer", "Knock-out drum", "Fired heater", "Electric heater", "Waste heat recovery",
        "Fixed roof", "Floating roof", "Spherical", "Bullet",
    ]),
    ("well completion and intervention", ["Downhole safety valves", "Electrical submersible pumps", "Christmas trees", "Wireline equipment", "Coiled tubing injectors", "Production packers"], &[
        "Tubing retrievable", "Wireline retrievable", "Surface controlled", "Subsurface controlled",
        "Radial flow", "Mixed flow", "Vertical tree", "Horizontal tree", "Dual bore", "Mud line", "Slickline",
        "Braided line", "Electric line", "Chain drive", "Gripper block", "Retrievable packer",
        "Permanent packer", "Hydraulic set", "Mechanical set", "Swellable", "Inflatable", "Seal bore",
    ]),
];

fn e2clt() -> Vec<Row> {
    let mut rows = Vec::new();
    let mut q = 0;
    for (_, classes, types) in CLASS_FAMILIES {
        let mut at = 0;
        for class in classes {
            let n = 4 + q % 2;
            q += 1;
            let mut picked: Vec<&str> = (0..n).map(|k| types[(at + k) % types.len()]).collect();
            at += n;
            if class == "Swivels" && !picked.contains(&"Toxic gases") {
                picked[0] = "Toxic gases";
            }
            for t in picked {
                rows.push(row("E2CLT", &[("Equipment class", class)], t));
            }
        }
    }
    rows
}

struct UnitFamily {
    units: &'static [&'static str],
    groups: &'static [(&'static str, &'static [&'static str])],
    shared: usize,
}

const UNIT_FAMILIES: [UnitFamily; 8] = [
    UnitFamily {
        units: &["Centrifugal pumps", "Reciprocating pumps", "Rotary pumps", "Submersible pumps", "Metering pumps"],
        groups: &[
            ("Power transmission", &["Gearbox", "Coupling", "Drive shaft", "Bearing housing"]),
            ("Pump body", &["Impeller", "Volute", "Wear ring", "Diffuser"]),
            ("Shaft sealing", &["Mechanical seal", "Seal flush", "Stuffing box"]),
            ("Priming system", &["Foot valve", "Priming chamber", "Vent cock", "Priming pump"]),
        ],
        shared: 15,
    },
    UnitFamily {
        units: &[
            "Centrifugal compressors", "Reciprocating compressors", "Screw compressors", "Axial compressors",
            "Booster compressors",
        ],
        groups: &[
            ("Compression stage", &["Rotor", "Stator vanes", "Cylinder", "Piston rod", "Balance piston"]),
            ("Interstage cooling", &["Intercooler", "Aftercooler", "Condensate trap"]),
            ("Anti-surge loop", &["Recycle valve", "Surge controller", "Flow element"]),
            ("Suction conditioning", &["Suction scrubber", "Inlet filter", "Pulsation damper", "Knockout pot"]),
        ],
        shared: 15,
    },
    UnitFamily {
        units: &["Gas turbines", "Steam turbines", "Aero-derivative turbines", "Hydraulic turbines", "Wind turbines"],
        groups: &[
            ("Hot section", &["Combustion liner", "Transition piece", "First stage nozzle", "Blade row", "Exhaust diffuser"]),
            ("Rotor assembly", &["Disc", "Tie bolt", "Thrust collar"]),
            ("Fuel admission", &["Fuel nozzle", "Admission chest", "Governor valve", "Wicket vane"]),
            ("Starting system", &["Starter motor", "Turning gear", "Clutch"]),
        ],
        shared: 15,
    },
    UnitFamily {
        units: &[
            "Electric motors", "Electric generators", "Electric heaters", "Electric drives", "Electric switchboards",
            "Electric converters",
        ],
        groups: &[
            ("Magnetic circuit", &["Stator core", "Field winding", "Armature", "Pole shoe", "Slip ring"]),
            ("Power terminals", &["Terminal box", "Cable gland", "Busbar"]),
            ("Excitation", &["Exciter", "Automatic voltage regulator", "Rectifier bridge"]),
            ("Protection relays", &["Overcurrent relay", "Earth fault relay", "Thermistor"]),
        ],
        shared: 14,
    },
    UnitFamily {
        units: &["Gate valves", "Ball valves", "Check valves", "Control valves", "Relief valves", "Butterfly valves"],
        groups: &[
            ("Valve body", &["Bonnet", "Seat ring", "Disc", "Obturator"]),
            ("Operator", &["Handwheel", "Pneumatic actuator", "Solenoid", "Positioner"]),
            ("Stem packing", &["Packing gland", "Lantern ring", "Stem"]),
            ("Trim", &["Cage", "Plug", "Spring"]),
        ],
        shared: 14,
    },
    UnitFamily {
        units: &["Subsea pipelines", "Subsea manifolds", "Subsea trees", "Subsea templates", "Subsea umbilicals"],
        groups: &[
            ("Mounting assembly", &["Mounting connector", "Mudmat", "Guide post", "Landing base"]),
            ("Flowline termination", &["Hub", "Pigging loop", "Jumper", "Pipeline end terminal"]),
            ("Control pod", &["Directional control valve", "Electronic module", "Quick coupler"]),
            ("Protection cover", &["Trawl guard", "Anode", "Coating", "Bend stiffener"]),
        ],
        shared: 15,
    },
    UnitFamily {
        units: &[
            "Shell and tube exchangers", "Plate exchangers", "Air cooled exchangers", "Double pipe exchangers",
            "Spiral exchangers",
        ],
        groups: &[
            ("Heat transfer surface", &["Bundle core", "Lamella pack", "Finned tubes", "Coiled sheet"]),
            ("Casing side", &["Outer casing", "Baffle", "Tie rod", "Nozzle"]),
            ("Channel head", &["Channel cover", "Pass partition", "Tubesheet"]),
            ("Fan assembly", &["Fan blade", "Belt drive", "Louvre", "Header box"]),
        ],
        shared: 15,
    },
    UnitFamily {
        units: &["Offshore cranes", "Gantry cranes", "Overhead cranes", "Crawler cranes", "Knuckle cranes", "Tower cranes"],
        groups: &[
            ("Hoisting mechanism", &["Hoist drum", "Wire rope", "Hook block", "Sheave"]),
            ("Slewing system", &["Slew ring", "Slew motor", "Pinion"]),
            ("Boom structure", &["Boom section", "Jib", "Luffing cylinder"]),
            ("Safety system", &["Load moment indicator", "Limit switch", "Anti-collision sensor"]),
        ],
        shared: 13,
    },
];

const QUALIFIERS: [&str; 12] = [
    "primary", "secondary", "standby", "inboard", "outboard", "upper", "lower", "forward", "aft",
    "port side", "starboard", "auxiliary",
];

fn eu2su(rng: &mut StreamRng) -> Vec<Row> {
    let mut rows = Vec::new();
    for fam in &UNIT_FAMILIES {
        let combos: Vec<String> = fam
            .groups
            .iter()
            .flat_map(|(g, parts)| parts.iter().map(move |p| format!("{g} - {p}")))
            .collect();
        assert!(combos.len() >= fam.shared);
        let n = fam.units.len();
        for k in 0..fam.shared {
            for t in 0..3 {
                rows.push(row("EU2SU", &[("Equipment unit", fam.units[(k + t) % n])], &combos[k]));
            }
        }
        let mut grid: Vec<String> = combos
            .iter()
            .flat_map(|c| QUALIFIERS.iter().map(move |q| format!("{c} ({q})")))
            .collect();
        assert!(grid.len() >= 25 * n);
        grid.shuffle(rng);
        for (u, unit) in fam.units.iter().enumerate() {
            for item in &grid[25 * u..25 * (u + 1)] {
                rows.push(row("EU2SU", &[("Equipment unit", unit)], item));
            }
        }
    }
    rows
}

const MECHANISMS: [(&str, &str); 8] = [
    ("leakage", "Fluid seeping and dripping"),
    ("blockage", "Restricted clogged passage"),
    ("breakage", "Fractured snapped cracked parts"),
    ("overheating", "Excessive heat scorching"),
    ("wear", "Abraded eroded thinning faces"),
    ("corrosion", "Rust spots pitting oxidation"),
    ("vibration", "Rattling shaking oscillation"),
    ("control fault", "Erratic unresponsive commands"),
];
const SUBSYSTEMS: [(&str, &str); 8] = [
    ("Hydraulic", "oil circuit accumulator"),
    ("Electrical", "power cabling wiring"),
    ("Lubrication", "grease points lube feed"),
    ("Structural", "support girders frame"),
    ("Sealing", "gland packing o-rings"),
    ("Instrumentation", "transmitter loop gauges"),
    ("Cooling", "radiator fins jacket"),
    ("Piping", "flanged spools conduits"),
];
const CONTEXTS: [&str; 4] = ["during startup", "after shutdown", "in normal service", "at routine inspection"];

fn fm2cls(rng: &mut StreamRng) -> Vec<Row> {
    let mut combos: Vec<(usize, usize)> = (0..8).flat_map(|m| (0..8).map(move |s| (m, s))).collect();
    combos.shuffle(rng);
    combos.truncate(61);
    combos.sort();
    let mut counts: Vec<usize> = vec![2; 61];
    let mut left = 140 - 1 - 2 * 61;
    while left > 0 {
        let k = rng.gen_range(0..61);
        if counts[k] < 4 {
            counts[k] += 1;
            left -= 1;
        }
    }
    for _ in 0..8 {
        let k = rng.gen_range(0..61);
        if counts[k] > 1 {
            counts[k] -= 1;
            let j = rng.gen_range(0..61);
            if counts[j] < 4 {
                counts[j] += 1;
            } else {
                counts[k] += 1;
            }
        }
    }
    let mut rows = vec![row(
        "FM2CLS",
        &[("Failure description", "Failed set/retrieve operations")],
        "Power/signal transmission failure",
    )];
    for (&(m, s), &n) in combos.iter().zip(&counts) {
        let class = format!("{} {}", SUBSYSTEMS[s].0, MECHANISMS[m].0);
        let mut contexts = CONTEXTS.to_vec();
        contexts.shuffle(rng);
        for context in contexts.iter().take(n) {
            let desc = format!("{} at the {} {context}", MECHANISMS[m].1, SUBSYSTEMS[s].1);
            rows.push(row("FM2CLS", &[("Failure description", &desc)], &class));
        }
    }
    rows
}

fn asset_descriptions() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("electric motor", "Converts electrical energy into mechanical energy to power various industrial machinery."),
        ("electric generator", "An electric machine driven by a prime mover that turns mechanical power into electrical energy for the plant grid."),
        ("power transformer", "Static electric apparatus that steps voltage up or down between circuits through magnetic induction."),
        ("induction motor", "An electric motor that runs on alternating supply and is the workhorse drive of most electric plant equipment."),
        ("wind turbine generator", "An electric generator housed in a nacelle that converts rotor torque from the wind into grid power."),
        ("distribution transformer", "A small electric transformer that lowers distribution voltage to the level used by site consumers."),
        ("compressor", "A rotating machine that raises the pressure of a gas by reducing its volume."),
        ("aero gas turbine", "A rotary machine that extracts energy from steam and converts it into mechanical work"),
        ("steam turbine", "A rotating machine in which expanding steam drives bladed wheels to produce mechanical work."),
        ("fan", "A rotating machine with bladed impellers that moves large volumes of air at low pressure rise."),
        ("reciprocating compressor", "A rotating crank machine whose pistons compress gas in cylinders with suction and discharge valves."),
        ("industrial gas turbine", "A heavy duty rotating engine that burns fuel gas to drive generators or compressors."),
        ("cooling fan", "A rotating air mover that pushes ambient air across hot equipment to carry heat away."),
        ("gearbox", "A rotating power transmission unit that changes speed and torque between a driver and a driven machine."),
        ("pump", "A fluid handling machine that adds energy to liquids to move them through piping."),
        ("heat exchanger", "A fluid device that transfers heat between two process streams without mixing them."),
        ("control valve", "A fluid regulating device that throttles a process line to hold flow, pressure or level at a setpoint."),
        ("centrifugal pump", "A fluid machine that spins liquid outward to raise its velocity and pressure."),
        ("shell and tube heat exchanger", "A fluid exchanger built from a tube bundle inside a shell so that two streams trade heat."),
        ("isolation valve", "A fluid shut off device used to stop flow so that part of a process line can be isolated."),
        ("well completion", "The well hardware installed after drilling so that a well can produce oil or gas safely."),
        ("subsea wellhead", "Well pressure containment on the seabed that supports the well bore and the tree above it."),
        ("christmas tree", "An assembly of well valves and spools on top of a wellhead that controls flow from the well."),
    ])
}

fn fault_description(name: &str) -> String {
    if name == "stator windings fault" {
        return "A Stator windings fault is a type of industrial failure mode where the electrical windings in the stator of an electric motor or generator become damaged or degraded, often due to overheating, insulation breakdown, or physical stress, leading to reduced performance, efficiency, or complete failure of the equipment.".into();
    }
    let mut cap = name.to_string();
    cap[..1].make_ascii_uppercase();
    format!("{cap} is an industrial failure mode that degrades equipment condition and shows up as abnormal readings before a breakdown.")
}

fn sensor_description(name: &str, category: &str) -> String {
    if name == "current" {
        return "Sensor that measures electrical current in various systems to detect anomalies and prevent overloads or system failures".into();
    }
    format!("Sensor that measures {name} on {category} equipment to reveal abnormal operating conditions early")
}

fn component_description(name: &str, modifier: &str) -> String {
    if name == "Turbo-expanders" {
        return "Turbo-expanders are industrial components that convert the pressure energy of a high-pressure gas into mechanical energy, often used in power generation, refrigeration, and other applications where gas expansion can be harnessed to drive turbines or other machinery.".into();
    }
    let noun = name.split(',').next().unwrap();
    format!("{noun} are industrial components installed at {modifier} oil and gas facilities.")
}

fn category_description(name: &str, items: &[&str]) -> String {
    if name == "Electrical" {
        return "The Electrical equipment category includes a wide range of devices and systems that generate, transmit, distribute, and utilize electrical energy, such as generators, transformers, circuit breakers, and lighting fixtures".into();
    }
    format!(
        "The {name} equipment category groups equipment such as {}, {} and {}.",
        items[0].to_lowercase(),
        items[1].to_lowercase(),
        items[2].to_lowercase()
    )
}

fn class_description(name: &str, family: &str) -> String {
    if name == "Swivels" {
        return "Swivels are industrial components that allow for rotational movement, enabling hoses, pipes, or other equipment to pivot freely while maintaining a secure connection.".into();
    }
    format!("{name} are an equipment class used in {family} on offshore and onshore facilities.")
}

fn descriptions(rows: &[Row]) -> Vec<EntityDescription> {
    let assets = asset_descriptions();
    let mut out: BTreeMap<(EntityKind, String), String> = BTreeMap::new();
    let sensor_category: BTreeMap<&str, &str> = (0..3)
        .flat_map(|c| pool(c).iter().map(move |s| (*s, CATEGORIES[c])))
        .collect();
    let components: BTreeMap<String, &str> = c2fm_components().into_iter().map(|(n, _, m)| (n, m)).collect();
    for r in rows {
        for (field, value) in &r.fields {
            let v = value.as_str();
            let (kind, text) = match (r.task, *field) {
                (_, "Asset") | ("FM2CMP", "Asset name") => (EntityKind::Asset, assets[v].to_string()),
                ("FM2S", "Fault") => (EntityKind::FailureMode, fault_description(v)),
                ("S2FM", "Sensor") => (EntityKind::Sensor, sensor_description(v, sensor_category[v])),
                ("C2FM", "Component") => (EntityKind::Component, component_description(v, components[v])),
                ("E2CAT", _) => {
                    let items = EQUIPMENT.iter().find(|(c, _)| *c == v).unwrap().1;
                    (EntityKind::EquipmentCategory, category_description(v, items))
                }
                ("E2CLT", _) => {
                    let fam = CLASS_FAMILIES.iter().find(|(_, cs, _)| cs.contains(&v)).unwrap().0;
                    (EntityKind::EquipmentClass, class_description(v, fam))
                }
                _ => continue,
            };
            out.insert((kind, v.to_string()), text);
        }
    }
    out.into_iter()
        .map(|((kind, name), text)| EntityDescription::new(kind, name, text).unwrap())
        .collect()
}

fn check_counts(rows: &[Row]) {
    let expected = [
        ("A2S", 10, 53, 126),
        ("C2FM", 44, 6, 44),
        ("E2CAT", 10, 107, 107),
        ("E2CLT", 42, 156, 189),
        ("EU2SU", 43, 1191, 1423),
        ("FM2CLS", 140, 62, 140),
        ("FM2CMP", 254, 44, 686),
        ("FM2S", 111, 53, 500),
        ("S2FM", 485, 55, 485),
    ];
    for (task, queries, items, edges) in expected {
        let task_rows: Vec<&Row> = rows.iter().filter(|r| r.task == task).collect();
        let q: BTreeSet<Vec<String>> = task_rows
            .iter()
            .map(|r| r.fields.iter().map(|(_, v)| v.to_lowercase()).collect())
            .collect();
        let i: BTreeSet<&str> = task_rows.iter().map(|r| r.item.as_str()).collect();
        let e: BTreeSet<(Vec<String>, &str)> = task_rows
            .iter()
            .map(|r| (r.fields.iter().map(|(_, v)| v.to_lowercase()).collect(), r.item.as_str()))
            .collect();
        assert_eq!((q.len(), i.len(), e.len()), (queries, items, edges), "{task}");
        assert_eq!(e.len(), task_rows.len(), "{task}: duplicate edge");
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = stream(SEED, "bundled");
    let mut rows = a2s();
    rows.extend(c2fm());
    rows.extend(e2cat());
    rows.extend(e2clt());
    rows.extend(eu2su(&mut rng));
    rows.extend(fm2cls(&mut rng));
    rows.extend(fm2cmp(&mut rng));
    rows.extend(fm2s(&mut rng));
    rows.extend(s2fm(&mut rng));
    check_counts(&rows);

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("relations.csv"))?;
    let mut header = vec!["task"];
    header.extend(COLUMNS);
    header.push("item");
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.task.to_string()];
        for c in COLUMNS {
            rec.push(r.fields.iter().find(|(k, _)| *k == c).map(|(_, v)| v.clone()).unwrap_or_default());
        }
        rec.push(r.item.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let descs = descriptions(&rows);
    let mut out = BufWriter::new(File::create(dir.join("descriptions.jsonl"))?);
    for d in &descs {
        writeln!(out, "{}", serde_json::to_string(d)?)?;
    }
    out.flush()?;
    eprintln!("{} relations, {} descriptions", rows.len(), descs.len());
    Ok(())
}
