//! Scenario files.
//!
//! Scenarios are JSON. Any quantity may be a plain number in SI units or a
//! string with a unit (`"800 ms"`, `"10 MHz"`, `"-90 dBm"`, `"20 nJ/bit"`).
//! Parameters may be fixed, drawn from `{"range": [lo, hi]}` or
//! `{"choices": [...]}`, or listed `{"per_robot": [...]}`. Gains also accept
//! `{"path_loss": {"exponent": a, "distance": <param>}}`.
//!
//! [`scenario_to_json`] writes plain SI numbers, which load back to the same
//! scenario bit for bit.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, TimeBudget};
use crate::sim::{ChannelOverride, GainSpec, MasterExhaustion, MasterSpec, ParamSpec, Scenario, SlaveSpec};

/// Physical dimension of a field, with the unit suffixes it accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Time,
    Frequency,
    Power,
    Energy,
    EnergyPerBit,
    EnergyPerCycle,
    CyclesPerBit,
    CycleRate,
    Bits,
    Gain,
    Distance,
}

impl Dim {
    fn si(self) -> &'static str {
        match self {
            Dim::Time => "s",
            Dim::Frequency => "Hz",
            Dim::Power => "W",
            Dim::Energy => "J",
            Dim::EnergyPerBit => "J/bit",
            Dim::EnergyPerCycle => "J/cycle",
            Dim::CyclesPerBit => "cycles/bit",
            Dim::CycleRate => "cycles/s",
            Dim::Bits => "bits",
            Dim::Gain => "linear gain or dB",
            Dim::Distance => "m",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let prefixed = |base: &str| -> Option<f64> {
            let p = unit.strip_suffix(base)?;
            match p {
                "" => Some(1.0),
                "k" => Some(1e3),
                "M" => Some(1e6),
                "G" => Some(1e9),
                "m" => Some(1e-3),
                "u" | "µ" => Some(1e-6),
                "n" => Some(1e-9),
                "p" => Some(1e-12),
                _ => None,
            }
        };
        match self {
            Dim::Time => prefixed("s"),
            Dim::Frequency => prefixed("Hz"),
            Dim::Power => prefixed("W"),
            Dim::Energy => prefixed("J"),
            Dim::EnergyPerBit => unit.strip_suffix("/bit").and_then(|u| Dim::Energy.scale(u)),
            Dim::EnergyPerCycle => unit.strip_suffix("/cycle").and_then(|u| Dim::Energy.scale(u)),
            Dim::CyclesPerBit => (unit == "cycles/bit").then_some(1.0),
            Dim::CycleRate => unit.strip_suffix("cycles/s").and_then(prefixed_only).or_else(|| prefixed("Hz")),
            Dim::Bits => match unit {
                "bit" | "bits" | "b" => Some(1.0),
                "kbit" | "kb" => Some(1e3),
                "Mbit" | "Mb" => Some(1e6),
                "Gbit" | "Gb" => Some(1e9),
                _ => None,
            },
            Dim::Gain => None,
            Dim::Distance => match unit {
                "m" => Some(1.0),
                "km" => Some(1e3),
                _ => None,
            },
        }
    }
}

fn prefixed_only(p: &str) -> Option<f64> {
    match p {
        "" => Some(1.0),
        "k" => Some(1e3),
        "M" => Some(1e6),
        "G" => Some(1e9),
        _ => None,
    }
}

/// Parses a quantity string such as `"40 ms"` into SI units.
pub fn parse_quantity(text: &str, dim: Dim) -> std::result::Result<f64, String> {
    let text = text.trim();
    // longest prefix that parses as a number; the rest is the unit
    let split = (1..=text.len())
        .rev()
        .filter(|&i| text.is_char_boundary(i))
        .find(|&i| text[..i].trim().parse::<f64>().is_ok())
        .ok_or_else(|| format!("`{text}` does not start with a number"))?;
    let value: f64 = text[..split].trim().parse().expect("checked above");
    let unit = text[split..].trim();
    if unit.is_empty() {
        return Ok(value);
    }
    match (dim, unit) {
        (Dim::Power, "dBm") => Ok(dbm_to_watts(value)),
        (Dim::Power, "dBW") => Ok(10f64.powf(value / 10.0)),
        (Dim::Gain, "dB") => Ok(10f64.powf(value / 10.0)),
        _ => dim
            .scale(unit)
            .map(|s| value * s)
            .ok_or_else(|| format!("unit `{unit}` is not a {} unit", dim.si())),
    }
}

fn config(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn quantity(v: &Value, field: &str, dim: Dim) -> Result<f64> {
    let x = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| config(field, "number out of range"))?,
        Value::String(s) => parse_quantity(s, dim).map_err(|e| config(field, format!("{e} (expected {})", dim.si())))?,
        _ => return Err(config(field, format!("expected a number or a string in {}", dim.si()))),
    };
    if !x.is_finite() {
        return Err(config(field, "value is not finite"));
    }
    Ok(x)
}

fn object<'a>(v: &'a Value, field: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
    let m = v.as_object().ok_or_else(|| config(field, "expected an object"))?;
    if let Some(k) = m.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(config(field, format!("unknown key `{k}` (allowed: {})", allowed.join(", "))));
    }
    Ok(m)
}

fn required<'a>(m: &'a Map<String, Value>, parent: &str, key: &str) -> Result<&'a Value> {
    m.get(key).ok_or_else(|| config(&format!("{parent}.{key}"), "missing"))
}

fn count(v: &Value, field: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| config(field, "expected a nonnegative integer"))
}

fn list(v: &Value, field: &str, dim: Dim) -> Result<Vec<f64>> {
    let a = v.as_array().ok_or_else(|| config(field, "expected a list"))?;
    a.iter().enumerate().map(|(i, x)| quantity(x, &format!("{field}[{i}]"), dim)).collect()
}

fn param(v: &Value, field: &str, dim: Dim) -> Result<ParamSpec> {
    let Value::Object(m) = v else {
        return Ok(ParamSpec::Fixed(quantity(v, field, dim)?));
    };
    if m.len() != 1 {
        return Err(config(field, "expected exactly one of `range`, `choices`, `per_robot`"));
    }
    let (k, inner) = m.iter().next().expect("one entry");
    let sub = format!("{field}.{k}");
    match k.as_str() {
        "range" => {
            let r = list(inner, &sub, dim)?;
            if r.len() != 2 {
                return Err(config(&sub, "expected [min, max]"));
            }
            let (min, max) = (r[0].min(r[1]), r[0].max(r[1]));
            Ok(ParamSpec::Range { min, max })
        }
        "choices" => Ok(ParamSpec::Choices(list(inner, &sub, dim)?)),
        "per_robot" => Ok(ParamSpec::PerRobot(list(inner, &sub, dim)?)),
        other => Err(config(field, format!("unknown parameter form `{other}`"))),
    }
}

fn gain(v: &Value, field: &str) -> Result<GainSpec> {
    if let Some(pl) = v.as_object().and_then(|m| m.get("path_loss")) {
        object(v, field, &["path_loss"])?;
        let sub = format!("{field}.path_loss");
        let m = object(pl, &sub, &["exponent", "distance"])?;
        let exponent = required(m, &sub, "exponent")?
            .as_f64()
            .ok_or_else(|| config(&format!("{sub}.exponent"), "expected a number"))?;
        let distance = param(required(m, &sub, "distance")?, &format!("{sub}.distance"), Dim::Distance)?;
        return Ok(GainSpec::PathLoss { exponent, distance });
    }
    Ok(GainSpec::Direct(param(v, field, Dim::Gain)?))
}

const SLAVE_KEYS: [(&str, Dim); 9] = [
    ("sense_energy_per_bit", Dim::EnergyPerBit),
    ("sensing_power", Dim::Power),
    ("cycles_per_bit", Dim::CyclesPerBit),
    ("cpu_speed", Dim::CycleRate),
    ("energy_per_cycle", Dim::EnergyPerCycle),
    ("circuit_power", Dim::Power),
    ("bandwidth", Dim::Frequency),
    ("noise", Dim::Power),
    ("initial_energy", Dim::Energy),
];

const MASTER_KEYS: [(&str, Dim); 7] = [
    ("cycles_per_bit", Dim::CyclesPerBit),
    ("cpu_speed", Dim::CycleRate),
    ("energy_per_cycle", Dim::EnergyPerCycle),
    ("circuit_power", Dim::Power),
    ("bandwidth", Dim::Frequency),
    ("noise", Dim::Power),
    ("initial_energy", Dim::Energy),
];

fn params_of(m: &Map<String, Value>, parent: &str, keys: &[(&str, Dim)]) -> Result<Vec<ParamSpec>> {
    keys.iter()
        .map(|(k, dim)| match m.get(*k) {
            Some(v) => param(v, &format!("{parent}.{k}"), *dim),
            // circuit power is optional and defaults to zero
            None if *k == "circuit_power" => Ok(ParamSpec::Fixed(0.0)),
            None => Err(config(&format!("{parent}.{k}"), "missing")),
        })
        .collect()
}

/// Builds a scenario from parsed JSON.
pub fn scenario_from_json(v: &Value) -> Result<Scenario> {
    let top = object(
        v,
        "scenario",
        &[
            "name",
            "seed",
            "tasks",
            "task_bits",
            "threshold",
            "time_budget",
            "slaves",
            "master",
            "channel_schedule",
            "master_exhaustion",
        ],
    )?;
    let name = match top.get("name") {
        None => String::new(),
        Some(n) => n.as_str().ok_or_else(|| config("name", "expected a string"))?.to_string(),
    };
    let seed = match top.get("seed") {
        None | Some(Value::Null) => None,
        Some(s) => Some(count(s, "seed")?),
    };
    let tasks = count(required(top, "scenario", "tasks")?, "tasks")? as usize;
    let task_bits = quantity(required(top, "scenario", "task_bits")?, "task_bits", Dim::Bits)?;
    let threshold = quantity(required(top, "scenario", "threshold")?, "threshold", Dim::Energy)?;

    let tb = object(required(top, "scenario", "time_budget")?, "time_budget", &["sensing", "slave_window", "master_window"])?;
    let budget = TimeBudget {
        sensing: quantity(required(tb, "time_budget", "sensing")?, "time_budget.sensing", Dim::Time)?,
        slave_window: quantity(required(tb, "time_budget", "slave_window")?, "time_budget.slave_window", Dim::Time)?,
        master_window: quantity(required(tb, "time_budget", "master_window")?, "time_budget.master_window", Dim::Time)?,
    };

    let mut slave_allowed: Vec<&str> = SLAVE_KEYS.iter().map(|(k, _)| *k).collect();
    slave_allowed.extend(["count", "gain"]);
    let sm = object(required(top, "scenario", "slaves")?, "slaves", &slave_allowed)?;
    let sp = params_of(sm, "slaves", &SLAVE_KEYS)?;
    let mut sp = sp.into_iter();
    let mut next = || sp.next().expect("one spec per key");
    let slaves = SlaveSpec {
        count: count(required(sm, "slaves", "count")?, "slaves.count")? as usize,
        sense_energy_per_bit: next(),
        sensing_power: next(),
        cycles_per_bit: next(),
        cpu_speed: next(),
        energy_per_cycle: next(),
        circuit_power: next(),
        bandwidth: next(),
        noise: next(),
        initial_energy: next(),
        gain: gain(required(sm, "slaves", "gain")?, "slaves.gain")?,
    };

    let mut master_allowed: Vec<&str> = MASTER_KEYS.iter().map(|(k, _)| *k).collect();
    master_allowed.push("gain");
    let mm = object(required(top, "scenario", "master")?, "master", &master_allowed)?;
    let mut mp = params_of(mm, "master", &MASTER_KEYS)?.into_iter();
    let mut next = || mp.next().expect("one spec per key");
    let master = MasterSpec {
        cycles_per_bit: next(),
        cpu_speed: next(),
        energy_per_cycle: next(),
        circuit_power: next(),
        bandwidth: next(),
        noise: next(),
        initial_energy: next(),
        gain: gain(required(mm, "master", "gain")?, "master.gain")?,
    };

    let mut channel_schedule = Vec::new();
    if let Some(cs) = top.get("channel_schedule") {
        let a = cs.as_array().ok_or_else(|| config("channel_schedule", "expected a list"))?;
        for (i, e) in a.iter().enumerate() {
            let f = format!("channel_schedule[{i}]");
            let m = object(e, &f, &["task", "robot", "gain"])?;
            channel_schedule.push(ChannelOverride {
                task: count(required(m, &f, "task")?, &format!("{f}.task"))? as usize,
                robot: count(required(m, &f, "robot")?, &format!("{f}.robot"))? as usize,
                gain: quantity(required(m, &f, "gain")?, &format!("{f}.gain"), Dim::Gain)?,
            });
        }
    }
    let master_exhaustion = match top.get("master_exhaustion") {
        None => MasterExhaustion::default(),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|_| config("master_exhaustion", "expected `end-episode` or `continue`"))?,
    };

    let s = Scenario {
        name,
        seed,
        tasks,
        task_bits,
        threshold,
        budget,
        slaves,
        master,
        channel_schedule,
        master_exhaustion,
    };
    s.validate()?;
    Ok(s)
}

fn param_to_json(p: &ParamSpec) -> Value {
    match p {
        ParamSpec::Fixed(v) => json!(v),
        ParamSpec::Range { min, max } => json!({ "range": [min, max] }),
        ParamSpec::Choices(c) => json!({ "choices": c }),
        ParamSpec::PerRobot(v) => json!({ "per_robot": v }),
    }
}

fn gain_to_json(g: &GainSpec) -> Value {
    match g {
        GainSpec::Direct(p) => param_to_json(p),
        GainSpec::PathLoss { exponent, distance } => {
            json!({ "path_loss": { "exponent": exponent, "distance": param_to_json(distance) } })
        }
    }
}

/// Writes a scenario with every quantity as an SI number.
pub fn scenario_to_json(s: &Scenario) -> Value {
    let sl = &s.slaves;
    let mut slaves = Map::new();
    slaves.insert("count".into(), json!(sl.count));
    for ((k, _), p) in SLAVE_KEYS.iter().zip([
        &sl.sense_energy_per_bit,
        &sl.sensing_power,
        &sl.cycles_per_bit,
        &sl.cpu_speed,
        &sl.energy_per_cycle,
        &sl.circuit_power,
        &sl.bandwidth,
        &sl.noise,
        &sl.initial_energy,
    ]) {
        slaves.insert((*k).into(), param_to_json(p));
    }
    slaves.insert("gain".into(), gain_to_json(&sl.gain));
    let m = &s.master;
    let mut master = Map::new();
    for ((k, _), p) in MASTER_KEYS.iter().zip([
        &m.cycles_per_bit,
        &m.cpu_speed,
        &m.energy_per_cycle,
        &m.circuit_power,
        &m.bandwidth,
        &m.noise,
        &m.initial_energy,
    ]) {
        master.insert((*k).into(), param_to_json(p));
    }
    master.insert("gain".into(), gain_to_json(&m.gain));
    let mut top = Map::new();
    top.insert("name".into(), json!(s.name));
    if let Some(seed) = s.seed {
        top.insert("seed".into(), json!(seed));
    }
    top.insert("tasks".into(), json!(s.tasks));
    top.insert("task_bits".into(), json!(s.task_bits));
    top.insert("threshold".into(), json!(s.threshold));
    top.insert(
        "time_budget".into(),
        json!({
            "sensing": s.budget.sensing,
            "slave_window": s.budget.slave_window,
            "master_window": s.budget.master_window,
        }),
    );
    top.insert("slaves".into(), Value::Object(slaves));
    top.insert("master".into(), Value::Object(master));
    top.insert("channel_schedule".into(), serde_json::to_value(&s.channel_schedule).expect("plain data"));
    top.insert("master_exhaustion".into(), serde_json::to_value(s.master_exhaustion).expect("plain data"));
    Value::Object(top)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    scenario_from_json(&v)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&scenario_to_json(s)).expect("plain data");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::tests::fixed_scenario;
    use proptest::prelude::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("800 ms", Dim::Time).unwrap(), 0.8);
        assert_eq!(parse_quantity("10 MHz", Dim::Frequency).unwrap(), 1e7);
        assert!((parse_quantity("-90 dBm", Dim::Power).unwrap() - 1e-12).abs() < 1e-27);
        assert!((parse_quantity("20 nJ/bit", Dim::EnergyPerBit).unwrap() - 2e-8).abs() < 1e-23);
        assert_eq!(parse_quantity("2.4e9 cycles/s", Dim::CycleRate).unwrap(), 2.4e9);
        assert_eq!(parse_quantity("1e-6", Dim::Gain).unwrap(), 1e-6);
        assert!((parse_quantity("-60 dB", Dim::Gain).unwrap() - 1e-6).abs() < 1e-21);
        assert_eq!(parse_quantity("5000000 bits", Dim::Bits).unwrap(), 5e6);
        assert!(parse_quantity("40 MHz", Dim::Time).unwrap_err().contains("not a s unit"));
        assert!(parse_quantity("fast", Dim::Time).is_err());
    }

    #[test]
    fn errors_name_the_field_and_unit() {
        let mut v = scenario_to_json(&fixed_scenario());
        v["time_budget"]["sensing"] = json!("800 MHz");
        let e = scenario_from_json(&v).unwrap_err().to_string();
        assert!(e.contains("time_budget.sensing") && e.contains("expected s"), "{e}");
        let mut v = scenario_to_json(&fixed_scenario());
        v["slaves"].as_object_mut().unwrap().remove("noise");
        let e = scenario_from_json(&v).unwrap_err().to_string();
        assert!(e.contains("slaves.noise") && e.contains("missing"), "{e}");
        let mut v = scenario_to_json(&fixed_scenario());
        v["bogus"] = json!(1);
        assert!(scenario_from_json(&v).unwrap_err().to_string().contains("unknown key `bogus`"));
    }

    #[test]
    fn missing_seed_with_ranges_is_rejected() {
        let mut v = scenario_to_json(&fixed_scenario());
        v["slaves"]["noise"] = json!({ "range": ["-96 dBm", "-86 dBm"] });
        assert!(matches!(scenario_from_json(&v), Err(Error::Config(_))));
        v["seed"] = json!(1);
        let s = scenario_from_json(&v).unwrap();
        assert!(matches!(s.slaves.noise, ParamSpec::Range { .. }));
    }

    #[test]
    fn unit_strings_load_as_si() {
        let v = json!({
            "name": "units",
            "tasks": 3,
            "task_bits": "5 Mbit",
            "threshold": "200 mJ",
            "time_budget": { "sensing": "800 ms", "slave_window": "40 ms", "master_window": "10 ms" },
            "slaves": {
                "count": 1,
                "sense_energy_per_bit": "20 nJ/bit",
                "sensing_power": "100 mW",
                "cycles_per_bit": "500 cycles/bit",
                "cpu_speed": "500 Mcycles/s",
                "energy_per_cycle": "3 nJ/cycle",
                "bandwidth": "10 MHz",
                "noise": "-90 dBm",
                "gain": { "path_loss": { "exponent": 3.75, "distance": "10 m" } },
                "initial_energy": "3 J"
            },
            "master": {
                "cycles_per_bit": 100, "cpu_speed": "2.4 GHz", "energy_per_cycle": "10 nJ/cycle",
                "bandwidth": "10 MHz", "noise": "-90 dBm", "gain": "-30 dB", "initial_energy": "10 J"
            }
        });
        let s = scenario_from_json(&v).unwrap();
        assert_eq!(s.task_bits, 5e6);
        assert_eq!(s.budget.slave_window, 0.04);
        assert_eq!(s.slaves.cpu_speed, ParamSpec::Fixed(5e8));
        assert_eq!(s.slaves.circuit_power, ParamSpec::Fixed(0.0));
        assert_eq!(s.master.cpu_speed, ParamSpec::Fixed(2.4e9));
        assert_eq!(s.master_exhaustion, MasterExhaustion::EndEpisode);
        let r = s.realize().unwrap();
        assert!((r.slaves[0].gain / 10f64.powf(-1.875) - 1.0).abs() < 1e-12, "{}", r.slaves[0].gain);
    }

    #[test]
    fn bundled_table_scenario() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/table1.json");
        let s = load_scenario(&path).unwrap();
        assert_eq!(s.slaves.count, 3);
        assert_eq!(s.budget, TimeBudget { sensing: 0.8, slave_window: 0.04, master_window: 0.01 });
        assert_eq!(s.task_bits, 5e6);
        assert_eq!(s.threshold, 0.2);
        assert_eq!(s.slaves.initial_energy, ParamSpec::PerRobot(vec![3.0, 2.5, 0.5]));
        assert_eq!(s.master.initial_energy, ParamSpec::Fixed(10.0));
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(
            a in 1e-9..1e-7f64,
            b in 1e-9..1e-7f64,
            window in 1e-3..1.0f64,
            seed in any::<u64>(),
            e in proptest::collection::vec(0.1..10.0f64, 2),
        ) {
            let mut s = fixed_scenario();
            s.seed = Some(seed);
            s.slaves.sense_energy_per_bit = ParamSpec::Range { min: a.min(b), max: a.max(b) };
            s.slaves.initial_energy = ParamSpec::PerRobot(e);
            s.budget.slave_window = window;
            s.slaves.gain = GainSpec::PathLoss { exponent: 3.75, distance: ParamSpec::Choices(vec![1.0, 10.0, 100.0]) };
            s.channel_schedule = vec![ChannelOverride { task: 2, robot: 1, gain: 1e-8 }];
            s.master_exhaustion = MasterExhaustion::Continue;
            let text = serde_json::to_string(&scenario_to_json(&s)).unwrap();
            let back = scenario_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
