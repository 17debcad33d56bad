//! Scenario runner: a list of steps over named values, plus the built-in
//! experiment pipelines (`fig1`, `fig2`, `fig3`, `table2`).
//!
//! Scenario files are JSON:
//!
//! ```json
//! {"steps": [
//!    {"op": "pops_spectrum", "id": "a", "transition": "B8", "species": "19F"},
//!    {"op": "pops_spectrum", "id": "b", "transition": "A8", "species": "19F"},
//!    {"op": "multiply", "id": "ab", "a": "a", "b": "b", "abs_a": true},
//!    {"op": "classify", "id": "c", "inputs": ["ab"]},
//!    {"op": "snr", "id": "n", "input": "a"}],
//!  "outputs": [{"id": "ab", "file": "ab.csv"}]}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algebra::{
    classify_sampled, classify_sticks, multiply, multiply_sticks, Classification, PeakPicking,
};
use crate::error::{Error, Result};
use crate::gates::{apply_sequence, compile, GateJson, PulseSequence};
use crate::spectrometer::{
    default_noise_window, detect, pops_spectrum_by_subtraction, render, snr, RenderOptions,
    SampledSpectrum, StickSpectrum, DEFAULT_NOISE_SIGMA, DEFAULT_TIP_ANGLE_RAD,
};
use crate::spin_system::{SpinSystem, Transition};
use crate::state::{make_pops, pseudopure, thermal_state, PopulationState};

pub const BUILTIN_SCENARIOS: [&str; 4] = ["fig1", "fig2", "fig3", "table2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Thermal {
        id: String,
    },
    Pseudopure {
        id: String,
        state: String,
        #[serde(default = "one")]
        epsilon: f64,
    },
    MakePops {
        id: String,
        transition: String,
    },
    Gate {
        id: String,
        input: String,
        gate: GateJson,
        #[serde(default)]
        relax: bool,
    },
    Detect {
        id: String,
        input: String,
        species: String,
    },
    Render {
        id: String,
        input: String,
    },
    PopsSpectrum {
        id: String,
        transition: String,
        species: String,
        #[serde(default)]
        gate: Option<GateJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Multiply {
        id: String,
        a: String,
        b: String,
        #[serde(default)]
        abs_a: bool,
        #[serde(default)]
        abs_b: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Classify {
        id: String,
        inputs: Vec<String>,
    },
    Snr {
        id: String,
        input: String,
    },
}

fn one() -> f64 {
    1.0
}

impl Step {
    pub fn id(&self) -> &str {
        match self {
            Step::Thermal { id }
            | Step::Pseudopure { id, .. }
            | Step::MakePops { id, .. }
            | Step::Gate { id, .. }
            | Step::Detect { id, .. }
            | Step::Render { id, .. }
            | Step::PopsSpectrum { id, .. }
            | Step::Multiply { id, .. }
            | Step::Classify { id, .. }
            | Step::Snr { id, .. } => id,
        }
    }

    fn inputs(&self) -> Vec<&str> {
        match self {
            Step::Gate { input, .. }
            | Step::Detect { input, .. }
            | Step::Render { input, .. }
            | Step::Snr { input, .. } => vec![input],
            Step::Multiply { a, b, .. } => vec![a, b],
            Step::Classify { inputs, .. } => inputs.iter().map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub id: String,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// System config path, relative to the scenario file.
    #[serde(default)]
    pub system: Option<String>,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub outputs: Vec<Output>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Steps may only consume values produced by earlier steps.
    pub fn check(&self) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for step in &self.steps {
            for input in step.inputs() {
                if !seen.contains(&input) {
                    return Err(Error::Scenario(format!(
                        "step {:?} uses {input:?} before it is produced",
                        step.id()
                    )));
                }
            }
            if seen.contains(&step.id()) {
                return Err(Error::Scenario(format!("duplicate id {:?}", step.id())));
            }
            seen.push(step.id());
        }
        for out in &self.outputs {
            if !seen.contains(&out.id.as_str()) {
                return Err(Error::Scenario(format!(
                    "output {:?} is never produced",
                    out.id
                )));
            }
        }
        Ok(())
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let steps = match name {
            "fig1" => fig1_steps(),
            "fig2" => fig2_steps(),
            "fig3" => fig3_steps(),
            "table2" => table2_steps(),
            _ => return Err(Error::Scenario(format!("unknown scenario {name:?}"))),
        };
        let outputs = steps
            .iter()
            .filter(|s| matches!(s, Step::PopsSpectrum { .. } | Step::Multiply { .. }))
            .map(|s| Output {
                id: s.id().to_string(),
                file: format!("{}.csv", s.id()),
            })
            .collect();
        Ok(Scenario {
            name: Some(name.to_string()),
            system: None,
            steps,
            outputs,
        })
    }
}

fn cnot_e13() -> GateJson {
    serde_json::from_value(
        json!({"gate": "cnot", "controls": {"1": 0, "2": 0, "3": 1, "4": 0}, "target": 5}),
    )
    .expect("static gate")
}

fn cswap_45() -> GateJson {
    serde_json::from_value(
        json!({"gate": "cswap", "controls": {"1": 0, "2": 0, "3": 1}, "targets": [4, 5]}),
    )
    .expect("static gate")
}

fn pops(id: &str, transition: &str, species: &str, gate: Option<GateJson>, label: &str) -> Step {
    Step::PopsSpectrum {
        id: id.into(),
        transition: transition.into(),
        species: species.into(),
        gate,
        label: Some(label.into()),
    }
}

fn product(id: &str, a: &str, b: &str, abs_a: bool, label: &str) -> Step {
    Step::Multiply {
        id: id.into(),
        a: a.into(),
        b: b.into(),
        abs_a,
        abs_b: false,
        label: Some(label.into()),
    }
}

fn classify(id: &str, inputs: &[&str]) -> Step {
    Step::Classify {
        id: id.into(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
    }
}

fn snr_steps(steps: &[Step]) -> Vec<Step> {
    steps
        .iter()
        .filter(|s| matches!(s, Step::PopsSpectrum { .. } | Step::Multiply { .. }))
        .map(|s| Step::Snr {
            id: format!("snr_{}", s.id()),
            input: s.id().to_string(),
        })
        .collect()
}

// The B8 branch makes [(vi) - (xiv)], the A8 branch [(vi) - (xxii)].
fn fig1_steps() -> Vec<Step> {
    let mut steps = Vec::new();
    for sp in ["1H", "19F"] {
        let tag = if sp == "1H" { "1h" } else { "19f" };
        let (b, c, d, e) = (
            format!("fig1b_{tag}"),
            format!("fig1c_{tag}"),
            format!("fig1d_{tag}"),
            format!("fig1e_{tag}"),
        );
        steps.push(pops(&b, "B8", sp, None, "(vi) - (xiv)"));
        steps.push(pops(&c, "A8", sp, None, "(vi) - (xxii)"));
        steps.push(product(
            &d,
            &b,
            &c,
            false,
            "[(vi) - (xiv)] * [(vi) - (xxii)]",
        ));
        steps.push(product(
            &e,
            &b,
            &c,
            true,
            "|(vi) - (xiv)| * [(vi) - (xxii)]",
        ));
    }
    let mut out = snr_steps(&steps);
    steps.push(classify("class_fig1b", &["fig1b_1h", "fig1b_19f"]));
    steps.push(classify("class_fig1c", &["fig1c_1h", "fig1c_19f"]));
    steps.push(classify("class_fig1e", &["fig1e_1h", "fig1e_19f"]));
    steps.append(&mut out);
    steps
}

fn fig2_steps() -> Vec<Step> {
    let mut steps = vec![
        pops("fig2a", "B8", "19F", Some(cnot_e13()), "(v) - (xiv)"),
        pops("fig2b", "A8", "19F", Some(cnot_e13()), "(v) - (xxii)"),
        product(
            "fig2c",
            "fig2a",
            "fig2b",
            true,
            "|(v) - (xiv)| * [(v) - (xxii)]",
        ),
        pops("pops_v_xiii", "00100-01100", "19F", None, "(v) - (xiii)"),
        pops("pops_v_xxi", "00100-10100", "19F", None, "(v) - (xxi)"),
        product(
            "fig2d",
            "pops_v_xiii",
            "pops_v_xxi",
            true,
            "|(v) - (xiii)| * [(v) - (xxi)]",
        ),
    ];
    let mut out = snr_steps(&steps);
    steps.push(classify("class_fig2a", &["fig2a"]));
    steps.push(classify("class_fig2b", &["fig2b"]));
    steps.push(classify("class_fig2c", &["fig2c"]));
    steps.push(classify("class_fig2d", &["fig2d"]));
    steps.append(&mut out);
    steps
}

fn fig3_steps() -> Vec<Step> {
    let mut steps = vec![
        pops("fig3a", "B8", "19F", Some(cswap_45()), "(vii) - (xiv)"),
        pops("fig3b", "A8", "19F", Some(cswap_45()), "(vii) - (xxii)"),
        product(
            "fig3c",
            "fig3a",
            "fig3b",
            true,
            "|(vii) - (xiv)| * [(vii) - (xxii)]",
        ),
        pops("pops_vii_xv", "00110-01110", "19F", None, "(vii) - (xv)"),
        pops(
            "pops_vii_xxiii",
            "00110-10110",
            "19F",
            None,
            "(vii) - (xxiii)",
        ),
        product(
            "fig3d",
            "pops_vii_xv",
            "pops_vii_xxiii",
            true,
            "|(vii) - (xv)| * [(vii) - (xxiii)]",
        ),
    ];
    let mut out = snr_steps(&steps);
    steps.push(classify("class_fig3a", &["fig3a"]));
    steps.push(classify("class_fig3b", &["fig3b"]));
    steps.push(classify("class_fig3c", &["fig3c"]));
    steps.push(classify("class_fig3d", &["fig3d"]));
    steps.append(&mut out);
    steps
}

fn table2_steps() -> Vec<Step> {
    let mut steps = vec![
        pops("fig1b", "B8", "19F", None, "(vi) - (xiv)"),
        pops("fig1c", "A8", "19F", None, "(vi) - (xxii)"),
        pops("fig2a", "B8", "19F", Some(cnot_e13()), "(v) - (xiv)"),
        pops("fig2b", "A8", "19F", Some(cnot_e13()), "(v) - (xxii)"),
        pops("fig3a", "B8", "19F", Some(cswap_45()), "(vii) - (xiv)"),
        pops("fig3b", "A8", "19F", Some(cswap_45()), "(vii) - (xxii)"),
        pops("pops_v_xiii", "00100-01100", "19F", None, "(v) - (xiii)"),
        pops("pops_v_xxi", "00100-10100", "19F", None, "(v) - (xxi)"),
        pops("pops_vii_xv", "00110-01110", "19F", None, "(vii) - (xv)"),
        pops(
            "pops_vii_xxiii",
            "00110-10110",
            "19F",
            None,
            "(vii) - (xxiii)",
        ),
        product("fig1d", "fig1b", "fig1c", false, "(vi)^2"),
        product("fig1e", "fig1b", "fig1c", true, "|(vi)| * (vi)"),
        product("fig2d", "pops_v_xiii", "pops_v_xxi", true, "|(v)| * (v)"),
        product(
            "fig3d",
            "pops_vii_xv",
            "pops_vii_xxiii",
            true,
            "|(vii)| * (vii)",
        ),
        product("fig2c", "fig2a", "fig2b", true, "|(v)| * (v), 100 ms gate"),
        product(
            "fig3c",
            "fig3a",
            "fig3b",
            true,
            "|(vii)| * (vii), 300 ms gate",
        ),
    ];
    let mut out = snr_steps(&steps);
    steps.append(&mut out);
    steps
}

/// Global run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub noise_sigma: f64,
    pub relax: bool,
    pub tip_angle_rad: f64,
    pub picking: PeakPicking,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            relax: true,
            tip_angle_rad: DEFAULT_TIP_ANGLE_RAD,
            picking: PeakPicking::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Item {
    State(PopulationState),
    Sticks(StickSpectrum),
    Sampled(SampledSpectrum),
    Classification(Classification),
    Number(Option<f64>),
}

/// Values produced by a run, and the metadata the report needs.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub name: Option<String>,
    pub options: RunOptions,
    pub values: BTreeMap<String, Item>,
    pub order: Vec<String>,
    labels: BTreeMap<String, String>,
    gate_durations: BTreeMap<String, f64>,
    outputs: Vec<Output>,
}

/// Resolve `"B8"` or `"00100-01100"` to a transition.
pub fn parse_transition(sys: &SpinSystem, text: &str) -> Result<Transition> {
    if let Some((a, b)) = text.split_once('-') {
        let (a, b) = (sys.parse_state(a.trim())?, sys.parse_state(b.trim())?);
        sys.transition_between(a, b)
            .ok_or_else(|| Error::InvalidLabel(format!("{text}: states must differ in one bit")))
    } else {
        sys.transition_by_label(text)
    }
}

// independent, reproducible noise stream per step
fn step_seed(seed: u64, step: usize) -> u64 {
    let mut z = seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gate_sequence(sys: &SpinSystem, g: &GateJson) -> Result<PulseSequence> {
    compile(sys, &g.to_spec(sys.n())?)
}

pub fn run(sys: &SpinSystem, scenario: &Scenario, opts: &RunOptions) -> Result<RunResult> {
    scenario.check()?;
    let mut values: BTreeMap<String, Item> = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut gate_durations = BTreeMap::new();
    let mut order = Vec::new();

    let render_opts = |k: usize| RenderOptions {
        tip_angle_rad: opts.tip_angle_rad,
        grid: None,
        noise_sigma: opts.noise_sigma,
        seed: step_seed(opts.seed, k),
        relax: opts.relax,
    };

    for (k, step) in scenario.steps.iter().enumerate() {
        let get = |id: &str| values.get(id).expect("checked");
        let kind_err = |id: &str, want: &str| {
            Error::Scenario(format!("step {:?}: input {id:?} is not {want}", step.id()))
        };
        let state_of = |id: &str| match get(id) {
            Item::State(s) => Ok(s.clone()),
            _ => Err(kind_err(id, "a population state")),
        };
        let value = match step {
            Step::Thermal { .. } => Item::State(thermal_state(sys)),
            Step::Pseudopure { state, epsilon, .. } => {
                Item::State(pseudopure(sys, sys.parse_state(state)?, *epsilon)?)
            }
            Step::MakePops { transition, .. } => {
                Item::State(make_pops(sys, &parse_transition(sys, transition)?)?)
            }
            Step::Gate {
                input, gate, relax, ..
            } => {
                let seq = gate_sequence(sys, gate)?;
                Item::State(apply_sequence(sys, &state_of(input)?, &seq, *relax)?)
            }
            Step::Detect { input, species, .. } => {
                Item::Sticks(detect(&state_of(input)?, sys, species, opts.tip_angle_rad)?)
            }
            Step::Render { input, .. } => match get(input) {
                Item::Sticks(st) => {
                    let ro = render_opts(k);
                    let grid = ro.grid_for(sys, &st.species)?;
                    Item::Sampled(render(st, sys, &grid, ro.noise_sigma, ro.seed)?)
                }
                _ => return Err(kind_err(input, "a stick spectrum")),
            },
            Step::PopsSpectrum {
                id,
                transition,
                species,
                gate,
                label,
            } => {
                let t = parse_transition(sys, transition)?;
                let seq = gate.as_ref().map(|g| gate_sequence(sys, g)).transpose()?;
                gate_durations.insert(
                    id.clone(),
                    seq.as_ref().map_or(0.0, |s| s.total_duration_s()),
                );
                if let Some(l) = label {
                    labels.insert(id.clone(), l.clone());
                }
                Item::Sampled(pops_spectrum_by_subtraction(
                    sys,
                    &t,
                    seq.as_ref(),
                    species,
                    &render_opts(k),
                )?)
            }
            Step::Multiply {
                id,
                a,
                b,
                abs_a,
                abs_b,
                label,
            } => {
                if let Some(l) = label {
                    labels.insert(id.clone(), l.clone());
                }
                let dur = gate_durations.get(a).copied().unwrap_or(0.0);
                gate_durations.insert(id.clone(), dur);
                match (get(a), get(b)) {
                    (Item::Sampled(x), Item::Sampled(y)) => {
                        Item::Sampled(multiply(x, y, *abs_a, *abs_b)?)
                    }
                    (Item::Sticks(x), Item::Sticks(y)) => {
                        Item::Sticks(multiply_sticks(x, y, *abs_a, *abs_b)?)
                    }
                    _ => return Err(kind_err(b, "the same spectrum kind as its partner")),
                }
            }
            Step::Classify { inputs, .. } => {
                let mut sticks = Vec::new();
                let mut sampled = Vec::new();
                for id in inputs {
                    match get(id) {
                        Item::Sticks(s) => sticks.push(s.clone()),
                        Item::Sampled(s) => sampled.push(s.clone()),
                        _ => return Err(kind_err(id, "a spectrum")),
                    }
                }
                let c = match (sticks.is_empty(), sampled.is_empty()) {
                    (false, true) => classify_sticks(sys, &sticks)?,
                    (true, false) => classify_sampled(sys, &sampled, &opts.picking)?,
                    _ => {
                        return Err(Error::Scenario(format!(
                            "step {:?}: classify needs spectra of one kind",
                            step.id()
                        )))
                    }
                };
                Item::Classification(c)
            }
            Step::Snr { input, .. } => match get(input) {
                Item::Sampled(s) => {
                    let w = default_noise_window(sys, &s.species)?;
                    match snr(s, w) {
                        Ok(v) => Item::Number(Some(v)),
                        Err(Error::UndefinedSnr) => Item::Number(None),
                        Err(e) => return Err(e),
                    }
                }
                _ => return Err(kind_err(input, "a sampled spectrum")),
            },
        };
        values.insert(step.id().to_string(), value);
        order.push(step.id().to_string());
    }
    Ok(RunResult {
        name: scenario.name.clone(),
        options: opts.clone(),
        values,
        order,
        labels,
        gate_durations,
        outputs: scenario.outputs.clone(),
    })
}

impl RunResult {
    pub fn sampled(&self, id: &str) -> Option<&SampledSpectrum> {
        match self.values.get(id)? {
            Item::Sampled(s) => Some(s),
            _ => None,
        }
    }

    pub fn classification(&self, id: &str) -> Option<&Classification> {
        match self.values.get(id)? {
            Item::Classification(c) => Some(c),
            _ => None,
        }
    }

    pub fn snr(&self, spectrum_id: &str) -> Option<f64> {
        match self.values.get(&format!("snr_{spectrum_id}"))? {
            Item::Number(v) => *v,
            _ => None,
        }
    }

    /// Mean S/N of the single (non-product) POPS spectra grouped by gate
    /// duration in milliseconds.
    pub fn snr_by_gate_duration(&self) -> BTreeMap<u64, f64> {
        let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for id in &self.order {
            if !matches!(self.values.get(id), Some(Item::Sampled(s)) if s.seed.is_some()) {
                continue;
            }
            let (Some(d), Some(v)) = (self.gate_durations.get(id), self.snr(id)) else {
                continue;
            };
            groups
                .entry((d * 1000.0).round() as u64)
                .or_default()
                .push(v);
        }
        groups
            .into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
            .collect()
    }

    pub fn report(&self) -> Value {
        let mut spectra = Vec::new();
        let mut classes = serde_json::Map::new();
        for id in &self.order {
            match &self.values[id] {
                Item::Sampled(s) => {
                    let file = self
                        .outputs
                        .iter()
                        .find(|o| &o.id == id)
                        .map(|o| o.file.clone());
                    spectra.push(json!({
                        "id": id,
                        "label": self.labels.get(id),
                        "species": s.species,
                        "gate_duration_ms": self.gate_durations.get(id).map(|d| (d * 1000.0).round()),
                        "product": s.seed.is_none(),
                        "snr": self.snr(id),
                        "file": file,
                    }));
                }
                Item::Classification(c) => {
                    classes.insert(id.clone(), c.to_json_value());
                }
                _ => {}
            }
        }
        let by_duration: serde_json::Map<String, Value> = self
            .snr_by_gate_duration()
            .into_iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let means: Vec<f64> = by_duration.values().filter_map(Value::as_f64).collect();
        let decreasing = means.len() >= 2 && means.windows(2).all(|w| w[0] > w[1]);
        json!({
            "scenario": self.name,
            "seed": self.options.seed,
            "noise_sigma": self.options.noise_sigma,
            "relax": self.options.relax,
            "spectra": spectra,
            "classifications": classes,
            "snr_by_gate_duration_ms": by_duration,
            "snr_decreases_with_gate_duration": decreasing,
        })
    }

    /// Write CSV outputs and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for out in &self.outputs {
            let path = dir.join(&out.file);
            match self.values.get(&out.id) {
                Some(Item::Sampled(s)) => std::fs::write(&path, s.to_csv())?,
                Some(Item::Sticks(s)) => std::fs::write(&path, s.to_json())?,
                Some(Item::Classification(c)) => {
                    std::fs::write(&path, serde_json::to_string_pretty(&c.to_json_value())?)?
                }
                _ => {
                    return Err(Error::Scenario(format!(
                        "output {:?} is not a spectrum or classification",
                        out.id
                    )))
                }
            }
            written.push(path);
        }
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self.report())? + "\n")?;
        written.push(path);
        Ok(written)
    }
}
