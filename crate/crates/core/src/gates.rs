//! Controlled-NOT and controlled-SWAP gates compiled into transition-selective
//! pi pulses.
//!
//! A C^(N-1)-NOT is a single pulse on the target's transition whose neighbor
//! configuration equals the control pattern. A C^(N-2)-SWAP on `(u, v)` is the
//! three-pulse sequence `pi_r, pi_s, pi_r`, where `r` flips `u` with `v = 1`
//! and `s` flips `v` with `u = 1`, so the intermediate level has both swap
//! bits set.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_system::{BasisState, SpinSystem, Transition};
use crate::state::{pi_pulse, relax, PopulationState};

/// Length of one Gaussian selective pulse.
pub const SELECTIVE_PULSE_S: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateVariant {
    Cnot { target: usize },
    Cswap { first: usize, second: usize },
}

/// A controlled gate over 0-based spin indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateSpec {
    pub variant: GateVariant,
    pub controls: BTreeMap<usize, u8>,
}

impl GateSpec {
    pub fn cnot(controls: BTreeMap<usize, u8>, target: usize) -> Self {
        GateSpec {
            variant: GateVariant::Cnot { target },
            controls,
        }
    }

    pub fn cswap(controls: BTreeMap<usize, u8>, first: usize, second: usize) -> Self {
        GateSpec {
            variant: GateVariant::Cswap { first, second },
            controls,
        }
    }

    /// Controls given as a bit string over the non-target spins in order,
    /// e.g. `"0010"` for a 5-qubit CNOT on qubit 5.
    pub fn cnot_from_bits(n: usize, control_bits: &str, target: usize) -> Result<Self> {
        let controls = controls_from_bits(n, control_bits, &[target])?;
        let g = Self::cnot(controls, target);
        g.validate(n)?;
        Ok(g)
    }

    pub fn cswap_from_bits(
        n: usize,
        control_bits: &str,
        first: usize,
        second: usize,
    ) -> Result<Self> {
        let controls = controls_from_bits(n, control_bits, &[first, second])?;
        let g = Self::cswap(controls, first, second);
        g.validate(n)?;
        Ok(g)
    }

    pub fn targets(&self) -> Vec<usize> {
        match self.variant {
            GateVariant::Cnot { target } => vec![target],
            GateVariant::Cswap { first, second } => vec![first, second],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let targets = self.targets();
        if targets.iter().any(|&t| t >= n) {
            return Err(Error::MalformedGate(format!(
                "target out of range for {n} qubits"
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::MalformedGate("swap targets must differ".into()));
        }
        for (&c, &v) in &self.controls {
            if c >= n {
                return Err(Error::MalformedGate(format!(
                    "control qubit {} out of range",
                    c + 1
                )));
            }
            if targets.contains(&c) {
                return Err(Error::MalformedGate(format!(
                    "qubit {} is both control and target",
                    c + 1
                )));
            }
            if v > 1 {
                return Err(Error::MalformedGate(format!(
                    "control value {v} is not a bit"
                )));
            }
        }
        if self.controls.len() + targets.len() != n {
            return Err(Error::MalformedGate(format!(
                "expected {} controls, got {}",
                n - targets.len(),
                self.controls.len()
            )));
        }
        Ok(())
    }

    fn controls_match(&self, s: BasisState) -> bool {
        self.controls.iter().all(|(&c, &v)| s.bit(c) == v)
    }

    /// A basis state with the controls set and all targets at `0`.
    fn control_state(&self, n: usize) -> BasisState {
        let mut s = BasisState::new(0, n).expect("n validated");
        for (&c, &v) in &self.controls {
            s = s.with_bit(c, v);
        }
        s
    }
}

fn controls_from_bits(n: usize, bits: &str, targets: &[usize]) -> Result<BTreeMap<usize, u8>> {
    let spins: Vec<usize> = (0..n).filter(|i| !targets.contains(i)).collect();
    if bits.len() != spins.len() {
        return Err(Error::MalformedGate(format!(
            "expected {} control bits, got {bits:?}",
            spins.len()
        )));
    }
    spins
        .into_iter()
        .zip(bits.chars())
        .map(|(s, c)| match c {
            '0' => Ok((s, 0)),
            '1' => Ok((s, 1)),
            _ => Err(Error::MalformedGate(format!("bad control bits {bits:?}"))),
        })
        .collect()
}

/// File form of a gate: qubits are 1-based.
///
/// `{"gate":"cnot","controls":{"1":0,"2":0,"3":1,"4":0},"target":5}` or
/// `{"gate":"cswap","controls":{"1":0,"2":0,"3":1},"targets":[4,5]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateJson {
    pub gate: String,
    pub controls: BTreeMap<String, u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<[usize; 2]>,
}

impl GateJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_spec(&self, n: usize) -> Result<GateSpec> {
        let zero_based = |q: usize| {
            q.checked_sub(1)
                .ok_or_else(|| Error::MalformedGate("qubits are numbered from 1".into()))
        };
        let controls = self
            .controls
            .iter()
            .map(|(k, &v)| {
                let q: usize = k
                    .parse()
                    .map_err(|_| Error::MalformedGate(format!("bad control qubit {k:?}")))?;
                Ok((zero_based(q)?, v))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        let spec = match (self.gate.as_str(), self.target, self.targets) {
            ("cnot", Some(t), None) => GateSpec::cnot(controls, zero_based(t)?),
            ("cswap", None, Some([a, b])) => {
                GateSpec::cswap(controls, zero_based(a)?, zero_based(b)?)
            }
            _ => {
                return Err(Error::MalformedGate(format!(
                    "unknown gate {:?} or wrong target fields",
                    self.gate
                )))
            }
        };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn from_spec(g: &GateSpec) -> Self {
        let controls = g
            .controls
            .iter()
            .map(|(&c, &v)| ((c + 1).to_string(), v))
            .collect();
        match g.variant {
            GateVariant::Cnot { target } => GateJson {
                gate: "cnot".into(),
                controls,
                target: Some(target + 1),
                targets: None,
            },
            GateVariant::Cswap { first, second } => GateJson {
                gate: "cswap".into(),
                controls,
                target: None,
                targets: Some([first + 1, second + 1]),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    pub transition: Transition,
    pub angle_rad: f64,
    pub duration_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn from_transitions(ts: impl IntoIterator<Item = Transition>) -> Self {
        PulseSequence {
            pulses: ts
                .into_iter()
                .map(|transition| Pulse {
                    transition,
                    angle_rad: PI,
                    duration_s: SELECTIVE_PULSE_S,
                })
                .collect(),
        }
    }

    pub fn total_duration_s(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration_s).sum()
    }

    pub fn labels(&self) -> Vec<String> {
        self.pulses
            .iter()
            .map(|p| p.transition.label.to_string())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }
}

pub fn compile_cnot(sys: &SpinSystem, g: &GateSpec) -> Result<PulseSequence> {
    g.validate(sys.n())?;
    let GateVariant::Cnot { target } = g.variant else {
        return Err(Error::MalformedGate("not a cnot".into()));
    };
    let base = g.control_state(sys.n());
    Ok(PulseSequence::from_transitions([
        sys.transition(target, base.neighbors(target))
    ]))
}

pub fn compile_cswap(sys: &SpinSystem, g: &GateSpec) -> Result<PulseSequence> {
    g.validate(sys.n())?;
    let GateVariant::Cswap {
        first: u,
        second: v,
    } = g.variant
    else {
        return Err(Error::MalformedGate("not a cswap".into()));
    };
    let base = g.control_state(sys.n());
    // r: (u=0, v=1) <-> (u=1, v=1); s: (u=1, v=1) <-> (u=1, v=0)
    let r = sys.transition(u, base.with_bit(v, 1).neighbors(u));
    let s = sys.transition(v, base.with_bit(u, 1).neighbors(v));
    Ok(PulseSequence::from_transitions([r.clone(), s, r]))
}

pub fn compile(sys: &SpinSystem, g: &GateSpec) -> Result<PulseSequence> {
    match g.variant {
        GateVariant::Cnot { .. } => compile_cnot(sys, g),
        GateVariant::Cswap { .. } => compile_cswap(sys, g),
    }
}

/// Apply the pulses in order. With `relax`, the whole deviation vector decays
/// by `exp(-duration / T1eff)` after each pulse.
pub fn apply_sequence(
    sys: &SpinSystem,
    state: &PopulationState,
    seq: &PulseSequence,
    relax_on: bool,
) -> Result<PopulationState> {
    if state.n() != sys.n() {
        return Err(Error::ForeignTransition(state.n()));
    }
    let mut out = state.clone();
    for p in &seq.pulses {
        if (p.angle_rad - PI).abs() > 1e-12 {
            return Err(Error::UnsupportedAngle(p.angle_rad));
        }
        if !sys.owns(&p.transition) {
            return Err(Error::ForeignTransition(sys.n()));
        }
        out = pi_pulse(&out, &p.transition)?;
        if relax_on {
            out = relax(&out, p.duration_s, sys.t1_eff_s());
        }
    }
    Ok(out)
}

/// The basis permutation a gate performs, from bit logic alone:
/// `perm[i]` is the image of basis index `i`.
pub fn gate_truth_permutation(g: &GateSpec, n: usize) -> Result<Vec<usize>> {
    g.validate(n)?;
    Ok((0..1u32 << n)
        .map(|i| {
            let s = BasisState::new(i, n).expect("in range");
            if !g.controls_match(s) {
                return s.index();
            }
            match g.variant {
                GateVariant::Cnot { target } => s.flip(target).index(),
                GateVariant::Cswap { first, second } => {
                    let (a, b) = (s.bit(first), s.bit(second));
                    s.with_bit(first, b).with_bit(second, a).index()
                }
            }
        })
        .collect())
}

/// Move populations along a basis permutation.
pub fn permute(state: &PopulationState, perm: &[usize]) -> PopulationState {
    let mut out = vec![0.0; perm.len()];
    for (i, &j) in perm.iter().enumerate() {
        out[j] = state.populations()[i];
    }
    PopulationState::from_populations(state.n(), out).expect("same length")
}
