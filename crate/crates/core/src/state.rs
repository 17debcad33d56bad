//! Diagonal density matrices as deviation-population vectors.
//!
//! The uniform background is dropped, so every state here sums to zero.
//! Thermal, pseudopure and POPS states are all plain population vectors that
//! differ only in how they were made.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spin_system::{BasisState, SpinSystem, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Thermal,
    Pseudopure,
    Pops,
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationState {
    n: usize,
    populations: Vec<f64>,
    kind: StateKind,
}

impl PopulationState {
    pub fn zero(n: usize) -> Self {
        PopulationState {
            n,
            populations: vec![0.0; 1 << n],
            kind: StateKind::General,
        }
    }

    /// Wrap a raw population vector of length `2^n`.
    pub fn from_populations(n: usize, populations: Vec<f64>) -> Result<Self> {
        if populations.len() != 1 << n {
            return Err(Error::InvalidParameter(format!(
                "expected {} populations, got {}",
                1usize << n,
                populations.len()
            )));
        }
        Ok(PopulationState {
            n,
            populations,
            kind: StateKind::General,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn population(&self, s: BasisState) -> f64 {
        self.populations[s.index()]
    }

    pub fn sum(&self) -> f64 {
        self.populations.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.populations.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    pub fn with_kind(mut self, kind: StateKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PopulationState {
            n: self.n,
            populations: self.populations.iter().map(|p| p * factor).collect(),
            kind: self.kind,
        }
    }

    /// The two levels of a POPS, positive member first, if the vector has
    /// exactly two nonzero entries of equal magnitude and opposite sign.
    pub fn pops_members(&self) -> Option<(BasisState, BasisState)> {
        let nonzero: Vec<usize> = (0..self.populations.len())
            .filter(|&i| self.populations[i] != 0.0)
            .collect();
        let &[a, b] = nonzero.as_slice() else {
            return None;
        };
        let (pa, pb) = (self.populations[a], self.populations[b]);
        let scale = pa.abs().max(pb.abs());
        if pa.signum() == pb.signum() || (pa + pb).abs() > 1e-12 * scale {
            return None;
        }
        let sa = BasisState::new(a as u32, self.n).ok()?;
        let sb = BasisState::new(b as u32, self.n).ok()?;
        Some(if pa > 0.0 { (sa, sb) } else { (sb, sa) })
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.n, other.n, "population states of different sizes");
    }
}

impl Add for &PopulationState {
    type Output = PopulationState;

    fn add(self, rhs: &PopulationState) -> PopulationState {
        self.check_same(rhs);
        PopulationState {
            n: self.n,
            populations: self
                .populations
                .iter()
                .zip(&rhs.populations)
                .map(|(a, b)| a + b)
                .collect(),
            kind: StateKind::General,
        }
    }
}

impl Sub for &PopulationState {
    type Output = PopulationState;

    fn sub(self, rhs: &PopulationState) -> PopulationState {
        self.check_same(rhs);
        PopulationState {
            n: self.n,
            populations: self
                .populations
                .iter()
                .zip(&rhs.populations)
                .map(|(a, b)| a - b)
                .collect(),
            kind: StateKind::General,
        }
    }
}

impl Mul<f64> for &PopulationState {
    type Output = PopulationState;

    fn mul(self, rhs: f64) -> PopulationState {
        self.scaled(rhs).with_kind(StateKind::General)
    }
}

/// Thermal equilibrium deviation populations: `sum_i w_i (1/2 - b_i)`.
pub fn thermal_state(sys: &SpinSystem) -> PopulationState {
    let n = sys.n();
    let populations = sys
        .states()
        .map(|s| {
            (0..n)
                .map(|i| sys.thermal_weight(i) * (0.5 - f64::from(s.bit(i))))
                .sum()
        })
        .collect();
    PopulationState {
        n,
        populations,
        kind: StateKind::Thermal,
    }
}

/// Deviation part of a pseudopure state, `epsilon * (delta_js - 2^-N)`.
pub fn pseudopure(sys: &SpinSystem, s: BasisState, epsilon: f64) -> Result<PopulationState> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if s.n() != sys.n() {
        return Err(Error::InvalidState(s.bits()));
    }
    let background = epsilon / sys.num_states() as f64;
    let mut populations = vec![-background; sys.num_states()];
    populations[s.index()] = epsilon - background;
    Ok(PopulationState {
        n: sys.n(),
        populations,
        kind: StateKind::Pseudopure,
    })
}

fn check_transition(state: &PopulationState, t: &Transition) -> Result<()> {
    let n = state.n;
    if t.lower.n() != n
        || t.upper.n() != n
        || t.spin >= n
        || t.lower.bit(t.spin) != 0
        || t.upper != t.lower.flip(t.spin)
    {
        return Err(Error::ForeignTransition(n));
    }
    Ok(())
}

/// Ideal transition-selective pi pulse: swap the populations of the two
/// levels connected by `t`.
pub fn pi_pulse(state: &PopulationState, t: &Transition) -> Result<PopulationState> {
    check_transition(state, t)?;
    let mut out = state.clone();
    out.populations.swap(t.lower.index(), t.upper.index());
    out.kind = StateKind::General;
    Ok(out)
}

/// Uniform longitudinal decay of the deviation vector over `duration_s`.
pub fn relax(state: &PopulationState, duration_s: f64, t1_eff_s: f64) -> PopulationState {
    state.scaled((-duration_s / t1_eff_s).exp())
}

/// POPS made by subtracting a selective-pi-pulse experiment from a no-pulse
/// experiment: `thermal - pi_pulse(thermal, t)`. The equilibrium-richer
/// (lower) level ends up positive.
pub fn make_pops(sys: &SpinSystem, t: &Transition) -> Result<PopulationState> {
    let thermal = thermal_state(sys);
    let pulsed = pi_pulse(&thermal, t)?;
    Ok((&thermal - &pulsed).with_kind(StateKind::Pops))
}
