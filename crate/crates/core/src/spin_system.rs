//! First-order N-qubit spin systems.
//!
//! A spin's transition frequency depends only on its own offset and on the
//! up/down configuration of the other spins, through the effective couplings:
//! `f = offset_i + sum_j c_ij * (1 - 2 b_j) / 2`. Each spin therefore owns a
//! sub-spectrum of `2^(N-1)` peaks, one per neighbor configuration. Peaks are
//! labelled from the left (highest frequency) as `A1`, `A2`, ...

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SPINS: usize = 2;
pub const MAX_SPINS: usize = 16;

/// Two computed frequencies closer than this are treated as the same line.
pub const FREQ_TOLERANCE_HZ: f64 = 1e-9;

/// Effective longitudinal relaxation time used when a config omits it.
pub const DEFAULT_T1_EFF_S: f64 = 0.65;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinDef {
    pub name: String,
    pub species: String,
    pub offset_hz: f64,
    pub t2star_s: f64,
}

impl SpinDef {
    pub fn new(name: &str, species: &str, offset_hz: f64, t2star_s: f64) -> Self {
        SpinDef {
            name: name.to_string(),
            species: species.to_string(),
            offset_hz,
            t2star_s,
        }
    }

    /// Lorentzian half width at half maximum, `1 / (2 pi T2*)`.
    pub fn half_width_hz(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.t2star_s)
    }
}

/// A computational basis state `|b1 b2 ... bN>`, qubit 1 being the most
/// significant bit of the index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    index: u32,
    n: u8,
}

impl BasisState {
    pub fn new(index: u32, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SPINS || (index as u64) >= (1u64 << n) {
            return Err(Error::InvalidState(format!("index {index} for {n} qubits")));
        }
        Ok(BasisState { index, n: n as u8 })
    }

    /// Parse a bit string such as `"00101"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let n = bits.len();
        if n == 0 || n > MAX_SPINS {
            return Err(Error::InvalidState(bits.to_string()));
        }
        let mut index = 0u32;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                _ => return Err(Error::InvalidState(bits.to_string())),
            }
        }
        Ok(BasisState { index, n: n as u8 })
    }

    pub fn index(self) -> usize {
        self.index as usize
    }

    pub fn n(self) -> usize {
        self.n as usize
    }

    /// Value of the bit for `spin` (0-based, spin 0 is qubit 1).
    pub fn bit(self, spin: usize) -> u8 {
        ((self.index >> (self.n() - 1 - spin)) & 1) as u8
    }

    pub fn flip(self, spin: usize) -> Self {
        BasisState {
            index: self.index ^ (1 << (self.n() - 1 - spin)),
            n: self.n,
        }
    }

    pub fn with_bit(self, spin: usize, value: u8) -> Self {
        if self.bit(spin) == value {
            self
        } else {
            self.flip(spin)
        }
    }

    pub fn bits(self) -> String {
        (0..self.n())
            .map(|i| char::from(b'0' + self.bit(i)))
            .collect()
    }

    /// The bits of every spin except `spin`, packed most significant first.
    pub fn neighbors(self, spin: usize) -> u32 {
        let n = self.n();
        let low_width = n - 1 - spin;
        let high = self.index >> (low_width + 1);
        let low = self.index & ((1u32 << low_width) - 1);
        (high << low_width) | low
    }

    /// Inverse of [`BasisState::neighbors`]: insert `bit` for `spin`.
    pub fn from_neighbors(n: usize, spin: usize, neighbors: u32, bit: u8) -> Self {
        let low_width = n - 1 - spin;
        let high = neighbors >> low_width;
        let low = neighbors & ((1u32 << low_width) - 1);
        let index = (high << (low_width + 1)) | ((bit as u32) << low_width) | low;
        BasisState { index, n: n as u8 }
    }

    pub fn hamming(self, other: BasisState) -> u32 {
        (self.index ^ other.index).count_ones()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bits())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeakLabel {
    pub spin_name: String,
    pub peak_index: usize,
}

impl fmt::Display for PeakLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.spin_name, self.peak_index)
    }
}

/// A peak label with the sign it carries in a pseudopure-state spectrum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedPeak {
    pub spin: usize,
    pub label: PeakLabel,
    pub sign: i8,
}

impl fmt::Display for SignedPeak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { '-' } else { '+' };
        write!(f, "{s}{}", self.label)
    }
}

/// A single-spin-flip transition between two basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub lower: BasisState,
    pub upper: BasisState,
    pub spin: usize,
    pub frequency_hz: f64,
    pub label: PeakLabel,
}

impl Transition {
    pub fn neighbors(&self) -> u32 {
        self.lower.neighbors(self.spin)
    }

    pub fn connects(&self, a: BasisState, b: BasisState) -> bool {
        (self.lower == a && self.upper == b) || (self.lower == b && self.upper == a)
    }
}

#[derive(Clone, Debug)]
pub struct SpinSystem {
    spins: Vec<SpinDef>,
    couplings: Vec<f64>,
    t1_eff_s: f64,
    thermal_weights: BTreeMap<String, f64>,
    // peak_order[spin][k] is the neighbor configuration of peak k + 1
    peak_order: Vec<Vec<u32>>,
    // peak_rank[spin][neighbors] is the 1-based peak index
    peak_rank: Vec<Vec<u32>>,
}

impl SpinSystem {
    /// Validate a system and precompute its peak tables.
    ///
    /// `couplings` is a full `N x N` matrix in Hz. It must be symmetric with a
    /// zero diagonal, and every spin's sub-spectrum must be resolved.
    pub fn new(spins: Vec<SpinDef>, couplings: Vec<Vec<f64>>, t1_eff_s: f64) -> Result<Self> {
        let n = spins.len();
        if !(MIN_SPINS..=MAX_SPINS).contains(&n) {
            return Err(Error::SpinCount(n));
        }
        for (i, s) in spins.iter().enumerate() {
            if s.name.is_empty() {
                return Err(Error::InvalidSpin {
                    spin: s.name.clone(),
                    reason: "empty name".into(),
                });
            }
            if spins[..i].iter().any(|o| o.name == s.name) {
                return Err(Error::DuplicateSpin(s.name.clone()));
            }
            if !(s.t2star_s > 0.0 && s.t2star_s.is_finite()) {
                return Err(Error::InvalidSpin {
                    spin: s.name.clone(),
                    reason: format!("t2star must be positive, got {}", s.t2star_s),
                });
            }
            if !s.offset_hz.is_finite() {
                return Err(Error::InvalidSpin {
                    spin: s.name.clone(),
                    reason: "offset must be finite".into(),
                });
            }
        }
        if !(t1_eff_s > 0.0 && t1_eff_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t1_eff must be positive, got {t1_eff_s}"
            )));
        }
        if couplings.len() != n || couplings.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix must be {n}x{n}"
            )));
        }
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            if couplings[i][i] != 0.0 {
                return Err(Error::SelfCoupling(spins[i].name.clone()));
            }
            for j in 0..n {
                let c = couplings[i][j];
                if !c.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "coupling {}-{} is not finite",
                        spins[i].name, spins[j].name
                    )));
                }
                if c != couplings[j][i] {
                    return Err(Error::AsymmetricCoupling(
                        spins[i].name.clone(),
                        spins[j].name.clone(),
                    ));
                }
                flat[i * n + j] = c;
            }
        }

        let mut sys = SpinSystem {
            spins,
            couplings: flat,
            t1_eff_s,
            thermal_weights: BTreeMap::new(),
            peak_order: Vec::new(),
            peak_rank: Vec::new(),
        };
        sys.build_peak_tables()?;
        Ok(sys)
    }

    fn build_peak_tables(&mut self) -> Result<()> {
        let n = self.n();
        let half = 1usize << (n - 1);
        let mut order_all = Vec::with_capacity(n);
        let mut rank_all = Vec::with_capacity(n);
        for spin in 0..n {
            let freqs: Vec<f64> = (0..half as u32)
                .map(|nb| self.transition_frequency(spin, nb))
                .collect();
            let mut order: Vec<u32> = (0..half as u32).collect();
            order.sort_by(|&a, &b| {
                freqs[b as usize]
                    .partial_cmp(&freqs[a as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            for w in order.windows(2) {
                let (fa, fb) = (freqs[w[0] as usize], freqs[w[1] as usize]);
                if (fa - fb).abs() <= FREQ_TOLERANCE_HZ {
                    return Err(Error::DegenerateTransitions {
                        spin: self.spins[spin].name.clone(),
                        freq_hz: fa,
                    });
                }
            }
            let mut rank = vec![0u32; half];
            for (k, &nb) in order.iter().enumerate() {
                rank[nb as usize] = k as u32 + 1;
            }
            order_all.push(order);
            rank_all.push(rank);
        }
        self.peak_order = order_all;
        self.peak_rank = rank_all;
        Ok(())
    }

    /// Set the thermal deviation weight of every spin of `species`.
    pub fn with_thermal_weight(mut self, species: &str, weight: f64) -> Result<Self> {
        if !self.spins.iter().any(|s| s.species == species) {
            return Err(Error::UnknownSpecies(species.to_string()));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "thermal weight must be positive, got {weight}"
            )));
        }
        self.thermal_weights.insert(species.to_string(), weight);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn num_states(&self) -> usize {
        1 << self.n()
    }

    pub fn spins(&self) -> &[SpinDef] {
        &self.spins
    }

    pub fn spin(&self, i: usize) -> &SpinDef {
        &self.spins[i]
    }

    pub fn spin_index(&self, name: &str) -> Result<usize> {
        self.spins
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSpin(name.to_string()))
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n() + j]
    }

    pub fn coupling_matrix(&self) -> Vec<Vec<f64>> {
        self.couplings
            .chunks(self.n())
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn t1_eff_s(&self) -> f64 {
        self.t1_eff_s
    }

    pub fn thermal_weight(&self, spin: usize) -> f64 {
        self.thermal_weights
            .get(&self.spins[spin].species)
            .copied()
            .unwrap_or(1.0)
    }

    pub fn thermal_weights(&self) -> &BTreeMap<String, f64> {
        &self.thermal_weights
    }

    /// Distinct species tags in order of first appearance.
    pub fn species(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.spins {
            if !out.contains(&s.species.as_str()) {
                out.push(&s.species);
            }
        }
        out
    }

    pub fn spins_of_species(&self, species: &str) -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..self.n())
            .filter(|&i| self.spins[i].species == species)
            .collect();
        if idx.is_empty() {
            return Err(Error::UnknownSpecies(species.to_string()));
        }
        Ok(idx)
    }

    pub fn state(&self, index: usize) -> BasisState {
        BasisState {
            index: index as u32,
            n: self.n() as u8,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.num_states()).map(move |i| self.state(i))
    }

    pub fn parse_state(&self, bits: &str) -> Result<BasisState> {
        let s = BasisState::from_bits(bits)?;
        if s.n() != self.n() {
            return Err(Error::InvalidState(format!(
                "{bits} (system has {} qubits)",
                self.n()
            )));
        }
        Ok(s)
    }

    /// First-order frequency of `spin` for the packed configuration of the
    /// other spins.
    pub fn transition_frequency(&self, spin: usize, neighbors: u32) -> f64 {
        let n = self.n();
        let mut f = self.spins[spin].offset_hz;
        let mut k = 0;
        for j in 0..n {
            if j == spin {
                continue;
            }
            let b = (neighbors >> (n - 2 - k)) & 1;
            let c = self.coupling(spin, j);
            f += if b == 0 { 0.5 * c } else { -0.5 * c };
            k += 1;
        }
        f
    }

    /// Neighbor configurations ordered by peak index (index 1 first).
    pub fn peak_table(&self, spin: usize) -> &[u32] {
        &self.peak_order[spin]
    }

    pub fn peak_index(&self, spin: usize, neighbors: u32) -> usize {
        self.peak_rank[spin][neighbors as usize] as usize
    }

    pub fn label(&self, spin: usize, neighbors: u32) -> PeakLabel {
        PeakLabel {
            spin_name: self.spins[spin].name.clone(),
            peak_index: self.peak_index(spin, neighbors),
        }
    }

    pub fn transition(&self, spin: usize, neighbors: u32) -> Transition {
        let n = self.n();
        Transition {
            lower: BasisState::from_neighbors(n, spin, neighbors, 0),
            upper: BasisState::from_neighbors(n, spin, neighbors, 1),
            spin,
            frequency_hz: self.transition_frequency(spin, neighbors),
            label: self.label(spin, neighbors),
        }
    }

    /// Look up a transition by its peak label, e.g. `"E13"`.
    pub fn transition_by_label(&self, label: &str) -> Result<Transition> {
        let split = label
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::InvalidLabel(label.to_string()))?;
        let (name, idx) = label.split_at(split);
        let spin = self
            .spin_index(name)
            .map_err(|_| Error::InvalidLabel(label.to_string()))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::InvalidLabel(label.to_string()))?;
        if idx == 0 || idx > self.peak_order[spin].len() {
            return Err(Error::InvalidLabel(label.to_string()));
        }
        Ok(self.transition(spin, self.peak_order[spin][idx - 1]))
    }

    /// The transition connecting two states that differ in exactly one bit.
    pub fn transition_between(&self, a: BasisState, b: BasisState) -> Option<Transition> {
        if a.n() != self.n() || b.n() != self.n() || a.hamming(b) != 1 {
            return None;
        }
        let spin = (0..self.n()).find(|&i| a.bit(i) != b.bit(i))?;
        Some(self.transition(spin, a.neighbors(spin)))
    }

    /// Whether `t` is one of this system's transitions.
    pub fn owns(&self, t: &Transition) -> bool {
        t.lower.n() == self.n()
            && t.spin < self.n()
            && t.lower.bit(t.spin) == 0
            && t.upper == t.lower.flip(t.spin)
    }

    /// All `N * 2^(N-1)` transitions, spin by spin in peak-index order.
    pub fn enumerate_transitions(&self) -> Vec<Transition> {
        (0..self.n())
            .flat_map(|spin| {
                self.peak_order[spin]
                    .iter()
                    .map(move |&nb| self.transition(spin, nb))
            })
            .collect()
    }

    /// Signed peak pattern of a pseudopure state: one peak per spin, positive
    /// when the spin's bit is 0.
    pub fn pattern_of(&self, state: BasisState) -> Vec<SignedPeak> {
        (0..self.n())
            .map(|spin| SignedPeak {
                spin,
                label: self.label(spin, state.neighbors(spin)),
                sign: if state.bit(spin) == 0 { 1 } else { -1 },
            })
            .collect()
    }
}
