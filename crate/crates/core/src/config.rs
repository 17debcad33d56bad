//! JSON system description.
//!
//! ```json
//! {"spins": [{"name": "A", "species": "1H", "offset_hz": 800.0, "t2star_s": 0.086}, ...],
//!  "couplings_hz": [["A", "B", -40.0], ...],
//!  "t1eff_s": 0.65}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_system::{SpinDef, SpinSystem, DEFAULT_T1_EFF_S};

/// The shipped five-qubit example system.
pub const FIVE_QUBIT_JSON: &str = include_str!("../data/fivequbit.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub spins: Vec<SpinDef>,
    pub couplings_hz: Vec<(String, String, f64)>,
    #[serde(default = "default_t1", rename = "t1eff_s")]
    pub t1_eff_s: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thermal_weights: BTreeMap<String, f64>,
}

fn default_t1() -> f64 {
    DEFAULT_T1_EFF_S
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_system(sys: &SpinSystem) -> Self {
        let n = sys.n();
        let mut couplings_hz = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                couplings_hz.push((
                    sys.spin(i).name.clone(),
                    sys.spin(j).name.clone(),
                    sys.coupling(i, j),
                ));
            }
        }
        SystemConfig {
            spins: sys.spins().to_vec(),
            couplings_hz,
            t1_eff_s: sys.t1_eff_s(),
            thermal_weights: sys.thermal_weights().clone(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Validate a configuration and build the spin system.
pub fn build_system(config: &SystemConfig) -> Result<SpinSystem> {
    let n = config.spins.len();
    let index = |name: &str| {
        config
            .spins
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownSpin(name.to_string()))
    };
    let mut table: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n];
    for (a, b, c) in &config.couplings_hz {
        let (i, j) = (index(a)?, index(b)?);
        if i == j {
            return Err(Error::SelfCoupling(a.clone()));
        }
        for (x, y) in [(i, j), (j, i)] {
            match table[x][y] {
                Some(prev) if prev != *c => {
                    return Err(Error::AsymmetricCoupling(a.clone(), b.clone()))
                }
                _ => table[x][y] = Some(*c),
            }
        }
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            matrix[i][j] = table[i][j].ok_or_else(|| {
                Error::MissingCoupling(config.spins[i].name.clone(), config.spins[j].name.clone())
            })?;
        }
    }
    let mut sys = SpinSystem::new(config.spins.clone(), matrix, config.t1_eff_s)?;
    for (species, w) in &config.thermal_weights {
        sys = sys.with_thermal_weight(species, *w)?;
    }
    Ok(sys)
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SpinSystem> {
    build_system(&SystemConfig::from_file(path)?)
}

pub fn five_qubit_system() -> SpinSystem {
    build_system(&SystemConfig::from_json(FIVE_QUBIT_JSON).expect("shipped config parses"))
        .expect("shipped config is valid")
}
