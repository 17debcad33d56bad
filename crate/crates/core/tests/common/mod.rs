#![allow(dead_code)]

use nmr_pops::{SpinDef, SpinSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random fully resolved system: offsets and couplings drawn until no two
/// transitions coincide and every adjacent pair of lines of a species is at
/// least `min_gap_hz` apart.
pub fn random_system(n: usize, seed: u64) -> SpinSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let spins: Vec<SpinDef> = (0..n)
            .map(|i| {
                let species = if rng.random_bool(0.5) { "1H" } else { "19F" };
                let name = ((b'A' + i as u8) as char).to_string();
                SpinDef::new(&name, species, rng.random_range(-3000.0..3000.0), 0.1)
            })
            .collect();
        let mut j = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let v = rng.random_range(-200.0..200.0);
                j[a][b] = v;
                j[b][a] = v;
            }
        }
        let Ok(sys) = SpinSystem::new(spins, j, 0.65) else {
            continue;
        };
        if min_line_gap(&sys) > 1.0 {
            return sys;
        }
    }
}

pub fn min_line_gap(sys: &SpinSystem) -> f64 {
    let mut gap = f64::INFINITY;
    for sp in sys.species() {
        let mut f: Vec<f64> = sys
            .enumerate_transitions()
            .iter()
            .filter(|t| sys.spin(t.spin).species == sp)
            .map(|t| t.frequency_hz)
            .collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in f.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    gap
}

/// Bit `i` of a basis index, qubit 0 being the most significant.
pub fn bit(index: usize, i: usize, n: usize) -> usize {
    (index >> (n - 1 - i)) & 1
}
