//! Inverse problem: find effective couplings that induce a prescribed peak
//! order in every spin's sub-spectrum.
//!
//! The sign of each coupling is forced by the target (flipping neighbor `j`
//! from 0 to 1 moves the peak left iff `c_ij < 0`) and must agree between the
//! two spins sharing it. With signs fixed, every adjacent pair of peaks gives
//! one linear inequality in the coupling magnitudes; a small LP maximizes the
//! smallest adjacent gap.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::reference::ReferenceTable;
use crate::spin_system::SpinSystem;

/// Target peak order: `orders[spin][k]` is the neighbor configuration that
/// must carry peak index `k + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeakOrderTarget {
    n: usize,
    orders: Vec<Vec<u32>>,
}

impl PeakOrderTarget {
    pub fn new(orders: Vec<Vec<u32>>) -> Result<Self> {
        let n = orders.len();
        if n < 2 || n > crate::spin_system::MAX_SPINS {
            return Err(Error::SpinCount(n));
        }
        let half = 1usize << (n - 1);
        for (spin, order) in orders.iter().enumerate() {
            if order.len() != half {
                return Err(Error::Infeasible(format!(
                    "spin {spin} has {} peaks, expected {half}",
                    order.len()
                )));
            }
            let mut seen = vec![false; half];
            for &nb in order {
                let slot = seen.get_mut(nb as usize).ok_or_else(|| {
                    Error::Infeasible(format!(
                        "spin {spin}: neighbor configuration {nb} out of range"
                    ))
                })?;
                if *slot {
                    return Err(Error::Infeasible(format!(
                        "spin {spin}: configuration {nb:0width$b} assigned to two peaks",
                        width = n - 1
                    )));
                }
                *slot = true;
            }
        }
        Ok(PeakOrderTarget { n, orders })
    }

    /// Target order read from a signed pattern table.
    pub fn from_reference(table: &ReferenceTable) -> Result<Self> {
        let n = table.spin_names.len();
        if n < 2 {
            return Err(Error::SpinCount(n));
        }
        let half = 1usize << (n - 1);
        let mut orders: Vec<Vec<Option<u32>>> = vec![vec![None; half]; n];
        for row in &table.rows {
            if row.state.n() != n {
                return Err(Error::InvalidState(row.state.bits()));
            }
            for (spin, peak) in row.peaks.iter().enumerate() {
                let expected_sign = if row.state.bit(spin) == 0 { 1 } else { -1 };
                if peak.sign != expected_sign {
                    return Err(Error::Infeasible(format!(
                        "({}) {}: sign of {peak} contradicts the spin state",
                        row.numeral, row.state
                    )));
                }
                if peak.peak_index == 0 || peak.peak_index > half {
                    return Err(Error::Infeasible(format!(
                        "peak index out of range: {peak}"
                    )));
                }
                let nb = row.state.neighbors(spin);
                let slot = &mut orders[spin][peak.peak_index - 1];
                match slot {
                    Some(prev) if *prev != nb => {
                        return Err(Error::Infeasible(format!(
                            "two configurations given index {}{}",
                            peak.spin_name, peak.peak_index
                        )))
                    }
                    _ => *slot = Some(nb),
                }
            }
        }
        let orders = orders
            .into_iter()
            .enumerate()
            .map(|(spin, o)| {
                o.into_iter()
                    .enumerate()
                    .map(|(k, nb)| {
                        nb.ok_or_else(|| {
                            Error::Infeasible(format!("spin {spin} peak {} unassigned", k + 1))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(orders)
    }

    pub fn from_system(sys: &SpinSystem) -> Self {
        PeakOrderTarget {
            n: sys.n(),
            orders: (0..sys.n()).map(|s| sys.peak_table(s).to_vec()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self, spin: usize) -> &[u32] {
        &self.orders[spin]
    }

    /// Whether the system's peak tables equal this target for every spin.
    pub fn matches(&self, sys: &SpinSystem) -> bool {
        sys.n() == self.n && (0..self.n).all(|s| sys.peak_table(s) == self.orders[s].as_slice())
    }

    fn rank(&self, spin: usize) -> Vec<usize> {
        let mut r = vec![0; self.orders[spin].len()];
        for (k, &nb) in self.orders[spin].iter().enumerate() {
            r[nb as usize] = k;
        }
        r
    }
}

// position of spin `j` in the packed neighbor word of spin `i`, as a shift
fn neighbor_shift(n: usize, i: usize, j: usize) -> usize {
    let k = if j < i { j } else { j - 1 };
    n - 2 - k
}

/// Coupling signs forced by the target, as a full `N x N` matrix of +-1.
pub fn coupling_signs(target: &PeakOrderTarget) -> Result<Vec<Vec<i8>>> {
    let n = target.n;
    let half = 1u32 << (n - 1);
    let mut signs = vec![vec![0i8; n]; n];
    for i in 0..n {
        let rank = target.rank(i);
        for j in (0..n).filter(|&j| j != i) {
            let bit = 1u32 << neighbor_shift(n, i, j);
            let mut sign = 0i8;
            for nb in (0..half).filter(|nb| nb & bit == 0) {
                // a smaller rank is a higher frequency
                let s = if rank[(nb | bit) as usize] < rank[nb as usize] {
                    -1
                } else {
                    1
                };
                if sign == 0 {
                    sign = s;
                } else if sign != s {
                    return Err(Error::Infeasible(format!(
                        "spin {i}: neighbor {j} shifts peaks in both directions"
                    )));
                }
            }
            signs[i][j] = sign;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if signs[i][j] != signs[j][i] {
                return Err(Error::Infeasible(format!(
                    "coupling {i}-{j} needs opposite signs in the two sub-spectra"
                )));
            }
        }
    }
    Ok(signs)
}

/// Find a symmetric coupling matrix (Hz) whose induced peak tables equal
/// `target`, scaled so the smallest adjacent peak gap is `min_gap_hz`.
pub fn find_couplings(target: &PeakOrderTarget, min_gap_hz: f64) -> Result<Vec<Vec<f64>>> {
    if !(min_gap_hz > 0.0 && min_gap_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "min_gap_hz must be positive, got {min_gap_hz}"
        )));
    }
    let n = target.n;
    let signs = coupling_signs(target)?;

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut var = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = lp.add_var(0.0, (0.0, 1.0));
            var[i][j] = Some(v);
            var[j][i] = Some(v);
        }
    }
    let gap = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));

    for i in 0..n {
        let order = target.order(i);
        for w in order.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            let mut expr = Vec::with_capacity(n);
            for j in (0..n).filter(|&j| j != i) {
                let bit = 1u32 << neighbor_shift(n, i, j);
                // f(nb) = sum_j c_ij (1 - 2 b_j) / 2, so only differing bits count
                let term = |nb: u32| if nb & bit == 0 { 0.5 } else { -0.5 };
                let coeff = (term(hi) - term(lo)) * f64::from(signs[i][j]);
                if coeff != 0.0 {
                    expr.push((var[i][j].unwrap(), coeff));
                }
            }
            expr.push((gap, -1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, 0.0);
        }
    }

    let solution = lp
        .solve()
        .map_err(|e| Error::Infeasible(format!("ordering LP failed: {e}")))?;
    let best_gap = solution[gap];
    if best_gap <= 1e-9 {
        return Err(Error::Infeasible(
            "no coupling set separates every adjacent pair of peaks".into(),
        ));
    }
    let scale = min_gap_hz / best_gap;
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if let Some(v) = var[i][j] {
                let c = f64::from(signs[i][j]) * solution[v] * scale;
                // snap LP round-off so that rational vertices come out clean
                out[i][j] = (c * 1e6).round() / 1e6;
            }
        }
    }
    Ok(out)
}
