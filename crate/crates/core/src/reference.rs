//! Reference spectral patterns of the 32 pseudopure states of the
//! five-qubit example molecule (spins A..E, qubit 1 = A).
//!
//! Used only to validate generated pattern tables; runtime patterns always
//! come from the coupling model.

use std::fmt;

use crate::error::{Error, Result};
use crate::spin_system::{BasisState, SpinSystem};

const TABLE_TEXT: &str = include_str!("../data/table1.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefPeak {
    pub spin_name: String,
    pub peak_index: usize,
    pub sign: i8,
}

impl fmt::Display for RefPeak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { '-' } else { '+' };
        write!(f, "{s}{}{}", self.spin_name, self.peak_index)
    }
}

#[derive(Clone, Debug)]
pub struct RefRow {
    /// Roman numeral used to name the state, e.g. `"vi"`.
    pub numeral: String,
    pub state: BasisState,
    pub peaks: Vec<RefPeak>,
}

#[derive(Clone, Debug)]
pub struct ReferenceTable {
    pub spin_names: Vec<String>,
    pub rows: Vec<RefRow>,
}

fn parse_peak(token: &str) -> Result<RefPeak> {
    let bad = || Error::InvalidLabel(token.to_string());
    let (sign, rest) = match token.as_bytes().first() {
        Some(b'+') => (1, &token[1..]),
        Some(b'-') => (-1, &token[1..]),
        _ => (1, token),
    };
    let split = rest.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
    let (name, idx) = rest.split_at(split);
    if name.is_empty() {
        return Err(bad());
    }
    Ok(RefPeak {
        spin_name: name.to_string(),
        peak_index: idx.parse().map_err(|_| bad())?,
        sign,
    })
}

impl ReferenceTable {
    /// The embedded five-qubit table.
    pub fn five_qubit() -> Self {
        Self::parse(TABLE_TEXT).expect("embedded table parses")
    }

    /// Parse lines of the form `vi 00101 +A8 +B8 -C13 +D11 -E13`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut spin_names: Option<Vec<String>> = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut tok = line.split_whitespace();
            let numeral = tok.next().unwrap().to_string();
            let bits = tok
                .next()
                .ok_or_else(|| Error::InvalidState(line.to_string()))?;
            let state = BasisState::from_bits(bits)?;
            let peaks = tok.map(parse_peak).collect::<Result<Vec<_>>>()?;
            let names: Vec<String> = peaks.iter().map(|p| p.spin_name.clone()).collect();
            match &spin_names {
                None => spin_names = Some(names),
                Some(prev) if *prev != names => {
                    return Err(Error::InvalidLabel(format!(
                        "inconsistent spin columns: {line}"
                    )))
                }
                _ => {}
            }
            rows.push(RefRow {
                numeral,
                state,
                peaks,
            });
        }
        Ok(ReferenceTable {
            spin_names: spin_names.unwrap_or_default(),
            rows,
        })
    }

    pub fn row(&self, state: BasisState) -> Option<&RefRow> {
        self.rows.iter().find(|r| r.state == state)
    }

    /// Look up a state by its roman numeral (`"vi"` or `"(vi)"`).
    pub fn state_by_numeral(&self, numeral: &str) -> Option<BasisState> {
        let key = numeral.trim_matches(|c| c == '(' || c == ')');
        self.rows.iter().find(|r| r.numeral == key).map(|r| r.state)
    }

    /// Whether the table describes a system with these spin names.
    pub fn applies_to(&self, sys: &SpinSystem) -> bool {
        self.spin_names.len() == sys.n()
            && self
                .spin_names
                .iter()
                .zip(sys.spins())
                .all(|(a, s)| *a == s.name)
    }

    /// Compare every signed entry against the patterns generated by `sys`.
    pub fn compare(&self, sys: &SpinSystem) -> Comparison {
        let mut mismatches = Vec::new();
        let mut total = 0;
        for row in &self.rows {
            let generated = sys.pattern_of(row.state);
            for (expected, got) in row.peaks.iter().zip(&generated) {
                total += 1;
                let got = RefPeak {
                    spin_name: got.label.spin_name.clone(),
                    peak_index: got.label.peak_index,
                    sign: got.sign,
                };
                if *expected != got {
                    mismatches.push(Mismatch {
                        numeral: row.numeral.clone(),
                        state: row.state,
                        expected: expected.clone(),
                        generated: got,
                    });
                }
            }
        }
        Comparison { total, mismatches }
    }
}

#[derive(Clone, Debug)]
pub struct Mismatch {
    pub numeral: String,
    pub state: BasisState,
    pub expected: RefPeak,
    pub generated: RefPeak,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub total: usize,
    pub mismatches: Vec<Mismatch>,
}

impl Comparison {
    pub fn matched(&self) -> usize {
        self.total - self.mismatches.len()
    }

    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.total > 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationStatus {
    Pass,
    Fail,
    /// The system has no embedded reference table.
    NoReference,
}

#[derive(Clone, Debug)]
pub struct Validation {
    pub status: ValidationStatus,
    pub comparison: Option<Comparison>,
}

impl Validation {
    pub fn to_json_value(&self) -> serde_json::Value {
        let status = match self.status {
            ValidationStatus::Pass => "pass",
            ValidationStatus::Fail => "fail",
            ValidationStatus::NoReference => "no_reference",
        };
        match &self.comparison {
            None => serde_json::json!({ "status": status }),
            Some(c) => serde_json::json!({
                "status": status,
                "matched": c.matched(),
                "total": c.total,
                "mismatches": c.mismatches.iter().map(|m| serde_json::json!({
                    "row": m.numeral,
                    "state": m.state.bits(),
                    "expected": m.expected.to_string(),
                    "generated": m.generated.to_string(),
                })).collect::<Vec<_>>(),
            }),
        }
    }
}

/// Compare the system's generated patterns against the embedded table, when
/// the system's spin names match it.
pub fn validate(sys: &SpinSystem) -> Validation {
    let table = ReferenceTable::five_qubit();
    if !table.applies_to(sys) {
        return Validation {
            status: ValidationStatus::NoReference,
            comparison: None,
        };
    }
    let c = table.compare(sys);
    Validation {
        status: if c.passed() {
            ValidationStatus::Pass
        } else {
            ValidationStatus::Fail
        },
        comparison: Some(c),
    }
}
