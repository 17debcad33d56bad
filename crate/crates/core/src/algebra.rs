//! Spectral multiplication and pattern-based readout.
//!
//! Multiplying the spectra of two POPS that share a pseudopure state keeps
//! only the lines both factors have, which are exactly the lines of the shared
//! state. Taking the absolute value of one factor restores the signs of that
//! state. Only peak support and signs are meaningful in a product; the
//! amplitudes are distorted.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::spectrometer::{default_noise_window, SampledSpectrum, Stick, StickSpectrum};
use crate::spin_system::{BasisState, PeakLabel, SpinSystem, FREQ_TOLERANCE_HZ};

/// Pointwise `(|a| or a) * (|b| or b)`.
pub fn multiply(
    a: &SampledSpectrum,
    b: &SampledSpectrum,
    abs_a: bool,
    abs_b: bool,
) -> Result<SampledSpectrum> {
    if a.species != b.species {
        return Err(Error::SpeciesMismatch(a.species.clone(), b.species.clone()));
    }
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::GridMismatch);
    }
    let pick = |v: f64, abs: bool| if abs { v.abs() } else { v };
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| pick(x, abs_a) * pick(y, abs_b))
        .collect();
    let noiseless = a.noise_sigma == Some(0.0) && b.noise_sigma == Some(0.0);
    Ok(SampledSpectrum {
        species: a.species.clone(),
        grid: a.grid,
        values,
        noise_sigma: noiseless.then_some(0.0),
        seed: None,
    })
}

/// Stick product: a line survives only where both inputs have a line at the
/// same frequency.
pub fn multiply_sticks(
    a: &StickSpectrum,
    b: &StickSpectrum,
    abs_a: bool,
    abs_b: bool,
) -> Result<StickSpectrum> {
    if a.species != b.species {
        return Err(Error::SpeciesMismatch(a.species.clone(), b.species.clone()));
    }
    let pick = |v: f64, abs: bool| if abs { v.abs() } else { v };
    let sticks = a
        .sticks
        .iter()
        .filter_map(|sa| {
            b.sticks
                .iter()
                .find(|sb| (sa.freq_hz - sb.freq_hz).abs() <= FREQ_TOLERANCE_HZ)
                .map(|sb| Stick {
                    amplitude: pick(sa.amplitude, abs_a) * pick(sb.amplitude, abs_b),
                    ..sa.clone()
                })
        })
        .collect();
    Ok(StickSpectrum {
        species: a.species.clone(),
        sticks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SingleState,
    PopsPair,
    Combination,
    NoMatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub state: BasisState,
    pub weight: f64,
}

impl Member {
    pub fn sign(&self) -> i8 {
        if self.weight < 0.0 {
            -1
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub members: Vec<Member>,
    /// Fraction of the observed peak magnitude the members do not explain.
    pub residual: f64,
}

impl Classification {
    fn no_match(residual: f64) -> Self {
        Classification {
            verdict: Verdict::NoMatch,
            members: Vec::new(),
            residual,
        }
    }

    /// `{"verdict":..,"members":[{"state":"00101","sign":1,"weight":..}],"residual":..}`
    pub fn to_json_value(&self) -> serde_json::Value {
        json!({
            "verdict": self.verdict,
            "members": self.members.iter().map(|m| json!({
                "state": m.state.bits(),
                "sign": m.sign(),
                "weight": m.weight,
            })).collect::<Vec<_>>(),
            "residual": self.residual,
        })
    }

    pub fn signed_states(&self) -> Vec<(String, i8)> {
        self.members
            .iter()
            .map(|m| (m.state.bits(), m.sign()))
            .collect()
    }
}

/// Peaks assigned to transitions, keyed by `(spin, peak_index)`.
#[derive(Clone, Debug, Default)]
pub struct Observation {
    pub spins: Vec<usize>,
    pub peaks: BTreeMap<(usize, usize), f64>,
    /// Magnitude of picked peaks that match no transition.
    pub unassigned: f64,
}

impl Observation {
    pub fn from_sticks(sys: &SpinSystem, spectra: &[StickSpectrum]) -> Result<Self> {
        let mut obs = Observation::default();
        for sp in spectra {
            obs.add_species(sys, &sp.species)?;
            for s in &sp.sticks {
                *obs.peaks.entry((s.spin, s.label.peak_index)).or_insert(0.0) += s.amplitude;
            }
        }
        obs.peaks.retain(|_, a| *a != 0.0);
        Ok(obs)
    }

    fn add_species(&mut self, sys: &SpinSystem, species: &str) -> Result<()> {
        for spin in sys.spins_of_species(species)? {
            if !self.spins.contains(&spin) {
                self.spins.push(spin);
            }
        }
        self.spins.sort_unstable();
        Ok(())
    }

    fn total(&self) -> f64 {
        self.peaks.values().map(|a| a.abs()).sum::<f64>() + self.unassigned
    }
}

type Pattern = Vec<((usize, usize), f64)>;

fn pattern(sys: &SpinSystem, spins: &[usize], s: BasisState) -> Pattern {
    spins
        .iter()
        .map(|&spin| {
            let sign = if s.bit(spin) == 0 { 1.0 } else { -1.0 };
            ((spin, sys.peak_index(spin, s.neighbors(spin))), sign)
        })
        .collect()
}

fn predicted(patterns: &[(&Pattern, f64)]) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for (p, w) in patterns {
        for (key, sign) in p.iter() {
            *out.entry(*key).or_insert(0.0) += w * sign;
        }
    }
    out.retain(|_, v| v.abs() > 1e-12);
    out
}

fn same_signed_support(obs: &Observation, pred: &BTreeMap<(usize, usize), f64>) -> bool {
    obs.unassigned == 0.0
        && obs.peaks.len() == pred.len()
        && obs
            .peaks
            .iter()
            .all(|(k, a)| pred.get(k).is_some_and(|p| p.signum() == a.signum()))
}

// least-squares amplitude of `obs` along one pattern
fn projection(obs: &BTreeMap<(usize, usize), f64>, p: &Pattern) -> f64 {
    let dot: f64 = p
        .iter()
        .map(|(k, s)| obs.get(k).copied().unwrap_or(0.0) * s)
        .sum();
    dot / p.len() as f64
}

/// Explain an observation as the sparsest signed combination of pseudopure
/// patterns: one state, then one positive and one negative state, then a
/// greedy pursuit over all states.
pub fn classify_observation(sys: &SpinSystem, obs: &Observation) -> Classification {
    let total = obs.total();
    if total == 0.0 || obs.spins.is_empty() {
        return Classification::no_match(0.0);
    }
    let patterns: Vec<Pattern> = sys.states().map(|s| pattern(sys, &obs.spins, s)).collect();
    let member = |i: usize, w: f64| Member {
        state: sys.state(i),
        weight: w,
    };

    // states whose every line is present (with either sign) are the only
    // possible members of a single or pair explanation
    let candidates: Vec<usize> = (0..patterns.len())
        .filter(|&i| patterns[i].iter().all(|(k, _)| obs.peaks.contains_key(k)))
        .collect();

    for &i in &candidates {
        for sign in [1.0, -1.0] {
            if same_signed_support(obs, &predicted(&[(&patterns[i], sign)])) {
                return Classification {
                    verdict: Verdict::SingleState,
                    members: vec![member(i, projection(&obs.peaks, &patterns[i]))],
                    residual: 0.0,
                };
            }
        }
    }
    for &i in &candidates {
        for &j in &candidates {
            if i == j {
                continue;
            }
            let pred = predicted(&[(&patterns[i], 1.0), (&patterns[j], -1.0)]);
            if same_signed_support(obs, &pred) {
                return Classification {
                    verdict: Verdict::PopsPair,
                    members: vec![
                        member(i, projection(&obs.peaks, &patterns[i]).abs()),
                        member(j, -projection(&obs.peaks, &patterns[j]).abs()),
                    ],
                    residual: 0.0,
                };
            }
        }
    }

    // greedy pursuit on the amplitude vector
    let mut residual = obs.peaks.clone();
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    let norm = |r: &BTreeMap<(usize, usize), f64>| r.values().map(|v| v.abs()).sum::<f64>();
    let mut current = norm(&residual);
    for _ in 0..patterns.len() {
        let best = (0..patterns.len())
            .map(|i| (i, projection(&residual, &patterns[i])))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap());
        let Some((i, w)) = best else { break };
        if w.abs() <= 1e-12 * total {
            break;
        }
        let mut next = residual.clone();
        for (k, s) in &patterns[i] {
            *next.entry(*k).or_insert(0.0) -= w * s;
        }
        let after = norm(&next);
        if after >= current - 1e-12 * total {
            break;
        }
        residual = next;
        current = after;
        *weights.entry(i).or_insert(0.0) += w;
    }
    weights.retain(|_, w| w.abs() > 1e-12 * total);
    let frac = ((current + obs.unassigned) / total).clamp(0.0, 1.0);
    if weights.is_empty() || frac >= 1.0 {
        return Classification::no_match(frac.min(1.0));
    }
    Classification {
        verdict: Verdict::Combination,
        members: weights.into_iter().map(|(i, w)| member(i, w)).collect(),
        residual: frac,
    }
}

/// Classify noiseless stick spectra (one per species).
pub fn classify_sticks(sys: &SpinSystem, spectra: &[StickSpectrum]) -> Result<Classification> {
    Ok(classify_observation(
        sys,
        &Observation::from_sticks(sys, spectra)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakPicking {
    /// Peaks must exceed `threshold` times the robust noise scale.
    pub threshold: f64,
    /// and `relative_floor` times the largest absolute value.
    pub relative_floor: f64,
    /// Largest distance from a picked peak to its transition.
    pub match_tolerance_hz: f64,
    /// `None` uses the species' default noise window.
    pub noise_window: Option<(f64, f64)>,
}

impl Default for PeakPicking {
    fn default() -> Self {
        PeakPicking {
            threshold: 5.0,
            relative_floor: 0.05,
            match_tolerance_hz: 2.0,
            noise_window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PickedPeak {
    pub freq_hz: f64,
    pub value: f64,
    pub spin: Option<usize>,
    pub label: Option<PeakLabel>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust noise scale (1.4826 x MAD) inside a frequency window.
pub fn noise_scale(spec: &SampledSpectrum, window: (f64, f64)) -> f64 {
    let vals: Vec<f64> = (0..spec.grid.count)
        .filter(|&k| {
            let f = spec.grid.freq(k);
            f >= window.0 && f <= window.1
        })
        .map(|k| spec.values[k])
        .collect();
    let m = median(vals.clone());
    1.4826 * median(vals.into_iter().map(|v| (v - m).abs()).collect())
}

/// Local maxima of `|value|` above the thresholds, each assigned to the
/// nearest transition of the species within the match tolerance.
pub fn pick_peaks(
    sys: &SpinSystem,
    spec: &SampledSpectrum,
    opts: &PeakPicking,
) -> Result<Vec<PickedPeak>> {
    if !(opts.threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "peak-picking threshold must be positive, got {}",
            opts.threshold
        )));
    }
    let window = match opts.noise_window {
        Some(w) => w,
        None => default_noise_window(sys, &spec.species)?,
    };
    let floor =
        (opts.threshold * noise_scale(spec, window)).max(opts.relative_floor * spec.max_abs());
    let lines: Vec<(usize, u32, f64)> = sys
        .spins_of_species(&spec.species)?
        .into_iter()
        .flat_map(|spin| {
            sys.peak_table(spin)
                .iter()
                .map(move |&nb| (spin, nb, sys.transition_frequency(spin, nb)))
        })
        .collect();

    let v = &spec.values;
    let mut picked: Vec<PickedPeak> = Vec::new();
    for k in 1..v.len().saturating_sub(1) {
        let a = v[k].abs();
        if a <= floor || a < v[k - 1].abs() || a <= v[k + 1].abs() {
            continue;
        }
        let f = spec.grid.freq(k);
        let nearest = lines
            .iter()
            .map(|&(spin, nb, lf)| (spin, nb, (lf - f).abs()))
            .min_by(|x, y| x.2.partial_cmp(&y.2).unwrap())
            .filter(|x| x.2 <= opts.match_tolerance_hz);
        let (spin, label) = match nearest {
            Some((spin, nb, _)) => (Some(spin), Some(sys.label(spin, nb))),
            None => (None, None),
        };
        // keep only the strongest pick per transition
        if let Some(l) = &label {
            if let Some(prev) = picked.iter_mut().find(|p| p.label.as_ref() == Some(l)) {
                if a > prev.value.abs() {
                    prev.freq_hz = f;
                    prev.value = v[k];
                }
                continue;
            }
        }
        picked.push(PickedPeak {
            freq_hz: f,
            value: v[k],
            spin,
            label,
        });
    }
    Ok(picked)
}

/// Classify sampled spectra (one per species) by peak picking.
pub fn classify_sampled(
    sys: &SpinSystem,
    spectra: &[SampledSpectrum],
    opts: &PeakPicking,
) -> Result<Classification> {
    let mut obs = Observation::default();
    for sp in spectra {
        obs.add_species(sys, &sp.species)?;
        for p in pick_peaks(sys, sp, opts)? {
            match (p.spin, p.label) {
                (Some(spin), Some(l)) => {
                    *obs.peaks.entry((spin, l.peak_index)).or_insert(0.0) += p.value
                }
                _ => obs.unassigned += p.value.abs(),
            }
        }
    }
    Ok(classify_observation(sys, &obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::five_qubit_system;
    use crate::spectrometer::{
        detect, pops_spectrum_by_subtraction, RenderOptions, DEFAULT_TIP_ANGLE_RAD,
    };
    use crate::state::{make_pops, pseudopure, PopulationState};

    fn bits(s: &str) -> BasisState {
        BasisState::from_bits(s).unwrap()
    }

    fn pops_sticks(sys: &SpinSystem, label: &str, species: &str) -> StickSpectrum {
        let p = make_pops(sys, &sys.transition_by_label(label).unwrap()).unwrap();
        detect(&p, sys, species, DEFAULT_TIP_ANGLE_RAD).unwrap()
    }

    #[test]
    fn stick_product_keeps_the_common_state() {
        let sys = five_qubit_system();
        for sp in ["1H", "19F"] {
            let a = pops_sticks(&sys, "B8", sp);
            let b = pops_sticks(&sys, "A8", sp);
            let prod = multiply_sticks(&a, &b, true, false).unwrap();
            let got: Vec<String> = prod
                .sticks
                .iter()
                .map(|s| format!("{}{}", if s.amplitude < 0.0 { '-' } else { '+' }, s.label))
                .collect();
            let want: Vec<String> = sys
                .pattern_of(bits("00101"))
                .into_iter()
                .filter(|p| sys.spin(p.spin).species == sp)
                .map(|p| p.to_string())
                .collect();
            assert_eq!(got, want);
            let plain = multiply_sticks(&a, &b, false, false).unwrap();
            assert!(plain.sticks.iter().all(|s| s.amplitude > 0.0));
            assert_eq!(plain.sticks.len(), prod.sticks.len());
        }
    }

    #[test]
    fn sampled_product_matches_pattern() {
        let sys = five_qubit_system();
        let opts = RenderOptions {
            seed: 3,
            ..RenderOptions::default()
        };
        let a = pops_spectrum_by_subtraction(
            &sys,
            &sys.transition_by_label("B8").unwrap(),
            None,
            "19F",
            &opts,
        )
        .unwrap();
        let opts = RenderOptions { seed: 4, ..opts };
        let b = pops_spectrum_by_subtraction(
            &sys,
            &sys.transition_by_label("A8").unwrap(),
            None,
            "19F",
            &opts,
        )
        .unwrap();
        let e = multiply(&a, &b, true, false).unwrap();
        assert_eq!(e.noise_sigma, None);
        let c = classify_sampled(&sys, &[e.clone()], &PeakPicking::default()).unwrap();
        assert_eq!(c.verdict, Verdict::SingleState);
        assert_eq!(c.signed_states(), [("00101".to_string(), 1)]);
        let d = multiply(&a, &b, false, false).unwrap();
        let peaks = pick_peaks(&sys, &d, &PeakPicking::default()).unwrap();
        assert_eq!(peaks.len(), 3);
        assert!(peaks.iter().all(|p| p.value > 0.0));
        let both = multiply(&a, &b, true, true).unwrap();
        assert!(both.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn multiply_errors_and_zero() {
        let sys = five_qubit_system();
        let t = sys.transition_by_label("B8").unwrap();
        let a =
            pops_spectrum_by_subtraction(&sys, &t, None, "19F", &RenderOptions::default()).unwrap();
        let h =
            pops_spectrum_by_subtraction(&sys, &t, None, "1H", &RenderOptions::default()).unwrap();
        assert!(matches!(
            multiply(&a, &h, false, false),
            Err(Error::SpeciesMismatch(..))
        ));
        let mut shifted = a.clone();
        shifted.grid.start_hz += 0.5;
        assert!(matches!(
            multiply(&a, &shifted, false, false),
            Err(Error::GridMismatch)
        ));
        let mut zero = a.clone();
        zero.values.iter_mut().for_each(|v| *v = 0.0);
        assert!(multiply(&a, &zero, true, false)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn classify_single_and_pair() {
        let sys = five_qubit_system();
        let p = pseudopure(&sys, bits("00101"), 1.0).unwrap();
        let spectra: Vec<StickSpectrum> = ["1H", "19F"]
            .iter()
            .map(|sp| detect(&p, &sys, sp, 0.3).unwrap())
            .collect();
        let c = classify_sticks(&sys, &spectra).unwrap();
        assert_eq!(c.verdict, Verdict::SingleState);
        assert_eq!(c.residual, 0.0);
        assert_eq!(c.signed_states(), [("00101".to_string(), 1)]);

        let spectra = vec![
            pops_sticks(&sys, "B8", "1H"),
            pops_sticks(&sys, "B8", "19F"),
        ];
        let c = classify_sticks(&sys, &spectra).unwrap();
        assert_eq!(c.verdict, Verdict::PopsPair);
        assert_eq!(
            c.signed_states(),
            [("00101".to_string(), 1), ("01101".to_string(), -1)]
        );
    }

    #[test]
    fn classify_zero_and_combination() {
        let sys = five_qubit_system();
        let z = PopulationState::zero(5);
        let sticks = detect(&z, &sys, "19F", 0.3).unwrap();
        let c = classify_sticks(&sys, &[sticks]).unwrap();
        assert_eq!(c.verdict, Verdict::NoMatch);

        // three states with different weights
        let s1 = pseudopure(&sys, bits("00000"), 1.0).unwrap();
        let s2 = pseudopure(&sys, bits("10110"), 2.0).unwrap();
        let s3 = pseudopure(&sys, bits("01011"), 3.0).unwrap();
        let mix = &(&s1 + &s2) + &s3;
        let spectra: Vec<StickSpectrum> = ["1H", "19F"]
            .iter()
            .map(|sp| detect(&mix, &sys, sp, 0.3).unwrap())
            .collect();
        let c = classify_sticks(&sys, &spectra).unwrap();
        assert_eq!(c.verdict, Verdict::Combination);
        assert!(c.residual < 1e-9, "{c:?}");
        let states: Vec<String> = c.members.iter().map(|m| m.state.bits()).collect();
        assert_eq!(states, ["00000", "01011", "10110"]);
    }

    #[test]
    fn threshold_must_be_positive() {
        let sys = five_qubit_system();
        let t = sys.transition_by_label("B8").unwrap();
        let a =
            pops_spectrum_by_subtraction(&sys, &t, None, "19F", &RenderOptions::default()).unwrap();
        let opts = PeakPicking {
            threshold: 0.0,
            ..PeakPicking::default()
        };
        assert!(classify_sampled(&sys, &[a], &opts).is_err());
    }

    #[test]
    fn json_report_shape() {
        let c = Classification {
            verdict: Verdict::PopsPair,
            members: vec![
                Member {
                    state: bits("00101"),
                    weight: 0.3,
                },
                Member {
                    state: bits("01101"),
                    weight: -0.3,
                },
            ],
            residual: 0.0,
        };
        let v = c.to_json_value();
        assert_eq!(v["verdict"], "pops_pair");
        assert_eq!(v["members"][1]["state"], "01101");
        assert_eq!(v["members"][1]["sign"], -1);
    }
}
