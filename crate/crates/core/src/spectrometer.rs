//! Small-angle detection, Lorentzian rendering and S/N measurement.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{apply_sequence, PulseSequence, SELECTIVE_PULSE_S};
use crate::spin_system::{PeakLabel, SpinSystem, Transition};
use crate::state::{make_pops, pi_pulse, relax, thermal_state, PopulationState};

/// Detection pulse of about pi/10 keeps the response linear.
pub const DEFAULT_TIP_ANGLE_RAD: f64 = PI / 10.0;
pub const DEFAULT_GRID_STEP_HZ: f64 = 0.5;
/// Width of the signal-free region used for S/N.
pub const NOISE_WINDOW_HZ: f64 = 1000.0;
/// Gap between the highest line of a species and its noise window.
pub const NOISE_GUARD_HZ: f64 = 500.0;
const EDGE_PAD_HZ: f64 = 100.0;

/// Per-experiment noise sigma that gives a no-gate POPS spectrum an S/N of
/// about 450 on the shipped system with default settings. Produced by
/// [`calibrate_noise_sigma`]; a test keeps the two in agreement.
pub const DEFAULT_NOISE_SIGMA: f64 = 1.54e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stick {
    pub freq_hz: f64,
    pub amplitude: f64,
    #[serde(skip)]
    pub spin: usize,
    #[serde(rename = "peak_label", serialize_with = "label_string")]
    pub label: PeakLabel,
}

fn label_string<S: serde::Serializer>(l: &PeakLabel, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(l)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StickSpectrum {
    pub species: String,
    pub sticks: Vec<Stick>,
}

impl StickSpectrum {
    pub fn is_empty(&self) -> bool {
        self.sticks.is_empty()
    }

    pub fn amplitude_of(&self, label: &PeakLabel) -> f64 {
        self.sticks
            .iter()
            .filter(|s| &s.label == label)
            .map(|s| s.amplitude)
            .sum()
    }

    /// Stick list as JSON: `[{"freq_hz":..,"amplitude":..,"peak_label":"A8"}, ..]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.sticks).expect("sticks serialize")
    }
}

/// Uniform frequency axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub start_hz: f64,
    pub step_hz: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start_hz: f64, step_hz: f64, count: usize) -> Result<Self> {
        if !(step_hz > 0.0 && step_hz.is_finite()) || count < 2 || !start_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid needs step > 0 and at least 2 points (step {step_hz}, count {count})"
            )));
        }
        Ok(Grid {
            start_hz,
            step_hz,
            count,
        })
    }

    pub fn freq(&self, k: usize) -> f64 {
        self.start_hz + self.step_hz * k as f64
    }

    pub fn end_hz(&self) -> f64 {
        self.freq(self.count - 1)
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.start_hz && f <= self.end_hz()
    }

    pub fn nearest_index(&self, f: f64) -> usize {
        let k = ((f - self.start_hz) / self.step_hz).round();
        k.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledSpectrum {
    pub species: String,
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Sigma of the added Gaussian noise per experiment; `None` when it does
    /// not apply (products).
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl SampledSpectrum {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn value_at(&self, f: f64) -> f64 {
        self.values[self.grid.nearest_index(f)]
    }

    /// `freq_hz,amplitude` rows with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 20);
        out.push_str("freq_hz,amplitude\n");
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.6},{:.6}", self.grid.freq(k), v).unwrap();
        }
        out
    }
}

/// Linear-response detection of `species`: one stick per transition with
/// amplitude `sin(tip) * (p_lower - p_upper)`. Zero-amplitude sticks are
/// dropped.
pub fn detect(
    state: &PopulationState,
    sys: &SpinSystem,
    species: &str,
    tip_angle_rad: f64,
) -> Result<StickSpectrum> {
    if !(tip_angle_rad > 0.0 && tip_angle_rad < PI / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "tip angle must lie in (0, pi/2), got {tip_angle_rad}"
        )));
    }
    if state.n() != sys.n() {
        return Err(Error::ForeignTransition(state.n()));
    }
    let spins = sys.spins_of_species(species)?;
    let tip = tip_angle_rad.sin();
    let floor = 1e-12 * state.max_abs();
    let mut sticks = Vec::new();
    for spin in spins {
        for &nb in sys.peak_table(spin) {
            let t = sys.transition(spin, nb);
            let diff = state.population(t.lower) - state.population(t.upper);
            if diff.abs() <= floor {
                continue;
            }
            sticks.push(Stick {
                freq_hz: t.frequency_hz,
                amplitude: tip * diff,
                spin,
                label: t.label,
            });
        }
    }
    Ok(StickSpectrum {
        species: species.to_string(),
        sticks,
    })
}

fn species_span(sys: &SpinSystem, species: &str) -> Result<(f64, f64)> {
    let spins = sys.spins_of_species(species)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for spin in spins {
        for &nb in sys.peak_table(spin) {
            let f = sys.transition_frequency(spin, nb);
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    Ok((lo, hi))
}

/// Signal-free noise window, above the highest line of the species.
pub fn default_noise_window(sys: &SpinSystem, species: &str) -> Result<(f64, f64)> {
    let (_, hi) = species_span(sys, species)?;
    Ok((hi + NOISE_GUARD_HZ, hi + NOISE_GUARD_HZ + NOISE_WINDOW_HZ))
}

/// Grid covering every line of the species plus the noise window.
pub fn default_grid(sys: &SpinSystem, species: &str) -> Result<Grid> {
    let (lo, _) = species_span(sys, species)?;
    let (_, window_hi) = default_noise_window(sys, species)?;
    let step = DEFAULT_GRID_STEP_HZ;
    let start = ((lo - EDGE_PAD_HZ) / step).floor() * step;
    let end = ((window_hi + EDGE_PAD_HZ) / step).ceil() * step;
    Grid::new(start, step, ((end - start) / step).round() as usize + 1)
}

fn noiseless(sticks: &StickSpectrum, sys: &SpinSystem, grid: &Grid) -> Result<Vec<f64>> {
    let mut values = vec![0.0; grid.count];
    for s in &sticks.sticks {
        if !grid.contains(s.freq_hz) {
            return Err(Error::GridTooNarrow { freq_hz: s.freq_hz });
        }
        let hw = sys.spin(s.spin).half_width_hz();
        for (k, v) in values.iter_mut().enumerate() {
            let x = (grid.freq(k) - s.freq_hz) / hw;
            *v += s.amplitude / (1.0 + x * x);
        }
    }
    Ok(values)
}

fn gaussian(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    Ok(if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("valid sigma"))
    } else {
        None
    })
}

/// Render sticks as peak-height-normalized Lorentzians (half width
/// `1/(2 pi T2*)` of the stick's spin) plus seeded Gaussian noise.
pub fn render(
    sticks: &StickSpectrum,
    sys: &SpinSystem,
    grid: &Grid,
    noise_sigma: f64,
    seed: u64,
) -> Result<SampledSpectrum> {
    let noise = gaussian(noise_sigma)?;
    let mut values = noiseless(sticks, sys, grid)?;
    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut values {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(SampledSpectrum {
        species: sticks.species.clone(),
        grid: *grid,
        values,
        noise_sigma: Some(noise_sigma),
        seed: Some(seed),
    })
}

/// `2.5 |H| / h`: largest absolute value over the spectrum against the
/// peak-to-peak noise inside `window`. Undefined for noiseless spectra.
pub fn snr(spec: &SampledSpectrum, window: (f64, f64)) -> Result<f64> {
    if spec.noise_sigma == Some(0.0) {
        return Err(Error::UndefinedSnr);
    }
    let (lo, hi) = window;
    let inside: Vec<f64> = (0..spec.grid.count)
        .filter(|&k| {
            let f = spec.grid.freq(k);
            f >= lo && f <= hi
        })
        .map(|k| spec.values[k])
        .collect();
    if inside.len() < 2 {
        return Err(Error::BadNoiseWindow(lo, hi));
    }
    let max = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let h = max - min;
    if h <= 0.0 {
        return Err(Error::UndefinedSnr);
    }
    Ok(2.5 * spec.max_abs() / h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub tip_angle_rad: f64,
    /// `None` selects [`default_grid`] for the species.
    pub grid: Option<Grid>,
    pub noise_sigma: f64,
    pub seed: u64,
    pub relax: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            tip_angle_rad: DEFAULT_TIP_ANGLE_RAD,
            grid: None,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            seed: 0,
            relax: true,
        }
    }
}

impl RenderOptions {
    pub fn noiseless() -> Self {
        RenderOptions {
            noise_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn grid_for(&self, sys: &SpinSystem, species: &str) -> Result<Grid> {
        match self.grid {
            Some(g) => Ok(g),
            None => default_grid(sys, species),
        }
    }
}

/// Population states after the two experiments of the POPS protocol:
/// I = selective pi pulse then gate, II = equal-length delay then gate.
pub fn two_experiments(
    sys: &SpinSystem,
    t: &Transition,
    gate: Option<&PulseSequence>,
    relax_on: bool,
) -> Result<(PopulationState, PopulationState)> {
    let thermal = thermal_state(sys);
    let mut exp1 = pi_pulse(&thermal, t)?;
    let mut exp2 = thermal;
    if relax_on {
        exp1 = relax(&exp1, SELECTIVE_PULSE_S, sys.t1_eff_s());
        exp2 = relax(&exp2, SELECTIVE_PULSE_S, sys.t1_eff_s());
    }
    if let Some(seq) = gate {
        exp1 = apply_sequence(sys, &exp1, seq, relax_on)?;
        exp2 = apply_sequence(sys, &exp2, seq, relax_on)?;
    }
    Ok((exp1, exp2))
}

/// Spectrum of experiment II minus experiment I, each with its own noise
/// draw (so the difference carries `sqrt(2)` times the per-experiment sigma).
///
/// Detection and rendering are linear, so the signal part is rendered once
/// from the population difference; with zero noise this is identical to the
/// direct path through [`make_pops`].
pub fn pops_spectrum_by_subtraction(
    sys: &SpinSystem,
    t: &Transition,
    gate: Option<&PulseSequence>,
    species: &str,
    opts: &RenderOptions,
) -> Result<SampledSpectrum> {
    let (exp1, exp2) = two_experiments(sys, t, gate, opts.relax)?;
    let grid = opts.grid_for(sys, species)?;
    let noise = gaussian(opts.noise_sigma)?;
    let sticks = detect(&(&exp2 - &exp1), sys, species, opts.tip_angle_rad)?;
    let mut values = noiseless(&sticks, sys, &grid)?;
    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let fid2: Vec<f64> = (0..grid.count).map(|_| noise.sample(&mut rng)).collect();
        for (v, n2) in values.iter_mut().zip(fid2) {
            let n1 = noise.sample(&mut rng);
            *v += n2 - n1;
        }
    }
    Ok(SampledSpectrum {
        species: species.to_string(),
        grid,
        values,
        noise_sigma: Some(opts.noise_sigma),
        seed: Some(opts.seed),
    })
}

/// Direct path: render the detected POPS after the gate.
pub fn pops_spectrum_direct(
    sys: &SpinSystem,
    t: &Transition,
    gate: Option<&PulseSequence>,
    species: &str,
    opts: &RenderOptions,
) -> Result<SampledSpectrum> {
    let mut state = make_pops(sys, t)?;
    if opts.relax {
        state = relax(&state, SELECTIVE_PULSE_S, sys.t1_eff_s());
    }
    if let Some(seq) = gate {
        state = apply_sequence(sys, &state, seq, opts.relax)?;
    }
    let sticks = detect(&state, sys, species, opts.tip_angle_rad)?;
    render(
        &sticks,
        sys,
        &opts.grid_for(sys, species)?,
        opts.noise_sigma,
        opts.seed,
    )
}

/// Mean S/N of the subtraction spectrum over `seeds`.
pub fn mean_pops_snr(
    sys: &SpinSystem,
    t: &Transition,
    gate: Option<&PulseSequence>,
    species: &str,
    opts: &RenderOptions,
    seeds: &[u64],
) -> Result<f64> {
    let window = default_noise_window(sys, species)?;
    let mut total = 0.0;
    for &seed in seeds {
        let o = RenderOptions {
            seed,
            ..opts.clone()
        };
        total += snr(
            &pops_spectrum_by_subtraction(sys, t, gate, species, &o)?,
            window,
        )?;
    }
    Ok(total / seeds.len() as f64)
}

/// Noise sigma for which the no-gate POPS spectrum of `t` reaches
/// `target_snr` on average over `seeds`. S/N scales as `1/sigma`, so two
/// fixed-point steps suffice.
pub fn calibrate_noise_sigma(
    sys: &SpinSystem,
    t: &Transition,
    species: &str,
    target_snr: f64,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() || !(target_snr > 0.0) {
        return Err(Error::InvalidParameter(
            "need seeds and a positive target".into(),
        ));
    }
    let mut sigma = 1e-3;
    for _ in 0..3 {
        let opts = RenderOptions {
            noise_sigma: sigma,
            ..RenderOptions::default()
        };
        let mean = mean_pops_snr(sys, t, None, species, &opts, seeds)?;
        sigma *= mean / target_snr;
    }
    Ok(sigma)
}
