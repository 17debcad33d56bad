//! Prints the per-experiment noise sigma that gives the no-gate
//! [(vi) - (xxii)] fluorine spectrum a mean S/N of 450 over 64 seeds.

use nmr_pops::five_qubit_system;
use nmr_pops::spectrometer::calibrate_noise_sigma;

fn main() -> nmr_pops::Result<()> {
    let sys = five_qubit_system();
    let a8 = sys.transition_by_label("A8")?;
    let seeds: Vec<u64> = (0..64).collect();
    let sigma = calibrate_noise_sigma(&sys, &a8, "19F", 450.0, &seeds)?;
    println!("{sigma:.4e}");
    Ok(())
}
