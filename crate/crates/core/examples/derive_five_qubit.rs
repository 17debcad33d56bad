//! Regenerates `data/fivequbit.json`: couplings are solved from the reference
//! pattern table, offsets and linewidths are fixed by hand.

use nmr_pops::couplings::{find_couplings, PeakOrderTarget};
use nmr_pops::reference::ReferenceTable;
use nmr_pops::{SpinDef, SpinSystem, SystemConfig};

fn main() -> nmr_pops::Result<()> {
    let table = ReferenceTable::five_qubit();
    let target = PeakOrderTarget::from_reference(&table)?;
    let couplings = find_couplings(&target, 20.0)?;
    let spins = vec![
        SpinDef::new("A", "1H", 800.0, 0.086),
        SpinDef::new("B", "1H", -800.0, 0.12),
        SpinDef::new("C", "19F", 1500.0, 0.145),
        SpinDef::new("D", "19F", 0.0, 0.11),
        SpinDef::new("E", "19F", -1500.0, 0.13),
    ];
    let sys = SpinSystem::new(spins, couplings, 0.65)?;
    let cmp = table.compare(&sys);
    assert!(cmp.passed(), "{} mismatches", cmp.mismatches.len());
    println!("{}", SystemConfig::from_system(&sys).to_json_pretty());
    Ok(())
}
