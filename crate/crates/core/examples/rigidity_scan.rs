//! How the effective rigidity `R_m = m * gap^2` falls off as the mass shrinks.

use anharmonic::params::OscillatorParams;
use anharmonic::spectral::{geometric_masses, rigidity_mass_scan, SpectralOptions};

fn main() -> anharmonic::error::Result<()> {
    let base = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 3, 1.0)?;
    let masses = geometric_masses(1e-3, 1.0, 13);
    let scan = rigidity_mass_scan(&base, &masses, &SpectralOptions::default())?;

    println!("{:>10} {:>12} {:>12} {:>4}", "m", "gap", "R_m", "n");
    for p in &scan.points {
        println!("{:>10.3e} {:>12.6} {:>12.4e} {:>4}", p.m, p.gap, p.rigidity, p.gap_index);
    }
    if let Some(slope) = scan.small_mass_slope {
        println!("log-log slope over the lightest decade: {slope:.3}");
    }
    Ok(())
}
