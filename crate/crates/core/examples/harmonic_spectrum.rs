//! Lowest levels of the harmonic and double-well oscillators.
//!
//! ```text
//! cargo run --release --example harmonic_spectrum
//! ```

use anharmonic::params::OscillatorParams;
use anharmonic::spectral::{solve_spectrum, SpectralOptions};

fn main() -> anharmonic::error::Result<()> {
    let options = SpectralOptions { levels: 6, ..SpectralOptions::default() };

    let harmonic = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 3, 1.0)?.harmonic();
    let sol = solve_spectrum(&harmonic, &options)?;
    println!("harmonic, exact levels are n + 1/2");
    for (n, e) in sol.spectrum.eigenvalues.iter().enumerate() {
        println!("  E{n} = {e:.8}  error {:.1e}", e - (n as f64 + 0.5));
    }

    let well = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.0, 3, 1.0)?;
    let sol = solve_spectrum(&well, &options)?;
    println!("double well (b1 = 2, b2 = 0.25) on [-{:.1}, {:.1}]", sol.grid.half_width, sol.grid.half_width);
    for (n, e) in sol.spectrum.eigenvalues.iter().enumerate() {
        println!("  E{n} = {e:.8}");
    }
    println!(
        "  smallest gap {:.3e} between levels {} and {}, R_m = {:.3e}",
        sol.spectrum.gap,
        sol.spectrum.gap_index,
        sol.spectrum.gap_index + 1,
        sol.spectrum.rigidity
    );
    Ok(())
}
