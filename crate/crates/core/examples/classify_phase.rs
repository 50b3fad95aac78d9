//! Classifies a few parameter sets: stabilized at all temperatures, a phase
//! transition above some beta*, or neither criterion applies.

use anharmonic::criteria::{classify_phase, PhaseVerdict, ThetaResolution};
use anharmonic::params::OscillatorParams;
use anharmonic::spectral::SpectralOptions;

fn main() -> anharmonic::error::Result<()> {
    let cases = [
        ("light, weakly coupled", OscillatorParams::new(0.5, 1.0, 1.0, 1.0, 0.01, 3, 1.0)?),
        ("heavy, deep wells", OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 3, 1.0)?),
        ("strong coupling, shallow wells", OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 2.0, 3, 1.0)?),
    ];
    for (label, params) in cases {
        let c = classify_phase(&params, &SpectralOptions::default(), &ThetaResolution::default())?;
        let v = c.values;
        print!("{label}: J_hat = {:.3}, R_m = {:.3e}, 4 m ups^2 J_hat = {:.3}", v.j_hat, v.rigidity, v.transition_strength);
        match c.verdict {
            PhaseVerdict::StabilizedAllBeta => println!(" -> unique Gibbs state for every beta"),
            PhaseVerdict::TransitionRegime { beta_star } => println!(" -> several phases for beta > {beta_star:.4}"),
            PhaseVerdict::Undetermined => println!(" -> undetermined"),
        }
    }
    Ok(())
}
