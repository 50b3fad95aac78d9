//! The lattice constant theta(d) for d = 3..8, by tensor quadrature where it
//! is affordable and by the Bessel integral otherwise.

use anharmonic::criteria::{theta_bessel_integral, theta_of_d, ThetaResolution};

fn main() -> anharmonic::error::Result<()> {
    let resolution = ThetaResolution::default();
    for d in 3..=8 {
        let disp = theta_of_d(d, &resolution)?;
        println!(
            "d = {d}: theta = {:.9} (+- {:.1e}, {:?}), Bessel {:.9}",
            disp.theta,
            disp.quadrature_error,
            disp.method,
            theta_bessel_integral(d, 0.5)
        );
    }
    Ok(())
}
