//! Order parameter at the centre of a 4^3 box under plus, free and minus
//! boundary conditions. The free box starts at zero and settles into one
//! well; it does not tunnel between wells within a run this short.

use anharmonic::loops::{default_clamp, default_slices, BoundaryCondition, GaussianLoopFactory, LatticeBox, LoopConfiguration};
use anharmonic::params::OscillatorParams;
use anharmonic::sampler::{metropolis_chain, ChainSettings, OrderParameterObserver};

fn main() -> anharmonic::error::Result<()> {
    let params = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 3, 4.0)?;
    let slices = default_slices(&params);
    let factory = GaussianLoopFactory::for_params(&params, slices)?;
    let volume = LatticeBox::cube(3, 4)?;
    let centre = volume.index(&[2, 2, 2]).unwrap();
    let clamp = default_clamp(&params)?;
    let settings = ChainSettings { sweeps: 2_000, burn_in: 200, seed: 9, ..ChainSettings::default() };

    for boundary in [
        BoundaryCondition::PlusClamped(clamp),
        BoundaryCondition::Free,
        BoundaryCondition::MinusClamped(clamp),
    ] {
        let start = LoopConfiguration::uniform(volume.clone(), boundary.exterior_value(), slices, params.beta, boundary)?;
        let mut observer = OrderParameterObserver::new(centre, &start)?;
        let summary = metropolis_chain(start, &params, &factory, &settings, &mut [&mut observer])?;
        let r = observer.report(&summary);
        println!("{:>5}: M = {:+.4} +- {:.4}", boundary.name(), r.value, r.std_error);
    }
    Ok(())
}
