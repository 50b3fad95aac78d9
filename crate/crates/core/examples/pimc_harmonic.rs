//! Metropolis sampling of a single harmonic site; the estimated two-point
//! function should reproduce the exact lattice covariance.

use anharmonic::loops::{BoundaryCondition, GaussianLoopFactory, LatticeBox, LoopConfiguration};
use anharmonic::params::OscillatorParams;
use anharmonic::sampler::{metropolis_chain, ChainSettings, MatsubaraObserver, MatsubaraPoint, TestFunction};

fn main() -> anharmonic::error::Result<()> {
    let params = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2.0)?.harmonic();
    let slices = 16;
    let factory = GaussianLoopFactory::for_params(&params, slices)?;
    let start = LoopConfiguration::uniform(LatticeBox::new(vec![1])?, 0.0, slices, 2.0, BoundaryCondition::Free)?;
    let settings = ChainSettings { sweeps: 20_000, burn_in: 200, seed: 3, ..ChainSettings::default() };

    let mut observers: Vec<MatsubaraObserver> = [0, 4, 8]
        .iter()
        .map(|&k| {
            let at = |slice| MatsubaraPoint { site: 0, slice, function: TestFunction::Identity };
            MatsubaraObserver::new(vec![at(0), at(k)], &start)
        })
        .collect::<Result<_, _>>()?;
    let mut refs: Vec<&mut dyn anharmonic::sampler::Observer> =
        observers.iter_mut().map(|o| o as &mut dyn anharmonic::sampler::Observer).collect();
    let summary = metropolis_chain(start, &params, &factory, &settings, &mut refs)?;

    println!("acceptance {:?}", summary.acceptance);
    for (obs, k) in observers.iter().zip([0, 4, 8]) {
        let r = obs.report(&summary);
        println!("<x(0) x({k})> = {:.4} +- {:.4}, exact {:.4}", r.value, r.std_error, factory.covariance(0, k));
    }
    Ok(())
}
