//! Sign check of a three-point function under plus boundary conditions and
//! its exactly mirrored minus-boundary counterpart.

use anharmonic::loops::{default_clamp, BoundaryCondition, GaussianLoopFactory, LatticeBox, LoopConfiguration};
use anharmonic::params::OscillatorParams;
use anharmonic::sampler::{gks_audit, ChainSettings, MatsubaraPoint, TestFunction};

fn main() -> anharmonic::error::Result<()> {
    let params = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 2, 2.0)?;
    let slices = 12;
    let factory = GaussianLoopFactory::for_params(&params, slices)?;
    let clamp = default_clamp(&params)?;
    let boundary = BoundaryCondition::PlusClamped(clamp);
    let start = LoopConfiguration::uniform(LatticeBox::new(vec![3, 3])?, clamp, slices, params.beta, boundary)?;
    let f = TestFunction::default_clip(&params);
    let points = [
        MatsubaraPoint { site: 4, slice: 0, function: f.clone() },
        MatsubaraPoint { site: 1, slice: 3, function: f.clone() },
        MatsubaraPoint { site: 7, slice: 6, function: f },
    ];
    let settings = ChainSettings { sweeps: 5_000, burn_in: 200, seed: 17, ..ChainSettings::default() };
    let audit = gks_audit(&start, &params, &factory, &settings, points)?;

    println!("plus  {:+.4} +- {:.4}", audit.plus.value, audit.plus.std_error);
    println!("minus {:+.4} +- {:.4}", audit.minus.value, audit.minus.std_error);
    println!("signs as expected: {}, exact mirror: {}", audit.passed, audit.exact_mirror);
    Ok(())
}
