//! Exact draws from the harmonic reference measure on temperature loops,
//! compared with the propagator.

use anharmonic::loops::{propagator, GaussianLoopFactory};
use anharmonic::stats::mean_and_error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anharmonic::error::Result<()> {
    let (beta, m, a, slices) = (2.0, 1.0, 1.0, 32);
    let factory = GaussianLoopFactory::new(beta, m, a, slices)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<Vec<f64>> = (0..20_000).map(|_| factory.sample(&mut rng).values().to_vec()).collect();

    let step = beta / slices as f64;
    println!("{:>4} {:>10} {:>10} {:>16}", "lag", "lattice", "continuum", "sampled");
    for lag in [0, 2, 8, 16] {
        let products: Vec<f64> = draws.iter().map(|x| x[0] * x[lag]).collect();
        let (mean, se) = mean_and_error(&products);
        println!(
            "{lag:>4} {:>10.5} {:>10.5} {mean:>9.5} +- {se:.4}",
            factory.covariance(0, lag),
            propagator(beta, m, a, 0.0, lag as f64 * step)?
        );
    }
    Ok(())
}
