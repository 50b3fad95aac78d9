use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{propagator_lag, TemperatureLoop};
use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// `P = max(16, ceil(8 beta sqrt(a/m)))`.
pub fn default_slices(params: &OscillatorParams) -> usize {
    16usize.max((8.0 * params.beta * params.harmonic_gap()).ceil() as usize)
}

/// Exact sampler for the harmonic reference measure restricted to `P`
/// equally spaced imaginary times.
///
/// The covariance `C_jk = S_beta(tau_j, tau_k)` is circulant, so it is
/// diagonalized by the real Fourier basis; sampling scales independent
/// normals by the square roots of its eigenvalues and transforms back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLoopFactory {
    beta: f64,
    m: f64,
    a: f64,
    slices: usize,
    first_row: Vec<f64>,
    /// Eigenvalue for Fourier frequency `k = 0..P`; `w_k = w_{P-k}`.
    spectral_weights: Vec<f64>,
    /// Orthonormal real Fourier basis, `basis[j * P + col]`.
    basis: Vec<f64>,
    /// `sqrt` of the eigenvalue attached to each basis column.
    column_scales: Vec<f64>,
    /// First row of the circulant inverse `C^{-1}`.
    precision_row: Vec<f64>,
}

impl GaussianLoopFactory {
    pub fn new(beta: f64, m: f64, a: f64, slices: usize) -> Result<Self> {
        if slices < 2 {
            return Err(Error::config("lattice.slices", format!("need at least 2 slices, got {slices}")));
        }
        for (key, v) in [("model.beta", beta), ("model.m", m), ("model.a", a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        let p = slices;
        let step = beta / p as f64;
        let first_row: Vec<f64> = (0..p)
            .map(|k| propagator_lag(beta, m, a, k as f64 * step))
            .collect();
        let angle = |j: usize, k: usize| 2.0 * PI * ((j * k) % p) as f64 / p as f64;
        let spectral_weights: Vec<f64> = (0..p)
            .map(|k| (0..p).map(|j| first_row[j] * angle(j, k).cos()).sum())
            .collect();
        let largest = spectral_weights.iter().copied().fold(0.0, f64::max);
        for (index, &value) in spectral_weights.iter().enumerate() {
            if !(value > 64.0 * f64::EPSILON * largest) {
                return Err(Error::Definiteness { index, value });
            }
        }

        // columns: constant, (cos k, sin k) for 1 <= k < P/2, alternating (P even)
        let mut frequencies = Vec::with_capacity(p);
        let mut kinds = Vec::with_capacity(p);
        frequencies.push(0);
        kinds.push(0u8);
        for k in 1..p.div_ceil(2) {
            frequencies.extend([k, k]);
            kinds.extend([1u8, 2u8]);
        }
        if p % 2 == 0 {
            frequencies.push(p / 2);
            kinds.push(3u8);
        }
        let norm0 = (1.0 / p as f64).sqrt();
        let norm = (2.0 / p as f64).sqrt();
        let mut basis = vec![0.0; p * p];
        for j in 0..p {
            for (col, (&k, &kind)) in frequencies.iter().zip(&kinds).enumerate() {
                basis[j * p + col] = match kind {
                    0 => norm0,
                    1 => norm * angle(j, k).cos(),
                    2 => norm * angle(j, k).sin(),
                    _ => norm0 * if j % 2 == 0 { 1.0 } else { -1.0 },
                };
            }
        }
        let column_scales = frequencies.iter().map(|&k| spectral_weights[k].sqrt()).collect();
        let precision_row = (0..p)
            .map(|j| {
                (0..p)
                    .map(|k| angle(j, k).cos() / spectral_weights[k])
                    .sum::<f64>()
                    / p as f64
            })
            .collect();
        Ok(GaussianLoopFactory {
            beta,
            m,
            a,
            slices,
            first_row,
            spectral_weights,
            basis,
            column_scales,
            precision_row,
        })
    }

    pub fn for_params(params: &OscillatorParams, slices: usize) -> Result<Self> {
        Self::new(params.beta, params.m, params.a, slices)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    pub fn rigidity(&self) -> f64 {
        self.a
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    /// `(S_beta(0, tau_k))_k`, the first row of the covariance.
    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn spectral_weights(&self) -> &[f64] {
        &self.spectral_weights
    }

    /// Covariance entry `C_jk`.
    pub fn covariance(&self, j: usize, k: usize) -> f64 {
        let p = self.slices;
        self.first_row[(j + p - k % p) % p]
    }

    /// Entry of `C^{-1}`.
    pub fn precision(&self, j: usize, k: usize) -> f64 {
        let p = self.slices;
        self.precision_row[(j + p - k % p) % p]
    }

    pub fn precision_diagonal(&self) -> f64 {
        self.precision_row[0]
    }

    /// `(C^{-1} x)_j`.
    pub fn precision_apply_at(&self, x: &[f64], j: usize) -> f64 {
        let p = self.slices;
        x.iter()
            .enumerate()
            .map(|(k, v)| self.precision_row[(j + p - k) % p] * v)
            .sum()
    }

    /// Gaussian energy `x^T C^{-1} x / 2`, evaluated in Fourier coordinates.
    pub fn gaussian_energy(&self, x: &[f64]) -> f64 {
        let p = self.slices;
        let mut energy = 0.0;
        for col in 0..p {
            let coeff: f64 = (0..p).map(|j| self.basis[j * p + col] * x[j]).sum();
            energy += coeff * coeff / (self.column_scales[col] * self.column_scales[col]);
        }
        0.5 * energy
    }

    /// Loop with covariance `C` built from `P` independent standard normals.
    /// Linear in `normals`, so negated inputs give the exactly negated loop.
    pub fn synthesize(&self, normals: &[f64]) -> Result<TemperatureLoop> {
        let p = self.slices;
        if normals.len() != p {
            return Err(Error::Domain(format!("expected {p} normal variates, got {}", normals.len())));
        }
        let scaled: Vec<f64> = normals.iter().zip(&self.column_scales).map(|(z, s)| z * s).collect();
        let values = (0..p)
            .map(|j| {
                let row = &self.basis[j * p..(j + 1) * p];
                row.iter().zip(&scaled).map(|(b, s)| b * s).sum()
            })
            .collect();
        TemperatureLoop::new(values, self.beta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TemperatureLoop {
        let normals: Vec<f64> = (0..self.slices).map(|_| rng.sample(StandardNormal)).collect();
        self.synthesize(&normals).expect("normal buffer has the slice count")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::propagator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_row_is_propagator() {
        let f = GaussianLoopFactory::new(2.0, 1.3, 0.7, 10).unwrap();
        for k in 0..10 {
            let tau = k as f64 * 0.2;
            assert!((f.first_row()[k] - propagator(2.0, 1.3, 0.7, 0.0, tau).unwrap()).abs() < 1e-15);
            assert_eq!(f.covariance((k + 3) % 10, 3), f.first_row()[k]);
        }
    }

    #[test]
    fn two_slice_weights() {
        let f = GaussianLoopFactory::new(1.0, 1.0, 1.0, 2).unwrap();
        let s00 = propagator(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let s0h = propagator(1.0, 1.0, 1.0, 0.0, 0.5).unwrap();
        let w = f.spectral_weights();
        assert!((w[0] - (s00 + s0h)).abs() < 1e-15);
        assert!((w[1] - (s00 - s0h)).abs() < 1e-15);
        assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn trace_identity_and_circulant_shift() {
        for p in [3, 8, 17, 32] {
            let f = GaussianLoopFactory::new(2.0, 1.0, 1.0, p).unwrap();
            let sum: f64 = f.spectral_weights().iter().sum();
            assert!((sum - p as f64 * f.first_row()[0]).abs() < 1e-12 * sum);
            for j in 0..p {
                for k in 0..p {
                    assert_eq!(f.covariance(j, k), f.covariance((j + 1) % p, (k + 1) % p));
                }
            }
        }
    }

    #[test]
    fn precision_inverts_covariance() {
        let p = 12;
        let f = GaussianLoopFactory::new(3.0, 0.8, 1.4, p).unwrap();
        for i in 0..p {
            for k in 0..p {
                let v: f64 = (0..p).map(|j| f.covariance(i, j) * f.precision(j, k)).sum();
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-10, "({i},{k}) {v}");
            }
        }
    }

    #[test]
    fn energy_routes_agree() {
        let p = 9;
        let f = GaussianLoopFactory::new(2.0, 1.0, 1.0, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = f.sample(&mut rng);
        let x = x.values();
        let direct: f64 = 0.5 * (0..p).map(|j| x[j] * f.precision_apply_at(x, j)).sum::<f64>();
        let fourier = f.gaussian_energy(x);
        assert!((direct - fourier).abs() < 1e-10 * direct.abs());
    }

    #[test]
    fn synthesis_is_odd() {
        let f = GaussianLoopFactory::new(2.0, 1.0, 1.0, 8).unwrap();
        let z: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert_eq!(f.synthesize(&z).unwrap().negated(), f.synthesize(&neg).unwrap());
        assert!(f.synthesize(&z[..3]).is_err());
    }

    #[test]
    fn default_slice_rule() {
        let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.1, 3, 4.0).unwrap();
        assert_eq!(default_slices(&p), 32);
        assert_eq!(default_slices(&p.with_beta(0.5)), 16);
    }

    #[test]
    fn rejects_single_slice() {
        assert!(GaussianLoopFactory::new(1.0, 1.0, 1.0, 1).is_err());
    }
}
