//! Deterministic reference values for the Monte Carlo estimators.
//!
//! A single free site with a handful of time slices is a low-dimensional
//! integral: the Gaussian reference density with covariance `S_beta` is
//! whitened by its Cholesky factor and the reweighted moments are summed on
//! a tensor trapezoid grid, which converges exponentially for this smooth,
//! rapidly decaying integrand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::propagator;
use crate::params::OscillatorParams;

/// Slice-averaged moments `<(1/P) sum_k x_k^2>` and `<(1/P) sum_k x_k^4>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleSiteMoments {
    pub second: f64,
    pub fourth: f64,
}

fn cholesky(c: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = c.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = c[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Definiteness { index: i, value: s });
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Moments of one free site under the path measure with `slices` slices,
/// from a trapezoid grid of spacing `step` on `[-extent, extent]^slices` in
/// whitened coordinates.
pub fn single_site_moments(params: &OscillatorParams, slices: usize, step: f64, extent: f64) -> Result<SingleSiteMoments> {
    params.validate()?;
    if !(1..=4).contains(&slices) {
        return Err(Error::Domain(format!("tensor quadrature supports 1 to 4 slices, got {slices}")));
    }
    let dt = params.beta / slices as f64;
    let c: Vec<Vec<f64>> = (0..slices)
        .map(|j| {
            (0..slices)
                .map(|k| propagator(params.beta, params.m, params.a, j as f64 * dt, k as f64 * dt))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let l = cholesky(&c)?;
    let n = (extent / step).round() as i64;
    let nodes: Vec<f64> = (-n..=n).map(|i| i as f64 * step).collect();
    let gauss: Vec<f64> = nodes.iter().map(|z| (-0.5 * z * z).exp()).collect();
    let total = nodes.len().pow(slices as u32);
    let (mut z0, mut s2, mut s4) = (0.0, 0.0, 0.0);
    let mut z = vec![0.0; slices];
    let mut x = vec![0.0; slices];
    for flat in 0..total {
        let mut rest = flat;
        let mut g = 1.0;
        for zi in z.iter_mut() {
            let i = rest % nodes.len();
            rest /= nodes.len();
            *zi = nodes[i];
            g *= gauss[i];
        }
        if g < 1e-300 {
            continue;
        }
        for (r, xr) in x.iter_mut().enumerate() {
            *xr = (0..=r).map(|k| l[r][k] * z[k]).sum();
        }
        let v: f64 = x.iter().map(|&q| params.anharmonic_potential(q)).sum();
        let w = g * (-dt * v).exp();
        z0 += w;
        s2 += w * x.iter().map(|q| q * q).sum::<f64>() / slices as f64;
        s4 += w * x.iter().map(|q| q.powi(4)).sum::<f64>() / slices as f64;
    }
    Ok(SingleSiteMoments {
        second: s2 / z0,
        fourth: s4 / z0,
    })
}
