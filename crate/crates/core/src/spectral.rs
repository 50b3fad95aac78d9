//! Finite-difference diagonalization of the single-site Hamiltonian
//! `p^2/2m + (a/2) q^2 + V(q)`, yielding its lowest levels, the minimal
//! gap and the effective rigidity `m * gap^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{GridSpec, OscillatorParams};
use crate::tridiag::SymTridiagonal;

/// Relative threshold below which two computed levels count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
/// Maximal eigenvector weight tolerated in the outer 5% of the grid.
pub const TAIL_MASS_FLOOR: f64 = 1e-8;
const TAIL_FRACTION: f64 = 0.05;
const MAX_WIDENINGS: usize = 3;

/// Lowest levels of the single-site Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Minimal consecutive spacing over the computed levels.
    pub gap: f64,
    /// Index `n` at which `E_{n+1} - E_n` is minimal.
    pub gap_index: usize,
    /// `m * gap^2`.
    pub rigidity: f64,
}

impl Spectrum {
    /// Certifies strict increase and derives the gap and rigidity.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, mass: f64) -> Result<Self> {
        if eigenvalues.len() < 2 {
            return Err(Error::Domain(format!(
                "need at least two levels for a gap, got {}",
                eigenvalues.len()
            )));
        }
        let top = eigenvalues.last().copied().unwrap_or(0.0);
        let tolerance = DEGENERACY_TOLERANCE * top.abs().max(1.0);
        let mut gap = f64::INFINITY;
        let mut gap_index = 0;
        for (n, pair) in eigenvalues.windows(2).enumerate() {
            let diff = pair[1] - pair[0];
            if !(diff > tolerance) {
                return Err(Error::Degeneracy {
                    index: n,
                    next: n + 1,
                    gap: diff,
                    tolerance,
                });
            }
            if diff < gap {
                gap = diff;
                gap_index = n;
            }
        }
        Ok(Spectrum {
            eigenvalues,
            gap,
            gap_index,
            rigidity: mass * gap * gap,
        })
    }

    pub fn levels(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Second-order central-difference discretization on `grid`:
/// diagonal `1/(m h^2) + U(q_i)`, off-diagonal `-1/(2 m h^2)`.
pub fn discretize_hamiltonian(params: &OscillatorParams, grid: &GridSpec) -> Result<SymTridiagonal> {
    grid.validate()?;
    let h = grid.spacing();
    let kinetic = 1.0 / (params.m * h * h);
    let diagonal = (0..grid.points)
        .map(|i| kinetic + params.potential(grid.node(i)))
        .collect();
    let off_diagonal = vec![-0.5 * kinetic; grid.points - 1];
    SymTridiagonal::new(diagonal, off_diagonal)
}

/// The `levels` lowest eigenvalues of `matrix`, certified nondegenerate.
pub fn compute_spectrum(matrix: &SymTridiagonal, levels: usize, mass: f64) -> Result<Spectrum> {
    if levels < 2 {
        return Err(Error::config("grid.levels", "need at least 2 levels"));
    }
    if levels > matrix.dim() {
        return Err(Error::config(
            "grid.levels",
            format!("{levels} levels requested from a {}-point grid", matrix.dim()),
        ));
    }
    Spectrum::from_eigenvalues(matrix.lowest_eigenvalues(levels)?, mass)
}

/// Controls for [`solve_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub levels: usize,
    pub points: usize,
    /// `None` selects the half-width automatically.
    pub half_width: Option<f64>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            levels: 8,
            points: 4000,
            half_width: None,
        }
    }
}

/// A spectrum together with the grid that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSolution {
    pub spectrum: Spectrum,
    pub grid: GridSpec,
    /// Weight of the highest computed eigenvector in the outer grid band.
    pub tail_mass: f64,
    pub widenings: usize,
}

/// `max(10 (m a)^{-1/4}, 3 (E_K/b2)^{1/4})` with `E_K` from the harmonic ladder.
pub fn default_half_width(params: &OscillatorParams, levels: usize) -> f64 {
    let oscillator_length = 10.0 * (params.m * params.a).powf(-0.25);
    if params.is_harmonic() {
        return oscillator_length;
    }
    let ladder = (levels as f64 + 0.5) * params.harmonic_gap();
    oscillator_length.max(3.0 * (ladder / params.b2).powf(0.25))
}

/// Fraction of `vector`'s squared norm on the outer `TAIL_FRACTION` of the grid.
pub fn tail_mass(vector: &[f64]) -> f64 {
    let n = vector.len();
    let band = ((n as f64 * TAIL_FRACTION).ceil() as usize).max(1);
    let total: f64 = vector.iter().map(|v| v * v).sum();
    let outer: f64 = vector[..band]
        .iter()
        .chain(&vector[n.saturating_sub(band)..])
        .map(|v| v * v)
        .sum();
    outer / total
}

/// Discretizes, diagonalizes and validates the truncation. The half-width
/// is doubled (at most three times) while the highest requested
/// eigenvector leaks into the outer band.
pub fn solve_spectrum(params: &OscillatorParams, options: &SpectralOptions) -> Result<SpectrumSolution> {
    params.validate()?;
    let mut half_width = options
        .half_width
        .unwrap_or_else(|| default_half_width(params, options.levels));
    for widenings in 0..=MAX_WIDENINGS {
        let grid = GridSpec::new(half_width, options.points)?;
        let matrix = discretize_hamiltonian(params, &grid)?;
        let spectrum = compute_spectrum(&matrix, options.levels, params.m)?;
        let top = *spectrum.eigenvalues.last().unwrap();
        let mass = tail_mass(&matrix.eigenvector(top));
        if mass < TAIL_MASS_FLOOR {
            return Ok(SpectrumSolution {
                spectrum,
                grid,
                tail_mass: mass,
                widenings,
            });
        }
        half_width *= 2.0;
    }
    Err(Error::Convergence(format!(
        "eigenvector {} still leaks past the grid edge after {MAX_WIDENINGS} widenings",
        options.levels - 1
    )))
}

/// One point of a mass scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub m: f64,
    pub gap: f64,
    pub rigidity: f64,
    pub gap_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassScan {
    pub points: Vec<ScanPoint>,
    /// Least-squares slope of `ln R_m` against `ln m` over the smallest
    /// decade of masses; `None` with fewer than two points there.
    pub small_mass_slope: Option<f64>,
}

/// Effective rigidity across `masses` with all other constants fixed.
/// Points are evaluated in parallel; output order follows input order.
pub fn rigidity_mass_scan(
    base: &OscillatorParams,
    masses: &[f64],
    options: &SpectralOptions,
) -> Result<MassScan> {
    if masses.is_empty() {
        return Err(Error::config("run.masses", "mass list is empty"));
    }
    let points = masses
        .par_iter()
        .map(|&m| {
            let params = base.with_mass(m);
            let sol = solve_spectrum(&params, options)?;
            Ok(ScanPoint {
                m,
                gap: sol.spectrum.gap,
                rigidity: sol.spectrum.rigidity,
                gap_index: sol.spectrum.gap_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let smallest = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.m <= 10.0 * smallest * (1.0 + 1e-12))
        .map(|p| (p.m.ln(), p.rigidity.ln()))
        .unzip();
    Ok(MassScan {
        small_mass_slope: least_squares_slope(&xs, &ys),
        points,
    })
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `n` masses geometrically spaced from `from` to `to` inclusive.
pub fn geometric_masses(from: f64, to: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![from];
    }
    let ratio = (to / from).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { to } else { from * (ratio * i as f64).exp() })
        .collect()
}
