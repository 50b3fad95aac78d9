//! Lattice constant `theta(d)`, the pair `t(u)` / `u(t)`, the critical
//! inverse temperature and the two sufficient criteria: phase transition
//! below a critical temperature, or uniqueness at every temperature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;
use crate::special::{bessel_i0_scaled, gauss_legendre, scaled_i0_power_coefficients};
use crate::spectral::{solve_spectrum, SpectralOptions};

/// Absolute residual target for inverting `t(u)`.
pub const INVERSION_TOLERANCE: f64 = 1e-12;
/// Relative residual target for the critical-temperature equation.
pub const BETA_STAR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    /// Tensor midpoint rule with Richardson extrapolation.
    Grid,
    /// One-dimensional Bessel representation `d ∫ (e^{-t} I0(t))^d dt`.
    Bessel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeDispersion {
    pub d: usize,
    pub theta: f64,
    pub quadrature_error: f64,
    pub method: ThetaMethod,
}

/// Quadrature controls for [`theta_of_d`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaResolution {
    /// Nodes per axis at the coarse level; the fine level doubles it.
    pub nodes: usize,
    /// Upper bound on tensor-grid evaluations (after symmetry reduction).
    pub max_points: u64,
    /// Use the grid rule only up to this dimension.
    pub grid_max_dim: usize,
}

impl Default for ThetaResolution {
    fn default() -> Self {
        ThetaResolution {
            nodes: 64,
            max_points: 1 << 26,
            grid_max_dim: 4,
        }
    }
}

/// Midpoint nodes `-pi + (i + 1/2) 2pi/M`; for even `M` none sits at 0.
pub fn midpoint_nodes(nodes: usize) -> Vec<f64> {
    let step = 2.0 * PI / nodes as f64;
    (0..nodes).map(|i| -PI + (i as f64 + 0.5) * step).collect()
}

/// `d (2pi)^{-d} ∫ dp / E(p)` by the tensor rule over arbitrary per-axis
/// nodes of equal weight `2pi / nodes.len()`.
pub fn theta_tensor_sum(d: usize, nodes: &[f64]) -> f64 {
    let axis: Vec<f64> = nodes.iter().map(|p| 1.0 - p.cos()).collect();
    let count = axis.len() as f64;
    d as f64 * tensor_inverse_sum(d, &axis) / count.powi(d as i32)
}

/// Sum over the tensor grid of `1 / (x_1 + ... + x_d)`.
fn tensor_inverse_sum(d: usize, axis: &[f64]) -> f64 {
    fn recurse(depth: usize, partial: f64, axis: &[f64]) -> f64 {
        if depth == 1 {
            return axis.iter().map(|x| 1.0 / (partial + x)).sum();
        }
        axis.iter().map(|x| recurse(depth - 1, partial + x, axis)).sum()
    }
    recurse(d, 0.0, axis)
}

/// Midpoint rule using only the positive half of each axis (the integrand
/// is even in every coordinate).
fn theta_midpoint(d: usize, nodes: usize) -> f64 {
    let positive: Vec<f64> = midpoint_nodes(nodes)
        .into_iter()
        .filter(|p| *p > 0.0)
        .map(|p| 1.0 - p.cos())
        .collect();
    let half = positive.len() as f64;
    d as f64 * tensor_inverse_sum(d, &positive) / half.powi(d as i32)
}

/// `theta(d)` from `d ∫_0^∞ (e^{-t} I0(t))^d dt` with panels of width
/// `panel` on `[0, T]` and an analytic tail from the large-`t` expansion.
pub fn theta_bessel_integral(d: usize, panel: f64) -> f64 {
    const CUTOFF: f64 = 60.0;
    let (x, w) = gauss_legendre(20);
    let panels = (CUTOFF / panel).round() as usize;
    let width = CUTOFF / panels as f64;
    let mut body = 0.0;
    for k in 0..panels {
        let centre = (k as f64 + 0.5) * width;
        for (xi, wi) in x.iter().zip(&w) {
            let t = centre + 0.5 * width * xi;
            body += 0.5 * width * wi * bessel_i0_scaled(t).powi(d as i32);
        }
    }
    let half_d = 0.5 * d as f64;
    let tail: f64 = scaled_i0_power_coefficients(d, 12)
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let exponent = half_d + k as f64 - 1.0;
            c * CUTOFF.powf(-exponent) / exponent
        })
        .sum::<f64>()
        * (2.0 * PI).powf(-half_d);
    d as f64 * (body + tail)
}

/// `theta(d)` for `d >= 3`.
///
/// Up to `resolution.grid_max_dim` the tensor midpoint rule is evaluated at
/// `M` and `2M` nodes per axis and Richardson-extrapolated with the leading
/// error order `min(d - 2, 2)`; above it the Bessel representation is used.
/// `quadrature_error` is the size of the extrapolation correction (or the
/// panel-halving difference for the Bessel route).
pub fn theta_of_d(d: usize, resolution: &ThetaResolution) -> Result<LatticeDispersion> {
    if d < 3 {
        return Err(Error::Domain(format!(
            "theta(d) diverges for d = {d}: 1/E(p) is not integrable for d <= 2"
        )));
    }
    if d > resolution.grid_max_dim {
        let coarse = theta_bessel_integral(d, 1.0);
        let fine = theta_bessel_integral(d, 0.5);
        return Ok(LatticeDispersion {
            d,
            theta: fine,
            quadrature_error: (fine - coarse).abs(),
            method: ThetaMethod::Bessel,
        });
    }
    if resolution.nodes < 2 || resolution.nodes % 2 != 0 {
        return Err(Error::config("run.theta_nodes", "node count must be even and positive"));
    }
    let fine_nodes = 2 * resolution.nodes;
    let evaluations = ((fine_nodes / 2) as u64).checked_pow(d as u32);
    if evaluations.is_none_or(|e| e > resolution.max_points) {
        return Err(Error::Convergence(format!(
            "theta({d}) at {fine_nodes} nodes per axis exceeds the budget of {} points",
            resolution.max_points
        )));
    }
    let coarse = theta_midpoint(d, resolution.nodes);
    let fine = theta_midpoint(d, fine_nodes);
    let order = (d - 2).min(2) as i32;
    let correction = (fine - coarse) / (2f64.powi(order) - 1.0);
    Ok(LatticeDispersion {
        d,
        theta: fine + correction,
        quadrature_error: correction.abs(),
        method: ThetaMethod::Grid,
    })
}

/// `t(u) = sqrt(u) atanh(sqrt(u))`, i.e.
/// `(sqrt(u)/2) [ln(1 + sqrt(u)) - ln(1 - sqrt(u))]`.
pub fn t_of_u(u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("t(u) requires 0 <= u < 1, got {u}")));
    }
    Ok(t_of_root(u.sqrt()))
}

#[inline]
fn t_of_root(s: f64) -> f64 {
    0.5 * s * (s.ln_1p() - (-s).ln_1p())
}

/// Inverse of [`t_of_u`]: bisection on `s = sqrt(u)` followed by Newton
/// polishing. For `t` so large that the inverse rounds to 1 the largest
/// representable `u < 1` is returned.
pub fn u_of_t(t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("u(t) requires finite t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let top = 1.0 - f64::EPSILON / 2.0;
    if t_of_root(top) <= t {
        return Ok(top * top);
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if t_of_root(mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..50 {
        let f = t_of_root(s) - t;
        if f.abs() <= 0.1 * INVERSION_TOLERANCE {
            break;
        }
        let slope = 0.5 * (s.ln_1p() - (-s).ln_1p()) + s / (1.0 - s * s);
        let next = (s - f / slope).clamp(lo, hi);
        if next == s {
            break;
        }
        if t_of_root(next) < t {
            lo = next;
        } else {
            hi = next;
        }
        s = next;
    }
    Ok(s * s)
}

fn require_transition_hypothesis(params: &OscillatorParams, theta: f64) -> Result<()> {
    if !params.is_double_well() {
        return Err(Error::Precondition {
            inequality: "b1 > a/2 (double well, upsilon > 0)".into(),
            lhs: params.b1,
            rhs: 0.5 * params.a,
        });
    }
    let strength = params.transition_strength();
    if !(strength > theta) {
        return Err(Error::Precondition {
            inequality: "4 m upsilon^2 J_hat > theta(d)".into(),
            lhs: strength,
            rhs: theta,
        });
    }
    Ok(())
}

/// Critical inverse temperature `beta* = 4 m upsilon t(theta / (4 m upsilon^2 J_hat))`.
pub fn solve_beta_star(params: &OscillatorParams, dispersion: &LatticeDispersion) -> Result<f64> {
    require_transition_hypothesis(params, dispersion.theta)?;
    let ratio = dispersion.theta / params.transition_strength();
    Ok(4.0 * params.m * params.upsilon() * t_of_u(ratio)?)
}

/// Relative residual of `4 m upsilon^2 J_hat u(beta / 4 m upsilon) = theta`.
pub fn beta_star_residual(params: &OscillatorParams, theta: f64, beta: f64) -> Result<f64> {
    let u = u_of_t(beta / (4.0 * params.m * params.upsilon()))?;
    Ok((params.transition_strength() * u - theta).abs() / theta)
}

/// Independent route to `beta*`: bisection on the critical-temperature
/// equation itself, using only `u(t)`.
pub fn solve_beta_star_bisection(params: &OscillatorParams, theta: f64) -> Result<f64> {
    require_transition_hypothesis(params, theta)?;
    let scale = 4.0 * params.m * params.upsilon();
    let strength = params.transition_strength();
    let f = |beta: f64| -> Result<f64> { Ok(strength * u_of_t(beta / scale)? - theta) };
    let mut hi = scale;
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if hi > scale * 64.0 {
            return Err(Error::Convergence("critical temperature beyond representable range".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PhaseVerdict {
    /// `J_hat < R_m`: a unique Gibbs state at every temperature.
    StabilizedAllBeta,
    /// `4 m upsilon^2 J_hat > theta(d)`: several phases for `beta > beta_star`.
    TransitionRegime { beta_star: f64 },
    /// Neither sufficient condition holds.
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaValues {
    pub rigidity: f64,
    pub j_hat: f64,
    pub transition_strength: f64,
    pub theta: Option<f64>,
    pub beta_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseClassification {
    pub verdict: PhaseVerdict,
    pub params: OscillatorParams,
    pub values: CriteriaValues,
}

/// Classification from precomputed ingredients. `dispersion` is `None`
/// when `d < 3`, where the transition criterion does not apply.
pub fn classify_with(
    params: &OscillatorParams,
    rigidity: f64,
    dispersion: Option<&LatticeDispersion>,
) -> Result<PhaseClassification> {
    let j_hat = params.j_hat();
    let strength = params.transition_strength();
    let stabilized = j_hat < rigidity;
    let transition = match dispersion {
        Some(disp) if params.is_double_well() => strength > disp.theta,
        _ => false,
    };
    if stabilized && transition {
        return Err(Error::Inconsistent(format!(
            "J_hat = {j_hat} < R_m = {rigidity} and 4 m upsilon^2 J_hat = {strength} > theta = {}; \
             this contradicts R_m <= 1/(4 m upsilon^2)",
            dispersion.map_or(f64::NAN, |d| d.theta)
        )));
    }
    let mut values = CriteriaValues {
        rigidity,
        j_hat,
        transition_strength: strength,
        theta: dispersion.map(|d| d.theta),
        beta_star: None,
    };
    let verdict = if stabilized {
        PhaseVerdict::StabilizedAllBeta
    } else if let (true, Some(disp)) = (transition, dispersion) {
        let beta_star = solve_beta_star(params, disp)?;
        values.beta_star = Some(beta_star);
        PhaseVerdict::TransitionRegime { beta_star }
    } else {
        PhaseVerdict::Undetermined
    };
    Ok(PhaseClassification {
        verdict,
        params: *params,
        values,
    })
}

/// Computes `R_m` and `theta(d)` and classifies `params`.
pub fn classify_phase(
    params: &OscillatorParams,
    spectral: &SpectralOptions,
    resolution: &ThetaResolution,
) -> Result<PhaseClassification> {
    let rigidity = solve_spectrum(params, spectral)?.spectrum.rigidity;
    let dispersion = if params.d >= 3 {
        Some(theta_of_d(params.d, resolution)?)
    } else {
        None
    };
    classify_with(params, rigidity, dispersion.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dispersion(theta: f64) -> LatticeDispersion {
        LatticeDispersion {
            d: 3,
            theta,
            quadrature_error: 0.0,
            method: ThetaMethod::Grid,
        }
    }

    #[test]
    fn t_closed_form() {
        assert_eq!(t_of_u(0.0).unwrap(), 0.0);
        assert!((t_of_u(0.25).unwrap() - 0.25 * 3f64.ln()).abs() < 1e-15);
        assert!((t_of_u(0.25).unwrap() - 0.274_653).abs() < 1e-6);
        // 1 - 1e-12 gives t = (1/2) ln(4e12) to leading order
        let near = t_of_u(1.0 - 1e-12).unwrap();
        assert!(near > 10.0 && (near - 14.5087).abs() < 1e-3, "t = {near}");
        assert!(t_of_u(1.0).is_err());
        assert!(t_of_u(-0.1).is_err());
    }

    #[test]
    fn u_inverts_t() {
        assert_eq!(u_of_t(0.0).unwrap(), 0.0);
        assert!((u_of_t(0.274_653).unwrap() - 0.25).abs() < 1e-5);
        for u in [0.1, 0.5, 0.9, 0.99] {
            let t = t_of_u(u).unwrap();
            let back = u_of_t(t).unwrap();
            assert!((back - u).abs() < 1e-10, "{u} -> {back}");
            assert!((t_of_u(back).unwrap() - t).abs() <= INVERSION_TOLERANCE);
        }
        assert!(u_of_t(-1.0).is_err());
        assert!(u_of_t(100.0).unwrap() < 1.0);
    }

    #[test]
    fn d_below_three_rejected() {
        assert!(matches!(theta_of_d(2, &ThetaResolution::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn reflected_grid_is_identical() {
        let nodes = midpoint_nodes(24);
        let reflected: Vec<f64> = nodes.iter().rev().map(|p| -p).collect();
        let a = theta_tensor_sum(3, &nodes);
        let b = theta_tensor_sum(3, &reflected);
        assert!(((a - b) / a).abs() < 1e-13);
        assert!(((theta_midpoint(3, 24) - a) / a).abs() < 1e-13);
    }

    #[test]
    fn budget_enforced() {
        let res = ThetaResolution {
            nodes: 64,
            max_points: 1000,
            grid_max_dim: 4,
        };
        assert!(matches!(theta_of_d(3, &res), Err(Error::Convergence(_))));
    }

    #[test]
    fn beta_star_closed_form_at_ratio_half() {
        let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 1.0, 3, 1.0).unwrap();
        let theta = p.transition_strength() / 2.0;
        let beta = solve_beta_star(&p, &dispersion(theta)).unwrap();
        let expected = 4.0 * p.m * p.upsilon() * t_of_u(0.5).unwrap();
        assert_eq!(beta, expected);
        assert!(beta_star_residual(&p, theta, beta).unwrap() < BETA_STAR_TOLERANCE);
        let bis = solve_beta_star_bisection(&p, theta).unwrap();
        assert!((bis - beta).abs() < 1e-9 * beta);
    }

    #[test]
    fn beta_star_diverges_at_threshold() {
        let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 1.0, 3, 1.0).unwrap();
        let theta = p.transition_strength() / (1.0 + 1e-6);
        let beta = solve_beta_star(&p, &dispersion(theta)).unwrap();
        let bound = 4.0 * p.m * p.upsilon() * t_of_u(1.0 - 1e-6).unwrap();
        assert!(beta > bound * (1.0 - 1e-9), "{beta} vs {bound}");
        assert!(beta > 20.0);
    }

    #[test]
    fn hypothesis_violation_names_inequality() {
        let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.01, 3, 1.0).unwrap();
        match solve_beta_star(&p, &dispersion(1.5)).unwrap_err() {
            Error::Precondition { inequality, .. } => assert!(inequality.contains("theta(d)")),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn verdict_rules() {
        let disp = dispersion(1.5);
        // shallow wells: 4 m upsilon^2 J_hat is tiny, J_hat = 0.6
        let weak = OscillatorParams::new(1.0, 1.0, 0.6, 1.0, 0.1, 3, 1.0).unwrap();
        let c = classify_with(&weak, 1.0, Some(&disp)).unwrap();
        assert_eq!(c.verdict, PhaseVerdict::StabilizedAllBeta);
        let c = classify_with(&weak, 0.5, Some(&disp)).unwrap();
        assert_eq!(c.verdict, PhaseVerdict::Undetermined);
        let strong = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 1.0, 3, 1.0).unwrap();
        let c = classify_with(&strong, 0.1, Some(&disp)).unwrap();
        assert!(matches!(c.verdict, PhaseVerdict::TransitionRegime { .. }));
        assert!(c.values.beta_star.is_some());
        // contradictory inputs are reported, never silently resolved
        assert!(matches!(
            classify_with(&strong, 100.0, Some(&disp)),
            Err(Error::Inconsistent(_))
        ));
    }
}
