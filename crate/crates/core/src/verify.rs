//! Built-in verification suite. Every check constructs its own fixtures,
//! needs no external data, and reports a one-line outcome.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    beta_star_residual, classify_with, solve_beta_star, t_of_u, theta_bessel_integral, theta_of_d, u_of_t,
    PhaseVerdict, ThetaMethod, ThetaResolution,
};
use crate::error::{Error, Result};
use crate::loops::{
    default_clamp, default_slices, BoundaryCondition, GaussianLoopFactory, LatticeBox, LoopConfiguration,
};
use crate::oracle::single_site_moments;
use crate::params::OscillatorParams;
use crate::sampler::{
    gks_audit, metropolis_chain, ChainSettings, MatsubaraObserver, MatsubaraPoint, OrderParameterObserver,
    TestFunction,
};
use crate::spectral::{geometric_masses, rigidity_mass_scan, solve_spectrum, SpectralOptions};
use crate::stats::{batch_means, mean_and_error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    /// Diagnostics that are reported but never fail the suite are not gated.
    pub gated: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let status = match (self.gated, self.passed) {
            (true, true) => "PASS",
            (true, false) => "FAIL",
            (false, true) => "INFO ok",
            (false, false) => "INFO no",
        };
        format!(
            "[{status}] {:>2} {}: {} ({:.2} s)",
            self.id, self.title, self.detail, self.elapsed_s
        )
    }

    /// Whether this outcome lets the suite pass.
    pub fn acceptable(&self) -> bool {
        self.passed || !self.gated
    }
}

type Check = fn() -> Result<(bool, String)>;

struct Criterion {
    id: u32,
    title: &'static str,
    gated: bool,
    time_limit: Option<f64>,
    check: Check,
}

const SUITE: &[Criterion] = &[
    Criterion { id: 1, title: "harmonic spectrum", gated: true, time_limit: Some(5.0), check: harmonic_spectrum },
    Criterion { id: 2, title: "rigidity identities", gated: true, time_limit: None, check: rigidity_identities },
    Criterion { id: 3, title: "small-mass law", gated: true, time_limit: Some(60.0), check: small_mass_law },
    Criterion { id: 4, title: "lattice constant theta(d)", gated: true, time_limit: None, check: lattice_constant },
    Criterion { id: 5, title: "critical temperature inversion", gated: true, time_limit: None, check: inversion },
    Criterion { id: 6, title: "classification exclusivity", gated: true, time_limit: None, check: exclusivity },
    Criterion { id: 7, title: "exact Gaussian sampler", gated: true, time_limit: Some(10.0), check: gaussian_sampler },
    Criterion { id: 8, title: "sampler vs quadrature", gated: true, time_limit: Some(60.0), check: quadrature_oracle },
    Criterion { id: 9, title: "harmonic path integral", gated: true, time_limit: None, check: harmonic_chain },
    Criterion { id: 10, title: "symmetry suite", gated: true, time_limit: None, check: symmetries },
    Criterion { id: 11, title: "GKS sign audit", gated: true, time_limit: Some(300.0), check: sign_audit },
    Criterion { id: 12, title: "symmetry-breaking trend", gated: false, time_limit: None, check: breaking_trend },
];

pub fn criterion_ids() -> Vec<u32> {
    SUITE.iter().map(|c| c.id).collect()
}

/// Runs one check. Errors inside the check become a failed outcome.
pub fn run_criterion(id: u32) -> Result<CriterionOutcome> {
    let c = SUITE
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::config("verify.criterion", format!("no check numbered {id}")))?;
    let start = Instant::now();
    let (mut passed, mut detail) = match (c.check)() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    if let Some(limit) = c.time_limit {
        if elapsed_s > limit {
            passed = false;
            detail.push_str(&format!("; exceeded {limit} s"));
        }
    }
    Ok(CriterionOutcome {
        id,
        title: c.title.to_string(),
        passed,
        gated: c.gated,
        detail,
        elapsed_s,
    })
}

/// Runs the checks in `ids` (all when empty) in order.
pub fn run_suite(ids: &[u32]) -> Result<Vec<CriterionOutcome>> {
    let ids = if ids.is_empty() { criterion_ids() } else { ids.to_vec() };
    ids.into_iter().map(run_criterion).collect()
}

fn harmonic_spectrum() -> Result<(bool, String)> {
    let p = OscillatorParams::new(1.0, 4.0, 1.0, 1.0, 0.0, 1, 1.0)?.harmonic();
    let sol = solve_spectrum(&p, &SpectralOptions { levels: 10, points: 8000, half_width: None })?;
    let err = sol
        .spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(n, e)| (e - (n as f64 + 0.5) * 2.0).abs())
        .fold(0.0, f64::max);
    Ok((err <= 1e-4, format!("max |E_n - (2n+1)| = {err:.2e} over 10 levels")))
}

fn rigidity_identities() -> Result<(bool, String)> {
    let opts = SpectralOptions::default();
    let mut worst = 0.0f64;
    for m in [0.1, 1.0, 10.0] {
        let p = OscillatorParams::new(m, 1.0, 1.0, 1.0, 0.0, 1, 1.0)?.harmonic();
        worst = worst.max((solve_spectrum(&p, &opts)?.spectrum.rigidity - 1.0).abs());
    }
    let mut sets = Vec::new();
    for m in [0.5, 1.0, 2.0] {
        for b1 in [0.75, 1.0, 2.0, 3.0] {
            for b2 in [0.25, 1.0] {
                sets.push(OscillatorParams::new(m, 1.0, b1, b2, 0.0, 1, 1.0)?);
            }
        }
    }
    let ratios = sets
        .par_iter()
        .map(|p| Ok(solve_spectrum(p, &opts)?.spectrum.rigidity / p.rigidity_bound()))
        .collect::<Result<Vec<f64>>>()?;
    let violations = ratios.iter().filter(|&&r| r > 1.0).count();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 4e-4 && violations == 0,
        format!(
            "harmonic max |R_m - a| = {worst:.2e}; {} double wells, {violations} above 1/(4 m upsilon^2), max ratio {max_ratio:.3}",
            sets.len()
        ),
    ))
}

fn small_mass_law() -> Result<(bool, String)> {
    let base = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 1.0)?;
    let scan = rigidity_mass_scan(&base, &geometric_masses(1e-3, 1e-2, 12), &SpectralOptions::default())?;
    let slope = scan
        .small_mass_slope
        .ok_or_else(|| Error::Convergence("no slope".into()))?;
    Ok(((-0.38..=-0.28).contains(&slope), format!("log-log slope of R_m over m in [1e-3, 1e-2] = {slope:.4}")))
}

fn lattice_constant() -> Result<(bool, String)> {
    let res = ThetaResolution::default();
    let t3 = theta_of_d(3, &res)?;
    if t3.method != ThetaMethod::Grid {
        return Err(Error::Convergence("d = 3 not evaluated on the grid".into()));
    }
    let oracle = theta_bessel_integral(3, 0.5);
    let (t4, t6) = (theta_of_d(4, &res)?.theta, theta_of_d(6, &res)?.theta);
    let diff = (t3.theta - oracle).abs();
    let ordered = t3.theta > t4 && t4 > t6 && t6 > 1.0;
    Ok((
        diff <= 1e-4 && ordered,
        format!(
            "theta(3) grid {:.8} vs Bessel {oracle:.8} (diff {diff:.1e}); theta(4) {t4:.6}, theta(6) {t6:.6}",
            t3.theta
        ),
    ))
}

fn inversion() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_round = 0.0f64;
    for _ in 0..100 {
        let u = rng.random_range(0.0..=0.999);
        worst_round = worst_round.max((u_of_t(t_of_u(u)?)? - u).abs());
    }
    let disp = theta_of_d(3, &ThetaResolution::default())?;
    let mut worst_residual = 0.0f64;
    let mut admissible = 0;
    while admissible < 20 {
        let m = rng.random_range(0.3..3.0);
        let b2 = rng.random_range(0.1..1.0);
        let b1 = rng.random_range(1.0..4.0);
        let j = rng.random_range(0.05..2.0);
        let p = OscillatorParams::new(m, 1.0, b1, b2, j, 3, 1.0)?;
        if p.transition_strength() <= 1.05 * disp.theta {
            continue;
        }
        admissible += 1;
        let beta = solve_beta_star(&p, &disp)?;
        worst_residual = worst_residual.max(beta_star_residual(&p, disp.theta, beta)?);
    }
    let base = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.0, 3, 1.0)?;
    let betas = (1..=20)
        .map(|k| solve_beta_star(&base.with_coupling(0.2 + 0.1 * k as f64), &disp))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = betas.windows(2).all(|w| w[1] < w[0]);
    Ok((
        worst_round <= 1e-10 && worst_residual < 1e-9 && decreasing,
        format!(
            "round trip {worst_round:.1e}; residual {worst_residual:.1e} on 20 sets; beta* decreasing in J_hat: {decreasing}"
        ),
    ))
}

fn exclusivity() -> Result<(bool, String)> {
    let res = ThetaResolution::default();
    let thetas = [3usize, 4, 5]
        .iter()
        .map(|&d| theta_of_d(d, &res))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let sets: Vec<OscillatorParams> = (0..240)
        .map(|_| {
            let a = rng.random_range(0.5..2.0);
            OscillatorParams::new(
                10f64.powf(rng.random_range(-0.7..0.7)),
                a,
                rng.random_range(0.55 * a..3.0),
                rng.random_range(0.1..1.0),
                10f64.powf(rng.random_range(-2.0..0.5)),
                rng.random_range(3..=5),
                1.0,
            )
        })
        .collect::<Result<_>>()?;
    let opts = SpectralOptions::default();
    let outcomes: Vec<Result<PhaseVerdict>> = sets
        .par_iter()
        .map(|p| {
            let r = solve_spectrum(p, &opts)?.spectrum.rigidity;
            Ok(classify_with(p, r, Some(&thetas[p.d - 3]))?.verdict)
        })
        .collect();
    let (mut both, mut stabilized, mut transition, mut bad_strength) = (0, 0, 0, 0);
    for (p, o) in sets.iter().zip(&outcomes) {
        match o {
            Err(Error::Inconsistent(_)) => both += 1,
            Err(e) => return Err(Error::Convergence(format!("classification failed: {e}"))),
            Ok(PhaseVerdict::StabilizedAllBeta) => {
                stabilized += 1;
                if p.transition_strength() >= 1.0 + 1e-9 {
                    bad_strength += 1;
                }
            }
            Ok(PhaseVerdict::TransitionRegime { .. }) => transition += 1,
            Ok(PhaseVerdict::Undetermined) => {}
        }
    }
    Ok((
        both == 0 && bad_strength == 0,
        format!(
            "{} sets: {stabilized} stabilized, {transition} transition, {both} both; {bad_strength} stabilized with 4 m upsilon^2 J_hat >= 1",
            sets.len()
        ),
    ))
}

/// Circular lag products `(1/P) sum_j x_j x_{j+lag}` for `lag = 0..=P/2`.
fn lag_products(x: &[f64]) -> Vec<f64> {
    let p = x.len();
    (0..=p / 2)
        .map(|lag| (0..p).map(|j| x[j] * x[(j + lag) % p]).sum::<f64>() / p as f64)
        .collect()
}

/// Largest `|estimate - exact| / SE` over lags.
fn worst_lag_deviation(series: &[Vec<f64>], factory: &GaussianLoopFactory, batched: bool) -> f64 {
    let lags = series[0].len();
    (0..lags)
        .map(|lag| {
            let column: Vec<f64> = series.iter().map(|s| s[lag]).collect();
            let (mean, se) = if batched { batch_means(&column) } else { mean_and_error(&column) };
            (mean - factory.covariance(0, lag)).abs() / se
        })
        .fold(0.0, f64::max)
}

fn gaussian_sampler() -> Result<(bool, String)> {
    let factory = GaussianLoopFactory::new(2.0, 1.0, 1.0, 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let series: Vec<Vec<f64>> = (0..10_000).map(|_| lag_products(factory.sample(&mut rng).values())).collect();
    let worst = worst_lag_deviation(&series, &factory, false);
    Ok((worst <= 4.0, format!("10^4 loops, P = 32: worst lag deviation {worst:.2} SE")))
}

fn quadrature_oracle() -> Result<(bool, String)> {
    let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.0, 1, 2.0)?;
    let exact = single_site_moments(&p, 3, 0.1, 9.0)?;
    let factory = GaussianLoopFactory::for_params(&p, 3)?;
    let start = LoopConfiguration::uniform(LatticeBox::new(vec![1])?, 0.0, 3, p.beta, BoundaryCondition::Free)?;
    let (mut s2, mut s4) = (Vec::new(), Vec::new());
    let mut moments = |c: &LoopConfiguration| {
        let x = c.site(0).values();
        s2.push(x.iter().map(|q| q * q).sum::<f64>() / 3.0);
        s4.push(x.iter().map(|q| q.powi(4)).sum::<f64>() / 3.0);
    };
    let settings = ChainSettings { sweeps: 400_000, burn_in: 2_000, seed: 3, ..ChainSettings::default() };
    metropolis_chain(start, &p, &factory, &settings, &mut [&mut moments])?;
    let ((m2, e2), (m4, e4)) = (batch_means(&s2), batch_means(&s4));
    let (z2, z4) = ((m2 - exact.second).abs() / e2, (m4 - exact.fourth).abs() / e4);
    Ok((
        z2 <= 4.0 && z4 <= 4.0,
        format!(
            "<w^2> {m2:.5}±{e2:.5} vs {:.5} ({z2:.2} SE); <w^4> {m4:.4}±{e4:.4} vs {:.4} ({z4:.2} SE)",
            exact.second, exact.fourth
        ),
    ))
}

fn harmonic_chain() -> Result<(bool, String)> {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2.0)?.harmonic();
    let factory = GaussianLoopFactory::for_params(&p, 16)?;
    let start = LoopConfiguration::uniform(LatticeBox::new(vec![2])?, 0.0, 16, p.beta, BoundaryCondition::Free)?;
    let mut series = Vec::new();
    let mut lags = |c: &LoopConfiguration| series.push(lag_products(c.site(1).values()));
    let settings = ChainSettings { sweeps: 40_000, burn_in: 500, seed: 5, ..ChainSettings::default() };
    let summary = metropolis_chain(start, &p, &factory, &settings, &mut [&mut lags])?;
    let worst = worst_lag_deviation(&series, &factory, true);
    let redraw = summary.acceptance.redraw;
    Ok((
        worst <= 4.0 && redraw == Some(1.0),
        format!("worst lag deviation {worst:.2} SE over 9 lags; redraw acceptance {redraw:?}"),
    ))
}

fn symmetries() -> Result<(bool, String)> {
    let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.2, 2, 2.0)?;
    let slices = 16;
    let factory = GaussianLoopFactory::for_params(&p, slices)?;
    let volume = LatticeBox::new(vec![3, 3])?;
    let settings = ChainSettings { sweeps: 20_000, burn_in: 500, seed: 13, ..ChainSettings::default() };

    let free = LoopConfiguration::uniform(volume.clone(), 0.0, slices, p.beta, BoundaryCondition::Free)?;
    let mut order = OrderParameterObserver::new(4, &free)?;
    let summary = metropolis_chain(free, &p, &factory, &settings, &mut [&mut order])?;
    let free_m = order.report(&summary);
    let free_ok = free_m.value.abs() <= 4.0 * free_m.std_error;

    let clamp = default_clamp(&p)?;
    let plus = LoopConfiguration::uniform(volume, clamp, slices, p.beta, BoundaryCondition::PlusClamped(clamp))?;
    let mut plus_chain = crate::sampler::Chain::new(plus.clone(), &p, &factory, &settings)?;
    let mut minus_chain = crate::sampler::Chain::mirrored_of(&plus, &p, &factory, &settings)?;
    let mut plus_m = OrderParameterObserver::new(4, &plus)?;
    let mut minus_m = plus_m.clone();
    let point = |site, slice| MatsubaraPoint { site, slice, function: TestFunction::Clip(1.0) };
    let mut gamma = MatsubaraObserver::new(vec![point(0, 0), point(4, 5)], &plus)?;
    let mut shifted = gamma.shifted(7, slices);
    let plus_summary = plus_chain.run(&mut [&mut plus_m, &mut gamma, &mut shifted]);
    let minus_summary = minus_chain.run(&mut [&mut minus_m]);
    let (mp, mm) = (plus_m.report(&plus_summary), minus_m.report(&minus_summary));
    let mirror_ok = mm.value == -mp.value;
    let (g, gs) = (gamma.report(&plus_summary), shifted.report(&plus_summary));
    let combined = (g.std_error.powi(2) + gs.std_error.powi(2)).sqrt();
    let shift_ok = (g.value - gs.value).abs() <= 2.0 * combined;
    Ok((
        free_ok && mirror_ok && shift_ok,
        format!(
            "free M = {:.4}±{:.4}; M+ = {:.6}, M- = {:.6} (exact mirror: {mirror_ok}); Gamma {:.5} vs shifted {:.5} (±{combined:.5})",
            free_m.value, free_m.std_error, mp.value, mm.value, g.value, gs.value
        ),
    ))
}

fn sign_audit() -> Result<(bool, String)> {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 3, 4.0)?;
    let slices = default_slices(&p);
    let factory = GaussianLoopFactory::for_params(&p, slices)?;
    let clamp = default_clamp(&p)?;
    let volume = LatticeBox::cube(3, 3)?;
    let start = LoopConfiguration::uniform(volume, clamp, slices, p.beta, BoundaryCondition::PlusClamped(clamp))?;
    let point = |site, slice| MatsubaraPoint { site, slice, function: TestFunction::Clip(3.0) };
    let settings = ChainSettings { sweeps: 4_000, burn_in: 200, seed: 17, ..ChainSettings::default() };
    let audit = gks_audit(&start, &p, &factory, &settings, [point(0, 0), point(13, slices / 4), point(26, slices / 2)])?;
    Ok((
        audit.passed && audit.exact_mirror,
        format!(
            "3^3 box, beta = 4, P = {slices}: plus {:.5}±{:.5}, minus {:.5}±{:.5}, exact mirror {}",
            audit.plus.value, audit.plus.std_error, audit.minus.value, audit.minus.std_error, audit.exact_mirror
        ),
    ))
}

fn breaking_trend() -> Result<(bool, String)> {
    let base = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 3, 1.0)?;
    let volume = LatticeBox::cube(3, 4)?;
    let centre = volume.index(&[1, 1, 1]).expect("inside");
    let clamp = default_clamp(&base)?;
    let values = [1.0, 2.0, 4.0, 8.0]
        .par_iter()
        .map(|&beta| {
            let p = base.with_beta(beta);
            let slices = default_slices(&p);
            let factory = GaussianLoopFactory::for_params(&p, slices)?;
            let start =
                LoopConfiguration::uniform(volume.clone(), clamp, slices, beta, BoundaryCondition::PlusClamped(clamp))?;
            let mut order = OrderParameterObserver::new(centre, &start)?;
            let settings = ChainSettings { sweeps: 8_000, burn_in: 500, seed: 19, ..ChainSettings::default() };
            let summary = metropolis_chain(start, &p, &factory, &settings, &mut [&mut order])?;
            Ok(order.report(&summary))
        })
        .collect::<Result<Vec<_>>>()?;
    let increasing = values.windows(2).all(|w| w[1].value > w[0].value);
    let listing: Vec<String> = values.iter().map(|r| format!("{:.4}±{:.4}", r.value, r.std_error)).collect();
    Ok((increasing, format!("M+ at beta = 1, 2, 4, 8 on 4^3: {}", listing.join(", "))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion_is_a_config_error() {
        assert!(run_criterion(99).unwrap_err().is_config());
    }

    #[test]
    fn lag_products_of_constant() {
        assert_eq!(lag_products(&[2.0; 6]), vec![4.0; 4]);
    }
}
