//! Observers that turn a chain into Matsubara-function and order-parameter
//! estimates, and the sign audit on three-point functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AcceptanceRates, Chain, ChainSettings, ChainSummary, Observer};
use crate::error::{Error, Result};
use crate::loops::{BoundaryCondition, GaussianLoopFactory, LoopConfiguration};
use crate::params::OscillatorParams;
use crate::stats::batch_means;

/// Site-local observable `F(omega_l(tau))`.
#[derive(Clone)]
pub enum TestFunction {
    One,
    Identity,
    /// `max(-L, min(L, x))`.
    Clip(f64),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        bounded: bool,
    },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Identity => x,
            TestFunction::Clip(l) => x.clamp(-*l, *l),
            TestFunction::Custom { f, .. } => f(x),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            TestFunction::One | TestFunction::Clip(_) => true,
            TestFunction::Identity => false,
            TestFunction::Custom { bounded, .. } => *bounded,
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::One => "one".into(),
            TestFunction::Identity => "identity".into(),
            TestFunction::Clip(l) => format!("clip:{l:?}"),
            TestFunction::Custom { name, .. } => name.clone(),
        }
    }

    /// `clip_L` with `L = 5 sqrt(upsilon)`, or `L = 5` without a double well.
    pub fn default_clip(params: &OscillatorParams) -> Self {
        let u = params.upsilon();
        TestFunction::Clip(if params.is_double_well() && u > 0.0 { 5.0 * u.sqrt() } else { 5.0 })
    }

    /// Parses `one`, `identity` or `clip:L`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "one" => Ok(TestFunction::One),
            "identity" => Ok(TestFunction::Identity),
            _ => {
                let level = text
                    .strip_prefix("clip:")
                    .and_then(|l| l.trim().parse::<f64>().ok())
                    .filter(|l| *l > 0.0 && l.is_finite())
                    .ok_or_else(|| Error::config("run.functions", format!("unknown test function `{text}`")))?;
                Ok(TestFunction::Clip(level))
            }
        }
    }

    /// Checks oddness and positivity on positive arguments over a sample grid.
    pub fn check_odd_positive(&self) -> Result<()> {
        for i in 1..=400 {
            let x = 0.025 * i as f64;
            let (fp, fm) = (self.eval(x), self.eval(-x));
            if (fp + fm).abs() > 1e-12 * fp.abs().max(1.0) {
                return Err(Error::Precondition {
                    inequality: format!("{} odd: F(-x) = -F(x) at x = {x}", self.name()),
                    lhs: fm,
                    rhs: -fp,
                });
            }
            if !(fp > 0.0) {
                return Err(Error::Precondition {
                    inequality: format!("{} positive: F(x) > 0 at x = {x}", self.name()),
                    lhs: fp,
                    rhs: 0.0,
                });
            }
        }
        Ok(())
    }
}

/// Slice index of an imaginary time lying on the grid `k beta / P`.
/// `tau = beta` maps to slice 0. Off-grid times are rejected.
pub fn slice_of_time(beta: f64, slices: usize, tau: f64) -> Result<usize> {
    if !(0.0..=beta).contains(&tau) {
        return Err(Error::Domain(format!("time {tau} outside [0, {beta}]")));
    }
    let k = tau * slices as f64 / beta;
    let nearest = k.round();
    if (k - nearest).abs() > 1e-9 * nearest.max(1.0) {
        return Err(Error::Domain(format!(
            "time {tau} is not on the slice grid (step {})",
            beta / slices as f64
        )));
    }
    Ok(nearest as usize % slices)
}

/// Monte Carlo estimate with its batch-means error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub acceptance: AcceptanceRates,
    pub settings_digest: String,
    /// Set when an unbounded observable was averaged.
    pub outside_bounded_hypothesis: bool,
}

impl EstimateReport {
    fn from_series(series: &[f64], summary: &ChainSummary, unbounded: bool) -> Self {
        let (value, std_error) = batch_means(series);
        EstimateReport {
            value,
            std_error,
            n_samples: series.len() as u64,
            acceptance: summary.acceptance,
            settings_digest: summary.settings_digest.clone(),
            outside_bounded_hypothesis: unbounded,
        }
    }

    /// Pools estimates from independent chains, weighting by sample count.
    pub fn merge(&self, other: &EstimateReport) -> EstimateReport {
        let (n1, n2) = (self.n_samples as f64, other.n_samples as f64);
        let n = n1 + n2;
        let rate = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some((n1 * x + n2 * y) / n),
            (x, None) => x,
            (None, y) => y,
        };
        EstimateReport {
            value: (n1 * self.value + n2 * other.value) / n,
            std_error: ((n1 * self.std_error).powi(2) + (n2 * other.std_error).powi(2)).sqrt() / n,
            n_samples: self.n_samples + other.n_samples,
            acceptance: AcceptanceRates {
                redraw: rate(self.acceptance.redraw, other.acceptance.redraw),
                nudge: rate(self.acceptance.nudge, other.acceptance.nudge),
                flip: rate(self.acceptance.flip, other.acceptance.flip),
            },
            settings_digest: if self.settings_digest == other.settings_digest {
                self.settings_digest.clone()
            } else {
                format!("{}+{}", self.settings_digest, other.settings_digest)
            },
            outside_bounded_hypothesis: self.outside_bounded_hypothesis || other.outside_bounded_hypothesis,
        }
    }
}

/// One factor `F_i(omega_{l_i}(tau_i))` of a Matsubara product.
#[derive(Debug, Clone)]
pub struct MatsubaraPoint {
    pub site: usize,
    pub slice: usize,
    pub function: TestFunction,
}

/// Records `prod_i F_i(omega_{l_i}(tau_i))` for each sample.
#[derive(Debug, Clone)]
pub struct MatsubaraObserver {
    points: Vec<MatsubaraPoint>,
    series: Vec<f64>,
}

impl MatsubaraObserver {
    pub fn new(points: Vec<MatsubaraPoint>, config: &LoopConfiguration) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("run.functions", "no test functions given"));
        }
        for p in &points {
            if p.site >= config.volume().sites() {
                return Err(Error::Domain(format!("site {} outside the box", p.site)));
            }
            if p.slice >= config.slices() {
                return Err(Error::Domain(format!("slice {} outside 0..{}", p.slice, config.slices())));
            }
        }
        Ok(MatsubaraObserver {
            points,
            series: Vec::new(),
        })
    }

    /// Same points, every slice shifted by `shift` (mod `P`).
    pub fn shifted(&self, shift: usize, slices: usize) -> Self {
        MatsubaraObserver {
            points: self
                .points
                .iter()
                .map(|p| MatsubaraPoint {
                    slice: (p.slice + shift) % slices,
                    ..p.clone()
                })
                .collect(),
            series: Vec::new(),
        }
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn report(&self, summary: &ChainSummary) -> EstimateReport {
        let unbounded = self.points.iter().any(|p| !p.function.is_bounded());
        EstimateReport::from_series(&self.series, summary, unbounded)
    }
}

impl Observer for MatsubaraObserver {
    fn observe(&mut self, config: &LoopConfiguration) {
        let value = self
            .points
            .iter()
            .map(|p| p.function.eval(config.site(p.site).values()[p.slice]))
            .product();
        self.series.push(value);
    }
}

/// Slice-averaged displacement at one site. The observable is unbounded,
/// so reports carry `outside_bounded_hypothesis`.
#[derive(Debug, Clone)]
pub struct OrderParameterObserver {
    site: usize,
    series: Vec<f64>,
}

impl OrderParameterObserver {
    pub fn new(site: usize, config: &LoopConfiguration) -> Result<Self> {
        if site >= config.volume().sites() {
            return Err(Error::Domain(format!(
                "site {site} outside the box of {} sites",
                config.volume().sites()
            )));
        }
        Ok(OrderParameterObserver {
            site,
            series: Vec::new(),
        })
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn report(&self, summary: &ChainSummary) -> EstimateReport {
        EstimateReport::from_series(&self.series, summary, true)
    }
}

impl Observer for OrderParameterObserver {
    fn observe(&mut self, config: &LoopConfiguration) {
        self.series.push(config.site(self.site).mean());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GksAudit {
    pub plus: EstimateReport,
    pub minus: EstimateReport,
    /// Plus estimate `>= -2 SE` and minus estimate `<= +2 SE`.
    pub passed: bool,
    /// Minus estimate is bit-for-bit the negated plus estimate.
    pub exact_mirror: bool,
}

/// Estimates a three-point Matsubara function with odd, positive-on-positive
/// test functions under the plus boundary and under the coupled mirrored
/// (minus) chain, and checks the expected signs.
pub fn gks_audit(
    initial: &LoopConfiguration,
    params: &OscillatorParams,
    factory: &GaussianLoopFactory,
    settings: &ChainSettings,
    points: [MatsubaraPoint; 3],
) -> Result<GksAudit> {
    if !matches!(initial.boundary(), BoundaryCondition::PlusClamped(_)) {
        return Err(Error::config("lattice.boundary", "the sign audit starts from a plus-clamped box"));
    }
    for p in &points {
        p.function.check_odd_positive()?;
    }
    let mut plus_chain = Chain::new(initial.clone(), params, factory, settings)?;
    let mut minus_chain = Chain::mirrored_of(initial, params, factory, settings)?;
    let mut plus_obs = MatsubaraObserver::new(points.to_vec(), initial)?;
    let mut minus_obs = plus_obs.clone();
    let (plus_summary, minus_summary) = rayon::join(
        || plus_chain.run(&mut [&mut plus_obs]),
        || minus_chain.run(&mut [&mut minus_obs]),
    );
    let plus = plus_obs.report(&plus_summary);
    let minus = minus_obs.report(&minus_summary);
    let passed = plus.value >= -2.0 * plus.std_error && minus.value <= 2.0 * minus.std_error;
    let exact_mirror = minus.value == -plus.value;
    Ok(GksAudit {
        plus,
        minus,
        passed,
        exact_mirror,
    })
}
