//! Discretized temperature loops on a finite box of the lattice, the
//! harmonic propagator that defines the Gaussian reference measure, and
//! the interaction action that reweights it.

mod factory;
mod format;

pub use factory::{default_slices, GaussianLoopFactory};
pub use format::{read_configuration, write_configuration, LOOP_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::OscillatorParams;

/// `S_beta(tau, tau')`, the covariance of the harmonic reference loop.
pub fn propagator(beta: f64, m: f64, a: f64, tau: f64, tau_prime: f64) -> Result<f64> {
    for (name, v) in [("beta", beta), ("m", m), ("a", a)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("propagator needs {name} > 0, got {v}")));
        }
    }
    for t in [tau, tau_prime] {
        if !(0.0..=beta).contains(&t) {
            return Err(Error::Domain(format!("imaginary time {t} outside [0, {beta}]")));
        }
    }
    Ok(propagator_lag(beta, m, a, (tau - tau_prime).abs()))
}

/// Propagator as a function of the lag `|tau - tau'|` in `[0, beta]`.
pub(crate) fn propagator_lag(beta: f64, m: f64, a: f64, lag: f64) -> f64 {
    let gap = (a / m).sqrt();
    ((-lag * gap).exp() + (-(beta - lag) * gap).exp()) / (2.0 * (m * a).sqrt() * -(-beta * gap).exp_m1())
}

/// Values `omega(tau_k)` at `tau_k = k beta / P`; `tau = beta` is
/// identified with `tau = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLoop {
    values: Vec<f64>,
    beta: f64,
}

impl TemperatureLoop {
    pub fn new(values: Vec<f64>, beta: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(format!("a loop needs at least 2 slices, got {}", values.len())));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("loop beta must be positive, got {beta}")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite loop value {bad}")));
        }
        Ok(TemperatureLoop { values, beta })
    }

    pub fn constant(value: f64, slices: usize, beta: f64) -> Result<Self> {
        Self::new(vec![value; slices], beta)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn slices(&self) -> usize {
        self.values.len()
    }

    pub fn time_step(&self) -> f64 {
        self.beta / self.values.len() as f64
    }

    /// Value at slice `k` taken modulo `P`.
    pub fn at(&self, k: usize) -> f64 {
        self.values[k % self.values.len()]
    }

    /// Loop shifted by `shift` slices: `omega'(k) = omega(k + shift)`.
    pub fn rotated(&self, shift: usize) -> Self {
        let p = self.values.len();
        let values = (0..p).map(|k| self.values[(k + shift) % p]).collect();
        TemperatureLoop { values, beta: self.beta }
    }

    pub fn negated(&self) -> Self {
        TemperatureLoop {
            values: self.values.iter().map(|v| -v).collect(),
            beta: self.beta,
        }
    }

    /// Slice average of the loop.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Axis-aligned box of lattice sites, indexed row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    extents: Vec<usize>,
}

impl LatticeBox {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.is_empty() || extents.contains(&0) {
            return Err(Error::config(
                "lattice.extents",
                format!("box extents must be nonempty and positive, got {extents:?}"),
            ));
        }
        Ok(LatticeBox { extents })
    }

    /// Cube with side `side` in `d` dimensions.
    pub fn cube(d: usize, side: usize) -> Result<Self> {
        Self::new(vec![side; d])
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            c[axis] = index % self.extents[axis];
            index /= self.extents[axis];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.dim() {
            return None;
        }
        let mut index = 0;
        for (c, e) in coords.iter().zip(&self.extents) {
            if c >= e {
                return None;
            }
            index = index * e + c;
        }
        Some(index)
    }

    /// In-box nearest neighbours of `site` and the number of its
    /// neighbours lying outside the box.
    pub fn neighbours(&self, site: usize) -> (Vec<usize>, usize) {
        let coords = self.coords(site);
        let mut inside = Vec::with_capacity(2 * self.dim());
        let mut outside = 0;
        for axis in 0..self.dim() {
            let mut c = coords.clone();
            if coords[axis] > 0 {
                c[axis] = coords[axis] - 1;
                inside.push(self.index(&c).unwrap());
            } else {
                outside += 1;
            }
            if coords[axis] + 1 < self.extents[axis] {
                c[axis] = coords[axis] + 1;
                inside.push(self.index(&c).unwrap());
            } else {
                outside += 1;
            }
        }
        (inside, outside)
    }

    /// Unordered nearest-neighbour pairs `(l, l')` with `l < l'`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        (0..self.sites())
            .flat_map(|s| {
                self.neighbours(s)
                    .0
                    .into_iter()
                    .filter(move |&t| t > s)
                    .map(move |t| (s, t))
            })
            .collect()
    }
}

/// Loops clamped on the exterior neighbours of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "clamp", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Free,
    PlusClamped(f64),
    MinusClamped(f64),
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryCondition::Free => Ok(()),
            BoundaryCondition::PlusClamped(c) | BoundaryCondition::MinusClamped(c) => {
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("lattice.clamp", format!("clamp level must be positive, got {c}")))
                }
            }
        }
    }

    /// Constant value of the exterior loops (0 for a free boundary).
    pub fn exterior_value(&self) -> f64 {
        match *self {
            BoundaryCondition::Free => 0.0,
            BoundaryCondition::PlusClamped(c) => c,
            BoundaryCondition::MinusClamped(c) => -c,
        }
    }

    /// The sign-reversed boundary.
    pub fn mirrored(&self) -> Self {
        match *self {
            BoundaryCondition::Free => BoundaryCondition::Free,
            BoundaryCondition::PlusClamped(c) => BoundaryCondition::MinusClamped(c),
            BoundaryCondition::MinusClamped(c) => BoundaryCondition::PlusClamped(c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Free => "free",
            BoundaryCondition::PlusClamped(_) => "plus",
            BoundaryCondition::MinusClamped(_) => "minus",
        }
    }
}

/// Default clamp level `sqrt(upsilon)`.
pub fn default_clamp(params: &OscillatorParams) -> Result<f64> {
    let u = params.upsilon();
    if u > 0.0 {
        Ok(u.sqrt())
    } else {
        Err(Error::config(
            "lattice.clamp",
            "default clamp sqrt(upsilon) needs b1 > a/2; set the clamp level explicitly",
        ))
    }
}

/// One loop per site of a box, all sharing `beta` and `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfiguration {
    volume: LatticeBox,
    loops: Vec<TemperatureLoop>,
    boundary: BoundaryCondition,
}

impl LoopConfiguration {
    pub fn new(volume: LatticeBox, loops: Vec<TemperatureLoop>, boundary: BoundaryCondition) -> Result<Self> {
        boundary.validate()?;
        if loops.len() != volume.sites() {
            return Err(Error::config(
                "lattice.extents",
                format!("{} loops for a box of {} sites", loops.len(), volume.sites()),
            ));
        }
        let (beta, slices) = (loops[0].beta(), loops[0].slices());
        if loops.iter().any(|l| l.beta() != beta || l.slices() != slices) {
            return Err(Error::config("lattice.slices", "all loops must share beta and slice count"));
        }
        Ok(LoopConfiguration { volume, loops, boundary })
    }

    /// Every loop identically equal to `value`.
    pub fn uniform(volume: LatticeBox, value: f64, slices: usize, beta: f64, boundary: BoundaryCondition) -> Result<Self> {
        let l = TemperatureLoop::constant(value, slices, beta)?;
        let loops = vec![l; volume.sites()];
        Self::new(volume, loops, boundary)
    }

    pub fn volume(&self) -> &LatticeBox {
        &self.volume
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn loops(&self) -> &[TemperatureLoop] {
        &self.loops
    }

    pub fn site(&self, index: usize) -> &TemperatureLoop {
        &self.loops[index]
    }

    pub(crate) fn site_mut(&mut self, index: usize) -> &mut TemperatureLoop {
        &mut self.loops[index]
    }

    pub fn set_site(&mut self, index: usize, l: TemperatureLoop) -> Result<()> {
        if l.beta() != self.beta() || l.slices() != self.slices() {
            return Err(Error::config("lattice.slices", "replacement loop has different beta or slice count"));
        }
        self.loops[index] = l;
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.loops[0].beta()
    }

    pub fn slices(&self) -> usize {
        self.loops[0].slices()
    }

    /// Global sign flip of all loops and of the boundary.
    pub fn mirrored(&self) -> Self {
        LoopConfiguration {
            volume: self.volume.clone(),
            loops: self.loops.iter().map(TemperatureLoop::negated).collect(),
            boundary: self.boundary.mirrored(),
        }
    }

    /// All loops rotated by the same number of slices.
    pub fn rotated(&self, shift: usize) -> Self {
        LoopConfiguration {
            volume: self.volume.clone(),
            loops: self.loops.iter().map(|l| l.rotated(shift)).collect(),
            boundary: self.boundary,
        }
    }

    pub fn check_compatible(&self, params: &OscillatorParams) -> Result<()> {
        if self.beta() != params.beta {
            return Err(Error::config(
                "model.beta",
                format!("configuration beta {} differs from model beta {}", self.beta(), params.beta),
            ));
        }
        Ok(())
    }
}

/// Neighbour lists of a box, cached for repeated local evaluations.
#[derive(Debug, Clone)]
pub struct Neighbourhood {
    inside: Vec<Vec<usize>>,
    outside: Vec<usize>,
}

impl Neighbourhood {
    pub fn new(volume: &LatticeBox) -> Self {
        let (inside, outside) = (0..volume.sites()).map(|s| volume.neighbours(s)).unzip();
        Neighbourhood { inside, outside }
    }

    pub fn inside(&self, site: usize) -> &[usize] {
        &self.inside[site]
    }

    pub fn outside(&self, site: usize) -> usize {
        self.outside[site]
    }
}

/// Interaction action `I` of a configuration: Riemann sums (left endpoint,
/// step `beta/P`) of `-J sum_{bonds} omega_l omega_l'` and
/// `sum_l V(omega_l)`, plus bonds to the clamped exterior loops.
pub fn action(config: &LoopConfiguration, params: &OscillatorParams) -> Result<f64> {
    config.check_compatible(params)?;
    let step = config.beta() / config.slices() as f64;
    let mut bonds = 0.0;
    for (s, t) in config.volume().bonds() {
        bonds += dot(config.site(s).values(), config.site(t).values());
    }
    let mut potential = 0.0;
    let mut exterior = 0.0;
    let outside_value = config.boundary().exterior_value();
    for s in 0..config.volume().sites() {
        let values = config.site(s).values();
        potential += values.iter().map(|&x| params.anharmonic_potential(x)).sum::<f64>();
        let (_, outside) = config.volume().neighbours(s);
        if outside > 0 && outside_value != 0.0 {
            exterior += outside as f64 * outside_value * values.iter().sum::<f64>();
        }
    }
    Ok(step * (potential - params.j * (bonds + exterior)))
}

/// Part of the action that involves `site`, evaluated with `values` in
/// place of its current loop. Differences of this quantity equal
/// differences of [`action`].
pub fn site_action(
    config: &LoopConfiguration,
    params: &OscillatorParams,
    neighbourhood: &Neighbourhood,
    site: usize,
    values: &[f64],
) -> f64 {
    let step = config.beta() / config.slices() as f64;
    let potential: f64 = values.iter().map(|&x| params.anharmonic_potential(x)).sum();
    let mut coupling = 0.0;
    for &t in neighbourhood.inside(site) {
        coupling += dot(values, config.site(t).values());
    }
    let outside = neighbourhood.outside(site);
    let outside_value = config.boundary().exterior_value();
    if outside > 0 && outside_value != 0.0 {
        coupling += outside as f64 * outside_value * values.iter().sum::<f64>();
    }
    step * (potential - params.j * coupling)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
