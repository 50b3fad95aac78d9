//! Metropolis sampling of the finite-volume Gibbs path measure: the
//! Gaussian reference measure reweighted by `exp(-I)`.
//!
//! Three move kinds are mixed per site visit:
//! * whole-loop redraw from the exact reference sampler, accepted with
//!   `min(1, exp(-ΔI))` (the Gaussian weight cancels against the proposal);
//! * single-slice Gaussian nudges, accepted on the full energy change
//!   `ΔI + Δ(x^T C^{-1} x / 2)`;
//! * sign flip of the site's loop.
//!
//! Chains draw from a ChaCha8 stream. Chain `i` of a parallel run uses the
//! master seed with stream number `i`. A mirrored chain consumes the same
//! stream but negates every normal variate, which couples it to the
//! unmirrored chain by an exact global sign flip.

mod estimators;

pub use estimators::{
    gks_audit, slice_of_time, EstimateReport, GksAudit, MatsubaraObserver, MatsubaraPoint, OrderParameterObserver,
    TestFunction,
};

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loops::{read_configuration, site_action, write_configuration, GaussianLoopFactory, LoopConfiguration, Neighbourhood};
use crate::params::OscillatorParams;
use crate::stats::fnv1a64;

/// Probabilities of the three move kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    pub redraw: f64,
    pub nudge: f64,
    pub flip: f64,
}

impl Default for ProposalMix {
    fn default() -> Self {
        ProposalMix {
            redraw: 0.5,
            nudge: 0.45,
            flip: 0.05,
        }
    }
}

impl ProposalMix {
    pub const REDRAW_ONLY: ProposalMix = ProposalMix {
        redraw: 1.0,
        nudge: 0.0,
        flip: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.redraw, self.nudge, self.flip];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("chain.mix", format!("probabilities must lie in [0, 1]: {parts:?}")));
        }
        let total: f64 = parts.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("chain.mix", format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Recorded sweeps, after burn-in.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    /// ChaCha stream number; distinct chains of one run use distinct streams.
    pub stream: u64,
    pub mix: ProposalMix,
    /// Standard deviation of single-slice nudges.
    pub nudge_scale: f64,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            sweeps: 10_000,
            burn_in: 1_000,
            thinning: 1,
            seed: 0,
            stream: 0,
            mix: ProposalMix::default(),
            nudge_scale: 0.5,
        }
    }
}

impl ChainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::config("chain.sweeps", "must be positive"));
        }
        if self.thinning == 0 {
            return Err(Error::config("chain.thinning", "must be positive"));
        }
        if !(self.nudge_scale > 0.0 && self.nudge_scale.is_finite()) {
            return Err(Error::config("chain.nudge_scale", "must be positive"));
        }
        self.mix.validate()
    }

    /// Samples handed to observers: `sweeps / thinning`.
    pub fn samples(&self) -> u64 {
        self.sweeps / self.thinning
    }

    pub fn digest(&self) -> String {
        let canonical = format!(
            "sweeps={};burn_in={};thinning={};seed={};stream={};mix={:?},{:?},{:?};nudge_scale={:?}",
            self.sweeps,
            self.burn_in,
            self.thinning,
            self.seed,
            self.stream,
            self.mix.redraw,
            self.mix.nudge,
            self.mix.flip,
            self.nudge_scale
        );
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

/// Receives every recorded (post burn-in, thinned) configuration.
pub trait Observer {
    fn observe(&mut self, config: &LoopConfiguration);
}

impl<F: FnMut(&LoopConfiguration)> Observer for F {
    fn observe(&mut self, config: &LoopConfiguration) {
        self(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MoveCounter {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveCounter {
    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub redraw: Option<f64>,
    pub nudge: Option<f64>,
    pub flip: Option<f64>,
}

/// What a finished run reports besides the observers' own data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub counters: [MoveCounter; 3],
    pub acceptance: AcceptanceRates,
    pub n_samples: u64,
    pub settings: ChainSettings,
    pub settings_digest: String,
}

/// Uniform and normal variates; the mirrored variant negates the normals.
#[derive(Debug, Clone)]
struct Variates {
    rng: ChaCha8Rng,
    mirrored: bool,
}

impl Variates {
    fn new(seed: u64, stream: u64, mirrored: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Variates { rng, mirrored }
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.mirrored {
            -z
        } else {
            z
        }
    }
}

#[inline]
fn metropolis_accept(delta: f64, u: f64) -> bool {
    delta <= 0.0 || u < (-delta).exp()
}

/// A Markov chain over loop configurations.
#[derive(Debug, Clone)]
pub struct Chain {
    config: LoopConfiguration,
    params: OscillatorParams,
    factory: GaussianLoopFactory,
    settings: ChainSettings,
    hood: Neighbourhood,
    variates: Variates,
    counters: [MoveCounter; 3],
    sweeps_done: u64,
    normals: Vec<f64>,
}

const REDRAW: usize = 0;
const NUDGE: usize = 1;
const FLIP: usize = 2;

impl Chain {
    pub fn new(
        initial: LoopConfiguration,
        params: &OscillatorParams,
        factory: &GaussianLoopFactory,
        settings: &ChainSettings,
    ) -> Result<Self> {
        Self::build(initial, params, factory, settings, false)
    }

    /// Chain coupled to `Chain::new(initial.mirrored(), ..)` by a global sign
    /// flip: pass the configuration of the chain to be mirrored.
    pub fn mirrored_of(
        initial: &LoopConfiguration,
        params: &OscillatorParams,
        factory: &GaussianLoopFactory,
        settings: &ChainSettings,
    ) -> Result<Self> {
        Self::build(initial.mirrored(), params, factory, settings, true)
    }

    fn build(
        initial: LoopConfiguration,
        params: &OscillatorParams,
        factory: &GaussianLoopFactory,
        settings: &ChainSettings,
        mirrored: bool,
    ) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        initial.check_compatible(params)?;
        if factory.beta() != params.beta || factory.mass() != params.m || factory.rigidity() != params.a {
            return Err(Error::config("model", "reference sampler built for different (beta, m, a)"));
        }
        if factory.slices() != initial.slices() {
            return Err(Error::config(
                "lattice.slices",
                format!("sampler has {} slices, configuration {}", factory.slices(), initial.slices()),
            ));
        }
        if initial.volume().dim() != params.d {
            return Err(Error::config(
                "lattice.extents",
                format!("box has {} axes but the model dimension is {}", initial.volume().dim(), params.d),
            ));
        }
        let hood = Neighbourhood::new(initial.volume());
        Ok(Chain {
            normals: vec![0.0; factory.slices()],
            config: initial,
            params: *params,
            factory: factory.clone(),
            settings: *settings,
            hood,
            variates: Variates::new(settings.seed, settings.stream, mirrored),
            counters: [MoveCounter::default(); 3],
            sweeps_done: 0,
        })
    }

    pub fn configuration(&self) -> &LoopConfiguration {
        &self.config
    }

    pub fn counters(&self) -> [MoveCounter; 3] {
        self.counters
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    /// One visit of every site with a randomly chosen move kind.
    pub fn sweep(&mut self) {
        for site in 0..self.config.volume().sites() {
            let u = self.variates.uniform();
            let mix = self.settings.mix;
            if u < mix.redraw {
                self.redraw(site);
            } else if u < mix.redraw + mix.nudge {
                self.nudge_all(site);
            } else {
                self.flip(site);
            }
        }
        self.sweeps_done += 1;
    }

    fn redraw(&mut self, site: usize) {
        for z in self.normals.iter_mut() {
            *z = self.variates.normal();
        }
        let proposal = self.factory.synthesize(&self.normals).expect("buffer sized to slices");
        let old = site_action(&self.config, &self.params, &self.hood, site, self.config.site(site).values());
        let new = site_action(&self.config, &self.params, &self.hood, site, proposal.values());
        let accepted = metropolis_accept(new - old, self.variates.uniform());
        if accepted {
            *self.config.site_mut(site) = proposal;
        }
        self.counters[REDRAW].record(accepted);
    }

    fn flip(&mut self, site: usize) {
        let current = self.config.site(site).clone();
        let flipped = current.negated();
        // the Gaussian energy is even, so only the interaction changes
        let old = site_action(&self.config, &self.params, &self.hood, site, current.values());
        let new = site_action(&self.config, &self.params, &self.hood, site, flipped.values());
        let accepted = metropolis_accept(new - old, self.variates.uniform());
        if accepted {
            *self.config.site_mut(site) = flipped;
        }
        self.counters[FLIP].record(accepted);
    }

    fn nudge_all(&mut self, site: usize) {
        for slice in 0..self.config.slices() {
            let delta = self.settings.nudge_scale * self.variates.normal();
            let energy = self.nudge_energy_change(site, slice, delta);
            let accepted = metropolis_accept(energy, self.variates.uniform());
            if accepted {
                self.config.site_mut(site).values_mut()[slice] += delta;
            }
            self.counters[NUDGE].record(accepted);
        }
    }

    /// Change of `x^T C^{-1} x / 2 + I` when slice `slice` of `site`
    /// moves by `delta`.
    pub fn nudge_energy_change(&self, site: usize, slice: usize, delta: f64) -> f64 {
        let values = self.config.site(site).values();
        let x = values[slice];
        let step = self.config.beta() / self.config.slices() as f64;
        let mut field = 0.0;
        for &t in self.hood.inside(site) {
            field += self.config.site(t).values()[slice];
        }
        let outside = self.hood.outside(site);
        if outside > 0 {
            field += outside as f64 * self.config.boundary().exterior_value();
        }
        let potential = self.params.anharmonic_potential(x + delta) - self.params.anharmonic_potential(x);
        let interaction = step * (potential - self.params.j * delta * field);
        let gaussian =
            delta * self.factory.precision_apply_at(values, slice) + 0.5 * delta * delta * self.factory.precision_diagonal();
        interaction + gaussian
    }

    /// Burn-in followed by recorded sweeps; every `thinning`-th recorded
    /// sweep is shown to all observers.
    pub fn run(&mut self, observers: &mut [&mut dyn Observer]) -> ChainSummary {
        for _ in 0..self.settings.burn_in {
            self.sweep();
        }
        let mut n_samples = 0;
        for s in 1..=self.settings.sweeps {
            self.sweep();
            if s % self.settings.thinning == 0 {
                n_samples += 1;
                for o in observers.iter_mut() {
                    o.observe(&self.config);
                }
            }
        }
        self.summary(n_samples)
    }

    fn summary(&self, n_samples: u64) -> ChainSummary {
        ChainSummary {
            counters: self.counters,
            acceptance: AcceptanceRates {
                redraw: self.counters[REDRAW].rate(),
                nudge: self.counters[NUDGE].rate(),
                flip: self.counters[FLIP].rate(),
            },
            n_samples,
            settings: self.settings,
            settings_digest: self.settings.digest(),
        }
    }

    /// Checkpoint: the loop record followed by `ANHCKPT1`, the ChaCha seed,
    /// stream and word position, the mirror flag and the sweep count.
    pub fn write_checkpoint<W: Write>(&self, out: &mut W) -> Result<()> {
        write_configuration(&self.config, out)?;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&self.variates.rng.get_seed())?;
        out.write_all(&self.variates.rng.get_stream().to_le_bytes())?;
        out.write_all(&self.variates.rng.get_word_pos().to_le_bytes())?;
        out.write_all(&[u8::from(self.variates.mirrored)])?;
        out.write_all(&self.sweeps_done.to_le_bytes())?;
        Ok(())
    }

    /// Restores a chain written by [`Chain::write_checkpoint`]; the random
    /// stream continues exactly where it stopped.
    pub fn resume<R: Read>(
        input: &mut R,
        params: &OscillatorParams,
        factory: &GaussianLoopFactory,
        settings: &ChainSettings,
    ) -> Result<Self> {
        let config = read_configuration(input)?;
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("missing checkpoint trailer".into()));
        }
        let mut seed = [0u8; 32];
        input.read_exact(&mut seed)?;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let stream = u64::from_le_bytes(b8);
        let mut b16 = [0u8; 16];
        input.read_exact(&mut b16)?;
        let word_pos = u128::from_le_bytes(b16);
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        input.read_exact(&mut b8)?;
        let sweeps_done = u64::from_le_bytes(b8);
        let mut chain = Self::build(config, params, factory, settings, flag[0] != 0)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        chain.variates.rng = rng;
        chain.sweeps_done = sweeps_done;
        Ok(chain)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ANHCKPT1";

/// Runs one chain from `initial` and feeds `observers`.
pub fn metropolis_chain(
    initial: LoopConfiguration,
    params: &OscillatorParams,
    factory: &GaussianLoopFactory,
    settings: &ChainSettings,
    observers: &mut [&mut dyn Observer],
) -> Result<ChainSummary> {
    let mut chain = Chain::new(initial, params, factory, settings)?;
    Ok(chain.run(observers))
}

/// Settings for chain `index` of a parallel run: same master seed, own stream.
pub fn split_settings(master: &ChainSettings, index: u64) -> ChainSettings {
    ChainSettings {
        stream: master.stream.wrapping_add(index),
        ..*master
    }
}

/// Runs `chains` independent chains in parallel from the same start, chain
/// `i` on stream `master.stream + i`, each with its own observer.
pub fn parallel_chains<O, F>(
    initial: &LoopConfiguration,
    params: &OscillatorParams,
    factory: &GaussianLoopFactory,
    master: &ChainSettings,
    chains: usize,
    make_observer: F,
) -> Result<Vec<(O, ChainSummary)>>
where
    O: Observer + Send,
    F: Fn() -> Result<O> + Sync,
{
    (0..chains as u64)
        .into_par_iter()
        .map(|i| {
            let mut observer = make_observer()?;
            let settings = split_settings(master, i);
            let summary = metropolis_chain(initial.clone(), params, factory, &settings, &mut [&mut observer])?;
            Ok((observer, summary))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::{action, BoundaryCondition, LatticeBox, TemperatureLoop};

    fn setup(boundary: BoundaryCondition) -> (OscillatorParams, GaussianLoopFactory, LoopConfiguration) {
        let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.4, 2, 2.0).unwrap();
        let f = GaussianLoopFactory::for_params(&p, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let volume = LatticeBox::new(vec![2, 2]).unwrap();
        let loops = (0..4).map(|_| f.sample(&mut rng)).collect();
        (p, f, LoopConfiguration::new(volume, loops, boundary).unwrap())
    }

    #[test]
    fn settings_validation() {
        let mut s = ChainSettings::default();
        assert!(s.validate().is_ok());
        s.thinning = 0;
        assert!(s.validate().unwrap_err().is_config());
        let s = ChainSettings {
            mix: ProposalMix {
                redraw: 0.5,
                nudge: 0.6,
                flip: 0.0,
            },
            ..ChainSettings::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let (p, f, c) = setup(BoundaryCondition::Free);
        let other = GaussianLoopFactory::for_params(&p, 6).unwrap();
        assert!(Chain::new(c.clone(), &p, &other, &ChainSettings::default()).is_err());
        assert!(Chain::new(c.clone(), &p.with_beta(3.0), &f, &ChainSettings::default()).is_err());
        let p1 = OscillatorParams { d: 1, ..p };
        assert!(Chain::new(c, &p1, &f, &ChainSettings::default()).is_err());
    }

    #[test]
    fn nudge_energy_matches_full_evaluation() {
        let (p, f, c) = setup(BoundaryCondition::PlusClamped(0.7));
        let chain = Chain::new(c.clone(), &p, &f, &ChainSettings::default()).unwrap();
        let total = |cfg: &LoopConfiguration| -> f64 {
            let gaussian: f64 = cfg.loops().iter().map(|l| f.gaussian_energy(l.values())).sum();
            gaussian + action(cfg, &p).unwrap()
        };
        for (site, slice, delta) in [(0, 3, 0.4), (3, 0, -1.1), (2, 7, 0.05)] {
            let mut moved = c.clone();
            let mut values = moved.site(site).values().to_vec();
            values[slice] += delta;
            moved.set_site(site, TemperatureLoop::new(values, p.beta).unwrap()).unwrap();
            let full = total(&moved) - total(&c);
            let local = chain.nudge_energy_change(site, slice, delta);
            assert!((full - local).abs() < 1e-10 * full.abs().max(1.0), "{full} vs {local}");
        }
    }

    #[test]
    fn detailed_balance_single_site_two_slices() {
        // symmetric proposal: pi(x) a(x->y) must equal pi(y) a(y->x)
        let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.4, 1, 1.0).unwrap();
        let f = GaussianLoopFactory::for_params(&p, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let volume = LatticeBox::new(vec![1]).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let slice = rng.random_range(0..2);
            let delta = rng.random_range(-1.0..1.0);
            let mut y = x.clone();
            y[slice] += delta;
            let cx = LoopConfiguration::new(volume.clone(), vec![TemperatureLoop::new(x.clone(), 1.0).unwrap()], BoundaryCondition::Free).unwrap();
            let cy = LoopConfiguration::new(volume.clone(), vec![TemperatureLoop::new(y.clone(), 1.0).unwrap()], BoundaryCondition::Free).unwrap();
            let log_target = |c: &LoopConfiguration| -(f.gaussian_energy(c.site(0).values()) + action(c, &p).unwrap());
            let forward = Chain::new(cx.clone(), &p, &f, &ChainSettings::default()).unwrap().nudge_energy_change(0, slice, delta);
            let backward = Chain::new(cy.clone(), &p, &f, &ChainSettings::default()).unwrap().nudge_energy_change(0, slice, -delta);
            let a_xy = (-forward).exp().min(1.0);
            let a_yx = (-backward).exp().min(1.0);
            let ratio = (log_target(&cy) - log_target(&cx)).exp();
            assert!((a_xy / a_yx / ratio - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_redraws_always_accepted() {
        let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2.0).unwrap().harmonic();
        let f = GaussianLoopFactory::for_params(&p, 8).unwrap();
        let start = LoopConfiguration::uniform(LatticeBox::new(vec![3]).unwrap(), 0.0, 8, 2.0, BoundaryCondition::Free).unwrap();
        let settings = ChainSettings {
            sweeps: 200,
            burn_in: 0,
            mix: ProposalMix::REDRAW_ONLY,
            ..ChainSettings::default()
        };
        let summary = metropolis_chain(start, &p, &f, &settings, &mut []).unwrap();
        assert_eq!(summary.counters[0].proposed, 600);
        assert_eq!(summary.acceptance.redraw, Some(1.0));
        assert_eq!(summary.n_samples, 200);
    }

    #[test]
    fn mirrored_chain_is_exact_flip() {
        let (p, f, c) = setup(BoundaryCondition::PlusClamped(0.9));
        let settings = ChainSettings {
            sweeps: 50,
            burn_in: 0,
            seed: 11,
            ..ChainSettings::default()
        };
        let mut plus = Chain::new(c.clone(), &p, &f, &settings).unwrap();
        let mut minus = Chain::mirrored_of(&c, &p, &f, &settings).unwrap();
        for _ in 0..50 {
            plus.sweep();
            minus.sweep();
            assert_eq!(minus.configuration(), &plus.configuration().mirrored());
        }
        assert_eq!(plus.counters(), minus.counters());
    }

    #[test]
    fn checkpoint_resumes_stream() {
        let (p, f, c) = setup(BoundaryCondition::Free);
        let settings = ChainSettings {
            seed: 3,
            ..ChainSettings::default()
        };
        let mut a = Chain::new(c, &p, &f, &settings).unwrap();
        for _ in 0..5 {
            a.sweep();
        }
        let mut bytes = Vec::new();
        a.write_checkpoint(&mut bytes).unwrap();
        let mut b = Chain::resume(&mut bytes.as_slice(), &p, &f, &settings).unwrap();
        assert_eq!(b.sweeps_done(), 5);
        for _ in 0..5 {
            a.sweep();
            b.sweep();
        }
        assert_eq!(a.configuration(), b.configuration());
    }
}
