//! Physical constants of the model and the spatial grid used to discretize
//! the single-site Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the quartic correction `V(q) = -b1 q^2 + b2 q^4` is active.
///
/// `Harmonic` switches `V` off everywhere (spectrum, action) so that the
/// closed-form harmonic oscillator can serve as a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    #[default]
    Anharmonic,
    Harmonic,
}

/// Model constants: mass, harmonic rigidity, quartic coefficients, pair
/// coupling, lattice dimension and inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub m: f64,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub j: f64,
    pub d: usize,
    pub beta: f64,
    #[serde(default)]
    pub mode: PotentialMode,
}

impl OscillatorParams {
    /// Validated constructor for the anharmonic model.
    pub fn new(m: f64, a: f64, b1: f64, b2: f64, j: f64, d: usize, beta: f64) -> Result<Self> {
        let p = OscillatorParams {
            m,
            a,
            b1,
            b2,
            j,
            d,
            beta,
            mode: PotentialMode::Anharmonic,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same parameters with the anharmonic term disabled.
    pub fn harmonic(self) -> Self {
        OscillatorParams {
            mode: PotentialMode::Harmonic,
            ..self
        }
    }

    pub fn with_mass(self, m: f64) -> Self {
        OscillatorParams { m, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        OscillatorParams { beta, ..self }
    }

    pub fn with_coupling(self, j: f64) -> Self {
        OscillatorParams { j, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("model.m", self.m, "mass must be positive"),
            ("model.a", self.a, "harmonic rigidity must be positive"),
            (
                "model.b1",
                self.b1,
                "quartic potential requires b1 > 0 in V(q) = -b1 q^2 + b2 q^4",
            ),
            (
                "model.b2",
                self.b2,
                "quartic potential requires b2 > 0 in V(q) = -b1 q^2 + b2 q^4",
            ),
            ("model.beta", self.beta, "inverse temperature must be positive"),
        ];
        for (key, value, message) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(key, format!("{message} (got {value})")));
            }
        }
        if !(self.j.is_finite() && self.j >= 0.0) {
            return Err(Error::config(
                "model.J",
                format!("pair interaction intensity must be nonnegative (got {})", self.j),
            ));
        }
        if self.d == 0 {
            return Err(Error::config("model.d", "lattice dimension must be at least 1"));
        }
        Ok(())
    }

    pub fn is_harmonic(&self) -> bool {
        self.mode == PotentialMode::Harmonic
    }

    /// Anharmonic correction `V(q)`; identically zero in harmonic mode.
    #[inline]
    pub fn anharmonic_potential(&self, q: f64) -> f64 {
        match self.mode {
            PotentialMode::Anharmonic => {
                let q2 = q * q;
                -self.b1 * q2 + self.b2 * q2 * q2
            }
            PotentialMode::Harmonic => 0.0,
        }
    }

    /// Full single-site potential `(a/2) q^2 + V(q)`.
    #[inline]
    pub fn potential(&self, q: f64) -> f64 {
        0.5 * self.a * q * q + self.anharmonic_potential(q)
    }

    /// `upsilon = (2 b1 - a) / (12 b2)`.
    pub fn upsilon(&self) -> f64 {
        (2.0 * self.b1 - self.a) / (12.0 * self.b2)
    }

    /// Two wells iff `b1 > a/2` (and the quartic term is switched on).
    pub fn is_double_well(&self) -> bool {
        !self.is_harmonic() && self.b1 > 0.5 * self.a
    }

    /// Coupling of one oscillator to all of its `2d` neighbours.
    pub fn j_hat(&self) -> f64 {
        2.0 * self.d as f64 * self.j
    }

    /// Harmonic level spacing `sqrt(a/m)`.
    pub fn harmonic_gap(&self) -> f64 {
        (self.a / self.m).sqrt()
    }

    /// `4 m upsilon^2 J_hat`, the left side of the phase-transition criterion.
    pub fn transition_strength(&self) -> f64 {
        let u = self.upsilon();
        4.0 * self.m * u * u * self.j_hat()
    }

    /// Upper bound `1/(4 m upsilon^2)` on the effective rigidity.
    pub fn rigidity_bound(&self) -> f64 {
        let u = self.upsilon();
        1.0 / (4.0 * self.m * u * u)
    }
}

/// Uniform grid on `[-L, L]` with `N` interior nodes and Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        let g = GridSpec { half_width, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::config(
                "grid.half_width",
                format!("half-width must be positive (got {})", self.half_width),
            ));
        }
        if self.points < 3 {
            return Err(Error::config(
                "grid.points",
                format!("need at least 3 interior points (got {})", self.points),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points as f64 + 1.0)
    }

    /// Position of interior node `i` (0-based).
    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 1.0) * self.spacing()
    }
}
