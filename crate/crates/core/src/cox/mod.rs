//! Step-noise Cox process.
//!
//! The stress perturbation is a train of rectangular pulses: pulses arrive as
//! a homogeneous Poisson stream with rate `ρ`, each lasts `τ` hours and has an
//! i.i.d. height `ν ~ G`. The failure intensity is
//!
//! ```text
//! λ(t) = [λ_0 + κ·Σ_{k: S_k ≤ t < S_k+τ} ν_k]·t^(−α)
//! ```
//!
//! and failures form a Poisson process conditionally on the realised
//! intensity (a doubly stochastic Poisson process). Overlapping pulses add.
//!
//! Model assumptions:
//! * `G` has bounded support, so `E_G[e^{cν}]` is finite for every `c`.
//! * The bracket `λ_0 + κ·Σν` is floored at [`POSITIVITY_FLOOR`]; paths that
//!   hit the floor are counted ([`IntensityPath::clamped_segments`]). The
//!   closed forms in [`analytics`] ignore the floor.

pub mod analytics;
mod path;

pub use analytics::{
    cf_count, cf_count_first_order, cf_cumulative, cf_cumulative_first_order, expected_cumulative,
    expected_cumulative_first_order, expected_intensity, laplace_functional, prob_k_failures,
    survival_exact, survival_first_order, FlaggedProbability,
};
pub use path::{CumulativeIntensity, IntensityPath, PathSegment};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss_legendre_32, QuadratureError};
use crate::stress::{ComponentParams, Linearization, StressPoint};

/// Lower bound on the rate bracket `λ_0 + κ·Σν`, failures/hour.
pub const POSITIVITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoxError {
    #[error("invalid step-noise parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("step distribution: {0}")]
    InvalidDistribution(String),

    #[error("time must be positive, got {0} h")]
    NonPositiveTime(f64),

    #[error("interval start {start} must be non-negative and before end {end}")]
    InvalidInterval { start: f64, end: f64 },

    #[error("arrival times must be strictly increasing and positive (index {index})")]
    UnorderedArrivals { index: usize },

    #[error("{arrivals} arrival times but {magnitudes} magnitudes")]
    LengthMismatch { arrivals: usize, magnitudes: usize },

    #[error("Laplace functional diverges at t = {t} h (pulse exponent grows without bound)")]
    Divergent { t: f64 },

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, CoxError>;

/// Distribution `G` of pulse heights (bounded support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDistribution {
    Degenerate(f64),
    Uniform { low: f64, high: f64 },
    /// `(value, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
}

impl StepDistribution {
    /// `G = δ(ν − 0)`: the noise term vanishes.
    pub fn suppressed() -> Self {
        StepDistribution::Degenerate(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoxError::InvalidDistribution(msg));
        match self {
            StepDistribution::Degenerate(c) if !c.is_finite() => bad(format!("point {c} is not finite")),
            StepDistribution::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                bad(format!("uniform bounds [{low}, {high}] are not an interval"))
            }
            StepDistribution::Discrete(atoms) => {
                if atoms.is_empty() {
                    return bad("discrete distribution has no atoms".into());
                }
                if atoms
                    .iter()
                    .any(|&(v, p)| !v.is_finite() || !(p >= 0.0) || !p.is_finite())
                {
                    return bad("atoms need finite values and non-negative weights".into());
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("weights sum to {total}, expected 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            StepDistribution::Degenerate(c) => *c,
            StepDistribution::Uniform { low, high } => 0.5 * (low + high),
            StepDistribution::Discrete(atoms) => atoms.iter().map(|(v, p)| v * p).sum(),
        }
    }

    /// Largest `|ν|` in the support.
    pub fn max_abs(&self) -> f64 {
        match self {
            StepDistribution::Degenerate(c) => c.abs(),
            StepDistribution::Uniform { low, high } => low.abs().max(high.abs()),
            StepDistribution::Discrete(atoms) => {
                atoms.iter().map(|(v, _)| v.abs()).fold(0.0, f64::max)
            }
        }
    }

    /// Smallest value in the support.
    pub fn min_value(&self) -> f64 {
        match self {
            StepDistribution::Degenerate(c) => *c,
            StepDistribution::Uniform { low, .. } => *low,
            StepDistribution::Discrete(atoms) => {
                atoms.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// True when every draw is exactly zero.
    pub fn is_suppressed(&self) -> bool {
        match self {
            StepDistribution::Degenerate(c) => *c == 0.0,
            StepDistribution::Uniform { .. } => false,
            StepDistribution::Discrete(atoms) => atoms.iter().all(|&(v, p)| v == 0.0 || p == 0.0),
        }
    }

    /// `E_G[e^{xν}] − 1`, accurate for small `|x|`.
    pub fn mgf_minus_one(&self, x: Complex64) -> Complex64 {
        match self {
            StepDistribution::Degenerate(c) => expm1(x * c),
            StepDistribution::Discrete(atoms) => atoms.iter().map(|&(v, p)| expm1(x * v) * p).sum(),
            StepDistribution::Uniform { low, high } => {
                let width = high - low;
                let spread = x.norm() * width;
                // each panel keeps |x|·h ≤ 4, where the 32-point rule is exact
                // to machine precision for the entire integrand
                let panels = (spread / 4.0).ceil().max(1.0);
                if panels > 10_000.0 {
                    let e = |v: f64| (x * v).exp();
                    return (e(*high) - e(*low)) / (x * width) - 1.0;
                }
                let panels = panels as usize;
                let (nodes, weights) = gauss_legendre_32();
                let h = width / panels as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    let mid = low + (p as f64 + 0.5) * h;
                    for (z, w) in nodes.iter().zip(weights) {
                        acc += expm1(x * (mid + 0.5 * h * z)) * *w;
                    }
                }
                acc * (0.5 / panels as f64)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            StepDistribution::Degenerate(c) => *c,
            StepDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            StepDistribution::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

/// `e^z − 1` without cancellation for small `|z|`.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let half_sin = (0.5 * b).sin();
    let cos_m1 = -2.0 * half_sin * half_sin;
    Complex64::new(a.exp_m1() * b.cos() + cos_m1, a.exp() * b.sin())
}

/// Parameters of the stochastic intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepNoiseConfig {
    /// Rate scale `λ_0` multiplying `t^(−α)`, failures/hour.
    pub lambda0: f64,
    /// Perturbation gain `κ`, failures/hour per unit pulse height.
    pub kappa: f64,
    /// Pulse arrival rate `ρ`, 1/hour.
    pub rho: f64,
    /// Pulse duration `τ`, hours.
    pub tau: f64,
    pub steps: StepDistribution,
    /// Weibull shape offset in `[0, 1)`.
    pub alpha: f64,
}

impl StepNoiseConfig {
    /// Noise model linearized around `nominal`: `λ_0 = λ_b·A(nominal)` and
    /// `κ = λ_0·k/v*` (voltage-driven pulses).
    pub fn linearized(
        params: &ComponentParams,
        nominal: StressPoint,
        rho: f64,
        tau: f64,
        steps: StepDistribution,
    ) -> std::result::Result<Self, crate::stress::StressError> {
        let lin = Linearization::at(nominal, params)?;
        Ok(Self {
            lambda0: lin.nominal_rate(),
            kappa: lin.voltage_gain(),
            rho,
            tau,
            steps,
            alpha: params.alpha,
        })
    }

    /// BJT at 30 V / 333 K with uniform ±5 V pulses, `ρ = 0.05/h`, `τ = 4 h`.
    pub fn bjt_default() -> Self {
        let nominal = StressPoint {
            v: 30.0,
            temperature: 333.0,
        };
        Self::linearized(
            &ComponentParams::bjt(),
            nominal,
            0.05,
            4.0,
            StepDistribution::Uniform {
                low: -5.0,
                high: 5.0,
            },
        )
        .expect("BJT nominal point is valid")
    }

    pub fn without_noise(&self) -> Self {
        Self {
            rho: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(CoxError::InvalidParameter { name, value, reason })
            }
        }
        check(self.lambda0 > 0.0, "lambda0", self.lambda0, "must be > 0")?;
        check(self.kappa.is_finite(), "kappa", self.kappa, "must be finite")?;
        check(self.rho >= 0.0, "rho", self.rho, "must be >= 0")?;
        check(self.tau > 0.0, "tau", self.tau, "must be > 0")?;
        check(
            (0.0..1.0).contains(&self.alpha),
            "alpha",
            self.alpha,
            "must lie in [0, 1)",
        )?;
        self.steps.validate()
    }

    pub(crate) fn shape(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// `∫_lo^hi u^(−α) du` for `0 ≤ lo ≤ hi`.
pub(crate) fn power_integral(lo: f64, hi: f64, alpha: f64) -> f64 {
    let beta = 1.0 - alpha;
    if alpha == 0.0 {
        return hi - lo;
    }
    if lo <= 0.0 {
        return hi.powf(beta) / beta;
    }
    lo.powf(beta) * (beta * ((hi - lo) / lo).ln_1p()).exp_m1() / beta
}

/// Contribution weight of a unit pulse arriving at `k` to `Λ(t)`:
/// `∫_k^{min(k+τ, t)} u^(−α) du`.
pub(crate) fn window_weight(k: f64, t: f64, tau: f64, alpha: f64) -> f64 {
    if k >= t {
        return 0.0;
    }
    power_integral(k, (k + tau).min(t), alpha)
}
