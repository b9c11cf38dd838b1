//! On-line residual life and mean residual life (MRL) under a bathtub hazard.
//!
//! At every observation the estimator converts the measured stress into a
//! base aging factor `Ā_a(n)`, accumulates effective age and recomputes the
//! modified rates
//!
//! ```text
//! λ_s   = λ_b·Ā^(1−α)·T_0^α        κ_s   = λ_s·(1−α)·sensitivity
//! λ_s⁰  = λ_b·Ā                    κ_s⁰  = λ_s⁰·sensitivity
//! T_age = Σ_k T_smp·Ā(k)           T_t   = s + (T_0 − T_age)/Ā(n)
//! ```
//!
//! Before the transition time `T_t` the hazard follows the accelerated
//! Weibull (infant-mortality) branch; afterwards it is constant. The residual
//! life `Rl{x|s} = Pr{T > s+x | T > s}` also carries the step-noise term
//! driven by the observed fluctuation mean `M` and the predicted mean
//! `E_G[ν]`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::{FlaggedProbability, StepNoiseConfig};
use crate::stress::{base_aging_factor, ComponentParams, StressError, StressPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrlError {
    #[error("observation time {t} h does not advance past {previous} h")]
    NonMonotoneTime { previous: f64, t: f64 },

    #[error("look-ahead must be non-negative, got {0} h")]
    NegativeHorizon(f64),

    #[error("observation time must be positive, got {0} h")]
    NonPositiveTime(f64),

    #[error("Riemann step must be positive and finite, got {0} h")]
    InvalidStep(f64),

    #[error("window length must be at least one sample")]
    EmptyWindow,

    #[error("post-transition rate λ_s⁰ + ρκ_s⁰τE_G[ν] = {0:e} is not positive")]
    NonPositiveDenominator(f64),

    #[error(transparent)]
    Stress(#[from] StressError),
}

pub type Result<T> = std::result::Result<T, MrlError>;

/// Which expected-fluctuation / aging-factor rule the estimator follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// `E_G[ν]` is the latest fluctuation; `Ā` from the latest sample.
    LastSample,
    /// `E_G[ν]` is the moving-window mean; `Ā` from the latest sample.
    WindowMean,
    /// `E_G[ν]` and `Ā` both from moving-window means.
    Smoothed,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::LastSample,
        ModelVariant::WindowMean,
        ModelVariant::Smoothed,
    ];

    pub fn number(self) -> u8 {
        match self {
            ModelVariant::LastSample => 1,
            ModelVariant::WindowMean => 2,
            ModelVariant::Smoothed => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ModelVariant::LastSample),
            2 => Some(ModelVariant::WindowMean),
            3 => Some(ModelVariant::Smoothed),
            _ => None,
        }
    }
}

/// Stress channel that carries the step noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingChannel {
    #[default]
    Voltage,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Fluctuations are measured against this point: `ν(k) = v(k) − v_nominal`.
    pub nominal: StressPoint,
    /// Moving-average window `N`, samples.
    pub window: usize,
    pub variant: ModelVariant,
    pub channel: DrivingChannel,
}

impl EstimatorConfig {
    /// One week of hourly samples.
    pub const DEFAULT_WINDOW: usize = 168;

    pub fn new(nominal: StressPoint, variant: ModelVariant) -> Self {
        Self {
            nominal,
            window: Self::DEFAULT_WINDOW,
            variant,
            channel: DrivingChannel::Voltage,
        }
    }
}

/// Fluctuation statistics feeding the residual life.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluctuationStats {
    /// Mean of all observed fluctuations, `M`.
    pub observed_mean: f64,
    /// Predicted mean of future fluctuations, `E_G[ν]`.
    pub expected: f64,
}

/// Rates of the bathtub model at one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedRates {
    /// Weibull-branch rate scale, failures/hour.
    pub lambda_s: f64,
    /// Constant-branch rate, failures/hour.
    pub lambda_s0: f64,
    pub kappa_s_v: f64,
    pub kappa_s_t: f64,
    pub kappa_s0_v: f64,
    pub kappa_s0_t: f64,
    /// Base aging factor `Ā_a`.
    pub aging_factor: f64,
    /// Transition time `T_t`, hours.
    pub transition_time: f64,
}

impl ModifiedRates {
    /// Rates for aging factor `aging` observed at `temperature`, with the
    /// transition time already known.
    pub fn new(aging: f64, temperature: f64, transition_time: f64, params: &ComponentParams) -> Self {
        let alpha = params.alpha;
        let lambda_s = params.lambda_b * aging.powf(1.0 - alpha) * params.t0.powf(alpha);
        let lambda_s0 = params.lambda_b * aging;
        let sv = params.voltage_sensitivity();
        let st = params.thermal_sensitivity(temperature);
        Self {
            lambda_s,
            lambda_s0,
            kappa_s_v: lambda_s * (1.0 - alpha) * sv,
            kappa_s_t: lambda_s * (1.0 - alpha) * st,
            kappa_s0_v: lambda_s0 * sv,
            kappa_s0_t: lambda_s0 * st,
            aging_factor: aging,
            transition_time,
        }
    }

    /// Rates for a component held at `stress` since installation.
    pub fn constant_stress(s: f64, stress: StressPoint, params: &ComponentParams) -> Result<Self> {
        let aging = base_aging_factor(stress, params)?;
        let mut clock = AgingClock::default();
        let t_t = clock.tick(s, aging);
        Ok(Self::new(aging, stress.temperature, t_t, params))
    }

    fn kappa_weibull(&self, channel: DrivingChannel) -> f64 {
        match channel {
            DrivingChannel::Voltage => self.kappa_s_v,
            DrivingChannel::Temperature => self.kappa_s_t,
        }
    }

    fn kappa_constant(&self, channel: DrivingChannel) -> f64 {
        match channel {
            DrivingChannel::Voltage => self.kappa_s0_v,
            DrivingChannel::Temperature => self.kappa_s0_t,
        }
    }
}

/// Calendar time and accumulated effective age.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgingClock {
    /// Calendar time of the latest observation, hours.
    pub s: f64,
    /// Effective age `T_age`, hours.
    pub age: f64,
}

impl AgingClock {
    /// Advance by `dt` hours at aging factor `aging` and return the
    /// transition time `s + (T_0 − T_age)/Ā`, with `T_0 = 1e4 h`.
    pub fn tick(&mut self, dt: f64, aging: f64) -> f64 {
        self.tick_with(dt, aging, 1e4)
    }

    pub fn tick_with(&mut self, dt: f64, aging: f64, t0: f64) -> f64 {
        self.s += dt;
        self.age += dt * aging;
        self.transition_time(aging, t0)
    }

    pub fn transition_time(&self, aging: f64, t0: f64) -> f64 {
        self.s + (t0 - self.age) / aging
    }
}

#[derive(Debug, Clone, Copy)]
struct WindowSample {
    nu: f64,
    v: f64,
    temperature: f64,
}

/// Result of one [`EstimatorState::observe`] call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub s: f64,
    pub rates: ModifiedRates,
    pub stats: FluctuationStats,
}

/// Streaming state of the on-line estimator (one component, one variant).
#[derive(Debug, Clone)]
pub struct EstimatorState {
    config: EstimatorConfig,
    n: u64,
    clock: AgingClock,
    sum_nu: f64,
    window: VecDeque<WindowSample>,
}

impl EstimatorState {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        if config.window == 0 {
            return Err(MrlError::EmptyWindow);
        }
        config.nominal.validate()?;
        Ok(Self {
            config,
            n: 0,
            clock: AgingClock::default(),
            sum_nu: 0.0,
            window: VecDeque::with_capacity(config.window),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Number of observations so far.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.clock.s
    }

    pub fn age(&self) -> f64 {
        self.clock.age
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    fn fluctuation(&self, stress: StressPoint) -> f64 {
        match self.config.channel {
            DrivingChannel::Voltage => stress.v - self.config.nominal.v,
            DrivingChannel::Temperature => stress.temperature - self.config.nominal.temperature,
        }
    }

    fn window_mean(&self, f: impl Fn(&WindowSample) -> f64) -> f64 {
        self.window.iter().map(f).sum::<f64>() / self.window.len() as f64
    }

    /// Ingest the stress averaged over `(s_prev, t]` and recompute the rates.
    pub fn observe(&mut self, t: f64, stress: StressPoint, params: &ComponentParams) -> Result<Observation> {
        if !(t > self.clock.s) || !t.is_finite() {
            return Err(MrlError::NonMonotoneTime {
                previous: self.clock.s,
                t,
            });
        }
        stress.validate()?;
        let nu = self.fluctuation(stress);
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(WindowSample {
            nu,
            v: stress.v,
            temperature: stress.temperature,
        });
        self.sum_nu += nu;
        self.n += 1;

        let observed_mean = self.sum_nu / self.n as f64;
        let expected = match self.config.variant {
            ModelVariant::LastSample => nu,
            ModelVariant::WindowMean | ModelVariant::Smoothed => self.window_mean(|w| w.nu),
        };
        let aging_point = match self.config.variant {
            ModelVariant::LastSample | ModelVariant::WindowMean => stress,
            ModelVariant::Smoothed => StressPoint {
                v: self.window_mean(|w| w.v),
                temperature: self.window_mean(|w| w.temperature),
            },
        };
        let aging = base_aging_factor(aging_point, params)?;
        let transition = self.clock.tick_with(t - self.clock.s, aging, params.t0);
        Ok(Observation {
            s: self.clock.s,
            rates: ModifiedRates::new(aging, aging_point.temperature, transition, params),
            stats: FluctuationStats {
                observed_mean,
                expected,
            },
        })
    }
}

/// Inputs shared by the residual-life and MRL evaluations at one observation.
#[derive(Debug, Clone, Copy)]
pub struct ResidualLifeModel<'a> {
    pub rates: &'a ModifiedRates,
    pub stats: FluctuationStats,
    pub noise: &'a StepNoiseConfig,
    pub params: &'a ComponentParams,
    pub channel: DrivingChannel,
}

impl ResidualLifeModel<'_> {
    fn beta(&self) -> f64 {
        1.0 - self.params.alpha
    }

    /// Exponent accumulated on the Weibull branch between `s` and `end`.
    fn weibull_exponent(&self, s: f64, end: f64) -> f64 {
        let beta = self.beta();
        let (sb, eb) = (s.powf(beta), end.powf(beta));
        let noise = self.noise.rho * self.rates.kappa_weibull(self.channel) * self.noise.tau;
        ((eb - sb) * self.rates.lambda_s
            + noise * (eb * self.stats.expected - sb * self.stats.observed_mean))
            / beta
    }

    fn constant_rate(&self) -> f64 {
        self.rates.lambda_s0
            + self.noise.rho * self.rates.kappa_constant(self.channel) * self.noise.tau * self.stats.expected
    }

    /// Residual life with the Weibull hazard throughout (no transition).
    pub fn weibull_residual(&self, x: f64, s: f64) -> f64 {
        (-self.weibull_exponent(s, x + s)).exp()
    }

    fn evaluate(&self, x: f64, s: f64) -> f64 {
        let t_t = self.rates.transition_time;
        if s >= t_t {
            let noise = self.noise.rho * self.rates.kappa_constant(self.channel) * self.noise.tau;
            (-x * self.rates.lambda_s0).exp()
                * (-noise * ((x + s) * self.stats.expected - s * self.stats.observed_mean)).exp()
        } else if x + s <= t_t {
            self.weibull_residual(x, s)
        } else {
            (-self.weibull_exponent(s, t_t)).exp() * (-(x + s - t_t) * self.constant_rate()).exp()
        }
    }

    /// `Rl{x|s}` on the bathtub hazard. Values outside `[0, 1]` (possible
    /// when `E_G[ν] < M` or `E_G[ν] < 0`) are flagged, not clamped.
    pub fn residual_life(&self, x: f64, s: f64) -> Result<FlaggedProbability> {
        if x < 0.0 || x.is_nan() {
            return Err(MrlError::NegativeHorizon(x));
        }
        if !(s > 0.0) {
            return Err(MrlError::NonPositiveTime(s));
        }
        Ok(FlaggedProbability::new(self.evaluate(x, s)))
    }

    /// `μ(s) = ∫_0^∞ Rl{x|s} dx`: midpoint Riemann sum over `[0, T_t − s]`
    /// plus the closed-form constant-hazard tail.
    pub fn mean_residual_life(&self, s: f64, step: f64) -> Result<MrlValue> {
        if !(s > 0.0) {
            return Err(MrlError::NonPositiveTime(s));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(MrlError::InvalidStep(step));
        }
        let denominator = self.constant_rate();
        if !(denominator > 0.0) {
            return Err(MrlError::NonPositiveDenominator(denominator));
        }
        let t_t = self.rates.transition_time;
        let hours = if s < t_t {
            let span = t_t - s;
            let n = (span / step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            let head: f64 = (0..n).map(|i| self.weibull_residual((i as f64 + 0.5) * h, s)).sum::<f64>() * h;
            head + (-self.weibull_exponent(s, t_t)).exp() / denominator
        } else {
            let noise = self.noise.rho * self.rates.kappa_constant(self.channel) * self.noise.tau;
            (-s * noise * (self.stats.expected - self.stats.observed_mean)).exp() / denominator
        };
        Ok(MrlValue::capped(hours, self.params.mrl_cap))
    }
}

/// Mean residual life, hours, after the optional wear-out cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrlValue {
    pub hours: f64,
    pub clamped: bool,
    /// Value before the cap.
    pub uncapped: f64,
}

impl MrlValue {
    pub fn capped(hours: f64, cap: Option<f64>) -> Self {
        match cap {
            Some(cap) if hours > cap => Self {
                hours: cap,
                clamped: true,
                uncapped: hours,
            },
            _ => Self {
                hours,
                clamped: false,
                uncapped: hours,
            },
        }
    }
}

/// `Rl{x|s}` for the voltage-driven model.
pub fn residual_life(
    x: f64,
    s: f64,
    rates: &ModifiedRates,
    stats: FluctuationStats,
    noise: &StepNoiseConfig,
    params: &ComponentParams,
) -> Result<FlaggedProbability> {
    ResidualLifeModel {
        rates,
        stats,
        noise,
        params,
        channel: DrivingChannel::Voltage,
    }
    .residual_life(x, s)
}

/// `μ(s)` for the voltage-driven model with Riemann step `step` hours.
pub fn mrl(
    s: f64,
    rates: &ModifiedRates,
    stats: FluctuationStats,
    noise: &StepNoiseConfig,
    params: &ComponentParams,
    step: f64,
) -> Result<MrlValue> {
    ResidualLifeModel {
        rates,
        stats,
        noise,
        params,
        channel: DrivingChannel::Voltage,
    }
    .mean_residual_life(s, step)
}

/// Survival with independent voltage and temperature pulse trains whose
/// characteristic functions multiply:
/// `exp(−t^β·λ_0/β)·exp(−(ρ_vκ_vτ_vE[ν] + ρ_Tκ_Tτ_TE[T])·t^β/β)`.
pub fn combined_survival(
    t: f64,
    voltage_noise: &StepNoiseConfig,
    thermal_noise: &StepNoiseConfig,
) -> Result<FlaggedProbability> {
    if !(t > 0.0) {
        return Err(MrlError::NonPositiveTime(t));
    }
    let beta = 1.0 - voltage_noise.alpha;
    let tb = t.powf(beta) / beta;
    let drift = |n: &StepNoiseConfig| n.rho * n.kappa * n.tau * n.steps.mean();
    let value = (-tb * voltage_noise.lambda0).exp()
        * (-(drift(voltage_noise) + drift(thermal_noise)) * tb).exp();
    Ok(FlaggedProbability::new(value))
}
