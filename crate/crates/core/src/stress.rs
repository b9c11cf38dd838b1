//! Deterministic stress-acceleration factors for a single component.
//!
//! The operational failure rate of a component under electrical and thermal
//! stress is modelled as
//!
//! ```text
//! A_e = max{1, c·exp(k·v / v*)}                 electrical factor
//! A_T = exp((E_a / K_b)·(1/T_ref − 1/T_o))      Arrhenius thermal factor
//! A_a = (A_T·A_e·A_env)^(1−α)                   acceleration factor
//! λ   = A_a·T_0^α·λ_b                           Weibull-branch rate scale
//! ```
//!
//! with `c = 0.47`, `k = 3` for the bipolar transistor profile that ships as
//! the default. The electrical law is a per-component setting
//! ([`ElectricalModel`]) because other part families use other constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Boltzmann constant in eV/K (CODATA 2018).
pub const BOLTZMANN_EV_PER_K: f64 = 8.617_333_262e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StressError {
    #[error("invalid component parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("voltage must be finite and non-negative, got {0} V")]
    InvalidVoltage(f64),

    #[error("time must be positive, got {0} h")]
    NonPositiveTime(f64),

    #[error("Weibull and exponential branches never meet on [1, T0]")]
    NoTransition,
}

pub type Result<T> = std::result::Result<T, StressError>;

/// Electrical stress law `max{1, prefactor·exp(slope·v/v*)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricalModel {
    pub prefactor: f64,
    pub slope: f64,
}

impl ElectricalModel {
    pub const BJT: ElectricalModel = ElectricalModel {
        prefactor: 0.47,
        slope: 3.0,
    };
}

impl Default for ElectricalModel {
    fn default() -> Self {
        Self::BJT
    }
}

/// Static reliability parameters of one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams {
    /// Base failure rate, failures/hour.
    pub lambda_b: f64,
    /// Weibull shape offset in `[0, 1)`.
    pub alpha: f64,
    /// Base infant-mortality period, hours.
    pub t0: f64,
    /// Breakdown / rated voltage, volts.
    pub v_star: f64,
    /// Activation energy, eV.
    pub activation_energy: f64,
    /// Reference temperature, kelvin.
    pub t_ref: f64,
    /// Environmental factor (≥ 1).
    pub env_factor: f64,
    /// Wear-out ceiling on the mean residual life, hours.
    pub mrl_cap: Option<f64>,
    pub electrical: ElectricalModel,
}

impl ComponentParams {
    /// npn BJT, 45 V / 0.5 A, f_T = 100 MHz.
    pub fn bjt() -> Self {
        Self {
            lambda_b: 20e-9,
            alpha: 0.6,
            t0: 1e4,
            v_star: 45.0,
            activation_energy: 0.4,
            t_ref: 313.0,
            env_factor: 1.0,
            mrl_cap: None,
            electrical: ElectricalModel::BJT,
        }
    }

    pub fn with_mrl_cap(mut self, cap: f64) -> Self {
        self.mrl_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(StressError::InvalidParameter { name, value, reason })
            }
        }
        check(self.lambda_b > 0.0, "lambda_b", self.lambda_b, "must be > 0")?;
        check(
            (0.0..1.0).contains(&self.alpha),
            "alpha",
            self.alpha,
            "must lie in [0, 1)",
        )?;
        check(self.t0 > 0.0, "t0", self.t0, "must be > 0")?;
        check(self.v_star > 0.0, "v_star", self.v_star, "must be > 0")?;
        check(
            self.activation_energy >= 0.0,
            "activation_energy",
            self.activation_energy,
            "must be >= 0",
        )?;
        check(self.t_ref > 0.0, "t_ref", self.t_ref, "must be > 0")?;
        check(self.env_factor >= 1.0, "env_factor", self.env_factor, "must be >= 1")?;
        if let Some(cap) = self.mrl_cap {
            check(cap > 0.0, "mrl_cap", cap, "must be > 0")?;
        }
        check(
            self.electrical.prefactor > 0.0,
            "electrical.prefactor",
            self.electrical.prefactor,
            "must be > 0",
        )?;
        check(
            self.electrical.slope.is_finite(),
            "electrical.slope",
            self.electrical.slope,
            "must be finite",
        )?;
        Ok(())
    }

    /// `E_a / K_b` in kelvin.
    pub fn activation_temperature(&self) -> f64 {
        self.activation_energy / BOLTZMANN_EV_PER_K
    }

    /// Relative rate sensitivity to voltage, 1/V.
    pub fn voltage_sensitivity(&self) -> f64 {
        self.electrical.slope / self.v_star
    }

    /// Relative rate sensitivity to temperature at `temperature`, 1/K.
    pub fn thermal_sensitivity(&self, temperature: f64) -> f64 {
        self.activation_temperature() / (temperature * temperature)
    }
}

impl Default for ComponentParams {
    fn default() -> Self {
        Self::bjt()
    }
}

/// An operating point: collector-emitter (or terminal) voltage and ambient
/// temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressPoint {
    /// Volts.
    pub v: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl StressPoint {
    pub fn new(v: f64, temperature: f64) -> Result<Self> {
        let point = Self { v, temperature };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(StressError::InvalidVoltage(self.v));
        }
        check_temperature(self.temperature)
    }
}

fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(StressError::NonPositiveTemperature(temperature))
    }
}

fn raw_electrical(v: f64, params: &ComponentParams) -> f64 {
    params.electrical.prefactor * (params.electrical.slope * v / params.v_star).exp()
}

/// `max{1, c·exp(k·v/v*)}`.
pub fn electrical_factor(v: f64, params: &ComponentParams) -> f64 {
    raw_electrical(v, params).max(1.0)
}

/// Arrhenius factor relative to `params.t_ref`.
pub fn thermal_factor(temperature: f64, params: &ComponentParams) -> Result<f64> {
    check_temperature(temperature)?;
    Ok((params.activation_temperature() * (1.0 / params.t_ref - 1.0 / temperature)).exp())
}

/// `(A_T·A_e·A_env)^(1−α)`.
pub fn acceleration_factor(stress: StressPoint, params: &ComponentParams) -> Result<f64> {
    let composite = thermal_factor(stress.temperature, params)?
        * electrical_factor(stress.v, params)
        * params.env_factor;
    Ok(composite.powf(1.0 - params.alpha))
}

/// Shape-independent composite factor `Ā_a` used by the on-line estimator.
///
/// Unlike [`acceleration_factor`] the electrical term is not clamped at 1,
/// so low stress can produce `Ā_a < 1` (the component ages slower than the
/// calendar).
pub fn base_aging_factor(stress: StressPoint, params: &ComponentParams) -> Result<f64> {
    Ok(raw_electrical(stress.v, params)
        * thermal_factor(stress.temperature, params)?
        * params.env_factor)
}

/// First-order expansion of the bathtub failure rate around a nominal
/// operating point.
///
/// ```text
/// t <  T:  λ_b·T_0^α·A^(1−α)·(1 + (1−α)(s_v·ṽ + s_T·T̃))·t^(−α)
/// t >= T:  λ_b·A·(1 + s_v·ṽ + s_T·T̃)
/// ```
///
/// where `A` is the unclamped composite at the nominal point, `s_v = k/v*` and
/// `s_T = E_a/(K_b·T̄²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub nominal: StressPoint,
    /// Composite stress factor at the nominal point.
    pub composite: f64,
    /// 1/V.
    pub voltage_sensitivity: f64,
    /// 1/K.
    pub thermal_sensitivity: f64,
    lambda_b: f64,
    alpha: f64,
    t0: f64,
}

impl Linearization {
    pub fn at(nominal: StressPoint, params: &ComponentParams) -> Result<Self> {
        nominal.validate()?;
        Ok(Self {
            nominal,
            composite: base_aging_factor(nominal, params)?,
            voltage_sensitivity: params.voltage_sensitivity(),
            thermal_sensitivity: params.thermal_sensitivity(nominal.temperature),
            lambda_b: params.lambda_b,
            alpha: params.alpha,
            t0: params.t0,
        })
    }

    /// Constant-rate (exponential branch) value at zero deviation.
    pub fn nominal_rate(&self) -> f64 {
        self.lambda_b * self.composite
    }

    /// Perturbation gain of the exponential branch per volt.
    pub fn voltage_gain(&self) -> f64 {
        self.nominal_rate() * self.voltage_sensitivity
    }

    fn relative_deviation(&self, dv: f64, dtemp: f64) -> f64 {
        self.voltage_sensitivity * dv + self.thermal_sensitivity * dtemp
    }

    pub fn weibull_branch(&self, dv: f64, dtemp: f64, t: f64) -> f64 {
        let x = self.relative_deviation(dv, dtemp);
        self.lambda_b
            * self.t0.powf(self.alpha)
            * self.composite.powf(1.0 - self.alpha)
            * (1.0 + (1.0 - self.alpha) * x)
            * t.powf(-self.alpha)
    }

    pub fn exponential_branch(&self, dv: f64, dtemp: f64) -> f64 {
        self.nominal_rate() * (1.0 + self.relative_deviation(dv, dtemp))
    }

    /// Time at which the two branches meet.
    ///
    /// Closed form `T = (T_0/A)·((1 + (1−α)x)/(1 + x))^(1/α)`; falls back to
    /// bisection on `[1, T_0]` when the ratio is not positive.
    pub fn transition_time(&self, dv: f64, dtemp: f64) -> Result<f64> {
        let x = self.relative_deviation(dv, dtemp);
        let base = self.t0 / self.composite;
        if self.alpha == 0.0 {
            return Ok(base);
        }
        let ratio = (1.0 + (1.0 - self.alpha) * x) / (1.0 + x);
        if ratio > 0.0 && ratio.is_finite() {
            return Ok(base * ratio.powf(1.0 / self.alpha));
        }
        let gap = |t: f64| self.weibull_branch(dv, dtemp, t) - self.exponential_branch(dv, dtemp);
        let (mut lo, mut hi) = (1.0, self.t0);
        let (g_lo, g_hi) = (gap(lo), gap(hi));
        if !(g_lo.signum() != g_hi.signum()) {
            return Err(StressError::NoTransition);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid).signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Linearized failure rate at deviation `(dv, dtemp)` and calendar time `t`.
    pub fn rate(&self, dv: f64, dtemp: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(StressError::NonPositiveTime(t));
        }
        if t < self.transition_time(dv, dtemp)? {
            Ok(self.weibull_branch(dv, dtemp, t))
        } else {
            Ok(self.exponential_branch(dv, dtemp))
        }
    }
}

/// Convenience wrapper around [`Linearization::rate`].
pub fn linearized_rate(
    deviation: (f64, f64),
    t: f64,
    nominal: StressPoint,
    params: &ComponentParams,
) -> Result<f64> {
    Linearization::at(nominal, params)?.rate(deviation.0, deviation.1, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOMINAL: StressPoint = StressPoint {
        v: 30.0,
        temperature: 333.0,
    };

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn electrical_factor_values() {
        let p = ComponentParams::bjt();
        assert_eq!(electrical_factor(0.0, &p), 1.0);
        assert!(rel(electrical_factor(30.0, &p), 0.47 * 2f64.exp()) < 1e-15);
        assert!(rel(electrical_factor(30.0, &p), 3.4728) < 1e-4);
        assert!(rel(electrical_factor(45.0, &p), 0.47 * 3f64.exp()) < 1e-15);
        assert!(rel(electrical_factor(45.0, &p), 9.4387) < 1e-3);
    }

    #[test]
    fn thermal_factor_values() {
        let p = ComponentParams::bjt();
        assert_eq!(thermal_factor(313.0, &p).unwrap(), 1.0);
        // exp(4641.79·(1/313 − 1/333)) evaluated by hand: 2.4370
        assert!(rel(thermal_factor(333.0, &p).unwrap(), 2.437) < 1e-3);
        assert!(matches!(
            thermal_factor(0.0, &p),
            Err(StressError::NonPositiveTemperature(_))
        ));
        assert!(thermal_factor(-5.0, &p).is_err());
    }

    #[test]
    fn composite_matches_rounded_linearization_constant() {
        let p = ComponentParams::bjt();
        let composite = base_aging_factor(NOMINAL, &p).unwrap();
        assert!(rel(composite, 8.463) < 1e-3);
        assert!(rel(composite, 8.4) < 0.01);
    }

    #[test]
    fn acceleration_factor_values() {
        let p = ComponentParams::bjt();
        let a = acceleration_factor(NOMINAL, &p).unwrap();
        assert!(rel(a, 8.463f64.powf(0.4)) < 1e-3);
        assert!(rel(a, 2.350) < 1e-3);

        let p0 = ComponentParams { alpha: 0.0, ..p };
        let raw = thermal_factor(333.0, &p0).unwrap() * electrical_factor(30.0, &p0);
        assert_eq!(acceleration_factor(NOMINAL, &p0).unwrap(), raw);

        let idle = StressPoint::new(0.0, 313.0).unwrap();
        assert_eq!(acceleration_factor(idle, &p).unwrap(), 1.0);

        let near_one = ComponentParams { alpha: 0.999, ..p };
        let a = acceleration_factor(NOMINAL, &near_one).unwrap();
        assert!((a - 1.0).abs() < 3e-3, "{a}");
    }

    #[test]
    fn base_aging_factor_values() {
        let p = ComponentParams::bjt();
        let at_ref = base_aging_factor(StressPoint::new(30.0, 313.0).unwrap(), &p).unwrap();
        assert!(rel(at_ref, 0.47 * 2f64.exp()) < 1e-15);
        // no clamp: idle stress ages slower than calendar time
        let idle = base_aging_factor(StressPoint::new(0.0, 313.0).unwrap(), &p).unwrap();
        assert!((idle - 0.47).abs() < 1e-15);
        assert!(StressPoint::new(30.0, 0.0).is_err());
    }

    #[test]
    fn linearization_constants() {
        let p = ComponentParams::bjt();
        let lin = Linearization::at(NOMINAL, &p).unwrap();
        // nominal rate ≈ 20e-9·8.463; the rounded reference value is 165e-9
        assert!(rel(lin.nominal_rate(), 1.6927e-7) < 1e-3);
        assert!(rel(lin.nominal_rate(), 165e-9) < 0.05);
        assert!(rel(lin.voltage_sensitivity, 3.0 / 45.0) < 1e-15);
        assert!(rel(lin.thermal_sensitivity, 0.0419) < 2e-3);
        // rounded sensitivities 0.06 and 0.04 are display rounding
        assert!((lin.voltage_sensitivity - 0.06).abs() < 0.01);
        assert!((lin.thermal_sensitivity - 0.04).abs() < 0.005);
        assert!(rel(lin.voltage_gain(), 165.0 * 0.066e-9) < 0.05);
    }

    #[test]
    fn linearized_rate_branches() {
        let p = ComponentParams::bjt();
        let lin = Linearization::at(NOMINAL, &p).unwrap();
        let t_tr = lin.transition_time(0.0, 0.0).unwrap();
        assert!(rel(t_tr, 1e4 / lin.composite) < 1e-12);
        let late = linearized_rate((0.0, 0.0), 2.0 * t_tr, NOMINAL, &p).unwrap();
        assert_eq!(late, lin.nominal_rate());
        assert!(linearized_rate((0.0, 0.0), 0.0, NOMINAL, &p).is_err());
        assert!(linearized_rate((0.0, 0.0), -1.0, NOMINAL, &p).is_err());

        for (dv, dt) in [(0.0, 0.0), (2.0, 0.0), (-3.0, 1.5), (0.5, -4.0)] {
            let t_tr = lin.transition_time(dv, dt).unwrap();
            let w = lin.weibull_branch(dv, dt, t_tr);
            let e = lin.exponential_branch(dv, dt);
            assert!(rel(w, e) < 1e-9, "dv={dv} dT={dt}: {w} vs {e}");
        }
    }

    #[test]
    fn transition_bisection_fallback() {
        let p = ComponentParams::bjt();
        let lin = Linearization::at(NOMINAL, &p).unwrap();
        // 1 + x < 0 < 1 + (1−α)x: the closed-form ratio is negative, the
        // Weibull branch stays positive and the exponential branch negative
        assert_eq!(lin.transition_time(-20.0, 0.0), Err(StressError::NoTransition));
    }

    #[test]
    fn linearization_is_first_order_accurate() {
        let p = ComponentParams::bjt();
        let lin = Linearization::at(NOMINAL, &p).unwrap();
        for dv in [-1.0, -0.5, 0.25, 1.0] {
            let exact_scale = |t: f64| {
                let stress = StressPoint::new(30.0 + dv, 333.0).unwrap();
                p.lambda_b
                    * p.t0.powf(p.alpha)
                    * base_aging_factor(stress, &p).unwrap().powf(1.0 - p.alpha)
                    * t.powf(-p.alpha)
            };
            for t in [1.0, 10.0, 500.0] {
                let approx = lin.weibull_branch(dv, 0.0, t);
                assert!(rel(approx, exact_scale(t)) < 0.01);
            }
            let stress = StressPoint::new(30.0 + dv, 333.0).unwrap();
            let exact_const = p.lambda_b * base_aging_factor(stress, &p).unwrap();
            assert!(rel(lin.exponential_branch(dv, 0.0), exact_const) < 0.01);
        }
    }

    #[test]
    fn params_validation() {
        assert!(ComponentParams::bjt().validate().is_ok());
        let bad = ComponentParams {
            alpha: 1.0,
            ..ComponentParams::bjt()
        };
        assert!(bad.validate().is_err());
        let bad = ComponentParams {
            env_factor: 0.5,
            ..ComponentParams::bjt()
        };
        assert!(bad.validate().is_err());
        assert!(ComponentParams::bjt().with_mrl_cap(0.0).validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn electrical_monotone_and_bounded(v1 in 0.0..200.0f64, dv in 0.0..50.0f64) {
                let p = ComponentParams::bjt();
                let a = electrical_factor(v1, &p);
                prop_assert!(a >= 1.0);
                prop_assert!(electrical_factor(v1 + dv, &p) >= a);
            }

            #[test]
            fn thermal_monotone(t in 200.0..500.0f64, dt in 0.01..50.0f64) {
                let p = ComponentParams::bjt();
                prop_assert!(thermal_factor(t + dt, &p).unwrap() > thermal_factor(t, &p).unwrap());
            }
        }
    }
}
