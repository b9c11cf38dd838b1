//! Closed forms of the step-noise Cox process.
//!
//! Everything here derives from the Laplace functional of the cumulative
//! intensity. Pulses form a marked Poisson process, so for complex `c`
//!
//! ```text
//! E[e^{c·Λ_t}] = exp( c·λ_0·t^(1−α)/(1−α)
//!                   + ∫_0^t ρ·(E_G[e^{c·κ·ν·w(k,t)}] − 1) dk )
//! w(k,t)       = ∫_k^{min(k+τ,t)} u^(−α) du
//! ```
//!
//! `c = −ju` gives the characteristic function of `Λ_t`, `c = e^{−ju} − 1`
//! that of the count `N_t`, and `c = −1` the zero-failure probability.
//! The `_first_order` variants replace `w(k,t)` by its `τ ≪ k` limit `τ·k^(−α)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{expm1, power_integral, window_weight, CoxError, IntensityPath, Result, StepNoiseConfig};
use crate::quadrature::{integrate, Tolerance};

/// A probability that may have left `[0, 1]` because of the model inputs.
/// The value is never clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaggedProbability {
    pub value: f64,
    pub out_of_range: bool,
}

impl FlaggedProbability {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            out_of_range: !(0.0..=1.0).contains(&value),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CoxError::NonPositiveTime(t))
    }
}

/// `∫_0^t w(k,t) dk = ∫_0^t min(u, τ)·u^(−α) du`.
fn total_window_weight(t: f64, tau: f64, alpha: f64) -> f64 {
    let head = tau.min(t);
    let ramp = head.powf(2.0 - alpha) / (2.0 - alpha);
    if t <= tau {
        ramp
    } else {
        ramp + tau * power_integral(tau, t, alpha)
    }
}

#[derive(Clone, Copy)]
enum Kernel {
    Windowed,
    FirstOrder,
}

fn log_laplace(c: Complex64, t: f64, cfg: &StepNoiseConfig, kernel: Kernel) -> Result<Complex64> {
    check_time(t)?;
    cfg.validate()?;
    let beta = cfg.shape();
    let deterministic = c * (cfg.lambda0 * t.powf(beta) / beta);
    if cfg.rho == 0.0 || cfg.kappa == 0.0 || cfg.steps.is_suppressed() || c == Complex64::new(0.0, 0.0) {
        return Ok(deterministic);
    }

    let gain = c * cfg.kappa;
    let integrand = |k: f64| -> Complex64 {
        let w = match kernel {
            Kernel::Windowed => window_weight(k, t, cfg.tau, cfg.alpha),
            Kernel::FirstOrder => cfg.tau * k.powf(-cfg.alpha),
        };
        cfg.steps.mgf_minus_one(gain * w)
    };
    let total_weight = match kernel {
        Kernel::Windowed => total_window_weight(t, cfg.tau, cfg.alpha),
        Kernel::FirstOrder => cfg.tau * t.powf(beta) / beta,
    };
    let scale = gain.norm() * cfg.steps.max_abs() * total_weight;
    let tol = Tolerance {
        abs: 1e-12 * scale,
        ..Tolerance::default()
    };

    // k = s^{1/β} removes the k^{−α} / k^{1−α} endpoint behaviour at 0.
    let substituted = |a: f64, b: f64| -> Result<Complex64> {
        let inv = 1.0 / beta;
        let r = integrate(
            |s: f64| {
                if s <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = s.powf(inv);
                integrand(k) * (inv * s.powf(inv - 1.0))
            },
            a.powf(beta),
            b.powf(beta),
            tol,
        )?;
        Ok(r.value)
    };

    let noise = match kernel {
        Kernel::Windowed if t > cfg.tau => {
            let seam = t - cfg.tau;
            substituted(0.0, seam)? + integrate(integrand, seam, t, tol)?.value
        }
        _ => substituted(0.0, t)?,
    };
    if !(noise.re.is_finite() && noise.im.is_finite()) {
        return Err(CoxError::Divergent { t });
    }
    Ok(deterministic + noise * cfg.rho)
}

/// `E[e^{c·Λ_t}]` for complex `c`.
pub fn laplace_functional(c: Complex64, t: f64, cfg: &StepNoiseConfig) -> Result<Complex64> {
    Ok(log_laplace(c, t, cfg, Kernel::Windowed)?.exp())
}

/// `count_argument(u) = e^{−ju} − 1`.
fn count_argument(u: f64) -> Complex64 {
    expm1(Complex64::new(0.0, -u))
}

/// Characteristic function `E[e^{−juΛ_t}]` of the cumulative intensity.
pub fn cf_cumulative(u: f64, t: f64, cfg: &StepNoiseConfig) -> Result<Complex64> {
    laplace_functional(Complex64::new(0.0, -u), t, cfg)
}

/// Characteristic function `E[e^{−juN_t}]` of the failure count.
pub fn cf_count(u: f64, t: f64, cfg: &StepNoiseConfig) -> Result<Complex64> {
    laplace_functional(count_argument(u), t, cfg)
}

/// [`cf_cumulative`] with the `τ·k^(−α)` pulse kernel.
pub fn cf_cumulative_first_order(u: f64, t: f64, cfg: &StepNoiseConfig) -> Result<Complex64> {
    Ok(log_laplace(Complex64::new(0.0, -u), t, cfg, Kernel::FirstOrder)?.exp())
}

/// [`cf_count`] with the `τ·k^(−α)` pulse kernel.
pub fn cf_count_first_order(u: f64, t: f64, cfg: &StepNoiseConfig) -> Result<Complex64> {
    Ok(log_laplace(count_argument(u), t, cfg, Kernel::FirstOrder)?.exp())
}

/// `E[λ_t] = (λ_0 + ρ·min(t, τ)·κ·E_G[ν])·t^(−α)`.
///
/// For `t ≥ τ` this is `(λ_0 + ρτκE_G[ν])·t^(−α)`; before `τ` fewer pulses
/// can be active.
pub fn expected_intensity(t: f64, cfg: &StepNoiseConfig) -> Result<f64> {
    check_time(t)?;
    let active = cfg.rho * t.min(cfg.tau);
    Ok((cfg.lambda0 + active * cfg.kappa * cfg.steps.mean()) * t.powf(-cfg.alpha))
}

/// `E[Λ_t] = E[N_t]` for the windowed pulse train.
pub fn expected_cumulative(t: f64, cfg: &StepNoiseConfig) -> Result<f64> {
    check_time(t)?;
    let beta = cfg.shape();
    Ok(cfg.lambda0 * t.powf(beta) / beta
        + cfg.rho * cfg.kappa * cfg.steps.mean() * total_window_weight(t, cfg.tau, cfg.alpha))
}

/// `(λ_0 + ρτκE_G[ν])·t^(1−α)/(1−α)`.
pub fn expected_cumulative_first_order(t: f64, cfg: &StepNoiseConfig) -> Result<f64> {
    check_time(t)?;
    let beta = cfg.shape();
    Ok((cfg.lambda0 + cfg.rho * cfg.tau * cfg.kappa * cfg.steps.mean()) * t.powf(beta) / beta)
}

/// `exp(−(λ_0 + ρκτE_G[ν])·t^(1−α)/(1−α))`.
///
/// This is `exp(−E[Λ_t])` to first order; it leaves `[0, 1]` when the mean
/// pulse is negative enough, which is flagged.
pub fn survival_first_order(t: f64, cfg: &StepNoiseConfig) -> Result<FlaggedProbability> {
    let beta = cfg.shape();
    check_time(t)?;
    let weibull = (-t.powf(beta) * cfg.lambda0 / beta).exp();
    let noise = (-cfg.rho * cfg.kappa * cfg.tau * t.powf(beta) / beta * cfg.steps.mean()).exp();
    Ok(FlaggedProbability::new(weibull * noise))
}

/// `Pr{N_t = 0} = E[e^{−Λ_t}]`.
pub fn survival_exact(t: f64, cfg: &StepNoiseConfig) -> Result<f64> {
    Ok(log_laplace(Complex64::new(-1.0, 0.0), t, cfg, Kernel::Windowed)?
        .re
        .exp())
}

/// `Pr{N_t − N_s = k}` along a realised intensity path.
pub fn prob_k_failures(k: u64, s: f64, t: f64, path: &IntensityPath) -> Result<f64> {
    if !(s >= 0.0 && s < t) {
        return Err(CoxError::InvalidInterval { start: s, end: t });
    }
    let mean = path.cumulative_exact(t) - path.cumulative_exact(s);
    if mean == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let log_factorial: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    Ok((k as f64 * mean.ln() - mean - log_factorial).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::StepDistribution;
    use crate::quadrature::integrate_real;

    fn sweepish() -> StepNoiseConfig {
        StepNoiseConfig {
            lambda0: 0.15,
            kappa: 0.04,
            rho: 0.6,
            tau: 1.5,
            steps: StepDistribution::Discrete(vec![(-1.0, 0.3), (2.0, 0.5), (3.5, 0.2)]),
            alpha: 0.55,
        }
    }

    #[test]
    fn total_window_weight_matches_quadrature() {
        for (t, tau, alpha) in [(10.0, 1.5, 0.55), (0.7, 1.5, 0.3), (100.0, 4.0, 0.0), (5.0, 5.0, 0.8)] {
            let direct = integrate_real(
                |k| window_weight(k, t, tau, alpha),
                0.0,
                t,
                Tolerance {
                    abs: 1e-13,
                    rel: 1e-12,
                    max_intervals: 10_000,
                },
            )
            .unwrap();
            let closed = total_window_weight(t, tau, alpha);
            assert!((direct - closed).abs() < 1e-9 * closed, "{t} {tau} {alpha}: {direct} vs {closed}");
        }
    }

    #[test]
    fn characteristic_functions_at_zero() {
        let cfg = sweepish();
        assert_eq!(cf_cumulative(0.0, 7.0, &cfg).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(cf_count(0.0, 7.0, &cfg).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn no_noise_phase_factor() {
        let cfg = sweepish().without_noise();
        let t: f64 = 12.0;
        let lambda = cfg.lambda0 * t.powf(0.45) / 0.45;
        let got = cf_cumulative(1.3, t, &cfg).unwrap();
        let want = Complex64::new(0.0, -1.3 * lambda).exp();
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn suppressed_noise_gives_poisson_count_cf() {
        let cfg = StepNoiseConfig {
            steps: StepDistribution::suppressed(),
            ..sweepish()
        };
        let t: f64 = 9.0;
        let mean = cfg.lambda0 * t.powf(0.45) / 0.45;
        for u in [0.3, 1.0, 2.5] {
            let want = (count_argument(u) * mean).exp();
            assert!((cf_count(u, t, &cfg).unwrap() - want).norm() < 1e-14);
        }
    }

    #[test]
    fn survival_reduces_to_weibull_and_exponential() {
        let cfg = StepNoiseConfig {
            steps: StepDistribution::suppressed(),
            ..sweepish()
        };
        for t in [0.5f64, 3.0, 40.0] {
            let weibull = (-cfg.lambda0 * t.powf(0.45) / 0.45).exp();
            let first_order = survival_first_order(t, &cfg).unwrap();
            assert!(!first_order.out_of_range);
            assert!((first_order.value / weibull - 1.0).abs() < 1e-12);
            assert!((survival_exact(t, &cfg).unwrap() / weibull - 1.0).abs() < 1e-12);
        }
        let exp_cfg = StepNoiseConfig { alpha: 0.0, ..cfg };
        for t in [0.5f64, 3.0, 40.0] {
            let want = (-exp_cfg.lambda0 * t).exp();
            assert!((survival_first_order(t, &exp_cfg).unwrap().value / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_noise_survivals_coincide() {
        let cfg = sweepish().without_noise();
        for t in [0.1, 2.0, 30.0] {
            let a = survival_exact(t, &cfg).unwrap();
            let b = survival_first_order(t, &cfg).unwrap().value;
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn survival_exact_dominates_exp_of_mean() {
        let configs = [
            sweepish(),
            StepNoiseConfig::bjt_default(),
            StepNoiseConfig {
                steps: StepDistribution::Uniform { low: -1.0, high: 1.0 },
                ..sweepish()
            },
        ];
        for cfg in &configs {
            for t in [0.3, 1.0, 5.0, 50.0, 1e4] {
                let exact = survival_exact(t, cfg).unwrap();
                let jensen = (-expected_cumulative(t, cfg).unwrap()).exp();
                assert!(exact >= jensen - 1e-12, "t={t}: {exact} < {jensen}");
                assert!(exact > 0.0 && exact <= 1.0);
            }
        }
    }

    #[test]
    fn survival_first_order_flags_out_of_range() {
        let cfg = StepNoiseConfig {
            lambda0: 0.01,
            kappa: 1.0,
            steps: StepDistribution::Degenerate(-1.0),
            ..sweepish()
        };
        let s = survival_first_order(10.0, &cfg).unwrap();
        assert!(s.value > 1.0);
        assert!(s.out_of_range);
    }

    #[test]
    fn moments() {
        let cfg = StepNoiseConfig {
            steps: StepDistribution::Uniform { low: -5.0, high: 5.0 },
            ..sweepish()
        };
        let t = 20.0;
        assert!((expected_intensity(t, &cfg).unwrap() - cfg.lambda0 * t.powf(-0.55)).abs() < 1e-16);
        let quiet = sweepish().without_noise();
        assert_eq!(expected_intensity(t, &quiet).unwrap(), quiet.lambda0 * t.powf(-0.55));

        let homogeneous = StepNoiseConfig { alpha: 0.0, ..quiet };
        assert!((expected_cumulative(t, &homogeneous).unwrap() - homogeneous.lambda0 * t).abs() < 1e-14);

        // first-order and windowed forms agree on the intensity once t ≥ τ
        let cfg = sweepish();
        let first_order = (cfg.lambda0 + cfg.rho * cfg.tau * cfg.kappa * cfg.steps.mean()) * t.powf(-cfg.alpha);
        assert!((expected_intensity(t, &cfg).unwrap() - first_order).abs() < 1e-15);
        let diff = expected_cumulative_first_order(t, &cfg).unwrap() - expected_cumulative(t, &cfg).unwrap();
        // constant offset ρκE[ν]·τ^{2−α}·(1/(1−α) − 1/(2−α))
        let offset = cfg.rho
            * cfg.kappa
            * cfg.steps.mean()
            * cfg.tau.powf(2.0 - cfg.alpha)
            * (1.0 / (1.0 - cfg.alpha) - 1.0 / (2.0 - cfg.alpha));
        assert!((diff - offset).abs() < 1e-12);
    }

    #[test]
    fn expected_cumulative_is_derivative_of_count_cf() {
        let h = 1e-5;
        for cfg in [sweepish(), StepNoiseConfig::bjt_default()] {
            for t in [0.8, 6.0, 1e3] {
                let plus = cf_count(h, t, &cfg).unwrap();
                let minus = cf_count(-h, t, &cfg).unwrap();
                // d/du E[e^{−juN}] at 0 is −j·E[N]
                let numeric = -(plus.im - minus.im) / (2.0 * h);
                let closed = expected_cumulative(t, &cfg).unwrap();
                assert!((numeric / closed - 1.0).abs() < 1e-6, "t={t}: {numeric} vs {closed}");
            }
        }
    }

    #[test]
    fn unwindowed_moments_are_wrong() {
        // negative control: an unwindowed compound Poisson term would grow
        // like t^{2−α} and disagree with the windowed mean
        let cfg = sweepish();
        let t: f64 = 50.0;
        let unwindowed = cfg.lambda0 * t.powf(0.45) / 0.45
            + cfg.rho * cfg.kappa * cfg.steps.mean() * t.powf(2.0 - cfg.alpha) / (2.0 - cfg.alpha);
        let windowed = expected_cumulative(t, &cfg).unwrap();
        assert!(unwindowed > 2.0 * windowed);
    }

    #[test]
    fn first_order_kernel_is_close_for_short_pulses() {
        let cfg = StepNoiseConfig {
            tau: 0.05,
            steps: StepDistribution::Discrete(vec![(0.5, 0.3), (2.0, 0.5), (3.5, 0.2)]),
            ..sweepish()
        };
        let t = 30.0;
        let a = cf_count(1.0, t, &cfg).unwrap();
        let b = cf_count_first_order(1.0, t, &cfg).unwrap();
        assert!((a - b).norm() < 5e-3, "{a} vs {b}");
        let a = cf_cumulative(1.0, t, &cfg).unwrap();
        let b = cf_cumulative_first_order(1.0, t, &cfg).unwrap();
        assert!((a - b).norm() < 5e-3);
    }

    #[test]
    fn first_order_kernel_diverges_for_negative_pulses() {
        // τ·k^(−α) is unbounded at k → 0, so E[e^{−Λ}] is infinite once a
        // pulse can be negative
        let cfg = sweepish();
        assert!(matches!(cf_count_first_order(1.0, 5.0, &cfg), Err(CoxError::Divergent { .. })));
        assert!(cf_count(1.0, 5.0, &cfg).is_ok());
    }

    #[test]
    fn prob_k_failures_on_quiet_path() {
        let cfg = StepNoiseConfig {
            alpha: 0.0,
            ..sweepish().without_noise()
        };
        let path = IntensityPath::quiet(&cfg);
        let p0 = prob_k_failures(0, 2.0, 7.0, &path).unwrap();
        assert!((p0 - (-cfg.lambda0 * 5.0).exp()).abs() < 1e-15);
        assert!(prob_k_failures(0, 7.0, 7.0, &path).is_err());
        assert!(prob_k_failures(0, -1.0, 7.0, &path).is_err());
    }

    #[test]
    fn prob_k_failures_normalised_with_path_mean() {
        let cfg = sweepish();
        let path = IntensityPath::new(&cfg, vec![0.4, 1.1, 3.0, 3.2], vec![2.0, -1.0, 3.5, 2.0]).unwrap();
        let (s, t) = (0.5, 25.0);
        let mut total = 0.0;
        let mut mean = 0.0;
        let mut k = 0;
        loop {
            let p = prob_k_failures(k, s, t, &path).unwrap();
            total += p;
            mean += k as f64 * p;
            k += 1;
            if k > 10 && p < 1e-17 {
                break;
            }
        }
        assert!((1.0 - total).abs() < 1e-12);
        let expected = path.cumulative_exact(t) - path.cumulative_exact(s);
        assert!((mean - expected).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Non-negative pulses keep Λ_t non-decreasing on every path.
        fn config() -> impl Strategy<Value = StepNoiseConfig> {
            signed_config(0.0..1.0f64)
        }

        fn signed_config(
            low: std::ops::Range<f64>,
        ) -> impl Strategy<Value = StepNoiseConfig> {
            (0.01..1.0f64, 0.0..0.2f64, 0.0..2.0f64, 0.1..3.0f64, 0.0..0.9f64, low, 0.1..4.0f64)
                .prop_map(|(lambda0, kappa, rho, tau, alpha, low, width)| StepNoiseConfig {
                    lambda0,
                    kappa,
                    rho,
                    tau,
                    steps: StepDistribution::Uniform { low, high: low + width },
                    alpha,
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn cf_modulus_bounded(cfg in config(), u in -6.0..6.0f64, t in 0.1..30.0f64) {
                prop_assert!(cf_cumulative(u, t, &cfg).unwrap().norm() <= 1.0 + 1e-12);
                prop_assert!(cf_count(u, t, &cfg).unwrap().norm() <= 1.0 + 1e-12);
            }

            #[test]
            fn cf_cumulative_modulus_bounded_for_signed_pulses(
                cfg in signed_config(-3.0..0.0f64), u in -6.0..6.0f64, t in 0.1..30.0f64
            ) {
                prop_assert!(cf_cumulative(u, t, &cfg).unwrap().norm() <= 1.0 + 1e-12);
            }

            #[test]
            fn cf_count_is_2pi_periodic(cfg in config(), u in -3.0..3.0f64, t in 0.1..30.0f64) {
                let a = cf_count(u, t, &cfg).unwrap();
                let b = cf_count(u + 2.0 * std::f64::consts::PI, t, &cfg).unwrap();
                prop_assert!((a - b).norm() < 1e-9);
            }

            #[test]
            fn survival_exact_nonincreasing(cfg in config(), t in 0.1..30.0f64, dt in 0.01..10.0f64) {
                let a = survival_exact(t, &cfg).unwrap();
                let b = survival_exact(t + dt, &cfg).unwrap();
                prop_assert!(b <= a + 1e-12);
            }

            #[test]
            fn survival_first_order_nonincreasing_for_nonnegative_mean(
                cfg in config(), t in 0.1..30.0f64, dt in 0.01..10.0f64
            ) {
                let cfg = StepNoiseConfig { steps: StepDistribution::Uniform { low: 0.0, high: 2.0 }, ..cfg };
                let a = survival_first_order(t, &cfg).unwrap().value;
                let b = survival_first_order(t + dt, &cfg).unwrap().value;
                prop_assert!(b <= a);
            }
        }
    }
}
