//! Oracle sweep: random step-noise configurations, each simulated and compared
//! with the closed forms at the horizon.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cox::{self, CoxError, StepDistribution, StepNoiseConfig};
use crate::oracle::{self, OracleError, Scheme, SimulationSpec, SimulationSummary};

/// Closed forms checked against the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    ExpectedIntensity,
    ExpectedCumulative,
    SurvivalExact,
    CfCount,
    CfCumulative,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::ExpectedIntensity => "expected_intensity",
            Form::ExpectedCumulative => "expected_cumulative",
            Form::SurvivalExact => "survival_exact",
            Form::CfCount => "cf_count",
            Form::CfCumulative => "cf_cumulative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: usize,
    pub replications: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub cf_grid: Vec<f64>,
    /// Checks with `|Δ| > 3σ` tolerated per form, as a fraction of `points`.
    pub miss_fraction: f64,
    /// Multiplies `κ` in the closed forms only. Values other than 1 corrupt
    /// the comparison on purpose.
    pub closed_form_kappa_scale: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            points: 100,
            replications: 20_000,
            seed: 20_240_601,
            scheme: Scheme::Thinning,
            cf_grid: vec![0.5, 1.0, 2.0],
            miss_fraction: 0.01,
            closed_form_kappa_scale: 1.0,
        }
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub cfg: StepNoiseConfig,
    pub horizon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub point: usize,
    pub form: Form,
    /// CF argument; `None` for the real-valued forms.
    pub u: Option<f64>,
    pub closed: Complex64,
    pub simulated: Complex64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormTally {
    pub form: Form,
    pub u: Option<f64>,
    pub passed: usize,
    pub total: usize,
    pub allowed_misses: usize,
}

impl FormTally {
    pub fn ok(&self) -> bool {
        self.total - self.passed <= self.allowed_misses
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub checks: Vec<Check>,
    pub tallies: Vec<FormTally>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.tallies.iter().all(FormTally::ok)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerificationError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Cox(#[from] CoxError),
}

/// The `n`-point random grid drawn from `seed`.
pub fn sweep_points(points: usize, seed: u64) -> Vec<SweepPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..points)
        .map(|index| {
            let alpha: f64 = rng.random_range(0.0..0.8);
            let lambda0 = rng.random_range(0.05..0.4);
            let horizon = rng.random_range(2.0..20.0);
            let rho: f64 = rng.random_range(0.05..1.0);
            let tau: f64 = rng.random_range(0.2..3.0);
            let steps = match rng.random_range(0..3u8) {
                0 => StepDistribution::Degenerate(rng.random_range(-2.0..4.0)),
                1 => {
                    let low = rng.random_range(-3.0..0.0);
                    StepDistribution::Uniform {
                        low,
                        high: rng.random_range(0.5..4.0),
                    }
                }
                _ => {
                    let p = rng.random_range(0.2..0.8);
                    StepDistribution::Discrete(vec![
                        (rng.random_range(-3.0..0.0), p),
                        (rng.random_range(0.0..4.0), 1.0 - p),
                    ])
                }
            };
            let load = rho * tau;
            let headroom = load + 5.0 * load.sqrt() + 3.0;
            let kappa = lambda0 * rng.random_range(0.1..1.0) / (steps.max_abs().max(1e-3) * headroom);
            SweepPoint {
                index,
                cfg: StepNoiseConfig {
                    lambda0,
                    kappa,
                    rho,
                    tau,
                    steps,
                    alpha,
                },
                horizon,
                seed: rng.random(),
            }
        })
        .collect()
}

fn real_check(point: usize, form: Form, closed: f64, simulated: f64, stderr: f64) -> Check {
    let slack = 1e-9 * closed.abs();
    Check {
        point,
        form,
        u: None,
        closed: closed.into(),
        simulated: simulated.into(),
        stderr,
        pass: (closed - simulated).abs() <= 3.0 * stderr + slack,
    }
}

fn complex_check(point: usize, form: Form, u: f64, closed: Complex64, sim: &oracle::CfEstimate) -> Check {
    let stderr = sim.stderr();
    Check {
        point,
        form,
        u: Some(u),
        closed,
        simulated: sim.value(),
        stderr,
        pass: (closed - sim.value()).norm() <= 3.0 * stderr + 1e-9 * closed.norm(),
    }
}

/// Closed-form vs oracle checks at one point.
pub fn check_point(
    point: &SweepPoint,
    summary: &SimulationSummary,
    kappa_scale: f64,
) -> Result<Vec<Check>, VerificationError> {
    let cfg = StepNoiseConfig {
        kappa: point.cfg.kappa * kappa_scale,
        ..point.cfg.clone()
    };
    let t = point.horizon;
    let i = point.index;
    let n = summary.replications as f64;
    let mut out = Vec::new();
    let trace = summary.mean_intensity_trace.last().expect("trace includes the horizon");
    out.push(real_check(
        i,
        Form::ExpectedIntensity,
        cox::expected_intensity(t, &cfg)?,
        trace.intensity.mean,
        trace.intensity.stderr,
    ));
    out.push(real_check(
        i,
        Form::ExpectedCumulative,
        cox::expected_cumulative(t, &cfg)?,
        summary.mean_count.mean,
        summary.mean_count.stderr,
    ));
    let p0 = cox::survival_exact(t, &cfg)?;
    out.push(real_check(
        i,
        Form::SurvivalExact,
        p0,
        summary.zero_fraction.mean,
        (p0 * (1.0 - p0) / n).sqrt(),
    ));
    for cf in &summary.cf_count {
        out.push(complex_check(i, Form::CfCount, cf.u, cox::cf_count(cf.u, t, &cfg)?, cf));
    }
    for cf in &summary.cf_cumulative {
        out.push(complex_check(i, Form::CfCumulative, cf.u, cox::cf_cumulative(cf.u, t, &cfg)?, cf));
    }
    Ok(out)
}

fn tally(checks: &[Check], allowed_misses: usize) -> Vec<FormTally> {
    let mut tallies: Vec<FormTally> = Vec::new();
    for c in checks {
        let key_u = c.u.map(f64::to_bits);
        match tallies
            .iter_mut()
            .find(|t| t.form == c.form && t.u.map(f64::to_bits) == key_u)
        {
            Some(t) => {
                t.total += 1;
                t.passed += c.pass as usize;
            }
            None => tallies.push(FormTally {
                form: c.form,
                u: c.u,
                passed: c.pass as usize,
                total: 1,
                allowed_misses,
            }),
        }
    }
    tallies
}

/// Run the sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, VerificationError> {
    let points = sweep_points(config.points, config.seed);
    let mut checks = Vec::new();
    for p in &points {
        let spec = SimulationSpec {
            cfg: p.cfg.clone(),
            horizon: p.horizon,
            replications: config.replications,
            seed: p.seed,
            scheme: config.scheme,
            trace_points: 1,
            cf_grid: config.cf_grid.clone(),
        };
        let summary = oracle::run(&spec)?;
        checks.extend(check_point(p, &summary, config.closed_form_kappa_scale)?);
    }
    let allowed = (config.miss_fraction * config.points as f64).floor() as usize;
    Ok(SweepReport {
        tallies: tally(&checks, allowed),
        points,
        checks,
    })
}
