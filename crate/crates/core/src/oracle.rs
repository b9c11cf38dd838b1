//! Seeded Monte Carlo simulator of the step-noise Cox process.
//!
//! Each replication draws a pulse train, builds the realised intensity path
//! and then the failure times conditional on that path. Replication `i` uses
//! the ChaCha8 stream `i` of the generator seeded with `seed`, so results do
//! not depend on how replications are spread over worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::{CoxError, IntensityPath, StepNoiseConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("replications must be at least 1")]
    NoReplications,

    #[error("horizon must be positive and finite, got {0} h")]
    InvalidHorizon(f64),

    #[error("thinning candidate at t = {t} h has intensity {intensity:e} above majorant {majorant:e}")]
    MajorantViolation { t: f64, intensity: f64, majorant: f64 },

    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Cox(#[from] CoxError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Thinning,
    TimeRescaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub cfg: StepNoiseConfig,
    /// Hours.
    pub horizon: f64,
    pub replications: u64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Number of equally spaced points in `(0, horizon]` for the intensity trace.
    pub trace_points: usize,
    /// Arguments `u` of the empirical characteristic functions.
    pub cf_grid: Vec<f64>,
}

impl SimulationSpec {
    pub fn new(cfg: StepNoiseConfig, horizon: f64, replications: u64, seed: u64) -> Self {
        Self {
            cfg,
            horizon,
            replications,
            seed,
            scheme: Scheme::Thinning,
            trace_points: 1,
            cf_grid: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(OracleError::NoReplications);
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(OracleError::InvalidHorizon(self.horizon));
        }
        self.cfg.validate()?;
        Ok(())
    }

    /// Trace grid `horizon·i/P`, `i = 1..=P`.
    pub fn trace_times(&self) -> Vec<f64> {
        let p = self.trace_points;
        (1..=p).map(|i| self.horizon * i as f64 / p as f64).collect()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub intensity: Estimate,
}

/// Empirical `E[e^{−juX}]` with standard errors of both parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfEstimate {
    pub u: f64,
    pub re: Estimate,
    pub im: Estimate,
}

impl CfEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.mean, self.im.mean)
    }

    /// `sqrt(se_re² + se_im²)`.
    pub fn stderr(&self) -> f64 {
        self.re.stderr.hypot(self.im.stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub replications: u64,
    pub horizon: f64,
    pub mean_count: Estimate,
    pub var_count: Estimate,
    /// Fraction of paths without a failure in `(0, horizon]`.
    pub zero_fraction: Estimate,
    /// Path-wise `Λ(horizon)`.
    pub mean_cumulative: Estimate,
    pub mean_intensity_trace: Vec<TracePoint>,
    pub cf_count: Vec<CfEstimate>,
    pub cf_cumulative: Vec<CfEstimate>,
    /// Segments on which the positivity floor was active, summed over paths.
    pub clamped_segments: u64,
}

/// Raw output of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub failures: Vec<f64>,
    pub cumulative: f64,
    pub trace: Vec<f64>,
    pub clamped_segments: usize,
}

impl Replication {
    pub fn first_failure(&self) -> Option<f64> {
        self.failures.first().copied()
    }
}

/// Pulse train on `(0, horizon]`: Poisson(ρ) arrivals, i.i.d. magnitudes.
pub fn sample_noise_path<R: Rng + ?Sized>(cfg: &StepNoiseConfig, horizon: f64, rng: &mut R) -> IntensityPath {
    let mut arrivals = Vec::new();
    let mut magnitudes = Vec::new();
    if cfg.rho > 0.0 {
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(rng);
            let next = t + gap / cfg.rho;
            if next > horizon {
                break;
            }
            if next > t {
                arrivals.push(next);
                magnitudes.push(cfg.steps.sample(rng));
                t = next;
            }
        }
    }
    IntensityPath::new(cfg, arrivals, magnitudes).expect("arrivals are strictly increasing")
}

/// Failure times in `(0, horizon]` conditional on `path`.
pub fn sample_failure_times<R: Rng + ?Sized>(
    path: &IntensityPath,
    horizon: f64,
    rng: &mut R,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    match scheme {
        Scheme::TimeRescaling => Ok(time_rescaling(path, horizon, rng)),
        Scheme::Thinning => thinning(path, horizon, rng),
    }
}

fn time_rescaling<R: Rng + ?Sized>(path: &IntensityPath, horizon: f64, rng: &mut R) -> Vec<f64> {
    let total = path.cumulative_exact(horizon);
    let mut out = Vec::new();
    let mut target = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        target += e;
        if target > total {
            return out;
        }
        out.push(path.inverse_cumulative(target).min(horizon));
    }
}

fn thinning<R: Rng + ?Sized>(path: &IntensityPath, horizon: f64, rng: &mut R) -> Result<Vec<f64>> {
    let alpha = path.alpha();
    let beta = 1.0 - alpha;
    let mut out = Vec::new();
    let mut segments = path.segments(horizon);

    // Head segment: exact inversion of level·t^β/β.
    let Some(head) = segments.next() else {
        return Ok(out);
    };
    let head_mass = head.level * crate::cox::power_integral(0.0, head.end, alpha);
    let mut target: f64 = Exp1.sample(rng);
    while target <= head_mass {
        let t = if alpha == 0.0 {
            target / head.level
        } else {
            (beta * target / head.level).powf(1.0 / beta)
        };
        out.push(t.min(head.end));
        target += Distribution::<f64>::sample(&Exp1, rng);
    }

    // Remaining segments: constant majorant level·lo^(−α) on sub-intervals
    // [lo, min(2lo, end)), so the acceptance ratio stays above 2^(−α).
    let mut budget: f64 = Exp1.sample(rng);
    for seg in segments {
        let mut lo = seg.start;
        while lo < seg.end {
            let hi = if alpha == 0.0 { seg.end } else { (2.0 * lo).min(seg.end) };
            let majorant = seg.level * lo.powf(-alpha);
            let mut at = lo;
            loop {
                let room = majorant * (hi - at);
                if budget > room {
                    budget -= room;
                    break;
                }
                at += budget / majorant;
                budget = Exp1.sample(rng);
                if at >= hi {
                    break;
                }
                let intensity = path.intensity_at(at)?;
                if intensity > majorant * (1.0 + 1e-12) {
                    return Err(OracleError::MajorantViolation {
                        t: at,
                        intensity,
                        majorant,
                    });
                }
                if rng.random::<f64>() * majorant < intensity {
                    out.push(at);
                }
            }
            lo = hi;
        }
    }
    Ok(out)
}

fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn replicate(spec: &SimulationSpec, index: u64, trace_times: &[f64]) -> Result<Replication> {
    let mut rng = replication_rng(spec.seed, index);
    let path = sample_noise_path(&spec.cfg, spec.horizon, &mut rng);
    let failures = sample_failure_times(&path, spec.horizon, &mut rng, spec.scheme)?;
    let trace = trace_times
        .iter()
        .map(|&t| path.intensity_at(t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Replication {
        failures,
        cumulative: path.cumulative_exact(spec.horizon),
        trace,
        clamped_segments: path.clamped_segments(),
    })
}

/// All replications, in index order.
pub fn simulate(spec: &SimulationSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    let trace_times = spec.trace_times();
    (0..spec.replications)
        .into_par_iter()
        .map(|i| replicate(spec, i, &trace_times))
        .collect()
}

/// [`simulate`] on a dedicated pool of `threads` workers.
pub fn simulate_with_threads(spec: &SimulationSpec, threads: usize) -> Result<Vec<Replication>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| OracleError::ThreadPool(e.to_string()))?;
    pool.install(|| simulate(spec))
}

/// Running first and second moments, accumulated in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: (self.variance() / self.n as f64).sqrt(),
        }
    }
}

/// Aggregate replications into a summary.
pub fn summarize(spec: &SimulationSpec, reps: &[Replication]) -> SimulationSummary {
    let trace_times = spec.trace_times();
    let mut count = Moments::default();
    let mut count_sq_dev = Vec::with_capacity(reps.len());
    let mut zero = Moments::default();
    let mut cumulative = Moments::default();
    let mut trace = vec![Moments::default(); trace_times.len()];
    let mut cf_n = vec![(Moments::default(), Moments::default()); spec.cf_grid.len()];
    let mut cf_l = cf_n.clone();
    let mut clamped = 0u64;

    for r in reps {
        let n = r.failures.len() as f64;
        count.push(n);
        zero.push(if r.failures.is_empty() { 1.0 } else { 0.0 });
        cumulative.push(r.cumulative);
        for (m, &x) in trace.iter_mut().zip(&r.trace) {
            m.push(x);
        }
        for (i, &u) in spec.cf_grid.iter().enumerate() {
            let (s, c) = (u * n).sin_cos();
            cf_n[i].0.push(c);
            cf_n[i].1.push(-s);
            let (s, c) = (u * r.cumulative).sin_cos();
            cf_l[i].0.push(c);
            cf_l[i].1.push(-s);
        }
        clamped += r.clamped_segments as u64;
    }
    for r in reps {
        let d = r.failures.len() as f64 - count.mean;
        count_sq_dev.push(d * d);
    }
    let mut sq = Moments::default();
    for x in count_sq_dev {
        sq.push(x);
    }
    let n = reps.len() as f64;
    let bessel = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    let var_count = Estimate {
        mean: sq.mean * bessel,
        stderr: sq.estimate().stderr * bessel,
    };
    let cf = |acc: &[(Moments, Moments)]| {
        spec.cf_grid
            .iter()
            .zip(acc)
            .map(|(&u, (re, im))| CfEstimate {
                u,
                re: re.estimate(),
                im: im.estimate(),
            })
            .collect()
    };
    SimulationSummary {
        replications: reps.len() as u64,
        horizon: spec.horizon,
        mean_count: count.estimate(),
        var_count,
        zero_fraction: zero.estimate(),
        mean_cumulative: cumulative.estimate(),
        mean_intensity_trace: trace_times
            .iter()
            .zip(&trace)
            .map(|(&t, m)| TracePoint {
                t,
                intensity: m.estimate(),
            })
            .collect(),
        cf_count: cf(&cf_n),
        cf_cumulative: cf(&cf_l),
        clamped_segments: clamped,
    }
}

/// Simulate and summarize.
pub fn run(spec: &SimulationSpec) -> Result<SimulationSummary> {
    let reps = simulate(spec)?;
    Ok(summarize(spec, &reps))
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(spec: &SimulationSpec, threads: usize) -> Result<SimulationSummary> {
    let reps = simulate_with_threads(spec, threads)?;
    Ok(summarize(spec, &reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::{survival_exact, StepDistribution};
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

    fn small_cfg(alpha: f64) -> StepNoiseConfig {
        StepNoiseConfig {
            lambda0: 0.3,
            kappa: 0.04,
            rho: 0.5,
            tau: 1.5,
            steps: StepDistribution::Uniform { low: -1.0, high: 3.0 },
            alpha,
        }
    }

    /// Asymptotic Kolmogorov distribution tail `Pr{K > x}`.
    fn kolmogorov_tail(x: f64) -> f64 {
        if x < 0.2 {
            return 1.0;
        }
        let s: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                (if k as u64 % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }

    fn ks_one_sample(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        sample.sort_by(f64::total_cmp);
        let n = sample.len() as f64;
        let d = sample
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        let sn = n.sqrt();
        kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
    }

    fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len(), b.len());
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < n && j < m {
            let x = a[i].min(b[j]);
            while i < n && a[i] <= x {
                i += 1;
            }
            while j < m && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
        }
        let ne = (n * m) as f64 / (n + m) as f64;
        let sn = ne.sqrt();
        kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
    }

    #[test]
    fn no_noise_gives_empty_path() {
        let cfg = small_cfg(0.3).without_noise();
        let mut rng = replication_rng(1, 0);
        let path = sample_noise_path(&cfg, 1e4, &mut rng);
        assert!(path.arrival_times().is_empty());
    }

    #[test]
    fn arrival_counts_are_poisson() {
        let cfg = StepNoiseConfig {
            rho: 0.01,
            ..small_cfg(0.0)
        };
        let mut rng = replication_rng(7, 0);
        let counts: Vec<usize> = (0..1000)
            .map(|_| sample_noise_path(&cfg, 1e4, &mut rng).arrival_times().len())
            .collect();
        let law = Poisson::new(100.0).unwrap();
        // bins: <80, 80..=84, ..., 115..=119, >=120
        let edges: Vec<u64> = (80..=120).step_by(5).collect();
        let mut observed = vec![0.0; edges.len() + 1];
        let mut expected = vec![0.0; edges.len() + 1];
        for &c in &counts {
            let bin = edges.partition_point(|&e| e <= c as u64);
            observed[bin] += 1.0;
        }
        for k in 0..400u64 {
            let bin = edges.partition_point(|&e| e <= k);
            expected[bin] += 1000.0 * law.pmf(k);
        }
        let stat: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| (o - e) * (o - e) / e)
            .sum();
        let dof = (observed.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
        assert!(p > 1e-3, "chi-square p = {p}");
    }

    #[test]
    fn uniform_magnitudes_are_centred() {
        let cfg = StepNoiseConfig {
            rho: 1.0,
            steps: StepDistribution::Uniform { low: -5.0, high: 5.0 },
            ..small_cfg(0.0)
        };
        let mut rng = replication_rng(3, 0);
        let path = sample_noise_path(&cfg, 1e4, &mut rng);
        let m = path.magnitudes();
        let n = m.len() as f64;
        let mean = m.iter().sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * (10.0 / 12f64.sqrt()) / n.sqrt());
    }

    #[test]
    fn exponential_gaps_without_noise() {
        let cfg = small_cfg(0.0).without_noise();
        for scheme in [Scheme::Thinning, Scheme::TimeRescaling] {
            let mut rng = replication_rng(11, 0);
            let path = IntensityPath::quiet(&cfg);
            let times = sample_failure_times(&path, 4e4, &mut rng, scheme).unwrap();
            let mut gaps: Vec<f64> = std::iter::once(times[0])
                .chain(times.windows(2).map(|w| w[1] - w[0]))
                .take(10_000)
                .collect();
            assert_eq!(gaps.len(), 10_000);
            let p = ks_one_sample(&mut gaps, |x| 1.0 - (-0.3 * x).exp());
            assert!(p > 1e-3, "{scheme:?}: KS p = {p}");
        }
    }

    #[test]
    fn weibull_survival_without_noise() {
        let cfg = small_cfg(0.6).without_noise();
        let t: f64 = 5.0;
        let exact = (-cfg.lambda0 * t.powf(0.4) / 0.4).exp();
        for scheme in [Scheme::Thinning, Scheme::TimeRescaling] {
            let spec = SimulationSpec {
                scheme,
                ..SimulationSpec::new(cfg.clone(), t, 20_000, 5)
            };
            let s = run(&spec).unwrap();
            let z = s.zero_fraction;
            assert!((z.mean - exact).abs() < 3.0 * z.stderr, "{scheme:?}: {z:?} vs {exact}");
        }
    }

    #[test]
    fn schemes_agree_on_first_failure() {
        let cfg = small_cfg(0.5);
        let first = |scheme| {
            let spec = SimulationSpec {
                scheme,
                ..SimulationSpec::new(cfg.clone(), 40.0, 5000, 99)
            };
            simulate(&spec)
                .unwrap()
                .iter()
                .filter_map(Replication::first_failure)
                .collect::<Vec<_>>()
        };
        let mut a = first(Scheme::Thinning);
        let mut b = first(Scheme::TimeRescaling);
        let p = ks_two_sample(&mut a, &mut b);
        assert!(p > 1e-3, "two-sample KS p = {p}");
    }

    #[test]
    fn schemes_agree_on_summaries() {
        let cfg = small_cfg(0.4);
        let summary = |scheme| {
            let spec = SimulationSpec {
                scheme,
                trace_points: 4,
                cf_grid: vec![1.0],
                ..SimulationSpec::new(cfg.clone(), 20.0, 8000, 2024)
            };
            run(&spec).unwrap()
        };
        let a = summary(Scheme::Thinning);
        let b = summary(Scheme::TimeRescaling);
        let close = |x: Estimate, y: Estimate| (x.mean - y.mean).abs() <= 4.0 * x.stderr.hypot(y.stderr) + 1e-12;
        assert!(close(a.mean_count, b.mean_count));
        assert!(close(a.zero_fraction, b.zero_fraction));
        assert!(close(a.var_count, b.var_count));
        assert!((a.cf_count[0].value() - b.cf_count[0].value()).norm() <= 4.0 * a.cf_count[0].stderr().hypot(b.cf_count[0].stderr()));
    }

    #[test]
    fn deterministic_across_threads() {
        let spec = SimulationSpec {
            trace_points: 3,
            cf_grid: vec![0.5, 2.0],
            ..SimulationSpec::new(small_cfg(0.3), 10.0, 500, 42)
        };
        let one = run_with_threads(&spec, 1).unwrap();
        let four = run_with_threads(&spec, 4).unwrap();
        assert_eq!(format!("{one:?}"), format!("{four:?}"));
        let single = SimulationSpec {
            replications: 1,
            ..spec.clone()
        };
        assert_eq!(run(&single).unwrap(), run(&single).unwrap());
    }

    #[test]
    fn zero_fraction_matches_survival_at_bjt() {
        let cfg = StepNoiseConfig::bjt_default();
        let spec = SimulationSpec::new(cfg.clone(), 1e6, 400, 8);
        let s = run(&spec).unwrap();
        let exact = survival_exact(1e6, &cfg).unwrap();
        // with ~1e-4 failure probability the binomial stderr can be zero; fall
        // back to the exact binomial standard error
        let se = s.zero_fraction.stderr.max((exact * (1.0 - exact) / 400.0).sqrt());
        assert!((s.zero_fraction.mean - exact).abs() < 3.0 * se);
    }

    #[test]
    fn rejects_invalid_spec() {
        let cfg = small_cfg(0.3);
        assert!(matches!(
            run(&SimulationSpec::new(cfg.clone(), 1.0, 0, 1)),
            Err(OracleError::NoReplications)
        ));
        assert!(matches!(
            run(&SimulationSpec::new(cfg, -1.0, 1, 1)),
            Err(OracleError::InvalidHorizon(_))
        ));
    }
}
