//! Synthetic telemetry traces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::telemetry::TelemetryRecord;

/// Hourly battery-like voltage: a daily swing and slow drift around
/// `centre`, with Gaussian jitter, kept inside `centre ± 10 V`.
pub fn battery_trace(hours: usize, centre: f64, seed: u64) -> Vec<TelemetryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    (1..=hours)
        .map(|h| {
            let t = h as f64;
            let daily = 6.0 * (std::f64::consts::TAU * t / 24.0).sin();
            let drift = 2.5 * (std::f64::consts::TAU * t / (24.0 * 17.0)).sin();
            let v = (centre + daily + drift + jitter.sample(&mut rng)).clamp(centre - 10.0, centre + 10.0);
            TelemetryRecord {
                t,
                v,
                temperature: None,
            }
        })
        .collect()
}

/// `before` volts until `step_time`, then `before + height`, sampled every
/// `period` hours up to `horizon`.
pub fn step_trace(before: f64, height: f64, step_time: f64, horizon: f64, period: f64) -> Vec<TelemetryRecord> {
    let n = (horizon / period).floor() as usize;
    (1..=n)
        .map(|i| {
            let t = i as f64 * period;
            TelemetryRecord {
                t,
                v: if t <= step_time { before } else { before + height },
                temperature: None,
            }
        })
        .collect()
}

/// Alternates `low` and `high` every `half_period` samples.
pub fn square_wave(low: f64, high: f64, half_period: usize, hours: usize) -> Vec<TelemetryRecord> {
    (1..=hours)
        .map(|h| TelemetryRecord {
            t: h as f64,
            v: if ((h - 1) / half_period).is_multiple_of(2) { low } else { high },
            temperature: None,
        })
        .collect()
}
