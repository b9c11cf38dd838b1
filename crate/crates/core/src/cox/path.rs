use serde::{Deserialize, Serialize};

use super::{power_integral, CoxError, Result, StepNoiseConfig, POSITIVITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PathModel {
    lambda0: f64,
    kappa: f64,
    tau: f64,
    alpha: f64,
}

/// One realised sample path of the stochastic intensity.
///
/// The path is stored as a piecewise description: on `[knots[i], knots[i+1])`
/// the intensity is `levels[i]·t^(−α)`; after the last knot the level is
/// `λ_0`. Knots are the pulse start and end times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityPath {
    arrival_times: Vec<f64>,
    magnitudes: Vec<f64>,
    model: PathModel,
    knots: Vec<f64>,
    levels: Vec<f64>,
    /// `Λ` at each knot.
    cumulative: Vec<f64>,
    clamped_segments: usize,
}

/// Exact and first-order cumulative intensity at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeIntensity {
    /// `∫_0^t λ(u) du` along the path (floor included).
    pub exact: f64,
    /// `λ_0·t^(1−α)/(1−α) + κ·Σ_{S_k ≤ t} ν_k·τ·S_k^(−α)`, valid for `τ ≪ S_k`.
    pub approximate: f64,
}

/// A constant-level piece of the path: `λ(t) = level·t^(−α)` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment {
    pub start: f64,
    pub end: f64,
    pub level: f64,
}

impl IntensityPath {
    pub fn new(cfg: &StepNoiseConfig, arrival_times: Vec<f64>, magnitudes: Vec<f64>) -> Result<Self> {
        if arrival_times.len() != magnitudes.len() {
            return Err(CoxError::LengthMismatch {
                arrivals: arrival_times.len(),
                magnitudes: magnitudes.len(),
            });
        }
        let mut prev = 0.0;
        for (index, &s) in arrival_times.iter().enumerate() {
            if !(s > prev) || !s.is_finite() {
                return Err(CoxError::UnorderedArrivals { index });
            }
            prev = s;
        }
        let model = PathModel {
            lambda0: cfg.lambda0,
            kappa: cfg.kappa,
            tau: cfg.tau,
            alpha: cfg.alpha,
        };

        // (time, index, +1 start / −1 end)
        let mut events: Vec<(f64, usize, i8)> = Vec::with_capacity(2 * arrival_times.len());
        for (i, &s) in arrival_times.iter().enumerate() {
            events.push((s, i, 1));
            events.push((s + cfg.tau, i, -1));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

        let mut knots = vec![0.0];
        let mut levels = Vec::new();
        let mut stack = 0.0;
        let mut active = 0usize;
        let mut clamped_segments = 0;
        let mut level_for = |stack: f64| {
            let raw = model.lambda0 + model.kappa * stack;
            if raw < POSITIVITY_FLOOR {
                clamped_segments += 1;
                POSITIVITY_FLOOR
            } else {
                raw
            }
        };
        levels.push(model.lambda0.max(POSITIVITY_FLOOR));
        let mut idx = 0;
        while idx < events.len() {
            let time = events[idx].0;
            while idx < events.len() && events[idx].0 == time {
                let (_, i, kind) = events[idx];
                if kind > 0 {
                    stack += magnitudes[i];
                    active += 1;
                } else {
                    stack -= magnitudes[i];
                    active -= 1;
                }
                idx += 1;
            }
            if active == 0 {
                stack = 0.0;
            }
            knots.push(time);
            levels.push(level_for(stack));
        }

        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        for i in 1..knots.len() {
            let piece = levels[i - 1] * power_integral(knots[i - 1], knots[i], model.alpha);
            cumulative.push(cumulative[i - 1] + piece);
        }

        Ok(Self {
            arrival_times,
            magnitudes,
            model,
            knots,
            levels,
            cumulative,
            clamped_segments,
        })
    }

    /// Path with no pulses.
    pub fn quiet(cfg: &StepNoiseConfig) -> Self {
        Self::new(cfg, Vec::new(), Vec::new()).expect("empty path is valid")
    }

    pub fn arrival_times(&self) -> &[f64] {
        &self.arrival_times
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn alpha(&self) -> f64 {
        self.model.alpha
    }

    /// Number of constant pieces whose rate bracket was raised to the floor.
    pub fn clamped_segments(&self) -> usize {
        self.clamped_segments
    }

    fn segment_index(&self, t: f64) -> usize {
        self.knots.partition_point(|&k| k <= t) - 1
    }

    /// `λ(t)`.
    pub fn intensity_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(CoxError::NonPositiveTime(t));
        }
        Ok(self.levels[self.segment_index(t)] * t.powf(-self.model.alpha))
    }

    /// `Λ(t)`, exact and first-order.
    pub fn cumulative_intensity(&self, t: f64) -> Result<CumulativeIntensity> {
        if !(t > 0.0) {
            return Err(CoxError::NonPositiveTime(t));
        }
        let exact = self.cumulative_exact(t);
        let beta = 1.0 - self.model.alpha;
        let noise: f64 = self
            .arrival_times
            .iter()
            .zip(&self.magnitudes)
            .take_while(|(s, _)| **s <= t)
            .map(|(s, nu)| nu * self.model.tau * s.powf(-self.model.alpha))
            .sum();
        let approximate = self.model.lambda0 * t.powf(beta) / beta + self.model.kappa * noise;
        Ok(CumulativeIntensity { exact, approximate })
    }

    /// `Λ(t)` along the path; `Λ(0) = 0`.
    pub fn cumulative_exact(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.segment_index(t);
        self.cumulative[i] + self.levels[i] * power_integral(self.knots[i], t, self.model.alpha)
    }

    /// Smallest `t` with `Λ(t) = target`.
    pub fn inverse_cumulative(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        let i = self.cumulative.partition_point(|&c| c <= target) - 1;
        let remaining = target - self.cumulative[i];
        let level = self.levels[i];
        let start = self.knots[i];
        let alpha = self.model.alpha;
        let t = if alpha == 0.0 {
            start + remaining / level
        } else {
            let beta = 1.0 - alpha;
            (start.powf(beta) + beta * remaining / level).powf(1.0 / beta)
        };
        match self.knots.get(i + 1) {
            Some(&end) => t.min(end),
            None => t,
        }
    }

    /// Constant-level pieces covering `(0, horizon]`.
    pub fn segments(&self, horizon: f64) -> impl Iterator<Item = PathSegment> + '_ {
        (0..self.levels.len()).filter_map(move |i| {
            let start = self.knots[i];
            let end = self.knots.get(i + 1).copied().unwrap_or(f64::INFINITY).min(horizon);
            (start < end).then_some(PathSegment {
                start,
                end,
                level: self.levels[i],
            })
        })
    }
}
