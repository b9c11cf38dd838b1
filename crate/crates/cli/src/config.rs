//! Run configuration, read from TOML with one table per concern.
//!
//! Every key is optional; missing component keys fall back to the BJT
//! profile, missing sections to their defaults.

use std::path::Path;

use serde::Deserialize;
use stepcox_core::cox::{StepDistribution, StepNoiseConfig};
use stepcox_core::mrl::{DrivingChannel, EstimatorConfig, ModelVariant};
use stepcox_core::oracle::Scheme;
use stepcox_core::stress::{ComponentParams, ElectricalModel, Linearization, StressPoint};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub lambda_b: Option<f64>,
    pub alpha: Option<f64>,
    pub t0: Option<f64>,
    pub v_star: Option<f64>,
    pub activation_energy: Option<f64>,
    pub t_ref: Option<f64>,
    pub env_factor: Option<f64>,
    pub mrl_cap: Option<f64>,
    pub electrical_prefactor: Option<f64>,
    pub electrical_slope: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NominalSection {
    pub v: f64,
    pub temperature: f64,
}

impl Default for NominalSection {
    fn default() -> Self {
        Self {
            v: 30.0,
            temperature: 333.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub rho: f64,
    pub tau: f64,
    /// `degenerate:c`, `uniform:low:high` or `discrete:v@p,v@p,...`.
    pub steps: String,
    /// Overrides the linearized `λ_0`.
    pub lambda0: Option<f64>,
    /// Overrides the linearized `κ`.
    pub kappa: Option<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            rho: 0.05,
            tau: 4.0,
            steps: "uniform:-5:5".into(),
            lambda0: None,
            kappa: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub window: usize,
    pub riemann_step: f64,
    pub variants: Vec<u8>,
    pub channel: DrivingChannel,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            window: EstimatorConfig::DEFAULT_WINDOW,
            riemann_step: 10.0,
            variants: vec![1, 2, 3],
            channel: DrivingChannel::Voltage,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub horizon: f64,
    pub grid_points: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub replications: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            grid_points: 1000,
            seed: 1,
            scheme: Scheme::Thinning,
            replications: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub points: usize,
    pub replications: u64,
    pub seed: u64,
    pub miss_fraction: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        let d = stepcox_core::verification::SweepConfig::default();
        Self {
            points: d.points,
            replications: d.replications,
            seed: d.seed,
            miss_fraction: d.miss_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSection {
    /// Hours.
    pub step_time: f64,
    /// Volts added at `step_time`.
    pub height: f64,
    pub horizon: f64,
    pub sample_period: f64,
}

impl Default for StepSection {
    fn default() -> Self {
        Self {
            step_time: 1500.0,
            height: 5.0,
            horizon: 8000.0,
            sample_period: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub component: ComponentSection,
    pub nominal: NominalSection,
    pub noise: NoiseSection,
    pub estimator: EstimatorSection,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
    pub stepcompare: StepSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.params()?;
        cfg.noise()?;
        cfg.variants()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn params(&self) -> Result<ComponentParams, CliError> {
        let c = &self.component;
        let base = ComponentParams::bjt();
        let params = ComponentParams {
            lambda_b: c.lambda_b.unwrap_or(base.lambda_b),
            alpha: c.alpha.unwrap_or(base.alpha),
            t0: c.t0.unwrap_or(base.t0),
            v_star: c.v_star.unwrap_or(base.v_star),
            activation_energy: c.activation_energy.unwrap_or(base.activation_energy),
            t_ref: c.t_ref.unwrap_or(base.t_ref),
            env_factor: c.env_factor.unwrap_or(base.env_factor),
            mrl_cap: c.mrl_cap,
            electrical: ElectricalModel {
                prefactor: c.electrical_prefactor.unwrap_or(base.electrical.prefactor),
                slope: c.electrical_slope.unwrap_or(base.electrical.slope),
            },
        };
        params.validate().map_err(|e| CliError::Input(format!("component: {e}")))?;
        Ok(params)
    }

    pub fn nominal(&self) -> Result<StressPoint, CliError> {
        StressPoint::new(self.nominal.v, self.nominal.temperature)
            .map_err(|e| CliError::Input(format!("nominal: {e}")))
    }

    /// Step-noise model linearized at the nominal point, with overrides.
    pub fn noise(&self) -> Result<StepNoiseConfig, CliError> {
        let params = self.params()?;
        let nominal = self.nominal()?;
        let lin = Linearization::at(nominal, &params).map_err(|e| CliError::Input(format!("nominal: {e}")))?;
        let kappa = match self.estimator.channel {
            DrivingChannel::Voltage => lin.voltage_gain(),
            DrivingChannel::Temperature => lin.nominal_rate() * lin.thermal_sensitivity,
        };
        let cfg = StepNoiseConfig {
            lambda0: self.noise.lambda0.unwrap_or(lin.nominal_rate()),
            kappa: self.noise.kappa.unwrap_or(kappa),
            rho: self.noise.rho,
            tau: self.noise.tau,
            steps: parse_steps(&self.noise.steps)?,
            alpha: params.alpha,
        };
        cfg.validate().map_err(|e| CliError::Input(format!("noise: {e}")))?;
        Ok(cfg)
    }

    pub fn variants(&self) -> Result<Vec<ModelVariant>, CliError> {
        parse_variants(&self.estimator.variants)
    }

    pub fn estimator(&self, variant: ModelVariant, window: Option<usize>) -> Result<EstimatorConfig, CliError> {
        Ok(EstimatorConfig {
            nominal: self.nominal()?,
            window: window.unwrap_or(self.estimator.window),
            variant,
            channel: self.estimator.channel,
        })
    }
}

pub fn parse_variants(numbers: &[u8]) -> Result<Vec<ModelVariant>, CliError> {
    if numbers.is_empty() {
        return Err(CliError::Input("at least one variant is required".into()));
    }
    numbers
        .iter()
        .map(|&n| ModelVariant::from_number(n).ok_or_else(|| CliError::Input(format!("unknown variant {n}; expected 1, 2 or 3"))))
        .collect()
}

/// Parse a step distribution spec.
pub fn parse_steps(spec: &str) -> Result<StepDistribution, CliError> {
    let bad = || CliError::Input(format!("noise.steps: cannot parse {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let dist = match kind.trim() {
        "degenerate" => StepDistribution::Degenerate(num(rest)?),
        "uniform" => {
            let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
            StepDistribution::Uniform { low: num(lo)?, high: num(hi)? }
        }
        "discrete" => StepDistribution::Discrete(
            rest.split(',')
                .map(|atom| {
                    let (v, p) = atom.split_once('@').ok_or_else(bad)?;
                    Ok((num(v)?, num(p)?))
                })
                .collect::<Result<_, CliError>>()?,
        ),
        _ => return Err(bad()),
    };
    dist.validate().map_err(|e| CliError::Input(format!("noise.steps: {e}")))?;
    Ok(dist)
}
