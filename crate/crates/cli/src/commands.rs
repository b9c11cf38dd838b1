//! Subcommand implementations, independent of argument parsing.

use std::io::{Read, Write};

use stepcox_core::cox::StepNoiseConfig;
use stepcox_core::mrl::{
    mrl, EstimatorState, FluctuationStats, ModelVariant, ModifiedRates, MrlError, MrlValue, ResidualLifeModel,
};
use stepcox_core::oracle::{self, SimulationSpec, SimulationSummary};
use stepcox_core::stress::{base_aging_factor, ComponentParams, StressPoint};
use stepcox_core::verification::{run_sweep, SweepConfig, SweepReport};

use crate::config::{Config, StepSection};
use crate::report::{write_mrl_row, MrlReport, RowWriter, StepRow, MRL_HEADER, STEP_HEADER};
use crate::telemetry::{TelemetryReader, TelemetryRecord};
use crate::{fmt9, CliError};

fn mrl_error(e: MrlError) -> CliError {
    match e {
        MrlError::NonMonotoneTime { .. } | MrlError::NonPositiveDenominator(_) => CliError::Invariant(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

/// One estimator per requested variant, fed record by record.
pub struct EstimatorPipeline {
    params: ComponentParams,
    noise: StepNoiseConfig,
    nominal: StressPoint,
    states: Vec<EstimatorState>,
    riemann_step: f64,
}

impl EstimatorPipeline {
    pub fn new(
        config: &Config,
        variants: &[ModelVariant],
        window: Option<usize>,
        riemann_step: f64,
    ) -> Result<Self, CliError> {
        if !(riemann_step > 0.0 && riemann_step.is_finite()) {
            return Err(CliError::Input(format!("Riemann step must be positive, got {riemann_step}")));
        }
        let states = variants
            .iter()
            .map(|&v| EstimatorState::new(config.estimator(v, window)?).map_err(mrl_error))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            params: config.params()?,
            noise: config.noise()?,
            nominal: config.nominal()?,
            states,
            riemann_step,
        })
    }

    /// Rows for one record, in variant order.
    pub fn process(&mut self, record: &TelemetryRecord) -> Result<Vec<MrlReport>, CliError> {
        let stress = StressPoint {
            v: record.v,
            temperature: record.temperature.unwrap_or(self.nominal.temperature),
        };
        let mut rows = Vec::with_capacity(self.states.len());
        for state in &mut self.states {
            let variant = state.config().variant;
            let channel = state.config().channel;
            let obs = state.observe(record.t, stress, &self.params).map_err(mrl_error)?;
            let value = ResidualLifeModel {
                rates: &obs.rates,
                stats: obs.stats,
                noise: &self.noise,
                params: &self.params,
                channel,
            }
            .mean_residual_life(obs.s, self.riemann_step)
            .map_err(mrl_error)?;
            rows.push(MrlReport {
                t: obs.s,
                mrl: value.hours,
                aging_factor: obs.rates.aging_factor,
                transition_time: obs.rates.transition_time,
                lambda_s: obs.rates.lambda_s,
                lambda_s0: obs.rates.lambda_s0,
                m: obs.stats.observed_mean,
                eg_nu: obs.stats.expected,
                clamped: value.clamped,
                variant: variant.number(),
            });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub variants: Vec<ModelVariant>,
    pub riemann_step: f64,
    pub window: Option<usize>,
    pub time_scale: f64,
    pub json: bool,
}

/// Stream telemetry through the estimators; returns the number of rows written.
pub fn estimate<R: Read, W: Write>(
    config: &Config,
    input: R,
    output: W,
    opts: &EstimateOptions,
) -> Result<usize, CliError> {
    let mut pipeline = EstimatorPipeline::new(config, &opts.variants, opts.window, opts.riemann_step)?;
    let reader = TelemetryReader::new(input, opts.time_scale)?;
    let mut out = if opts.json {
        RowWriter::json(output)?
    } else {
        RowWriter::csv(output, &MRL_HEADER)?
    };
    let mut written = 0;
    for record in reader {
        for row in pipeline.process(&record?)? {
            write_mrl_row(&mut out, &row)?;
            written += 1;
        }
    }
    out.finish()?;
    Ok(written)
}

/// Run records through the estimators and collect the rows.
pub fn estimate_records(
    config: &Config,
    records: &[TelemetryRecord],
    variants: &[ModelVariant],
    riemann_step: f64,
) -> Result<Vec<MrlReport>, CliError> {
    let mut pipeline = EstimatorPipeline::new(config, variants, None, riemann_step)?;
    let mut rows = Vec::with_capacity(records.len() * variants.len());
    for r in records {
        rows.extend(pipeline.process(r)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub horizon: f64,
    pub seed: u64,
    pub grid_points: usize,
}

/// One sample path (replication 0 of `seed`): intensity on a uniform grid
/// and the failure times.
pub fn simulate_path<W: Write, E: Write>(
    config: &Config,
    opts: &SimulateOptions,
    trace_out: W,
    events_out: Option<E>,
) -> Result<(), CliError> {
    let spec = SimulationSpec {
        scheme: config.simulate.scheme,
        trace_points: opts.grid_points,
        ..SimulationSpec::new(config.noise()?, opts.horizon, 1, opts.seed)
    };
    let reps = oracle::simulate(&spec).map_err(|e| CliError::Input(e.to_string()))?;
    let rep = &reps[0];
    let mut w = RowWriter::csv(trace_out, &["t_h", "lambda_per_h"])?;
    for (t, lambda) in spec.trace_times().iter().zip(&rep.trace) {
        w.row(&[fmt9(*t), fmt9(*lambda)], &(t, lambda))?;
    }
    w.finish()?;
    if let Some(events) = events_out {
        let mut w = RowWriter::csv(events, &["index", "t_h"])?;
        for (i, t) in rep.failures.iter().enumerate() {
            w.row(&[(i + 1).to_string(), fmt9(*t)], &(i, t))?;
        }
        w.finish()?;
    }
    Ok(())
}

/// Oracle summary over `config.simulate.replications` paths.
pub fn simulate_summary(config: &Config, opts: &SimulateOptions) -> Result<SimulationSummary, CliError> {
    let spec = SimulationSpec {
        scheme: config.simulate.scheme,
        trace_points: opts.grid_points.min(100),
        cf_grid: vec![0.5, 1.0, 2.0],
        ..SimulationSpec::new(config.noise()?, opts.horizon, config.simulate.replications, opts.seed)
    };
    oracle::run(&spec).map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub points: usize,
    pub replications: u64,
    pub seed: u64,
    pub kappa_scale: f64,
    pub json: bool,
}

/// Run the oracle sweep and write per-check diagnostics. Returns the report;
/// the caller decides the exit status from [`SweepReport::passed`].
pub fn verify<W: Write>(config: &Config, opts: &VerifyOptions, output: W) -> Result<SweepReport, CliError> {
    let sweep = SweepConfig {
        points: opts.points,
        replications: opts.replications,
        seed: opts.seed,
        miss_fraction: config.verify.miss_fraction,
        closed_form_kappa_scale: opts.kappa_scale,
        ..SweepConfig::default()
    };
    let report = run_sweep(&sweep).map_err(|e| CliError::Input(e.to_string()))?;
    if opts.json {
        let mut output = output;
        serde_json::to_writer_pretty(&mut output, &report).map_err(|e| CliError::Io(e.to_string()))?;
        output.write_all(b"\n")?;
        return Ok(report);
    }
    let mut w = RowWriter::csv(
        output,
        &[
            "point",
            "form",
            "u",
            "closed_re",
            "closed_im",
            "simulated_re",
            "simulated_im",
            "stderr",
            "pass",
        ],
    )?;
    for c in &report.checks {
        w.row(
            &[
                c.point.to_string(),
                c.form.name().to_string(),
                c.u.map(fmt9).unwrap_or_default(),
                fmt9(c.closed.re),
                fmt9(c.closed.im),
                fmt9(c.simulated.re),
                fmt9(c.simulated.im),
                fmt9(c.stderr),
                c.pass.to_string(),
            ],
            c,
        )?;
    }
    w.finish()?;
    Ok(report)
}

/// Per-form pass counts, one line each.
pub fn verify_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    for t in &report.tallies {
        let u = t.u.map(|u| format!("(u={u})")).unwrap_or_default();
        s.push_str(&format!(
            "{}{u}: {}/{} within 3 sigma (allowed misses {}) {}\n",
            t.form.name(),
            t.passed,
            t.total,
            t.allowed_misses,
            if t.ok() { "ok" } else { "FAIL" }
        ));
    }
    s
}

/// MRL curves of the step experiment and the derived settling times.
#[derive(Debug, Clone, PartialEq)]
pub struct StepComparison {
    pub rows: Vec<StepRow>,
    /// 90% settling time after the step, hours, for variants 1..=3.
    pub settling: [Option<f64>; 3],
    /// Last MRL of each variant.
    pub long_run: [f64; 3],
}

/// Exponential-model MRL at a fixed stress: `1/(λ_b·Ā)`, capped.
pub fn exponential_mrl(stress: StressPoint, params: &ComponentParams) -> Result<MrlValue, CliError> {
    let aging = base_aging_factor(stress, params).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(MrlValue::capped(1.0 / (params.lambda_b * aging), params.mrl_cap))
}

/// Bathtub MRL at a fixed stress, without noise.
pub fn weibull_mrl(
    s: f64,
    stress: StressPoint,
    params: &ComponentParams,
    noise: &StepNoiseConfig,
    riemann_step: f64,
) -> Result<MrlValue, CliError> {
    let rates = ModifiedRates::constant_stress(s, stress, params).map_err(mrl_error)?;
    mrl(s, &rates, FluctuationStats::default(), &noise.without_noise(), params, riemann_step).map_err(mrl_error)
}

/// First time after `step_time` from which `values` stay within 10% of the
/// gap between the last pre-step value and the final value. Zero when the
/// gap is zero.
pub fn settling_time(times: &[f64], values: &[f64], step_time: f64) -> Option<f64> {
    let first_after = times.iter().position(|&t| t > step_time)?;
    let pre = if first_after == 0 { values[0] } else { values[first_after - 1] };
    let last = *values.last()?;
    let band = 0.1 * (last - pre).abs();
    if band == 0.0 {
        return Some(0.0);
    }
    let mut settled_from = None;
    for i in (first_after..values.len()).rev() {
        if (values[i] - last).abs() <= band {
            settled_from = Some(i);
        } else {
            break;
        }
    }
    settled_from.map(|i| times[i] - step_time)
}

pub fn step_compare(config: &Config, step: &StepSection, riemann_step: f64) -> Result<StepComparison, CliError> {
    let params = config.params()?;
    let noise = config.noise()?;
    let nominal = config.nominal()?;
    let trace = crate::synth::step_trace(nominal.v, step.height, step.step_time, step.horizon, step.sample_period);
    if trace.is_empty() {
        return Err(CliError::Input("step horizon shorter than one sample".into()));
    }
    let exponential = exponential_mrl(nominal, &params)?.hours;
    let mut pipeline = EstimatorPipeline::new(config, &ModelVariant::ALL, None, riemann_step)?;
    let mut rows = Vec::with_capacity(trace.len());
    for r in &trace {
        let out = pipeline.process(r)?;
        rows.push(StepRow {
            t: r.t,
            v: r.v,
            exponential,
            weibull: weibull_mrl(r.t, nominal, &params, &noise, riemann_step)?.hours,
            variant1: out[0].mrl,
            variant2: out[1].mrl,
            variant3: out[2].mrl,
        });
    }
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let series = |f: fn(&StepRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let curves = [series(|r| r.variant1), series(|r| r.variant2), series(|r| r.variant3)];
    let settling = [0, 1, 2].map(|i| settling_time(&times, &curves[i], step.step_time));
    let long_run = [0, 1, 2].map(|i| *curves[i].last().expect("non-empty trace"));
    Ok(StepComparison {
        rows,
        settling,
        long_run,
    })
}

pub fn write_step_comparison<W: Write>(cmp: &StepComparison, output: W, json: bool) -> Result<(), CliError> {
    let mut w = if json {
        RowWriter::json(output)?
    } else {
        RowWriter::csv(output, &STEP_HEADER)?
    };
    for r in &cmp.rows {
        w.row(&r.fields(), r)?;
    }
    w.finish()
}
