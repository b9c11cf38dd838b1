//! Survival analysis of electrical components driven by step-noise stress.
//!
//! * [`stress`]: deterministic electrical/thermal acceleration factors.
//! * [`cox`]: closed forms of the step-noise Cox process.
//! * [`mrl`]: on-line residual life and mean residual life estimation.
//! * [`oracle`]: seeded Monte Carlo simulator used to check the closed forms.
//! * [`verification`]: oracle-vs-closed-form sweeps.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cox;
pub mod mrl;
pub mod oracle;
pub mod quadrature;
pub mod stress;
pub mod verification;

pub use cox::{IntensityPath, StepDistribution, StepNoiseConfig};
pub use stress::{ComponentParams, StressPoint};
