//! Output rows and their CSV form (9 significant digits).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{fmt9, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrlReport {
    #[serde(rename = "t_h")]
    pub t: f64,
    #[serde(rename = "mrl_h")]
    pub mrl: f64,
    pub aging_factor: f64,
    #[serde(rename = "transition_h")]
    pub transition_time: f64,
    pub lambda_s: f64,
    pub lambda_s0: f64,
    #[serde(rename = "m_V")]
    pub m: f64,
    #[serde(rename = "eg_nu_V")]
    pub eg_nu: f64,
    pub clamped: bool,
    pub variant: u8,
}

pub const MRL_HEADER: [&str; 10] = [
    "t_h",
    "mrl_h",
    "aging_factor",
    "transition_h",
    "lambda_s",
    "lambda_s0",
    "m_V",
    "eg_nu_V",
    "clamped",
    "variant",
];

impl MrlReport {
    fn fields(&self) -> [String; 10] {
        [
            fmt9(self.t),
            fmt9(self.mrl),
            fmt9(self.aging_factor),
            fmt9(self.transition_time),
            fmt9(self.lambda_s),
            fmt9(self.lambda_s0),
            fmt9(self.m),
            fmt9(self.eg_nu),
            self.clamped.to_string(),
            self.variant.to_string(),
        ]
    }
}

/// CSV or JSON-array row sink.
#[allow(clippy::large_enum_variant)]
pub enum RowWriter<W: Write> {
    Csv(csv::Writer<W>),
    Json { out: W, first: bool },
}

impl<W: Write> RowWriter<W> {
    pub fn csv(out: W, header: &[&str]) -> Result<Self, CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        Ok(RowWriter::Csv(w))
    }

    pub fn json(mut out: W) -> Result<Self, CliError> {
        out.write_all(b"[")?;
        Ok(RowWriter::Json { out, first: true })
    }

    pub fn row<T: Serialize>(&mut self, fields: &[String], value: &T) -> Result<(), CliError> {
        match self {
            RowWriter::Csv(w) => w.write_record(fields)?,
            RowWriter::Json { out, first } => {
                out.write_all(if *first { b"\n" } else { b",\n" })?;
                serde_json::to_writer(&mut *out, value).map_err(|e| CliError::Io(e.to_string()))?;
                *first = false;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self {
            RowWriter::Csv(mut w) => w.flush()?,
            RowWriter::Json { mut out, .. } => {
                out.write_all(b"\n]\n")?;
                out.flush()?;
            }
        }
        Ok(())
    }
}

pub fn write_mrl_row<W: Write>(w: &mut RowWriter<W>, row: &MrlReport) -> Result<(), CliError> {
    w.row(&row.fields(), row)
}

pub fn parse_mrl_reports<R: Read>(input: R) -> Result<Vec<MrlReport>, CliError> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Input(format!("report: {e}"))))
        .collect()
}

pub fn emit_mrl_reports(rows: &[MrlReport]) -> Result<Vec<u8>, CliError> {
    let mut w = RowWriter::csv(Vec::new(), &MRL_HEADER)?;
    for r in rows {
        write_mrl_row(&mut w, r)?;
    }
    match w {
        RowWriter::Csv(w) => w.into_inner().map_err(|e| CliError::Io(e.to_string())),
        RowWriter::Json { .. } => unreachable!(),
    }
}

/// One row of the step-comparison output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    #[serde(rename = "t_h")]
    pub t: f64,
    #[serde(rename = "v_V")]
    pub v: f64,
    #[serde(rename = "exponential_h")]
    pub exponential: f64,
    #[serde(rename = "weibull_h")]
    pub weibull: f64,
    #[serde(rename = "variant1_h")]
    pub variant1: f64,
    #[serde(rename = "variant2_h")]
    pub variant2: f64,
    #[serde(rename = "variant3_h")]
    pub variant3: f64,
}

pub const STEP_HEADER: [&str; 7] = [
    "t_h",
    "v_V",
    "exponential_h",
    "weibull_h",
    "variant1_h",
    "variant2_h",
    "variant3_h",
];

impl StepRow {
    pub fn fields(&self) -> [String; 7] {
        [
            fmt9(self.t),
            fmt9(self.v),
            fmt9(self.exponential),
            fmt9(self.weibull),
            fmt9(self.variant1),
            fmt9(self.variant2),
            fmt9(self.variant3),
        ]
    }
}

pub fn parse_step_rows<R: Read>(input: R) -> Result<Vec<StepRow>, CliError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Input(format!("step comparison: {e}"))))
        .collect()
}
