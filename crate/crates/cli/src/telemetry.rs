//! Telemetry CSV: header `t_h,v_V[,T_K]`, one row per observation.

use std::io::Read;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    /// Hours.
    pub t: f64,
    /// Volts.
    pub v: f64,
    /// Kelvin; `None` when the file has no `T_K` column.
    pub temperature: Option<f64>,
}

/// Streaming reader; validates each row as it is read.
pub struct TelemetryReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    t_col: usize,
    v_col: usize,
    temp_col: Option<usize>,
    time_scale: f64,
}

impl<R: Read> TelemetryReader<R> {
    pub fn new(input: R, time_scale: f64) -> Result<Self, CliError> {
        if !(time_scale > 0.0 && time_scale.is_finite()) {
            return Err(CliError::Input(format!("time scale must be positive, got {time_scale}")));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| CliError::Input(format!("telemetry line 1: {e}")))?
            .clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let t_col = find("t_h").ok_or_else(|| CliError::Input("telemetry line 1: missing column t_h".into()))?;
        let v_col = find("v_V").ok_or_else(|| CliError::Input("telemetry line 1: missing column v_V".into()))?;
        Ok(Self {
            rows: reader.into_records(),
            t_col,
            v_col,
            temp_col: find("T_K"),
            time_scale,
        })
    }

    fn parse(&self, record: &csv::StringRecord) -> Result<TelemetryRecord, CliError> {
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize, name: &str| -> Result<f64, CliError> {
            let raw = record
                .get(col)
                .ok_or_else(|| CliError::Input(format!("telemetry line {line}: missing {name}")))?;
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(CliError::Input(format!("telemetry line {line}: {name} = {raw:?} is not a finite number"))),
            }
        };
        Ok(TelemetryRecord {
            t: field(self.t_col, "t_h")? * self.time_scale,
            v: field(self.v_col, "v_V")?,
            temperature: self.temp_col.map(|c| field(c, "T_K")).transpose()?,
        })
    }
}

impl<R: Read> Iterator for TelemetryReader<R> {
    type Item = Result<TelemetryRecord, CliError>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = self.rows.next()?;
        Some(match record {
            Ok(r) => self.parse(&r),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Err(CliError::Input(format!("telemetry line {line}: {e}")))
            }
        })
    }
}

/// Write records with the standard header; `T_K` is written when every
/// record carries a temperature.
pub fn write_telemetry<W: std::io::Write>(out: W, records: &[TelemetryRecord]) -> Result<(), CliError> {
    let with_temp = records.iter().all(|r| r.temperature.is_some());
    let mut w = csv::Writer::from_writer(out);
    if with_temp {
        w.write_record(["t_h", "v_V", "T_K"])?;
    } else {
        w.write_record(["t_h", "v_V"])?;
    }
    for r in records {
        let mut row = vec![crate::fmt9(r.t), crate::fmt9(r.v)];
        if let (true, Some(temp)) = (with_temp, r.temperature) {
            row.push(crate::fmt9(temp));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
