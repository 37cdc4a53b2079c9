//! Uniformly sampled multi-dimensional signals.

use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("signal has no samples")]
    Empty,
    #[error("header must start with `t` followed by at least one dimension")]
    BadHeader,
    #[error("duplicate dimension `{0}`")]
    DuplicateDimension(String),
    #[error("row {row}: expected {expected} values, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("row {row}: cannot parse `{value}` as a number")]
    BadNumber { row: usize, value: String },
    #[error("row {row}: time step {found} differs from {expected}")]
    NonUniform { row: usize, expected: f64, found: f64 },
    #[error("time step {0} must be positive and finite")]
    BadTimeStep(f64),
}

/// `samples[k][i]` is dimension `i` at time `k * delta_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub delta_t: f64,
    pub dims: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl Signal {
    pub fn new(delta_t: f64, dims: Vec<String>, samples: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(SignalError::BadTimeStep(delta_t));
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        for (i, d) in dims.iter().enumerate() {
            if dims[..i].contains(d) {
                return Err(SignalError::DuplicateDimension(d.clone()));
            }
        }
        for (row, s) in samples.iter().enumerate() {
            if s.len() != dims.len() {
                return Err(SignalError::RowLength { row, expected: dims.len(), found: s.len() });
            }
        }
        Ok(Signal { delta_t, dims, samples })
    }

    /// One-dimensional signal.
    pub fn scalar(name: &str, delta_t: f64, values: &[f64]) -> Result<Self, SignalError> {
        Signal::new(delta_t, vec![name.to_string()], values.iter().map(|&v| vec![v]).collect())
    }

    /// Index of the last sample.
    pub fn last_step(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d == name)
    }

    /// Reads CSV with header `t,<dim>,...` and uniform `t` spacing (tolerance `1e-9·δt`).
    pub fn from_csv<R: io::Read>(reader: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "t" {
            return Err(SignalError::BadHeader);
        }
        let dims: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(SignalError::RowLength { row, expected: header.len(), found: rec.len() });
            }
            let mut vals = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| SignalError::BadNumber { row, value: field.to_string() })?;
                vals.push(v);
            }
            times.push(vals[0]);
            samples.push(vals[1..].to_vec());
        }
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        // A single sample carries no spacing information.
        let delta_t = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(SignalError::BadTimeStep(delta_t));
        }
        for (row, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - delta_t).abs() > 1e-9 * delta_t {
                return Err(SignalError::NonUniform { row: row + 1, expected: delta_t, found: step });
            }
        }
        Signal::new(delta_t, dims, samples)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, SignalError> {
        Signal::from_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv<W: io::Write>(&self, writer: W) -> Result<(), SignalError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.dims.iter().cloned());
        w.write_record(&header)?;
        for (k, s) in self.samples.iter().enumerate() {
            let mut rec = vec![(k as f64 * self.delta_t).to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
