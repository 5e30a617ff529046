//! Per-tick simulation records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    /// Measured pose in chart coordinates (rigid: position and rotation vector).
    pub eta: Vec<f64>,
    pub eta_r: Vec<f64>,
    pub theta_d: Vec<f64>,
    /// Modal projections `πᵢ·θ_d`.
    pub modes: Vec<f64>,
    pub f_c: Vec<f64>,
    pub tensions: Vec<f64>,
    pub brake: bool,
}

/// Rows for a robot with manifold dimension `dim` and `n` actuators.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub dim: usize,
    pub n: usize,
    pub rows: Vec<TraceRow>,
}

impl TraceLog {
    pub fn new(dim: usize, n: usize) -> Self {
        Self {
            dim,
            n,
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for prefix in ["eta", "etar", "thetad", "mode"] {
            h.extend((1..=self.dim).map(|i| format!("{prefix}_{i}")));
        }
        for prefix in ["fc", "tension"] {
            h.extend((1..=self.n).map(|i| format!("{prefix}_{i}")));
        }
        h.push("brake".into());
        h
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        for (what, len, expected) in [
            ("eta", row.eta.len(), self.dim),
            ("eta_r", row.eta_r.len(), self.dim),
            ("theta_d", row.theta_d.len(), self.dim),
            ("modes", row.modes.len(), self.dim),
            ("f_c", row.f_c.len(), self.n),
            ("tensions", row.tensions.len(), self.n),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got: len,
                });
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn brake_events(&self) -> usize {
        self.rows.iter().filter(|r| r.brake).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut record = vec![fmt(row.t)];
            for block in [&row.eta, &row.eta_r, &row.theta_d, &row.modes, &row.f_c, &row.tensions] {
                record.extend(block.iter().copied().map(fmt));
            }
            record.push(if row.brake { "1" } else { "0" }.into());
            w.write_record(&record)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// Parse CSV written by [`TraceLog::write_csv`]; dimensions come from the header.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(&format!("{prefix}_"))).count();
        let mut log = TraceLog::new(count("eta"), count("fc"));
        if log.header().iter().map(String::as_str).ne(header.iter()) {
            return Err(Error::InvalidParameter("unrecognized trace header".into()));
        }
        for record in r.records() {
            let record = record.map_err(csv_err)?;
            let values = record
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("trace value: {e}")))?;
            let mut it = values.into_iter();
            let mut take = |k: usize| it.by_ref().take(k).collect::<Vec<f64>>();
            let (d, n) = (log.dim, log.n);
            let t = take(1)[0];
            let row = TraceRow {
                t,
                eta: take(d),
                eta_r: take(d),
                theta_d: take(d),
                modes: take(d),
                f_c: take(n),
                tensions: take(n),
                brake: take(1)[0] != 0.0,
            };
            log.push(row)?;
        }
        Ok(log)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Nine significant digits.
fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("trace csv: {e}"))
}
