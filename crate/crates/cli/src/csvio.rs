//! CSV files read and written by the harness. Floats are written in
//! scientific notation with 16 significant digits, so they round-trip.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use iwp_core::estimation::EstimateRow;
use iwp_core::sim::{Measurement, RegimeTrace, TraceRow};
use iwp_core::{Regime, State};

use crate::error::CliError;

pub const TRACE_HEADER: [&str; 7] = ["t", "phi1", "omega1", "omega2", "u", "y", "regime"];
pub const REPORT_HEADER: [&str; 8] = ["t", "y", "u", "phi1_hat", "omega1_hat", "omega2_hat", "regime", "log_k"];

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("cannot write {}: {e}", path.display()))
}

pub fn write_trace(path: &Path, trace: &RegimeTrace<f64>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = write_err(path);
    w.write_record(TRACE_HEADER).map_err(&err)?;
    for r in &trace.rows {
        let x = r.x;
        w.write_record([num(r.t), num(x.phi1), num(x.omega1), num(x.omega2), num(r.u), num(r.y), r.regime.code().to_string()])
            .map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measurements(path: &Path, m: &[Measurement<f64>]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = write_err(path);
    w.write_record(["t", "y", "u"]).map_err(&err)?;
    for r in m {
        w.write_record([num(r.t), num(r.y), num(r.u)]).map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, rows: &[EstimateRow<f64>]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = write_err(path);
    w.write_record(REPORT_HEADER).map_err(&err)?;
    for r in rows {
        let x = r.x_hat;
        w.write_record([
            num(r.t),
            num(r.y),
            num(r.u),
            num(x.phi1),
            num(x.omega1),
            num(x.omega2),
            r.regime.code().to_string(),
            num(r.log_k),
        ])
        .map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

/// Regime of each sample: one column per named timeline, codes 1 and 2.
pub fn write_regimes(path: &Path, t: &[f64], columns: &[(&str, Vec<Regime>)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = write_err(path);
    let mut header = vec!["t"];
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header).map_err(&err)?;
    for (k, tk) in t.iter().enumerate() {
        let mut rec = vec![num(*tk)];
        rec.extend(columns.iter().map(|(_, r)| r.get(k).map_or(String::new(), |r| r.code().to_string())));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut f = File::create(path).map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(f, "{text}")?;
    Ok(())
}

/// Parsed CSV with named columns.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path, allowed: &[&str], required: &[&str]) -> Result<Self, CliError> {
        let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| bad(format!("cannot open: {e}")))?;
        let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(bad("empty file, expected a header line".into()));
        }
        for h in &header {
            if !allowed.contains(&h.as_str()) {
                return Err(bad(format!("unexpected column `{h}` (allowed: {})", allowed.join(","))));
            }
        }
        for r in required {
            if !header.iter().any(|h| h == r) {
                return Err(bad(format!("missing column `{r}`")));
            }
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(format!("row {k}: {e}")))?;
            let vals = rec
                .iter()
                .zip(&header)
                .map(|(v, h)| {
                    let x: f64 = v.parse().map_err(|_| bad(format!("row {k}, column `{h}`: `{v}` is not a number")))?;
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(bad(format!("row {k}, column `{h}`: value is not finite")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
        }
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Measurements plus the optional wheel and pendulum rate columns of a lab
/// recording, which are only used for metrics.
#[derive(Debug, Clone)]
pub struct MeasurementFile {
    pub samples: Vec<Measurement<f64>>,
    pub omega1: Option<Vec<f64>>,
    pub omega2: Option<Vec<f64>>,
}

pub fn read_measurements(path: &Path) -> Result<MeasurementFile, CliError> {
    let table = Table::read(path, &["t", "y", "u", "omega1", "omega2"], &["t", "y", "u"])?;
    let (t, y, u) = (table.col("t").unwrap(), table.col("y").unwrap(), table.col("u").unwrap());
    if t.is_empty() {
        return Err(CliError::Input(format!("{}: no measurement rows", path.display())));
    }
    let samples = (0..t.len()).map(|k| Measurement { t: t[k], y: y[k], u: u[k] }).collect();
    Ok(MeasurementFile { samples, omega1: table.col("omega1"), omega2: table.col("omega2") })
}

pub fn read_trace(path: &Path) -> Result<RegimeTrace<f64>, CliError> {
    let table = Table::read(path, &TRACE_HEADER, &TRACE_HEADER)?;
    let cols: Vec<Vec<f64>> = TRACE_HEADER.iter().map(|h| table.col(h).unwrap()).collect();
    let n = cols[0].len();
    if n < 2 {
        return Err(CliError::Input(format!("{}: a trace needs at least two rows", path.display())));
    }
    let rows = (0..n)
        .map(|k| {
            let code = cols[6][k];
            let regime = Regime::from_code(code as u8).filter(|_| code.fract() == 0.0).ok_or_else(|| {
                CliError::Input(format!("{}: row {k}: regime must be 1 or 2, got {code}", path.display()))
            })?;
            Ok(TraceRow {
                t: cols[0][k],
                x: State::new(cols[1][k], cols[2][k], cols[3][k]),
                regime,
                u: cols[4][k],
                y: cols[5][k],
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(RegimeTrace { dt: cols[0][1] - cols[0][0], rows })
}
