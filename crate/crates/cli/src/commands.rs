use std::path::{Path, PathBuf};

use iwp_core::estimation::{
    interval_regimes, regime_agreement, rmse, run_estimation, sampling_interval, settling_time, state_rmse, EstimateRow,
    RegimeSource,
};
use iwp_core::sim::{emit_measurements, simulate};
use iwp_core::{Regime, State};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ObserverKind};
use crate::csvio::{self, MeasurementFile};
use crate::error::CliError;

/// Paths and overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub measurements: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn out_dir(cfg: &ExperimentConfig, ov: &Overrides) -> Result<PathBuf, CliError> {
    let dir = ov.out.clone().or_else(|| cfg.io.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let mut sim = cfg.sim_config();
    if let Some(seed) = ov.seed {
        sim.seed = seed;
    }
    let trace = simulate(&sim, &cfg.plant()?)?;
    let dir = out_dir(cfg, ov)?;
    let (tp, mp) = (dir.join("trace.csv"), dir.join("measurements.csv"));
    csvio::write_trace(&tp, &trace)?;
    csvio::write_measurements(&mp, &emit_measurements(&trace))?;
    Ok(vec![tp, mp])
}

/// Reference values for the metrics, one entry per measurement.
#[derive(Debug, Clone, Default)]
struct Reference {
    states: Vec<Option<State<f64>>>,
    phi1: Option<Vec<f64>>,
    omega1: Option<Vec<f64>>,
    omega2: Option<Vec<f64>>,
    /// Regime of the interval starting at each sample.
    regimes: Option<Vec<Regime>>,
}

fn reference(cfg: &ExperimentConfig, meas: &MeasurementFile) -> Result<Reference, CliError> {
    let n = meas.samples.len();
    if let Some(path) = &cfg.io.reference {
        let trace = csvio::read_trace(path)?;
        if trace.len() != n {
            return Err(CliError::Input(format!(
                "reference {} has {} rows, measurements have {n}",
                path.display(),
                trace.len()
            )));
        }
        let dt = trace.dt;
        for (k, (r, m)) in trace.rows.iter().zip(&meas.samples).enumerate() {
            if (r.t - m.t).abs() > 1e-6 * dt.abs() {
                return Err(CliError::Input(format!("row {k}: reference time {} differs from measurement time {}", r.t, m.t)));
            }
        }
        let col = |f: fn(&State<f64>) -> f64| Some(trace.rows.iter().map(|r| f(&r.x)).collect::<Vec<_>>());
        return Ok(Reference {
            states: trace.rows.iter().map(|r| Some(r.x)).collect(),
            phi1: col(|s| s.phi1),
            omega1: col(|s| s.omega1),
            omega2: col(|s| s.omega2),
            regimes: Some(trace.regimes()[..n - 1].to_vec()),
        });
    }
    // lab recordings: the encoder angle is the only angle reference
    Ok(Reference {
        states: vec![None; n],
        phi1: Some(meas.samples.iter().map(|m| m.y).collect()),
        omega1: meas.omega1.clone(),
        omega2: meas.omega2.clone(),
        regimes: None,
    })
}

fn rmse_from(est: &[EstimateRow<f64>], reference: Option<&Vec<f64>>, pick: fn(&State<f64>) -> f64, t_from: f64) -> Option<f64> {
    let pairs = est.iter().zip(reference?).filter(|(row, _)| row.t >= t_from);
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.map(|(row, r)| (pick(&row.x_hat), *r)).unzip();
    rmse(a, b)
}

fn summarize(cfg: &ExperimentConfig, name: &str, rows: &[EstimateRow<f64>], r: &Reference) -> Value {
    let m = &cfg.metrics;
    let rmse = if r.states.iter().all(Option::is_some) {
        let refs: Vec<State<f64>> = r.states.iter().flatten().copied().collect();
        state_rmse(rows, &refs, m.rmse_from)
            .map_or(json!(null), |e| json!({"phi1": e[0], "omega1": e[1], "omega2": e[2]}))
    } else {
        json!({
            "phi1": rmse_from(rows, r.phi1.as_ref(), |s| s.phi1, m.rmse_from),
            "omega1": rmse_from(rows, r.omega1.as_ref(), |s| s.omega1, m.rmse_from),
            "omega2": rmse_from(rows, r.omega2.as_ref(), |s| s.omega2, m.rmse_from),
        })
    };
    let agreement = r
        .regimes
        .as_ref()
        .and_then(|reg| regime_agreement(&interval_regimes(rows), reg, m.switch_margin));
    let settling = r.phi1.as_ref().and_then(|phi| {
        let t: Vec<f64> = rows.iter().map(|row| row.t).collect();
        let est: Vec<f64> = rows.iter().map(|row| row.x_hat.phi1).collect();
        settling_time(&t, &est, phi, m.settle_tol)
    });
    json!({
        "observer": name,
        "rows": rows.len(),
        "rmse": rmse,
        "regime_agreement": agreement,
        "settling_time": settling,
        "final_estimate": rows.last().map(|row| row.x_hat.to_array()),
    })
}

fn load_measurements(cfg: &ExperimentConfig, ov: &Overrides) -> Result<(MeasurementFile, f64), CliError> {
    let path = ov
        .measurements
        .clone()
        .or_else(|| cfg.io.measurements.clone())
        .ok_or_else(|| CliError::Input("no measurement file given (--measurements or io.measurements)".into()))?;
    let meas = csvio::read_measurements(&path)?;
    let dt = sampling_interval(&meas.samples).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((meas, dt))
}

type RunResult = Result<Vec<EstimateRow<f64>>, CliError>;

fn run_one(cfg: &ExperimentConfig, kind: ObserverKind, meas: &MeasurementFile, dt: f64) -> RunResult {
    let mut obs = cfg.observer(kind, dt)?;
    let plant = cfg.plant()?;
    let source = RegimeSource::Selector(cfg.selector()?);
    Ok(run_estimation(obs.as_mut(), &plant, &meas.samples, source, cfg.initial_regime()?)?)
}

fn report_path(dir: &Path, kind: ObserverKind) -> PathBuf {
    dir.join(format!("report_{}.csv", kind.name()))
}

pub fn cmd_estimate(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let (meas, dt) = load_measurements(cfg, ov)?;
    let reference = reference(cfg, &meas)?;
    let kind = cfg.observer.kind;
    let rows = run_one(cfg, kind, &meas, dt)?;
    let dir = out_dir(cfg, ov)?;
    let (rp, sp) = (report_path(&dir, kind), dir.join(format!("summary_{}.json", kind.name())));
    csvio::write_report(&rp, &rows)?;
    csvio::write_json(&sp, &summarize(cfg, kind.name(), &rows, &reference))?;
    Ok(vec![rp, sp])
}

/// Runs all three observers in parallel. A failing observer does not stop
/// the others; its error is recorded in the summary and the most severe one
/// is returned after every output has been written.
pub fn cmd_compare(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let (meas, dt) = load_measurements(cfg, ov)?;
    let reference = reference(cfg, &meas)?;
    let results: Vec<(ObserverKind, RunResult)> = std::thread::scope(|s| {
        let handles: Vec<_> = ObserverKind::ALL
            .iter()
            .map(|&kind| {
                let meas = &meas;
                (kind, s.spawn(move || run_one(cfg, kind, meas, dt)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(kind, h)| {
                let r = h.join().unwrap_or_else(|_| Err(CliError::Numerical(format!("{} panicked", kind.name()))));
                (kind, r)
            })
            .collect()
    });

    let dir = out_dir(cfg, ov)?;
    let mut written = Vec::new();
    let mut summary = serde_json::Map::new();
    let mut timelines: Vec<(&str, Vec<Regime>)> = Vec::new();
    let mut failure: Option<CliError> = None;
    for (kind, result) in results {
        match result {
            Ok(rows) => {
                let p = report_path(&dir, kind);
                csvio::write_report(&p, &rows)?;
                written.push(p);
                summary.insert(kind.name().into(), summarize(cfg, kind.name(), &rows, &reference));
                timelines.push((kind.name(), interval_regimes(&rows)));
            }
            Err(e) => {
                eprintln!("{}: {e}", kind.name());
                summary.insert(kind.name().into(), json!({"observer": kind.name(), "error": e.to_string()}));
                if failure.as_ref().is_none_or(|f| e.exit_code() > f.exit_code()) {
                    failure = Some(e);
                }
            }
        }
    }
    if let Some(r) = &reference.regimes {
        timelines.push(("reference", r.clone()));
    }
    let t: Vec<f64> = meas.samples.iter().map(|m| m.t).collect();
    let rp = dir.join("regimes.csv");
    csvio::write_regimes(&rp, &t, &timelines)?;
    let sp = dir.join("summary.json");
    csvio::write_json(&sp, &Value::Object(summary))?;
    written.extend([rp, sp]);
    match failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}
