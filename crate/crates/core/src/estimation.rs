//! Running an observer over a measurement stream, plus the metrics used to
//! judge the result.

use crate::error::{Error, Result};
use crate::model::{Plant, Regime, State};
use crate::observers::{Interval, Observer};
use crate::scalar::Scalar;
use crate::selection::{select, SelectorConfig};
use crate::sim::Measurement;

/// Where the regime for each interval comes from.
#[derive(Clone, Copy, Debug)]
pub enum RegimeSource<'a, T> {
    /// Bayes-factor selection from the previous estimate.
    Selector(SelectorConfig<T>),
    /// A fixed sequence, one entry per interval (`len = measurements − 1`).
    Given(&'a [Regime]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRow<T> {
    pub t: T,
    pub y: T,
    pub u: T,
    pub x_hat: State<T>,
    /// Regime used over the interval ending at this row. Row 0 carries the
    /// initial regime.
    pub regime: Regime,
    /// `log K` behind the selection (zero for given regimes and row 0).
    pub log_k: T,
}

/// Checks the time column and returns the sampling interval.
pub fn sampling_interval<T: Scalar>(m: &[Measurement<T>]) -> Result<T> {
    if m.len() < 2 {
        return Err(Error::InvalidConfig(format!("need at least two measurements, got {}", m.len())));
    }
    let dt = m[1].t - m[0].t;
    if !(dt > T::zero()) {
        return Err(Error::InvalidConfig(format!("row 1: time does not increase (dt = {dt})")));
    }
    let tol = dt * T::of(1e-6);
    for (k, w) in m.windows(2).enumerate() {
        let step = w[1].t - w[0].t;
        if (step - dt).abs() > tol {
            return Err(Error::InvalidConfig(format!(
                "row {}: sampling is not uniform (step {step}, expected {dt})",
                k + 1
            )));
        }
    }
    Ok(dt)
}

/// Runs `observer` over the measurements. For each `k ≥ 1` the regime of the
/// interval `[t_{k−1}, t_k]` is chosen first, then the observer advances with
/// input `u_{k−1}` and the samples `y_{k−1}`, `y_k`.
pub fn run_estimation<T: Scalar>(
    observer: &mut dyn Observer<T>,
    plant: &Plant<T>,
    measurements: &[Measurement<T>],
    source: RegimeSource<'_, T>,
    initial_regime: Regime,
) -> Result<Vec<EstimateRow<T>>> {
    let dt = sampling_interval(measurements)?;
    if let RegimeSource::Given(r) = source {
        if r.len() + 1 < measurements.len() {
            return Err(Error::InvalidConfig(format!(
                "{} regimes given for {} intervals",
                r.len(),
                measurements.len() - 1
            )));
        }
    }
    let m0 = measurements[0];
    let mut rows = Vec::with_capacity(measurements.len());
    rows.push(EstimateRow { t: m0.t, y: m0.y, u: m0.u, x_hat: observer.estimate(), regime: initial_regime, log_k: T::zero() });
    let mut current = initial_regime;
    for k in 1..measurements.len() {
        let (prev, next) = (measurements[k - 1], measurements[k]);
        let (regime, log_k) = match source {
            RegimeSource::Selector(cfg) => {
                let s = select(plant, next.y, &observer.estimate(), prev.u, dt, &cfg, current);
                (s.regime, s.log_k)
            }
            RegimeSource::Given(r) => (r[k - 1], T::zero()),
        };
        current = regime;
        let interval = Interval { u: prev.u, y_prev: prev.y, y_next: next.y, dt };
        let x_hat = observer.advance(regime, &interval, k)?;
        rows.push(EstimateRow { t: next.t, y: next.y, u: next.u, x_hat, regime, log_k });
    }
    Ok(rows)
}

/// Root-mean-square difference between `a` and `b`; `None` when empty.
pub fn rmse<T: Scalar>(a: impl IntoIterator<Item = T>, b: impl IntoIterator<Item = T>) -> Option<T> {
    let (mut sum, mut n) = (T::zero(), 0usize);
    for (x, y) in a.into_iter().zip(b) {
        let d = x - y;
        sum = sum + d * d;
        n += 1;
    }
    (n > 0).then(|| (sum / T::of(n as f64)).sqrt())
}

/// Per-component RMSE of the estimates against reference states, restricted
/// to rows with `t ≥ t_from`.
pub fn state_rmse<T: Scalar>(rows: &[EstimateRow<T>], reference: &[State<T>], t_from: T) -> Option<[T; 3]> {
    let pairs: Vec<_> = rows.iter().zip(reference).filter(|(r, _)| r.t >= t_from).collect();
    let component = |f: fn(&State<T>) -> T| rmse(pairs.iter().map(|(r, _)| f(&r.x_hat)), pairs.iter().map(|(_, s)| f(s)));
    Some([component(|s| s.phi1)?, component(|s| s.omega1)?, component(|s| s.omega2)?])
}

/// Fraction of intervals whose regime matches the reference, skipping
/// intervals within `margin` samples of a reference switch.
///
/// `estimated[k]` and `reference[k]` both describe the interval starting at
/// sample `k`. Returns `None` if every interval is excluded.
pub fn regime_agreement(estimated: &[Regime], reference: &[Regime], margin: usize) -> Option<f64> {
    let n = estimated.len().min(reference.len());
    let mut excluded = vec![false; n];
    for k in 1..n {
        if reference[k] != reference[k - 1] {
            for e in excluded.iter_mut().take((k + margin + 1).min(n)).skip(k.saturating_sub(margin)) {
                *e = true;
            }
        }
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for k in 0..n {
        if !excluded[k] {
            total += 1;
            hit += usize::from(estimated[k] == reference[k]);
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

/// Interval regimes of an estimation run, aligned with the sample that starts
/// each interval.
pub fn interval_regimes<T>(rows: &[EstimateRow<T>]) -> Vec<Regime> {
    rows.iter().skip(1).map(|r| r.regime).collect()
}

/// First time after which `|estimate − reference| < tol` holds for every
/// remaining sample; `None` if the last sample is still outside.
pub fn settling_time<T: Scalar>(t: &[T], estimate: &[T], reference: &[T], tol: T) -> Option<T> {
    let n = t.len().min(estimate.len()).min(reference.len());
    let mut first = None;
    for k in (0..n).rev() {
        if (estimate[k] - reference[k]).abs() < tol {
            first = Some(t[k]);
        } else {
            break;
        }
    }
    first
}
