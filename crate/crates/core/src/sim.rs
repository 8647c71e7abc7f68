//! Digital twin: fixed-step simulation of the switched pendulum.
//!
//! Each step first applies the regime guard at the current grid point, then
//! integrates the active model with RK4 under a zero-order-hold input:
//!
//! * sticking → non-sticking as soon as the stiction condition fails;
//! * non-sticking → sticking when the wheel rate crossed zero during the
//!   previous step (or ended within [`ZERO_CROSSING_EPS`] of it) and the
//!   stiction condition holds. The wheel rate is then projected to exactly 0.
//!
//! There is no event localization inside a step, so switches land on the grid.
//! Process noise is added after the deterministic step, measurement noise only
//! to the emitted angle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Plant, Regime, State};
use crate::rk4::rk4_step_checked;
use crate::scalar::Scalar;

/// Wheel rates below this magnitude count as a zero crossing.
pub const ZERO_CROSSING_EPS: f64 = 1e-4;

/// Default sampling time.
pub const DEFAULT_DT: f64 = 0.005;

/// Motor torque, held constant over each step.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSignal<T> {
    Constant(T),
    /// One value per grid point; the last value is held past the end and an
    /// empty list means zero torque.
    Samples(Vec<T>),
}

impl<T: Scalar> InputSignal<T> {
    pub fn at(&self, k: usize) -> T {
        match self {
            InputSignal::Constant(m) => *m,
            InputSignal::Samples(v) => v.get(k).or_else(|| v.last()).copied().unwrap_or_else(T::zero),
        }
    }
}

impl<T: Scalar> Default for InputSignal<T> {
    fn default() -> Self {
        InputSignal::Constant(T::zero())
    }
}

/// Zero-mean Gaussian noise; all entries are variances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel<T> {
    pub q_diag: [T; 3],
    pub r_var: T,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn measurement_only(r_var: T) -> Self {
        NoiseModel { q_diag: [T::zero(); 3], r_var }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub t_end: T,
    pub x0: State<T>,
    pub input: InputSignal<T>,
    pub noise: Option<NoiseModel<T>>,
    pub seed: u64,
}

impl<T: Scalar> SimConfig<T> {
    /// Free drop from `x0` with zero torque, no noise, default sampling.
    pub fn drop_down(x0: State<T>, t_end: T) -> Self {
        SimConfig { dt: T::of(DEFAULT_DT), t_end, x0, input: InputSignal::default(), noise: None, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end must be at least one step ({}), got {}; the trace would be empty",
                self.dt, self.t_end
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidConfig("initial state is not finite".into()));
        }
        if let Some(n) = &self.noise {
            let ok = n.q_diag.iter().chain(std::iter::once(&n.r_var)).all(|v| v.is_finite() && *v >= T::zero());
            if !ok {
                return Err(Error::InvalidConfig("noise variances must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    /// Number of integration steps; the trace has one more row.
    pub fn steps(&self) -> usize {
        // tolerate t_end being a float multiple of dt that rounds just below
        let ratio = (self.t_end / self.dt).as_f64();
        (ratio + 1e-9).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<T> {
    pub t: T,
    pub x: State<T>,
    /// Model that governs the step leaving this row.
    pub regime: Regime,
    pub u: T,
    /// Measured angle.
    pub y: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeTrace<T> {
    pub dt: T,
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> RegimeTrace<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &State<T>> + '_ {
        self.rows.iter().map(|r| &r.x)
    }

    pub fn regimes(&self) -> Vec<Regime> {
        self.rows.iter().map(|r| r.regime).collect()
    }

    /// Indices `k` at which the label changes between row `k − 1` and row `k`.
    pub fn switch_indices(&self) -> Vec<usize> {
        (1..self.rows.len()).filter(|&k| self.rows[k].regime != self.rows[k - 1].regime).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement<T> {
    pub t: T,
    pub y: T,
    pub u: T,
}

fn crossed_zero<T: Scalar>(before: T, after: T) -> bool {
    before * after < T::zero() || after.abs() < T::of(ZERO_CROSSING_EPS)
}

fn gaussian<T: Scalar>(rng: &mut ChaCha8Rng, var: T) -> T {
    if var == T::zero() {
        return T::zero();
    }
    let z: f64 = StandardNormal.sample(rng);
    T::of(z) * var.sqrt()
}

pub fn simulate<T: Scalar>(cfg: &SimConfig<T>, plant: &Plant<T>) -> Result<RegimeTrace<T>> {
    cfg.validate()?;
    let steps = cfg.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = cfg.noise;

    let mut x = cfg.x0;
    let mut regime = Regime::NonSticking;
    let mut crossing = x.omega2.abs() < T::of(ZERO_CROSSING_EPS);
    let mut rows = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let u = cfg.input.at(k);
        match regime {
            Regime::Sticking if !plant.stiction_holds(&x, u) => regime = Regime::NonSticking,
            Regime::NonSticking if crossing && plant.stiction_holds(&x, u) => {
                regime = Regime::Sticking;
                x.omega2 = T::zero();
            }
            _ => {}
        }

        let y = x.phi1 + noise.map_or(T::zero(), |n| gaussian(&mut rng, n.r_var));
        rows.push(TraceRow { t: T::of(k as f64) * cfg.dt, x, regime, u, y });
        if k == steps {
            break;
        }

        let f = |v: &[T; 3]| plant.drift(regime, &State::from_array(*v), u).to_array();
        let mut next = State::from_array(rk4_step_checked(f, &x.to_array(), cfg.dt, k)?);
        if let Some(n) = noise {
            next.phi1 = next.phi1 + gaussian(&mut rng, n.q_diag[0]);
            next.omega1 = next.omega1 + gaussian(&mut rng, n.q_diag[1]);
            // the sticking model pins the wheel
            if regime == Regime::NonSticking {
                next.omega2 = next.omega2 + gaussian(&mut rng, n.q_diag[2]);
            }
        }
        crossing = regime == Regime::NonSticking && crossed_zero(x.omega2, next.omega2);
        x = next;
    }
    Ok(RegimeTrace { dt: cfg.dt, rows })
}

/// Projects a trace onto what a sensor would report: time, measured angle
/// and applied torque.
pub fn emit_measurements<T: Scalar>(trace: &RegimeTrace<T>) -> Vec<Measurement<T>> {
    trace.rows.iter().map(|r| Measurement { t: r.t, y: r.y, u: r.u }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrictionParams, MechParams};
    use std::f64::consts::PI;

    #[test]
    fn resting_at_the_bottom_stays_stuck() {
        let cfg = SimConfig::drop_down(State::new(PI, 0.0, 0.0), 2.0);
        let trace = simulate(&cfg, &Plant::nominal()).unwrap();
        assert_eq!(trace.len(), 401);
        for r in &trace.rows {
            assert_eq!(r.regime, Regime::Sticking);
            assert_eq!(r.x.omega2, 0.0);
            assert!((r.x.phi1 - PI).abs() < 1e-12 && r.x.omega1.abs() < 1e-12);
        }
    }

    #[test]
    fn empty_horizon_is_rejected() {
        let cfg = SimConfig::drop_down(State::new(0.1, 0.0, 0.0), 0.0);
        assert!(matches!(simulate(&cfg, &Plant::nominal()), Err(Error::InvalidConfig(_))));
        let mut cfg = SimConfig::drop_down(State::new(f64::NAN, 0.0, 0.0), 1.0);
        assert!(simulate(&cfg, &Plant::nominal()).is_err());
        cfg.x0 = State::zero();
        cfg.dt = -0.1;
        assert!(simulate(&cfg, &Plant::nominal()).is_err());
    }

    #[test]
    fn same_seed_same_trace() {
        let mut cfg = SimConfig::drop_down(State::new(0.01, 0.0, 0.0), 5.0);
        cfg.noise = Some(NoiseModel { q_diag: [1e-8, 1e-6, 1e-6], r_var: 1e-3 });
        cfg.seed = 42;
        let a = simulate(&cfg, &Plant::nominal()).unwrap();
        let b = simulate(&cfg, &Plant::nominal()).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        assert_ne!(a, simulate(&cfg, &Plant::nominal()).unwrap());
    }

    #[test]
    fn grid_is_uniform() {
        let cfg = SimConfig::drop_down(State::new(0.5, 0.0, 0.0), 1.0);
        let trace = simulate(&cfg, &Plant::nominal()).unwrap();
        assert_eq!(trace.len(), 201);
        for (k, r) in trace.rows.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 0.005);
        }
    }

    #[test]
    fn measurements_are_a_projection() {
        let empty = RegimeTrace::<f64> { dt: 0.005, rows: vec![] };
        assert!(emit_measurements(&empty).is_empty());

        let cfg = SimConfig::drop_down(State::new(0.01, 0.0, 0.0), 3.0);
        let trace = simulate(&cfg, &Plant::nominal()).unwrap();
        let m = emit_measurements(&trace);
        assert_eq!(m.len(), trace.len());
        for (r, s) in trace.rows.iter().zip(&m) {
            assert_eq!(r.x.phi1, s.y);
            assert_eq!(r.t, s.t);
            assert_eq!(r.u, s.u);
        }
    }

    #[test]
    fn measurement_noise_has_the_configured_variance() {
        let mut cfg = SimConfig::drop_down(State::new(0.01, 0.0, 0.0), 30.0);
        cfg.noise = Some(NoiseModel::measurement_only(0.001));
        cfg.seed = 7;
        let trace = simulate(&cfg, &Plant::nominal()).unwrap();
        let m = emit_measurements(&trace);
        assert!(m.len() >= 6000);
        let resid: Vec<f64> = trace.rows.iter().zip(&m).map(|(r, s)| s.y - r.x.phi1).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var - 0.001).abs() < 0.2 * 0.001, "sample variance {var}");
    }

    #[test]
    fn frictionless_wheel_never_sticks() {
        let plant = Plant::new(MechParams::nominal(), FrictionParams::disabled());
        let cfg = SimConfig::drop_down(State::new(1.0, 0.0, 0.0), 5.0);
        let trace = simulate(&cfg, &plant).unwrap();
        assert!(trace.rows.iter().all(|r| r.regime == Regime::NonSticking));
    }

    #[test]
    fn sample_input_holds_last_value() {
        let s = InputSignal::Samples(vec![1.0, 2.0]);
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(5), 2.0);
        assert_eq!(InputSignal::<f64>::Samples(vec![]).at(3), 0.0);
    }
}
