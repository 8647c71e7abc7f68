use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Mat};
use crate::model::{Plant, Regime, State};
use crate::rk4::{rk4_step, rk4_step_with_jacobian};
use crate::scalar::Scalar;

use super::{divergence, Interval, Observer, RegimeMemory, WheelOnStick};

/// Smallest eigenvalue tolerated in the covariance before the filter is
/// declared diverged.
const PSD_TOLERANCE: f64 = -1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EkfState<T> {
    pub x_hat: State<T>,
    pub p: Mat<T>,
    pub q: Mat<T>,
    /// Variance of the angle measurement.
    pub r: T,
}

impl<T: Scalar> EkfState<T> {
    pub fn new(x_hat: State<T>, p_diag: [T; 3], q_diag: [T; 3], r: T) -> Self {
        EkfState { x_hat, p: Mat::from_diag(&p_diag), q: Mat::from_diag(&q_diag), r }
    }
}

/// Jacobian of the RK4 one-step map of the regime's model at `x`.
pub fn ekf_jacobian<T: Scalar>(plant: &Plant<T>, regime: Regime, x: &State<T>, u: T, dt: T) -> Mat<T> {
    let f = |v: &[T; 3]| plant.drift(regime, &State::from_array(*v), u).to_array();
    let jac = |v: &[T; 3]| plant.drift_jacobian(regime, &State::from_array(*v));
    rk4_step_with_jacobian(f, jac, &x.to_array(), dt).1
}

/// Time update: RK4 prediction of the mean, `P⁻ = F P Fᵀ + Q`. Process noise
/// enters additively after the step, so `L = I`.
pub fn ekf_predict<T: Scalar>(s: &EkfState<T>, plant: &Plant<T>, regime: Regime, u: T, dt: T) -> EkfState<T> {
    let f = |v: &[T; 3]| plant.drift(regime, &State::from_array(*v), u).to_array();
    let jac = |v: &[T; 3]| plant.drift_jacobian(regime, &State::from_array(*v));
    let (x_next, big_f) = rk4_step_with_jacobian(f, jac, &s.x_hat.to_array(), dt);
    let p = &(&(&big_f * &s.p) * &big_f.transpose()) + &s.q;
    EkfState { x_hat: State::from_array(x_next), p, q: s.q.clone(), r: s.r }
}

/// Measurement update with `y = φ1 + v`.
pub fn ekf_update<T: Scalar>(s: &EkfState<T>, regime: Regime, y: T) -> Result<EkfState<T>> {
    let innovation_var = s.p[(0, 0)] + s.r;
    if !(innovation_var > T::zero()) || innovation_var.is_nan() {
        return Err(Error::Design {
            regime,
            reason: format!("innovation variance {innovation_var} is not invertible"),
        });
    }
    let gain: Vec<T> = (0..3).map(|i| s.p[(i, 0)] / innovation_var).collect();
    let innovation = y - s.x_hat.phi1;
    let x = State::new(
        s.x_hat.phi1 + gain[0] * innovation,
        s.x_hat.omega1 + gain[1] * innovation,
        s.x_hat.omega2 + gain[2] * innovation,
    );
    // P⁺ = P⁻ − K H P⁻ with H = [1 0 0]
    let p = Mat::from_fn(3, 3, |i, j| s.p[(i, j)] - gain[i] * s.p[(0, j)]).symmetrized();
    Ok(EkfState { x_hat: x, p, q: s.q.clone(), r: s.r })
}

/// One predict/update cycle. The returned covariance is symmetrized and
/// checked for positive semidefiniteness.
pub fn ekf_step<T: Scalar>(
    s: &EkfState<T>,
    plant: &Plant<T>,
    regime: Regime,
    u: T,
    y: T,
    dt: T,
    step: usize,
) -> Result<EkfState<T>> {
    let predicted = ekf_predict(s, plant, regime, u, dt);
    let next = ekf_update(&predicted, regime, y)?;
    divergence("ekf", step, &next.x_hat)?;
    if !next.p.is_finite() {
        return Err(Error::Divergence { observer: "ekf", step, reason: "covariance is not finite".into() });
    }
    let min_eig = symmetric_eigenvalues(&next.p)[0];
    if min_eig < T::of(PSD_TOLERANCE) {
        return Err(Error::Divergence {
            observer: "ekf",
            step,
            reason: format!("covariance lost positive semidefiniteness (eigenvalue {min_eig})"),
        });
    }
    Ok(next)
}

/// Extended Kalman filter on the RK4-discretized regime models.
#[derive(Clone, Debug)]
pub struct Ekf<T> {
    state: EkfState<T>,
    plant: Plant<T>,
    memory: RegimeMemory,
}

impl<T: Scalar> Ekf<T> {
    pub fn new(plant: Plant<T>, initial: EkfState<T>) -> Self {
        Ekf { state: initial, plant, memory: RegimeMemory::new(WheelOnStick::Hold) }
    }

    pub fn with_wheel_on_stick(mut self, policy: WheelOnStick) -> Self {
        self.memory.on_stick = policy;
        self
    }

    pub fn state(&self) -> &EkfState<T> {
        &self.state
    }

    pub fn covariance(&self) -> &Mat<T> {
        &self.state.p
    }
}

impl<T: Scalar> Observer<T> for Ekf<T> {
    fn name(&self) -> &'static str {
        "ekf"
    }

    fn estimate(&self) -> State<T> {
        self.state.x_hat
    }

    fn advance(&mut self, regime: Regime, interval: &Interval<T>, step: usize) -> Result<State<T>> {
        let mut s = self.state.clone();
        self.memory.enter(regime, &mut s.x_hat);
        self.state = ekf_step(&s, &self.plant, regime, interval.u, interval.y_next, interval.dt, step)?;
        Ok(self.state.x_hat)
    }
}

/// Noise-free one-step prediction with the regime's RK4 map.
pub fn predict_state<T: Scalar>(plant: &Plant<T>, regime: Regime, x: &State<T>, u: T, dt: T) -> State<T> {
    let f = |v: &[T; 3]| plant.drift(regime, &State::from_array(*v), u).to_array();
    State::from_array(rk4_step(f, &x.to_array(), dt))
}
