//! State observers for the switched pendulum.
//!
//! All three observers carry the full estimate `[φ1, ω1, ω2]` and advance one
//! sampling interval at a time through [`Observer::advance`], using whichever
//! regime model the caller selected for that interval. While the sticking model
//! is active the wheel-rate estimate is held (or zeroed on entry, see
//! [`WheelOnStick`]).

mod ekf;
mod nol;
mod nop;

pub use ekf::{ekf_jacobian, ekf_predict, ekf_step, ekf_update, Ekf, EkfState};
pub use ekf::predict_state;
pub use nol::{
    alpha_term, nol_design, nol_step, observability_matrix, system_matrix, NolDesign, NolGainSpec, NolMode,
    NolObserver, RegimeGains,
};
pub use nop::{
    compensation, compensation_from_states, desired_hamiltonian, desired_hamiltonian_gradient,
    desired_hamiltonian_weight, error_storage, nop_field, nop_step, NopDesign, NopObserver,
};

use crate::error::Result;
use crate::model::{Regime, State};
use crate::scalar::Scalar;

/// One sampling interval `[t_{k−1}, t_k]` as seen by an observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<T> {
    /// Motor torque held over the interval.
    pub u: T,
    /// Measured angle at the start of the interval.
    pub y_prev: T,
    /// Measured angle at the end of the interval.
    pub y_next: T,
    pub dt: T,
}

impl<T: Scalar> Interval<T> {
    /// Measurement linearly interpolated at fraction `s ∈ [0, 1]` of the
    /// interval.
    pub fn y_at(&self, s: T) -> T {
        self.y_prev + (self.y_next - self.y_prev) * s
    }
}

/// How the friction torque enters an observer's input `u = M − M_S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FrictionCompensation {
    /// `M_S` evaluated at the observer's own wheel-rate estimate.
    #[default]
    Estimated,
    /// `M_S` dropped from the input.
    Ignored,
}

/// What happens to the wheel-rate estimate when an observer switches from the
/// non-sticking to the sticking model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WheelOnStick {
    /// Keep the current estimate; the sticking model does not change it.
    #[default]
    Hold,
    /// Project it to zero.
    Zero,
}

/// Observer interface driven by the estimation loop.
pub trait Observer<T: Scalar>: Send {
    fn name(&self) -> &'static str;

    /// Estimate at the end of the most recently processed interval.
    fn estimate(&self) -> State<T>;

    /// Advances the estimate over one interval with the given regime model and
    /// returns the new estimate. `step` is the index of the sample at the end
    /// of the interval and only used for error reporting.
    fn advance(&mut self, regime: Regime, interval: &Interval<T>, step: usize) -> Result<State<T>>;
}

/// Regime bookkeeping shared by the observers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RegimeMemory {
    pub last: Option<Regime>,
    pub on_stick: WheelOnStick,
}

impl RegimeMemory {
    pub fn new(on_stick: WheelOnStick) -> Self {
        RegimeMemory { last: None, on_stick }
    }

    /// Applies the entry policy to `x` if this interval enters the sticking
    /// model, and records the regime.
    pub fn enter<T: Scalar>(&mut self, regime: Regime, x: &mut State<T>) {
        if regime == Regime::Sticking
            && self.last != Some(Regime::Sticking)
            && self.on_stick == WheelOnStick::Zero
        {
            x.omega2 = T::zero();
        }
        self.last = Some(regime);
    }
}

pub(crate) fn divergence<T: Scalar>(observer: &'static str, step: usize, x: &State<T>) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(crate::error::Error::Divergence { observer, step, reason: "estimate is not finite".into() })
    }
}
