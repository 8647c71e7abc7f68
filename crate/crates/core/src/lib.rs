//! Inertia wheel pendulum with a sticking wheel.
//!
//! The crate models the pendulum as a switched system: a non-sticking model in
//! which the wheel turns against a Stribeck friction torque, and a sticking
//! model in which the wheel is held by static friction. On top of the model it
//! provides a fixed-step simulator that acts as a digital twin of the drop-down
//! experiment, three state observers (extended Kalman filter, nonlinear observer
//! with linear error dynamics, nonlinear observer with passive error dynamics)
//! and a Bayes-factor selector that decides, sample by sample, which of the two
//! models an observer should use.
//!
//! Everything numeric is generic over [`Scalar`], which any `num_traits::Float`
//! type satisfies. The `*64` / `*32` aliases below are the concrete types most
//! callers want.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod linalg;
pub mod model;
pub mod observers;
pub mod rk4;
pub mod scalar;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use model::{FrictionParams, MechParams, PhState, PhStateStick, Plant, Regime, State};
pub use scalar::Scalar;

pub type MechParams64 = model::MechParams<f64>;
pub type FrictionParams64 = model::FrictionParams<f64>;
pub type Plant64 = model::Plant<f64>;
pub type State64 = model::State<f64>;
pub type PhState64 = model::PhState<f64>;
pub type SimConfig64 = sim::SimConfig<f64>;
pub type RegimeTrace64 = sim::RegimeTrace<f64>;
pub type Ekf64 = observers::Ekf<f64>;
pub type Nol64 = observers::NolObserver<f64>;
pub type Nop64 = observers::NopObserver<f64>;
pub type SelectorConfig64 = selection::SelectorConfig<f64>;

pub type MechParams32 = model::MechParams<f32>;
pub type FrictionParams32 = model::FrictionParams<f32>;
pub type Plant32 = model::Plant<f32>;
pub type State32 = model::State<f32>;
pub type SimConfig32 = sim::SimConfig<f32>;
pub type Ekf32 = observers::Ekf<f32>;
pub type Nol32 = observers::NolObserver<f32>;
pub type Nop32 = observers::NopObserver<f32>;
