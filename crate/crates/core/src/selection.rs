//! Bayes-factor choice between the non-sticking and sticking models.
//!
//! Both models propagate the previous estimate one sampling interval ahead;
//! the measured angle is scored against each prediction with a Gaussian
//! measurement density and the model with the larger density is used for the
//! next observer step. Everything is computed on log densities, since
//! residuals of a few radians underflow the densities themselves.

use crate::error::{Error, Result};
use crate::model::{Plant, Regime, State};
use crate::observers::predict_state;
use crate::scalar::Scalar;

/// Ties are declared when `|log K| ≤ TIE_TOLERANCE`.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// What to do when both models explain the measurement equally well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    KeepCurrent,
    Prefer(Regime),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectorConfig<T> {
    r_var: T,
    prior_ratio: T,
    pub tie: TiePolicy,
}

impl<T: Scalar> SelectorConfig<T> {
    /// `r_var` is the measurement-noise variance; models are equally likely
    /// a priori.
    pub fn new(r_var: T) -> Result<Self> {
        Self::with_prior(r_var, T::one())
    }

    /// `prior_ratio` is `Pr(M1) / Pr(M2)`.
    pub fn with_prior(r_var: T, prior_ratio: T) -> Result<Self> {
        if !(r_var.is_finite() && r_var > T::zero()) {
            return Err(Error::param("r_var", format!("must be positive and finite, got {r_var}")));
        }
        if !(prior_ratio.is_finite() && prior_ratio > T::zero()) {
            return Err(Error::param("prior_ratio", format!("must be positive and finite, got {prior_ratio}")));
        }
        Ok(SelectorConfig { r_var, prior_ratio, tie: TiePolicy::KeepCurrent })
    }

    pub fn with_tie(mut self, tie: TiePolicy) -> Self {
        self.tie = tie;
        self
    }

    pub fn r_var(&self) -> T {
        self.r_var
    }

    pub fn prior_ratio(&self) -> T {
        self.prior_ratio
    }
}

/// Log of the zero-mean Gaussian density with variance `var` at `residual`.
pub fn gaussian_log_density<T: Scalar>(residual: T, var: T) -> T {
    let two = T::of(2.0);
    -(residual * residual) / (two * var) - T::of(0.5) * (two * T::PI() * var).ln()
}

/// Measured angle minus the one-step prediction of `regime` from `x_prev`.
pub fn predictive_residual<T: Scalar>(plant: &Plant<T>, y: T, x_prev: &State<T>, regime: Regime, u: T, dt: T) -> T {
    y - predict_state(plant, regime, x_prev, u, dt).phi1
}

pub fn predictive_log_likelihood<T: Scalar>(
    plant: &Plant<T>,
    y: T,
    x_prev: &State<T>,
    regime: Regime,
    u: T,
    dt: T,
    cfg: &SelectorConfig<T>,
) -> T {
    gaussian_log_density(predictive_residual(plant, y, x_prev, regime, u, dt), cfg.r_var)
}

/// Density of `y` under the one-step prediction of `regime`. May underflow to
/// zero for large residuals; use [`predictive_log_likelihood`] for decisions.
pub fn predictive_likelihood<T: Scalar>(
    plant: &Plant<T>,
    y: T,
    x_prev: &State<T>,
    regime: Regime,
    u: T,
    dt: T,
    cfg: &SelectorConfig<T>,
) -> T {
    predictive_log_likelihood(plant, y, x_prev, regime, u, dt, cfg).exp()
}

/// `log K` from the two residuals. With equal variances the normalizing
/// constants cancel.
pub fn log_bayes_factor_from_residuals<T: Scalar>(r1: T, r2: T, cfg: &SelectorConfig<T>) -> T {
    (r2 * r2 - r1 * r1) / (T::of(2.0) * cfg.r_var) + cfg.prior_ratio.ln()
}

/// `log K = log p(y | M1) − log p(y | M2) + log prior_ratio`.
pub fn log_bayes_factor<T: Scalar>(
    plant: &Plant<T>,
    y: T,
    x_prev: &State<T>,
    u: T,
    dt: T,
    cfg: &SelectorConfig<T>,
) -> T {
    let r1 = predictive_residual(plant, y, x_prev, Regime::NonSticking, u, dt);
    let r2 = predictive_residual(plant, y, x_prev, Regime::Sticking, u, dt);
    log_bayes_factor_from_residuals(r1, r2, cfg)
}

pub fn bayes_factor<T: Scalar>(plant: &Plant<T>, y: T, x_prev: &State<T>, u: T, dt: T, cfg: &SelectorConfig<T>) -> T {
    log_bayes_factor(plant, y, x_prev, u, dt, cfg).exp()
}

/// Decision rule on `log K`: positive picks M1, negative M2, ties follow the
/// configured policy.
pub fn decide<T: Scalar>(log_k: T, current: Regime, cfg: &SelectorConfig<T>) -> Regime {
    if log_k.abs() <= T::of(TIE_TOLERANCE) {
        match cfg.tie {
            TiePolicy::KeepCurrent => current,
            TiePolicy::Prefer(r) => r,
        }
    } else if log_k > T::zero() {
        Regime::NonSticking
    } else {
        Regime::Sticking
    }
}

/// Selected regime and the `log K` it was based on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection<T> {
    pub regime: Regime,
    pub log_k: T,
}

pub fn select<T: Scalar>(
    plant: &Plant<T>,
    y: T,
    x_prev: &State<T>,
    u: T,
    dt: T,
    cfg: &SelectorConfig<T>,
    current: Regime,
) -> Selection<T> {
    let log_k = log_bayes_factor(plant, y, x_prev, u, dt, cfg);
    Selection { regime: decide(log_k, current, cfg), log_k }
}
