//! Classical fixed-step Runge-Kutta integration.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

fn axpy<T: Scalar, const N: usize>(x: &[T; N], h: T, k: &[T; N]) -> [T; N] {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// One RK4 step of `ẋ = f(x)`. Inputs are held constant by the caller's
/// closure over the step.
pub fn rk4_step<T: Scalar, const N: usize>(f: impl Fn(&[T; N]) -> [T; N], x: &[T; N], dt: T) -> [T; N] {
    let half = dt * T::of(0.5);
    let k1 = f(x);
    let k2 = f(&axpy(x, half, &k1));
    let k3 = f(&axpy(x, half, &k2));
    let k4 = f(&axpy(x, dt, &k3));
    let sixth = dt / T::of(6.0);
    let two = T::of(2.0);
    std::array::from_fn(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
}

/// RK4 step of a non-autonomous field. `f` receives the stage position as a
/// fraction of the step (0, ½, ½, 1) alongside the state.
pub fn rk4_step_timed<T: Scalar, const N: usize>(f: impl Fn(T, &[T; N]) -> [T; N], x: &[T; N], dt: T) -> [T; N] {
    let half = T::of(0.5);
    let hdt = dt * half;
    let k1 = f(T::zero(), x);
    let k2 = f(half, &axpy(x, hdt, &k1));
    let k3 = f(half, &axpy(x, hdt, &k2));
    let k4 = f(T::one(), &axpy(x, dt, &k3));
    let sixth = dt / T::of(6.0);
    let two = T::of(2.0);
    std::array::from_fn(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
}

/// [`rk4_step`] that rejects a non-finite result, naming the step.
pub fn rk4_step_checked<T: Scalar, const N: usize>(
    f: impl Fn(&[T; N]) -> [T; N],
    x: &[T; N],
    dt: T,
    step: usize,
) -> Result<[T; N]> {
    let next = rk4_step(f, x, dt);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::IntegrationFailure { step })
    }
}

/// RK4 step together with the Jacobian of the one-step map, propagated
/// through all four stages by the chain rule.
pub fn rk4_step_with_jacobian<T: Scalar, const N: usize>(
    f: impl Fn(&[T; N]) -> [T; N],
    jac: impl Fn(&[T; N]) -> Mat<T>,
    x: &[T; N],
    dt: T,
) -> ([T; N], Mat<T>) {
    let half = dt * T::of(0.5);
    let eye = Mat::identity(N);

    let k1 = f(x);
    let j1 = jac(x);

    let x2 = axpy(x, half, &k1);
    let k2 = f(&x2);
    let j2 = &jac(&x2) * &(&eye + &j1.scale(half));

    let x3 = axpy(x, half, &k2);
    let k3 = f(&x3);
    let j3 = &jac(&x3) * &(&eye + &j2.scale(half));

    let x4 = axpy(x, dt, &k3);
    let k4 = f(&x4);
    let j4 = &jac(&x4) * &(&eye + &j3.scale(dt));

    let sixth = dt / T::of(6.0);
    let two = T::of(2.0);
    let next = std::array::from_fn(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]));
    let sum = &(&(&j1 + &j2.scale(two)) + &j3.scale(two)) + &j4;
    (next, &eye + &sum.scale(sixth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(rk4_step(|_| [0.0; 3], &x, 0.005), x);
        let (_, j) = rk4_step_with_jacobian(|_| [0.0; 3], |_| Mat::zeros(3, 3), &x, 0.005);
        assert_eq!(j, Mat::identity(3));
    }

    #[test]
    fn linear_decay_matches_truncated_exponential() {
        let (lambda, dt) = (-1.0_f64, 0.005);
        let next = rk4_step(|x: &[f64; 1]| [lambda * x[0]], &[1.0], dt);
        let z = lambda * dt;
        let expected = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        assert_relative_eq!(next[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_of_linear_field_is_truncated_exponential() {
        let a = Mat::from_rows(&[[0.0, 1.0, 0.0], [-2.0, -0.3, 0.1], [0.5, 0.0, -4.0]]);
        let dt = 0.05;
        let f = |x: &[f64; 3]| {
            let v = a.mul_vec(x);
            [v[0], v[1], v[2]]
        };
        let (_, j) = rk4_step_with_jacobian(f, |_| a.clone(), &[0.1, 0.2, 0.3], dt);
        let ad = a.scale(dt);
        let mut expected = Mat::identity(3);
        let mut term = Mat::identity(3);
        for k in 1..=4 {
            term = (&term * &ad).scale(1.0 / k as f64);
            expected = &expected + &term;
        }
        assert!((&j - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn timed_step_integrates_a_ramp_exactly() {
        // ẋ = t on [0, 0.1]: RK4 is exact for polynomials up to degree 4
        let next = rk4_step_timed(|s: f64, _: &[f64; 1]| [0.1 * s], &[0.0], 0.1);
        assert_relative_eq!(next[0], 0.005, max_relative = 1e-14);
    }

    #[test]
    fn non_finite_result_names_the_step() {
        let r = rk4_step_checked(|_: &[f64; 1]| [f64::INFINITY], &[0.0], 0.1, 17);
        assert_eq!(r, Err(Error::IntegrationFailure { step: 17 }));
    }
}
