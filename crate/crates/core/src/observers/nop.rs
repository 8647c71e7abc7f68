//! Nonlinear observer with passive error dynamics.
//!
//! The observer copies the port-Hamiltonian plant, replaces the gradient of
//! the stored energy by `∂H(x̂) + Φ(x̂, y)` so that the error system is again
//! port-Hamiltonian with storage `H_d(e)`, and injects extra damping
//! `β` on the angle error. It runs in momentum coordinates and converts to
//! velocities at the interface.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{
    hamiltonian_gradient, hamiltonian_stick_gradient, momenta_to_velocities, momenta_to_velocities_stick,
    ph_structure, ph_structure_stick, stribeck_torque, velocities_to_momenta, velocities_to_momenta_stick,
    MechParams, PhState, PhStateStick, Plant, Regime, State,
};
use crate::rk4::rk4_step_timed;
use crate::scalar::Scalar;

use super::{divergence, FrictionCompensation, Interval, Observer, RegimeMemory, WheelOnStick};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NopDesign<T> {
    alpha: T,
    beta: T,
    pub friction: FrictionCompensation,
}

impl<T: Scalar> NopDesign<T> {
    /// `alpha` weights the angle error in `H_d`, `beta` is the injected
    /// damping. Both must be positive.
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(NopDesign { alpha, beta, friction: FrictionCompensation::Estimated })
    }

    pub fn with_friction(mut self, friction: FrictionCompensation) -> Self {
        self.friction = friction;
        self
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

/// Compensation term in closed form. Only the angle slot is nonzero; the
/// momentum slots cancel because `H_d` and `H` share their kinetic part.
pub fn compensation<T: Scalar>(regime: Regime, phi_hat: T, y: T, alpha: T, mp: &MechParams<T>) -> Vec<T> {
    let first = -mp.a() * y.sin() + mp.a() * phi_hat.sin() - alpha * (y - phi_hat);
    let mut v = vec![T::zero(); regime.dim()];
    v[0] = first;
    v
}

/// `∂H(z) − ∂H(ẑ) − ∂H_d(z − ẑ)` evaluated from both full states, in the
/// regime's momentum coordinates.
pub fn compensation_from_states<T: Scalar>(
    regime: Regime,
    x: &State<T>,
    x_hat: &State<T>,
    alpha: T,
    mp: &MechParams<T>,
) -> Vec<T> {
    match regime {
        Regime::NonSticking => {
            let (z, zh) = (velocities_to_momenta(x, mp), velocities_to_momenta(x_hat, mp));
            let e = PhState::new(z.phi1 - zh.phi1, z.p1 - zh.p1, z.p2 - zh.p2);
            let (g, gh, gd) = (
                hamiltonian_gradient(&z, mp),
                hamiltonian_gradient(&zh, mp),
                desired_hamiltonian_gradient(regime, &e.to_array(), alpha, mp),
            );
            (0..3).map(|i| g[i] - gh[i] - gd[i]).collect()
        }
        Regime::Sticking => {
            let (z, zh) = (velocities_to_momenta_stick(x, mp), velocities_to_momenta_stick(x_hat, mp));
            let e = [z.phi1 - zh.phi1, z.p1 - zh.p1];
            let (g, gh, gd) = (
                hamiltonian_stick_gradient(&z, mp),
                hamiltonian_stick_gradient(&zh, mp),
                desired_hamiltonian_gradient(regime, &e, alpha, mp),
            );
            (0..2).map(|i| g[i] - gh[i] - gd[i]).collect()
        }
    }
}

/// Hessian of the quadratic storage `H_d(e) = ½ eᵀ W e` in momentum
/// coordinates.
pub fn desired_hamiltonian_weight<T: Scalar>(regime: Regime, alpha: T, mp: &MechParams<T>) -> Mat<T> {
    let o = T::zero();
    let (i1, i2) = (T::one() / mp.theta1(), T::one() / mp.theta2());
    match regime {
        Regime::NonSticking => Mat::from_rows(&[[alpha, o, o], [o, i1, -i1], [o, -i1, i1 + i2]]),
        Regime::Sticking => Mat::from_rows(&[[alpha, o], [o, i1]]),
    }
}

/// `H_d(e)` for an error `e` in momentum coordinates.
pub fn desired_hamiltonian<T: Scalar>(regime: Regime, e: &[T], alpha: T, mp: &MechParams<T>) -> T {
    let g = desired_hamiltonian_gradient(regime, e, alpha, mp);
    T::of(0.5) * e.iter().zip(&g).fold(T::zero(), |acc, (a, b)| acc + *a * *b)
}

pub fn desired_hamiltonian_gradient<T: Scalar>(regime: Regime, e: &[T], alpha: T, mp: &MechParams<T>) -> Vec<T> {
    desired_hamiltonian_weight(regime, alpha, mp).mul_vec(&e[..regime.dim()])
}

/// `H_d` of the error between a true state and an estimate, both in
/// velocity coordinates.
pub fn error_storage<T: Scalar>(regime: Regime, x: &State<T>, x_hat: &State<T>, alpha: T, mp: &MechParams<T>) -> T {
    let e: Vec<T> = match regime {
        Regime::NonSticking => {
            let (z, zh) = (velocities_to_momenta(x, mp), velocities_to_momenta(x_hat, mp));
            vec![z.phi1 - zh.phi1, z.p1 - zh.p1, z.p2 - zh.p2]
        }
        Regime::Sticking => {
            let (z, zh) = (velocities_to_momenta_stick(x, mp), velocities_to_momenta_stick(x_hat, mp));
            vec![z.phi1 - zh.phi1, z.p1 - zh.p1]
        }
    };
    desired_hamiltonian(regime, &e, alpha, mp)
}

/// Observer vector field in momentum coordinates:
/// `(J − R)(∂H(ẑ) + Φ)ᵀ + G u − G_o u_o` with `G_o u_o = −diag(β, 0, …) ∂H_dᵀ`
/// evaluated at the angle error `y − φ̂`.
pub fn nop_field<T: Scalar>(d: &NopDesign<T>, regime: Regime, z_hat: &[T], y: T, u: T, mp: &MechParams<T>) -> Vec<T> {
    let phi_tilde = y - z_hat[0];
    let phi = compensation(regime, z_hat[0], y, d.alpha, mp);
    let (jr, grad, g) = match regime {
        Regime::NonSticking => {
            let (j, r, g) = ph_structure(mp);
            let grad = hamiltonian_gradient(&PhState::new(z_hat[0], z_hat[1], z_hat[2]), mp);
            (&j - &r, grad.to_vec(), g.to_vec())
        }
        Regime::Sticking => {
            let (j, r) = ph_structure_stick(mp);
            let grad = hamiltonian_stick_gradient(&PhStateStick::new(z_hat[0], z_hat[1]), mp);
            (&j - &r, grad.to_vec(), vec![T::zero(); 2])
        }
    };
    let corrected: Vec<T> = grad.iter().zip(&phi).map(|(a, b)| *a + *b).collect();
    let mut dz = jr.mul_vec(&corrected);
    for i in 0..dz.len() {
        dz[i] = dz[i] + g[i] * u;
    }
    dz[0] = dz[0] + d.beta * d.alpha * phi_tilde;
    dz
}

/// One RK4 step of the observer over `interval`, with the measurement
/// interpolated linearly inside it. The wheel rate is carried unchanged
/// through the sticking model.
pub fn nop_step<T: Scalar>(
    d: &NopDesign<T>,
    plant: &Plant<T>,
    x_hat: &State<T>,
    regime: Regime,
    iv: &Interval<T>,
) -> State<T> {
    let mp = &plant.mech;
    match regime {
        Regime::NonSticking => {
            let z0 = velocities_to_momenta(x_hat, mp).to_array();
            let rhs = |s: T, z: &[T; 3]| {
                let y = iv.y_at(s);
                let ms = match d.friction {
                    FrictionCompensation::Estimated => {
                        stribeck_torque(momenta_to_velocities(&PhState::from_array(*z), mp).omega2, &plant.friction)
                    }
                    FrictionCompensation::Ignored => T::zero(),
                };
                let v = nop_field(d, regime, z, y, iv.u - ms, mp);
                [v[0], v[1], v[2]]
            };
            momenta_to_velocities(&PhState::from_array(rk4_step_timed(rhs, &z0, iv.dt)), mp)
        }
        Regime::Sticking => {
            let z0 = velocities_to_momenta_stick(x_hat, mp).to_array();
            let rhs = |s: T, z: &[T; 2]| {
                let v = nop_field(d, regime, z, iv.y_at(s), T::zero(), mp);
                [v[0], v[1]]
            };
            let z = PhStateStick::from_array(rk4_step_timed(rhs, &z0, iv.dt));
            momenta_to_velocities_stick(&z, x_hat.omega2, mp)
        }
    }
}

#[derive(Clone, Debug)]
pub struct NopObserver<T> {
    design: NopDesign<T>,
    plant: Plant<T>,
    x_hat: State<T>,
    memory: RegimeMemory,
}

impl<T: Scalar> NopObserver<T> {
    pub fn new(design: NopDesign<T>, plant: Plant<T>, x0: State<T>) -> Self {
        NopObserver { design, plant, x_hat: x0, memory: RegimeMemory::new(WheelOnStick::Hold) }
    }

    pub fn with_wheel_on_stick(mut self, policy: WheelOnStick) -> Self {
        self.memory.on_stick = policy;
        self
    }

    pub fn design(&self) -> &NopDesign<T> {
        &self.design
    }
}

impl<T: Scalar> Observer<T> for NopObserver<T> {
    fn name(&self) -> &'static str {
        "nop"
    }

    fn estimate(&self) -> State<T> {
        self.x_hat
    }

    fn advance(&mut self, regime: Regime, interval: &Interval<T>, step: usize) -> Result<State<T>> {
        let mut x = self.x_hat;
        self.memory.enter(regime, &mut x);
        let next = nop_step(&self.design, &self.plant, &x, regime, interval);
        divergence("nop", step, &next)?;
        self.x_hat = next;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use approx::assert_relative_eq;

    fn mp() -> MechParams<f64> {
        MechParams::nominal()
    }

    #[test]
    fn rejects_non_positive_gains() {
        assert!(NopDesign::new(0.0, 5.0).is_err());
        assert!(NopDesign::new(10.0, -1.0).is_err());
        assert!(NopDesign::new(10.0, f64::NAN).is_err());
        assert!(NopDesign::new(10.0, 5.0).is_ok());
    }

    #[test]
    fn storage_weight_is_positive_definite() {
        for regime in [Regime::NonSticking, Regime::Sticking] {
            let w = desired_hamiltonian_weight(regime, 10.0, &mp());
            assert!(symmetric_eigenvalues(&w)[0] > 0.0);
        }
    }

    #[test]
    fn closed_form_matches_general_compensation() {
        let mp = mp();
        let x = State::new(0.7, -1.2, 3.0);
        let x_hat = State::new(0.2, 0.4, -0.5);
        for regime in [Regime::NonSticking, Regime::Sticking] {
            let general = compensation_from_states(regime, &x, &x_hat, 10.0, &mp);
            let closed = compensation(regime, x_hat.phi1, x.phi1, 10.0, &mp);
            for (g, c) in general.iter().zip(&closed) {
                assert_relative_eq!(*g, *c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compensation_ignores_unmeasured_coordinates() {
        let mp = mp();
        let x_hat = State::new(0.2, 0.4, -0.5);
        let a = compensation_from_states(Regime::NonSticking, &State::new(0.7, -1.2, 3.0), &x_hat, 10.0, &mp);
        let b = compensation_from_states(Regime::NonSticking, &State::new(0.7, 5.0, -9.0), &x_hat, 10.0, &mp);
        let c = compensation_from_states(Regime::NonSticking, &State::new(0.7, 5.0, -9.0), &State::new(0.2, 2.0, 7.0), 10.0, &mp);
        for i in 0..3 {
            assert_relative_eq!(a[i], b[i], epsilon = 1e-12);
            assert_relative_eq!(a[i], c[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn angle_error_alone_dissipates_beta_alpha_squared() {
        // Ḣ_d = ∂H_d · (ż − ẑ') with only the angle differing
        let mp = mp();
        let d = NopDesign::new(10.0, 5.0).unwrap();
        let (alpha, beta) = (d.alpha(), d.beta());
        let x = State::new(0.6, 0.3, -0.8);
        let phi_tilde = 0.05;
        let x_hat = State::new(x.phi1 - phi_tilde, x.omega1, x.omega2);
        let z = velocities_to_momenta(&x, &mp);
        let zh = velocities_to_momenta(&x_hat, &mp);
        let u = 0.001;
        let plant_dz = crate::model::ph_drift(&z, u, &mp).to_array();
        let obs_dz = nop_field(&d, Regime::NonSticking, &zh.to_array(), x.phi1, u, &mp);
        let e = [z.phi1 - zh.phi1, z.p1 - zh.p1, z.p2 - zh.p2];
        let gd = desired_hamiltonian_gradient(Regime::NonSticking, &e, alpha, &mp);
        let hd_dot: f64 = (0..3).map(|i| gd[i] * (plant_dz[i] - obs_dz[i])).sum();
        assert_relative_eq!(hd_dot, -beta * alpha * alpha * phi_tilde * phi_tilde, max_relative = 1e-10);
    }

    #[test]
    fn zero_error_reproduces_plant_field() {
        let mp = mp();
        let d = NopDesign::new(10.0, 5.0).unwrap();
        let x = State::new(1.1, -0.3, 2.0);
        let z = velocities_to_momenta(&x, &mp);
        let plant_dz = crate::model::ph_drift(&z, 0.002, &mp).to_array();
        let obs_dz = nop_field(&d, Regime::NonSticking, &z.to_array(), x.phi1, 0.002, &mp);
        for i in 0..3 {
            assert_relative_eq!(plant_dz[i], obs_dz[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn storage_in_velocities_matches_kinetic_form() {
        let mp = mp();
        let x = State::new(0.5, 1.0, -2.0);
        let x_hat = State::new(0.1, 0.2, 0.3);
        let e = x.sub(&x_hat);
        let expected = 5.0 * e.phi1 * e.phi1
            + 0.5 * mp.theta1() * e.omega1 * e.omega1
            + 0.5 * mp.theta2() * (e.omega1 + e.omega2).powi(2);
        assert_relative_eq!(error_storage(Regime::NonSticking, &x, &x_hat, 10.0, &mp), expected, max_relative = 1e-12);
    }
}
