//! Parameters, states and vector fields of the inertia wheel pendulum.
//!
//! `φ1` is the absolute pendulum angle (0 = upright, π = hanging), `ω1` its
//! rate and `ω2` the wheel rate relative to the pendulum. Angles are never
//! wrapped.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Mechanical constants. `theta_c` is derived and cannot be set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechParams<T> {
    a: T,
    theta1: T,
    theta2: T,
    d1: T,
    d2: T,
    theta_c: T,
}

impl<T: Scalar> MechParams<T> {
    pub fn new(a: T, theta1: T, theta2: T, d1: T, d2: T) -> Result<Self> {
        for (name, v) in [("a", a), ("theta1", theta1), ("theta2", theta2)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::param(name, format!("must be finite and positive, got {v}")));
            }
        }
        for (name, v) in [("d1", d1), ("d2", d2)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::param(name, format!("must be finite and non-negative, got {v}")));
            }
        }
        let theta_c = theta1 * theta2 / (theta1 + theta2);
        Ok(MechParams { a, theta1, theta2, d1, d2, theta_c })
    }

    /// Identified parameters of the laboratory pendulum.
    pub fn nominal() -> Self {
        Self::new(T::of(0.15535), T::of(0.05045), T::of(0.00113), T::of(0.00885), T::of(0.00015))
            .expect("nominal parameters are valid")
    }

    /// Same inertias, different viscous damping.
    pub fn with_damping(&self, d1: T, d2: T) -> Result<Self> {
        Self::new(self.a, self.theta1, self.theta2, d1, d2)
    }

    pub fn a(&self) -> T {
        self.a
    }
    pub fn theta1(&self) -> T {
        self.theta1
    }
    pub fn theta2(&self) -> T {
        self.theta2
    }
    pub fn d1(&self) -> T {
        self.d1
    }
    pub fn d2(&self) -> T {
        self.d2
    }
    pub fn theta_c(&self) -> T {
        self.theta_c
    }
}

/// Stribeck friction of the wheel bearing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionParams<T> {
    r_c: T,
    r_s: T,
    omega20: T,
}

impl<T: Scalar> FrictionParams<T> {
    pub fn new(r_c: T, r_s: T, omega20: T) -> Result<Self> {
        if !(r_c.is_finite() && r_c > T::zero()) {
            return Err(Error::param("r_c", format!("must be finite and positive, got {r_c}")));
        }
        if !(r_s.is_finite() && r_s >= r_c) {
            return Err(Error::param("r_s", format!("must be finite and at least r_c = {r_c}, got {r_s}")));
        }
        if !(omega20.is_finite() && omega20 > T::zero()) {
            return Err(Error::param("omega20", format!("must be finite and positive, got {omega20}")));
        }
        Ok(FrictionParams { r_c, r_s, omega20 })
    }

    pub fn nominal() -> Self {
        Self::new(T::of(0.0024), T::of(0.0026), T::of(0.0501)).expect("nominal friction is valid")
    }

    /// A frictionless wheel: the Stribeck torque is identically zero and the
    /// stiction condition can never hold.
    pub fn disabled() -> Self {
        FrictionParams { r_c: T::zero(), r_s: T::zero(), omega20: T::one() }
    }

    pub fn is_disabled(&self) -> bool {
        self.r_s == T::zero()
    }

    pub fn r_c(&self) -> T {
        self.r_c
    }
    pub fn r_s(&self) -> T {
        self.r_s
    }
    pub fn omega20(&self) -> T {
        self.omega20
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct State<T> {
    pub phi1: T,
    pub omega1: T,
    pub omega2: T,
}

impl<T: Scalar> State<T> {
    pub fn new(phi1: T, omega1: T, omega2: T) -> Self {
        State { phi1, omega1, omega2 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_array(self) -> [T; 3] {
        [self.phi1, self.omega1, self.omega2]
    }

    pub fn from_array(v: [T; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.phi1.is_finite() && self.omega1.is_finite() && self.omega2.is_finite()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.phi1 - other.phi1, self.omega1 - other.omega1, self.omega2 - other.omega2)
    }

    pub fn max_abs(&self) -> T {
        self.phi1.abs().max(self.omega1.abs()).max(self.omega2.abs())
    }

    pub fn cast<U: Scalar>(&self) -> State<U> {
        State::new(U::of(self.phi1.as_f64()), U::of(self.omega1.as_f64()), U::of(self.omega2.as_f64()))
    }
}

/// Port-Hamiltonian coordinates `[φ1, p1, p2]` of the non-sticking model.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhState<T> {
    pub phi1: T,
    pub p1: T,
    pub p2: T,
}

impl<T: Scalar> PhState<T> {
    pub fn new(phi1: T, p1: T, p2: T) -> Self {
        PhState { phi1, p1, p2 }
    }
    pub fn to_array(self) -> [T; 3] {
        [self.phi1, self.p1, self.p2]
    }
    pub fn from_array(v: [T; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Port-Hamiltonian coordinates `[φ1, p1]` of the sticking model, `p1 = θ1 ω1`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhStateStick<T> {
    pub phi1: T,
    pub p1: T,
}

impl<T: Scalar> PhStateStick<T> {
    pub fn new(phi1: T, p1: T) -> Self {
        PhStateStick { phi1, p1 }
    }
    pub fn to_array(self) -> [T; 2] {
        [self.phi1, self.p1]
    }
    pub fn from_array(v: [T; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// M1: the wheel turns against Stribeck friction.
    NonSticking,
    /// M2: the wheel is held by static friction.
    Sticking,
}

impl Regime {
    /// `1` for M1, `2` for M2, as used in the CSV files.
    pub fn code(self) -> u8 {
        match self {
            Regime::NonSticking => 1,
            Regime::Sticking => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Regime::NonSticking),
            2 => Some(Regime::Sticking),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Regime::NonSticking => Regime::Sticking,
            Regime::Sticking => Regime::NonSticking,
        }
    }

    /// Number of states the regime's own model has.
    pub fn dim(self) -> usize {
        match self {
            Regime::NonSticking => 3,
            Regime::Sticking => 2,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::NonSticking => f.write_str("non-sticking"),
            Regime::Sticking => f.write_str("sticking"),
        }
    }
}

/// Stribeck friction torque `r_C sgn ω2 + (r_S − r_C) e^{−(ω2/ω20)²} sgn ω2`,
/// with `sgn 0 = 0`.
pub fn stribeck_torque<T: Scalar>(omega2: T, fp: &FrictionParams<T>) -> T {
    let s = omega2.signum0();
    if s == T::zero() {
        return T::zero();
    }
    let v = omega2 / fp.omega20;
    (fp.r_c + (fp.r_s - fp.r_c) * (-(v * v)).exp()) * s
}

/// `d M_S / d ω2` away from the jump at zero (taken as 0 there).
pub fn stribeck_slope<T: Scalar>(omega2: T, fp: &FrictionParams<T>) -> T {
    if omega2 == T::zero() {
        return T::zero();
    }
    let v = omega2 / fp.omega20;
    let two = T::of(2.0);
    -(fp.r_s - fp.r_c) * (-(v * v)).exp() * two * v / fp.omega20 * omega2.signum0()
}

/// Friction torque the bearing has to supply to keep the wheel at rest.
pub fn holding_torque<T: Scalar>(phi1: T, omega1: T, m: T, mp: &MechParams<T>) -> T {
    mp.theta2 / (mp.theta1 + mp.theta2) * (-mp.a * phi1.sin() + mp.d1 * omega1) + m
}

/// Static friction condition: the holding torque is strictly below `r_S`.
pub fn stiction_holds<T: Scalar>(phi1: T, omega1: T, m: T, mp: &MechParams<T>, fp: &FrictionParams<T>) -> bool {
    holding_torque(phi1, omega1, m, mp).abs() < fp.r_s
}

pub fn drift_nonsticking<T: Scalar>(x: &State<T>, m: T, mp: &MechParams<T>, fp: &FrictionParams<T>) -> State<T> {
    let ms = stribeck_torque(x.omega2, fp);
    let s = x.phi1.sin();
    State::new(
        x.omega1,
        (mp.a * s - mp.d1 * x.omega1 + mp.d2 * x.omega2 - m + ms) / mp.theta1,
        -mp.a / mp.theta1 * s + mp.d1 / mp.theta1 * x.omega1 + (m - ms - mp.d2 * x.omega2) / mp.theta_c,
    )
}

/// Sticking model; the wheel-rate row is identically zero.
pub fn drift_sticking<T: Scalar>(x: &State<T>, mp: &MechParams<T>) -> State<T> {
    State::new(x.omega1, (mp.a * x.phi1.sin() - mp.d1 * x.omega1) / mp.theta1, T::zero())
}

/// Stored energy of the non-sticking model in momentum coordinates.
pub fn hamiltonian<T: Scalar>(z: &PhState<T>, mp: &MechParams<T>) -> T {
    let half = T::of(0.5);
    let rel = z.p1 - z.p2;
    half * rel * rel / mp.theta1 + half * z.p2 * z.p2 / mp.theta2 + mp.a * z.phi1.cos()
}

pub fn hamiltonian_stick<T: Scalar>(z: &PhStateStick<T>, mp: &MechParams<T>) -> T {
    T::of(0.5) * z.p1 * z.p1 / mp.theta1 + mp.a * z.phi1.cos()
}

/// Row gradient `∂H/∂z` of the non-sticking Hamiltonian.
pub fn hamiltonian_gradient<T: Scalar>(z: &PhState<T>, mp: &MechParams<T>) -> [T; 3] {
    let rel = (z.p1 - z.p2) / mp.theta1;
    [-mp.a * z.phi1.sin(), rel, -rel + z.p2 / mp.theta2]
}

pub fn hamiltonian_stick_gradient<T: Scalar>(z: &PhStateStick<T>, mp: &MechParams<T>) -> [T; 2] {
    [-mp.a * z.phi1.sin(), z.p1 / mp.theta1]
}

pub fn velocities_to_momenta<T: Scalar>(x: &State<T>, mp: &MechParams<T>) -> PhState<T> {
    PhState::new(
        x.phi1,
        (mp.theta1 + mp.theta2) * x.omega1 + mp.theta2 * x.omega2,
        mp.theta2 * (x.omega1 + x.omega2),
    )
}

pub fn momenta_to_velocities<T: Scalar>(z: &PhState<T>, mp: &MechParams<T>) -> State<T> {
    let omega1 = (z.p1 - z.p2) / mp.theta1;
    State::new(z.phi1, omega1, z.p2 / mp.theta2 - omega1)
}

pub fn velocities_to_momenta_stick<T: Scalar>(x: &State<T>, mp: &MechParams<T>) -> PhStateStick<T> {
    PhStateStick::new(x.phi1, mp.theta1 * x.omega1)
}

/// Back to velocities; the wheel rate is not part of the sticking
/// coordinates and is supplied by the caller.
pub fn momenta_to_velocities_stick<T: Scalar>(z: &PhStateStick<T>, omega2: T, mp: &MechParams<T>) -> State<T> {
    State::new(z.phi1, z.p1 / mp.theta1, omega2)
}

/// Interconnection `J`, dissipation `R` and input `G` of the non-sticking
/// port-Hamiltonian form.
pub fn ph_structure<T: Scalar>(mp: &MechParams<T>) -> (Mat<T>, Mat<T>, [T; 3]) {
    let (o, l) = (T::zero(), T::one());
    let j = Mat::from_rows(&[[o, l, o], [-l, o, o], [o, o, o]]);
    let r = Mat::from_diag(&[o, mp.d1, mp.d2]);
    (j, r, [o, o, l])
}

/// Structure matrices of the sticking form. Damping acts on the momentum
/// row, which is what makes this form agree with [`drift_sticking`].
pub fn ph_structure_stick<T: Scalar>(mp: &MechParams<T>) -> (Mat<T>, Mat<T>) {
    let (o, l) = (T::zero(), T::one());
    let j = Mat::from_rows(&[[o, l], [-l, o]]);
    let r = Mat::from_diag(&[o, mp.d1]);
    (j, r)
}

/// `(J − R) (∂H/∂z)ᵀ + G u` with port input `u = M − M_S`.
pub fn ph_drift<T: Scalar>(z: &PhState<T>, u: T, mp: &MechParams<T>) -> PhState<T> {
    let (j, r, g) = ph_structure(mp);
    let dz = (&j - &r).mul_vec(&hamiltonian_gradient(z, mp));
    PhState::new(dz[0] + g[0] * u, dz[1] + g[1] * u, dz[2] + g[2] * u)
}

pub fn ph_drift_stick<T: Scalar>(z: &PhStateStick<T>, mp: &MechParams<T>) -> PhStateStick<T> {
    let (j, r) = ph_structure_stick(mp);
    let dz = (&j - &r).mul_vec(&hamiltonian_stick_gradient(z, mp));
    PhStateStick::new(dz[0], dz[1])
}

/// Model parameters bundled with the regime-dependent vector fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plant<T> {
    pub mech: MechParams<T>,
    pub friction: FrictionParams<T>,
}

impl<T: Scalar> Plant<T> {
    pub fn new(mech: MechParams<T>, friction: FrictionParams<T>) -> Self {
        Plant { mech, friction }
    }

    pub fn nominal() -> Self {
        Self::new(MechParams::nominal(), FrictionParams::nominal())
    }

    pub fn drift(&self, regime: Regime, x: &State<T>, m: T) -> State<T> {
        match regime {
            Regime::NonSticking => drift_nonsticking(x, m, &self.mech, &self.friction),
            Regime::Sticking => drift_sticking(x, &self.mech),
        }
    }

    /// `∂f/∂x` of the continuous vector field of the given regime.
    pub fn drift_jacobian(&self, regime: Regime, x: &State<T>) -> Mat<T> {
        let mp = &self.mech;
        let (o, l) = (T::zero(), T::one());
        let c = x.phi1.cos();
        match regime {
            Regime::NonSticking => {
                let ds = stribeck_slope(x.omega2, &self.friction);
                Mat::from_rows(&[
                    [o, l, o],
                    [mp.a * c / mp.theta1, -mp.d1 / mp.theta1, (mp.d2 + ds) / mp.theta1],
                    [-mp.a * c / mp.theta1, mp.d1 / mp.theta1, -(ds + mp.d2) / mp.theta_c],
                ])
            }
            Regime::Sticking => Mat::from_rows(&[
                [o, l, o],
                [mp.a * c / mp.theta1, -mp.d1 / mp.theta1, o],
                [o, o, o],
            ]),
        }
    }

    pub fn stiction_holds(&self, x: &State<T>, m: T) -> bool {
        stiction_holds(x.phi1, x.omega1, m, &self.mech, &self.friction)
    }

    /// Stored energy of the given regime in velocity coordinates.
    pub fn energy(&self, regime: Regime, x: &State<T>) -> T {
        match regime {
            Regime::NonSticking => hamiltonian(&velocities_to_momenta(x, &self.mech), &self.mech),
            Regime::Sticking => hamiltonian_stick(&velocities_to_momenta_stick(x, &self.mech), &self.mech),
        }
    }
}
