//! Nonlinear observer with linear error dynamics.
//!
//! Both regime models split into a linear part and a term `α(u, y)` that
//! depends on the input and the measured angle only:
//!
//! ```text
//! ẋ = A x + α(u, y),   y = C x = φ1
//! ```
//!
//! An observer that copies the plant and adds `K (y − C x̂)` cancels `α`
//! exactly, leaving the error system `ė = (A − K C) e` (or
//! `e_{k+1} = (A_d − K_d C) e_k` for the sampled-data variant with
//! `A_d = e^{A dt}`, `G_d = ∫₀^dt e^{Aτ} dτ`). The friction torque inside `α`
//! needs the unmeasured wheel rate; it is evaluated at the estimate, which is
//! the one place where the cancellation is only approximate.

use crate::error::{Error, Result};
use crate::linalg::{
    char_poly, is_hurwitz_stable, is_schur_stable, poly_at_matrix, poly_from_roots, solve_filter_dare,
    zoh_discretize, Mat,
};
use crate::model::{stribeck_torque, MechParams, Plant, Regime, State};
use crate::rk4::rk4_step_timed;
use crate::scalar::Scalar;

use super::{divergence, FrictionCompensation, Interval, Observer, RegimeMemory, WheelOnStick};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NolMode {
    /// `x̂_{k+1} = A_d x̂_k + G_d α(u_k, y_k) + K_d (y_k − C x̂_k)`.
    SampledData,
    /// The continuous observer integrated with RK4 between samples.
    QuasiContinuous,
}

/// How the correction gain is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum NolGainSpec<T> {
    /// All eigenvalues of `A_d − K_d C` at the origin (sampled-data only).
    DeadBeat,
    /// Real closed-loop eigenvalues, one per state of the regime model:
    /// inside the unit circle for sampled-data, in the left half-plane for
    /// quasi-continuous.
    Poles(Vec<T>),
    /// Steady-state Kalman predictor gain for process covariance
    /// `diag(q_diag)` and measurement variance `r` (sampled-data only).
    /// `r = 0` is the dead-beat limit and is designed as [`NolGainSpec::DeadBeat`].
    Lqe { q_diag: Vec<T>, r: T },
}

/// Matrices and gain for one regime model.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeGains<T> {
    pub regime: Regime,
    pub mode: NolMode,
    /// Continuous system matrix, `n × n`.
    pub a: Mat<T>,
    pub a_d: Mat<T>,
    pub g_d: Mat<T>,
    /// Output row, `[1, 0, …]`.
    pub c: Vec<T>,
    /// `K` (quasi-continuous) or `K_d` (sampled-data), length `n`.
    pub k: Vec<T>,
}

impl<T: Scalar> RegimeGains<T> {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Error-system matrix `A_d − K_d C` or `A − K C`.
    pub fn closed_loop(&self) -> Mat<T> {
        let base = match self.mode {
            NolMode::SampledData => &self.a_d,
            NolMode::QuasiContinuous => &self.a,
        };
        base - &(&Mat::column(&self.k) * &Mat::row(&self.c))
    }

    /// Observability matrix `[C; C M; …; C Mⁿ⁻¹]` of the design matrix `M`.
    pub fn observability(&self) -> Mat<T> {
        let m = match self.mode {
            NolMode::SampledData => &self.a_d,
            NolMode::QuasiContinuous => &self.a,
        };
        observability_matrix(m, &self.c)
    }
}

/// Linear part of the regime model.
pub fn system_matrix<T: Scalar>(regime: Regime, mp: &MechParams<T>) -> Mat<T> {
    let o = T::zero();
    let (t1, tc) = (mp.theta1(), mp.theta_c());
    match regime {
        Regime::NonSticking => Mat::from_rows(&[
            [o, T::one(), o],
            [o, -mp.d1() / t1, mp.d2() / t1],
            [o, mp.d1() / t1, -mp.d2() / tc],
        ]),
        Regime::Sticking => Mat::from_rows(&[[o, T::one()], [o, -mp.d1() / t1]]),
    }
}

pub fn observability_matrix<T: Scalar>(a: &Mat<T>, c: &[T]) -> Mat<T> {
    let n = a.rows();
    let mut o = Mat::zeros(n, n);
    let mut row = Mat::row(c);
    for i in 0..n {
        o.set_block(i, 0, &row);
        row = &row * a;
    }
    o
}

/// Output-injection term `α(u, y)` of the regime model, `n` entries.
///
/// `u` is the motor torque and `friction` the Stribeck torque to subtract
/// from it (zero when friction is not compensated).
pub fn alpha_term<T: Scalar>(regime: Regime, y: T, u: T, friction: T, mp: &MechParams<T>) -> Vec<T> {
    let s = mp.a() / mp.theta1() * y.sin();
    match regime {
        Regime::NonSticking => {
            let port = u - friction;
            vec![T::zero(), s - port / mp.theta1(), -s + port / mp.theta_c()]
        }
        Regime::Sticking => vec![T::zero(), s],
    }
}

/// Ackermann's formula for the observer gain: `K = p(M) O⁻¹ eₙ`.
fn ackermann<T: Scalar>(m: &Mat<T>, c: &[T], poly: &[T], regime: Regime) -> Result<Vec<T>> {
    let n = m.rows();
    let o = observability_matrix(m, c);
    let o_inv = o.inverse().ok_or_else(|| Error::Design {
        regime,
        reason: "observability matrix is singular".into(),
    })?;
    let mut en = vec![T::zero(); n];
    en[n - 1] = T::one();
    Ok(poly_at_matrix(poly, m).mul_vec(&o_inv.mul_vec(&en)))
}

/// Designs the observer matrices and gain for one regime model.
pub fn nol_design<T: Scalar>(
    regime: Regime,
    mp: &MechParams<T>,
    mode: NolMode,
    dt: T,
    spec: &NolGainSpec<T>,
) -> Result<RegimeGains<T>> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(Error::InvalidConfig(format!("sampling time must be positive, got {dt}")));
    }
    let a = system_matrix(regime, mp);
    let n = a.rows();
    let mut c = vec![T::zero(); n];
    c[0] = T::one();
    let (a_d, g_d) = zoh_discretize(&a, dt);

    let design_matrix = match mode {
        NolMode::SampledData => &a_d,
        NolMode::QuasiContinuous => &a,
    };
    let obs = observability_matrix(design_matrix, &c);
    let rank = obs.rank(T::precision() * T::of(1e4));
    if rank < n {
        return Err(Error::Design { regime, reason: format!("(A, C) is not observable: rank {rank} < {n}") });
    }

    let k = match (spec, mode) {
        (NolGainSpec::DeadBeat, NolMode::SampledData) => {
            ackermann(&a_d, &c, &poly_from_roots(&vec![T::zero(); n]), regime)?
        }
        (NolGainSpec::Lqe { r, .. }, NolMode::SampledData) if *r == T::zero() => {
            ackermann(&a_d, &c, &poly_from_roots(&vec![T::zero(); n]), regime)?
        }
        (NolGainSpec::Lqe { q_diag, r }, NolMode::SampledData) => {
            if q_diag.len() < n || *r < T::zero() {
                return Err(Error::InvalidConfig(format!(
                    "LQE design needs {n} process variances and r >= 0"
                )));
            }
            let q = Mat::from_diag(&q_diag[..n]);
            let p = solve_filter_dare(&a_d, &c, &q, *r).ok_or_else(|| Error::Design {
                regime,
                reason: "Riccati iteration did not converge".into(),
            })?;
            let pc = p.mul_vec(&c);
            let s = pc[0] + *r;
            a_d.mul_vec(&pc).into_iter().map(|v| v / s).collect()
        }
        (NolGainSpec::Poles(poles), _) => {
            if poles.len() < n {
                return Err(Error::InvalidConfig(format!("need {n} observer poles, got {}", poles.len())));
            }
            ackermann(design_matrix, &c, &poly_from_roots(&poles[..n]), regime)?
        }
        (_, NolMode::QuasiContinuous) => {
            return Err(Error::InvalidConfig(
                "dead-beat and LQE gains are only defined for the sampled-data observer".into(),
            ))
        }
    };

    let gains = RegimeGains { regime, mode, a, a_d, g_d, c, k };
    let poly = char_poly(&gains.closed_loop());
    let stable = match mode {
        NolMode::SampledData => is_schur_stable(&poly),
        NolMode::QuasiContinuous => is_hurwitz_stable(&poly),
    };
    if !stable {
        return Err(Error::Design { regime, reason: "error dynamics are not asymptotically stable".into() });
    }
    Ok(gains)
}

/// Designs for both regimes plus the shared implementation choices.
#[derive(Clone, Debug, PartialEq)]
pub struct NolDesign<T> {
    pub mode: NolMode,
    pub dt: T,
    pub non_sticking: RegimeGains<T>,
    pub sticking: RegimeGains<T>,
    pub friction: FrictionCompensation,
}

impl<T: Scalar> NolDesign<T> {
    pub fn new(
        mp: &MechParams<T>,
        mode: NolMode,
        dt: T,
        non_sticking: &NolGainSpec<T>,
        sticking: &NolGainSpec<T>,
    ) -> Result<Self> {
        Ok(NolDesign {
            mode,
            dt,
            non_sticking: nol_design(Regime::NonSticking, mp, mode, dt, non_sticking)?,
            sticking: nol_design(Regime::Sticking, mp, mode, dt, sticking)?,
            friction: FrictionCompensation::Estimated,
        })
    }

    pub fn with_friction(mut self, friction: FrictionCompensation) -> Self {
        self.friction = friction;
        self
    }

    pub fn gains(&self, regime: Regime) -> &RegimeGains<T> {
        match regime {
            Regime::NonSticking => &self.non_sticking,
            Regime::Sticking => &self.sticking,
        }
    }
}

fn friction_estimate<T: Scalar>(plant: &Plant<T>, comp: FrictionCompensation, omega2: T) -> T {
    match comp {
        FrictionCompensation::Estimated => stribeck_torque(omega2, &plant.friction),
        FrictionCompensation::Ignored => T::zero(),
    }
}

/// Right-hand side of the continuous observer in the first `n` coordinates.
fn observer_rhs<T: Scalar>(g: &RegimeGains<T>, xs: &[T], alpha: &[T], y: T) -> Vec<T> {
    let ax = g.a.mul_vec(xs);
    let innovation = y - xs[0];
    (0..g.dim()).map(|i| ax[i] + alpha[i] + g.k[i] * innovation).collect()
}

fn embed<T: Scalar>(x_hat: &State<T>, v: &[T]) -> State<T> {
    // sticking model: the wheel-rate estimate is carried through unchanged
    State::new(v[0], v[1], if v.len() > 2 { v[2] } else { x_hat.omega2 })
}

/// One observer step from `x̂_k` with input `u_k` and measurement `y_k`.
///
/// In quasi-continuous mode the measurement is held over the step.
pub fn nol_step<T: Scalar>(
    d: &NolDesign<T>,
    plant: &Plant<T>,
    x_hat: &State<T>,
    regime: Regime,
    u: T,
    y: T,
    dt: T,
) -> Result<State<T>> {
    let interval = Interval { u, y_prev: y, y_next: y, dt };
    nol_advance(d, plant, x_hat, regime, &interval, 0)
}

fn nol_advance<T: Scalar>(
    d: &NolDesign<T>,
    plant: &Plant<T>,
    x_hat: &State<T>,
    regime: Regime,
    iv: &Interval<T>,
    step: usize,
) -> Result<State<T>> {
    let g = d.gains(regime);
    let n = g.dim();
    let mp = &plant.mech;
    let next = match d.mode {
        NolMode::SampledData => {
            if (iv.dt - d.dt).abs() > d.dt * T::of(1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "sampled-data observer was designed for dt = {}, stepped with {}",
                    d.dt, iv.dt
                )));
            }
            let xs = &x_hat.to_array()[..n];
            let ms = friction_estimate(plant, d.friction, x_hat.omega2);
            let alpha = alpha_term(regime, iv.y_prev, iv.u, ms, mp);
            let ax = g.a_d.mul_vec(xs);
            let ga = g.g_d.mul_vec(&alpha);
            let innovation = iv.y_prev - xs[0];
            let v: Vec<T> = (0..n).map(|i| ax[i] + ga[i] + g.k[i] * innovation).collect();
            embed(x_hat, &v)
        }
        NolMode::QuasiContinuous => {
            let x0 = x_hat.to_array();
            let rhs = |s: T, x: &[T; 3]| {
                let y = iv.y_at(s);
                let ms = friction_estimate(plant, d.friction, x[2]);
                let alpha = alpha_term(regime, y, iv.u, ms, mp);
                let dx = observer_rhs(g, &x[..n], &alpha, y);
                [dx[0], dx[1], if n > 2 { dx[2] } else { T::zero() }]
            };
            State::from_array(rk4_step_timed(rhs, &x0, iv.dt))
        }
    };
    divergence("nol", step, &next)?;
    Ok(next)
}

#[derive(Clone, Debug)]
pub struct NolObserver<T> {
    design: NolDesign<T>,
    plant: Plant<T>,
    x_hat: State<T>,
    memory: RegimeMemory,
}

impl<T: Scalar> NolObserver<T> {
    pub fn new(design: NolDesign<T>, plant: Plant<T>, x0: State<T>) -> Self {
        NolObserver { design, plant, x_hat: x0, memory: RegimeMemory::new(WheelOnStick::Hold) }
    }

    pub fn with_wheel_on_stick(mut self, policy: WheelOnStick) -> Self {
        self.memory.on_stick = policy;
        self
    }

    pub fn design(&self) -> &NolDesign<T> {
        &self.design
    }
}

impl<T: Scalar> Observer<T> for NolObserver<T> {
    fn name(&self) -> &'static str {
        "nol"
    }

    fn estimate(&self) -> State<T> {
        self.x_hat
    }

    /// Sampled-data mode consumes the sample at the start of the interval;
    /// quasi-continuous mode interpolates linearly between both samples.
    fn advance(&mut self, regime: Regime, interval: &Interval<T>, step: usize) -> Result<State<T>> {
        let mut x = self.x_hat;
        self.memory.enter(regime, &mut x);
        self.x_hat = nol_advance(&self.design, &self.plant, &x, regime, interval, step)?;
        Ok(self.x_hat)
    }
}
