//! Experiment configuration.
//!
//! The file is TOML restricted to dotted keys (`observer.alpha = 10`), though
//! `[section]` tables parse the same way. Every key has a default, so an empty
//! file describes the nominal drop-down experiment. Unknown keys are errors.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use iwp_core::observers::{
    Ekf, EkfState, FrictionCompensation, NolDesign, NolGainSpec, NolMode, NolObserver, NopDesign, NopObserver,
    Observer, WheelOnStick,
};
use iwp_core::selection::{SelectorConfig, TiePolicy};
use iwp_core::sim::{InputSignal, NoiseModel, SimConfig};
use iwp_core::{FrictionParams, MechParams, Plant, Regime, State};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: ParamsSection,
    pub sim: SimSection,
    pub observer: ObserverSection,
    pub selector: SelectorSection,
    pub metrics: MetricsSection,
    pub io: IoSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub a: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub d1: f64,
    pub d2: f64,
    pub r_c: f64,
    pub r_s: f64,
    pub omega20: f64,
    /// `false` removes the Stribeck torque from the plant.
    pub friction: bool,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let (mp, fp) = (MechParams::<f64>::nominal(), FrictionParams::<f64>::nominal());
        ParamsSection {
            a: mp.a(),
            theta1: mp.theta1(),
            theta2: mp.theta2(),
            d1: mp.d1(),
            d2: mp.d2(),
            r_c: fp.r_c(),
            r_s: fp.r_s(),
            omega20: fp.omega20(),
            friction: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub t_end: f64,
    pub x0: [f64; 3],
    /// Constant motor torque.
    pub torque: f64,
    /// Measurement noise variance on the angle; zero disables it.
    pub r_var: f64,
    /// Process noise variances added to the state after each step.
    pub q_diag: [f64; 3],
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { dt: 0.005, t_end: 30.0, x0: [0.01, 0.0, 0.0], torque: 0.0, r_var: 0.001, q_diag: [0.0; 3], seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObserverKind {
    Ekf,
    Nol,
    Nop,
}

impl ObserverKind {
    pub const ALL: [ObserverKind; 3] = [ObserverKind::Ekf, ObserverKind::Nol, ObserverKind::Nop];

    pub fn name(self) -> &'static str {
        match self {
            ObserverKind::Ekf => "ekf",
            ObserverKind::Nol => "nol",
            ObserverKind::Nop => "nop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NolModeKey {
    SampledData,
    QuasiContinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NolGainKey {
    DeadBeat,
    Poles,
    Lqe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrictionKey {
    Estimated,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WheelKey {
    Hold,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSection {
    /// Observer used by `estimate`; `compare` runs all three.
    pub kind: ObserverKind,
    pub x0: [f64; 3],
    pub ekf_p: [f64; 3],
    pub ekf_q: [f64; 3],
    pub ekf_r: f64,
    pub nol_mode: NolModeKey,
    pub nol_gains: NolGainKey,
    /// Poles for the non-sticking and sticking models when `nol_gains = "poles"`.
    /// Discrete-time in sampled-data mode, continuous-time otherwise.
    pub nol_poles_m1: Vec<f64>,
    pub nol_poles_m2: Vec<f64>,
    pub nol_q_m1: Vec<f64>,
    pub nol_q_m2: Vec<f64>,
    pub nol_r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub friction: FrictionKey,
    pub wheel_on_stick: WheelKey,
}

impl Default for ObserverSection {
    fn default() -> Self {
        ObserverSection {
            kind: ObserverKind::Ekf,
            x0: [-PI / 10.0, 1.0, 1.0],
            ekf_p: [0.00165, 0.01, 0.1],
            ekf_q: [0.0, 0.01, 0.1],
            ekf_r: 0.001,
            nol_mode: NolModeKey::SampledData,
            nol_gains: NolGainKey::Lqe,
            nol_poles_m1: vec![0.9, 0.92, 0.94],
            nol_poles_m2: vec![0.9, 0.92],
            nol_q_m1: vec![0.0, 1e-6, 1e-5],
            nol_q_m2: vec![0.0, 1e-6],
            nol_r: 0.001,
            alpha: 10.0,
            beta: 5.0,
            friction: FrictionKey::Estimated,
            wheel_on_stick: WheelKey::Hold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieKey {
    Keep,
    NonSticking,
    Sticking,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorSection {
    pub r_var: f64,
    /// `Pr(M1) / Pr(M2)`.
    pub prior_ratio: f64,
    pub tie: TieKey,
    /// Regime assumed before the first sample, 1 or 2.
    pub initial_regime: u8,
}

impl Default for SelectorSection {
    fn default() -> Self {
        SelectorSection { r_var: 0.001, prior_ratio: 1.0, tie: TieKey::Keep, initial_regime: 2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Band on the angle error that defines the settling time.
    pub settle_tol: f64,
    /// Samples on each side of a reference switch left out of the regime agreement.
    pub switch_margin: usize,
    /// RMSE is taken over `t ≥ rmse_from`.
    pub rmse_from: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection { settle_tol: 0.02, switch_margin: 2, rmse_from: 0.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub measurements: Option<PathBuf>,
    /// Simulator trace used as the reference for the metrics.
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads and validates a config file. Relative paths in the `io` section
    /// are resolved against the file's directory; whether the files exist is
    /// checked by the command that reads them.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.io.measurements, &mut cfg.io.reference, &mut cfg.io.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Input(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.plant()?;
        self.selector()?;
        self.sim_config().validate()?;
        if self.metrics.settle_tol.is_nan() || self.metrics.settle_tol <= 0.0 {
            return Err(CliError::Input(format!("metrics.settle_tol must be positive, got {}", self.metrics.settle_tol)));
        }
        if !self.observer.x0.iter().all(|v| v.is_finite()) {
            return Err(CliError::Input("observer.x0 must be finite".into()));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant<f64>, CliError> {
        let p = &self.params;
        let mech = MechParams::new(p.a, p.theta1, p.theta2, p.d1, p.d2)?;
        let friction = if p.friction { FrictionParams::new(p.r_c, p.r_s, p.omega20)? } else { FrictionParams::disabled() };
        Ok(Plant::new(mech, friction))
    }

    pub fn sim_config(&self) -> SimConfig<f64> {
        let s = &self.sim;
        let noisy = s.r_var > 0.0 || s.q_diag.iter().any(|q| *q != 0.0);
        SimConfig {
            dt: s.dt,
            t_end: s.t_end,
            x0: State::from_array(s.x0),
            input: InputSignal::Constant(s.torque),
            noise: noisy.then_some(NoiseModel { q_diag: s.q_diag, r_var: s.r_var }),
            seed: s.seed,
        }
    }

    pub fn selector(&self) -> Result<SelectorConfig<f64>, CliError> {
        let s = &self.selector;
        let tie = match s.tie {
            TieKey::Keep => TiePolicy::KeepCurrent,
            TieKey::NonSticking => TiePolicy::Prefer(Regime::NonSticking),
            TieKey::Sticking => TiePolicy::Prefer(Regime::Sticking),
        };
        self.initial_regime()?;
        Ok(SelectorConfig::with_prior(s.r_var, s.prior_ratio)?.with_tie(tie))
    }

    pub fn initial_regime(&self) -> Result<Regime, CliError> {
        let code = self.selector.initial_regime;
        Regime::from_code(code)
            .ok_or_else(|| CliError::Input(format!("selector.initial_regime must be 1 or 2, got {code}")))
    }

    /// Builds an observer for measurements sampled every `dt` seconds.
    pub fn observer(&self, kind: ObserverKind, dt: f64) -> Result<Box<dyn Observer<f64>>, CliError> {
        let o = &self.observer;
        let plant = self.plant()?;
        let x0 = State::from_array(o.x0);
        let wheel = match o.wheel_on_stick {
            WheelKey::Hold => WheelOnStick::Hold,
            WheelKey::Zero => WheelOnStick::Zero,
        };
        let friction = match o.friction {
            FrictionKey::Estimated => FrictionCompensation::Estimated,
            FrictionKey::Ignored => FrictionCompensation::Ignored,
        };
        Ok(match kind {
            ObserverKind::Ekf => {
                Box::new(Ekf::new(plant, EkfState::new(x0, o.ekf_p, o.ekf_q, o.ekf_r)).with_wheel_on_stick(wheel))
            }
            ObserverKind::Nol => {
                let mode = match o.nol_mode {
                    NolModeKey::SampledData => NolMode::SampledData,
                    NolModeKey::QuasiContinuous => NolMode::QuasiContinuous,
                };
                let (m1, m2) = match o.nol_gains {
                    NolGainKey::DeadBeat => (NolGainSpec::DeadBeat, NolGainSpec::DeadBeat),
                    NolGainKey::Poles => (NolGainSpec::Poles(o.nol_poles_m1.clone()), NolGainSpec::Poles(o.nol_poles_m2.clone())),
                    NolGainKey::Lqe => (
                        NolGainSpec::Lqe { q_diag: o.nol_q_m1.clone(), r: o.nol_r },
                        NolGainSpec::Lqe { q_diag: o.nol_q_m2.clone(), r: o.nol_r },
                    ),
                };
                let design = NolDesign::new(&plant.mech, mode, dt, &m1, &m2)?.with_friction(friction);
                Box::new(NolObserver::new(design, plant, x0).with_wheel_on_stick(wheel))
            }
            ObserverKind::Nop => {
                let design = NopDesign::new(o.alpha, o.beta)?.with_friction(friction);
                Box::new(NopObserver::new(design, plant, x0).with_wheel_on_stick(wheel))
            }
        })
    }
}
