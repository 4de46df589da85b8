//! Scenario definitions.
//!
//! [`ScenarioConfig`] is the untyped description (what a config file holds);
//! [`Scenario`] is the validated, dimension-typed form the simulator runs.

use std::fmt;
use std::sync::Arc;

use nalgebra::SVector;

use crate::channel::Gains;
use crate::dynamics::{JointState, OneDofModel, RobotModel, TwoLinkModel};
use crate::energy::{Bounds, ErrorMode, OperatorConvention};
use crate::loss::{LossError, LossMode, LossProfile};
use crate::sim::forces::{Environment, OperatorProfile};

type Vector<const N: usize> = SVector<f64, N>;

/// A configuration problem, always tied to the `section.key` that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

type ModelPair<const N: usize> = (Arc<dyn RobotModel<N>>, Arc<dyn RobotModel<N>>);

#[derive(Debug, Clone, PartialEq)]
pub enum RobotSpec {
    OneDof { master_mass: f64, slave_mass: f64 },
    TwoLink {
        lengths: [f64; 2],
        masses: [f64; 2],
        gravity: bool,
    },
}

impl RobotSpec {
    pub fn dof(&self) -> usize {
        match self {
            RobotSpec::OneDof { .. } => 1,
            RobotSpec::TwoLink { .. } => 2,
        }
    }
}

/// Gains as configured. `None` coordination gains mean "matched":
/// `K_m = K_s = b`, `K1 = K2 = lambda b / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpec {
    pub b: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k_m: Option<Vec<f64>>,
    pub k_s: Option<Vec<f64>>,
    pub k1: Option<Vec<f64>>,
    pub k2: Option<Vec<f64>>,
}

impl Default for GainSpec {
    fn default() -> Self {
        Self {
            b: vec![1.2],
            lambda: vec![1.0],
            k_m: None,
            k_s: None,
            k1: None,
            k2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub period: f64,
    pub alpha: f64,
    pub harmonics: u32,
    pub mode: LossMode,
    pub phase: f64,
    /// Independent backward-direction window; `None` shares the forward one.
    pub backward_alpha: Option<f64>,
    pub backward_phase: Option<f64>,
    /// 0 for same-step delivery, 1 for a one-sample transport delay.
    pub delay_steps: u32,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            period: 10.0,
            alpha: 0.0,
            harmonics: 64,
            mode: LossMode::IdealPulse,
            phase: 0.0,
            backward_alpha: None,
            backward_phase: None,
            delay_steps: 0,
        }
    }
}

impl LossSpec {
    pub fn rate(&self) -> f64 {
        self.alpha / self.period
    }

    fn profiles(&self) -> Result<(LossProfile, LossProfile), ConfigError> {
        let map = |e: LossError, prefix: &str| match e {
            LossError::InvalidPeriod(_) => ConfigError::new("loss.period", e.to_string()),
            LossError::InvalidWidth { .. } => ConfigError::new(format!("loss.{prefix}alpha"), e.to_string()),
            LossError::NoHarmonics => ConfigError::new("loss.harmonics", e.to_string()),
            LossError::InvalidPhase(_) => ConfigError::new(format!("loss.{prefix}phase"), e.to_string()),
            other => ConfigError::new("loss", other.to_string()),
        };
        let forward = LossProfile::with_phase(self.period, self.alpha, self.harmonics, self.mode, self.phase)
            .map_err(|e| map(e, ""))?;
        let backward = if self.backward_alpha.is_some() || self.backward_phase.is_some() {
            LossProfile::with_phase(
                self.period,
                self.backward_alpha.unwrap_or(self.alpha),
                self.harmonics,
                self.mode,
                self.backward_phase.unwrap_or(self.phase),
            )
            .map_err(|e| map(e, "backward_"))?
        } else {
            forward.clone()
        };
        if self.delay_steps > 1 {
            return Err(ConfigError::new("loss.delay_steps", "only 0 or 1 is supported"));
        }
        Ok((forward, backward))
    }
}

/// A complete experiment description. `Default` is the pulse scenario:
/// unit masses, `b = 1.2`, `lambda = 1`, lossless ideal channel with `T = 10 s`,
/// a 1 N pulse on `[1, 3)`, a unit spring with 0.5 damping, `dt = 1e-4`, 60 s.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub robot: RobotSpec,
    pub gains: GainSpec,
    pub loss: LossSpec,
    pub operator: OperatorProfile,
    pub environment: Environment,
    pub dt: f64,
    pub duration: f64,
    pub q_m0: Vec<f64>,
    pub q_s0: Vec<f64>,
    pub qd_m0: Vec<f64>,
    pub qd_s0: Vec<f64>,
    pub error_mode: ErrorMode,
    pub convention: OperatorConvention,
    pub seed: u64,
    /// Absolute tolerance on `|q_m - q_s|`; `None` uses 5% of the initial offset.
    pub settle_tolerance: Option<f64>,
    pub settle_hold: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            robot: RobotSpec::OneDof {
                master_mass: 1.0,
                slave_mass: 1.0,
            },
            gains: GainSpec::default(),
            loss: LossSpec::default(),
            operator: OperatorProfile::default(),
            environment: Environment::default(),
            dt: 1e-4,
            duration: 60.0,
            q_m0: vec![0.0],
            q_s0: vec![0.0],
            qd_m0: vec![0.0],
            qd_s0: vec![0.0],
            error_mode: ErrorMode::Simulation,
            convention: OperatorConvention::Exogenous,
            seed: 0,
            settle_tolerance: None,
            settle_hold: 5.0,
        }
    }
}

fn to_vector<const N: usize>(key: &str, values: &[f64]) -> Result<Vector<N>, ConfigError> {
    let v = match values.len() {
        1 => Vector::<N>::repeat(values[0]),
        n if n == N => Vector::<N>::from_column_slice(values),
        n => {
            return Err(ConfigError::new(
                key,
                format!("expected 1 or {N} values, got {n}"),
            ))
        }
    };
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::new(key, "values must be finite"));
    }
    Ok(v)
}

fn positive<const N: usize>(key: &str, values: &[f64]) -> Result<Vector<N>, ConfigError> {
    let v = to_vector::<N>(key, values)?;
    if v.iter().any(|x| *x <= 0.0) {
        return Err(ConfigError::new(key, "values must be strictly positive"));
    }
    Ok(v)
}

impl ScenarioConfig {
    pub fn dof(&self) -> usize {
        self.robot.dof()
    }

    /// Steps the run will take.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Check every invariant that does not depend on the joint count.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.dof() {
            1 => self.build::<1>().map(|_| ()),
            2 => self.build::<2>().map(|_| ()),
            n => Err(ConfigError::new("robot.model", format!("unsupported joint count {n}"))),
        }
    }

    fn models<const N: usize>(
        &self,
    ) -> Result<ModelPair<N>, ConfigError> {
        if self.dof() != N {
            return Err(ConfigError::new(
                "robot.model",
                format!("model has {} joints, scenario built for {N}", self.dof()),
            ));
        }
        match &self.robot {
            RobotSpec::OneDof {
                master_mass,
                slave_mass,
            } => {
                let m = OneDofModel::new(*master_mass)
                    .map_err(|e| ConfigError::new("robot.mass", e.to_string()))?;
                let s = OneDofModel::new(*slave_mass)
                    .map_err(|e| ConfigError::new("robot.mass", e.to_string()))?;
                let (m, s): (Box<dyn RobotModel<1>>, Box<dyn RobotModel<1>>) = (Box::new(m), Box::new(s));
                Ok(downcast_models::<1, N>(m, s))
            }
            RobotSpec::TwoLink {
                lengths,
                masses,
                gravity,
            } => {
                let model = TwoLinkModel::new(*lengths, *masses, *gravity).map_err(|e| {
                    let key = if e.to_string().starts_with("length") {
                        "robot.lengths"
                    } else {
                        "robot.masses"
                    };
                    ConfigError::new(key, e.to_string())
                })?;
                let (m, s): (Box<dyn RobotModel<2>>, Box<dyn RobotModel<2>>) =
                    (Box::new(model.clone()), Box::new(model));
                Ok(downcast_models::<2, N>(m, s))
            }
        }
    }

    /// Validate and produce a typed scenario with `N` joints.
    pub fn build<const N: usize>(&self) -> Result<Scenario<N>, ConfigError> {
        let (master, slave) = self.models::<N>()?;

        let b = positive::<N>("gains.b", &self.gains.b)?;
        let lambda = positive::<N>("gains.lambda", &self.gains.lambda)?;
        let mut gains = Gains::matched_vec(b, lambda);
        if let Some(k) = &self.gains.k_m {
            gains.k_m = positive::<N>("gains.k_m", k)?;
        }
        if let Some(k) = &self.gains.k_s {
            gains.k_s = positive::<N>("gains.k_s", k)?;
        }
        if let Some(k) = &self.gains.k1 {
            gains.k1 = positive::<N>("gains.k1", k)?;
        }
        if let Some(k) = &self.gains.k2 {
            gains.k2 = positive::<N>("gains.k2", k)?;
        }

        let (loss_forward, loss_backward) = self.loss.profiles()?;

        self.operator
            .validate()
            .map_err(|(k, m)| ConfigError::new(format!("operator.{k}"), m))?;
        self.environment
            .validate()
            .map_err(|(k, m)| ConfigError::new(format!("environment.{k}"), m))?;

        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::new("sim.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(ConfigError::new(
                "sim.duration",
                format!("must be at least dt, got {}", self.duration),
            ));
        }
        if let Some(tol) = self.settle_tolerance {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(ConfigError::new("sim.settle_tolerance", "must be positive"));
            }
        }
        if !(self.settle_hold.is_finite() && self.settle_hold >= 0.0) {
            return Err(ConfigError::new("sim.settle_hold", "must be non-negative"));
        }

        let master_init = JointState::new(
            to_vector::<N>("sim.q_m0", &self.q_m0)?,
            to_vector::<N>("sim.qd_m0", &self.qd_m0)?,
        );
        let slave_init = JointState::new(
            to_vector::<N>("sim.q_s0", &self.q_s0)?,
            to_vector::<N>("sim.qd_s0", &self.qd_s0)?,
        );

        Ok(Scenario {
            master,
            slave,
            gains,
            loss_forward,
            loss_backward,
            delay_steps: self.loss.delay_steps,
            operator: self.operator,
            environment: self.environment,
            dt: self.dt,
            duration: self.duration,
            master_init,
            slave_init,
            error_mode: self.error_mode,
            convention: self.convention,
            seed: self.seed,
            settle_tolerance: self.settle_tolerance,
            settle_hold: self.settle_hold,
            bounds: Bounds::default(),
        })
    }
}

// `N` is only known to equal the model's joint count at runtime; the match in
// `models` guarantees `M == N` before this is called.
fn downcast_models<const M: usize, const N: usize>(
    master: Box<dyn RobotModel<M>>,
    slave: Box<dyn RobotModel<M>>,
) -> (Arc<dyn RobotModel<N>>, Arc<dyn RobotModel<N>>) {
    assert_eq!(M, N);
    (
        Arc::new(Resized::<M, N>(master)),
        Arc::new(Resized::<M, N>(slave)),
    )
}

/// Adapter that re-labels a `RobotModel<M>` as `RobotModel<N>` when `M == N`.
struct Resized<const M: usize, const N: usize>(Box<dyn RobotModel<M>>);

fn relabel_vec<const A: usize, const B: usize>(v: &Vector<A>) -> Vector<B> {
    Vector::<B>::from_column_slice(v.as_slice())
}

impl<const M: usize, const N: usize> RobotModel<N> for Resized<M, N> {
    fn inertia(&self, q: &Vector<N>) -> nalgebra::SMatrix<f64, N, N> {
        nalgebra::SMatrix::<f64, N, N>::from_column_slice(self.0.inertia(&relabel_vec(q)).as_slice())
    }

    fn coriolis(&self, q: &Vector<N>, qd: &Vector<N>) -> nalgebra::SMatrix<f64, N, N> {
        nalgebra::SMatrix::<f64, N, N>::from_column_slice(
            self.0.coriolis(&relabel_vec(q), &relabel_vec(qd)).as_slice(),
        )
    }

    fn gravity(&self, q: &Vector<N>) -> Vector<N> {
        relabel_vec(&self.0.gravity(&relabel_vec(q)))
    }

    fn inertia_bounds(&self) -> (f64, f64) {
        self.0.inertia_bounds()
    }

    fn name(&self) -> &str {
        self.0.name()
    }
}

/// A validated scenario for `N`-joint robots.
#[derive(Clone)]
pub struct Scenario<const N: usize> {
    pub master: Arc<dyn RobotModel<N>>,
    pub slave: Arc<dyn RobotModel<N>>,
    pub gains: Gains<N>,
    pub loss_forward: LossProfile,
    pub loss_backward: LossProfile,
    pub delay_steps: u32,
    pub operator: OperatorProfile,
    pub environment: Environment,
    pub dt: f64,
    pub duration: f64,
    pub master_init: JointState<N>,
    pub slave_init: JointState<N>,
    pub error_mode: ErrorMode,
    pub convention: OperatorConvention,
    pub seed: u64,
    pub settle_tolerance: Option<f64>,
    pub settle_hold: f64,
    pub bounds: Bounds,
}

impl<const N: usize> Scenario<N> {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Tolerance on `|q_m - q_s|` used for settling.
    pub fn settle_tolerance(&self) -> f64 {
        self.settle_tolerance.unwrap_or_else(|| {
            let offset = (self.master_init.q - self.slave_init.q).amax();
            if offset > 0.0 {
                0.05 * offset
            } else {
                1e-3
            }
        })
    }

    /// Both directions see a mask that never leaves `[0, 1]`.
    pub fn loss_is_bounded(&self) -> bool {
        self.loss_forward.mode().is_bounded() && self.loss_backward.mode().is_bounded()
    }

    pub fn loss_rate(&self) -> f64 {
        self.loss_forward.rate()
    }
}

impl<const N: usize> fmt::Debug for Scenario<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("master", &self.master.name())
            .field("slave", &self.slave.name())
            .field("gains", &self.gains)
            .field("loss_forward", &self.loss_forward)
            .field("loss_backward", &self.loss_backward)
            .field("operator", &self.operator)
            .field("environment", &self.environment)
            .field("dt", &self.dt)
            .field("duration", &self.duration)
            .finish_non_exhaustive()
    }
}
