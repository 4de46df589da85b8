//! Operator and environment force models.

use std::f64::consts::PI;

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::JointState;

type Vector<const N: usize> = SVector<f64, N>;

/// Force the operator applies to every master joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorProfile {
    Zero,
    /// `amplitude` on `[start, start + width)`, zero elsewhere.
    Pulse { amplitude: f64, start: f64, width: f64 },
    /// `amplitude sin(2 pi frequency t)`.
    Sine { amplitude: f64, frequency: f64 },
    /// Piecewise-constant levels drawn uniformly from `[-amplitude, amplitude]`,
    /// each held for `hold` seconds. Levels depend only on `seed` and the
    /// interval index.
    Random { amplitude: f64, hold: f64, seed: u64 },
}

impl Default for OperatorProfile {
    fn default() -> Self {
        OperatorProfile::Pulse {
            amplitude: 1.0,
            start: 1.0,
            width: 2.0,
        }
    }
}

impl OperatorProfile {
    pub fn force(&self, t: f64) -> f64 {
        match *self {
            OperatorProfile::Zero => 0.0,
            OperatorProfile::Pulse {
                amplitude,
                start,
                width,
            } => {
                if t >= start && t < start + width {
                    amplitude
                } else {
                    0.0
                }
            }
            OperatorProfile::Sine {
                amplitude,
                frequency,
            } => amplitude * (2.0 * PI * frequency * t).sin(),
            OperatorProfile::Random {
                amplitude,
                hold,
                seed,
            } => {
                if t < 0.0 {
                    return 0.0;
                }
                let index = (t / hold).floor() as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(index);
                amplitude * rng.gen_range(-1.0..=1.0)
            }
        }
    }

    /// Time after which the force is identically zero; `None` if it never stops.
    pub fn last_active_time(&self) -> Option<f64> {
        match *self {
            OperatorProfile::Zero => Some(0.0),
            OperatorProfile::Pulse { start, width, .. } => Some(start + width),
            OperatorProfile::Sine { amplitude, .. } | OperatorProfile::Random { amplitude, .. } => {
                if amplitude == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err((name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            OperatorProfile::Zero => Ok(()),
            OperatorProfile::Pulse {
                amplitude,
                start,
                width,
            } => {
                finite("amplitude", amplitude)?;
                finite("start", start)?;
                if !(width.is_finite() && width >= 0.0) {
                    return Err(("width", format!("must be non-negative, got {width}")));
                }
                Ok(())
            }
            OperatorProfile::Sine {
                amplitude,
                frequency,
            } => {
                finite("amplitude", amplitude)?;
                finite("frequency", frequency)
            }
            OperatorProfile::Random { amplitude, hold, .. } => {
                finite("amplitude", amplitude)?;
                if !(hold.is_finite() && hold > 0.0) {
                    return Err(("hold", format!("must be positive, got {hold}")));
                }
                Ok(())
            }
        }
    }
}

pub fn operator_force(t: f64, profile: &OperatorProfile) -> f64 {
    profile.force(t)
}

/// Mass-spring-damper environment acting on every slave joint:
/// `F_e = M_e q'' + B_e q' + K_e q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub stiffness: f64,
    pub damping: f64,
    pub mass: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            stiffness: 1.0,
            damping: 0.5,
            mass: 0.0,
        }
    }
}

impl Environment {
    pub fn free_space() -> Self {
        Self {
            stiffness: 0.0,
            damping: 0.0,
            mass: 0.0,
        }
    }

    pub fn is_free_space(&self) -> bool {
        self.stiffness == 0.0 && self.damping == 0.0 && self.mass == 0.0
    }

    /// Spring and damper part only.
    pub fn static_force<const N: usize>(&self, slave: &JointState<N>) -> Vector<N> {
        slave.q * self.stiffness + slave.qd * self.damping
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("mass", self.mass),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((name, format!("must be non-negative for a passive environment, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn environment_force<const N: usize>(
    slave: &JointState<N>,
    qdd: &Vector<N>,
    env: &Environment,
) -> Vector<N> {
    qdd * env.mass + env.static_force(slave)
}
