//! Classic fourth-order Runge-Kutta step over any vector-like state.

use std::ops::{Add, Mul};

pub trait OdeState: Copy + Add<Output = Self> + Mul<f64, Output = Self> {}

impl<T: Copy + Add<Output = T> + Mul<f64, Output = T>> OdeState for T {}

/// Advance `x` by `dt`. The derivative may fail (e.g. a singular inertia), in
/// which case the error is returned unchanged.
pub fn rk4_step<S, E, F>(mut f: F, t: f64, x: S, dt: f64) -> Result<S, E>
where
    S: OdeState,
    F: FnMut(f64, S) -> Result<S, E>,
{
    let h = 0.5 * dt;
    let k1 = f(t, x)?;
    let k2 = f(t + h, x + k1 * h)?;
    let k3 = f(t + h, x + k2 * h)?;
    let k4 = f(t + dt, x + k3 * dt)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}
