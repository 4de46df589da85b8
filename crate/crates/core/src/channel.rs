//! Scattering transformation and the lossy wave channel.
//!
//! Each port turns its passive output into a wave using impedance `b`:
//!
//! ```text
//! u = (F + b r) / sqrt(2b)        v = (F - b r) / sqrt(2b)
//! ```
//!
//! The master sends `u_m`, the slave sends `v_s`. Both are multiplied by the
//! loss mask in flight, so the slave receives `u_s = L u_m` and the master
//! receives `v_m = L v_s`. Port forces are `F_md = K_m (r_m - r_md)` and
//! `F_sd = K_s (r_sd - r_s)`. With `K_m = K_s = b` the ports are matched, no
//! wave is reflected, and the references collapse to
//! `2 r_sd = L r_m + r_s`, `2 r_md = L r_s + r_m`.
//!
//! All gains are diagonal and stored as vectors of their diagonal entries.

use nalgebra::SVector;
use thiserror::Error;

use crate::loss::LossProfile;

type Vector<const N: usize> = SVector<f64, N>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("gain `{name}` must be strictly positive and finite in every joint")]
    NonPositiveGain { name: &'static str },
    #[error("wave loop is singular for joint {joint} (reflection product {product})")]
    SingularLoop { joint: usize, product: f64 },
}

/// Impedance and coordination gains, one diagonal entry per joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains<const N: usize> {
    pub b: Vector<N>,
    pub lambda: Vector<N>,
    pub k_m: Vector<N>,
    pub k_s: Vector<N>,
    pub k1: Vector<N>,
    pub k2: Vector<N>,
}

impl<const N: usize> Gains<N> {
    /// `K_m = K_s = b`, `K1 = K2 = lambda b / 2`.
    pub fn matched(b: f64, lambda: f64) -> Self {
        Self::matched_vec(Vector::repeat(b), Vector::repeat(lambda))
    }

    pub fn matched_vec(b: Vector<N>, lambda: Vector<N>) -> Self {
        let k = lambda.component_mul(&b) * 0.5;
        Self {
            b,
            lambda,
            k_m: b,
            k_s: b,
            k1: k,
            k2: k,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in [
            ("b", &self.b),
            ("lambda", &self.lambda),
            ("k_m", &self.k_m),
            ("k_s", &self.k_s),
            ("k1", &self.k1),
            ("k2", &self.k2),
        ] {
            if !v.iter().all(|x| x.is_finite() && *x > 0.0) {
                return Err(ChannelError::NonPositiveGain { name });
            }
        }
        Ok(())
    }

    /// Whether the coordination gains equal the impedance.
    pub fn ports_matched(&self) -> bool {
        self.k_m == self.b && self.k_s == self.b
    }

    /// Whether the error weights equal `lambda b / 2`.
    pub fn weights_matched(&self) -> bool {
        let k = self.lambda.component_mul(&self.b) * 0.5;
        close(&self.k1, &k) && close(&self.k2, &k)
    }
}

fn close<const N: usize>(a: &Vector<N>, b: &Vector<N>) -> bool {
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
}

/// Output of the master port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterPort<const N: usize> {
    pub r_md: Vector<N>,
    pub f_md: Vector<N>,
    pub u_m: Vector<N>,
}

/// Output of the slave port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlavePort<const N: usize> {
    pub r_sd: Vector<N>,
    pub f_sd: Vector<N>,
    pub v_s: Vector<N>,
}

/// Master port: given the received wave `v_m` and the local output `r_m`,
/// solve the port constraints for `r_md`, `F_md` and the outgoing `u_m`.
pub fn master_side<const N: usize>(v_m: &Vector<N>, r_m: &Vector<N>, gains: &Gains<N>) -> MasterPort<N> {
    let mut r_md = Vector::zeros();
    let mut f_md = Vector::zeros();
    let mut u_m = Vector::zeros();
    for i in 0..N {
        let (b, k) = (gains.b[i], gains.k_m[i]);
        let s = (2.0 * b).sqrt();
        r_md[i] = (k * r_m[i] - s * v_m[i]) / (k + b);
        f_md[i] = k * (r_m[i] - r_md[i]);
        u_m[i] = (f_md[i] + b * r_md[i]) / s;
    }
    MasterPort { r_md, f_md, u_m }
}

/// Slave port: given the received wave `u_s` and the local output `r_s`,
/// solve for `r_sd`, `F_sd` and the outgoing `v_s`.
pub fn slave_side<const N: usize>(u_s: &Vector<N>, r_s: &Vector<N>, gains: &Gains<N>) -> SlavePort<N> {
    let mut r_sd = Vector::zeros();
    let mut f_sd = Vector::zeros();
    let mut v_s = Vector::zeros();
    for i in 0..N {
        let (b, k) = (gains.b[i], gains.k_s[i]);
        let s = (2.0 * b).sqrt();
        r_sd[i] = (s * u_s[i] + k * r_s[i]) / (b + k);
        f_sd[i] = k * (r_sd[i] - r_s[i]);
        v_s[i] = (f_sd[i] - b * r_sd[i]) / s;
    }
    SlavePort { r_sd, f_sd, v_s }
}

/// Lossy transmission of one wave sample: `w L(t)`.
pub fn transmit<const N: usize>(wave: &Vector<N>, t: f64, profile: &LossProfile) -> Vector<N> {
    wave * profile.eval(t)
}

/// The four wave signals of one exchange plus what was sent before loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSample<const N: usize> {
    pub u_m: Vector<N>,
    pub v_m: Vector<N>,
    pub u_s: Vector<N>,
    pub v_s: Vector<N>,
}

impl<const N: usize> WaveSample<N> {
    pub fn zero() -> Self {
        Self {
            u_m: Vector::zeros(),
            v_m: Vector::zeros(),
            u_s: Vector::zeros(),
            v_s: Vector::zeros(),
        }
    }

    /// What arrived at the slave (`u_m` after loss).
    pub fn u_m_star(&self) -> Vector<N> {
        self.u_s
    }

    /// What arrived at the master (`v_s` after loss).
    pub fn v_s_star(&self) -> Vector<N> {
        self.v_m
    }
}

/// Channel-side quantities of one exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinationState<const N: usize> {
    pub r_m: Vector<N>,
    pub r_s: Vector<N>,
    pub r_md: Vector<N>,
    pub r_sd: Vector<N>,
    pub f_md: Vector<N>,
    pub f_sd: Vector<N>,
    /// `2 r_sd - r_s`: the master output as reconstructed at the slave.
    pub r_m_star: Vector<N>,
    /// `2 r_md - r_m`: the slave output as reconstructed at the master.
    pub r_s_star: Vector<N>,
}

/// Loss factors applied to one exchange, forward (master to slave) and backward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossFactors {
    pub forward: f64,
    pub backward: f64,
}

impl LossFactors {
    pub const NONE: LossFactors = LossFactors {
        forward: 1.0,
        backward: 1.0,
    };

    pub fn shared(l: f64) -> Self {
        Self {
            forward: l,
            backward: l,
        }
    }
}

/// Resolve one simultaneous exchange with zero transport delay.
///
/// With mismatched ports the outgoing wave of each side depends on what it
/// receives, which closes an algebraic loop through the channel. Per joint it
/// is the linear pair
///
/// ```text
/// u_m = A_m - rho_m L_b v_s      rho_m = (b - K_m) / (b + K_m)
/// v_s = A_s + rho_s L_f u_m      rho_s = (K_s - b) / (b + K_s)
/// ```
///
/// which is solved in closed form.
pub fn exchange<const N: usize>(
    r_m: &Vector<N>,
    r_s: &Vector<N>,
    loss: LossFactors,
    gains: &Gains<N>,
) -> Result<(CoordinationState<N>, WaveSample<N>), ChannelError> {
    let mut u_m = Vector::<N>::zeros();
    for i in 0..N {
        let b = gains.b[i];
        let (km, ks) = (gains.k_m[i], gains.k_s[i]);
        let s = (2.0 * b).sqrt();
        let a_m = s * km * r_m[i] / (b + km);
        let a_s = -s * ks * r_s[i] / (b + ks);
        let rho_m = (b - km) / (b + km);
        let rho_s = (ks - b) / (b + ks);
        let product = rho_m * rho_s * loss.backward * loss.forward;
        let denom = 1.0 + product;
        if denom.abs() < 1e-12 || !denom.is_finite() {
            return Err(ChannelError::SingularLoop { joint: i, product });
        }
        u_m[i] = (a_m - rho_m * loss.backward * a_s) / denom;
    }
    let u_s = u_m * loss.forward;
    let slave = slave_side(&u_s, r_s, gains);
    let v_m = slave.v_s * loss.backward;
    let mut master = master_side(&v_m, r_m, gains);
    // report the wave that was actually sent, so that u_s = L u_m holds exactly
    master.u_m = u_m;
    Ok(assemble(r_m, r_s, master, slave, u_s, v_m))
}

/// One exchange where each side acts on waves that left the other side one
/// sample earlier. No algebraic loop arises.
pub fn exchange_delayed<const N: usize>(
    r_m: &Vector<N>,
    r_s: &Vector<N>,
    u_s: &Vector<N>,
    v_m: &Vector<N>,
    gains: &Gains<N>,
) -> (CoordinationState<N>, WaveSample<N>) {
    let slave = slave_side(u_s, r_s, gains);
    let master = master_side(v_m, r_m, gains);
    assemble(r_m, r_s, master, slave, *u_s, *v_m)
}

fn assemble<const N: usize>(
    r_m: &Vector<N>,
    r_s: &Vector<N>,
    master: MasterPort<N>,
    slave: SlavePort<N>,
    u_s: Vector<N>,
    v_m: Vector<N>,
) -> (CoordinationState<N>, WaveSample<N>) {
    let coord = CoordinationState {
        r_m: *r_m,
        r_s: *r_s,
        r_md: master.r_md,
        r_sd: slave.r_sd,
        f_md: master.f_md,
        f_sd: slave.f_sd,
        r_m_star: slave.r_sd * 2.0 - r_s,
        r_s_star: master.r_md * 2.0 - r_m,
    };
    let waves = WaveSample {
        u_m: master.u_m,
        v_m,
        u_s,
        v_s: slave.v_s,
    };
    (coord, waves)
}

/// Residual of the slave reference equation
/// `(b + K_s) r_sd = (b - K_m) r_md* + K_m r_m* + K_s r_s`, with the starred
/// master quantities taken as `L_f r_md` and `L_f r_m`.
pub fn slave_reference_residual<const N: usize>(
    coord: &CoordinationState<N>,
    loss: LossFactors,
    gains: &Gains<N>,
) -> f64 {
    let l = loss.forward;
    (0..N)
        .map(|i| {
            let (b, km, ks) = (gains.b[i], gains.k_m[i], gains.k_s[i]);
            let lhs = (b + ks) * coord.r_sd[i];
            let rhs = (b - km) * l * coord.r_md[i] + km * l * coord.r_m[i] + ks * coord.r_s[i];
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the master reference equation
/// `(b + K_m) r_md = (b - K_s) r_sd* + K_s r_s* + K_m r_m`, with the starred
/// slave quantities taken as `L_b r_sd` and `L_b r_s`.
pub fn master_reference_residual<const N: usize>(
    coord: &CoordinationState<N>,
    loss: LossFactors,
    gains: &Gains<N>,
) -> f64 {
    let l = loss.backward;
    (0..N)
        .map(|i| {
            let (b, km, ks) = (gains.b[i], gains.k_m[i], gains.k_s[i]);
            let lhs = (b + km) * coord.r_md[i];
            let rhs = (b - ks) * l * coord.r_sd[i] + ks * l * coord.r_s[i] + km * coord.r_m[i];
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Residuals of the matched-port reduction `2 r_sd = L_f r_m + r_s` and
/// `2 r_md = L_b r_s + r_m`, as `(slave, master)`.
pub fn matched_reduction_residuals<const N: usize>(
    coord: &CoordinationState<N>,
    loss: LossFactors,
) -> (f64, f64) {
    let slave = (coord.r_sd * 2.0 - coord.r_m * loss.forward - coord.r_s).amax();
    let master = (coord.r_md * 2.0 - coord.r_s * loss.backward - coord.r_m).amax();
    (slave, master)
}
