//! Tracking errors, the Lyapunov candidate and the channel energy ledger.
//!
//! The candidate is
//!
//! ```text
//! V = 1/2 (r_m' M_m r_m + r_s' M_s r_s + e_m' K1 e_m + e_s' K2 e_s)
//!     + int F_e' r_s dt  [- int F_h' r_m dt]  + V1
//! V1 = int (F_md' r_md - F_sd' r_sd) dt
//!    = int 1/2 (u_m^2 - v_m^2) dt - int 1/2 (u_s^2 - v_s^2) dt
//! ```
//!
//! The bracketed operator term depends on the sign convention chosen for the
//! operator, see [`OperatorConvention`].

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::channel::{CoordinationState, Gains, WaveSample};
use crate::dynamics::JointState;
use crate::loss::LossProfile;
use crate::sim::TraceRecord;

type Vector<const N: usize> = SVector<f64, N>;
type Matrix<const N: usize> = SMatrix<f64, N, N>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("closed-form dV/dt needs K1 = K2 = lambda b / 2 and K_m = K_s = b")]
    UnmatchedGains,
}

/// How starred (post-loss) positions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// `q* = L(t) q`, evaluated directly from the mask.
    Analysis,
    /// `q*` integrated from the reconstructed outputs: `q*' = r* - lambda q*`.
    #[default]
    Simulation,
}

impl ErrorMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analysis" => Some(ErrorMode::Analysis),
            "simulation" => Some(ErrorMode::Simulation),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorMode::Analysis => "analysis",
            ErrorMode::Simulation => "simulation",
        }
    }
}

/// Whether the operator's work enters `V`.
///
/// `Exogenous` treats the operator force as an external input: `V` is the
/// stored energy and grows by exactly the work the operator does. `Passive`
/// subtracts `int F_h' r_m` as it would be for a passive operator; for an
/// active operator (a force pulse) that form goes negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorConvention {
    #[default]
    Exogenous,
    Passive,
}

impl OperatorConvention {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exogenous" => Some(OperatorConvention::Exogenous),
            "passive" => Some(OperatorConvention::Passive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorConvention::Exogenous => "exogenous",
            OperatorConvention::Passive => "passive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError<const N: usize> {
    pub e_m: Vector<N>,
    pub e_s: Vector<N>,
    pub ed_m: Vector<N>,
    pub ed_s: Vector<N>,
}

impl<const N: usize> TrackingError<N> {
    pub fn zero() -> Self {
        Self {
            e_m: Vector::zeros(),
            e_s: Vector::zeros(),
            ed_m: Vector::zeros(),
            ed_s: Vector::zeros(),
        }
    }
}

/// Post-loss positions and velocities of both robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Starred<const N: usize> {
    pub master: JointState<N>,
    pub slave: JointState<N>,
}

impl<const N: usize> Starred<N> {
    /// `q* = L q`, `q*' = L' q + L q'`.
    pub fn analysis(
        (l_f, ld_f): (f64, f64),
        (l_b, ld_b): (f64, f64),
        master: &JointState<N>,
        slave: &JointState<N>,
    ) -> Self {
        Self {
            master: JointState::new(master.q * l_f, master.q * ld_f + master.qd * l_f),
            slave: JointState::new(slave.q * l_b, slave.q * ld_b + slave.qd * l_b),
        }
    }

    /// Starred positions integrated from reconstructed outputs, `q*' = r* - lambda q*`.
    pub fn from_references(
        q_m_star: &Vector<N>,
        q_s_star: &Vector<N>,
        coord: &CoordinationState<N>,
        lambda: &Vector<N>,
    ) -> Self {
        Self {
            master: JointState::new(*q_m_star, coord.r_m_star - lambda.component_mul(q_m_star)),
            slave: JointState::new(*q_s_star, coord.r_s_star - lambda.component_mul(q_s_star)),
        }
    }
}

/// `e_m = q_m* - q_s`, `e_s = q_s* - q_m`, with derivatives.
pub fn tracking_errors<const N: usize>(
    starred: &Starred<N>,
    master: &JointState<N>,
    slave: &JointState<N>,
) -> TrackingError<N> {
    TrackingError {
        e_m: starred.master.q - slave.q,
        e_s: starred.slave.q - master.q,
        ed_m: starred.master.qd - slave.qd,
        ed_s: starred.slave.qd - master.qd,
    }
}

/// Instantaneous power terms at one sample; integrated by [`EnergyLedger::accumulate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerSample {
    /// `F_e' r_s`
    pub env: f64,
    /// `F_h' r_m`
    pub operator: f64,
    /// `1/2 (u_m^2 - v_m^2) - 1/2 (u_s^2 - v_s^2)`
    pub wave_ports: f64,
    /// `1/2 (u_m^2 - u_m*^2) + 1/2 (v_s^2 - v_s*^2)`
    pub wave_loss: f64,
    /// `u_m^2 - u_s^2`
    pub forward: f64,
    /// `v_s^2 - v_m^2`
    pub backward: f64,
}

impl PowerSample {
    pub fn new<const N: usize>(
        waves: &WaveSample<N>,
        f_e: &Vector<N>,
        r_s: &Vector<N>,
        f_h: &Vector<N>,
        r_m: &Vector<N>,
    ) -> Self {
        let um2 = waves.u_m.norm_squared();
        let vm2 = waves.v_m.norm_squared();
        let us2 = waves.u_s.norm_squared();
        let vs2 = waves.v_s.norm_squared();
        let ums2 = waves.u_m_star().norm_squared();
        let vss2 = waves.v_s_star().norm_squared();
        Self {
            env: f_e.dot(r_s),
            operator: f_h.dot(r_m),
            wave_ports: 0.5 * (um2 - vm2) - 0.5 * (us2 - vs2),
            wave_loss: 0.5 * (um2 - ums2) + 0.5 * (vs2 - vss2),
            forward: um2 - us2,
            backward: vs2 - vm2,
        }
    }
}

/// Running integrals over a trajectory (trapezoidal rule at the step).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    /// Wave energy in port form.
    pub v1: f64,
    /// Wave energy in loss form; equal to `v1` whenever `u_s = L u_m`, `v_m = L v_s`.
    pub v1_loss: f64,
    /// `int F_e' r_s dt`
    pub supply_env: f64,
    /// `int F_h' r_m dt`
    pub supply_op: f64,
    /// `int (u_m^2 - u_s^2) dt`
    pub diss_forward: f64,
    /// `int (v_s^2 - v_m^2) dt`
    pub diss_backward: f64,
}

impl EnergyLedger {
    pub fn accumulate(&mut self, start: &PowerSample, end: &PowerSample, dt: f64) {
        let h = 0.5 * dt;
        self.v1 += h * (start.wave_ports + end.wave_ports);
        self.v1_loss += h * (start.wave_loss + end.wave_loss);
        self.supply_env += h * (start.env + end.env);
        self.supply_op += h * (start.operator + end.operator);
        self.diss_forward += h * (start.forward + end.forward);
        self.diss_backward += h * (start.backward + end.backward);
    }
}

pub fn wave_energy_v1(ledger: &EnergyLedger) -> f64 {
    ledger.v1
}

/// Inertia-weighted passive outputs of both robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticTerms<const N: usize> {
    pub m_m: Matrix<N>,
    pub r_m: Vector<N>,
    pub m_s: Matrix<N>,
    pub r_s: Vector<N>,
}

/// The quadratic part `1/2 (r_m' M_m r_m + r_s' M_s r_s + e_m' K1 e_m + e_s' K2 e_s)`.
pub fn quadratic_storage<const N: usize>(
    kin: &KineticTerms<N>,
    errors: &TrackingError<N>,
    gains: &Gains<N>,
) -> f64 {
    0.5 * (kin.r_m.dot(&(kin.m_m * kin.r_m))
        + kin.r_s.dot(&(kin.m_s * kin.r_s))
        + errors.e_m.dot(&gains.k1.component_mul(&errors.e_m))
        + errors.e_s.dot(&gains.k2.component_mul(&errors.e_s)))
}

pub fn lyapunov_value<const N: usize>(
    kin: &KineticTerms<N>,
    errors: &TrackingError<N>,
    gains: &Gains<N>,
    ledger: &EnergyLedger,
    convention: OperatorConvention,
) -> f64 {
    let operator = match convention {
        OperatorConvention::Exogenous => 0.0,
        OperatorConvention::Passive => ledger.supply_op,
    };
    quadratic_storage(kin, errors, gains) + ledger.supply_env - operator + ledger.v1
}

/// `dV/dt = -1/4 (ed_s' b ed_s + e_s' lambda b lambda e_s + ed_m' b ed_m + e_m' lambda b lambda e_m)`.
///
/// Only valid for matched gains.
pub fn vdot_closed_form<const N: usize>(
    errors: &TrackingError<N>,
    gains: &Gains<N>,
) -> Result<f64, EnergyError> {
    if !(gains.ports_matched() && gains.weights_matched()) {
        return Err(EnergyError::UnmatchedGains);
    }
    let lbl = gains.lambda.component_mul(&gains.b).component_mul(&gains.lambda);
    let q = |x: &Vector<N>, w: &Vector<N>| x.dot(&w.component_mul(x));
    Ok(-0.25
        * (q(&errors.ed_s, &gains.b)
            + q(&errors.e_s, &lbl)
            + q(&errors.ed_m, &gains.b)
            + q(&errors.e_m, &lbl)))
}

/// Residuals of `r_s* - r_m = e_s' + lambda e_s` and `r_m* - r_s = e_m' + lambda e_m`
/// (max-abs over joints), as `(res_s, res_m)`.
pub fn error_r_identity_residual<const N: usize>(
    coord: &CoordinationState<N>,
    errors: &TrackingError<N>,
    lambda: &Vector<N>,
) -> (f64, f64) {
    let res_s = (coord.r_s_star - coord.r_m) - (errors.ed_s + lambda.component_mul(&errors.e_s));
    let res_m = (coord.r_m_star - coord.r_s) - (errors.ed_m + lambda.component_mul(&errors.e_m));
    (res_s.amax(), res_m.amax())
}

/// Closed form of the second derivative of the quoted-coefficient series at
/// the window edge: `(4 pi / T^2) sum n (-1)^n sin(2 n pi alpha / T)`.
pub fn edge_curvature_closed_form(profile: &LossProfile) -> f64 {
    let t = profile.period();
    let sum: f64 = (1..=profile.harmonics())
        .map(|n| {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            nf * sign * (2.0 * nf * PI * profile.alpha() / t).sin()
        })
        .sum();
    4.0 * PI / (t * t) * sum
}

/// Per-quantity limits for [`BoundednessMonitor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub state: f64,
    pub accel: f64,
    pub vddot: f64,
    /// Threshold on the tail mean of `|dV/dt|` for declaring `dV/dt -> 0`.
    pub vdot_tail: f64,
    /// Fraction of the run that forms the tail.
    pub tail_fraction: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            state: 1e6,
            accel: 1e6,
            vddot: 1e6,
            vdot_tail: 1e-6,
            tail_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BoundednessReport {
    pub max_q: f64,
    pub max_qd: f64,
    pub max_qdd: f64,
    pub max_r: f64,
    pub max_e: f64,
    pub max_ed: f64,
    pub max_vddot: f64,
    pub tail_mean_abs_vdot: f64,
    pub vdot_converged: bool,
    pub flagged: Vec<String>,
}

impl BoundednessReport {
    pub fn bounded(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Online maxima over a trace. `dV/dt` is the backward difference logged in
/// the trace; `d2V/dt2` is the difference of consecutive `dV/dt` values.
#[derive(Debug, Clone)]
pub struct BoundednessMonitor {
    bounds: Bounds,
    total: usize,
    seen: usize,
    tail_start: usize,
    tail_sum: f64,
    tail_count: usize,
    prev: Option<(f64, f64)>,
    report: BoundednessReport,
}

impl BoundednessMonitor {
    pub fn new(total_records: usize, bounds: Bounds) -> Self {
        let tail = ((total_records as f64) * bounds.tail_fraction).ceil() as usize;
        Self {
            bounds,
            total: total_records,
            seen: 0,
            tail_start: total_records.saturating_sub(tail.max(1)),
            tail_sum: 0.0,
            tail_count: 0,
            prev: None,
            report: BoundednessReport {
                max_q: 0.0,
                max_qd: 0.0,
                max_qdd: 0.0,
                max_r: 0.0,
                max_e: 0.0,
                max_ed: 0.0,
                max_vddot: 0.0,
                tail_mean_abs_vdot: 0.0,
                vdot_converged: false,
                flagged: Vec::new(),
            },
        }
    }

    pub fn observe<const N: usize>(&mut self, rec: &TraceRecord<N>) {
        let r = &mut self.report;
        let m = |a: &Vector<N>, b: &Vector<N>| a.amax().max(b.amax());
        r.max_q = r.max_q.max(m(&rec.q_m, &rec.q_s));
        r.max_qd = r.max_qd.max(m(&rec.qd_m, &rec.qd_s));
        r.max_qdd = r.max_qdd.max(m(&rec.qdd_m, &rec.qdd_s));
        r.max_r = r.max_r.max(m(&rec.r_m, &rec.r_s));
        r.max_e = r.max_e.max(m(&rec.e_m, &rec.e_s));
        r.max_ed = r.max_ed.max(m(&rec.ed_m, &rec.ed_s));
        if let Some((t_prev, dv_prev)) = self.prev {
            let dt = rec.t - t_prev;
            if dt > 0.0 && self.seen >= 2 {
                r.max_vddot = r.max_vddot.max(((rec.dv_fd - dv_prev) / dt).abs());
            }
        }
        if self.seen >= self.tail_start {
            self.tail_sum += rec.dv_fd.abs();
            self.tail_count += 1;
        }
        self.prev = Some((rec.t, rec.dv_fd));
        self.seen += 1;
    }

    pub fn finish(mut self) -> BoundednessReport {
        let b = self.bounds;
        let r = &mut self.report;
        r.tail_mean_abs_vdot = if self.tail_count > 0 {
            self.tail_sum / self.tail_count as f64
        } else {
            0.0
        };
        r.vdot_converged = self.seen == self.total && r.tail_mean_abs_vdot < b.vdot_tail;
        let checks = [
            ("q", r.max_q, b.state),
            ("qd", r.max_qd, b.state),
            ("qdd", r.max_qdd, b.accel),
            ("r", r.max_r, b.state),
            ("e", r.max_e, b.state),
            ("ed", r.max_ed, b.state),
            ("vddot", r.max_vddot, b.vddot),
        ];
        for (name, value, limit) in checks {
            if !(value.is_finite() && value <= limit) {
                r.flagged.push(format!("{name}: {value:e} exceeds {limit:e}"));
            }
        }
        self.report
    }
}

/// Folds a complete trace through a [`BoundednessMonitor`].
pub fn boundedness_report<const N: usize>(trace: &[TraceRecord<N>], bounds: Bounds) -> BoundednessReport {
    let mut mon = BoundednessMonitor::new(trace.len(), bounds);
    for rec in trace {
        mon.observe(rec);
    }
    mon.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    type V1 = Vector<1>;

    fn errors(e_m: f64, e_s: f64, ed_m: f64, ed_s: f64) -> TrackingError<1> {
        TrackingError {
            e_m: V1::new(e_m),
            e_s: V1::new(e_s),
            ed_m: V1::new(ed_m),
            ed_s: V1::new(ed_s),
        }
    }

    #[test]
    fn tracking_error_substitution() {
        let m = JointState::new(V1::new(2.0), V1::new(0.0));
        let s = JointState::new(V1::new(0.5), V1::new(0.0));
        let st = Starred::analysis((1.0, 0.0), (1.0, 0.0), &m, &s);
        let e = tracking_errors(&st, &m, &s);
        assert_eq!(e.e_m[0], 1.5);
        assert_eq!(e.e_s[0], -1.5);

        let tracked = Starred {
            master: s,
            slave: m,
        };
        let e = tracking_errors(&tracked, &m, &s);
        assert_eq!(e.e_m[0], 0.0);
    }

    #[test]
    fn lyapunov_terms() {
        let g = Gains::<1>::matched(1.2, 1.0);
        let mut kin = KineticTerms {
            m_m: Matrix::<1>::new(1.0),
            r_m: V1::zeros(),
            m_s: Matrix::<1>::new(1.0),
            r_s: V1::zeros(),
        };
        let ledger = EnergyLedger::default();
        let z = TrackingError::zero();
        assert_eq!(lyapunov_value(&kin, &z, &g, &ledger, OperatorConvention::Exogenous), 0.0);
        kin.r_m[0] = 1.0;
        assert_abs_diff_eq!(
            lyapunov_value(&kin, &z, &g, &ledger, OperatorConvention::Exogenous),
            0.5
        );
        let ledger = EnergyLedger {
            supply_op: 0.25,
            ..Default::default()
        };
        assert_abs_diff_eq!(
            lyapunov_value(&kin, &z, &g, &ledger, OperatorConvention::Passive),
            0.25
        );
    }

    #[test]
    fn vdot_examples() {
        let g = Gains::<1>::matched(1.2, 1.0);
        assert_eq!(vdot_closed_form(&TrackingError::<1>::zero(), &g).unwrap(), 0.0);
        let v = vdot_closed_form(&errors(0.0, 0.0, 0.0, 1.0), &g).unwrap();
        assert_abs_diff_eq!(v, -0.3, epsilon = 1e-15);

        let mut bad = g;
        bad.k1 = V1::new(5.0);
        assert_eq!(vdot_closed_form(&z1(), &bad), Err(EnergyError::UnmatchedGains));
    }

    fn z1() -> TrackingError<1> {
        TrackingError::zero()
    }

    #[test]
    fn ledger_trapezoid() {
        let mut l = EnergyLedger::default();
        let a = PowerSample {
            env: 1.0,
            forward: 2.0,
            ..Default::default()
        };
        let b = PowerSample {
            env: 3.0,
            forward: 0.0,
            ..Default::default()
        };
        l.accumulate(&a, &b, 0.5);
        assert_eq!(l.supply_env, 1.0);
        assert_eq!(l.diss_forward, 0.5);
    }

    #[test]
    fn identity_residual_of_zero_trajectory() {
        let coord = CoordinationState::<1> {
            r_m: V1::zeros(),
            r_s: V1::zeros(),
            r_md: V1::zeros(),
            r_sd: V1::zeros(),
            f_md: V1::zeros(),
            f_sd: V1::zeros(),
            r_m_star: V1::zeros(),
            r_s_star: V1::zeros(),
        };
        assert_eq!(error_r_identity_residual(&coord, &z1(), &V1::new(1.0)), (0.0, 0.0));
    }

    #[test]
    fn lossless_profile_has_no_edge_curvature() {
        let p = LossProfile::new(10.0, 0.0, 64, crate::loss::LossMode::FourierPaper).unwrap();
        assert_eq!(edge_curvature_closed_form(&p), 0.0);
    }
}
