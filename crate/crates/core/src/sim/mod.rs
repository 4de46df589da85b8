//! Fixed-step closed-loop simulation of the master, the lossy wave channel and
//! the slave.
//!
//! Per step the exogenous inputs (both loss masks and the operator force) are
//! sampled once at the step midpoint and held. The channel itself is algebraic
//! in the robot states, so it is re-solved at every RK4 stage; this keeps the
//! integrator fourth order while a loss window edge still only takes effect at
//! a step boundary.

pub mod checks;
pub mod forces;
pub mod rk4;
pub mod scenario;

use std::io::{self, Write};
use std::ops::{Add, Mul};

use nalgebra::SVector;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    exchange, exchange_delayed, master_reference_residual, matched_reduction_residuals,
    slave_reference_residual, ChannelError, CoordinationState, LossFactors, WaveSample,
};
use crate::dynamics::{passive_output, reduced_accel, AddedInertia, DynamicsError, JointState};
use crate::energy::{
    lyapunov_value, tracking_errors, BoundednessMonitor, BoundednessReport, EnergyLedger, ErrorMode,
    KineticTerms, PowerSample, Starred, TrackingError,
};
use crate::loss::fmt17;

pub use forces::{environment_force, operator_force, Environment, OperatorProfile};
pub use scenario::{ConfigError, GainSpec, LossSpec, RobotSpec, Scenario, ScenarioConfig};

type Vector<const N: usize> = SVector<f64, N>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state became non-finite at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },
    #[error("dynamics failed at step {step}: {source}")]
    Dynamics { step: usize, source: DynamicsError },
    #[error("channel failed at step {step}: {source}")]
    Channel { step: usize, source: ChannelError },
    #[error("trace output failed: {0}")]
    Io(#[from] io::Error),
}

/// One row of the trace, sampled at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<const N: usize> {
    pub t: f64,
    pub q_m: Vector<N>,
    pub q_s: Vector<N>,
    pub qd_m: Vector<N>,
    pub qd_s: Vector<N>,
    pub qdd_m: Vector<N>,
    pub qdd_s: Vector<N>,
    pub r_m: Vector<N>,
    pub r_s: Vector<N>,
    pub r_md: Vector<N>,
    pub r_sd: Vector<N>,
    pub f_md: Vector<N>,
    pub f_sd: Vector<N>,
    pub u_m: Vector<N>,
    pub u_s: Vector<N>,
    pub v_s: Vector<N>,
    pub v_m: Vector<N>,
    pub f_h: Vector<N>,
    pub f_e: Vector<N>,
    /// Forward mask applied during this step.
    pub l: f64,
    /// Backward mask applied during this step.
    pub l_backward: f64,
    pub e_m: Vector<N>,
    pub e_s: Vector<N>,
    pub ed_m: Vector<N>,
    pub ed_s: Vector<N>,
    pub v: f64,
    pub v1: f64,
    /// Backward difference `(V_k - V_{k-1}) / dt`; zero on the first row.
    pub dv_fd: f64,
    pub diss_forward: f64,
    pub diss_backward: f64,
    pub coord: CoordinationState<N>,
    pub ledger: EnergyLedger,
}

const VECTOR_COLUMNS: [&str; 14] = [
    "q_m", "q_s", "qd_m", "qd_s", "r_m", "r_s", "r_md", "r_sd", "F_md", "F_sd", "u_m", "u_s", "v_s",
    "v_m",
];

impl<const N: usize> TraceRecord<N> {
    /// CSV header. Vector columns carry a `_j` suffix when `N > 1`.
    pub fn csv_header() -> String {
        let vec_col = |name: &str| -> Vec<String> {
            if N == 1 {
                vec![name.to_string()]
            } else {
                (0..N).map(|j| format!("{name}_{j}")).collect()
            }
        };
        let mut cols = vec!["t".to_string()];
        for name in VECTOR_COLUMNS {
            cols.extend(vec_col(name));
        }
        cols.push("L".to_string());
        cols.extend(vec_col("e_m"));
        cols.extend(vec_col("e_s"));
        for name in ["V", "V1", "dV_fd", "diss_forward", "diss_backward"] {
            cols.push(name.to_string());
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut out: Vec<String> = Vec::with_capacity(1 + 16 * N + 6);
        out.push(fmt17(self.t));
        for v in [
            &self.q_m, &self.q_s, &self.qd_m, &self.qd_s, &self.r_m, &self.r_s, &self.r_md,
            &self.r_sd, &self.f_md, &self.f_sd, &self.u_m, &self.u_s, &self.v_s, &self.v_m,
        ] {
            out.extend(v.iter().map(|x| fmt17(*x)));
        }
        out.push(fmt17(self.l));
        out.extend(self.e_m.iter().map(|x| fmt17(*x)));
        out.extend(self.e_s.iter().map(|x| fmt17(*x)));
        for x in [self.v, self.v1, self.dv_fd, self.diss_forward, self.diss_backward] {
            out.push(fmt17(x));
        }
        out.join(",")
    }

    pub fn tracking(&self) -> TrackingError<N> {
        TrackingError {
            e_m: self.e_m,
            e_s: self.e_s,
            ed_m: self.ed_m,
            ed_s: self.ed_s,
        }
    }

    pub fn loss_factors(&self) -> LossFactors {
        LossFactors {
            forward: self.l,
            backward: self.l_backward,
        }
    }
}

/// Receives trace rows as they are produced.
pub trait TraceSink<const N: usize> {
    fn record(&mut self, rec: &TraceRecord<N>) -> io::Result<()>;

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl<const N: usize> TraceSink<N> for Vec<TraceRecord<N>> {
    fn record(&mut self, rec: &TraceRecord<N>) -> io::Result<()> {
        self.push(*rec);
        Ok(())
    }
}

/// Discards every row.
pub struct NullSink;

impl<const N: usize> TraceSink<N> for NullSink {
    fn record(&mut self, _: &TraceRecord<N>) -> io::Result<()> {
        Ok(())
    }
}

/// Writes rows as CSV; the header goes out with the first row.
pub struct CsvSink<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            header_written: false,
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write, const N: usize> TraceSink<N> for CsvSink<W> {
    fn record(&mut self, rec: &TraceRecord<N>) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", TraceRecord::<N>::csv_header())?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", rec.csv_row())
    }

    fn finish(&mut self) -> io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", TraceRecord::<N>::csv_header())?;
            self.header_written = true;
        }
        self.out.flush()
    }
}

/// Integrated state: both robots plus the starred positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase<const N: usize> {
    pub master: JointState<N>,
    pub slave: JointState<N>,
    pub q_m_star: Vector<N>,
    pub q_s_star: Vector<N>,
}

impl<const N: usize> Add for Phase<N> {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            master: JointState::new(self.master.q + o.master.q, self.master.qd + o.master.qd),
            slave: JointState::new(self.slave.q + o.slave.q, self.slave.qd + o.slave.qd),
            q_m_star: self.q_m_star + o.q_m_star,
            q_s_star: self.q_s_star + o.q_s_star,
        }
    }
}

impl<const N: usize> Mul<f64> for Phase<N> {
    type Output = Self;

    fn mul(self, k: f64) -> Self {
        Self {
            master: JointState::new(self.master.q * k, self.master.qd * k),
            slave: JointState::new(self.slave.q * k, self.slave.qd * k),
            q_m_star: self.q_m_star * k,
            q_s_star: self.q_s_star * k,
        }
    }
}

impl<const N: usize> Phase<N> {
    fn is_finite(&self) -> bool {
        self.master.is_finite()
            && self.slave.is_finite()
            && self.q_m_star.iter().chain(self.q_s_star.iter()).all(|x| x.is_finite())
    }
}

/// Inputs held constant over one step.
#[derive(Debug, Clone, Copy)]
struct Held<const N: usize> {
    loss: LossFactors,
    f_h: Vector<N>,
    /// Waves in flight for the one-sample delay mode: `(u_s, v_m)`.
    delayed: Option<(Vector<N>, Vector<N>)>,
}

/// Everything the right-hand side produces at one state.
#[derive(Debug, Clone, Copy)]
struct Eval<const N: usize> {
    coord: CoordinationState<N>,
    waves: WaveSample<N>,
    f_e: Vector<N>,
    qdd_m: Vector<N>,
    qdd_s: Vector<N>,
    deriv: Phase<N>,
}

pub struct Simulator<const N: usize> {
    scenario: Scenario<N>,
    phase: Phase<N>,
    step: usize,
    ledger: EnergyLedger,
    /// `int F_e' q_s' dt`, for the passive-supply check.
    env_work: f64,
    /// Outgoing `(u_m, v_s)` of the previous step, for the delay mode.
    outgoing: (Vector<N>, Vector<N>),
    prev_v: Option<f64>,
}

impl<const N: usize> Simulator<N> {
    pub fn new(scenario: Scenario<N>) -> Self {
        let phase = Phase {
            master: scenario.master_init,
            slave: scenario.slave_init,
            // reconstructed positions start at the true ones
            q_m_star: scenario.master_init.q,
            q_s_star: scenario.slave_init.q,
        };
        Self {
            scenario,
            phase,
            step: 0,
            ledger: EnergyLedger::default(),
            env_work: 0.0,
            outgoing: (Vector::zeros(), Vector::zeros()),
            prev_v: None,
        }
    }

    pub fn scenario(&self) -> &Scenario<N> {
        &self.scenario
    }

    pub fn state(&self) -> &Phase<N> {
        &self.phase
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn env_work(&self) -> f64 {
        self.env_work
    }

    fn held(&self, t: f64) -> Held<N> {
        let s = &self.scenario;
        let mid = t + 0.5 * s.dt;
        let loss = LossFactors {
            forward: s.loss_forward.eval(mid),
            backward: s.loss_backward.eval(mid),
        };
        let delayed = (s.delay_steps > 0).then(|| {
            (self.outgoing.0 * loss.forward, self.outgoing.1 * loss.backward)
        });
        Held {
            loss,
            f_h: Vector::repeat(s.operator.force(mid)),
            delayed,
        }
    }

    fn eval(&self, x: &Phase<N>, held: &Held<N>) -> Result<Eval<N>, SimError> {
        let s = &self.scenario;
        let step = self.step;
        let lambda = &s.gains.lambda;
        let r_m = passive_output(&x.master, lambda);
        let r_s = passive_output(&x.slave, lambda);
        let (coord, waves) = match held.delayed {
            None => exchange(&r_m, &r_s, held.loss, &s.gains)
                .map_err(|source| SimError::Channel { step, source })?,
            Some((u_s, v_m)) => exchange_delayed(&r_m, &r_s, &u_s, &v_m, &s.gains),
        };

        let rd_m = reduced_accel(s.master.as_ref(), &x.master, &r_m, &held.f_h, &(-coord.f_md))
            .map_err(|source| SimError::Dynamics { step, source })?;

        // The environment mass moves with the slave, so it is folded into the
        // slave inertia: (M_s + M_e) r_s' + C r_s = F_sd - B q' - K q + M_e lambda q'.
        let env = &s.environment;
        let slave_model = AddedInertia {
            inner: s.slave.as_ref(),
            mass: env.mass,
        };
        let external = -env.static_force(&x.slave) + lambda.component_mul(&x.slave.qd) * env.mass;
        let rd_s = reduced_accel(&slave_model, &x.slave, &r_s, &external, &coord.f_sd)
            .map_err(|source| SimError::Dynamics { step, source })?;

        let qdd_m = rd_m - lambda.component_mul(&x.master.qd);
        let qdd_s = rd_s - lambda.component_mul(&x.slave.qd);
        let f_e = environment_force(&x.slave, &qdd_s, env);

        let deriv = Phase {
            master: JointState::new(x.master.qd, qdd_m),
            slave: JointState::new(x.slave.qd, qdd_s),
            q_m_star: coord.r_m_star - lambda.component_mul(&x.q_m_star),
            q_s_star: coord.r_s_star - lambda.component_mul(&x.q_s_star),
        };
        Ok(Eval {
            coord,
            waves,
            f_e,
            qdd_m,
            qdd_s,
            deriv,
        })
    }

    fn errors(&self, t: f64, x: &Phase<N>, coord: &CoordinationState<N>) -> TrackingError<N> {
        let s = &self.scenario;
        let starred = match s.error_mode {
            ErrorMode::Simulation => Starred::from_references(&x.q_m_star, &x.q_s_star, coord, &s.gains.lambda),
            ErrorMode::Analysis => Starred::analysis(
                s.loss_forward.eval_with_rate(t),
                s.loss_backward.eval_with_rate(t),
                &x.master,
                &x.slave,
            ),
        };
        tracking_errors(&starred, &x.master, &x.slave)
    }

    fn build_record(&self, t: f64, held: &Held<N>, ev: &Eval<N>) -> TraceRecord<N> {
        let s = &self.scenario;
        let x = &self.phase;
        let errors = self.errors(t, x, &ev.coord);
        let kin = KineticTerms {
            m_m: s.master.inertia(&x.master.q),
            r_m: ev.coord.r_m,
            m_s: s.slave.inertia(&x.slave.q),
            r_s: ev.coord.r_s,
        };
        let v = lyapunov_value(&kin, &errors, &s.gains, &self.ledger, s.convention);
        let dv_fd = self.prev_v.map_or(0.0, |p| (v - p) / s.dt);
        TraceRecord {
            t,
            q_m: x.master.q,
            q_s: x.slave.q,
            qd_m: x.master.qd,
            qd_s: x.slave.qd,
            qdd_m: ev.qdd_m,
            qdd_s: ev.qdd_s,
            r_m: ev.coord.r_m,
            r_s: ev.coord.r_s,
            r_md: ev.coord.r_md,
            r_sd: ev.coord.r_sd,
            f_md: ev.coord.f_md,
            f_sd: ev.coord.f_sd,
            u_m: ev.waves.u_m,
            u_s: ev.waves.u_s,
            v_s: ev.waves.v_s,
            v_m: ev.waves.v_m,
            f_h: held.f_h,
            f_e: ev.f_e,
            l: held.loss.forward,
            l_backward: held.loss.backward,
            e_m: errors.e_m,
            e_s: errors.e_s,
            ed_m: errors.ed_m,
            ed_s: errors.ed_s,
            v,
            v1: self.ledger.v1,
            dv_fd,
            diss_forward: self.ledger.diss_forward,
            diss_backward: self.ledger.diss_backward,
            coord: ev.coord,
            ledger: self.ledger,
        }
    }

    /// The row the next call to [`step`](Self::step) would emit, without advancing.
    pub fn observe(&self) -> Result<TraceRecord<N>, SimError> {
        let t = self.time();
        let held = self.held(t);
        let ev = self.eval(&self.phase, &held)?;
        Ok(self.build_record(t, &held, &ev))
    }

    /// Emit the row for the current time and advance one step.
    pub fn step(&mut self) -> Result<TraceRecord<N>, SimError> {
        let dt = self.scenario.dt;
        let t = self.time();
        let held = self.held(t);
        let start = self.eval(&self.phase, &held)?;
        let rec = self.build_record(t, &held, &start);

        let next = rk4::rk4_step(
            |_, x: Phase<N>| self.eval(&x, &held).map(|e| e.deriv),
            t,
            self.phase,
            dt,
        )?;
        if !next.is_finite() {
            return Err(SimError::NonFinite {
                step: self.step,
                time: t + dt,
            });
        }
        let end = self.eval(&next, &held)?;

        let power = |ev: &Eval<N>| {
            PowerSample::new(&ev.waves, &ev.f_e, &ev.coord.r_s, &held.f_h, &ev.coord.r_m)
        };
        self.ledger.accumulate(&power(&start), &power(&end), dt);
        self.env_work +=
            0.5 * dt * (start.f_e.dot(&self.phase.slave.qd) + end.f_e.dot(&next.slave.qd));
        self.outgoing = (end.waves.u_m, end.waves.v_s);
        self.phase = next;
        self.prev_v = Some(rec.v);
        self.step += 1;
        Ok(rec)
    }
}

/// Scalar results of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub steps: usize,
    pub duration: f64,
    pub loss_rate: f64,
    pub final_e_m: f64,
    pub final_e_s: f64,
    /// `max(|e_m|, |e_s|)` at the final state.
    pub final_error: f64,
    pub final_position_gap: f64,
    /// Largest positive `V_k - V_{k-1}` with both samples after the operator stops.
    pub max_v_increase: Option<f64>,
    pub min_v: f64,
    pub min_v1: f64,
    /// Smallest per-step `u_m^2 - u_s^2` or `v_s^2 - v_m^2`.
    pub min_wave_dissipation: f64,
    pub max_v1_form_gap: f64,
    /// `int (u_m^2 - u_s^2) dt` over the run.
    pub diss_forward: f64,
    /// `int (v_s^2 - v_m^2) dt` over the run.
    pub diss_backward: f64,
    pub max_slave_reference_residual: f64,
    pub max_master_reference_residual: f64,
    /// `None` unless the ports are matched.
    pub max_matched_reduction_residual: Option<f64>,
    pub env_work: f64,
    pub env_work_bound: f64,
    pub settle_tolerance: f64,
    pub settling_time: Option<f64>,
    pub settled: bool,
}

impl Summary {
    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("summary serializes");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::Null => "none".to_string(),
                    other => other.to_string(),
                };
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub summary: Summary,
    pub report: BoundednessReport,
}

/// Accumulates summary metrics row by row.
struct SummaryBuilder {
    operator_stop: Option<f64>,
    matched: bool,
    tol: f64,
    hold: f64,
    prev: Option<(f64, f64)>,
    max_v_increase: Option<f64>,
    min_v: f64,
    min_v1: f64,
    min_wave: f64,
    v1_gap: f64,
    res_slave: f64,
    res_master: f64,
    res_matched: f64,
    streak_start: Option<f64>,
}

impl SummaryBuilder {
    fn new<const N: usize>(s: &Scenario<N>) -> Self {
        Self {
            operator_stop: s.operator.last_active_time(),
            matched: s.gains.ports_matched(),
            tol: s.settle_tolerance(),
            hold: s.settle_hold,
            prev: None,
            max_v_increase: None,
            min_v: f64::INFINITY,
            min_v1: f64::INFINITY,
            min_wave: f64::INFINITY,
            v1_gap: 0.0,
            res_slave: 0.0,
            res_master: 0.0,
            res_matched: 0.0,
            streak_start: None,
        }
    }

    fn observe<const N: usize>(&mut self, rec: &TraceRecord<N>, gains: &crate::channel::Gains<N>) {
        if let (Some((t_prev, v_prev)), Some(stop)) = (self.prev, self.operator_stop) {
            if t_prev >= stop {
                let inc = (rec.v - v_prev).max(0.0);
                self.max_v_increase = Some(self.max_v_increase.map_or(inc, |m: f64| m.max(inc)));
            }
        }
        self.prev = Some((rec.t, rec.v));
        self.min_v = self.min_v.min(rec.v);
        self.min_v1 = self.min_v1.min(rec.v1);
        let fwd = rec.u_m.norm_squared() - rec.u_s.norm_squared();
        let bwd = rec.v_s.norm_squared() - rec.v_m.norm_squared();
        self.min_wave = self.min_wave.min(fwd).min(bwd);
        self.v1_gap = self.v1_gap.max((rec.ledger.v1 - rec.ledger.v1_loss).abs());
        let loss = rec.loss_factors();
        self.res_slave = self.res_slave.max(slave_reference_residual(&rec.coord, loss, gains));
        self.res_master = self.res_master.max(master_reference_residual(&rec.coord, loss, gains));
        if self.matched {
            let (a, b) = matched_reduction_residuals(&rec.coord, loss);
            self.res_matched = self.res_matched.max(a).max(b);
        }
        self.track_settling(rec.t, (rec.q_m - rec.q_s).amax());
    }

    fn track_settling(&mut self, t: f64, gap: f64) {
        if gap < self.tol {
            self.streak_start.get_or_insert(t);
        } else {
            self.streak_start = None;
        }
    }

    fn finish<const N: usize>(
        mut self,
        s: &Scenario<N>,
        sim: &Simulator<N>,
        last: &TraceRecord<N>,
    ) -> Summary {
        let end_time = last.t;
        self.track_settling(last.t, (last.q_m - last.q_s).amax());
        let settled = self
            .streak_start
            .is_some_and(|start| end_time - start >= self.hold - 1e-9 * s.dt.max(1.0));
        let k_e = s.environment.stiffness;
        Summary {
            steps: sim.steps_taken(),
            duration: s.duration,
            loss_rate: s.loss_rate(),
            final_e_m: last.e_m.amax(),
            final_e_s: last.e_s.amax(),
            final_error: last.e_m.amax().max(last.e_s.amax()),
            final_position_gap: (last.q_m - last.q_s).amax(),
            max_v_increase: self.max_v_increase,
            min_v: self.min_v,
            min_v1: self.min_v1,
            min_wave_dissipation: self.min_wave,
            max_v1_form_gap: self.v1_gap,
            diss_forward: sim.ledger().diss_forward,
            diss_backward: sim.ledger().diss_backward,
            max_slave_reference_residual: self.res_slave,
            max_master_reference_residual: self.res_master,
            max_matched_reduction_residual: self.matched.then_some(self.res_matched),
            env_work: sim.env_work(),
            env_work_bound: -0.5 * k_e * s.slave_init.q.norm_squared(),
            settle_tolerance: self.tol,
            settling_time: if settled { self.streak_start } else { None },
            settled,
        }
    }
}

/// Run the whole scenario, streaming rows into `sink`.
///
/// On failure the rows produced so far are already in the sink.
pub fn run<const N: usize, S: TraceSink<N> + ?Sized>(
    scenario: &Scenario<N>,
    sink: &mut S,
) -> Result<RunOutput, SimError> {
    let steps = scenario.steps();
    let mut sim = Simulator::new(scenario.clone());
    let mut summary = SummaryBuilder::new(scenario);
    let mut monitor = BoundednessMonitor::new(steps, scenario.bounds);
    for _ in 0..steps {
        let rec = sim.step()?;
        summary.observe(&rec, &scenario.gains);
        monitor.observe(&rec);
        sink.record(&rec)?;
    }
    sink.finish()?;
    // Final-state values come from the state after the last step.
    let last = sim.observe()?;
    Ok(RunOutput {
        summary: summary.finish(scenario, &sim, &last),
        report: monitor.finish(),
    })
}

/// Run and keep the full trace in memory.
pub fn run_collect<const N: usize>(
    scenario: &Scenario<N>,
) -> (Vec<TraceRecord<N>>, Result<RunOutput, SimError>) {
    let mut trace = Vec::with_capacity(scenario.steps());
    let out = run(scenario, &mut trace);
    (trace, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(duration: f64) -> ScenarioConfig {
        ScenarioConfig {
            duration,
            dt: 1e-3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let cfg = ScenarioConfig {
            operator: OperatorProfile::Zero,
            ..quick(1.0)
        };
        let (trace, out) = run_collect(&cfg.build::<1>().unwrap());
        out.unwrap();
        assert_eq!(trace.len(), 1000);
        assert!(trace.iter().all(|r| r.q_m[0] == 0.0 && r.q_s[0] == 0.0 && r.v == 0.0));
    }

    #[test]
    fn times_step_exactly() {
        let (trace, _) = run_collect(&quick(0.5).build::<1>().unwrap());
        for (k, r) in trace.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 1e-3);
        }
    }

    #[test]
    fn csv_header_matches_row_width() {
        let h1 = TraceRecord::<1>::csv_header();
        assert!(h1.starts_with("t,q_m,q_s,qd_m,qd_s,r_m,r_s,r_md,r_sd,F_md,F_sd,u_m,u_s,v_s,v_m,L,e_m,e_s,V,V1,dV_fd"));
        let (trace, _) = run_collect(&quick(0.01).build::<1>().unwrap());
        assert_eq!(trace[3].csv_row().split(',').count(), h1.split(',').count());
        let h2 = TraceRecord::<2>::csv_header();
        assert!(h2.starts_with("t,q_m_0,q_m_1,q_s_0"));
    }

    #[test]
    fn non_finite_state_is_reported() {
        let mut cfg = quick(1.0);
        cfg.q_m0 = vec![f64::MAX];
        cfg.qd_m0 = vec![f64::MAX];
        let (_, out) = run_collect(&cfg.build::<1>().unwrap());
        assert!(matches!(out, Err(SimError::NonFinite { step: 0, .. })));
    }

    #[test]
    fn summary_text_is_flat() {
        let (_, out) = run_collect(&quick(0.1).build::<1>().unwrap());
        let text = out.unwrap().summary.to_text();
        assert!(text.contains("steps = 100\n"));
        assert!(text.contains("settling_time = "));
    }
}
