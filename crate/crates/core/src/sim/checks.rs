//! Invariant suite run by `telesim check`.

use std::fmt;

use nalgebra::SVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{inertia_within_bounds, skew_residual, JointState, RobotModel};
use crate::sim::{run, NullSink, RunOutput, Scenario, SimError};

type Vector<const N: usize> = SVector<f64, N>;

pub const RESIDUAL_TOL: f64 = 1e-12;
pub const ENERGY_TOL: f64 = 1e-9;
pub const STEP_INCREASE_TOL: f64 = 1e-6;
pub const V1_FORM_TOL: f64 = 1e-10;
pub const SKEW_TOL: f64 = 1e-6;
/// Length of the run the suite inspects.
pub const CHECK_DURATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &'static str, ok: bool, detail: String) -> Self {
        Self {
            name,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail,
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Self {
            name,
            status: CheckStatus::Skipped,
            detail: why.to_string(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<7} {:<28} {}", self.status.to_string(), self.name, self.detail)
    }
}

/// Property 1 on a grid of `points` configurations.
pub fn inertia_property<const N: usize>(model: &dyn RobotModel<N>, points: usize) -> bool {
    grid::<N>(points).iter().all(|q| inertia_within_bounds(model, q))
}

/// Property 2: largest `|x' (M' - 2C) x|` over a grid with seeded random
/// velocities and test vectors.
pub fn skew_property<const N: usize>(model: &dyn RobotModel<N>, points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid::<N>(points)
        .into_iter()
        .map(|q| {
            let qd = Vector::<N>::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let x = Vector::<N>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            skew_residual(model, &JointState::new(q, qd), &x, 1e-5).abs()
        })
        .fold(0.0, f64::max)
}

/// `points` configurations spread over `[-pi, pi)` in every joint.
fn grid<const N: usize>(points: usize) -> Vec<Vector<N>> {
    let per_axis = (points as f64).powf(1.0 / N as f64).round().max(1.0) as usize;
    let total = per_axis.pow(N as u32);
    (0..total)
        .map(|mut k| {
            Vector::<N>::from_fn(|_, _| {
                let i = k % per_axis;
                k /= per_axis;
                -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / per_axis as f64
            })
        })
        .collect()
}

/// Properties 1 and 2 of both robot models.
pub fn model_checks<const N: usize>(scenario: &Scenario<N>) -> Vec<CheckResult> {
    let pd = inertia_property(scenario.master.as_ref(), 100) && inertia_property(scenario.slave.as_ref(), 100);
    let skew = skew_property(scenario.master.as_ref(), 100, scenario.seed)
        .max(skew_property(scenario.slave.as_ref(), 100, scenario.seed));
    vec![
        CheckResult::bound(
            "inertia positive definite",
            pd,
            "m1 I < M(q) < m2 I on a 100-point grid".into(),
        ),
        CheckResult::bound(
            "skew symmetry",
            skew < SKEW_TOL,
            format!("max |x'(dM - 2C)x| = {skew:.3e}"),
        ),
    ]
}

/// Invariants that can be read off a completed run.
pub fn output_checks<const N: usize>(scenario: &Scenario<N>, out: &RunOutput) -> Vec<CheckResult> {
    let s = &out.summary;
    let mut results = Vec::new();
    results.push(CheckResult::bound(
        "slave reference equation",
        s.max_slave_reference_residual < RESIDUAL_TOL,
        format!("max residual {:.3e}", s.max_slave_reference_residual),
    ));
    results.push(CheckResult::bound(
        "master reference equation",
        s.max_master_reference_residual < RESIDUAL_TOL,
        format!("max residual {:.3e}", s.max_master_reference_residual),
    ));
    results.push(match s.max_matched_reduction_residual {
        Some(r) => CheckResult::bound("matched reduction", r < RESIDUAL_TOL, format!("max residual {r:.3e}")),
        None => CheckResult::skipped(
            "matched reduction",
            "K_m or K_s differs from b; general-gain residuals checked instead",
        ),
    });

    let pointwise_ok = scenario.loss_is_bounded() && scenario.delay_steps == 0;
    results.push(if pointwise_ok {
        CheckResult::bound(
            "pointwise dissipation",
            s.min_wave_dissipation >= -ENERGY_TOL,
            format!("min per-step u^2 - u*^2 = {:.3e}", s.min_wave_dissipation),
        )
    } else {
        CheckResult::skipped(
            "pointwise dissipation",
            "loss mask can leave [0, 1] or waves are delayed; only the integral form applies",
        )
    });
    results.push(CheckResult::bound(
        "integral dissipation",
        s.diss_forward.min(s.diss_backward) >= -ENERGY_TOL,
        format!("int forward = {:.3e}, int backward = {:.3e}", s.diss_forward, s.diss_backward),
    ));
    results.push(CheckResult::bound(
        "V1 forms agree",
        s.max_v1_form_gap < V1_FORM_TOL,
        format!("max gap {:.3e}", s.max_v1_form_gap),
    ));
    results.push(if pointwise_ok {
        CheckResult::bound("V1 non-negative", s.min_v1 >= -ENERGY_TOL, format!("min V1 = {:.3e}", s.min_v1))
    } else {
        CheckResult::skipped("V1 non-negative", "needs a mask bounded in [0, 1]")
    });
    results.push(CheckResult::bound(
        "V non-negative",
        s.min_v >= -ENERGY_TOL,
        format!("min V = {:.3e}", s.min_v),
    ));
    results.push(match s.max_v_increase {
        Some(inc) => CheckResult::bound(
            "V non-increasing",
            inc <= STEP_INCREASE_TOL,
            format!("max per-step increase after operator stops = {inc:.3e}"),
        ),
        None => CheckResult::skipped("V non-increasing", "operator force does not stop within the run"),
    });
    results.push(CheckResult::bound(
        "environment passive",
        s.env_work >= s.env_work_bound - ENERGY_TOL,
        format!("int F_e q_s' = {:.3e} (bound {:.3e})", s.env_work, s.env_work_bound),
    ));
    results.push(CheckResult::bound(
        "bounded signals",
        out.report.bounded(),
        if out.report.bounded() {
            format!("max |q| = {:.3e}, max |V''| = {:.3e}", out.report.max_q, out.report.max_vddot)
        } else {
            out.report.flagged.join("; ")
        },
    ));
    results
}

/// Run the first [`CHECK_DURATION`] seconds of `scenario` and evaluate every
/// invariant. A run that fails outright is returned as the error.
pub fn run_checks<const N: usize>(scenario: &Scenario<N>) -> Result<Vec<CheckResult>, SimError> {
    let mut short = scenario.clone();
    short.duration = scenario.duration.min(CHECK_DURATION);
    let mut results = model_checks(&short);
    let out = run(&short, &mut NullSink)?;
    results.extend(output_checks(&short, &out));
    Ok(results)
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.status != CheckStatus::Fail)
}
