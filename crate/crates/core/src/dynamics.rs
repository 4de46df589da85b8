//! Manipulator dynamics `M(q) q'' + C(q, q') q' + g(q) = tau + f_ext`.
//!
//! Forces are joint-space throughout (the task-space Jacobian is the identity).
//! With the feedback-linearizing torque from [`control_torque`] each robot
//! reduces to `M r' + C r = tau'` in the passive output `r = q' + lambda q`.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

pub type Vector<const N: usize> = SVector<f64, N>;
pub type Matrix<const N: usize> = SMatrix<f64, N, N>;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("inertia matrix is not positive definite at q = {q:?}")]
    SingularInertia { q: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState<const N: usize> {
    pub q: Vector<N>,
    pub qd: Vector<N>,
}

impl<const N: usize> JointState<N> {
    pub fn new(q: Vector<N>, qd: Vector<N>) -> Self {
        Self { q, qd }
    }

    pub fn zero() -> Self {
        Self {
            q: Vector::zeros(),
            qd: Vector::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|x| x.is_finite())
    }
}

/// Dynamics provider for an `N`-joint robot.
pub trait RobotModel<const N: usize>: Send + Sync {
    fn inertia(&self, q: &Vector<N>) -> Matrix<N>;

    /// Coriolis/centrifugal matrix built from Christoffel symbols, so that
    /// `M' - 2C` is skew-symmetric.
    fn coriolis(&self, q: &Vector<N>, qd: &Vector<N>) -> Matrix<N>;

    fn gravity(&self, q: &Vector<N>) -> Vector<N>;

    /// Constants `(m1, m2)` with `m1 I < M(q) < m2 I` for every `q`.
    fn inertia_bounds(&self) -> (f64, f64);

    fn name(&self) -> &str;
}

/// Passive output `r = q' + lambda q` (diagonal `lambda`).
pub fn passive_output<const N: usize>(state: &JointState<N>, lambda: &Vector<N>) -> Vector<N> {
    state.qd + lambda.component_mul(&state.q)
}

/// Feedback-linearizing torque `tau = -M lambda q' - C lambda q + g + tau_bar`.
pub fn control_torque<const N: usize>(
    model: &dyn RobotModel<N>,
    state: &JointState<N>,
    lambda: &Vector<N>,
    tau_bar: &Vector<N>,
) -> Vector<N> {
    let m = model.inertia(&state.q);
    let c = model.coriolis(&state.q, &state.qd);
    -(m * lambda.component_mul(&state.qd)) - c * lambda.component_mul(&state.q)
        + model.gravity(&state.q)
        + tau_bar
}

fn solve_inertia<const N: usize>(
    m: Matrix<N>,
    q: &Vector<N>,
    rhs: Vector<N>,
) -> Result<Vector<N>, DynamicsError> {
    m.cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or_else(|| DynamicsError::SingularInertia {
            q: q.iter().copied().collect(),
        })
}

/// Reduced dynamics `r' = M^-1 (external + applied - C r)`.
///
/// Master: `external = F_h`, `applied = -F_md`. Slave: `external = -F_e`,
/// `applied = F_sd`.
pub fn reduced_accel<const N: usize>(
    model: &dyn RobotModel<N>,
    state: &JointState<N>,
    r: &Vector<N>,
    external: &Vector<N>,
    applied: &Vector<N>,
) -> Result<Vector<N>, DynamicsError> {
    let c = model.coriolis(&state.q, &state.qd);
    solve_inertia(model.inertia(&state.q), &state.q, external + applied - c * r)
}

/// Full forward dynamics `q'' = M^-1 (tau + external - C q' - g)`.
pub fn forward_accel<const N: usize>(
    model: &dyn RobotModel<N>,
    state: &JointState<N>,
    tau: &Vector<N>,
    external: &Vector<N>,
) -> Result<Vector<N>, DynamicsError> {
    let c = model.coriolis(&state.q, &state.qd);
    let rhs = tau + external - c * state.qd - model.gravity(&state.q);
    solve_inertia(model.inertia(&state.q), &state.q, rhs)
}

/// Kinetic energy `1/2 q'^T M q'`.
pub fn kinetic_energy<const N: usize>(model: &dyn RobotModel<N>, state: &JointState<N>) -> f64 {
    0.5 * state.qd.dot(&(model.inertia(&state.q) * state.qd))
}

/// Single prismatic joint with constant mass, no Coriolis, no gravity.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDofModel {
    mass: f64,
}

impl OneDofModel {
    pub fn new(mass: f64) -> Result<Self, DynamicsError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(DynamicsError::NonPositive {
                name: "mass",
                value: mass,
            });
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

pub fn one_dof_model(mass: f64) -> Result<OneDofModel, DynamicsError> {
    OneDofModel::new(mass)
}

impl RobotModel<1> for OneDofModel {
    fn inertia(&self, _q: &Vector<1>) -> Matrix<1> {
        Matrix::<1>::new(self.mass)
    }

    fn coriolis(&self, _q: &Vector<1>, _qd: &Vector<1>) -> Matrix<1> {
        Matrix::<1>::zeros()
    }

    fn gravity(&self, _q: &Vector<1>) -> Vector<1> {
        Vector::<1>::zeros()
    }

    fn inertia_bounds(&self) -> (f64, f64) {
        let eps = self.mass * 1e-9;
        (self.mass - eps, self.mass + eps)
    }

    fn name(&self) -> &str {
        "one_dof"
    }
}

/// Planar two-link revolute arm with uniform slender links.
///
/// Link `i` has length `l_i`, mass `m_i`, centre of mass at `l_i / 2` and
/// centroidal inertia `m_i l_i^2 / 12`. Joint angles are measured from the
/// horizontal, so gravity acts through `cos q1` and `cos(q1 + q2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkModel {
    lengths: [f64; 2],
    masses: [f64; 2],
    gravity: f64,
    bounds: (f64, f64),
}

impl TwoLinkModel {
    pub fn new(lengths: [f64; 2], masses: [f64; 2], with_gravity: bool) -> Result<Self, DynamicsError> {
        for (name, v) in [
            ("length", lengths[0]),
            ("length", lengths[1]),
            ("mass", masses[0]),
            ("mass", masses[1]),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DynamicsError::NonPositive { name, value: v });
            }
        }
        let mut model = Self {
            lengths,
            masses,
            gravity: if with_gravity { GRAVITY } else { 0.0 },
            bounds: (0.0, 0.0),
        };
        model.bounds = model.scan_eigen_bounds(3600);
        Ok(model)
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn masses(&self) -> [f64; 2] {
        self.masses
    }

    // M only depends on q2. The extreme eigenvalues are attained at
    // cos q2 = +-1, and both are on the grid.
    fn scan_eigen_bounds(&self, samples: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..samples {
            let q2 = 2.0 * PI * i as f64 / samples as f64;
            let eig = self.inertia(&Vector::<2>::new(0.0, q2)).symmetric_eigenvalues();
            lo = lo.min(eig.min());
            hi = hi.max(eig.max());
        }
        (lo * (1.0 - 1e-9), hi * (1.0 + 1e-9))
    }

    fn params(&self) -> (f64, f64, f64, f64, f64, f64, f64) {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        let (lc1, lc2) = (0.5 * l1, 0.5 * l2);
        let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
        (l1, m1, m2, lc1, lc2, i1, i2)
    }
}

pub fn two_link_model(lengths: [f64; 2], masses: [f64; 2]) -> Result<TwoLinkModel, DynamicsError> {
    TwoLinkModel::new(lengths, masses, true)
}

impl RobotModel<2> for TwoLinkModel {
    fn inertia(&self, q: &Vector<2>) -> Matrix<2> {
        let (l1, m1, m2, lc1, lc2, i1, i2) = self.params();
        let c2 = q[1].cos();
        let m11 = m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i2;
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
        let m22 = m2 * lc2 * lc2 + i2;
        Matrix::<2>::new(m11, m12, m12, m22)
    }

    fn coriolis(&self, q: &Vector<2>, qd: &Vector<2>) -> Matrix<2> {
        let (l1, _, m2, _, lc2, _, _) = self.params();
        let h = -m2 * l1 * lc2 * q[1].sin();
        Matrix::<2>::new(h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0)
    }

    fn gravity(&self, q: &Vector<2>) -> Vector<2> {
        let (l1, m1, m2, lc1, lc2, _, _) = self.params();
        let g = self.gravity;
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        Vector::<2>::new(
            (m1 * lc1 + m2 * l1) * g * c1 + m2 * lc2 * g * c12,
            m2 * lc2 * g * c12,
        )
    }

    fn inertia_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    fn name(&self) -> &str {
        "two_link"
    }
}

/// Wraps a model and adds a constant diagonal inertia (an environment mass
/// rigidly attached to every joint).
pub struct AddedInertia<'a, const N: usize> {
    pub inner: &'a dyn RobotModel<N>,
    pub mass: f64,
}

impl<const N: usize> RobotModel<N> for AddedInertia<'_, N> {
    fn inertia(&self, q: &Vector<N>) -> Matrix<N> {
        self.inner.inertia(q) + Matrix::<N>::identity() * self.mass
    }

    fn coriolis(&self, q: &Vector<N>, qd: &Vector<N>) -> Matrix<N> {
        self.inner.coriolis(q, qd)
    }

    fn gravity(&self, q: &Vector<N>) -> Vector<N> {
        self.inner.gravity(q)
    }

    fn inertia_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.inertia_bounds();
        (lo + self.mass, hi + self.mass)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// `x^T (M' - 2C) x` with `M'` from a central difference of `M` along the
/// motion `q(t +- h) = q +- h q'`.
pub fn skew_residual<const N: usize>(
    model: &dyn RobotModel<N>,
    state: &JointState<N>,
    x: &Vector<N>,
    h: f64,
) -> f64 {
    let m_plus = model.inertia(&(state.q + state.qd * h));
    let m_minus = model.inertia(&(state.q - state.qd * h));
    let m_dot = (m_plus - m_minus) / (2.0 * h);
    let n = m_dot - model.coriolis(&state.q, &state.qd) * 2.0;
    x.dot(&(n * x))
}

/// Checks `m1 I < M(q) < m2 I` and symmetry at `q`.
pub fn inertia_within_bounds<const N: usize>(model: &dyn RobotModel<N>, q: &Vector<N>) -> bool {
    let m = model.inertia(q);
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max() {
        return false;
    }
    let (lo, hi) = model.inertia_bounds();
    // both M - m1 I and m2 I - M must be positive definite
    let id = Matrix::<N>::identity();
    lo > 0.0 && (m - id * lo).cholesky().is_some() && (id * hi - m).cholesky().is_some()
}
