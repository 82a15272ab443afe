//! Long-horizon, small-noise description of a piecewise-smooth SDE that
//! slides along the switching manifold x = 0.
//!
//! The deterministic skeleton is a Filippov system: two smooth vector
//! fields, one governing x < 0 and one governing x > 0, both pointing
//! toward the manifold inside a stable sliding region. There the motion
//! follows the convex-combination sliding field Omega. Small additive
//! noise of scale sqrt(epsilon) spreads the manifold coordinates into a
//! Gaussian around the sliding solution y_S(t) with covariance
//! epsilon * Theta(t), while the transverse coordinate equilibrates to a
//! two-sided exponential profile. This module computes each ingredient —
//! Omega, y_S, the transverse noise matrix M, Theta, and the resulting
//! product-form density — for systems given either as closures or as
//! piecewise-affine data.

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky, matmul, matvec, transpose};
use crate::numerics::{gaussian_pdf, GaussianSpec, Trajectory};

/// Drift field of one half-space: (x, y) -> velocity of the full state,
/// first component transverse to the manifold, remainder along it.
pub type DriftFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
/// Scalar function of the manifold coordinates.
pub type ScalarFieldFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
/// Vector function of the manifold coordinates.
pub type VectorFieldFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
/// Matrix function of the manifold coordinates.
pub type MatrixFieldFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// Analytic boundary data: the transverse approach rates a_L, a_R and the
/// manifold-parallel drifts b_L, b_R as functions of the manifold
/// coordinates. Optional — when absent these are read off the drift
/// closures at x = 0.
pub struct BoundaryCoefficients {
    /// Transverse drift of the left field at x = 0 (toward the manifold
    /// when positive).
    pub a_left: Box<ScalarFieldFn>,
    /// Negated transverse drift of the right field at x = 0 (toward the
    /// manifold when positive).
    pub a_right: Box<ScalarFieldFn>,
    /// Manifold-parallel drift of the left field at x = 0.
    pub b_left: Box<VectorFieldFn>,
    /// Manifold-parallel drift of the right field at x = 0.
    pub b_right: Box<VectorFieldFn>,
}

/// Boundary data evaluated at one point of the manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    pub a_l: f64,
    pub a_r: f64,
    pub b_l: Vec<f64>,
    pub b_r: Vec<f64>,
}

/// A piecewise-smooth system: one drift field per half-space, discontinuous
/// across the switching manifold x = 0.
pub struct FilippovSystem {
    dimension: usize,
    drift_left: Box<DriftFn>,
    drift_right: Box<DriftFn>,
    boundary: Option<BoundaryCoefficients>,
    analytic_sliding_jacobian: Option<Box<MatrixFieldFn>>,
}

impl FilippovSystem {
    /// Builds a system from its two drift closures. `dimension` counts the
    /// full state (transverse coordinate plus manifold coordinates) and
    /// must be at least 2.
    pub fn new(
        dimension: usize,
        drift_left: Box<DriftFn>,
        drift_right: Box<DriftFn>,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Domain(format!(
                "a sliding system needs the transverse coordinate plus at least one \
                 manifold coordinate; dimension {dimension} < 2"
            )));
        }
        Ok(Self {
            dimension,
            drift_left,
            drift_right,
            boundary: None,
            analytic_sliding_jacobian: None,
        })
    }

    /// Attaches analytic boundary coefficients. Every later boundary
    /// evaluation cross-checks them against the drift closures at x = 0
    /// and reports a domain error on disagreement.
    pub fn with_boundary_coefficients(mut self, boundary: BoundaryCoefficients) -> Self {
        self.boundary = Some(boundary);
        self
    }

    /// Attaches an analytic Jacobian of the sliding field, used in place
    /// of finite differences by [`sliding_jacobian`].
    pub fn with_sliding_jacobian(mut self, jacobian: Box<MatrixFieldFn>) -> Self {
        self.analytic_sliding_jacobian = Some(jacobian);
        self
    }

    /// A system whose drift on each side is affine in the full state:
    /// velocity = A * [x; y] + c.
    pub fn piecewise_affine(
        a_left: Vec<Vec<f64>>,
        c_left: Vec<f64>,
        a_right: Vec<Vec<f64>>,
        c_right: Vec<f64>,
    ) -> Result<Self> {
        let n = c_left.len();
        for (name, mat, cvec) in [
            ("left", &a_left, &c_left),
            ("right", &a_right, &c_right),
        ] {
            if cvec.len() != n {
                return Err(Error::Domain(format!(
                    "{name} constant term has length {}, expected {n}",
                    cvec.len()
                )));
            }
            if mat.len() != n || mat.iter().any(|row| row.len() != n) {
                return Err(Error::Domain(format!(
                    "{name} matrix must be {n}x{n} to match its constant term"
                )));
            }
            let finite = cvec.iter().all(|v| v.is_finite())
                && mat.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(Error::Domain(format!(
                    "{name} affine drift contains non-finite entries"
                )));
            }
        }
        let affine = move |mat: Vec<Vec<f64>>, cvec: Vec<f64>| {
            move |x: f64, y: &[f64]| -> Vec<f64> {
                let mut state = Vec::with_capacity(cvec.len());
                state.push(x);
                state.extend_from_slice(y);
                let mut out = matvec(&mat, &state);
                for (o, c) in out.iter_mut().zip(&cvec) {
                    *o += c;
                }
                out
            }
        };
        Self::new(
            n,
            Box::new(affine(a_left, c_left)),
            Box::new(affine(a_right, c_right)),
        )
    }

    /// The worked two-dimensional example used throughout the tests and
    /// the command-line tool: left drift (-x + y + 1, -x + 1), right drift
    /// (-x + y - 3, -x - 2). Its boundary data are a_L(y) = 1 + y,
    /// a_R(y) = 3 - y, b_L = 1, b_R = -2, so the strip -1 < y < 3 is a
    /// stable sliding region and the sliding solution from y(0) = 2 is
    /// y_S(t) = (5/3) e^{-3t/4} + 1/3.
    pub fn builtin_example() -> Self {
        let system = Self::piecewise_affine(
            vec![vec![-1.0, 1.0], vec![-1.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![-1.0, 1.0], vec![-1.0, 0.0]],
            vec![-3.0, -2.0],
        )
        .expect("built-in example dimensions are consistent");
        system.with_boundary_coefficients(BoundaryCoefficients {
            a_left: Box::new(|y: &[f64]| 1.0 + y[0]),
            a_right: Box::new(|y: &[f64]| 3.0 - y[0]),
            b_left: Box::new(|_: &[f64]| vec![1.0]),
            b_right: Box::new(|_: &[f64]| vec![-2.0]),
        })
    }

    /// Full state dimension N (transverse + manifold coordinates).
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of manifold coordinates, N - 1.
    pub fn manifold_dimension(&self) -> usize {
        self.dimension - 1
    }

    /// Left-field velocity at (x, y).
    pub fn drift_left(&self, x: f64, y: &[f64]) -> Vec<f64> {
        (self.drift_left)(x, y)
    }

    /// Right-field velocity at (x, y).
    pub fn drift_right(&self, x: f64, y: &[f64]) -> Vec<f64> {
        (self.drift_right)(x, y)
    }

    /// Boundary data at manifold point y, from the analytic coefficients
    /// when attached (cross-checked against the drift closures) or from
    /// the drift closures at x = 0 otherwise.
    pub fn boundary_at(&self, y: &[f64]) -> Result<BoundaryValues> {
        let m = self.manifold_dimension();
        if y.len() != m {
            return Err(Error::Domain(format!(
                "manifold point has {} coordinates, expected {m}",
                y.len()
            )));
        }
        let left = (self.drift_left)(0.0, y);
        let right = (self.drift_right)(0.0, y);
        for (name, v) in [("left", &left), ("right", &right)] {
            if v.len() != self.dimension {
                return Err(Error::Domain(format!(
                    "{name} drift returned {} components, expected {}",
                    v.len(),
                    self.dimension
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("{name} drift at x = 0, y = {y:?}")));
            }
        }
        let from_drifts = BoundaryValues {
            a_l: left[0],
            a_r: -right[0],
            b_l: left[1..].to_vec(),
            b_r: right[1..].to_vec(),
        };
        let Some(analytic) = &self.boundary else {
            return Ok(from_drifts);
        };
        let values = BoundaryValues {
            a_l: (analytic.a_left)(y),
            a_r: (analytic.a_right)(y),
            b_l: (analytic.b_left)(y),
            b_r: (analytic.b_right)(y),
        };
        if values.b_l.len() != m || values.b_r.len() != m {
            return Err(Error::Domain(format!(
                "analytic parallel drifts must have {m} components"
            )));
        }
        let close = |u: f64, v: f64| (u - v).abs() <= 1e-10 * u.abs().max(1.0);
        let consistent = close(values.a_l, from_drifts.a_l)
            && close(values.a_r, from_drifts.a_r)
            && values
                .b_l
                .iter()
                .zip(&from_drifts.b_l)
                .all(|(u, v)| close(*u, *v))
            && values
                .b_r
                .iter()
                .zip(&from_drifts.b_r)
                .all(|(u, v)| close(*u, *v));
        if !consistent {
            return Err(Error::Domain(format!(
                "analytic boundary coefficients disagree with the drift fields at x = 0, \
                 y = {y:?}: analytic (a_l, a_r) = ({}, {}), from drifts ({}, {})",
                values.a_l, from_drifts.a_l, values.a_r, from_drifts.a_r
            )));
        }
        Ok(values)
    }

    /// Boundary data restricted to a stable sliding point: both fields
    /// must press toward the manifold (a_L > 0 and a_R > 0).
    pub fn stable_boundary_at(&self, y: &[f64]) -> Result<BoundaryValues> {
        let values = self.boundary_at(y)?;
        if !(values.a_l > 0.0 && values.a_r > 0.0) {
            return Err(Error::NotStableSliding(format!(
                "a_L = {}, a_R = {} at y = {y:?} (both must be positive)",
                values.a_l, values.a_r
            )));
        }
        Ok(values)
    }
}

/// Noise specification: overall variance scale epsilon and the N x N
/// mixing matrix D applied to the Brownian increments. The blocks of
/// D Dᵀ split into the transverse variance alpha (top-left scalar), the
/// transverse/parallel covariance beta (top row), and the parallel
/// covariance gamma (bottom-right block). D Dᵀ is positive semidefinite
/// by construction; alpha > 0 is required because the transverse density
/// scales by 1/alpha.
pub struct NoiseSpec {
    epsilon: f64,
    d: Vec<Vec<f64>>,
    alpha: f64,
    beta: Vec<f64>,
    gamma: Vec<Vec<f64>>,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, d: Vec<Vec<f64>>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!(
                "noise scale epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let n = d.len();
        if n < 2 || d.iter().any(|row| row.len() != n) {
            return Err(Error::Domain(
                "noise matrix D must be square with dimension at least 2".into(),
            ));
        }
        if d.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("noise matrix D has non-finite entries".into()));
        }
        let ddt = matmul(&d, &transpose(&d));
        let alpha = ddt[0][0];
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!(
                "transverse noise variance alpha = (D Dᵀ)_11 must be positive, got {alpha}"
            )));
        }
        let beta = ddt[0][1..].to_vec();
        let gamma = ddt[1..]
            .iter()
            .map(|row| row[1..].to_vec())
            .collect::<Vec<_>>();
        Ok(Self {
            epsilon,
            d,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn dimension(&self) -> usize {
        self.d.len()
    }

    /// Transverse noise variance, the top-left entry of D Dᵀ.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Transverse/parallel noise covariance, the top row of D Dᵀ minus
    /// its first entry.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Parallel noise covariance, the bottom-right block of D Dᵀ.
    pub fn gamma(&self) -> &[Vec<f64>] {
        &self.gamma
    }
}

/// One node of the sliding description: time, the deterministic sliding
/// solution, and the covariance of the scaled manifold fluctuation.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingState {
    pub t: f64,
    pub y_s: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl SlidingState {
    /// Checks the structural requirements: theta square and matching the
    /// manifold dimension, symmetric to 1e-10 of its scale, and with no
    /// eigenvalue below -1e-10 times its trace.
    pub fn validate(&self) -> Result<()> {
        let m = self.y_s.len();
        if self.theta.len() != m || self.theta.iter().any(|row| row.len() != m) {
            return Err(Error::Domain(format!(
                "covariance must be {m}x{m} to match the manifold dimension"
            )));
        }
        let scale = self
            .theta
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-300);
        let mut trace = 0.0;
        for i in 0..m {
            trace += self.theta[i][i];
            for j in 0..i {
                if (self.theta[i][j] - self.theta[j][i]).abs() > 1e-10 * scale {
                    return Err(Error::Domain(format!(
                        "covariance asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        // Eigenvalues at least -1e-10 * trace: the shifted matrix must
        // admit a Cholesky factorization.
        let shift = 1e-10 * trace.abs() + 1e-300;
        let mut shifted = self.theta.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] += shift;
        }
        if cholesky(&shifted).is_none() {
            return Err(Error::SingularCovariance);
        }
        Ok(())
    }
}

/// The sliding vector field: the convex combination of the two parallel
/// drifts selected by the transverse approach rates,
/// Omega = (a_L b_R + a_R b_L) / (a_L + a_R).
pub fn sliding_vector_field(system: &FilippovSystem, y: &[f64]) -> Result<Vec<f64>> {
    let bv = system.stable_boundary_at(y)?;
    let denom = bv.a_l + bv.a_r;
    Ok(bv
        .b_l
        .iter()
        .zip(&bv.b_r)
        .map(|(bl, br)| (bv.a_l * br + bv.a_r * bl) / denom)
        .collect())
}

/// Fixed-step fourth-order Runge–Kutta for a fallible field, with an
/// optional post-step projection applied to every accepted state. Errors
/// from stage evaluations abort the solve.
fn rk4_fallible<F, P>(field: F, state0: &[f64], t1: f64, step: f64, post: P) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    P: Fn(&mut [f64]),
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("rk4 step must be positive, got {step}")));
    }
    if !(t1 >= 0.0) {
        return Err(Error::Domain(format!(
            "integration horizon must be non-negative, got {t1}"
        )));
    }
    let dim = state0.len();
    let mut times = vec![0.0];
    let mut states = vec![state0.to_vec()];
    let mut derivs = vec![field(0.0, state0)?];

    let mut t = 0.0;
    let mut y = state0.to_vec();
    while t < t1 {
        let h = step.min(t1 - t);
        let k1 = field(t, &y)?;
        let y2: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = field(t + 0.5 * h, &y2)?;
        let y3: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = field(t + 0.5 * h, &y3)?;
        let y4: Vec<f64> = (0..dim).map(|i| y[i] + h * k3[i]).collect();
        let k4 = field(t + h, &y4)?;
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        post(&mut y);
        t = if t1 - t <= step { t1 } else { t + h };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sliding ode state at t = {t}")));
        }
        times.push(t);
        states.push(y.clone());
        derivs.push(field(t, &y)?);
    }

    Ok(Trajectory::from_nodes(times, states, derivs))
}

/// Converts a stability failure during integration into an exit report
/// carrying the time at which the failing evaluation was requested.
fn mark_exit(err: Error, t: f64) -> Error {
    match err {
        Error::NotStableSliding(_) => Error::LeftSlidingRegion { exit_time: t },
        other => other,
    }
}

/// Integrates the sliding field from y0 over [0, t] with fixed-step RK4.
/// The returned trajectory supports dense output. If the orbit leaves the
/// stable sliding region the solve stops with the estimated exit time.
pub fn sliding_solution(
    system: &FilippovSystem,
    y0: &[f64],
    t: f64,
    step: f64,
) -> Result<Trajectory> {
    if t == 0.0 {
        let deriv = sliding_vector_field(system, y0)?;
        return Ok(Trajectory::from_nodes(
            vec![0.0],
            vec![y0.to_vec()],
            vec![deriv],
        ));
    }
    rk4_fallible(
        |ts, y| sliding_vector_field(system, y).map_err(|e| mark_exit(e, ts)),
        y0,
        t,
        step,
        |_| {},
    )
}

/// Jacobian of the sliding field at y. Uses the analytic Jacobian when the
/// system carries one; otherwise central finite differences with
/// per-coordinate step 1e-6 * max(1, |y_i|). If a probe point leaves the
/// stable sliding region the step is halved once before giving up.
pub fn sliding_jacobian(system: &FilippovSystem, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = system.manifold_dimension();
    if let Some(jac) = &system.analytic_sliding_jacobian {
        let j = jac(y);
        if j.len() != m || j.iter().any(|row| row.len() != m) {
            return Err(Error::Domain(format!(
                "analytic sliding Jacobian must be {m}x{m}"
            )));
        }
        return Ok(j);
    }
    // Confirm y itself is admissible so probe failures are reported
    // relative to a valid center.
    system.stable_boundary_at(y)?;
    let mut columns = Vec::with_capacity(m);
    for i in 0..m {
        let mut h = 1e-6 * y[i].abs().max(1.0);
        let probe = |h: f64| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut yp = y.to_vec();
            yp[i] += h;
            let mut ym = y.to_vec();
            ym[i] -= h;
            Ok((
                sliding_vector_field(system, &yp)?,
                sliding_vector_field(system, &ym)?,
            ))
        };
        let (omega_plus, omega_minus) = match probe(h) {
            Ok(pair) => pair,
            Err(Error::NotStableSliding(_)) => {
                h *= 0.5;
                probe(h)?
            }
            Err(other) => return Err(other),
        };
        columns.push(
            omega_plus
                .iter()
                .zip(&omega_minus)
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    // columns[i][j] = dOmega_j/dy_i; transpose to row-major Jacobian.
    Ok((0..m)
        .map(|j| (0..m).map(|i| columns[i][j]).collect())
        .collect())
}

/// The manifold-parallel noise matrix M(y): the parallel noise rows of D
/// corrected for the noise-induced switching between the two parallel
/// drifts, M = [ -(b_L - b_R)/(a_L + a_R) | I ] D.
pub fn noise_matrix(
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = system.dimension();
    if noise.dimension() != n {
        return Err(Error::Domain(format!(
            "noise matrix dimension {} does not match the system dimension {n}",
            noise.dimension()
        )));
    }
    let bv = system.stable_boundary_at(y)?;
    let denom = bv.a_l + bv.a_r;
    let d = noise.d();
    let m = n - 1;
    let mut out = vec![vec![0.0; n]; m];
    for j in 0..m {
        let col0 = -(bv.b_l[j] - bv.b_r[j]) / denom;
        for (k, entry) in out[j].iter_mut().enumerate() {
            *entry = col0 * d[0][k] + d[j + 1][k];
        }
    }
    Ok(out)
}

/// Joint trajectory of the sliding solution and the fluctuation
/// covariance, with dense output in both.
pub struct SlidingTrajectory {
    trajectory: Trajectory,
    manifold_dimension: usize,
}

impl SlidingTrajectory {
    pub fn t_end(&self) -> f64 {
        self.trajectory.t_end()
    }

    /// Splits a packed solver state into (y_s, theta).
    fn unpack(&self, t: f64, state: &[f64]) -> SlidingState {
        let m = self.manifold_dimension;
        let y_s = state[..m].to_vec();
        let mut theta = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                theta[i][j] = state[m + i * m + j];
            }
        }
        // Interpolation cannot bend a symmetric path out of symmetry, but
        // the stored average removes any last-bit drift.
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (theta[i][j] + theta[j][i]);
                theta[i][j] = s;
                theta[j][i] = s;
            }
        }
        SlidingState { t, y_s, theta }
    }

    /// Sliding state at any time inside the solved range.
    pub fn state_at(&self, t: f64) -> Result<SlidingState> {
        let state = self.trajectory.sample(t)?;
        Ok(self.unpack(t, &state))
    }

    /// Sliding state at the end of the solved range.
    pub fn end_state(&self) -> SlidingState {
        self.unpack(self.trajectory.t_end(), self.trajectory.end_state())
    }

    /// Solver nodes as sliding states, for trajectory export.
    pub fn node_states(&self) -> Vec<SlidingState> {
        self.trajectory
            .nodes()
            .map(|(t, s)| self.unpack(t, s))
            .collect()
    }
}

/// Integrates the sliding solution together with the fluctuation
/// covariance Theta(t), which solves the linear (Lyapunov) equation
/// Theta' = A Theta + Theta Aᵀ + M Mᵀ with A the sliding Jacobian along
/// y_S and Theta(0) = 0. Equivalent to the time-ordered-exponential
/// integral form but needs one RK4 pass and no nested exponentials;
/// the constant-coefficient closed form is recovered in the tests.
/// Symmetry is enforced by averaging after every step.
pub fn covariance(
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
    t: f64,
    step: f64,
) -> Result<SlidingTrajectory> {
    let m = system.manifold_dimension();
    if y0.len() != m {
        return Err(Error::Domain(format!(
            "initial manifold point has {} coordinates, expected {m}",
            y0.len()
        )));
    }
    if noise.dimension() != system.dimension() {
        return Err(Error::Domain(format!(
            "noise matrix dimension {} does not match the system dimension {}",
            noise.dimension(),
            system.dimension()
        )));
    }
    let field = |ts: f64, state: &[f64]| -> Result<Vec<f64>> {
        let y = &state[..m];
        let omega = sliding_vector_field(system, y).map_err(|e| mark_exit(e, ts))?;
        let a = sliding_jacobian(system, y).map_err(|e| mark_exit(e, ts))?;
        let mmat = noise_matrix(system, noise, y).map_err(|e| mark_exit(e, ts))?;
        let mmt = matmul(&mmat, &transpose(&mmat));
        let mut deriv = omega;
        deriv.reserve(m * m);
        for i in 0..m {
            for j in 0..m {
                let mut v = mmt[i][j];
                for k in 0..m {
                    v += a[i][k] * state[m + k * m + j] + state[m + i * m + k] * a[j][k];
                }
                deriv.push(v);
            }
        }
        Ok(deriv)
    };
    let symmetrize = |state: &mut [f64]| {
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (state[m + i * m + j] + state[m + j * m + i]);
                state[m + i * m + j] = s;
                state[m + j * m + i] = s;
            }
        }
    };
    let mut state0 = vec![0.0; m + m * m];
    state0[..m].copy_from_slice(y0);
    let trajectory = if t == 0.0 {
        let deriv = field(0.0, &state0)?;
        Trajectory::from_nodes(vec![0.0], vec![state0], vec![deriv])
    } else {
        rk4_fallible(field, &state0, t, step, symmetrize)?
    };
    Ok(SlidingTrajectory {
        trajectory,
        manifold_dimension: m,
    })
}

/// The long-horizon transitional density, built once per (system, noise,
/// y0, t) and evaluated at any (x, y). It factorizes exactly: a Gaussian
/// in the manifold coordinates centered on the sliding solution with
/// covariance epsilon * Theta(t), times a normalized two-sided exponential
/// profile in the transverse coordinate with decay rates 2 a_L / (alpha
/// epsilon) on the left and 2 a_R / (alpha epsilon) on the right,
/// coefficients evaluated at y_S(t).
pub struct LongtimeDensity {
    state: SlidingState,
    gaussian: GaussianSpec,
    a_l: f64,
    a_r: f64,
    alpha: f64,
    epsilon: f64,
}

/// Internal default for the RK4 step when an operation exposes no step
/// parameter: 2000 steps across the horizon.
fn default_step(t: f64) -> f64 {
    t / 2000.0
}

impl LongtimeDensity {
    pub fn new(
        system: &FilippovSystem,
        noise: &NoiseSpec,
        y0: &[f64],
        t: f64,
        step: f64,
    ) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!(
                "the long-horizon density needs t > 0, got {t}"
            )));
        }
        let sliding = covariance(system, noise, y0, t, step)?;
        let state = sliding.end_state();
        state.validate()?;
        let bv = system.stable_boundary_at(&state.y_s)?;
        let eps = noise.epsilon();
        let scaled_cov = state
            .theta
            .iter()
            .map(|row| row.iter().map(|v| eps * v).collect())
            .collect();
        let gaussian = GaussianSpec::new(state.y_s.clone(), scaled_cov)?;
        Ok(Self {
            state,
            gaussian,
            a_l: bv.a_l,
            a_r: bv.a_r,
            alpha: noise.alpha(),
            epsilon: eps,
        })
    }

    /// The sliding state (t, y_S, Theta) underlying this density.
    pub fn state(&self) -> &SlidingState {
        &self.state
    }

    /// Transverse marginal: normalized two-sided exponential peaking at
    /// the manifold with value 2 a_L a_R / (alpha epsilon (a_L + a_R)).
    pub fn marginal_x(&self, x: f64) -> f64 {
        let c = self.alpha * self.epsilon;
        let prefactor = 2.0 * self.a_l * self.a_r / (c * (self.a_l + self.a_r));
        let exponent = if x < 0.0 {
            2.0 * self.a_l * x / c
        } else {
            -2.0 * self.a_r * x / c
        };
        prefactor * exponent.exp()
    }

    /// Manifold marginal: Gaussian around y_S(t) with covariance
    /// epsilon * Theta(t).
    pub fn marginal_y(&self, y: &[f64]) -> Result<f64> {
        gaussian_pdf(y, &self.gaussian)
    }

    /// Joint density, the exact product of the two marginals.
    pub fn joint(&self, x: f64, y: &[f64]) -> Result<f64> {
        Ok(self.marginal_x(x) * self.marginal_y(y)?)
    }
}

/// Long-horizon joint density at a single point. Grid fills should build
/// one [`LongtimeDensity`] and reuse it; this convenience form repeats
/// the trajectory solve on every call (internal step t/2000).
pub fn longtime_pdf(
    x: f64,
    y: &[f64],
    t: f64,
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
) -> Result<f64> {
    LongtimeDensity::new(system, noise, y0, t, default_step(t))?.joint(x, y)
}

/// Long-horizon manifold marginal at a single point; see [`longtime_pdf`].
pub fn longtime_marginal_y(
    y: &[f64],
    t: f64,
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
) -> Result<f64> {
    LongtimeDensity::new(system, noise, y0, t, default_step(t))?.marginal_y(y)
}

/// Long-horizon transverse marginal at a single point; see
/// [`longtime_pdf`].
pub fn longtime_marginal_x(
    x: f64,
    t: f64,
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
) -> Result<f64> {
    Ok(LongtimeDensity::new(system, noise, y0, t, default_step(t))?.marginal_x(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, integrate_semi_infinite, QuadratureSpec, Singularity};

    fn builtin_noise() -> NoiseSpec {
        NoiseSpec::new(0.1, vec![vec![1.0, 0.0], vec![0.0, 0.1]]).unwrap()
    }

    /// y_S(t) for the built-in example started at y = 2.
    fn builtin_y_s(t: f64) -> f64 {
        5.0 / 3.0 * (-0.75 * t).exp() + 1.0 / 3.0
    }

    /// Theta(t) for the built-in example: scalar linear response with
    /// rate -3/4 forced by M Mᵀ = 0.5725.
    fn builtin_theta(t: f64) -> f64 {
        0.5725 * (1.0 - (-1.5 * t).exp()) / 1.5
    }

    /// Constant-coefficient system: a_L = a_R = 1, b_L(y) = b_R(y) = -y/2,
    /// so Omega(y) = -y/2 and the sliding Jacobian is the constant -1/2.
    fn scalar_ou_system() -> FilippovSystem {
        FilippovSystem::piecewise_affine(
            vec![vec![0.0, 0.0], vec![0.0, -0.5]],
            vec![1.0, 0.0],
            vec![vec![0.0, 0.0], vec![0.0, -0.5]],
            vec![-1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn sliding_field_on_builtin_example() {
        let system = FilippovSystem::builtin_example();
        let omega = sliding_vector_field(&system, &[2.0]).unwrap();
        assert!((omega[0] - (-1.25)).abs() < 1e-12);
        // Equilibrium of the closed-form solution.
        let at_eq = sliding_vector_field(&system, &[1.0 / 3.0]).unwrap();
        assert!(at_eq[0].abs() < 1e-12);
        // General point: Omega(y) = (1 - 3y)/4.
        let at_zero = sliding_vector_field(&system, &[0.0]).unwrap();
        assert!((at_zero[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sliding_field_symmetric_rates_average_the_drifts() {
        // a_L = a_R = 1 with constant parallel drifts 0.7 and 0.3.
        let system = FilippovSystem::piecewise_affine(
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![1.0, 0.7],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![-1.0, 0.3],
        )
        .unwrap();
        let omega = sliding_vector_field(&system, &[5.0]).unwrap();
        assert!((omega[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unstable_points_are_rejected() {
        let system = FilippovSystem::builtin_example();
        assert!(matches!(
            sliding_vector_field(&system, &[3.5]),
            Err(Error::NotStableSliding(_))
        ));
        assert!(matches!(
            sliding_vector_field(&system, &[-1.5]),
            Err(Error::NotStableSliding(_))
        ));
    }

    #[test]
    fn inconsistent_analytic_coefficients_are_rejected() {
        let system = FilippovSystem::piecewise_affine(
            vec![vec![-1.0, 1.0], vec![-1.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![-1.0, 1.0], vec![-1.0, 0.0]],
            vec![-3.0, -2.0],
        )
        .unwrap()
        .with_boundary_coefficients(BoundaryCoefficients {
            a_left: Box::new(|y: &[f64]| 2.0 + y[0]), // wrong: drift gives 1 + y
            a_right: Box::new(|y: &[f64]| 3.0 - y[0]),
            b_left: Box::new(|_: &[f64]| vec![1.0]),
            b_right: Box::new(|_: &[f64]| vec![-2.0]),
        });
        assert!(matches!(system.boundary_at(&[2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn sliding_solution_matches_closed_form() {
        let system = FilippovSystem::builtin_example();
        let traj = sliding_solution(&system, &[2.0], 2.0, 1e-3).unwrap();
        for t in [0.1, 1.0, 2.0] {
            let y = traj.sample(t).unwrap()[0];
            assert!(
                (y - builtin_y_s(t)).abs() < 1e-8,
                "y_S({t}) = {y}, expected {}",
                builtin_y_s(t)
            );
        }
    }

    #[test]
    fn sliding_solution_degenerate_horizons() {
        let system = FilippovSystem::builtin_example();
        let traj = sliding_solution(&system, &[2.0], 0.0, 1e-3).unwrap();
        assert_eq!(traj.end_state(), &[2.0]);
        // Started at the equilibrium the orbit stays put.
        let traj = sliding_solution(&system, &[1.0 / 3.0], 1.0, 1e-3).unwrap();
        assert!((traj.end_state()[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exit_from_the_sliding_region_is_reported_with_a_time() {
        // a_L(y) = 2 - y, a_R = 1, b_L = b_R = 1: the orbit y_S = y0 + t
        // leaves the stable region y < 2 at t = 0.5 from y0 = 1.5.
        let system = FilippovSystem::piecewise_affine(
            vec![vec![0.0, -1.0], vec![0.0, 0.0]],
            vec![2.0, 1.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![-1.0, 1.0],
        )
        .unwrap();
        match sliding_solution(&system, &[1.5], 1.0, 1e-3) {
            Err(Error::LeftSlidingRegion { exit_time }) => {
                assert!(
                    (exit_time - 0.5).abs() < 0.05,
                    "exit reported at {exit_time}, expected near 0.5"
                );
            }
            other => panic!("expected LeftSlidingRegion, got {other:?}"),
        }
    }

    #[test]
    fn jacobian_by_finite_differences_and_analytic_echo() {
        let system = FilippovSystem::builtin_example();
        // Omega is affine, so central differences are exact to roundoff.
        let j = sliding_jacobian(&system, &[2.0]).unwrap();
        assert!((j[0][0] - (-0.75)).abs() < 1e-9);
        let with_analytic = FilippovSystem::builtin_example()
            .with_sliding_jacobian(Box::new(|_: &[f64]| vec![vec![-0.75]]));
        let j = sliding_jacobian(&with_analytic, &[2.0]).unwrap();
        assert_eq!(j[0][0], -0.75);
    }

    #[test]
    fn noise_matrix_on_builtin_example() {
        let system = FilippovSystem::builtin_example();
        let noise = builtin_noise();
        let m = noise_matrix(&system, &noise, &[2.0]).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0][0] - (-0.75)).abs() < 1e-12);
        assert!((m[0][1] - 0.1).abs() < 1e-12);
        let mmt = m[0][0] * m[0][0] + m[0][1] * m[0][1];
        assert!((mmt - 0.5725).abs() < 1e-12);
    }

    #[test]
    fn noise_matrix_special_forms() {
        // Equal parallel drifts: the correction column vanishes and M is
        // the parallel rows of D.
        let system = FilippovSystem::piecewise_affine(
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![1.0, 0.5],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![-1.0, 0.5],
        )
        .unwrap();
        let noise = NoiseSpec::new(1.0, vec![vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let m = noise_matrix(&system, &noise, &[0.0]).unwrap();
        assert_eq!(m, vec![vec![0.0, 3.0]]);
        // Identity D: M Mᵀ = (b_L - b_R)(b_L - b_R)ᵀ/(a_L + a_R)² + I.
        let system = FilippovSystem::builtin_example();
        let noise = NoiseSpec::new(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = noise_matrix(&system, &noise, &[2.0]).unwrap();
        let mmt = m[0][0] * m[0][0] + m[0][1] * m[0][1];
        assert!((mmt - (0.5625 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn noise_spec_block_decomposition() {
        let noise = builtin_noise();
        assert!((noise.alpha() - 1.0).abs() < 1e-15);
        assert_eq!(noise.beta(), &[0.0]);
        assert!((noise.gamma()[0][0] - 0.01).abs() < 1e-15);
        let identity = NoiseSpec::new(0.5, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(identity.alpha(), 1.0);
        assert_eq!(identity.gamma(), &[vec![1.0]]);
        // Zero transverse noise row is rejected: alpha would vanish.
        assert!(NoiseSpec::new(1.0, vec![vec![0.0, 0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn covariance_matches_constant_coefficient_closed_form() {
        // Theta' = 2 a Theta + m² with a = -1/2, m² = 1:
        // Theta(t) = 1 - e^{-t}.
        let system = scalar_ou_system();
        let noise = NoiseSpec::new(1.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sliding = covariance(&system, &noise, &[1.0], 2.0, 1e-3).unwrap();
        let mut previous = 0.0;
        for t in [0.0, 0.5, 1.0, 2.0] {
            let state = sliding.state_at(t).unwrap();
            state.validate().unwrap();
            let expected = 1.0 - (-t).exp();
            assert!(
                (state.theta[0][0] - expected).abs() < 1e-9,
                "Theta({t}) = {}, expected {expected}",
                state.theta[0][0]
            );
            assert!(state.theta[0][0] >= previous);
            previous = state.theta[0][0];
            // The sliding solution itself is the relaxation y0 e^{-t/2}.
            assert!((state.y_s[0] - (-0.5 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_matches_builtin_closed_form() {
        let system = FilippovSystem::builtin_example();
        let noise = builtin_noise();
        let sliding = covariance(&system, &noise, &[2.0], 2.0, 1e-3).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let state = sliding.state_at(t).unwrap();
            assert!(
                (state.theta[0][0] - builtin_theta(t)).abs() < 1e-9,
                "Theta({t}) = {}, expected {}",
                state.theta[0][0],
                builtin_theta(t)
            );
        }
        // Frozen decimals of the closed form, as an independent pin.
        let frozen = [
            (0.5, 0.20138009903717939),
            (1.0, 0.29650532221001595),
            (2.0, 0.3626646022395986),
        ];
        for (t, expected) in frozen {
            let theta = sliding.state_at(t).unwrap().theta[0][0];
            assert!((theta - expected).abs() < 1e-9);
        }
        assert_eq!(sliding.state_at(0.0).unwrap().theta[0][0], 0.0);
    }

    #[test]
    fn longtime_density_factorizes_and_normalizes() {
        let system = FilippovSystem::builtin_example();
        let noise = builtin_noise();
        let density = LongtimeDensity::new(&system, &noise, &[2.0], 2.0, 1e-3).unwrap();
        let state = density.state();
        assert!((state.y_s[0] - builtin_y_s(2.0)).abs() < 1e-8);

        let quad = QuadratureSpec::default();
        // Transverse mass splits a_L : a_R around the manifold.
        let a_l = 1.0 + state.y_s[0];
        let a_r = 3.0 - state.y_s[0];
        let right = integrate_semi_infinite(|x| density.marginal_x(x), 0.0, &quad).unwrap();
        let left = integrate_semi_infinite(|x| density.marginal_x(-x), 0.0, &quad).unwrap();
        assert!((right + left - 1.0).abs() < 1e-6);
        assert!((right - a_l / 4.0).abs() < 1e-6);
        // Peak value at the manifold.
        let expected_peak = 2.0 * a_l * a_r / (noise.alpha() * noise.epsilon() * 4.0);
        assert!((density.marginal_x(0.0) - expected_peak).abs() < 1e-9 * expected_peak);
        // Manifold marginal is the Gaussian with variance epsilon Theta.
        let var = noise.epsilon() * builtin_theta(2.0);
        let at_mean = density.marginal_y(&[state.y_s[0]]).unwrap();
        assert!((at_mean - 1.0 / (2.0 * std::f64::consts::PI * var).sqrt()).abs() < 1e-8);
        let y_mass = integrate(
            |y| density.marginal_y(&[y]).unwrap(),
            state.y_s[0] - 12.0 * var.sqrt(),
            state.y_s[0] + 12.0 * var.sqrt(),
            &quad,
            Singularity::None,
        )
        .unwrap();
        assert!((y_mass - 1.0).abs() < 1e-9);
        // The joint is exactly the product of the marginals.
        for (x, y) in [(0.05, 0.7), (-0.02, 0.75), (0.0, 0.6)] {
            let joint = density.joint(x, &[y]).unwrap();
            let product = density.marginal_x(x) * density.marginal_y(&[y]).unwrap();
            assert!((joint - product).abs() <= 1e-12 * product.abs());
        }
    }

    #[test]
    fn longtime_point_forms_agree_with_the_reusable_form() {
        let system = FilippovSystem::builtin_example();
        let noise = builtin_noise();
        let density = LongtimeDensity::new(&system, &noise, &[2.0], 1.0, 1e-3).unwrap();
        let joint = longtime_pdf(0.03, &[0.9], 1.0, &system, &noise, &[2.0]).unwrap();
        // The convenience form uses step t/2000 = 5e-4, the reusable form
        // 1e-3; both resolve the trajectory far below the comparison
        // tolerance.
        assert!((joint - density.joint(0.03, &[0.9]).unwrap()).abs() < 1e-10);
        let my = longtime_marginal_y(&[0.9], 1.0, &system, &noise, &[2.0]).unwrap();
        assert!((my - density.marginal_y(&[0.9]).unwrap()).abs() < 1e-10);
        let mx = longtime_marginal_x(0.03, 1.0, &system, &noise, &[2.0]).unwrap();
        assert!((mx - density.marginal_x(0.03)).abs() < 1e-10);
    }
}
