//! Shared numerical machinery: error functions, adaptive quadrature,
//! fixed-step ODE integration with dense output, and Gaussian density
//! kernels.

pub mod erf;
pub(crate) mod linalg;
pub mod quad;

pub use erf::{erfc, erfcx};
pub use quad::{integrate, integrate_semi_infinite, QuadratureSpec, Singularity};

use crate::error::{Error, Result};

/// Mean and covariance of a multivariate normal distribution.
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianSpec {
    /// Validates shape, symmetry (1e-12 relative), and that eigenvalues are
    /// bounded below by −1e-12·trace (checked via a shifted Cholesky).
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let m = mean.len();
        if covariance.len() != m || covariance.iter().any(|row| row.len() != m) {
            return Err(Error::Domain(format!(
                "covariance must be {m}x{m} to match the mean length"
            )));
        }
        let mut scale = 0.0f64;
        for row in &covariance {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite("covariance entry".into()));
                }
                scale = scale.max(v.abs());
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if (covariance[i][j] - covariance[j][i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::Domain(format!(
                        "covariance not symmetric at ({i},{j}): {} vs {}",
                        covariance[i][j], covariance[j][i]
                    )));
                }
            }
        }
        let trace: f64 = (0..m).map(|i| covariance[i][i]).sum();
        let shift = 1e-12 * trace.abs().max(f64::MIN_POSITIVE);
        let mut shifted = covariance.clone();
        for i in 0..m {
            shifted[i][i] += shift;
        }
        if m > 0 && linalg::cholesky(&shifted).is_none() {
            return Err(Error::SingularCovariance);
        }
        Ok(Self { mean, covariance })
    }

    /// 1-D convenience constructor.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], vec![vec![variance]])
    }
}

/// Multivariate normal density at `point`. The covariance must be strictly
/// positive definite; a failed Cholesky factorization reports
/// [`Error::SingularCovariance`].
pub fn gaussian_pdf(point: &[f64], spec: &GaussianSpec) -> Result<f64> {
    let m = spec.mean.len();
    if point.len() != m {
        return Err(Error::Domain(format!(
            "point has length {}, expected {m}",
            point.len()
        )));
    }
    let l = linalg::cholesky(&spec.covariance).ok_or(Error::SingularCovariance)?;
    let diff: Vec<f64> = point.iter().zip(&spec.mean).map(|(p, mu)| p - mu).collect();
    let y = linalg::forward_solve(&l, &diff);
    let quad_form: f64 = y.iter().map(|v| v * v).sum();
    let sqrt_det: f64 = (0..m).map(|i| l[i][i]).product();
    let norm = (2.0 * core::f64::consts::PI).powf(m as f64 / 2.0) * sqrt_det;
    Ok((-0.5 * quad_form).exp() / norm)
}

/// Solution nodes of an ODE solve, with enough derivative information for
/// cubic Hermite interpolation between them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Assembles a trajectory from precomputed solver nodes. The three
    /// vectors must be equal-length and non-empty, with strictly
    /// increasing times.
    pub(crate) fn from_nodes(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        derivs: Vec<Vec<f64>>,
    ) -> Self {
        debug_assert!(!times.is_empty());
        debug_assert_eq!(times.len(), states.len());
        debug_assert_eq!(times.len(), derivs.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self {
            times,
            states,
            derivs,
        }
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times
            .iter()
            .copied()
            .zip(self.states.iter().map(|s| s.as_slice()))
    }

    /// State at time `t` by cubic Hermite interpolation between stored nodes.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(Error::Domain(format!(
                "sample time {t} outside solved range [{t0}, {t1}]"
            )));
        }
        // Index of the segment [times[i], times[i+1]] containing t.
        let i = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(exact) => return Ok(self.states[exact].clone()),
            Err(ins) => ins - 1,
        };
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y0 = &self.states[i];
        let y1 = &self.states[i + 1];
        let d0 = &self.derivs[i];
        let d1 = &self.derivs[i + 1];
        Ok((0..y0.len())
            .map(|k| h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k])
            .collect())
    }
}

/// Classical fourth-order Runge–Kutta with fixed step (the last step is
/// shortened to land exactly on `t1`). Every accepted state is checked for
/// finiteness.
pub fn rk4_solve<F>(f: F, state0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("rk4 step must be positive, got {step}")));
    }
    if !(t1 >= t0) {
        return Err(Error::Domain(format!(
            "rk4 integration range must have t1 >= t0, got [{t0}, {t1}]"
        )));
    }
    let dim = state0.len();
    let mut times = vec![t0];
    let mut states = vec![state0.to_vec()];
    let mut derivs = vec![f(t0, state0)];

    let mut t = t0;
    let mut y = state0.to_vec();
    while t < t1 {
        let h = step.min(t1 - t);
        let k1 = f(t, &y);
        let y2: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = f(t + 0.5 * h, &y2);
        let y3: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = f(t + 0.5 * h, &y3);
        let y4: Vec<f64> = (0..dim).map(|i| y[i] + h * k3[i]).collect();
        let k4 = f(t + h, &y4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if t1 - t <= step { t1 } else { t + h };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("ode state at t = {t}")));
        }
        times.push(t);
        states.push(y.clone());
        derivs.push(f(t, &y));
    }

    Ok(Trajectory {
        times,
        states,
        derivs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_scalar_exponential() {
        let traj = rk4_solve(|_, s| vec![-s[0]], &[1.0], 0.0, 1.0, 1e-3).unwrap();
        assert!((traj.end_state()[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rk4_relaxation_to_known_solution() {
        // y' = (1 - 3y)/4, y(0) = 2 has solution (5/3)e^{-3t/4} + 1/3.
        let traj = rk4_solve(|_, s| vec![(1.0 - 3.0 * s[0]) / 4.0], &[2.0], 0.0, 1.0, 1e-3).unwrap();
        let expect = 5.0 / 3.0 * (-0.75f64).exp() + 1.0 / 3.0;
        assert!((traj.end_state()[0] - expect).abs() < 1e-8);
    }

    #[test]
    fn rk4_zero_field_constant() {
        let traj = rk4_solve(|_, _| vec![0.0, 0.0], &[3.0, -4.0], 0.0, 5.0, 0.1).unwrap();
        for (_, s) in traj.nodes() {
            assert_eq!(s, &[3.0, -4.0]);
        }
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let run = |h: f64| {
            rk4_solve(|_, s| vec![-s[0]], &[1.0], 0.0, 1.0, h).unwrap().end_state()[0]
        };
        let exact = (-1.0f64).exp();
        let err_coarse = (run(0.05) - exact).abs();
        let err_fine = (run(0.025) - exact).abs();
        let factor = err_coarse / err_fine;
        assert!((12.0..=20.0).contains(&factor), "order factor {factor}");
    }

    #[test]
    fn rk4_dense_output_accuracy() {
        let traj = rk4_solve(|_, s| vec![-s[0]], &[1.0], 0.0, 1.0, 0.01).unwrap();
        for &t in &[0.123, 0.5, 0.987] {
            let v = traj.sample(t).unwrap()[0];
            assert!((v - (-t).exp()).abs() < 1e-9, "at t={t}: {v}");
        }
        assert!(traj.sample(1.5).is_err());
    }

    #[test]
    fn gaussian_reference_values() {
        let one_d = GaussianSpec::scalar(0.0, 1.0).unwrap();
        let inv_sqrt_2pi = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
        assert!((gaussian_pdf(&[0.0], &one_d).unwrap() - inv_sqrt_2pi).abs() < 1e-15);
        assert!(
            (gaussian_pdf(&[1.0], &one_d).unwrap() - (-0.5f64).exp() * inv_sqrt_2pi).abs() < 1e-15
        );
        let two_d = GaussianSpec::new(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert!(
            (gaussian_pdf(&[0.0, 0.0], &two_d).unwrap() - 1.0 / (2.0 * core::f64::consts::PI))
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn gaussian_rejects_asymmetric_and_singular() {
        assert!(GaussianSpec::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.1, 1.0]]).is_err());
        let singular = GaussianSpec {
            mean: vec![0.0, 0.0],
            covariance: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        };
        assert!(matches!(
            gaussian_pdf(&[0.0, 0.0], &singular),
            Err(Error::SingularCovariance)
        ));
    }
}
