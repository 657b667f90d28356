//! A small dense Levenberg–Marquardt solver with Nielsen's damping update.

use nalgebra::{DMatrix, DVector};

/// A least-squares objective `Σ r_i(θ)²`.
pub trait LeastSquares {
    fn parameters(&self) -> usize;
    /// Residuals and their Jacobian (`residuals × parameters`) at `theta`.
    fn evaluate(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>);
    /// Residuals alone; defaults to discarding the Jacobian.
    fn residuals(&self, theta: &[f64]) -> DVector<f64> {
        self.evaluate(theta).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the step is this small relative to `‖θ‖`.
    pub step_tolerance: f64,
    /// Stop when the loss itself falls below this.
    pub loss_floor: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-12,
            step_tolerance: 1e-12,
            loss_floor: 1e-30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, start: &[f64], options: &LmOptions) -> LmOutcome {
    let n = problem.parameters();
    assert_eq!(start.len(), n, "start vector has the wrong length");
    let mut theta = DVector::from_column_slice(start);
    let (mut r, mut jac) = problem.evaluate(theta.as_slice());
    let mut loss = r.norm_squared();
    let mut a = jac.transpose() * &jac;
    let mut g = jac.transpose() * &r;
    let mut mu = 1e-3 * a.diagonal().max().max(1e-12);
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        if !loss.is_finite() {
            break;
        }
        if loss <= options.loss_floor || g.amax() <= options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut damped = a.clone();
        for i in 0..n {
            damped[(i, i)] += mu;
        }
        let Some(chol) = damped.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let step = -chol.solve(&g);
        if step.norm() <= options.step_tolerance * (theta.norm() + options.step_tolerance) {
            converged = true;
            break;
        }
        let candidate = &theta + &step;
        let r_new = problem.residuals(candidate.as_slice());
        let loss_new = r_new.norm_squared();
        let predicted = -g.dot(&step) + mu * step.norm_squared();
        let rho = (loss - loss_new) / predicted;
        if loss_new.is_finite() && rho > 0.0 {
            theta = candidate;
            let (r2, j2) = problem.evaluate(theta.as_slice());
            r = r2;
            jac = j2;
            loss = r.norm_squared();
            a = jac.transpose() * &jac;
            g = jac.transpose() * &r;
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
            if !mu.is_finite() || mu > 1e300 {
                break;
            }
        }
    }
    LmOutcome {
        theta: theta.iter().copied().collect(),
        loss,
        iterations,
        converged,
    }
}

/// Numerical rank of `m` with singular values below `rel_tol · σ_max` dropped.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * max).count()
}
