//! Bounded Levenberg-Marquardt least squares.
//!
//! Minimizes `sum r_i(p)^2` with a central-difference Jacobian, additive
//! damping `(J^T J + lambda I)`, and box bounds enforced by projecting each
//! trial point. Damping starts at `1e-3 * max diag(J^T J)` and is scaled by
//! 0.3 after an accepted step and by 2 after a rejected one. Iteration stops
//! when an accepted step lowers the cost by less than `cost_tolerance`
//! (relative), when the projected step is shorter than `step_tolerance`
//! (relative to the parameter norm), or after `max_iterations` trial steps.
//!
//! Sums over data points are accumulated in sorted order, so the result is
//! bitwise independent of the order of the points.

use nalgebra::{DMatrix, DVector};

use crate::error::FitError;

/// A vector of residuals depending on a parameter vector.
pub trait Residuals {
    /// Number of residuals.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]);
}

/// `model(x_i, p) - y_i` over paired samples.
pub struct CurveProblem<'a, F> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub model: F,
}

impl<F: Fn(f64, &[f64]) -> f64> Residuals for CurveProblem<'_, F> {
    fn len(&self) -> usize {
        self.xs.len()
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        for ((o, &x), &y) in out.iter_mut().zip(self.xs).zip(self.ys) {
            *o = (self.model)(x, params) - y;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const FREE: Bound = Bound { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn at_least(lower: f64) -> Self {
        Self { lower, upper: f64::INFINITY }
    }

    pub fn between(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub cost_tolerance: f64,
    pub step_tolerance: f64,
    pub initial_damping_factor: f64,
    pub damping_decrease: f64,
    pub damping_increase: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-10,
            step_tolerance: 1e-10,
            initial_damping_factor: 1e-3,
            damping_decrease: 0.3,
            damping_increase: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `sqrt(sum r_i^2)` at the returned parameters.
    pub residual_norm: f64,
    /// Number of trial steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the start and after every accepted step.
    pub accepted_costs: Vec<f64>,
}

fn jacobian<R: Residuals + ?Sized>(
    problem: &R,
    params: &[f64],
    bounds: &[Bound],
    r0: &[f64],
) -> Result<DMatrix<f64>, FitError> {
    let m = problem.len();
    let n = params.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut p = params.to_vec();
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    for j in 0..n {
        let h = (1e-6 * params[j].abs()).max(1e-6);
        let up_ok = params[j] + h <= bounds[j].upper;
        let down_ok = params[j] - h >= bounds[j].lower;
        let (hi, lo) = match (up_ok, down_ok) {
            (true, true) => (params[j] + h, params[j] - h),
            (true, false) => (params[j] + h, params[j]),
            (false, true) => (params[j], params[j] - h),
            (false, false) => (params[j], params[j]),
        };
        if hi == lo {
            continue;
        }
        if hi != params[j] {
            p[j] = hi;
            problem.residuals(&p, &mut plus);
        } else {
            plus.copy_from_slice(r0);
        }
        if lo != params[j] {
            p[j] = lo;
            problem.residuals(&p, &mut minus);
        } else {
            minus.copy_from_slice(r0);
        }
        p[j] = params[j];
        let inv = 1.0 / (hi - lo);
        for i in 0..m {
            let d = (plus[i] - minus[i]) * inv;
            if !d.is_finite() {
                return Err(FitError::NonFinite);
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}

/// Order-independent sum.
fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

fn sum_sq(r: &[f64]) -> f64 {
    let mut t: Vec<f64> = r.iter().map(|v| v * v).collect();
    sorted_sum(&mut t)
}

/// `J^T J` with each entry summed in sorted order.
fn normal_matrix(jac: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = jac.shape();
    let mut out = DMatrix::zeros(n, n);
    let mut t = vec![0.0; m];
    for a in 0..n {
        for b in a..n {
            for (i, v) in t.iter_mut().enumerate() {
                *v = jac[(i, a)] * jac[(i, b)];
            }
            let s = sorted_sum(&mut t);
            out[(a, b)] = s;
            out[(b, a)] = s;
        }
    }
    out
}

fn gradient(jac: &DMatrix<f64>, r: &[f64]) -> DVector<f64> {
    let mut t = vec![0.0; r.len()];
    DVector::from_iterator(
        jac.ncols(),
        (0..jac.ncols()).map(|a| {
            for (i, v) in t.iter_mut().enumerate() {
                *v = jac[(i, a)] * r[i];
            }
            sorted_sum(&mut t)
        }),
    )
}

/// Fits `problem` starting from `initial` within `bounds`.
pub fn lm_fit<R: Residuals + ?Sized>(
    problem: &R,
    initial: &[f64],
    bounds: &[Bound],
    options: &LmOptions,
) -> Result<LmReport, FitError> {
    let n = initial.len();
    let m = problem.len();
    if m < n {
        return Err(FitError::TooFewPoints { needed: n, got: m });
    }
    if bounds.len() != n {
        return Err(FitError::Precondition(format!(
            "{} bounds for {n} parameters",
            bounds.len()
        )));
    }
    for (index, (&value, b)) in initial.iter().zip(bounds).enumerate() {
        if !(value >= b.lower && value <= b.upper) {
            return Err(FitError::InitialOutOfBounds {
                index,
                value,
                lower: b.lower,
                upper: b.upper,
            });
        }
    }

    let mut p = initial.to_vec();
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(FitError::NonFinite);
    }

    let mut jac = jacobian(problem, &p, bounds, &r)?;
    let mut normal = normal_matrix(&jac);
    if normal.clone().cholesky().is_none() {
        return Err(FitError::SingularNormalEquations);
    }
    let max_diag = normal.diagonal().iter().cloned().fold(0.0, f64::max);
    let mut lambda = options.initial_damping_factor * max_diag;

    let mut accepted_costs = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    while iterations < options.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let gradient = gradient(&jac, &r);
        let mut damped = normal.clone();
        for k in 0..n {
            damped[(k, k)] += lambda;
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= options.damping_increase;
            continue;
        };
        let delta = chol.solve(&(-gradient));

        let mut step_sq = 0.0;
        for k in 0..n {
            trial[k] = bounds[k].clamp(p[k] + delta[k]);
            step_sq += (trial[k] - p[k]).powi(2);
        }
        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step_sq.sqrt() <= options.step_tolerance * (p_norm + options.step_tolerance) {
            converged = true;
            break;
        }

        problem.residuals(&trial, &mut r_trial);
        let trial_cost = sum_sq(&r_trial);
        if trial_cost.is_finite() && trial_cost < cost {
            let relative = (cost - trial_cost) / cost;
            p.copy_from_slice(&trial);
            std::mem::swap(&mut r, &mut r_trial);
            cost = trial_cost;
            accepted_costs.push(cost);
            lambda *= options.damping_decrease;
            jac = jacobian(problem, &p, bounds, &r)?;
            normal = normal_matrix(&jac);
            if relative < options.cost_tolerance {
                converged = true;
                break;
            }
        } else {
            lambda *= options.damping_increase;
        }
    }

    let dof = m - n;
    let variance = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let mut damped = normal;
    for k in 0..n {
        damped[(k, k)] += lambda;
    }
    let std_errors = match damped.try_inverse() {
        Some(inv) => (0..n).map(|k| (variance * inv[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; n],
    };

    Ok(LmReport {
        params: p,
        std_errors,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        accepted_costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_exact_data() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |x: f64, p: &[f64]| p[0] * x + p[1] };
        let rep = lm_fit(&problem, &[0.0, 0.0], &[Bound::FREE; 2], &LmOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.params[0] - 3.0).abs() < 1e-9);
        assert!((rep.params[1] + 2.0).abs() < 1e-9);
        assert!(rep.residual_norm < 1e-8);
    }

    #[test]
    fn accepted_costs_never_increase() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-0.7 * x).exp() + 0.3 + 0.01 * (7.0 * x).sin()).collect();
        let problem = CurveProblem {
            xs: &xs,
            ys: &ys,
            model: |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp() + p[2],
        };
        let rep = lm_fit(&problem, &[1.0, 2.0, 0.0], &[Bound::FREE; 3], &LmOptions::default())
            .unwrap();
        assert!(rep.converged);
        assert!(rep.accepted_costs.windows(2).all(|w| w[1] <= w[0]));
        assert!((rep.params[1] - 0.7).abs() < 0.01);
        assert!(rep.std_errors.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn bounds_are_respected() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -1.0 + 0.0 * x).collect();
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |_x: f64, p: &[f64]| p[0] };
        let rep = lm_fit(&problem, &[1.0], &[Bound::at_least(0.0)], &LmOptions::default()).unwrap();
        assert_eq!(rep.params[0], 0.0);
    }

    #[test]
    fn precondition_errors() {
        let xs = [1.0];
        let ys = [1.0];
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |x: f64, p: &[f64]| p[0] * x + p[1] };
        assert!(matches!(
            lm_fit(&problem, &[0.0, 0.0], &[Bound::FREE; 2], &LmOptions::default()),
            Err(FitError::TooFewPoints { needed: 2, got: 1 })
        ));
        let xs = [1.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 3.0];
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |x: f64, p: &[f64]| p[0] * x };
        assert!(matches!(
            lm_fit(&problem, &[-1.0], &[Bound::at_least(0.0)], &LmOptions::default()),
            Err(FitError::InitialOutOfBounds { .. })
        ));
        // parameter that does not enter the model
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |x: f64, p: &[f64]| p[0] * x + 0.0 * p[1] };
        assert!(matches!(
            lm_fit(&problem, &[1.0, 1.0], &[Bound::FREE; 2], &LmOptions::default()),
            Err(FitError::SingularNormalEquations)
        ));
    }

    #[test]
    fn budget_exhaustion_returns_best_so_far() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-0.7 * x).exp()).collect();
        let problem = CurveProblem { xs: &xs, ys: &ys, model: |x: f64, p: &[f64]| p[0] * (-p[1] * x).exp() };
        let opts = LmOptions { max_iterations: 2, ..Default::default() };
        let rep = lm_fit(&problem, &[1.0, 2.0], &[Bound::FREE; 2], &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
        assert!(rep.residual_norm.powi(2) <= rep.accepted_costs[0]);
    }
}
