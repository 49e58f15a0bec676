//! Damped Gauss-Newton (Levenberg-Marquardt) for small dense problems.

use nalgebra::{DMatrix, DVector};

/// Residuals and analytic Jacobian of a least-squares problem.
///
/// Residuals are already weighted: the objective is `Σ r_i²`.
pub(crate) trait Problem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Row `i`, column `j` holds `∂r_i/∂p_j`.
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Options {
    pub max_iterations: usize,
    /// Relative reduction of the objective below which the fit has settled.
    pub ftol: f64,
    /// Relative step size below which the fit has settled.
    pub xtol: f64,
    /// Gradient infinity norm below which the fit has settled.
    pub gtol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iterations: 1000,
            ftol: 1e-15,
            xtol: 1e-13,
            gtol: 1e-30,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub cost_history: Vec<f64>,
}

fn cost_of(problem: &dyn Problem, p: &[f64], buf: &mut [f64]) -> f64 {
    problem.residuals(p, buf);
    buf.iter().map(|r| r * r).sum()
}

pub(crate) fn minimize(problem: &dyn Problem, x0: &[f64], opts: Options) -> Outcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    let mut r_trial = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    let mut cost = cost_of(problem, &x, &mut r);
    let mut history = vec![cost];
    let mut lambda: Option<f64> = None;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations && cost.is_finite() {
        iterations += 1;
        problem.jacobian(&x, &mut jac);
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * rv;
        if grad.amax() <= opts.gtol {
            converged = true;
            break;
        }
        let diag_max = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let floor = 1e-12 * diag_max.max(1e-300);
        let mut lam = lambda.unwrap_or(1e-3);

        let mut accepted = false;
        while lam < 1e20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lam * jtj[(i, i)].max(floor);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lam *= 4.0;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = cost_of(problem, &trial, &mut r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_drop = (cost - trial_cost) / cost.max(1e-300);
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
                x = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                history.push(cost);
                lambda = Some((lam / 3.0).max(1e-12));
                accepted = true;
                if rel_drop <= opts.ftol || small_step || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lam *= 4.0;
        }
        if !accepted {
            // No descent direction left at any damping: a (possibly boundary)
            // minimum to working precision.
            converged = true;
        }
    }

    Outcome {
        params: x,
        cost,
        iterations,
        converged,
        cost_history: history,
    }
}

/// `(JᵀJ)⁻¹`, or `None` when the normal matrix is singular.
pub(crate) fn normal_inverse(jac: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let jtj = jac.transpose() * jac;
    jtj.clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| jtj.try_inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals (1 − x, 10(y − x²)).
    struct Rosen;

    impl Problem for Rosen {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            out[0] = 1.0 - p[0];
            out[1] = 10.0 * (p[1] - p[0] * p[0]);
        }
        fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
            out[(0, 0)] = -1.0;
            out[(0, 1)] = 0.0;
            out[(1, 0)] = -20.0 * p[0];
            out[(1, 1)] = 10.0;
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(&Rosen, &[-1.2, 1.0], Options::default());
        assert!(out.converged);
        assert!((out.params[0] - 1.0).abs() < 1e-8 && (out.params[1] - 1.0).abs() < 1e-8);
        assert!(out.cost_history.windows(2).all(|w| w[1] < w[0]));
    }
}
