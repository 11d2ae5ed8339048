//! Box-constrained Levenberg–Marquardt on a sum of squared residuals.
//!
//! Variables at a bound whose gradient points outward are held fixed for
//! the step; trial points are projected back into the box. Only steps that
//! lower the objective are accepted, so the cost history is strictly
//! decreasing.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative step size below which an accepted step counts as converged.
    pub xtol: f64,
    /// Infinity norm of the projected gradient below which we stop.
    pub gtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, xtol: 1e-8, gtol: 1e-10 }
    }
}

/// Residual vector and Jacobian at `x`.
pub trait Residuals {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn eval(&self, x: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>);
    fn lower(&self) -> Vec<f64> {
        vec![f64::NEG_INFINITY; self.n_params()]
    }
    fn upper(&self) -> Vec<f64> {
        vec![f64::INFINITY; self.n_params()]
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// ½‖r‖²
    pub cost: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub gradient_norm: f64,
    /// Cost after the start and after every accepted step.
    pub history: Vec<f64>,
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn minimize<P: Residuals + ?Sized>(problem: &P, x0: &[f64], opts: LmOptions) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let lo = problem.lower();
    let hi = problem.upper();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    problem.eval(&x, &mut r, Some(&mut jac));
    let mut cost = cost_of(&r);
    let mut history = vec![cost];
    if !cost.is_finite() {
        return LmOutcome { x, cost, converged: false, n_iter: 0, gradient_norm: f64::NAN, history };
    }

    let mut jtj = jac.tr_mul(&jac);
    let mut grad = jac.tr_mul(&r);
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let mut lambda = 1e-3 * max_diag.max(f64::MIN_POSITIVE);
    let mut nu = 2.0;
    let mut r_trial = DVector::zeros(m);

    let free_mask = |x: &[f64], g: &DVector<f64>| -> Vec<bool> {
        (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect()
    };
    let projected_norm = |free: &[bool], g: &DVector<f64>| {
        (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max)
    };

    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        let free = free_mask(&x, &grad);
        let gnorm = projected_norm(&free, &grad);
        if gnorm < opts.gtol {
            converged = true;
            break;
        }
        iter += 1;

        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let k = idx.len();
        let diag_floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
        let mut a = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        for (p, &i) in idx.iter().enumerate() {
            b[p] = -grad[i];
            for (q, &j) in idx.iter().enumerate() {
                a[(p, q)] = jtj[(i, j)];
            }
            a[(p, p)] += lambda * jtj[(i, i)].max(diag_floor);
        }
        let Some(chol) = a.cholesky() else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };
        let delta_free = chol.solve(&b);

        let mut x_trial = x.clone();
        for (p, &i) in idx.iter().enumerate() {
            x_trial[i] += delta_free[p];
        }
        clamp(&mut x_trial);
        let step = DVector::from_iterator(n, (0..n).map(|i| x_trial[i] - x[i]));

        problem.eval(&x_trial, &mut r_trial, None);
        let cost_trial = cost_of(&r_trial);
        let predicted = -(grad.dot(&step) + 0.5 * step.dot(&(&jtj * &step)));

        if cost_trial.is_finite() && cost_trial < cost {
            let rho = if predicted > 0.0 { (cost - cost_trial) / predicted } else { 0.0 };
            let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = x_trial;
            problem.eval(&x, &mut r, Some(&mut jac));
            cost = cost_of(&r);
            history.push(cost);
            jtj = jac.tr_mul(&jac);
            grad = jac.tr_mul(&r);
            lambda *= f64::max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if step.norm() <= opts.xtol * (x_norm + opts.xtol) {
                converged = true;
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e30 * max_diag.max(1.0) {
                // No representable descent step remains: we are at the
                // numerical floor of the objective.
                converged = true;
                break;
            }
        }
    }

    let free = free_mask(&x, &grad);
    let gradient_norm = projected_norm(&free, &grad);
    LmOutcome { x, cost, converged, n_iter: iter, gradient_norm, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals (10(y − x²), 1 − x).
    struct Rosen;

    impl Residuals for Rosen {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>) {
            r[0] = 10.0 * (x[1] - x[0] * x[0]);
            r[1] = 1.0 - x[0];
            if let Some(j) = jac {
                j[(0, 0)] = -20.0 * x[0];
                j[(0, 1)] = 10.0;
                j[(1, 0)] = -1.0;
                j[(1, 1)] = 0.0;
            }
        }
    }

    struct BoundedRosen;

    impl Residuals for BoundedRosen {
        fn n_params(&self) -> usize {
            2
        }
        fn n_residuals(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>) {
            Rosen.eval(x, r, jac)
        }
        fn upper(&self) -> Vec<f64> {
            vec![0.5, f64::INFINITY]
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let out = minimize(&Rosen, &[-1.2, 1.0], LmOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
        assert!(out.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn respects_upper_bound() {
        let out = minimize(&BoundedRosen, &[-1.2, 1.0], LmOptions::default());
        assert!(out.converged);
        assert_eq!(out.x[0], 0.5);
        assert!((out.x[1] - 0.25).abs() < 1e-8);
    }
}
