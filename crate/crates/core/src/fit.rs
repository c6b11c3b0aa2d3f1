//! Box-bounded Levenberg–Marquardt least squares with a finite-difference
//! Jacobian. Small parameter counts only.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative tolerance on the sum of squares.
    pub ftol: f64,
    /// Relative tolerance on the parameter step.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iterations: 300, ftol: 1e-10, xtol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub ssr: f64,
    pub n_residuals: usize,
    /// `s²·(JᵀJ)⁻¹`, with `s² = ssr/(n − p)`.
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    /// Per parameter: −1 at the lower bound, +1 at the upper bound, 0 free.
    pub at_bound: Vec<i8>,
}

impl LmResult {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len()).map(|i| self.covariance[i][i].max(0.0).sqrt()).collect()
    }
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn eval<F: Fn(&[f64]) -> Vec<f64>>(f: &F, p: &[f64]) -> Result<Vec<f64>> {
    let r = f(p);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::FitFailure(format!("non-finite residual at parameters {p:?}")));
    }
    Ok(r)
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    p: &[f64],
    r0: &[f64],
    lower: &[f64],
    upper: &[f64],
    scale: &[f64],
) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    for i in 0..p.len() {
        let h = 1e-6 * p[i].abs().max(scale[i]);
        let mut q = p.to_vec();
        let (fwd, bwd) = (p[i] + h <= upper[i], p[i] - h >= lower[i]);
        let col: Vec<f64> = if fwd && bwd {
            q[i] = p[i] + h;
            let a = eval(f, &q)?;
            q[i] = p[i] - h;
            let b = eval(f, &q)?;
            a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        } else if fwd {
            q[i] = p[i] + h;
            eval(f, &q)?.iter().zip(r0).map(|(x, y)| (x - y) / h).collect()
        } else {
            q[i] = p[i] - h;
            eval(f, &q)?.iter().zip(r0).map(|(x, y)| (y - x) / h).collect()
        };
        for (k, v) in col.into_iter().enumerate() {
            jac[(k, i)] = v;
        }
    }
    Ok(jac)
}

/// Minimizes `Σ residuals(p)²` over `lower ≤ p ≤ upper` starting from `x0`.
/// `scale` sets the finite-difference step for parameters near zero.
pub fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(
    residuals: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    scale: &[f64],
    options: &LmOptions,
) -> Result<LmResult> {
    let np = x0.len();
    if lower.len() != np || upper.len() != np || scale.len() != np {
        return Err(Error::domain("bounds and scales must match the parameter count"));
    }
    if (0..np).any(|i| !(lower[i] <= upper[i])) {
        return Err(Error::domain("lower bound above upper bound"));
    }
    let clamp = |p: &mut [f64]| {
        for i in 0..np {
            p[i] = p[i].clamp(lower[i], upper[i]);
        }
    };
    let mut p = x0.to_vec();
    clamp(&mut p);
    let mut r = eval(&residuals, &p)?;
    let mut cost = ssr(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let jac = jacobian(&residuals, &p, &r, lower, upper, scale)?;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * DVector::from_column_slice(&r);
        // Parameters on a bound with the descent direction pointing outward stay fixed.
        let frozen: Vec<bool> = (0..np)
            .map(|i| (p[i] <= lower[i] && g[i] > 0.0) || (p[i] >= upper[i] && g[i] < 0.0))
            .collect();
        let mut improved = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..np {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-300);
                if frozen[i] {
                    for j in 0..np {
                        damped[(i, j)] = 0.0;
                        damped[(j, i)] = 0.0;
                    }
                    damped[(i, i)] = 1.0;
                }
            }
            let g = DVector::from_fn(np, |i, _| if frozen[i] { 0.0 } else { g[i] });
            let Some(step) = damped.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = (0..np).map(|i| p[i] + step[i]).collect();
            clamp(&mut trial);
            let moved = (0..np).map(|i| (trial[i] - p[i]).abs() / (p[i].abs() + scale[i])).fold(0.0, f64::max);
            let r_trial = eval(&residuals, &trial)?;
            let c_trial = ssr(&r_trial);
            if c_trial < cost {
                let drop = cost - c_trial;
                p = trial;
                r = r_trial;
                let old = cost;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                small_step = drop <= options.ftol * old || moved <= options.xtol;
                break;
            }
            if moved <= options.xtol {
                small_step = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved || small_step {
            converged = true;
            break;
        }
    }

    let jac = jacobian(&residuals, &p, &r, lower, upper, scale)?;
    let a = jac.transpose() * &jac;
    let dof = r.len().saturating_sub(np).max(1) as f64;
    let s2 = cost / dof;
    let covariance = match a.clone().try_inverse() {
        Some(inv) => (0..np).map(|i| (0..np).map(|j| s2 * inv[(i, j)]).collect()).collect(),
        None => vec![vec![f64::INFINITY; np]; np],
    };
    let at_bound = (0..np)
        .map(|i| {
            let tol = 1e-9 * (p[i].abs() + scale[i]);
            if p[i] - lower[i] <= tol {
                -1
            } else if upper[i] - p[i] <= tol {
                1
            } else {
                0
            }
        })
        .collect();
    Ok(LmResult { params: p, ssr: cost, n_residuals: r.len(), covariance, iterations, converged, at_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential() {
        let t: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|x| 2.0 * (-1.3 * x).exp()).collect();
        let f = |p: &[f64]| t.iter().zip(&y).map(|(x, v)| p[0] * (-p[1] * x).exp() - v).collect();
        let res = levenberg_marquardt(f, &[1.0, 0.5], &[0.0, 0.0], &[10.0, 10.0], &[1.0, 1.0], &LmOptions::default()).unwrap();
        assert!(res.converged);
        assert!((res.params[0] - 2.0).abs() < 1e-8);
        assert!((res.params[1] - 1.3).abs() < 1e-8);
    }

    #[test]
    fn stops_at_bound() {
        let f = |p: &[f64]| vec![p[0] + 1.0];
        let res = levenberg_marquardt(f, &[3.0], &[0.0], &[5.0], &[1.0], &LmOptions::default()).unwrap();
        assert_eq!(res.params[0], 0.0);
        assert_eq!(res.at_bound, vec![-1]);
    }

    #[test]
    fn non_finite_residual_is_failure() {
        let f = |_: &[f64]| vec![f64::NAN];
        assert!(matches!(
            levenberg_marquardt(f, &[1.0], &[0.0], &[2.0], &[1.0], &LmOptions::default()),
            Err(Error::FitFailure(_))
        ));
    }
}
