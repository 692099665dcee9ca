//! Weighted binary logistic regression fitted by damped Newton iterations.
//!
//! The responses may be fractional (`w_i` in `[0, 1]`), which is what the
//! M-step of every EM variant hands in: `w_i` is the posterior mass of node
//! `i` on the communities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::CovariateMatrix;

/// Gradient infinity-norm below which Newton iterations stop.
pub const GRADIENT_TOL: f64 = 1e-8;
/// Newton step infinity-norm that must also be reached before stopping.
pub const STEP_TOL: f64 = 1e-6;
pub const MAX_NEWTON_ITER: usize = 100;
/// Coefficients larger than this (infinity-norm) are treated as separation.
pub const COEF_CAP: f64 = 30.0;
const RIDGE_SCALE: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;
/// Relative objective decrease attributed to rounding in the line search.
const ROUNDING_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    /// Objective at the start and after every accepted Newton step.
    pub objective_trace: Vec<f64>,
}

/// Overflow-safe logistic function.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `log sigmoid(t)`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

pub fn predict_prob(x: &CovariateMatrix, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(x, beta)?;
    Ok((0..x.n())
        .map(|i| sigmoid(x.linear_predictor(i, beta)))
        .collect())
}

/// `sum_i { w_i x_i b - log(1 + e^{x_i b}) }`.
pub fn objective(x: &CovariateMatrix, w: &[f64], beta: &[f64]) -> f64 {
    w.iter()
        .enumerate()
        .map(|(i, &wi)| {
            let eta = x.linear_predictor(i, beta);
            wi * eta - softplus(eta)
        })
        .sum()
}

/// Analytic gradient `sum_i (w_i - p_i) x_i`.
pub fn gradient(x: &CovariateMatrix, w: &[f64], beta: &[f64]) -> Vec<f64> {
    let m = x.n_coef();
    let mut g = vec![0.0; m];
    for (i, &wi) in w.iter().enumerate() {
        let r = wi - sigmoid(x.linear_predictor(i, beta));
        for (j, gj) in g.iter_mut().enumerate() {
            *gj += r * x.design(i, j);
        }
    }
    g
}

fn information(x: &CovariateMatrix, beta: &[f64]) -> DMatrix<f64> {
    let m = x.n_coef();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..x.n() {
        let p = sigmoid(x.linear_predictor(i, beta));
        let v = p * (1.0 - p);
        for a in 0..m {
            let xa = x.design(i, a) * v;
            for b in 0..=a {
                h[(a, b)] += xa * x.design(i, b);
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            h[(b, a)] = h[(a, b)];
        }
    }
    h
}

struct Evaluation {
    obj: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

/// Objective, gradient and information in one pass over the rows.
fn evaluate(x: &CovariateMatrix, w: &[f64], beta: &[f64]) -> Evaluation {
    let m = x.n_coef();
    let mut obj = 0.0;
    let mut grad = vec![0.0; m];
    let mut lower = vec![0.0; m * (m + 1) / 2];
    let mut row = vec![0.0; m];
    row[0] = 1.0;
    for (i, &wi) in w.iter().enumerate() {
        let eta = x.linear_predictor(i, beta);
        let e = (-eta.abs()).exp();
        let p = if eta >= 0.0 {
            1.0 / (1.0 + e)
        } else {
            e / (1.0 + e)
        };
        obj += wi * eta - (eta.max(0.0) + e.ln_1p());
        let r = wi - p;
        let v = p * (1.0 - p);
        row[1..].copy_from_slice(x.row(i));
        let mut t = 0;
        for (a, &xa) in row.iter().enumerate() {
            grad[a] += r * xa;
            let xa = xa * v;
            for (h, &xb) in lower[t..=t + a].iter_mut().zip(&row) {
                *h += xa * xb;
            }
            t += a + 1;
        }
    }
    let mut hess = DMatrix::zeros(m, m);
    let mut t = 0;
    for a in 0..m {
        for b in 0..=a {
            hess[(a, b)] = lower[t];
            hess[(b, a)] = lower[t];
            t += 1;
        }
    }
    Evaluation { obj, grad, hess }
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    let ridge = RIDGE_SCALE * h.trace().max(f64::MIN_POSITIVE);
    let mut reg = h.clone();
    for a in 0..reg.nrows() {
        reg[(a, a)] += ridge;
    }
    reg.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Numerical("logistic Hessian is singular even after ridge".into()))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_beta(x: &CovariateMatrix, beta: &[f64]) -> Result<()> {
    if beta.len() != x.n_coef() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, design has {} columns",
            beta.len(),
            x.n_coef()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("non-finite logistic coefficient".into()));
    }
    Ok(())
}

/// Maximises the weighted logistic log-likelihood starting from `beta = 0`.
///
/// Separation (the coefficients running past [`COEF_CAP`] before the Newton
/// iterations settle) is reported as [`Error::Separation`] carrying the
/// estimate rescaled onto the cap.
pub fn fit_weighted(x: &CovariateMatrix, w: &[f64]) -> Result<LogisticFit> {
    fit_weighted_from(x, w, &vec![0.0; x.n_coef()])
}

pub fn fit_weighted_from(x: &CovariateMatrix, w: &[f64], init: &[f64]) -> Result<LogisticFit> {
    if w.len() != x.n() {
        return Err(Error::Dimension(format!(
            "{} weights for {} covariate rows",
            w.len(),
            x.n()
        )));
    }
    if let Some(i) = w.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Numerical(format!(
            "weight {} at node {i} outside [0, 1]",
            w[i]
        )));
    }
    if x.n() < x.n_coef() {
        return Err(Error::Dimension(format!(
            "{} observations cannot identify {} coefficients",
            x.n(),
            x.n_coef()
        )));
    }
    check_beta(x, init)?;

    let mut beta = init.to_vec();
    let mut cur = evaluate(x, w, &beta);
    let mut objective_trace = vec![cur.obj];
    let mut iterations = 0;
    while iterations < MAX_NEWTON_ITER {
        let step = solve_spd(&cur.hess, &DVector::from_column_slice(&cur.grad))?;
        let step_norm = step.amax();
        if inf_norm(&cur.grad) < GRADIENT_TOL && step_norm < STEP_TOL {
            break;
        }
        iterations += 1;

        let floor = cur.obj - ROUNDING_SLACK * (1.0 + cur.obj.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta
                .iter()
                .zip(step.iter())
                .map(|(b, s)| b + t * s)
                .collect();
            let cand_eval = evaluate(x, w, &cand);
            if cand_eval.obj.is_finite() && cand_eval.obj >= floor {
                accepted = Some((cand, cand_eval));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_eval)) = accepted else {
            // no ascent direction left at working precision
            break;
        };
        beta = cand;
        cur = cand_eval;
        objective_trace.push(cur.obj);

        let norm = inf_norm(&beta);
        if norm > COEF_CAP {
            let capped = beta.iter().map(|b| b * COEF_CAP / norm).collect();
            return Err(Error::Separation {
                capped,
                cap: COEF_CAP,
            });
        }
    }
    let grad = cur.grad;
    let final_gradient_norm = inf_norm(&grad);
    let converged = final_gradient_norm < GRADIENT_TOL;
    Ok(LogisticFit {
        beta,
        converged,
        iterations,
        final_gradient_norm,
        objective_trace,
    })
}

/// Wald standard errors from the observed information at `beta`.
pub fn wald_standard_errors(x: &CovariateMatrix, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(x, beta)?;
    let h = information(x, beta);
    let inv = h
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("observed information is singular".into()))?;
    Ok((0..inv.nrows()).map(|a| inv[(a, a)].sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        // coarse scan then successive refinement
        let (mut lo, mut hi) = (lo, hi);
        let mut best = lo;
        for _ in 0..8 {
            let steps = 200;
            let h = (hi - lo) / steps as f64;
            best = (0..=steps)
                .map(|s| lo + s as f64 * h)
                .max_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap();
            lo = best - h;
            hi = best + h;
        }
        best
    }

    #[test]
    fn intercept_only_half() {
        let x = CovariateMatrix::intercept_only(2);
        let fit = fit_weighted(&x, &[0.5, 0.5]).unwrap();
        assert!(fit.converged);
        assert!(fit.beta[0].abs() < 1e-12);
    }

    #[test]
    fn intercept_only_log3() {
        let x = CovariateMatrix::intercept_only(4);
        let w = [1.0, 1.0, 1.0, 0.0];
        let oracle = grid_argmax(|b| objective(&x, &w, &[b]), -5.0, 5.0);
        // a flat maximum limits grid resolution to about sqrt(eps)
        assert!((oracle - 3f64.ln()).abs() < 1e-6);
        let fit = fit_weighted(&x, &w).unwrap();
        assert!((fit.beta[0] - 3f64.ln()).abs() < 1e-9, "{:?}", fit);
        assert!((fit.beta[0] - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn all_ones_separates() {
        let x = CovariateMatrix::intercept_only(4);
        match fit_weighted(&x, &[1.0; 4]) {
            Err(Error::Separation { capped, cap }) => {
                assert_eq!(cap, COEF_CAP);
                assert!((capped[0] - COEF_CAP).abs() < 1e-12);
            }
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn predict_prob_values() {
        let x = CovariateMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(predict_prob(&x, &[0.0, 0.0]).unwrap(), [0.5, 0.5]);
        let p = predict_prob(&x, &[-1.0, 4.0]).unwrap();
        assert!((p[0] - 1.0 / (1.0 + (-3f64).exp())).abs() < 1e-15);
        assert!((p[0] - 0.95257).abs() < 1e-5);
        let p = predict_prob(&x, &[0.0, 4.0]).unwrap();
        assert!((p[1] - 0.01799).abs() < 1e-5);
        assert!(predict_prob(&x, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn sigmoid_extremes_are_finite() {
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let x = CovariateMatrix::intercept_only(2);
        assert!(fit_weighted(&x, &[0.5, 1.5]).is_err());
        assert!(fit_weighted(&x, &[0.5]).is_err());
    }
}
