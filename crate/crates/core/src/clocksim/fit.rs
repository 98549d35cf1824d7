//! Small Levenberg-Marquardt driver with a forward-difference Jacobian,
//! shared by the decay and line-centre fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Standard errors from the linearized covariance at the solution.
    pub errors: Vec<f64>,
    pub residual_rms: f64,
    pub iterations: usize,
}

/// Minimize sum of squares of `residuals(params)` over `params`.
pub fn levenberg_marquardt(
    residuals: &dyn Fn(&[f64]) -> Vec<f64>,
    params0: &[f64],
    scale: &[f64],
    max_iter: usize,
) -> Result<LmOutcome> {
    let np = params0.len();
    let mut p = params0.to_vec();
    let mut r = residuals(&p);
    let n = r.len();
    if n < np {
        return Err(CoreError::FitFailure(format!(
            "{n} residuals cannot constrain {np} parameters"
        )));
    }
    let mut ssr: f64 = r.iter().map(|x| x * x).sum();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        // forward-difference Jacobian
        let mut jac = DMatrix::<f64>::zeros(n, np);
        for k in 0..np {
            let h = 1e-7 * scale[k].abs().max(1e-12);
            let mut pk = p.clone();
            pk[k] += h;
            let rk = residuals(&pk);
            for i in 0..n {
                jac[(i, k)] = (rk[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let jtr = &jt * DVector::from_column_slice(&r);

        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for k in 0..np {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let step = match damped.lu().solve(&jtr) {
                Some(s) => s,
                None => break,
            };
            let trial: Vec<f64> = (0..np).map(|k| p[k] - step[k]).collect();
            let rt = residuals(&trial);
            let ssr_t: f64 = rt.iter().map(|x| x * x).sum();
            if ssr_t < ssr {
                p = trial;
                r = rt;
                ssr = ssr_t;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
        if ssr < 1e-30 {
            break;
        }
    }

    // covariance from the final Jacobian
    let mut jac = DMatrix::<f64>::zeros(n, np);
    for k in 0..np {
        let h = 1e-7 * scale[k].abs().max(1e-12);
        let mut pk = p.clone();
        pk[k] += h;
        let rk = residuals(&pk);
        for i in 0..n {
            jac[(i, k)] = (rk[i] - r[i]) / h;
        }
    }
    let jtj = jac.transpose() * &jac;
    let dof = (n - np).max(1) as f64;
    let variance = ssr / dof;
    let errors = match jtj.try_inverse() {
        Some(inv) => (0..np).map(|k| (inv[(k, k)] * variance).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; np],
    };

    Ok(LmOutcome {
        params: p,
        errors,
        residual_rms: (ssr / n as f64).sqrt(),
        iterations,
    })
}
