//! Rabi flopping with the combined Gaussian and exponential decay
//! envelope, and the corresponding two-parameter fit.

use crate::error::{CoreError, Result};

use super::fit::levenberg_marquardt;

/// Decay parameters of the flop envelope: the natural D-state lifetime
/// (exponential), the Gaussian coherence time, and the optical Rabi
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayModel {
    /// Exponential time constant Gamma, s (natural lifetime 1.168 s).
    pub gamma_exp_s: f64,
    /// Gaussian time constant gamma, s.
    pub gamma_gauss_s: f64,
    /// Optical Rabi frequency, Hz.
    pub rabi_hz: f64,
}

impl DecayModel {
    pub fn reference() -> Self {
        Self {
            gamma_exp_s: crate::constants::D_LIFETIME_S,
            gamma_gauss_s: 0.29,
            rabi_hz: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_exp_s > 0.0 && self.gamma_gauss_s > 0.0 && self.rabi_hz > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "decay",
                reason: "all decay parameters must be positive".into(),
            });
        }
        Ok(())
    }
}

/// P_e(t) = (1 - cos(2 pi Omega t) exp(-t/Gamma) exp(-t^2/(2 gamma^2))) / 2.
pub fn rabi_flop_probability(t: f64, model: &DecayModel) -> f64 {
    let envelope = (-t / model.gamma_exp_s).exp()
        * (-(t * t) / (2.0 * model.gamma_gauss_s * model.gamma_gauss_s)).exp();
    0.5 * (1.0 - (std::f64::consts::TAU * model.rabi_hz * t).cos() * envelope)
}

/// Result of `fit_decay`: estimates and standard errors for the free
/// parameters (Omega_L, gamma), with Gamma held at its given value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rabi_hz: f64,
    pub rabi_err_hz: f64,
    pub gamma_gauss_s: f64,
    pub gamma_err_s: f64,
    pub residual_rms: f64,
}

/// Nonlinear least squares of the flop model over (Omega_L, gamma) with
/// the exponential constant fixed.
pub fn fit_decay(times_s: &[f64], probabilities: &[f64], gamma_exp_s: f64) -> Result<DecayFit> {
    let n = times_s.len();
    if n < 20 || probabilities.len() != n {
        return Err(CoreError::FitFailure(format!(
            "need at least 20 matching points, got {n}/{}",
            probabilities.len()
        )));
    }
    let span = times_s.iter().cloned().fold(f64::NAN, f64::max)
        - times_s.iter().cloned().fold(f64::NAN, f64::min);

    // starting guesses: Rabi from mean-crossing count, gamma from the span
    let mean = 0.5;
    let mut crossings = 0usize;
    for w in probabilities.windows(2) {
        if (w[0] - mean) * (w[1] - mean) < 0.0 {
            crossings += 1;
        }
    }
    let rabi0 = (crossings as f64 / (2.0 * span)).max(0.25 / span);
    let gamma0 = span / 2.0;

    let times = times_s.to_vec();
    let probs = probabilities.to_vec();
    let residual = move |p: &[f64]| -> Vec<f64> {
        let model = DecayModel {
            gamma_exp_s,
            gamma_gauss_s: p[1].abs().max(1e-6),
            rabi_hz: p[0].abs(),
        };
        times
            .iter()
            .zip(probs.iter())
            .map(|(&t, &y)| rabi_flop_probability(t, &model) - y)
            .collect()
    };

    let out = levenberg_marquardt(&residual, &[rabi0, gamma0], &[rabi0, gamma0], 200)?;
    let fit = DecayFit {
        rabi_hz: out.params[0].abs(),
        rabi_err_hz: out.errors[0],
        gamma_gauss_s: out.params[1].abs(),
        gamma_err_s: out.errors[1],
        residual_rms: out.residual_rms,
    };
    if span < 2.0 * fit.gamma_gauss_s.min(gamma0) && fit.gamma_err_s / fit.gamma_gauss_s > 1.0 {
        return Err(CoreError::FitFailure(format!(
            "data span {span:.3} s too short to constrain gamma = {:.3} s (residual {:.3e})",
            fit.gamma_gauss_s, fit.residual_rms
        )));
    }
    Ok(fit)
}
