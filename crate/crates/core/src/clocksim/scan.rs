//! Per-ion line scans: dressed-basis transition frequencies per ion
//! (quadrupole shift plus field-profile response), Rabi lineshape with
//! decay envelope, binomial sampling and line-centre fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::dressing::{qps_suppression_factor, zeeman_sensitivity, CddParameterSet, MixingAngles};
use crate::error::{CoreError, Result};

use super::fit::levenberg_marquardt;
use super::noise::{NoiseModel, NoiseStream};

/// Rabi excitation lineshape with the combined decay envelope:
/// (Omega^2/W^2) (1 - cos(2 pi W T) env(T)) / 2, W = sqrt(Omega^2 + d^2).
pub fn rabi_line(
    detuning_hz: f64,
    rabi_hz: f64,
    probe_s: f64,
    gamma_exp_s: f64,
    gamma_gauss_s: f64,
) -> f64 {
    let w2 = rabi_hz * rabi_hz + detuning_hz * detuning_hz;
    if w2 == 0.0 {
        return 0.0;
    }
    let env = (-probe_s / gamma_exp_s).exp()
        * (-(probe_s * probe_s) / (2.0 * gamma_gauss_s * gamma_gauss_s)).exp();
    0.5 * (rabi_hz * rabi_hz / w2)
        * (1.0 - (std::f64::consts::TAU * w2.sqrt() * probe_s).cos() * env)
}

/// Configuration of a per-ion line scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LineScanConfig {
    pub detunings_hz: Vec<f64>,
    pub shots_per_point: u32,
    pub probe_time_s: f64,
    /// Dead time between shots (camera readout), s.
    pub dead_time_s: f64,
    /// Decay envelope constants (Gamma, gamma), s.
    pub gamma_exp_s: f64,
    pub gamma_gauss_s: f64,
}

impl Default for LineScanConfig {
    fn default() -> Self {
        Self {
            detunings_hz: Vec::new(),
            shots_per_point: 100,
            probe_time_s: 0.1,
            dead_time_s: 0.01,
            gamma_exp_s: crate::constants::D_LIFETIME_S,
            gamma_gauss_s: 0.29,
        }
    }
}

/// One ion's scan outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct IonScan {
    pub position_m: f64,
    /// (detuning offset from the artificial transition, excitation estimate)
    pub curve: Vec<(f64, f64)>,
    /// Fitted line centre relative to the artificial transition, Hz.
    pub center_hz: f64,
    pub center_err_hz: f64,
    /// Set when the primary fit failed and the Gaussian fallback was used.
    pub fallback_fit: bool,
    /// Set when no usable fit was obtained.
    pub fit_failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineScanResult {
    pub ions: Vec<IonScan>,
    /// True injected per-ion line centres (for closed-loop checks), Hz.
    pub true_centers_hz: Vec<f64>,
}

/// Scan the probe detuning across each ion's line. The per-ion centre is
/// the artificial-transition offset plus the dressed quadrupole shift
/// and the static-field-profile response; mains and drift noise shift
/// the line shot by shot.
pub fn per_ion_line_scan(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    positions_m: &[f64],
    qps_bare_hz: &[f64],
    noise: &NoiseModel,
    cfg: &LineScanConfig,
) -> Result<LineScanResult> {
    if cfg.shots_per_point < 50 {
        return Err(CoreError::InvalidParameter {
            name: "shots",
            reason: format!("need at least 50 shots per point, got {}", cfg.shots_per_point),
        });
    }
    if positions_m.len() != qps_bare_hz.len() || positions_m.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "ions",
            reason: "positions and shifts must match and be non-empty".into(),
        });
    }
    noise.validate()?;

    let angles = MixingAngles::from_set(set)?;
    let suppression = qps_suppression_factor(angles.cos_d1, angles.cos_d2);
    let lin_sens = zeeman_sensitivity(set, &angles, consts);
    let rabi = set.laser_omega_hz;
    let cycle = cfg.probe_time_s + cfg.dead_time_s;

    let true_centers: Vec<f64> = positions_m
        .iter()
        .zip(qps_bare_hz.iter())
        .map(|(_, &q)| q * suppression)
        .collect();

    let ions: Vec<IonScan> = positions_m
        .par_iter()
        .enumerate()
        .map(|(i, &z)| {
            let mut stream = NoiseStream::new(NoiseModel {
                seed: noise.seed.wrapping_add(i as u64),
                ..noise.clone()
            });
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed.wrapping_mul(31).wrapping_add(i as u64));
            let mut curve = Vec::with_capacity(cfg.detunings_hz.len());
            let mut t = 0.0f64;
            for (k, &delta) in cfg.detunings_hz.iter().enumerate() {
                let mut hits = 0u32;
                for _ in 0..cfg.shots_per_point {
                    let (db, _) = stream.sample(t, z);
                    let line_center = true_centers[i] + lin_sens * db;
                    let p = rabi_line(
                        delta - line_center,
                        rabi,
                        cfg.probe_time_s,
                        cfg.gamma_exp_s,
                        cfg.gamma_gauss_s,
                    );
                    if rng.random::<f64>() < p {
                        hits += 1;
                    }
                    t += cycle;
                }
                curve.push((delta, hits as f64 / cfg.shots_per_point as f64));
                let _ = k;
            }

            // primary fit: Rabi lineshape with free centre and amplitude
            let xs: Vec<f64> = curve.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
            let peak_guess = xs[ys
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k)
                .unwrap_or(0)];
            let probe = cfg.probe_time_s;
            let (ge, gg) = (cfg.gamma_exp_s, cfg.gamma_gauss_s);
            let xs_c = xs.clone();
            let ys_c = ys.clone();
            let res_fn = move |p: &[f64]| -> Vec<f64> {
                xs_c.iter()
                    .zip(ys_c.iter())
                    .map(|(&x, &y)| p[1] * rabi_line(x - p[0], rabi, probe, ge, gg) - y)
                    .collect()
            };
            let fitted = levenberg_marquardt(
                &res_fn,
                &[peak_guess, 1.0],
                &[rabi.max(1.0 / probe), 1.0],
                120,
            );
            let (center, err, fallback, failed) = match fitted {
                Ok(out) if out.params[1] > 0.1 && out.residual_rms < 0.5 => {
                    (out.params[0], out.errors[0], false, false)
                }
                _ => {
                    // Gaussian fallback: moment estimate over the curve
                    let wsum: f64 = ys.iter().sum();
                    if wsum > 0.0 {
                        let mean = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum::<f64>() / wsum;
                        let var = xs
                            .iter()
                            .zip(ys.iter())
                            .map(|(x, y)| (x - mean) * (x - mean) * y)
                            .sum::<f64>()
                            / wsum;
                        (mean, var.max(0.0).sqrt() / wsum.sqrt(), true, false)
                    } else {
                        (f64::NAN, f64::NAN, true, true)
                    }
                }
            };
            IonScan {
                position_m: z,
                curve,
                center_hz: center,
                center_err_hz: err,
                fallback_fit: fallback,
                fit_failed: failed,
            }
        })
        .collect();

    Ok(LineScanResult {
        ions,
        true_centers_hz: true_centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{axial_field_gradient, equilibrium_positions, per_ion_qps, TrapConfig};
    use crate::spin::HalfSpin;

    fn grid(span: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| -span + 2.0 * span * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn lineshape_peak_and_width() {
        // no decay: pi pulse at the centre gives 1, Fourier-limited width
        let t = 0.1;
        let rabi = 1.0 / (2.0 * t);
        assert!((rabi_line(0.0, rabi, t, 1e9, 1e9) - 1.0).abs() < 1e-9);
        assert!(rabi_line(8.0 / t, rabi, t, 1e9, 1e9) < 0.05);
    }

    #[test]
    fn noiseless_centers_sit_at_zero() {
        // no noise, no QPS, no gradient: every centre at the artificial
        // transition (offset zero) within the fit error
        let c = PhysicalConstants::default();
        let set = CddParameterSet::resonant(&c);
        let cfg = LineScanConfig {
            detunings_hz: grid(8.0, 17),
            shots_per_point: 400,
            probe_time_s: 0.1,
            ..Default::default()
        };
        let res = per_ion_line_scan(
            &set,
            &c,
            &[0.0, 2e-6],
            &[0.0, 0.0],
            &NoiseModel::quiet(),
            &cfg,
        )
        .unwrap();
        for ion in &res.ions {
            assert!(!ion.fit_failed);
            assert!(
                ion.center_hz.abs() < 3.0 * ion.center_err_hz.max(0.2),
                "centre {} +- {}",
                ion.center_hz,
                ion.center_err_hz
            );
        }
    }

    #[test]
    fn qps_profile_recovered_in_closed_loop() {
        // resonant set + QPS on: the fitted centre profile matches the
        // injected per-ion QPS to 5%
        let c = PhysicalConstants::default();
        let set = CddParameterSet::resonant(&c);
        let trap = TrapConfig::default_five_ion();
        let crystal = equilibrium_positions(&trap, &c).unwrap();
        let grads = axial_field_gradient(&crystal, &trap, &c).unwrap();
        let theta = c.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let qps = per_ion_qps(
            &grads,
            theta,
            HalfSpin::from_twice(5),
            set.target.m2_d,
            1.0,
            &c,
        );
        let span = qps.iter().cloned().fold(f64::NAN, f64::max) * 1.4;
        // sample well below the ~8 Hz Fourier linewidth
        let n = (span / 2.0).ceil() as usize * 2 + 1;
        let cfg = LineScanConfig {
            detunings_hz: grid(span.max(40.0), n),
            shots_per_point: 600,
            probe_time_s: 0.1,
            ..Default::default()
        };
        let res = per_ion_line_scan(
            &set,
            &c,
            &crystal.positions_m,
            &qps,
            &NoiseModel::quiet(),
            &cfg,
        )
        .unwrap();
        // suppression factor is 1 for the resonant set
        for (ion, want) in res.ions.iter().zip(qps.iter()) {
            assert!(
                (ion.center_hz - want).abs() < 0.05 * want.abs().max(1.0),
                "centre {} vs injected {want}",
                ion.center_hz
            );
        }
        // and the quadratic inhomogeneity matches the injection to 5%
        let centers: Vec<f64> = res.ions.iter().map(|i| i.center_hz).collect();
        let fit_meas =
            crate::crystal::inhomogeneity_fit(&crystal.positions_m, &centers).unwrap();
        let fit_true = crate::crystal::inhomogeneity_fit(&crystal.positions_m, &qps).unwrap();
        assert!(
            (fit_meas.quadratic_hz_per_um2 / fit_true.quadratic_hz_per_um2 - 1.0).abs() < 0.05
        );
    }

    #[test]
    fn magic_set_with_linear_field_profile() {
        // magic-angle set with realistic residual stage-1 detunings plus a
        // linear B(z): the centre profile is dominated by the linear term
        // (the quadrupole part is magic-suppressed)
        let c = PhysicalConstants::default();
        let mut set = CddParameterSet::magic(&c);
        set.stage1_s.delta_hz = 150.0;
        set.stage1_d.delta_hz = 150.0;
        let trap = TrapConfig::default_five_ion();
        let crystal = equilibrium_positions(&trap, &c).unwrap();
        let grads = axial_field_gradient(&crystal, &trap, &c).unwrap();
        let theta = c.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let qps = per_ion_qps(
            &grads,
            theta,
            HalfSpin::from_twice(5),
            set.target.m2_d,
            1.0,
            &c,
        );
        let noise = NoiseModel {
            b_gradient_linear_nt_per_um: 0.5,
            ..NoiseModel::quiet()
        };
        let cfg = LineScanConfig {
            detunings_hz: grid(60.0, 61),
            shots_per_point: 400,
            probe_time_s: 0.1,
            ..Default::default()
        };
        let res = per_ion_line_scan(&set, &c, &crystal.positions_m, &qps, &noise, &cfg).unwrap();
        let centers: Vec<f64> = res.ions.iter().map(|i| i.center_hz).collect();
        let fit = crate::crystal::inhomogeneity_fit(&crystal.positions_m, &centers).unwrap();
        let angles = MixingAngles::from_set(&set).unwrap();
        let lin_sens = zeeman_sensitivity(&set, &angles, &c);
        let expected_linear = lin_sens * 0.5; // Hz/um
        assert!(
            (fit.linear_hz_per_um / expected_linear - 1.0).abs() < 0.2,
            "linear {} vs {}",
            fit.linear_hz_per_um,
            expected_linear
        );
        // linear term dominates the quadratic one across the 20 um chain
        assert!(fit.linear_hz_per_um.abs() * 10.0 > fit.quadratic_hz_per_um2.abs() * 100.0);
    }

    #[test]
    fn centers_invariant_under_grid_shift() {
        let c = PhysicalConstants::default();
        let set = CddParameterSet::resonant(&c);
        let base = LineScanConfig {
            detunings_hz: grid(10.0, 21),
            shots_per_point: 400,
            probe_time_s: 0.1,
            ..Default::default()
        };
        let shifted = LineScanConfig {
            detunings_hz: base.detunings_hz.iter().map(|d| d + 3.0).collect(),
            ..base.clone()
        };
        let r1 = per_ion_line_scan(&set, &c, &[0.0], &[3.0], &NoiseModel::quiet(), &base).unwrap();
        let r2 =
            per_ion_line_scan(&set, &c, &[0.0], &[3.0], &NoiseModel::quiet(), &shifted).unwrap();
        assert!(
            (r1.ions[0].center_hz - r2.ions[0].center_hz).abs()
                < 3.0 * (r1.ions[0].center_err_hz + r2.ions[0].center_err_hz).max(0.3),
            "{} vs {}",
            r1.ions[0].center_hz,
            r2.ions[0].center_hz
        );
    }

    #[test]
    fn too_few_shots_rejected() {
        let c = PhysicalConstants::default();
        let set = CddParameterSet::resonant(&c);
        let cfg = LineScanConfig {
            detunings_hz: grid(5.0, 5),
            shots_per_point: 10,
            ..Default::default()
        };
        assert!(
            per_ion_line_scan(&set, &c, &[0.0], &[0.0], &NoiseModel::quiet(), &cfg).is_err()
        );
    }
}
