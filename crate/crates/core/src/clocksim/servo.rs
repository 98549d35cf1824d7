//! Two-point Rabi clock servo over an ion crystal, with per-ion readout
//! and integrator feedback, plus the scalar quadratic-Zeeman bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constants::PhysicalConstants;
use crate::dressing::{qps_suppression_factor, zeeman_sensitivity, CddParameterSet, MixingAngles};
use crate::error::{CoreError, Result};
use crate::spin::ManifoldLabel;

use super::noise::{NoiseModel, NoiseStream};
use super::scan::rabi_line;

/// Readout model: camera resolves ions individually (10 ms dead time),
/// the photomultiplier sums the crystal (100 us dead time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Camera,
    Pmt,
}

impl Readout {
    pub fn dead_time_s(self) -> f64 {
        match self {
            Readout::Camera => 10e-3,
            Readout::Pmt => 100e-6,
        }
    }
}

/// Servo configuration. The default half-width sits near the maximum
/// slope of the Rabi line, 0.4 / probe_time.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoConfig {
    pub probe_time_s: f64,
    pub cycle_time_s: f64,
    pub gain: f64,
    pub half_width_hz: Option<f64>,
    pub readout: Readout,
    /// Bernoulli projection sampling; off gives the deterministic
    /// expectation-value servo.
    pub projection_noise: bool,
    /// Static frequency offset injected on every ion (bias checks), Hz.
    pub injected_offset_hz: f64,
    /// Quadratic field coefficient of the dressed transition, Hz/nT^2.
    pub quadratic_hz_per_nt2: f64,
    /// Decay envelope (Gamma, gamma), s.
    pub gamma_exp_s: f64,
    pub gamma_gauss_s: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            probe_time_s: 0.1,
            cycle_time_s: 0.3,
            gain: 0.5,
            half_width_hz: None,
            readout: Readout::Camera,
            projection_noise: true,
            injected_offset_hz: 0.0,
            quadratic_hz_per_nt2: -1.2e-4,
            gamma_exp_s: crate::constants::D_LIFETIME_S,
            gamma_gauss_s: 0.29,
        }
    }
}

impl ServoConfig {
    pub fn half_width(&self) -> f64 {
        self.half_width_hz.unwrap_or(0.4 / self.probe_time_s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probe_time_s > self.cycle_time_s {
            return Err(CoreError::InvalidParameter {
                name: "probe_time",
                reason: format!(
                    "probe {} s exceeds the cycle {} s",
                    self.probe_time_s, self.cycle_time_s
                ),
            });
        }
        if !(self.gain > 0.0 && self.gain <= 2.0) {
            return Err(CoreError::InvalidParameter {
                name: "gain",
                reason: format!("integrator gain {} outside (0, 2]", self.gain),
            });
        }
        Ok(())
    }
}

/// The ions a servo run interrogates: axial positions and their bare
/// (unsuppressed) quadrupole shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockIons {
    pub positions_m: Vec<f64>,
    pub qps_bare_hz: Vec<f64>,
}

impl ClockIons {
    pub fn single() -> Self {
        Self {
            positions_m: vec![0.0],
            qps_bare_hz: vec![0.0],
        }
    }
}

/// Per-ion record of servo frequency corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockRun {
    /// Pair-completion timestamps, s.
    pub timestamps_s: Vec<f64>,
    /// One correction series per readout channel (per ion for the
    /// camera, one summed channel for the PMT), Hz.
    pub corrections_hz: Vec<Vec<f64>>,
    pub seed: u64,
    /// Cycle pair spacing, s (the natural tau0 for Allan statistics).
    pub tau0_s: f64,
}

impl ClockRun {
    /// Fractional-frequency series against the optical carrier.
    pub fn fractional(&self, nu0_hz: f64) -> Vec<Vec<f64>> {
        self.corrections_hz
            .iter()
            .map(|series| series.iter().map(|c| c / nu0_hz).collect())
            .collect()
    }
}

/// Run the two-point sampling servo for `duration_s`.
///
/// Per ion the true line offset is the dressed quadrupole shift plus the
/// linear and quadratic field response and the drive-amplitude-noise
/// response; the probe alternates between the half-width points and an
/// integrator steers each channel's frequency.
pub fn run_clock_servo(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    ions: &ClockIons,
    noise: &NoiseModel,
    servo: &ServoConfig,
    duration_s: f64,
) -> Result<ClockRun> {
    servo.validate()?;
    noise.validate()?;
    if ions.positions_m.is_empty() || ions.positions_m.len() != ions.qps_bare_hz.len() {
        return Err(CoreError::InvalidParameter {
            name: "ions",
            reason: "need matching non-empty positions and shifts".into(),
        });
    }
    if duration_s < 100.0 * servo.cycle_time_s {
        return Err(CoreError::InvalidParameter {
            name: "duration",
            reason: format!(
                "duration {} s below 100 cycles ({} s)",
                duration_s,
                100.0 * servo.cycle_time_s
            ),
        });
    }

    let n_ions = ions.positions_m.len();
    let angles = MixingAngles::from_set(set)?;
    let suppression = qps_suppression_factor(angles.cos_d1, angles.cos_d2);
    let lin_sens = zeeman_sensitivity(set, &angles, consts);
    // drive-amplitude response: d(offset)/d(ln Omega) summed over stages,
    // sin^2(theta) per stage
    let amp_response = {
        let t = &set.target;
        let term = |m: ManifoldLabel, m1: f64, m2: f64, c1: f64, c2: f64| -> f64 {
            let w1 = set.stage1_splitting_hz(m);
            let w2 = set.stage2_splitting_hz(m);
            m1 * w1 * (1.0 - c1 * c1) + m2 * w2 * (1.0 - c2 * c2)
        };
        term(ManifoldLabel::D, t.m1_d, t.m2_d, angles.cos_d1, angles.cos_d2)
            - term(ManifoldLabel::S, t.m1_s, t.m2_s, angles.cos_s1, angles.cos_s2)
    };

    let rabi = 1.0 / (2.0 * servo.probe_time_s); // pi pulse
    let hw = servo.half_width();
    // slope of the line at the probe points (numeric derivative)
    let slope = {
        let h = hw * 1e-4;
        let p = |d: f64| {
            rabi_line(
                d,
                rabi,
                servo.probe_time_s,
                servo.gamma_exp_s,
                servo.gamma_gauss_s,
            )
        };
        (p(hw + h) - p(hw - h)) / (2.0 * h)
    };
    if slope.abs() < 1e-12 {
        return Err(CoreError::InvalidParameter {
            name: "half_width",
            reason: "probe points sit on a zero-slope part of the line".into(),
        });
    }
    let gain_scale = servo.gain / (2.0 * slope.abs());

    let true_offset = |i: usize, db_nt: f64, frac_amp: f64| -> f64 {
        ions.qps_bare_hz[i] * suppression
            + lin_sens * db_nt
            + servo.quadratic_hz_per_nt2 * db_nt * db_nt
            + amp_response * frac_amp
            + servo.injected_offset_hz
    };

    let mut stream = NoiseStream::new(noise.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed.wrapping_mul(0x5851_F42D).wrapping_add(17));

    let channels = match servo.readout {
        Readout::Camera => n_ions,
        Readout::Pmt => 1,
    };
    // perfect initial lock on the unperturbed line: the injected offset
    // stays unknown to the servo and must be acquired
    let mut f_servo = vec![0.0f64; channels];
    {
        let init: Vec<f64> = (0..n_ions)
            .map(|i| {
                let (dbi, fai) = stream.sample(0.0, ions.positions_m[i]);
                true_offset(i, dbi, fai) - servo.injected_offset_hz
            })
            .collect();
        for (ch, f) in f_servo.iter_mut().enumerate() {
            *f = if servo.readout == Readout::Camera {
                init[ch]
            } else {
                init.iter().sum::<f64>() / n_ions as f64
            };
        }
    }

    let pairs = (duration_s / (2.0 * servo.cycle_time_s)).floor() as usize;
    let mut timestamps = Vec::with_capacity(pairs);
    let mut records: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs); channels];

    let excitation = |probe_hz: f64,
                          i: usize,
                          t: f64,
                          stream: &mut NoiseStream,
                          rng: &mut ChaCha8Rng|
     -> f64 {
        let (db, fa) = stream.sample(t, ions.positions_m[i]);
        let center = true_offset(i, db, fa);
        let p = rabi_line(
            probe_hz - center,
            rabi,
            servo.probe_time_s,
            servo.gamma_exp_s,
            servo.gamma_gauss_s,
        );
        if servo.projection_noise {
            f64::from(rng.random::<f64>() < p)
        } else {
            p
        }
    };

    for k in 0..pairs {
        let t_hi = (2 * k) as f64 * servo.cycle_time_s;
        let t_lo = (2 * k + 1) as f64 * servo.cycle_time_s;
        match servo.readout {
            Readout::Camera => {
                for ch in 0..channels {
                    let x_hi = excitation(f_servo[ch] + hw, ch, t_hi, &mut stream, &mut rng);
                    let x_lo = excitation(f_servo[ch] - hw, ch, t_lo, &mut stream, &mut rng);
                    f_servo[ch] += gain_scale * (x_hi - x_lo);
                }
            }
            Readout::Pmt => {
                let mut x_hi = 0.0;
                let mut x_lo = 0.0;
                for i in 0..n_ions {
                    x_hi += excitation(f_servo[0] + hw, i, t_hi, &mut stream, &mut rng);
                    x_lo += excitation(f_servo[0] - hw, i, t_lo, &mut stream, &mut rng);
                }
                f_servo[0] += gain_scale * (x_hi - x_lo) / n_ions as f64;
            }
        }
        // unlock detection after the initial transient
        if k > 10 {
            for (ch, f) in f_servo.iter().enumerate() {
                let i = if servo.readout == Readout::Camera { ch } else { 0 };
                let (db, fa) = stream.sample(t_lo, ions.positions_m[i.min(n_ions - 1)]);
                let truth = true_offset(i.min(n_ions - 1), db, fa);
                if (f - truth).abs() > 6.0 * hw {
                    return Err(CoreError::ServoUnlock { cycle: 2 * k });
                }
            }
        }
        timestamps.push(t_lo + servo.cycle_time_s);
        for (ch, rec) in records.iter_mut().enumerate() {
            rec.push(f_servo[ch]);
        }
    }

    Ok(ClockRun {
        timestamps_s: timestamps,
        corrections_hz: records,
        seed: noise.seed,
        tau0_s: 2.0 * servo.cycle_time_s,
    })
}

/// Scalar quadratic Zeeman offset of the clock transition, k B0^2, with
/// k calibrated so 357 uT gives 1.37 Hz. Absolute-line bookkeeping only.
pub fn quadratic_zeeman_offset(b0_tesla: f64, k_hz_per_t2: f64) -> f64 {
    k_hz_per_t2 * b0_tesla * b0_tesla
}

/// Default quadratic Zeeman coefficient, Hz/T^2.
pub const QUADRATIC_ZEEMAN_HZ_PER_T2: f64 = 1.37 / (357e-6 * 357e-6);

#[cfg(test)]
mod tests {
    use super::*;

    fn set_and_consts() -> (CddParameterSet, PhysicalConstants) {
        let c = PhysicalConstants::default();
        (CddParameterSet::resonant(&c), c)
    }

    #[test]
    fn zero_noise_perfect_lock_stays_at_zero() {
        let (set, c) = set_and_consts();
        let servo = ServoConfig {
            projection_noise: false,
            ..Default::default()
        };
        let run = run_clock_servo(
            &set,
            &c,
            &ClockIons::single(),
            &NoiseModel::quiet(),
            &servo,
            60.1,
        )
        .unwrap();
        for series in &run.corrections_hz {
            for v in series.iter().skip(2) {
                assert!(v.abs() < 1e-12, "correction {v}");
            }
        }
    }

    #[test]
    fn injected_offset_is_tracked_unbiased() {
        let (set, c) = set_and_consts();
        let servo = ServoConfig {
            projection_noise: true,
            injected_offset_hz: 0.8,
            ..Default::default()
        };
        let mut noise = NoiseModel::quiet();
        noise.seed = 5;
        let run =
            run_clock_servo(&set, &c, &ClockIons::single(), &noise, &servo, 1200.0).unwrap();
        let series = &run.corrections_hz[0];
        let tail = &series[series.len() / 4..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let sd = (tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / tail.len() as f64)
            .sqrt();
        let sem = sd / (tail.len() as f64).sqrt() * 5.0; // correlated samples
        assert!(
            (mean - 0.8).abs() < sem.max(0.05),
            "steady-state mean {mean} vs 0.8 (sem {sem})"
        );
    }

    #[test]
    fn quadratic_zeeman_values() {
        let k = QUADRATIC_ZEEMAN_HZ_PER_T2;
        assert!((quadratic_zeeman_offset(357e-6, k) - 1.37).abs() < 1e-12);
        assert_eq!(quadratic_zeeman_offset(0.0, k), 0.0);
        assert!((quadratic_zeeman_offset(2.0 * 357e-6, k) - 5.48).abs() < 1e-12);
    }

    #[test]
    fn servo_rejects_bad_config() {
        let (set, c) = set_and_consts();
        let bad = ServoConfig {
            probe_time_s: 0.5,
            cycle_time_s: 0.3,
            ..Default::default()
        };
        assert!(run_clock_servo(
            &set,
            &c,
            &ClockIons::single(),
            &NoiseModel::quiet(),
            &bad,
            100.0
        )
        .is_err());
        let short = ServoConfig::default();
        assert!(run_clock_servo(
            &set,
            &c,
            &ClockIons::single(),
            &NoiseModel::quiet(),
            &short,
            10.0
        )
        .is_err());
    }

    #[test]
    fn servo_unlock_reported() {
        let (set, c) = set_and_consts();
        // an absurd injected offset the servo cannot acquire
        let servo = ServoConfig {
            projection_noise: false,
            injected_offset_hz: 2000.0,
            gain: 0.01,
            ..Default::default()
        };
        let err = run_clock_servo(
            &set,
            &c,
            &ClockIons::single(),
            &NoiseModel::quiet(),
            &servo,
            60.1,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::ServoUnlock { .. }));
    }
}
