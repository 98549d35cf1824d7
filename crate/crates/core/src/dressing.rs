//! Closed-form doubly-dressed-state analysis: ladder splittings, mixing
//! angles, Zeeman and quadrupole suppression factors, magic-angle and
//! compensation detunings.
//!
//! Conventions. A lab drive g*Omega*cos(2 pi w t)*Jx on a ladder split by
//! w0 produces a dressed ladder with spacing
//! sqrt((g Omega / 2)^2 + Delta^2), Delta = w0 - w. The second-stage
//! two-tone drive demodulates into the first dressed frame with HALF its
//! nominal amplitude (the sin(w1 t) quadrature contributes sin^2 -> 1/2),
//! so second-stage splittings use Omega2/2 as the effective amplitude and
//! the detuning that realizes the magic mixing angle is
//! g*Omega2/sqrt(32). The reference parameter table is consistent with
//! this: its magic-set frequency step is 1444 Hz = g*Omega2/sqrt(32) for
//! the D drive.

use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};
use crate::spin::{ManifoldLabel, SpinManifold};

/// One rf drive stage: carrier frequency, nominal amplitude (the Omega of
/// the drive Hamiltonian, before the g-factor), detuning against the
/// reference splitting of its stage, and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveStage {
    /// Drive frequency, Hz. Stage 1: w1 = w0 - Delta1. Stage 2: w2 = wbar1 - Delta2.
    pub omega_hz: f64,
    /// Nominal drive amplitude Omega, Hz.
    pub amp_hz: f64,
    /// Detuning against the stage reference, Hz.
    pub delta_hz: f64,
    /// Drive phase, rad.
    pub phase_rad: f64,
}

impl DriveStage {
    pub fn validate(&self) -> Result<()> {
        if self.amp_hz < 0.0 {
            return Err(CoreError::InvalidParameter {
                name: "Omega",
                reason: format!("drive amplitude must be >= 0, got {}", self.amp_hz),
            });
        }
        if !self.omega_hz.is_finite() || !self.delta_hz.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "omega/Delta",
                reason: "drive frequency and detuning must be finite".into(),
            });
        }
        Ok(())
    }
}

/// Dressed quantum numbers of the probed artificial transition,
/// half-integers stored as floats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTransition {
    pub m0_s: f64,
    pub m1_s: f64,
    pub m2_s: f64,
    pub m0_d: f64,
    pub m1_d: f64,
    pub m2_d: f64,
}

impl TargetTransition {
    /// The reference artificial transition:
    /// |S, m0=-1/2, m1=1/2, m2=1/2> <-> |D, m0=-3/2, m1=1/2, m2=1/2>.
    pub fn reference() -> Self {
        Self {
            m0_s: -0.5,
            m1_s: 0.5,
            m2_s: 0.5,
            m0_d: -1.5,
            m1_d: 0.5,
            m2_d: 0.5,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            m0_s: -self.m0_s,
            m1_s: -self.m1_s,
            m2_s: -self.m2_s,
            m0_d: -self.m0_d,
            m1_d: -self.m1_d,
            m2_d: -self.m2_d,
        }
    }

    fn validate(&self) -> Result<()> {
        let checks = [
            ("m_S", self.m0_s, 0.5),
            ("m_S", self.m1_s, 0.5),
            ("m_S", self.m2_s, 0.5),
            ("m_D", self.m0_d, 2.5),
            ("m_D", self.m1_d, 2.5),
            ("m_D", self.m2_d, 2.5),
        ];
        for (name, m, j) in checks {
            let twice = 2.0 * m;
            if twice.fract() != 0.0 || (twice as i64).rem_euclid(2) != 1 || m.abs() > j {
                return Err(CoreError::InvalidParameter {
                    name,
                    reason: format!("{m} is not a valid half-integer quantum number for J = {j}"),
                });
            }
        }
        Ok(())
    }
}

/// Full drive configuration: static field plus two drive stages per
/// manifold, the optical probe coupling, and the target quantum numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CddParameterSet {
    pub b0_tesla: f64,
    pub s: SpinManifold,
    pub d: SpinManifold,
    pub stage1_s: DriveStage,
    pub stage2_s: DriveStage,
    pub stage1_d: DriveStage,
    pub stage2_d: DriveStage,
    /// Optical Rabi frequency of the probe laser, Hz.
    pub laser_omega_hz: f64,
    pub target: TargetTransition,
    /// Bare Zeeman splittings at B0, Hz (derived at construction).
    pub omega0_s_hz: f64,
    pub omega0_d_hz: f64,
}

/// Reference drive amplitudes (Hz): Omega_S1, Omega_D1, Omega_S2, Omega_D2.
pub const TABLE_AMP_S1: f64 = 46_862.0;
pub const TABLE_AMP_D1: f64 = 115_446.0;
pub const TABLE_AMP_S2: f64 = 3_469.0;
pub const TABLE_AMP_D2: f64 = 6_809.0;
/// Reference first-stage S drive frequency (Hz); fixes B0.
pub const TABLE_OMEGA_S1: f64 = 10_002_089.0;
/// Reference first-stage D drive frequency as printed (Hz). Differs from
/// g_D mu_B B0 / h by about 1.9 kHz; kept for waveform synthesis.
pub const TABLE_OMEGA_D1: f64 = 5_994_834.0;
/// Second-stage drive frequencies of the two printed parameter sets (Hz).
pub const TABLE_OMEGA_S2_RESONANT: f64 = 46_915.0;
pub const TABLE_OMEGA_D2_RESONANT: f64 = 69_287.0;
pub const TABLE_OMEGA_S2_MAGIC: f64 = 46_951.0;
pub const TABLE_OMEGA_D2_MAGIC: f64 = 70_731.0;

impl CddParameterSet {
    /// Build a self-consistent set from detunings: carriers are derived
    /// as w1 = w0 - Delta1 and w2 = wbar1 - Delta2.
    #[allow(clippy::too_many_arguments)]
    pub fn from_detunings(
        consts: &PhysicalConstants,
        b0_tesla: f64,
        s: SpinManifold,
        d: SpinManifold,
        amps: [f64; 4],   // Omega_S1, Omega_S2, Omega_D1, Omega_D2
        deltas: [f64; 4], // Delta_1S, Delta_2S, Delta_1D, Delta_2D
        laser_omega_hz: f64,
        target: TargetTransition,
    ) -> Result<Self> {
        let field = crate::spin::StaticField::new(b0_tesla)?;
        let omega0_s = s.splitting_hz(&field, consts);
        let omega0_d = d.splitting_hz(&field, consts);
        let mk = |omega0: f64, amp: f64, delta: f64| DriveStage {
            omega_hz: omega0 - delta,
            amp_hz: amp,
            delta_hz: delta,
            phase_rad: 0.0,
        };
        let stage1_s = mk(omega0_s, amps[0], deltas[0]);
        let stage1_d = mk(omega0_d, amps[2], deltas[2]);
        let wbar1_s = dressed_splitting(amps[0], deltas[0], s.g);
        let wbar1_d = dressed_splitting(amps[2], deltas[2], d.g);
        let stage2_s = mk(wbar1_s, amps[1], deltas[1]);
        let stage2_d = mk(wbar1_d, amps[3], deltas[3]);
        let set = Self {
            b0_tesla,
            s,
            d,
            stage1_s,
            stage2_s,
            stage1_d,
            stage2_d,
            laser_omega_hz,
            target,
            omega0_s_hz: omega0_s,
            omega0_d_hz: omega0_d,
        };
        set.validate()?;
        Ok(set)
    }

    /// Doubly-resonant reference set: B0 back-solved from the printed
    /// S-drive frequency, all detunings zero, reference amplitudes.
    pub fn resonant(consts: &PhysicalConstants) -> Self {
        let g_s = crate::constants::G_FACTOR_S;
        let b0 = TABLE_OMEGA_S1 / (g_s * consts.mu_b_over_h);
        Self::from_detunings(
            consts,
            b0,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [0.0; 4],
            5.0,
            TargetTransition::reference(),
        )
        .expect("reference resonant set is valid")
    }

    /// Magic-mixing-angle set: second D stage detuned to the magic angle
    /// (Delta = -g Omega2 / sqrt(32), the sign the reference table uses),
    /// second S stage offset by the printed -36 Hz compensation step.
    pub fn magic(consts: &PhysicalConstants) -> Self {
        let g_s = crate::constants::G_FACTOR_S;
        let g_d = crate::constants::G_FACTOR_D;
        let b0 = TABLE_OMEGA_S1 / (g_s * consts.mu_b_over_h);
        let wbar1_s = dressed_splitting(TABLE_AMP_S1, 0.0, g_s);
        let delta2_s = wbar1_s - TABLE_OMEGA_S2_MAGIC;
        let delta2_d = -g_d * TABLE_AMP_D2 / 32f64.sqrt();
        Self::from_detunings(
            consts,
            b0,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [0.0, delta2_s, 0.0, delta2_d],
            5.0,
            TargetTransition::reference(),
        )
        .expect("reference magic set is valid")
    }

    pub fn stage1(&self, m: ManifoldLabel) -> &DriveStage {
        match m {
            ManifoldLabel::S => &self.stage1_s,
            ManifoldLabel::D => &self.stage1_d,
        }
    }

    pub fn stage2(&self, m: ManifoldLabel) -> &DriveStage {
        match m {
            ManifoldLabel::S => &self.stage2_s,
            ManifoldLabel::D => &self.stage2_d,
        }
    }

    pub fn manifold(&self, m: ManifoldLabel) -> &SpinManifold {
        match m {
            ManifoldLabel::S => &self.s,
            ManifoldLabel::D => &self.d,
        }
    }

    pub fn bare_splitting_hz(&self, m: ManifoldLabel) -> f64 {
        match m {
            ManifoldLabel::S => self.omega0_s_hz,
            ManifoldLabel::D => self.omega0_d_hz,
        }
    }

    /// First-stage dressed splitting wbar1, Hz.
    pub fn stage1_splitting_hz(&self, m: ManifoldLabel) -> f64 {
        let st = self.stage1(m);
        dressed_splitting(st.amp_hz, st.delta_hz, self.manifold(m).g)
    }

    /// Second-stage dressed splitting wbar2, Hz. Effective amplitude is
    /// Omega2/2 (two-tone demodulation loss; see module docs).
    pub fn stage2_splitting_hz(&self, m: ManifoldLabel) -> f64 {
        let st = self.stage2(m);
        dressed_splitting(st.amp_hz / 2.0, st.delta_hz, self.manifold(m).g)
    }

    /// Transverse Rabi frequency of stage 2 in the dressed frame,
    /// g*Omega2/4, Hz.
    pub fn stage2_effective_rabi_hz(&self, m: ManifoldLabel) -> f64 {
        self.manifold(m).g * self.stage2(m).amp_hz / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        for st in [&self.stage1_s, &self.stage2_s, &self.stage1_d, &self.stage2_d] {
            st.validate()?;
        }
        self.target.validate()?;
        // hierarchy w2 << w1 per manifold
        for m in [ManifoldLabel::S, ManifoldLabel::D] {
            let w1 = self.stage1(m).omega_hz;
            let w2 = self.stage2(m).omega_hz;
            if self.stage2(m).amp_hz > 0.0 && w2.abs() >= w1.abs() / 10.0 {
                return Err(CoreError::InvalidParameter {
                    name: "omega_2",
                    reason: format!(
                        "coupling hierarchy violated on {m}: w2 = {w2} Hz must be below w1/10 = {} Hz",
                        w1.abs() / 10.0
                    ),
                });
            }
        }
        // optical coupling must stay below the weakest second-stage Rabi
        let min_rabi2 = self
            .stage2_effective_rabi_hz(ManifoldLabel::S)
            .min(self.stage2_effective_rabi_hz(ManifoldLabel::D));
        if min_rabi2 > 0.0 && self.laser_omega_hz * 10.0 > min_rabi2 {
            return Err(CoreError::InvalidParameter {
                name: "laser_Omega",
                reason: format!(
                    "optical coupling {} Hz too strong; must be at most a tenth of the weakest \
                     second-stage Rabi frequency {} Hz",
                    self.laser_omega_hz, min_rabi2
                ),
            });
        }
        Ok(())
    }
}

/// Dressed-ladder splitting sqrt((g Omega / 2)^2 + Delta^2), Hz.
pub fn dressed_splitting(omega_amp_hz: f64, delta_hz: f64, g: f64) -> f64 {
    let half_rabi = g * omega_amp_hz / 2.0;
    (half_rabi * half_rabi + delta_hz * delta_hz).sqrt()
}

/// Mixing angle cos(theta) = Delta / wbar.
pub fn mixing_angle(delta_hz: f64, omega_bar_hz: f64) -> Result<f64> {
    if !(omega_bar_hz > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "omega_bar",
            reason: format!("must be positive, got {omega_bar_hz}"),
        });
    }
    if delta_hz.abs() > omega_bar_hz * (1.0 + 1e-12) {
        return Err(CoreError::MixingAngleRange {
            delta: delta_hz,
            omega_bar: omega_bar_hz,
        });
    }
    Ok((delta_hz / omega_bar_hz).clamp(-1.0, 1.0))
}

/// Mixing-angle cosines per stage and manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngles {
    pub cos_s1: f64,
    pub cos_s2: f64,
    pub cos_d1: f64,
    pub cos_d2: f64,
}

impl MixingAngles {
    pub fn from_set(set: &CddParameterSet) -> Result<Self> {
        Ok(Self {
            cos_s1: mixing_angle(
                set.stage1_s.delta_hz,
                set.stage1_splitting_hz(ManifoldLabel::S),
            )?,
            cos_s2: mixing_angle(
                set.stage2_s.delta_hz,
                set.stage2_splitting_hz(ManifoldLabel::S),
            )?,
            cos_d1: mixing_angle(
                set.stage1_d.delta_hz,
                set.stage1_splitting_hz(ManifoldLabel::D),
            )?,
            cos_d2: mixing_angle(
                set.stage2_d.delta_hz,
                set.stage2_splitting_hz(ManifoldLabel::D),
            )?,
        })
    }

    /// Bare-state reference: all cosines one.
    pub fn bare() -> Self {
        Self {
            cos_s1: 1.0,
            cos_s2: 1.0,
            cos_d1: 1.0,
            cos_d2: 1.0,
        }
    }
}

/// Linear magnetic sensitivity of the target artificial transition,
/// Hz per nT:
/// (mu_B/h) [cos(t1D) cos(t2D) g_D m2_D - cos(t1S) cos(t2S) g_S m2_S].
pub fn zeeman_sensitivity(
    set: &CddParameterSet,
    angles: &MixingAngles,
    consts: &PhysicalConstants,
) -> f64 {
    let unit = consts.mu_b_over_h_per_nt();
    unit * (angles.cos_d1 * angles.cos_d2 * set.d.g * set.target.m2_d
        - angles.cos_s1 * angles.cos_s2 * set.s.g * set.target.m2_s)
}

/// Quadrupole-shift suppression factor of the doubly-dressed D level:
/// (1 - 3 cos^2 t1D)(1 - 3 cos^2 t2D).
pub fn qps_suppression_factor(cos_theta1_d: f64, cos_theta2_d: f64) -> f64 {
    (1.0 - 3.0 * cos_theta1_d * cos_theta1_d) * (1.0 - 3.0 * cos_theta2_d * cos_theta2_d)
}

/// Magic-angle detuning under the single-drive convention (effective
/// Rabi g Omega / 2): Delta = g Omega2 / sqrt(8) = (g Omega2 / 2) / sqrt(2).
///
/// Note: under the two-tone demodulation convention of this crate the
/// detuning that actually realizes cos^2(theta2) = 1/3 is half this
/// value, g Omega2 / sqrt(32); the reference table's magic set and the
/// numeric magic search both agree with the halved value. This function
/// keeps the printed formula; `magic_detuning_demodulated` returns the
/// value consistent with the rest of the crate.
pub fn magic_detuning(omega2_amp_hz: f64, g: f64) -> f64 {
    g * omega2_amp_hz / 8f64.sqrt()
}

/// Magic second-stage detuning under the Omega2/2 demodulation
/// convention: g Omega2 / sqrt(32). Satisfies
/// cos^2(Delta / wbar2(Delta)) = 1/3 with wbar2 from
/// `CddParameterSet::stage2_splitting_hz`.
pub fn magic_detuning_demodulated(omega2_amp_hz: f64, g: f64) -> f64 {
    g * omega2_amp_hz / 32f64.sqrt()
}

/// Second-stage S detuning that zeroes the net linear Zeeman sensitivity
/// of the target transition, holding everything else fixed. Bisection to
/// 1e-3 Hz.
pub fn compensation_detuning_s(set: &CddParameterSet, consts: &PhysicalConstants) -> Result<f64> {
    let sens_at = |delta2_s: f64| -> Result<f64> {
        let mut trial = set.clone();
        trial.stage2_s.delta_hz = delta2_s;
        trial.stage2_s.omega_hz = trial.stage1_splitting_hz(ManifoldLabel::S) - delta2_s;
        let angles = MixingAngles::from_set(&trial)?;
        Ok(zeeman_sensitivity(&trial, &angles, consts))
    };

    // The sensitivity depends on Delta2S only through
    // cos(t2S) = Delta/sqrt(A^2+Delta^2); if that lever arm vanishes the
    // equation is either already solved or unsolvable.
    let lever = {
        let a = MixingAngles::from_set(set)?;
        a.cos_s1 * set.s.g * set.target.m2_s
    };
    let s0 = sens_at(0.0)?;
    if lever.abs() < 1e-15 {
        if s0.abs() < 1e-12 {
            return Ok(0.0);
        }
        return Err(CoreError::NoSignChange {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        });
    }

    // cos(t2S) is bounded by +-1, so bracket where it is essentially saturated.
    let a2 = set.stage2_effective_rabi_hz(ManifoldLabel::S);
    let (mut lo, mut hi) = (-50.0 * a2, 50.0 * a2);
    let (s_lo, s_hi) = (sens_at(lo)?, sens_at(hi)?);
    if s_lo * s_hi > 0.0 {
        return Err(CoreError::NoSignChange { lo, hi });
    }
    let mut f_lo = s_lo;
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let f_mid = sens_at(mid)?;
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Frequency offset of the target artificial transition from the
/// zero-field electronic line, Hz.
///
/// Per manifold the anchored ladder energy is
///   E(m0, m1, m2) = m0 w1 + m1 w2 + m2 wbar2
///                 = m0 w0 - m0 Delta1 + m1 wbar1 - m1 Delta2 + m2 wbar2,
/// and the offset is E_D - E_S. Positive offsets lie above the
/// zero-field line. With all drives off and m1, m2 tracking m0 through
/// the undressed limit this reduces to the bare Zeeman offset
/// m0_D w0_D - m0_S w0_S.
pub fn artificial_transition_frequency(set: &CddParameterSet) -> f64 {
    let part = |m0: f64, m1: f64, m2: f64, m: ManifoldLabel| -> f64 {
        m0 * set.stage1(m).omega_hz + m1 * set.stage2(m).omega_hz + m2 * set.stage2_splitting_hz(m)
    };
    let t = &set.target;
    part(t.m0_d, t.m1_d, t.m2_d, ManifoldLabel::D) - part(t.m0_s, t.m1_s, t.m2_s, ManifoldLabel::S)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn table_stage1_splittings_within_1hz() {
        // g Omega / 2 with the reference amplitudes reproduces the printed
        // resonant second-stage drive frequencies.
        let s = dressed_splitting(TABLE_AMP_S1, 0.0, crate::constants::G_FACTOR_S);
        let d = dressed_splitting(TABLE_AMP_D1, 0.0, crate::constants::G_FACTOR_D);
        assert!((s - TABLE_OMEGA_S2_RESONANT).abs() < 1.0, "S: {s}");
        assert!((d - TABLE_OMEGA_D2_RESONANT).abs() < 1.0, "D: {d}");
    }

    #[test]
    fn resonant_splitting_is_half_rabi() {
        let x = 1234.5;
        assert_abs_diff_eq!(dressed_splitting(2.0 * x / 1.7, 0.0, 1.7), x, epsilon = 1e-9);
    }

    #[test]
    fn mixing_angle_limits() {
        assert_abs_diff_eq!(mixing_angle(0.0, 100.0).unwrap(), 0.0);
        assert_abs_diff_eq!(mixing_angle(100.0, 100.0).unwrap(), 1.0);
        assert!(mixing_angle(101.0, 100.0).is_err());
        // magic case: cos^2 = 1/3 at Delta/wbar = 1/sqrt(3)
        let c = mixing_angle(100.0 / 3f64.sqrt(), 100.0).unwrap();
        assert_abs_diff_eq!(c * c, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zeeman_sensitivity_resonant_zero() {
        let set = CddParameterSet::resonant(&consts());
        let angles = MixingAngles::from_set(&set).unwrap();
        assert_abs_diff_eq!(zeeman_sensitivity(&set, &angles, &consts()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zeeman_sensitivity_bare_reference() {
        // cos = 1 everywhere, m2 = -1/2 on both manifolds: the bare
        // |S,-1/2> <-> |D,-1/2> sensitivity, 5.6 Hz/nT.
        let mut set = CddParameterSet::resonant(&consts());
        set.target.m2_s = -0.5;
        set.target.m2_d = -0.5;
        let sens = zeeman_sensitivity(&set, &MixingAngles::bare(), &consts());
        // oracle: (g_D - g_S) * (-1/2) * 13.996 Hz/nT
        let oracle = (crate::constants::G_FACTOR_D - crate::constants::G_FACTOR_S)
            * (-0.5)
            * consts().mu_b_over_h_per_nt();
        assert_abs_diff_eq!(sens, oracle, epsilon = 1e-9);
        assert!((sens - 5.6).abs() < 0.05, "sens = {sens}");
    }

    #[test]
    fn zeeman_sensitivity_one_percent_mismatch() {
        // 1% mixing-angle mismatch on both S stages, resonant target:
        // suppression to order 1e-4 of the bare 5.6 Hz/nT.
        let set = CddParameterSet::resonant(&consts());
        let angles = MixingAngles {
            cos_s1: 0.01,
            cos_s2: 0.01,
            cos_d1: 0.0,
            cos_d2: 0.0,
        };
        let sens = zeeman_sensitivity(&set, &angles, &consts()).abs();
        let ratio = sens / 5.6;
        assert!(ratio > 1e-5 && ratio < 1e-3, "ratio = {ratio}");
    }

    #[test]
    fn qps_factor_limits() {
        assert_abs_diff_eq!(qps_suppression_factor(0.0, 0.0), 1.0);
        let magic = (1.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(qps_suppression_factor(0.0, magic), 0.0, epsilon = 1e-15);
        // 1% angular mismatch off magic: |factor| around 3e-2
        let theta = magic.acos() * 1.01;
        let f = qps_suppression_factor(0.0, theta.cos()).abs();
        assert!(f > 1e-2 && f < 5e-2, "factor = {f}");
    }

    #[test]
    fn magic_detuning_values() {
        let d = magic_detuning(TABLE_AMP_D2, crate::constants::G_FACTOR_D);
        assert!((d - 2889.7).abs() < 0.1, "printed-formula value: {d}");
        assert_abs_diff_eq!(magic_detuning(0.0, crate::constants::G_FACTOR_D), 0.0);
        // The demodulated value matches the reference table's magic-set
        // frequency step 70731 - 69287 = 1444 Hz.
        let dd = magic_detuning_demodulated(TABLE_AMP_D2, crate::constants::G_FACTOR_D);
        assert!((dd - 1444.0).abs() < 1.0, "demodulated value: {dd}");
        assert_abs_diff_eq!(dd, d / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn magic_detuning_demodulated_hits_magic_angle() {
        let set = CddParameterSet::magic(&consts());
        let angles = MixingAngles::from_set(&set).unwrap();
        assert_abs_diff_eq!(angles.cos_d2 * angles.cos_d2, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn compensation_resonant_is_zero() {
        let set = CddParameterSet::resonant(&consts());
        assert_abs_diff_eq!(
            compensation_detuning_s(&set, &consts()).unwrap(),
            0.0,
            epsilon = 1e-3
        );
    }

    #[test]
    fn compensation_magic_set_tens_of_hz() {
        // Representative residual stage-1 detunings (of the size effective
        // carrier shifts produce) make the magic set's leftover linear
        // sensitivity compensable with a Delta2S of tens of Hz.
        let c = consts();
        let mut set = CddParameterSet::from_detunings(
            &c,
            CddParameterSet::resonant(&c).b0_tesla,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [
                200.0,
                0.0,
                20.0,
                -magic_detuning_demodulated(TABLE_AMP_D2, crate::constants::G_FACTOR_D),
            ],
            5.0,
            TargetTransition::reference(),
        )
        .unwrap();
        let delta = compensation_detuning_s(&set, &c).unwrap();
        assert!(delta.abs() > 5.0 && delta.abs() < 500.0, "delta = {delta}");
        // Feeding the solution back nulls the sensitivity.
        set.stage2_s.delta_hz = delta;
        set.stage2_s.omega_hz = set.stage1_splitting_hz(ManifoldLabel::S) - delta;
        let angles = MixingAngles::from_set(&set).unwrap();
        let resid = zeeman_sensitivity(&set, &angles, &consts());
        assert!(resid.abs() < 1e-3, "residual = {resid}");
    }

    #[test]
    fn compensation_toy_closed_form() {
        // Symmetric toy: choose stage-1 angles so the required cos(t2S)
        // has the closed form below, then check the root-finder against it.
        let c = consts();
        let set = CddParameterSet::from_detunings(
            &c,
            CddParameterSet::resonant(&c).b0_tesla,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [300.0, 0.0, 300.0, 500.0],
            5.0,
            TargetTransition::reference(),
        )
        .unwrap();
        let angles = MixingAngles::from_set(&set).unwrap();
        let needed_cos2s = angles.cos_d1 * angles.cos_d2 * set.d.g * set.target.m2_d
            / (angles.cos_s1 * set.s.g * set.target.m2_s);
        let a2 = set.stage2_effective_rabi_hz(ManifoldLabel::S);
        let analytic = needed_cos2s * a2 / (1.0 - needed_cos2s * needed_cos2s).sqrt();
        let solved = compensation_detuning_s(&set, &c).unwrap();
        assert_abs_diff_eq!(solved, analytic, epsilon = 1e-3);
    }

    #[test]
    fn compensation_unsolvable_reported() {
        // Resonant S stage 1 (zero lever arm) with a detuned D part:
        // nothing to compensate with.
        let c = consts();
        let set = CddParameterSet::from_detunings(
            &c,
            CddParameterSet::resonant(&c).b0_tesla,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [0.0, 0.0, 300.0, 500.0],
            5.0,
            TargetTransition::reference(),
        )
        .unwrap();
        assert!(matches!(
            compensation_detuning_s(&set, &c),
            Err(CoreError::NoSignChange { .. })
        ));
    }

    #[test]
    fn artificial_transition_sign_symmetry() {
        let mut set = CddParameterSet::magic(&consts());
        let f = artificial_transition_frequency(&set);
        set.target = set.target.negated();
        assert_abs_diff_eq!(artificial_transition_frequency(&set), -f, epsilon = 1e-9);
    }

    #[test]
    fn artificial_transition_resonant_assembly() {
        // Scalar assembly from the ladder values.
        let set = CddParameterSet::resonant(&consts());
        let t = set.target;
        let expect = t.m0_d * set.stage1_d.omega_hz
            + t.m1_d * set.stage2_d.omega_hz
            + t.m2_d * set.stage2_splitting_hz(ManifoldLabel::D)
            - (t.m0_s * set.stage1_s.omega_hz
                + t.m1_s * set.stage2_s.omega_hz
                + t.m2_s * set.stage2_splitting_hz(ManifoldLabel::S));
        assert_abs_diff_eq!(artificial_transition_frequency(&set), expect, epsilon = 1e-9);
        // bare-limit anchor: the m0 carrier part dominates
        let bare = t.m0_d * set.omega0_d_hz - t.m0_s * set.omega0_s_hz;
        assert!((artificial_transition_frequency(&set) - bare).abs() < 1.5e5);
    }

    #[test]
    fn hierarchy_validation() {
        let c = consts();
        let err = CddParameterSet::from_detunings(
            &c,
            3.57e-4,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            // huge stage-2 detuning pushes w2 above w1/10
            [0.0, -2e6, 0.0, 0.0],
            5.0,
            TargetTransition::reference(),
        );
        assert!(err.is_err());
        let err2 = CddParameterSet::from_detunings(
            &c,
            3.57e-4,
            SpinManifold::s_default(),
            SpinManifold::d_default(),
            [TABLE_AMP_S1, TABLE_AMP_S2, TABLE_AMP_D1, TABLE_AMP_D2],
            [0.0; 4],
            500.0, // violates the optical hierarchy
            TargetTransition::reference(),
        );
        assert!(err2.is_err());
    }

    proptest! {
        #[test]
        fn splitting_dominates_components(omega in 0.0f64..1e6, delta in -1e5f64..1e5, g in 0.5f64..2.5) {
            let w = dressed_splitting(omega, delta, g);
            prop_assert!(w >= (g * omega / 2.0).max(delta.abs()) - 1e-9);
        }

        #[test]
        fn qps_factor_symmetric(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0) {
            let a = qps_suppression_factor(c1, c2);
            let b = qps_suppression_factor(c2, c1);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn sensitivity_linear_in_each_cosine(scale in 0.1f64..3.0) {
            let c = PhysicalConstants::default();
            let set = CddParameterSet::resonant(&c);
            let base = MixingAngles { cos_s1: 0.05, cos_s2: 0.02, cos_d1: 0.03, cos_d2: 0.04 };
            let s0 = zeeman_sensitivity(&set, &base, &c);
            // scaling one cosine scales only its manifold's term
            let mut scaled = base;
            scaled.cos_d1 *= scale;
            let s1 = zeeman_sensitivity(&set, &scaled, &c);
            let d_term = base.cos_d1 * base.cos_d2 * set.d.g * set.target.m2_d * c.mu_b_over_h_per_nt();
            prop_assert!((s1 - (s0 + (scale - 1.0) * d_term)).abs() < 1e-9);
        }
    }
}
