//! Physical constants and the default ion species (40Ca+).
//!
//! Energies are kept in frequency units (H/h, Hz) throughout the crate,
//! so the Bohr magneton is stored directly as mu_B/h in Hz/T.

/// Physical constants used across the crate. All fields are overridable
/// through the run configuration; the defaults are CODATA values plus
/// literature values for 40Ca+.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    /// Bohr magneton over Planck constant, Hz/T.
    pub mu_b_over_h: f64,
    /// Elementary charge, C.
    pub electron_charge: f64,
    /// Bohr radius, m.
    pub bohr_radius: f64,
    /// Ion mass, kg (default 40Ca+).
    pub ion_mass: f64,
    /// Coulomb coupling e^2/(4 pi eps0), N m^2.
    pub coulomb_constant_e2: f64,
    /// Planck constant, J s.
    pub planck_h: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            mu_b_over_h: 1.399_624_493_61e10,
            electron_charge: 1.602_176_634e-19,
            bohr_radius: 5.291_772_109_03e-11,
            // 40Ca neutral mass minus one electron mass.
            ion_mass: 6.635_852_0e-26,
            coulomb_constant_e2: 2.307_077_55e-28,
            planck_h: 6.626_070_15e-34,
        }
    }
}

impl PhysicalConstants {
    /// mu_B/h expressed in Hz/nT, the natural unit for field sensitivities.
    pub fn mu_b_over_h_per_nt(&self) -> f64 {
        self.mu_b_over_h * 1e-9
    }

    /// Quadrupole moment Theta given in units of e*a0^2, converted to C m^2.
    pub fn quadrupole_moment_si(&self, theta_e_a0sq: f64) -> f64 {
        theta_e_a0sq * self.electron_charge * self.bohr_radius * self.bohr_radius
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        let fields = [
            ("mu_b_over_h", self.mu_b_over_h),
            ("electron_charge", self.electron_charge),
            ("bohr_radius", self.bohr_radius),
            ("ion_mass", self.ion_mass),
            ("coulomb_constant_e2", self.coulomb_constant_e2),
            ("planck_h", self.planck_h),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(crate::error::CoreError::InvalidParameter {
                    name,
                    reason: format!("must be strictly positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Default g-factors for 40Ca+. Not printed in most experimental tables;
/// these literature values reproduce the second-stage drive frequencies
/// of the reference parameter sets exactly.
pub const G_FACTOR_S: f64 = 2.002_256_64;
pub const G_FACTOR_D: f64 = 1.200_334_0;

/// Default quadrupole moment of the 3d D5/2 level of 40Ca+, in e*a0^2.
pub const QUADRUPOLE_MOMENT_E_A0SQ: f64 = 1.83;

/// D5/2 natural lifetime, s.
pub const D_LIFETIME_S: f64 = 1.168;

/// Optical clock transition frequency of 40Ca+ (729 nm), Hz.
pub const CLOCK_FREQUENCY_HZ: f64 = 4.110_421_297_76e14;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_b_matches_codata() {
        let c = PhysicalConstants::default();
        assert!((c.mu_b_over_h / 1.3996245e10 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn all_defaults_positive() {
        PhysicalConstants::default().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive() {
        let mut c = PhysicalConstants::default();
        c.ion_mass = 0.0;
        assert!(c.validate().is_err());
    }
}
