//! Angular-momentum algebra and the bare, drive and quadrupole
//! Hamiltonians of one Zeeman manifold.
//!
//! Matrix basis convention: index 0 carries m = +J and indices descend to
//! m = -J, so `jz` is diagonal with entries J, J-1, ..., -J. All
//! Hamiltonians are returned in frequency units (H/h, Hz); trigonometric
//! arguments are 2*pi*f*t with f in Hz and t in s.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};

/// Half-integer spin stored as 2J to keep the representation exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfSpin {
    twice_j: u32,
}

impl HalfSpin {
    /// Construct from 2J. `HalfSpin::from_twice(5)` is J = 5/2.
    pub fn from_twice(twice_j: u32) -> Self {
        Self { twice_j }
    }

    /// Construct from a float J, rejecting non-half-integer input.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice >= 0.0) || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(CoreError::InvalidSpin {
                twice_j: (2.0 * j) as i64,
            });
        }
        Ok(Self {
            twice_j: twice as u32,
        })
    }

    pub fn value(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice_j
    }

    /// Dimension of the representation, 2J + 1.
    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    /// m quantum numbers in basis order (descending from +J to -J).
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let j = self.value();
        (0..self.dim()).map(move |i| j - i as f64)
    }
}

/// Which Zeeman manifold an object refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldLabel {
    S,
    D,
}

impl std::fmt::Display for ManifoldLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManifoldLabel::S => write!(f, "S"),
            ManifoldLabel::D => write!(f, "D"),
        }
    }
}

/// One Zeeman manifold: spin, g-factor and label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinManifold {
    pub label: ManifoldLabel,
    pub j: HalfSpin,
    pub g: f64,
}

impl SpinManifold {
    pub fn new(label: ManifoldLabel, j: HalfSpin, g: f64) -> Result<Self> {
        if !(g > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "g",
                reason: format!("g-factor must be positive, got {g}"),
            });
        }
        Ok(Self { label, j, g })
    }

    /// S1/2 manifold with the default 40Ca+ g-factor.
    pub fn s_default() -> Self {
        Self {
            label: ManifoldLabel::S,
            j: HalfSpin::from_twice(1),
            g: crate::constants::G_FACTOR_S,
        }
    }

    /// D5/2 manifold with the default 40Ca+ g-factor.
    pub fn d_default() -> Self {
        Self {
            label: ManifoldLabel::D,
            j: HalfSpin::from_twice(5),
            g: crate::constants::G_FACTOR_D,
        }
    }

    pub fn dim(&self) -> usize {
        self.j.dim()
    }

    /// Bare Zeeman splitting between adjacent m levels, Hz.
    pub fn splitting_hz(&self, field: &StaticField, consts: &PhysicalConstants) -> f64 {
        self.g * consts.mu_b_over_h * field.b0_tesla
    }
}

/// Static offset field along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticField {
    pub b0_tesla: f64,
}

impl StaticField {
    pub fn new(b0_tesla: f64) -> Result<Self> {
        if !(b0_tesla > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "B0",
                reason: format!("static field must be positive, got {b0_tesla}"),
            });
        }
        Ok(Self { b0_tesla })
    }

    /// Back-solve B0 from a measured S-manifold Zeeman splitting.
    pub fn from_s_splitting(splitting_hz: f64, g_s: f64, consts: &PhysicalConstants) -> Result<Self> {
        Self::new(splitting_hz / (g_s * consts.mu_b_over_h))
    }
}

/// Dimensionless angular-momentum matrices for one spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub jx: DMatrix<Complex64>,
    pub jy: DMatrix<Complex64>,
    pub jz: DMatrix<Complex64>,
}

/// Build jx, jy, jz from the ladder-operator construction.
///
/// jz is diagonal with entries J, J-1, ..., -J; the raising element is
/// <m+1|J+|m> = sqrt(J(J+1) - m(m+1)).
pub fn build_spin_operators(j: HalfSpin) -> SpinOperators {
    let dim = j.dim();
    let jv = j.value();
    let mut jz = DMatrix::<Complex64>::zeros(dim, dim);
    let mut jp = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, m) in j.m_values().enumerate() {
        jz[(i, i)] = Complex64::new(m, 0.0);
        if i > 0 {
            // row i-1 is m+1
            let elem = (jv * (jv + 1.0) - m * (m + 1.0)).sqrt();
            jp[(i - 1, i)] = Complex64::new(elem, 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm).scale(0.5);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    SpinOperators { jx, jy, jz }
}

/// H0/h for one manifold: g * (mu_B/h) * B0 * Jz, in Hz. Diagonal, traceless.
pub fn zeeman_hamiltonian(
    manifold: &SpinManifold,
    field: &StaticField,
    consts: &PhysicalConstants,
) -> DMatrix<Complex64> {
    let ops = build_spin_operators(manifold.j);
    ops.jz.scale(manifold.splitting_hz(field, consts))
}

/// Time-dependent coefficient multiplying Jx for one manifold, Hz:
/// g*Omega1*cos(2 pi w1 t) - g*Omega2*sin(2 pi w1 t)*cos(2 pi w2 t).
///
/// Colinear drive geometry is assumed; both drive tones act along x.
pub fn drive_field(
    g: f64,
    omega1_hz: f64,
    amp1_hz: f64,
    omega2_hz: f64,
    amp2_hz: f64,
    t: f64,
) -> f64 {
    let ph1 = std::f64::consts::TAU * omega1_hz * t;
    let ph2 = std::f64::consts::TAU * omega2_hz * t;
    g * amp1_hz * ph1.cos() - g * amp2_hz * ph1.sin() * ph2.cos()
}

/// Quadrupole Hamiltonian of the D manifold for an axial field gradient,
/// in Hz: (Theta/h) * (3/8) * dEz/dz * (J(J+1) - 3 m^2) per m level.
///
/// `theta_q` is the quadrupole moment in C m^2 and `gradient` in V/m^2.
/// Sign convention: a positive gradient is the confining curvature
/// m*wz^2/e of the trap plus the (co-confining) neighbour-ion term.
pub fn quadrupole_hamiltonian(
    manifold: &SpinManifold,
    theta_q: f64,
    gradient: f64,
    consts: &PhysicalConstants,
) -> Result<DMatrix<Complex64>> {
    if manifold.label != ManifoldLabel::D {
        return Err(CoreError::NoQuadrupole(manifold.label));
    }
    if !gradient.is_finite() {
        return Err(CoreError::InvalidParameter {
            name: "gradient",
            reason: "must be finite".into(),
        });
    }
    let dim = manifold.dim();
    let jv = manifold.j.value();
    let scale = theta_q / consts.planck_h * 0.375 * gradient;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, m) in manifold.j.m_values().enumerate() {
        h[(i, i)] = Complex64::new(scale * (jv * (jv + 1.0) - 3.0 * m * m), 0.0);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mat_max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn spin_half_defining_representation() {
        let ops = build_spin_operators(HalfSpin::from_twice(1));
        assert_abs_diff_eq!(ops.jz[(0, 0)].re, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(ops.jz[(1, 1)].re, -0.5, epsilon = 0.0);
        // Pauli/2 off-diagonals
        assert_abs_diff_eq!(ops.jx[(0, 1)].re, 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(ops.jx[(1, 0)].re, 0.5, epsilon = 0.0);
    }

    #[test]
    fn spin_5_2_ladder_element() {
        // Raising from m = 3/2 to 5/2: sqrt(J(J+1) - m(m+1)) = sqrt(5),
        // so the top off-diagonal of jx is sqrt(5)/2.
        let ops = build_spin_operators(HalfSpin::from_twice(5));
        let expect = 5.0_f64.sqrt() / 2.0;
        assert_abs_diff_eq!(ops.jx[(0, 1)].re, expect, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_half_integer() {
        assert!(HalfSpin::new(0.7).is_err());
        assert!(HalfSpin::new(-0.5).is_err());
        assert!(HalfSpin::new(2.5).is_ok());
    }

    fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a * b - b * a
    }

    #[test]
    fn algebra_invariants_for_model_spins() {
        for twice in [1u32, 5] {
            let j = HalfSpin::from_twice(twice);
            let ops = build_spin_operators(j);
            // Hermiticity
            for m in [&ops.jx, &ops.jy, &ops.jz] {
                assert!(mat_max_abs(&(m - m.adjoint())) < 1e-12);
            }
            // [jx, jy] = i jz and cyclic
            let i = Complex64::new(0.0, 1.0);
            assert!(mat_max_abs(&(commutator(&ops.jx, &ops.jy) - ops.jz.map(|z| i * z))) < 1e-12);
            assert!(mat_max_abs(&(commutator(&ops.jy, &ops.jz) - ops.jx.map(|z| i * z))) < 1e-12);
            assert!(mat_max_abs(&(commutator(&ops.jz, &ops.jx) - ops.jy.map(|z| i * z))) < 1e-12);
            // Casimir
            let jv = j.value();
            let casimir = &ops.jx * &ops.jx + &ops.jy * &ops.jy + &ops.jz * &ops.jz;
            let expect = DMatrix::<Complex64>::identity(j.dim(), j.dim())
                .scale(jv * (jv + 1.0));
            assert!(mat_max_abs(&(casimir - expect)) < 1e-12);
        }
    }

    #[test]
    fn zeeman_splitting_from_backsolved_field() {
        // B0 back-solved so the S splitting is 10002089 Hz exactly.
        let consts = PhysicalConstants::default();
        let s = SpinManifold::s_default();
        let field = StaticField::from_s_splitting(10_002_089.0, s.g, &consts).unwrap();
        let h = zeeman_hamiltonian(&s, &field, &consts);
        let split = (h[(0, 0)] - h[(1, 1)]).re;
        assert_abs_diff_eq!(split, 10_002_089.0, epsilon = 1e-3);
        assert!((split / 1e6 - 10.002).abs() < 1e-3);

        // Same field on D: close to 5.9967 MHz, which differs from the
        // printed drive frequency 5994834 Hz by ~1.9 kHz (3e-4 relative).
        let d = SpinManifold::d_default();
        let hd = zeeman_hamiltonian(&d, &field, &consts);
        let split_d = (hd[(0, 0)] - hd[(1, 1)]).re;
        assert!((split_d / 1e6 - 5.9967).abs() < 1e-3);
        let residual = (split_d - 5_994_834.0) / 5_994_834.0;
        assert!(residual.abs() < 5e-4 && residual.abs() > 1e-4);
    }

    #[test]
    fn zeeman_zero_field_limit() {
        // Zero field is rejected by StaticField; the Hamiltonian is linear
        // in B0, so check H(2 B0) = 2 H(B0) elementwise instead.
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let f1 = StaticField::new(3.57e-4).unwrap();
        let f2 = StaticField::new(7.14e-4).unwrap();
        let h1 = zeeman_hamiltonian(&d, &f1, &consts);
        let h2 = zeeman_hamiltonian(&d, &f2, &consts);
        assert!(mat_max_abs(&(h2 - h1.scale(2.0))) < 1e-9);
        assert!(StaticField::new(0.0).is_err());
    }

    #[test]
    fn zeeman_trace_zero() {
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let field = StaticField::new(3.57e-4).unwrap();
        let h = zeeman_hamiltonian(&d, &field, &consts);
        assert!(h.trace().norm() < 1e-6);
    }

    #[test]
    fn drive_field_limits() {
        // Omega2 = 0 at t = 0 gives g*Omega1
        let g = 2.0022;
        assert_abs_diff_eq!(
            drive_field(g, 1e7, 46_862.0, 46_915.0, 0.0, 0.0),
            g * 46_862.0,
            epsilon = 1e-9
        );
        // Omega1 = 0 at t = 0 gives 0 (sin(0) = 0)
        assert_abs_diff_eq!(
            drive_field(g, 1e7, 0.0, 46_915.0, 3_469.0, 0.0),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn drive_field_table_point() {
        // Independent scalar evaluation of the full expression at t = 25 ns
        // with the resonant S parameters.
        let g = crate::constants::G_FACTOR_S;
        let (w1, o1, w2, o2) = (10_002_089.0, 46_862.0, 46_915.0, 3_469.0);
        let t = 25e-9;
        let expect = g * o1 * (std::f64::consts::TAU * w1 * t).cos()
            - g * o2
                * (std::f64::consts::TAU * w1 * t).sin()
                * (std::f64::consts::TAU * w2 * t).cos();
        assert_abs_diff_eq!(drive_field(g, w1, o1, w2, o2, t), expect, epsilon = 1e-9);
        // and the value is nontrivial
        assert!(expect.abs() > 1.0);
    }

    proptest! {
        #[test]
        fn drive_field_periodic_when_commensurate(k in 1u32..8, t0 in 0.0f64..1e-4) {
            // w1 = k * w2 makes 1/w2 a common period.
            let w2 = 50_000.0;
            let w1 = (k as f64) * w2;
            let period = 1.0 / w2;
            let a = drive_field(2.0, w1, 1000.0, w2, 300.0, t0);
            let b = drive_field(2.0, w1, 1000.0, w2, 300.0, t0 + period);
            prop_assert!((a - b).abs() < 1e-6 * (1000.0f64).max(a.abs()));
        }
    }

    #[test]
    fn quadrupole_rejects_s_manifold() {
        let consts = PhysicalConstants::default();
        let s = SpinManifold::s_default();
        assert!(quadrupole_hamiltonian(&s, 1e-39, 1e6, &consts).is_err());
    }

    #[test]
    fn quadrupole_zero_gradient() {
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let h = quadrupole_hamiltonian(&d, 1e-39, 0.0, &consts).unwrap();
        assert!(mat_max_abs(&h) == 0.0);
    }

    #[test]
    fn quadrupole_stretched_state_factor() {
        // J = 5/2, m = +-5/2: J(J+1) - 3 m^2 = 8.75 - 18.75 = -10
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let grad = 7.6e6;
        let theta = consts.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let h = quadrupole_hamiltonian(&d, theta, grad, &consts).unwrap();
        let unit = theta / consts.planck_h * 0.375 * grad;
        assert_abs_diff_eq!(h[(0, 0)].re, -10.0 * unit, epsilon = 1e-9 * unit.abs());
        assert_abs_diff_eq!(h[(5, 5)].re, -10.0 * unit, epsilon = 1e-9 * unit.abs());
    }

    #[test]
    fn quadrupole_m32_literature_scale() {
        // Theta = 1.83 e a0^2, gradient 7.6e6 V/m^2: the |m| = 3/2 entry is
        // (3/8) * grad * Theta/h * 2, about 7.1 Hz.
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let theta = consts.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let h = quadrupole_hamiltonian(&d, theta, 7.6e6, &consts).unwrap();
        // index 1 is m = +3/2
        let oracle = theta / consts.planck_h * 0.375 * 7.6e6 * 2.0;
        assert_abs_diff_eq!(h[(1, 1)].re, oracle, epsilon = 1e-9);
        assert!((h[(1, 1)].re - 7.1).abs() < 0.1);
    }

    #[test]
    fn quadrupole_traceless_for_d() {
        let consts = PhysicalConstants::default();
        let d = SpinManifold::d_default();
        let theta = consts.quadrupole_moment_si(1.83);
        let h = quadrupole_hamiltonian(&d, theta, 9.4e6, &consts).unwrap();
        assert!(h.trace().norm() < 1e-9);
    }
}
