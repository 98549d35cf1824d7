//! Linear ion-crystal mechanics: equilibrium positions in a harmonic
//! trap, per-ion axial electric-field gradients, per-ion quadrupole
//! shifts, and quadratic inhomogeneity fits across the chain.

use nalgebra::{DMatrix, DVector};

use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};
use crate::spin::HalfSpin;

/// Trap configuration. The radial frequency is bookkeeping only and is
/// checked coarsely against the linear-chain condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    /// Axial secular angular frequency, rad/s.
    pub omega_z: f64,
    /// Radial secular angular frequency, rad/s.
    pub omega_r: f64,
    pub n_ions: usize,
}

impl TrapConfig {
    pub fn new(omega_z: f64, omega_r: f64, n_ions: usize) -> Result<Self> {
        if n_ions == 0 {
            return Err(CoreError::InvalidParameter {
                name: "N",
                reason: "need at least one ion".into(),
            });
        }
        if n_ions > 50 {
            return Err(CoreError::InvalidParameter {
                name: "N",
                reason: format!("N = {n_ions} exceeds the desk-scale limit of 50"),
            });
        }
        if !(omega_z > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "omega_z",
                reason: "axial frequency must be positive".into(),
            });
        }
        if omega_r <= omega_z {
            return Err(CoreError::InvalidParameter {
                name: "omega_r",
                reason: format!(
                    "radial confinement {omega_r} rad/s must exceed axial {omega_z} rad/s \
                     for a linear chain"
                ),
            });
        }
        Ok(Self {
            omega_z,
            omega_r,
            n_ions,
        })
    }

    /// Default five-ion trap: axial frequency chosen so the chain spans
    /// 20 um for the default ion mass (683 kHz for 40Ca+).
    pub fn default_five_ion() -> Self {
        Self {
            omega_z: std::f64::consts::TAU * 683e3,
            omega_r: std::f64::consts::TAU * 2.0e6,
            n_ions: 5,
        }
    }
}

/// Equilibrium chain: axial positions sorted ascending and the Coulomb
/// length scale l = (e^2 / (4 pi eps0 m wz^2))^(1/3).
#[derive(Debug, Clone, PartialEq)]
pub struct IonCrystal {
    pub positions_m: Vec<f64>,
    pub length_scale_m: f64,
}

impl IonCrystal {
    pub fn n_ions(&self) -> usize {
        self.positions_m.len()
    }

    /// Dimensionless positions u = z / l.
    pub fn dimensionless(&self) -> Vec<f64> {
        self.positions_m
            .iter()
            .map(|z| z / self.length_scale_m)
            .collect()
    }

    /// Chain span (outermost distance), m.
    pub fn span_m(&self) -> f64 {
        match (self.positions_m.first(), self.positions_m.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// Per-ion axial field gradient, V/m^2. Sign convention: positive is the
/// confining trap curvature m wz^2 / e; the neighbour-ion Coulomb term
/// adds to it for axial neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientProfile {
    pub per_ion_v_per_m2: Vec<f64>,
}

/// Solve the coupled force-balance equations by damped Newton iteration.
pub fn equilibrium_positions(cfg: &TrapConfig, consts: &PhysicalConstants) -> Result<IonCrystal> {
    let n = cfg.n_ions;
    let l = (consts.coulomb_constant_e2 / (consts.ion_mass * cfg.omega_z * cfg.omega_z)).cbrt();

    if n == 1 {
        return Ok(IonCrystal {
            positions_m: vec![0.0],
            length_scale_m: l,
        });
    }

    // Evenly spaced initial guess; spacing ~ N^(-2/3) scale keeps the
    // Newton iteration in the convergence basin for all desk-scale N.
    let spread = 0.7 * (n as f64).powf(0.56);
    let mut u: Vec<f64> = (0..n)
        .map(|i| (i as f64 - 0.5 * (n as f64 - 1.0)) * 2.0 * spread / (n as f64 - 1.0))
        .collect();

    let max_iter = 10_000;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut f = DVector::<f64>::zeros(n);
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut fi = u[i];
            let mut jii = 1.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = u[i] - u[j];
                let inv2 = 1.0 / (d * d);
                fi -= d.signum() * inv2;
                let inv3 = 2.0 * inv2 / d.abs();
                jii += inv3;
                jac[(i, j)] = -inv3;
            }
            f[i] = fi;
            jac[(i, i)] = jii;
        }
        residual = f.amax();
        if residual < 1e-13 {
            break;
        }
        let step = jac.lu().solve(&f).ok_or(CoreError::NonConvergence {
            iterations: max_iter,
            residual,
        })?;
        // Damp so ions cannot cross.
        let mut alpha = 1.0f64;
        loop {
            let trial: Vec<f64> = (0..n).map(|i| u[i] - alpha * step[i]).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            if ordered || alpha < 1e-6 {
                u = trial;
                break;
            }
            alpha *= 0.5;
        }
    }
    if residual >= 1e-13 {
        return Err(CoreError::NonConvergence {
            iterations: max_iter,
            residual,
        });
    }

    Ok(IonCrystal {
        positions_m: u.iter().map(|ui| ui * l).collect(),
        length_scale_m: l,
    })
}

/// Total axial field gradient at each ion: trap m wz^2 / e plus the
/// neighbour Coulomb curvature sum (1/4 pi eps0) sum_j 2 e / |zi - zj|^3.
pub fn axial_field_gradient(
    crystal: &IonCrystal,
    cfg: &TrapConfig,
    consts: &PhysicalConstants,
) -> Result<GradientProfile> {
    let trap = consts.ion_mass * cfg.omega_z * cfg.omega_z / consts.electron_charge;
    let ke = consts.coulomb_constant_e2 / consts.electron_charge; // (1/4 pi eps0) e
    let n = crystal.n_ions();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut g = trap;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = (crystal.positions_m[i] - crystal.positions_m[j]).abs();
            if d == 0.0 {
                return Err(CoreError::InvalidParameter {
                    name: "positions",
                    reason: format!("ions {i} and {j} overlap"),
                });
            }
            g += 2.0 * ke / (d * d * d);
        }
        out.push(g);
    }
    Ok(GradientProfile {
        per_ion_v_per_m2: out,
    })
}

/// Per-ion quadrupole shift, Hz:
/// suppression * (Theta/h) * (3/8) * grad_i * (J(J+1) - 3 mJ^2).
///
/// `suppression` is 1 for bare levels or the dressed-state factor from
/// `dressing::qps_suppression_factor`.
pub fn per_ion_qps(
    gradients: &GradientProfile,
    theta_q_si: f64,
    j: HalfSpin,
    m_j: f64,
    suppression: f64,
    consts: &PhysicalConstants,
) -> Vec<f64> {
    let jv = j.value();
    let tensor = jv * (jv + 1.0) - 3.0 * m_j * m_j;
    gradients
        .per_ion_v_per_m2
        .iter()
        .map(|g| suppression * theta_q_si / consts.planck_h * 0.375 * g * tensor)
        .collect()
}

/// Result of the quadratic inhomogeneity fit across the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhomogeneityFit {
    pub linear_hz_per_um: f64,
    pub quadratic_hz_per_um2: f64,
    pub spread_hz: f64,
}

/// Least-squares quadratic of shift vs position (in um), plus the
/// max-minus-min spread of the shifts.
pub fn inhomogeneity_fit(positions_m: &[f64], shifts_hz: &[f64]) -> Result<InhomogeneityFit> {
    let n = positions_m.len();
    if n < 3 || shifts_hz.len() != n {
        return Err(CoreError::DegenerateFit(format!(
            "need at least 3 matching (position, shift) pairs, got {n} / {}",
            shifts_hz.len()
        )));
    }
    let xs_um: Vec<f64> = positions_m.iter().map(|z| z * 1e6).collect();
    let span = xs_um.iter().cloned().fold(f64::NAN, f64::max)
        - xs_um.iter().cloned().fold(f64::NAN, f64::min);
    if !(span > 0.0) {
        return Err(CoreError::DegenerateFit(
            "all abscissae coincide".to_string(),
        ));
    }
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut b = DVector::<f64>::zeros(n);
    for (i, (&x, &y)) in xs_um.iter().zip(shifts_hz.iter()).enumerate() {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = x;
        a[(i, 2)] = x * x;
        b[i] = y;
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let coef = ata.lu().solve(&atb).ok_or_else(|| {
        CoreError::DegenerateFit("normal equations singular (collinear abscissae)".to_string())
    })?;
    let spread = shifts_hz.iter().cloned().fold(f64::NAN, f64::max)
        - shifts_hz.iter().cloned().fold(f64::NAN, f64::min);
    Ok(InhomogeneityFit {
        linear_hz_per_um: coef[1],
        quadratic_hz_per_um2: coef[2],
        spread_hz: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn single_ion_at_origin() {
        let cfg = TrapConfig::new(std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 2e6, 1)
            .unwrap();
        let c = equilibrium_positions(&cfg, &consts()).unwrap();
        assert_eq!(c.positions_m, vec![0.0]);
    }

    #[test]
    fn two_ion_closed_form() {
        // u = +-(1/2)^(2/3) ~ 0.62996
        let cfg = TrapConfig::new(std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 2e6, 2)
            .unwrap();
        let c = equilibrium_positions(&cfg, &consts()).unwrap();
        let u = c.dimensionless();
        let expect = 0.5f64.powf(2.0 / 3.0);
        assert_abs_diff_eq!(u[1], expect, epsilon = 1e-9);
        assert_abs_diff_eq!(u[0], -expect, epsilon = 1e-9);
    }

    #[test]
    fn five_ion_outer_positions() {
        let cfg = TrapConfig::default_five_ion();
        let c = equilibrium_positions(&cfg, &consts()).unwrap();
        let u = c.dimensionless();
        assert!((u[4] - 1.7429).abs() < 1e-4, "outer ion at {}", u[4]);
        assert!((u[0] + 1.7429).abs() < 1e-4);
        assert_abs_diff_eq!(u[2], 0.0, epsilon = 1e-12);
        // the default trap gives a ~20 um chain
        assert!((c.span_m() * 1e6 - 20.0).abs() < 0.5, "span {}", c.span_m());
    }

    #[test]
    fn five_ion_matches_brute_force_descent() {
        // Independent oracle: gradient descent on the potential from a
        // perturbed start, at two different trap frequencies.
        for omega_z in [std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 1.1e6] {
            let cfg = TrapConfig::new(omega_z, std::f64::consts::TAU * 3e6, 5).unwrap();
            let newton = equilibrium_positions(&cfg, &consts()).unwrap();
            let mut u = vec![-2.1, -0.9, 0.07, 1.1, 1.9];
            // plain gradient descent on V = sum u^2/2 + sum 1/|ui-uj|
            for _ in 0..200_000 {
                let mut grad = vec![0.0f64; 5];
                for i in 0..5 {
                    grad[i] = u[i];
                    for j in 0..5 {
                        if i != j {
                            let d: f64 = u[i] - u[j];
                            grad[i] -= d.signum() / (d * d);
                        }
                    }
                }
                for i in 0..5 {
                    u[i] -= 2e-3 * grad[i];
                }
            }
            let got = newton.dimensionless();
            for (a, b) in got.iter().zip(u.iter()) {
                assert!((a - b).abs() < 1e-5, "newton {a} vs descent {b}");
            }
        }
    }

    #[test]
    fn positions_scale_as_omega_to_minus_two_thirds() {
        let c1 = equilibrium_positions(
            &TrapConfig::new(std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 3e6, 5)
                .unwrap(),
            &consts(),
        )
        .unwrap();
        let c2 = equilibrium_positions(
            &TrapConfig::new(std::f64::consts::TAU * 1366e3, std::f64::consts::TAU * 4e6, 5)
                .unwrap(),
            &consts(),
        )
        .unwrap();
        let expect = 2f64.powf(-2.0 / 3.0);
        for (a, b) in c1.positions_m.iter().zip(c2.positions_m.iter()) {
            if a.abs() > 0.0 {
                assert_abs_diff_eq!(b / a, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn force_balance_invariant() {
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        // dimensional force balance: m w^2 z = sum_j ke^2 sgn(zi-zj)/(zi-zj)^2
        let scale = cst.ion_mass * cfg.omega_z * cfg.omega_z * c.length_scale_m;
        for i in 0..5 {
            let mut f = -cst.ion_mass * cfg.omega_z * cfg.omega_z * c.positions_m[i];
            for j in 0..5 {
                if i != j {
                    let d = c.positions_m[i] - c.positions_m[j];
                    f += cst.coulomb_constant_e2 * d.signum() / (d * d);
                }
            }
            assert!(f.abs() < 1e-9 * scale, "ion {i} residual {f}");
        }
    }

    #[test]
    fn single_ion_gradient_is_trap_only() {
        let cfg = TrapConfig::new(std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 2e6, 1)
            .unwrap();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let expect = cst.ion_mass * cfg.omega_z * cfg.omega_z / cst.electron_charge;
        assert_abs_diff_eq!(g.per_ion_v_per_m2[0], expect, epsilon = 1e-6);
        // the 683 kHz default gives the literature-scale 7.6e6 V/m^2
        assert!((expect / 1e6 - 7.6).abs() < 0.1);
    }

    #[test]
    fn two_ion_gradient_hand_formula() {
        let cfg = TrapConfig::new(std::f64::consts::TAU * 683e3, std::f64::consts::TAU * 2e6, 2)
            .unwrap();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let d = c.positions_m[1] - c.positions_m[0];
        let expect = cst.ion_mass * cfg.omega_z * cfg.omega_z / cst.electron_charge
            + 2.0 * cst.coulomb_constant_e2 / cst.electron_charge / (d * d * d);
        for v in &g.per_ion_v_per_m2 {
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-3);
        }
    }

    #[test]
    fn five_ion_gradient_profile_shape() {
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let v = &g.per_ion_v_per_m2;
        let trap = cst.ion_mass * cfg.omega_z * cfg.omega_z / cst.electron_charge;
        // centre exceeds single-ion value, profile symmetric
        assert!(v[2] > trap);
        assert_abs_diff_eq!(v[0], v[4], epsilon = 1e-3 * trap);
        assert_abs_diff_eq!(v[1], v[3], epsilon = 1e-3 * trap);
        assert!(v[2] > v[0]);
    }

    #[test]
    fn qps_zero_suppression_and_linearity() {
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let theta = cst.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let j = HalfSpin::from_twice(5);
        let zero = per_ion_qps(&g, theta, j, 1.5, 0.0, &cst);
        assert!(zero.iter().all(|s| *s == 0.0));
        let one = per_ion_qps(&g, theta, j, 1.5, 1.0, &cst);
        let half = per_ion_qps(&g, theta, j, 1.5, 0.5, &cst);
        for (a, b) in one.iter().zip(half.iter()) {
            assert_abs_diff_eq!(*b, 0.5 * a, epsilon = 1e-12);
        }
        // linear in Theta as well
        let twice = per_ion_qps(&g, 2.0 * theta, j, 1.5, 1.0, &cst);
        for (a, b) in one.iter().zip(twice.iter()) {
            assert_abs_diff_eq!(*b, 2.0 * a, epsilon = 1e-12);
        }
    }

    #[test]
    fn qps_bare_32_profile() {
        // bare |mJ| = 3/2 over the default five-ion chain: Hz-to-tens-of-Hz
        // (neighbour curvature exceeds the trap term at these spacings),
        // symmetric, largest at the centre.
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let theta = cst.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ);
        let shifts = per_ion_qps(&g, theta, HalfSpin::from_twice(5), 1.5, 1.0, &cst);
        assert!(shifts.iter().all(|s| *s > 1.0 && *s < 100.0));
        assert_abs_diff_eq!(shifts[0], shifts[4], epsilon = 1e-6);
        assert!(shifts[2] > shifts[0]);
    }

    #[test]
    fn qps_tensor_sum_rule() {
        // sum over m of (J(J+1) - 3 m^2) vanishes for J = 5/2
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let c = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&c, &cfg, &cst).unwrap();
        let theta = cst.quadrupole_moment_si(1.83);
        let j = HalfSpin::from_twice(5);
        let mut total = vec![0.0f64; 5];
        for m in [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5] {
            let s = per_ion_qps(&g, theta, j, m, 1.0, &cst);
            for (t, v) in total.iter_mut().zip(s.iter()) {
                *t += v;
            }
        }
        for t in total {
            assert!(t.abs() < 1e-9);
        }
    }

    #[test]
    fn fit_trivial_and_synthetic() {
        // all equal -> zeros
        let pos: Vec<f64> = (-2..=2).map(|i| i as f64 * 5e-6).collect();
        let flat = vec![3.0; 5];
        let f = inhomogeneity_fit(&pos, &flat).unwrap();
        assert_abs_diff_eq!(f.linear_hz_per_um, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.quadratic_hz_per_um2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.spread_hz, 0.0, epsilon = 1e-12);

        // synthetic pure quadratic 3 mHz/um^2 over +-10 um
        let pos2: Vec<f64> = (-2..=2).map(|i| i as f64 * 5e-6).collect();
        let shifts: Vec<f64> = pos2.iter().map(|z| 3e-3 * (z * 1e6).powi(2)).collect();
        let f2 = inhomogeneity_fit(&pos2, &shifts).unwrap();
        assert_abs_diff_eq!(f2.quadratic_hz_per_um2, 3e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(f2.linear_hz_per_um, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f2.spread_hz, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn suppression_ratio_passes_through_quadratic_fit() {
        // consistency harness: feeding suppression factors with a ratio
        // of 12 into the per-ion shifts produces quadratic fit
        // coefficients with exactly that ratio
        let cfg = TrapConfig::default_five_ion();
        let cst = consts();
        let crystal = equilibrium_positions(&cfg, &cst).unwrap();
        let g = axial_field_gradient(&crystal, &cfg, &cst).unwrap();
        let theta = cst.quadrupole_moment_si(1.83);
        let j = HalfSpin::from_twice(5);
        let strong = per_ion_qps(&g, theta, j, 0.5, 1.0, &cst);
        let weak = per_ion_qps(&g, theta, j, 0.5, 1.0 / 12.0, &cst);
        let f_strong = inhomogeneity_fit(&crystal.positions_m, &strong).unwrap();
        let f_weak = inhomogeneity_fit(&crystal.positions_m, &weak).unwrap();
        assert_abs_diff_eq!(
            f_strong.quadratic_hz_per_um2 / f_weak.quadratic_hz_per_um2,
            12.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn fit_rejects_degenerate() {
        assert!(inhomogeneity_fit(&[0.0, 1e-6], &[0.0, 1.0]).is_err());
        assert!(inhomogeneity_fit(&[1e-6; 4], &[0.0, 1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn trap_config_validation() {
        assert!(TrapConfig::new(1e6, 2e6, 0).is_err());
        assert!(TrapConfig::new(1e6, 2e6, 51).is_err());
        assert!(TrapConfig::new(2e6, 1e6, 5).is_err());
    }
}
