//! Time-dependent Hamiltonian assembly.
//!
//! Joint basis convention: two S1/2 states followed by six D5/2 states,
//! each manifold ordered by descending m (so index 0 is |S, +1/2> and
//! index 7 is |D, -5/2>). All matrix entries are in Hz.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::constants::PhysicalConstants;
use crate::dressing::CddParameterSet;
use crate::error::{CoreError, Result};
use crate::spin::{build_spin_operators, ManifoldLabel, SpinManifold};
use crate::waveform::StitchedProgram;

/// Where the rf drive of one coil comes from.
#[derive(Debug, Clone)]
pub enum DriveSource {
    /// Steady two-stage drive with the coil's parameters from the set:
    /// g [Omega1 cos(2pi w1 t + phi1) - Omega2 sin(2pi w1 t + phi1) cos(2pi w2 t + phi2)].
    Steady { stage2_on: bool },
    /// Analytic waveform program driving the coil; the drive coefficient
    /// is 2 * calib * y(t) with calib mapping signal amplitude to Omega.
    Program {
        program: StitchedProgram,
        calib: f64,
    },
    Off,
}

/// Optical probe coupling one bare Zeeman pair in the laser rotating
/// frame. `detuning_hz` is the laser offset from the zero-field
/// electronic line, so resonances appear at the artificial-transition
/// offsets.
#[derive(Debug, Clone, Copy)]
pub struct LaserProbe {
    pub rabi_hz: f64,
    pub detuning_hz: f64,
    /// Bare m of the coupled S state (default -1/2).
    pub m_s: f64,
    /// Bare m of the coupled D state (default -3/2).
    pub m_d: f64,
}

impl LaserProbe {
    pub fn target_pair(rabi_hz: f64, detuning_hz: f64) -> Self {
        Self {
            rabi_hz,
            detuning_hz,
            m_s: -0.5,
            m_d: -1.5,
        }
    }
}

/// Full model: drive configuration plus the perturbations whose effect
/// the numeric pipeline measures.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub set: CddParameterSet,
    pub consts: PhysicalConstants,
    /// Static field offset added to B0, T.
    pub delta_b_tesla: f64,
    /// Axial field gradient for the D quadrupole term, V/m^2.
    pub quad_gradient_v_per_m2: f64,
    /// Quadrupole moment, C m^2.
    pub theta_q_si: f64,
    pub drive_s: DriveSource,
    pub drive_d: DriveSource,
    /// Each coil's field also acts on the other manifold when true.
    pub cross_coupling: bool,
    pub laser: Option<LaserProbe>,
}

impl HamiltonianModel {
    pub fn steady(set: &CddParameterSet, consts: &PhysicalConstants) -> Self {
        Self {
            set: set.clone(),
            consts: consts.clone(),
            delta_b_tesla: 0.0,
            quad_gradient_v_per_m2: 0.0,
            theta_q_si: consts.quadrupole_moment_si(crate::constants::QUADRUPOLE_MOMENT_E_A0SQ),
            drive_s: DriveSource::Steady { stage2_on: true },
            drive_d: DriveSource::Steady { stage2_on: true },
            cross_coupling: false,
            laser: None,
        }
    }

    /// Effective Zeeman splitting rate (Hz per unit m) including the
    /// delta-B offset.
    pub fn splitting_hz(&self, m: ManifoldLabel) -> f64 {
        let g = self.set.manifold(m).g;
        self.set.bare_splitting_hz(m) + g * self.consts.mu_b_over_h * self.delta_b_tesla
    }

    fn manifold(&self, m: ManifoldLabel) -> &SpinManifold {
        self.set.manifold(m)
    }

    fn drive(&self, m: ManifoldLabel) -> &DriveSource {
        match m {
            ManifoldLabel::S => &self.drive_s,
            ManifoldLabel::D => &self.drive_d,
        }
    }

    /// Scalar drive coefficient (Hz) multiplying Jx of manifold `m`,
    /// including cross-coupling from the other coil when enabled.
    pub fn drive_coefficient(&self, m: ManifoldLabel, t: f64) -> f64 {
        let g = self.manifold(m).g;
        let mut f = g * self.coil_field(m, t);
        if self.cross_coupling {
            let other = match m {
                ManifoldLabel::S => ManifoldLabel::D,
                ManifoldLabel::D => ManifoldLabel::S,
            };
            f += g * self.coil_field(other, t);
        }
        f
    }

    /// Field amplitude (in Omega units, Hz, before the g-factor) produced
    /// by the coil belonging to manifold `m`.
    fn coil_field(&self, m: ManifoldLabel, t: f64) -> f64 {
        match self.drive(m) {
            DriveSource::Off => 0.0,
            DriveSource::Program { program, calib } => 2.0 * calib * program.value(t),
            DriveSource::Steady { stage2_on } => {
                let s1 = self.set.stage1(m);
                let s2 = self.set.stage2(m);
                let ph1 = std::f64::consts::TAU * s1.omega_hz * t + s1.phase_rad;
                let mut f = s1.amp_hz * ph1.cos();
                if *stage2_on && s2.amp_hz > 0.0 {
                    let ph2 = std::f64::consts::TAU * s2.omega_hz * t + s2.phase_rad;
                    f -= s2.amp_hz * ph1.sin() * ph2.cos();
                }
                f
            }
        }
    }

    /// Largest tone frequency produced by the coil of manifold `m`, Hz.
    fn coil_max_tone(&self, m: ManifoldLabel) -> f64 {
        match self.drive(m) {
            DriveSource::Off => 0.0,
            DriveSource::Program { program, .. } => program.max_tone_hz(),
            DriveSource::Steady { stage2_on } => {
                let w1 = self.set.stage1(m).omega_hz.abs();
                if *stage2_on {
                    w1 + self.set.stage2(m).omega_hz.abs()
                } else {
                    w1
                }
            }
        }
    }

    /// Largest drive amplitude (Hz, after g) the coil of `m` can reach.
    fn coil_amp_bound(&self, m: ManifoldLabel) -> f64 {
        match self.drive(m) {
            DriveSource::Off => 0.0,
            DriveSource::Program { program, calib } => {
                // amplitudes A1/2 + A2/2 (envelopes bounded by one)
                let a = program
                    .segments
                    .iter()
                    .map(|s| s.a1.abs() + s.a2.abs())
                    .fold(0.0, f64::max);
                calib.abs() * a
            }
            DriveSource::Steady { stage2_on } => {
                self.set.stage1(m).amp_hz
                    + if *stage2_on {
                        self.set.stage2(m).amp_hz
                    } else {
                        0.0
                    }
            }
        }
    }
}

/// Matrix block of the joint basis handled as one propagation unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    SOnly,
    DOnly,
    /// Full 8-dim space (needed when the laser couples the manifolds).
    Joint,
}

/// Hamiltonian assembled for stepping: a static part plus scalar-driven
/// coupling matrices, H(t) = H_static + sum_k c_k(t) X_k.
pub struct AssembledHamiltonian {
    pub dim: usize,
    pub static_part: DMatrix<Complex64>,
    pub couplings: Vec<(DMatrix<Complex64>, Box<dyn Fn(f64) -> f64 + Send + Sync>)>,
    /// Bound on the largest instantaneous frequency in the problem, Hz.
    pub f_max_hz: f64,
    /// Rotation rate per basis state (Hz) when propagating in the first
    /// rotating frame; empty in the lab frame.
    pub rotating_rates_hz: Vec<f64>,
}

impl AssembledHamiltonian {
    /// H(t) in the lab frame, written into `out`.
    pub fn eval_into(&self, t: f64, out: &mut DMatrix<Complex64>) {
        out.copy_from(&self.static_part);
        for (x, c) in &self.couplings {
            let cv = Complex64::new(c(t), 0.0);
            out.zip_apply(x, |o, xv| *o += cv * xv);
        }
        if !self.rotating_rates_hz.is_empty() {
            // exact frame transformation: conjugate by the diagonal phase
            // matrix and subtract the rotation generator
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let rate = self.rotating_rates_hz[j] - self.rotating_rates_hz[k];
                    if rate != 0.0 {
                        let ph = Complex64::from_polar(1.0, std::f64::consts::TAU * rate * t);
                        out[(j, k)] *= ph;
                    }
                }
                out[(j, j)] -= Complex64::new(self.rotating_rates_hz[j], 0.0);
            }
        }
    }
}

impl HamiltonianModel {
    /// Assemble the Hamiltonian for one block.
    pub fn assemble(&self, block: BlockId, rotating_frame: bool) -> Result<AssembledHamiltonian> {
        match block {
            BlockId::Joint => self.assemble_joint(rotating_frame),
            BlockId::SOnly => self.assemble_manifold(ManifoldLabel::S, rotating_frame),
            BlockId::DOnly => self.assemble_manifold(ManifoldLabel::D, rotating_frame),
        }
    }

    fn manifold_static(&self, m: ManifoldLabel) -> Result<DMatrix<Complex64>> {
        let manifold = self.manifold(m);
        let ops = build_spin_operators(manifold.j);
        let mut h = ops.jz.scale(self.splitting_hz(m));
        if m == ManifoldLabel::D && self.quad_gradient_v_per_m2 != 0.0 {
            let quad = crate::spin::quadrupole_hamiltonian(
                manifold,
                self.theta_q_si,
                self.quad_gradient_v_per_m2,
                &self.consts,
            )?;
            h += quad;
        }
        Ok(h)
    }

    fn assemble_manifold(
        &self,
        m: ManifoldLabel,
        rotating_frame: bool,
    ) -> Result<AssembledHamiltonian> {
        if self.laser.is_some() {
            return Err(CoreError::InvalidParameter {
                name: "block",
                reason: "laser coupling requires the joint block".into(),
            });
        }
        let manifold = self.manifold(m);
        let dim = manifold.dim();
        let ops = build_spin_operators(manifold.j);
        let static_part = self.manifold_static(m)?;

        let model = self.clone();
        let coeff: Box<dyn Fn(f64) -> f64 + Send + Sync> =
            Box::new(move |t| model.drive_coefficient(m, t));

        // Gershgorin bound on the spectrum plus the fastest drive tone.
        let diag_max = static_part
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let other = match m {
            ManifoldLabel::S => ManifoldLabel::D,
            ManifoldLabel::D => ManifoldLabel::S,
        };
        let amp = self.coil_amp_bound(m)
            + if self.cross_coupling {
                self.coil_amp_bound(other)
            } else {
                0.0
            };
        let jx_row_sum = (0..dim)
            .map(|r| (0..dim).map(|c| ops.jx[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let tone = self.coil_max_tone(m).max(if self.cross_coupling {
            self.coil_max_tone(other)
        } else {
            0.0
        });
        let f_max = (diag_max + manifold.g * amp * jx_row_sum).max(tone);

        let rates = if rotating_frame {
            let w1 = self.set.stage1(m).omega_hz;
            manifold.j.m_values().map(|mv| w1 * mv).collect()
        } else {
            Vec::new()
        };

        Ok(AssembledHamiltonian {
            dim,
            static_part,
            couplings: vec![(ops.jx, coeff)],
            f_max_hz: f_max,
            rotating_rates_hz: rates,
        })
    }

    fn assemble_joint(&self, rotating_frame: bool) -> Result<AssembledHamiltonian> {
        let dim_s = self.set.s.dim();
        let dim_d = self.set.d.dim();
        let dim = dim_s + dim_d;
        let ops_s = build_spin_operators(self.set.s.j);
        let ops_d = build_spin_operators(self.set.d.j);

        let mut static_part = DMatrix::<Complex64>::zeros(dim, dim);
        static_part
            .view_mut((0, 0), (dim_s, dim_s))
            .copy_from(&self.manifold_static(ManifoldLabel::S)?);
        static_part
            .view_mut((dim_s, dim_s), (dim_d, dim_d))
            .copy_from(&self.manifold_static(ManifoldLabel::D)?);

        if let Some(laser) = &self.laser {
            // laser frame: D block shifted down by the detuning
            for i in 0..dim_d {
                static_part[(dim_s + i, dim_s + i)] -=
                    Complex64::new(laser.detuning_hz, 0.0);
            }
            let is = self
                .set
                .s
                .j
                .m_values()
                .position(|mv| (mv - laser.m_s).abs() < 1e-9)
                .ok_or(CoreError::InvalidParameter {
                    name: "laser.m_s",
                    reason: format!("{} is not an S sublevel", laser.m_s),
                })?;
            let id = self
                .set
                .d
                .j
                .m_values()
                .position(|mv| (mv - laser.m_d).abs() < 1e-9)
                .ok_or(CoreError::InvalidParameter {
                    name: "laser.m_d",
                    reason: format!("{} is not a D sublevel", laser.m_d),
                })?;
            let half = Complex64::new(laser.rabi_hz / 2.0, 0.0);
            static_part[(is, dim_s + id)] = half;
            static_part[(dim_s + id, is)] = half;
        }

        let mut jx_s = DMatrix::<Complex64>::zeros(dim, dim);
        jx_s.view_mut((0, 0), (dim_s, dim_s)).copy_from(&ops_s.jx);
        let mut jx_d = DMatrix::<Complex64>::zeros(dim, dim);
        jx_d.view_mut((dim_s, dim_s), (dim_d, dim_d))
            .copy_from(&ops_d.jx);

        let model_s = self.clone();
        let model_d = self.clone();
        let couplings: Vec<(DMatrix<Complex64>, Box<dyn Fn(f64) -> f64 + Send + Sync>)> = vec![
            (
                jx_s,
                Box::new(move |t| model_s.drive_coefficient(ManifoldLabel::S, t)) as _,
            ),
            (
                jx_d,
                Box::new(move |t| model_d.drive_coefficient(ManifoldLabel::D, t)) as _,
            ),
        ];

        let diag_max = static_part
            .diagonal()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let amp = self.coil_amp_bound(ManifoldLabel::S) + self.coil_amp_bound(ManifoldLabel::D);
        let g_max = self.set.s.g.max(self.set.d.g);
        let jx_row_sum = (0..dim_d)
            .map(|r| (0..dim_d).map(|c| ops_d.jx[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let tone = self
            .coil_max_tone(ManifoldLabel::S)
            .max(self.coil_max_tone(ManifoldLabel::D));
        let f_max = (diag_max + g_max * amp * jx_row_sum).max(tone);

        let rates = if rotating_frame {
            let w1s = self.set.stage1_s.omega_hz;
            let w1d = self.set.stage1_d.omega_hz;
            self.set
                .s
                .j
                .m_values()
                .map(|mv| w1s * mv)
                .chain(self.set.d.j.m_values().map(|mv| w1d * mv))
                .collect()
        } else {
            Vec::new()
        };

        Ok(AssembledHamiltonian {
            dim,
            static_part,
            couplings,
            f_max_hz: f_max,
            rotating_rates_hz: rates,
        })
    }
}

/// Basis index of a bare state in the joint basis.
pub fn joint_index(label: ManifoldLabel, m: f64, set: &CddParameterSet) -> Option<usize> {
    match label {
        ManifoldLabel::S => set.s.j.m_values().position(|mv| (mv - m).abs() < 1e-9),
        ManifoldLabel::D => set
            .d
            .j
            .m_values()
            .position(|mv| (mv - m).abs() < 1e-9)
            .map(|i| i + set.s.dim()),
    }
}
