//! Numeric measurements built on the propagator: state evolution,
//! magnetic-sensitivity extraction, the quadrupole magic-point search,
//! adiabatic-preparation fidelity and excitation scans.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::PhysicalConstants;
use crate::dressing::CddParameterSet;
use crate::error::{CoreError, Result};
use crate::linalg::expm;
use crate::spin::ManifoldLabel;
use crate::waveform::StitchedProgram;

use super::model::{joint_index, BlockId, DriveSource, HamiltonianModel, LaserProbe};
use super::propagator::{evolve_state, Frame, PropagationConfig};
use super::quasi::{quasi_energies, quasi_energies_manifold, DressedFrame, QuasiEnergyOptions};

/// State in the joint 8-dim basis (two S states then six D states,
/// descending m within each manifold).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
    pub time_s: f64,
}

impl StateVector {
    pub fn bare(label: ManifoldLabel, m: f64, set: &CddParameterSet) -> Result<Self> {
        let dim = set.s.dim() + set.d.dim();
        let idx = joint_index(label, m, set).ok_or(CoreError::InvalidParameter {
            name: "m",
            reason: format!("no {label} sublevel with m = {m}"),
        })?;
        let mut amplitudes = DVector::<Complex64>::zeros(dim);
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            time_s: 0.0,
        })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Total population of the D manifold.
    pub fn d_population(&self, set: &CddParameterSet) -> f64 {
        self.amplitudes
            .iter()
            .skip(set.s.dim())
            .map(|z| z.norm_sqr())
            .sum()
    }
}

/// Propagate a joint-basis state under the model for `duration_s`.
pub fn propagate(
    model: &HamiltonianModel,
    psi0: &StateVector,
    duration_s: f64,
    cfg: &PropagationConfig,
) -> Result<StateVector> {
    let ham = model.assemble(BlockId::Joint, cfg.frame == Frame::FirstRotating)?;
    let dt = cfg.resolve_dt(ham.f_max_hz)?;
    let (amps, t) = evolve_state(&ham, &psi0.amplitudes, psi0.time_s, duration_s, dt, cfg.method);
    Ok(StateVector {
        amplitudes: amps,
        time_s: t,
    })
}

fn quadratic_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    let mut a = DMatrix::<f64>::zeros(n, 3);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n {
        a[(i, 0)] = 1.0;
        a[(i, 1)] = xs[i];
        a[(i, 2)] = xs[i] * xs[i];
        b[i] = ys[i];
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let c = ata.lu().solve(&atb).expect("well-conditioned quadratic fit");
    (c[0], c[1], c[2])
}

/// Polynomial fit of the target-transition offset against a static field
/// offset grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityFit {
    pub linear_hz_per_nt: f64,
    pub quadratic_hz_per_nt2: f64,
    /// (delta-B nT, transition offset Hz) samples the fit ran on.
    pub offsets: Vec<(f64, f64)>,
    pub max_residual_hz: f64,
    /// Set when the quadratic model leaves more than 1% of the span.
    pub residual_flagged: bool,
}

/// Numeric magnetic sensitivity: quasi-energy transition offsets on a
/// symmetric delta-B grid, fitted with a quadratic.
pub fn magnetic_sensitivity_numeric(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    db_grid_nt: &[f64],
    opts: &QuasiEnergyOptions,
) -> Result<SensitivityFit> {
    let n = db_grid_nt.len();
    if n < 5 {
        return Err(CoreError::InvalidParameter {
            name: "db_grid",
            reason: format!("need at least 5 grid points, got {n}"),
        });
    }
    let mut sorted = db_grid_nt.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = sorted.last().unwrap().abs().max(1e-12);
    for i in 0..n {
        if (sorted[i] + sorted[n - 1 - i]).abs() > 1e-9 * scale {
            return Err(CoreError::InvalidParameter {
                name: "db_grid",
                reason: "grid must be symmetric about zero".into(),
            });
        }
    }

    let offsets: Result<Vec<(f64, f64)>> = sorted
        .par_iter()
        .map(|&db_nt| {
            let mut o = *opts;
            o.delta_b_tesla = db_nt * 1e-9;
            let spec = quasi_energies(set, consts, &o)?;
            Ok((db_nt, spec.transition_offset_hz(&set.target)))
        })
        .collect();
    let offsets = offsets?;

    let xs: Vec<f64> = offsets.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = offsets.iter().map(|p| p.1).collect();
    let (c0, c1, c2) = quadratic_fit(&xs, &ys);
    let max_residual = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| (y - (c0 + c1 * x + c2 * x * x)).abs())
        .fold(0.0, f64::max);
    let span = ys.iter().cloned().fold(f64::NAN, f64::max)
        - ys.iter().cloned().fold(f64::NAN, f64::min);
    Ok(SensitivityFit {
        linear_hz_per_nt: c1,
        quadratic_hz_per_nt2: c2,
        offsets,
        max_residual_hz: max_residual,
        residual_flagged: span > 0.0 && max_residual > 0.01 * span,
    })
}

/// Outcome of the numeric magic-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagicSearchResult {
    /// Second-stage D detuning at which the gradient sensitivity of the
    /// target transition crosses zero, Hz.
    pub delta2_d_hz: f64,
    pub iterations: usize,
    /// Gradient response (Hz per V/m^2) at the returned detuning.
    pub residual_response: f64,
}

/// D-manifold part of the transition offset at a given gradient.
fn d_part_at(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    gradient: f64,
    opts: &QuasiEnergyOptions,
) -> Result<f64> {
    let mut o = *opts;
    o.quad_gradient_v_per_m2 = gradient;
    let sp = quasi_energies_manifold(set, consts, ManifoldLabel::D, &o)?;
    let t = &set.target;
    let e = sp
        .level(t.m2_d)
        .map(|l| l.energy_hz)
        .ok_or(CoreError::InvalidParameter {
            name: "m2_d",
            reason: format!("{} is not a D label", t.m2_d),
        })?;
    Ok(e + (t.m0_d - 0.5) * sp.omega1_sim_hz + (t.m1_d - 0.5) * sp.omega2_sim_hz)
}

fn with_delta2_d(set: &CddParameterSet, delta2_d: f64) -> CddParameterSet {
    let mut s = set.clone();
    s.stage2_d.delta_hz = delta2_d;
    s.stage2_d.omega_hz = s.stage1_splitting_hz(ManifoldLabel::D) - delta2_d;
    s
}

/// Find the second-stage D detuning where the target transition's
/// sensitivity to the applied field gradient changes sign. Secant with a
/// bisection safeguard; converges to 1 Hz of detuning.
pub fn numeric_magic_search(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    test_gradient_v_per_m2: f64,
    bracket_hz: (f64, f64),
    opts: &QuasiEnergyOptions,
) -> Result<MagicSearchResult> {
    if test_gradient_v_per_m2 == 0.0 {
        return Err(CoreError::DegenerateSearch(
            "gradient = 0 makes the derivative identically zero".into(),
        ));
    }
    let g = test_gradient_v_per_m2;
    let response = |delta2: f64| -> Result<f64> {
        let trial = with_delta2_d(set, delta2);
        let (plus, minus) = rayon::join(
            || d_part_at(&trial, consts, g, opts),
            || d_part_at(&trial, consts, -g, opts),
        );
        Ok((plus? - minus?) / (2.0 * g))
    };

    let (mut lo, mut hi) = bracket_hz;
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut f_lo = response(lo)?;
    let f_hi = response(hi)?;
    if f_lo * f_hi > 0.0 {
        return Err(CoreError::DegenerateSearch(format!(
            "no zero crossing of the gradient sensitivity in [{lo} Hz, {hi} Hz] \
             (responses {f_lo:.3e} and {f_hi:.3e})"
        )));
    }
    let mut f_hi = f_hi;
    let mut iterations = 0usize;
    while hi - lo > 1.0 {
        iterations += 1;
        // secant proposal, clipped into the middle 80% of the bracket
        let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        let width = hi - lo;
        let x = if (secant - lo) > 0.1 * width && (hi - secant) > 0.1 * width {
            secant
        } else {
            mid
        };
        let fx = response(x)?;
        if f_lo * fx <= 0.0 {
            hi = x;
            f_hi = fx;
        } else {
            lo = x;
            f_lo = fx;
        }
        if iterations > 60 {
            return Err(CoreError::NonConvergence {
                iterations,
                residual: hi - lo,
            });
        }
    }
    let delta2 = 0.5 * (lo + hi);
    Ok(MagicSearchResult {
        delta2_d_hz: delta2,
        iterations,
        residual_response: 0.5 * (f_lo + f_hi),
    })
}

/// Population map over the dressed states of one manifold after running
/// an adiabatic-preparation waveform program.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationResult {
    /// (m2 label, population), descending m.
    pub populations: Vec<(f64, f64)>,
    /// Population of the configured target dressed state.
    pub target_population: f64,
    /// Set when the target population fell below 0.5.
    pub non_adiabatic_warning: Option<String>,
}

/// Propagate a bare starting state through a preparation program on one
/// manifold and project onto the analytic doubly-dressed states at the
/// program's final drive phases.
pub fn simulate_adiabatic_preparation(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    manifold: ManifoldLabel,
    program: &StitchedProgram,
    psi0_bare_m: f64,
    cfg: &PropagationConfig,
) -> Result<PreparationResult> {
    let man = *set.manifold(manifold);
    let dim = man.dim();
    let idx = man
        .j
        .m_values()
        .position(|mv| (mv - psi0_bare_m).abs() < 1e-9)
        .ok_or(CoreError::InvalidParameter {
            name: "psi0",
            reason: format!("no {manifold} sublevel with m = {psi0_bare_m}"),
        })?;

    let last = *program.segments.last().ok_or(CoreError::BadSegmentOrder(
        "empty preparation program".into(),
    ))?;
    let has_sweep = program.segments.iter().any(|s| {
        matches!(
            s.kind,
            crate::waveform::SegmentKind::Sweep1 | crate::waveform::SegmentKind::Sweep2
        )
    });
    if !has_sweep {
        return Err(CoreError::BadSegmentOrder(
            "preparation program needs at least one sweep segment".into(),
        ));
    }

    let mut model = HamiltonianModel::steady(set, consts);
    model.drive_s = DriveSource::Off;
    model.drive_d = DriveSource::Off;
    let src = DriveSource::Program {
        program: program.clone(),
        calib: 1.0,
    };
    match manifold {
        ManifoldLabel::S => model.drive_s = src,
        ManifoldLabel::D => model.drive_d = src,
    }

    let block = match manifold {
        ManifoldLabel::S => BlockId::SOnly,
        ManifoldLabel::D => BlockId::DOnly,
    };
    let ham = model.assemble(block, false)?;
    let dt = cfg.resolve_dt(ham.f_max_hz)?;
    let mut psi0 = DVector::<Complex64>::zeros(dim);
    psi0[idx] = Complex64::new(1.0, 0.0);
    let (psi, _) = evolve_state(
        &ham,
        &psi0,
        0.0,
        program.total_duration_s,
        dt,
        cfg.method,
    );

    // analytic dressed basis at the final drive phases
    let stage2_on = last.a2 != 0.0;
    let amp1 = last.a1; // calib = 1: signal amplitude is Omega
    let amp2 = last.a2;
    let delta1 = model.splitting_hz(manifold) - last.f1_hz;
    let wbar1 = crate::dressing::dressed_splitting(amp1, delta1, man.g);
    let delta2 = if stage2_on { wbar1 - last.f2_hz } else { 0.0 };
    let frame = DressedFrame::new(man.g, man.j, amp1, delta1, amp2, delta2, stage2_on);
    let phi_f = last.fast_phase_end() - std::f64::consts::FRAC_PI_2;
    let phi_s = last
        .slow_phase_end()
        .map(|p| p - std::f64::consts::FRAC_PI_2)
        .unwrap_or(0.0);
    let vectors = frame.vectors_at(phi_f, phi_s);

    let m_values: Vec<f64> = man.j.m_values().collect();
    let mut populations = Vec::with_capacity(dim);
    for (col, m_val) in m_values.iter().enumerate() {
        let p = (vectors.column(col).adjoint() * &psi)[(0, 0)].norm_sqr();
        populations.push((*m_val, p));
    }
    let target_m2 = match manifold {
        ManifoldLabel::S => set.target.m2_s,
        ManifoldLabel::D => set.target.m2_d,
    };
    let target_population = populations
        .iter()
        .find(|(m, _)| (m - target_m2).abs() < 1e-9)
        .map(|(_, p)| *p)
        .unwrap_or(0.0);
    let non_adiabatic_warning = (target_population < 0.5).then(|| {
        format!(
            "non-adiabatic preparation: target population {target_population:.3} below 0.5"
        )
    });
    Ok(PreparationResult {
        populations,
        target_population,
        non_adiabatic_warning,
    })
}

/// One excitation-scan sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub detuning_hz: f64,
    pub excitation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanTier {
    LabFrame,
    DressedBasis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub tier: ScanTier,
}

/// Window length above which scans switch from lab-frame integration to
/// the dressed-basis line model.
pub const LAB_FRAME_PROBE_LIMIT_S: f64 = 0.02;

/// Excitation spectrum of the probe laser versus detuning from the
/// zero-field line. Short probes integrate the full lab-frame dynamics
/// starting from the prepared dressed S state; longer probes use the
/// dressed-basis line decomposition.
pub fn simulate_rabi_scan(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    detunings_hz: &[f64],
    probe_time_s: f64,
    cfg: &PropagationConfig,
) -> Result<ScanResult> {
    set.validate()?;
    if probe_time_s <= LAB_FRAME_PROBE_LIMIT_S {
        lab_frame_scan(set, consts, detunings_hz, probe_time_s, cfg)
    } else {
        Ok(dressed_basis_scan(set, consts, detunings_hz, probe_time_s))
    }
}

fn drives_off(set: &CddParameterSet) -> bool {
    set.stage1_s.amp_hz == 0.0
        && set.stage2_s.amp_hz == 0.0
        && set.stage1_d.amp_hz == 0.0
        && set.stage2_d.amp_hz == 0.0
}

fn lab_frame_scan(
    set: &CddParameterSet,
    consts: &PhysicalConstants,
    detunings_hz: &[f64],
    probe_time_s: f64,
    cfg: &PropagationConfig,
) -> Result<ScanResult> {
    // starting state: the prepared doubly-dressed S target (bare ground
    // state when the drives are off)
    let dim = set.s.dim() + set.d.dim();
    let mut psi0 = DVector::<Complex64>::zeros(dim);
    if drives_off(set) {
        let idx = joint_index(ManifoldLabel::S, set.target.m0_s, set).unwrap();
        psi0[idx] = Complex64::new(1.0, 0.0);
    } else {
        let frame = DressedFrame::new(
            set.s.g,
            set.s.j,
            set.stage1_s.amp_hz,
            set.stage1_s.delta_hz,
            set.stage2_s.amp_hz,
            set.stage2_s.delta_hz,
            set.stage2_s.amp_hz > 0.0,
        );
        let vs = frame.vectors_at(0.0, 0.0);
        let col = set
            .s
            .j
            .m_values()
            .position(|mv| (mv - set.target.m2_s).abs() < 1e-9)
            .unwrap();
        for i in 0..set.s.dim() {
            psi0[i] = vs[(i, col)];
        }
    }

    let static_case = drives_off(set);
    let points: Result<Vec<ScanPoint>> = detunings_hz
        .par_iter()
        .map(|&delta| {
            let mut model = HamiltonianModel::steady(set, consts);
            if static_case {
                model.drive_s = DriveSource::Off;
                model.drive_d = DriveSource::Off;
            }
            model.laser = Some(LaserProbe {
                rabi_hz: set.laser_omega_hz,
                detuning_hz: delta,
                m_s: set.target.m0_s,
                m_d: set.target.m0_d,
            });
            let ham = model.assemble(BlockId::Joint, false)?;
            let amps = if static_case {
                // time-independent Hamiltonian: a single exponential
                let a = ham
                    .static_part
                    .map(|z| Complex64::new(0.0, -std::f64::consts::TAU) * z * probe_time_s);
                expm(&a) * &psi0
            } else {
                let dt = cfg.resolve_dt(ham.f_max_hz)?;
                evolve_state(&ham, &psi0, 0.0, probe_time_s, dt, cfg.method).0
            };
            let excitation: f64 = amps.iter().skip(set.s.dim()).map(|z| z.norm_sqr()).sum();
            Ok(ScanPoint {
                detuning_hz: delta,
                excitation,
            })
        })
        .collect();
    Ok(ScanResult {
        points: points?,
        tier: ScanTier::LabFrame,
    })
}

fn rabi_lineshape(delta_hz: f64, rabi_hz: f64, probe_s: f64) -> f64 {
    let w2 = rabi_hz * rabi_hz + delta_hz * delta_hz;
    if w2 == 0.0 {
        return 0.0;
    }
    let w = w2.sqrt();
    (rabi_hz * rabi_hz / w2) * (std::f64::consts::PI * w * probe_s).sin().powi(2)
}

/// Spectral lines of the doubly-dressed transitions reachable from the
/// prepared S state through the bare laser pair: positions from the
/// anchored ladder, effective Rabi frequencies from the mixing-matrix
/// elements.
pub fn dressed_scan_lines(set: &CddParameterSet) -> Vec<(f64, f64)> {
    let fs = DressedFrame::new(
        set.s.g,
        set.s.j,
        set.stage1_s.amp_hz,
        set.stage1_s.delta_hz,
        set.stage2_s.amp_hz,
        set.stage2_s.delta_hz,
        set.stage2_s.amp_hz > 0.0,
    );
    let fd = DressedFrame::new(
        set.d.g,
        set.d.j,
        set.stage1_d.amp_hz,
        set.stage1_d.delta_hz,
        set.stage2_d.amp_hz,
        set.stage2_d.delta_hz,
        set.stage2_d.amp_hz > 0.0,
    );
    let a_row = set
        .s
        .j
        .m_values()
        .position(|mv| (mv - set.target.m0_s).abs() < 1e-9)
        .unwrap();
    let b_row = set
        .d
        .j
        .m_values()
        .position(|mv| (mv - set.target.m0_d).abs() < 1e-9)
        .unwrap();
    // prepared state: the dressed target with the S drives on, the bare
    // ground state otherwise
    let prepared_m2s = if set.stage1_s.amp_hz > 0.0 {
        set.target.m2_s
    } else {
        set.target.m0_s
    };
    let m2s_col = set
        .s
        .j
        .m_values()
        .position(|mv| (mv - prepared_m2s).abs() < 1e-9)
        .unwrap();

    let s_ms: Vec<f64> = set.s.j.m_values().collect();
    let d_ms: Vec<f64> = set.d.j.m_values().collect();
    let wbar2_s = set.stage2_splitting_hz(ManifoldLabel::S);
    let wbar2_d = set.stage2_splitting_hz(ManifoldLabel::D);

    let mut lines = Vec::new();
    for (i_m1d, m1d) in d_ms.iter().enumerate() {
        for (i_m2d, m2d) in d_ms.iter().enumerate() {
            let amp_d = (fd.stage1_mixer()[(b_row, i_m1d)]
                * fd.stage2_mixer()[(i_m1d, i_m2d)])
            .norm();
            if amp_d < 1e-6 {
                continue;
            }
            for (i_m1s, m1s) in s_ms.iter().enumerate() {
                let amp_s = (fs.stage1_mixer()[(a_row, i_m1s)]
                    * fs.stage2_mixer()[(i_m1s, m2s_col)])
                .norm();
                if amp_s < 1e-6 {
                    continue;
                }
                let nu = set.target.m0_d * set.stage1_d.omega_hz
                    + m1d * set.stage2_d.omega_hz
                    + m2d * wbar2_d
                    - (set.target.m0_s * set.stage1_s.omega_hz
                        + m1s * set.stage2_s.omega_hz
                        + prepared_m2s * wbar2_s);
                lines.push((nu, set.laser_omega_hz * amp_d * amp_s));
            }
        }
    }
    lines
}

fn dressed_basis_scan(
    set: &CddParameterSet,
    _consts: &PhysicalConstants,
    detunings_hz: &[f64],
    probe_time_s: f64,
) -> ScanResult {
    let lines = dressed_scan_lines(set);
    let points = detunings_hz
        .iter()
        .map(|&delta| {
            let p: f64 = lines
                .iter()
                .map(|&(nu, rabi)| rabi_lineshape(delta - nu, rabi, probe_time_s))
                .sum();
            ScanPoint {
                detuning_hz: delta,
                excitation: p.min(1.0),
            }
        })
        .collect();
    ScanResult {
        points,
        tier: ScanTier::DressedBasis,
    }
}
