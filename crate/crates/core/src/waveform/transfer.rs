//! Coil transfer-function model (second-order zero over second-order
//! pole) and narrowband inverse pre-compensation of drive programs.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{CoreError, Result};

use super::segments::{SampledWaveform, SegmentKind, StitchedProgram};

/// Measured quality factors of the S and D resonant coils.
pub const COIL_Q_S: f64 = 8.59;
pub const COIL_Q_D: f64 = 15.95;

/// H(s) = g (s - z)(s - z*) / ((s - p)(s - p*)) with a complex zero pair
/// z = z_r + i z_i and pole pair p = p_r + i p_i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferFunctionModel {
    pub gain: f64,
    pub zero_r: f64,
    pub zero_i: f64,
    pub pole_r: f64,
    pub pole_i: f64,
    /// Resonance frequency |p|/2pi, Hz.
    pub f0_hz: f64,
    /// Quality factor |p|/(2 |p_r|).
    pub q: f64,
}

impl TransferFunctionModel {
    /// Build from a resonance frequency and quality factor. The zero pair
    /// defaults to a distant real-axis template (ten resonance radii out),
    /// which leaves the in-band response a plain resonator.
    pub fn from_q(f0_hz: f64, q: f64, gain: f64) -> Result<Self> {
        let (p_r, p_i) = q_to_pole(f0_hz, q)?;
        let w0 = TAU * f0_hz;
        let model = Self {
            gain,
            zero_r: -10.0 * w0,
            zero_i: 0.0,
            pole_r: p_r,
            pole_i: p_i,
            f0_hz,
            q,
        };
        model.validate()?;
        Ok(model)
    }

    /// Identity response: g = 1 with coincident pole and zero pairs.
    pub fn identity() -> Self {
        Self {
            gain: 1.0,
            zero_r: -1.0,
            zero_i: 1.0,
            pole_r: -1.0,
            pole_i: 1.0,
            f0_hz: TAU.recip() * 2f64.sqrt(),
            q: 2f64.sqrt() / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pole_r < 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "pole",
                reason: format!("unstable model: p_r = {} must be negative", self.pole_r),
            });
        }
        let mag = (self.pole_r * self.pole_r + self.pole_i * self.pole_i).sqrt();
        if (mag / TAU / self.f0_hz - 1.0).abs() > 1e-6 {
            return Err(CoreError::InvalidParameter {
                name: "f0",
                reason: format!("f0 = {} Hz inconsistent with |pole|/2pi = {}", self.f0_hz, mag / TAU),
            });
        }
        if (mag / (2.0 * self.pole_r.abs()) / self.q - 1.0).abs() > 1e-6 {
            return Err(CoreError::InvalidParameter {
                name: "Q",
                reason: format!(
                    "Q = {} inconsistent with |pole|/(2|p_r|) = {}",
                    self.q,
                    mag / (2.0 * self.pole_r.abs())
                ),
            });
        }
        Ok(())
    }
}

/// Map (f0, Q) onto the complex pole pair: p_r = -w0/(2Q),
/// p_i = w0 sqrt(1 - 1/(4Q^2)). Q <= 0.5 (overdamped) is not
/// representable as a complex pair and is rejected.
pub fn q_to_pole(f0_hz: f64, q: f64) -> Result<(f64, f64)> {
    if !(q > 0.5) {
        return Err(CoreError::InvalidParameter {
            name: "Q",
            reason: format!("Q = {q} must exceed 0.5 for a complex pole pair"),
        });
    }
    if !(f0_hz > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "f0",
            reason: "resonance frequency must be positive".into(),
        });
    }
    let w0 = TAU * f0_hz;
    Ok((-w0 / (2.0 * q), w0 * (1.0 - 1.0 / (4.0 * q * q)).sqrt()))
}

/// Evaluate H at s = i 2 pi f.
pub fn transfer_eval(model: &TransferFunctionModel, f_hz: f64) -> Result<Complex64> {
    let s = Complex64::new(0.0, TAU * f_hz);
    let p = Complex64::new(model.pole_r, model.pole_i);
    let z = Complex64::new(model.zero_r, model.zero_i);
    let dp1 = s - p;
    let dp2 = s - p.conj();
    let scale = TAU * model.f0_hz;
    if dp1.norm() < 1e-12 * scale || dp2.norm() < 1e-12 * scale {
        return Err(CoreError::TransferAtPole(f_hz));
    }
    Ok(Complex64::new(model.gain, 0.0) * (s - z) * (s - z.conj()) / (dp1 * dp2))
}

/// One narrowband correction track: inverse gain and phase advance,
/// tabulated over the frequencies a (possibly chirped) tone visits.
#[derive(Debug, Clone, PartialEq)]
struct ToneCorrection {
    freqs_hz: Vec<f64>,
    inv_gain: Vec<f64>,
    phase_advance_rad: Vec<f64>,
}

impl ToneCorrection {
    fn build(model: &TransferFunctionModel, f_lo: f64, f_hi: f64, points: usize) -> Result<Self> {
        let n = points.max(1);
        let mut freqs = Vec::with_capacity(n);
        let mut inv_gain = Vec::with_capacity(n);
        let mut phase = Vec::with_capacity(n);
        for k in 0..n {
            let f = if n == 1 {
                f_lo
            } else {
                f_lo + (f_hi - f_lo) * k as f64 / (n - 1) as f64
            };
            let h = transfer_eval(model, f)?;
            let factor = 1.0 / h.norm();
            if factor > 100.0 {
                return Err(CoreError::UncompensatableTone {
                    f_hz: f,
                    factor,
                });
            }
            freqs.push(f);
            inv_gain.push(factor);
            phase.push(-h.arg());
        }
        Ok(Self {
            freqs_hz: freqs,
            inv_gain,
            phase_advance_rad: phase,
        })
    }

    fn lookup(&self, f_hz: f64) -> (f64, f64) {
        let n = self.freqs_hz.len();
        if n == 1 {
            return (self.inv_gain[0], self.phase_advance_rad[0]);
        }
        let lo = self.freqs_hz[0];
        let hi = self.freqs_hz[n - 1];
        let x = ((f_hz - lo) / (hi - lo)).clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        (
            self.inv_gain[i] * (1.0 - w) + self.inv_gain[i + 1] * w,
            self.phase_advance_rad[i] * (1.0 - w) + self.phase_advance_rad[i + 1] * w,
        )
    }
}

/// Pre-compensated program: evaluates the inverse-filtered waveform
/// analytically, tone by tone.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedProgram {
    program: StitchedProgram,
    /// Per segment: correction for the fast tone and, where present, the
    /// two modulation sidebands (lower, upper).
    corrections: Vec<SegmentCorrections>,
}

#[derive(Debug, Clone, PartialEq)]
struct SegmentCorrections {
    fast: ToneCorrection,
    lower: Option<ToneCorrection>,
    upper: Option<ToneCorrection>,
}

const SWEEP_GRID_POINTS: usize = 64;

/// Apply the inverse coil response to a stitched program: every tone is
/// scaled by 1/|H| and phase-advanced by -arg H at its (instantaneous)
/// frequency; chirped tones interpolate a 64-point grid over the swept
/// range. The correction is narrowband per tone rather than a broadband
/// deconvolution.
pub fn precompensate(
    program: &StitchedProgram,
    model: &TransferFunctionModel,
) -> Result<CompensatedProgram> {
    let mut corrections = Vec::with_capacity(program.segments.len());
    for seg in &program.segments {
        let sc = match seg.kind {
            SegmentKind::Sweep1 => SegmentCorrections {
                fast: ToneCorrection::build(model, seg.f_init_hz, seg.f1_hz, SWEEP_GRID_POINTS)?,
                lower: None,
                upper: None,
            },
            SegmentKind::Hold1 => SegmentCorrections {
                fast: ToneCorrection::build(model, seg.f1_hz, seg.f1_hz, 1)?,
                lower: None,
                upper: None,
            },
            SegmentKind::Sweep2 => SegmentCorrections {
                fast: ToneCorrection::build(model, seg.f1_hz, seg.f1_hz, 1)?,
                lower: Some(ToneCorrection::build(
                    model,
                    seg.f1_hz - seg.f_init_hz,
                    seg.f1_hz - seg.f2_hz,
                    SWEEP_GRID_POINTS,
                )?),
                upper: Some(ToneCorrection::build(
                    model,
                    seg.f1_hz + seg.f_init_hz,
                    seg.f1_hz + seg.f2_hz,
                    SWEEP_GRID_POINTS,
                )?),
            },
            SegmentKind::Hold2 => SegmentCorrections {
                fast: ToneCorrection::build(model, seg.f1_hz, seg.f1_hz, 1)?,
                lower: Some(ToneCorrection::build(
                    model,
                    seg.f1_hz - seg.f2_hz,
                    seg.f1_hz - seg.f2_hz,
                    1,
                )?),
                upper: Some(ToneCorrection::build(
                    model,
                    seg.f1_hz + seg.f2_hz,
                    seg.f1_hz + seg.f2_hz,
                    1,
                )?),
            },
        };
        corrections.push(sc);
    }
    Ok(CompensatedProgram {
        program: program.clone(),
        corrections,
    })
}

impl CompensatedProgram {
    pub fn total_duration_s(&self) -> f64 {
        self.program.total_duration_s
    }

    pub fn max_tone_hz(&self) -> f64 {
        self.program.max_tone_hz()
    }

    /// Compensated waveform value at global time t.
    ///
    /// The two-tone product segments are decomposed into their sum and
    /// difference tones so each can carry its own correction:
    /// sin(a + pi/2) sin(b) = (1/2)[sin(a + pi/2 + b) - sin(a + pi/2 - b)].
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.program.total_duration_s {
            return 0.0;
        }
        let idx = match self.program.starts_s.iter().rposition(|s| *s <= t + 1e-15) {
            Some(i) => i,
            None => return 0.0,
        };
        let seg = &self.program.segments[idx];
        let corr = &self.corrections[idx];
        let tl = t - self.program.starts_s[idx];

        let fast_phase = |tl: f64| TAU * seg.f1_hz * tl + seg.phi1_rad;
        match seg.kind {
            SegmentKind::Sweep1 => {
                let f_inst = seg.instantaneous_sweep_frequency(tl);
                let (g, dphi) = corr.fast.lookup(f_inst);
                let d = (tl - seg.t_sw_s) / seg.sigma_s;
                let chirp = TAU
                    * (seg.f_init_hz * tl
                        + (seg.f1_hz - seg.f_init_hz) / (2.0 * seg.t_sw_s) * tl * tl)
                    + seg.phi1_rad;
                0.5 * (-d * d).exp() * seg.a1 * g * (chirp + dphi).sin()
            }
            SegmentKind::Hold1 => {
                let (g, dphi) = corr.fast.lookup(seg.f1_hz);
                0.5 * seg.a1 * g * (fast_phase(tl) + dphi).sin()
            }
            SegmentKind::Sweep2 | SegmentKind::Hold2 => {
                let (gf, dpf) = corr.fast.lookup(seg.f1_hz);
                let mut v = 0.5 * seg.a1 * gf * (fast_phase(tl) + dpf).sin();
                // slow-tone phase and instantaneous frequency
                let (slow_phase, f_slow) = if seg.kind == SegmentKind::Sweep2 {
                    let chirp = TAU
                        * (seg.f_init_hz * tl
                            + (seg.f2_hz - seg.f_init_hz) / (2.0 * seg.t_sw_s) * tl * tl)
                        + seg.phi2_rad;
                    (chirp, seg.instantaneous_sweep_frequency(tl))
                } else {
                    (TAU * seg.f2_hz * tl + seg.phi2_rad, seg.f2_hz)
                };
                let env = if seg.kind == SegmentKind::Sweep2 {
                    let d = (tl - seg.t_sw_s) / seg.sigma_s;
                    (-d * d).exp()
                } else {
                    1.0
                };
                let a = fast_phase(tl) + std::f64::consts::FRAC_PI_2;
                let (gl, dpl) = corr
                    .lower
                    .as_ref()
                    .map(|c| c.lookup(seg.f1_hz - f_slow))
                    .unwrap_or((1.0, 0.0));
                let (gu, dpu) = corr
                    .upper
                    .as_ref()
                    .map(|c| c.lookup(seg.f1_hz + f_slow))
                    .unwrap_or((1.0, 0.0));
                // sin(a) sin(b) = [cos(a - b) - cos(a + b)] / 2
                v += 0.25 * env * seg.a2 * gl * (a - slow_phase + dpl).cos();
                v -= 0.25 * env * seg.a2 * gu * (a + slow_phase + dpu).cos();
                v
            }
        }
    }

    pub fn sample(&self, sample_rate_hz: f64) -> SampledWaveform {
        let n = (self.program.total_duration_s * sample_rate_hz).round() as usize;
        let samples: Vec<f64> = (0..=n)
            .map(|k| self.value(k as f64 / sample_rate_hz))
            .collect();
        let boundaries = self
            .program
            .starts_s
            .iter()
            .skip(1)
            .map(|s| (s * sample_rate_hz).round() as usize)
            .collect();
        SampledWaveform {
            sample_rate_hz,
            samples,
            segment_boundaries: boundaries,
            max_tone_hz: self.program.max_tone_hz(),
        }
    }
}

/// Extract amplitude and phase of a single tone from uniform samples by
/// projection onto exp(-i 2 pi f t): the forward-filter oracle used to
/// verify pre-compensation round trips. The window should span an
/// integer number of tone periods for clean separation.
pub fn tone_amplitude_phase(samples: &[f64], sample_rate_hz: f64, f_hz: f64) -> (f64, f64) {
    let n = samples.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &y) in samples.iter().enumerate() {
        let ph = TAU * f_hz * k as f64 / sample_rate_hz;
        acc += Complex64::new(y, 0.0) * Complex64::new(0.0, -ph).exp();
    }
    acc *= Complex64::new(2.0 / n as f64, 0.0);
    // projection of A sin(wt + phi) gives (A/i) e^{i phi} / 2 * 2
    let amp = acc.norm();
    let phase = (acc * Complex64::new(0.0, 1.0)).arg();
    (amp, phase)
}

/// Apply the modelled response H to a set of tones given as
/// (frequency, amplitude, sine-phase): what the coil physically delivers
/// for a narrowband program.
pub fn forward_filter_tones(
    tones: &[(f64, f64, f64)],
    model: &TransferFunctionModel,
) -> Result<Vec<(f64, f64, f64)>> {
    tones
        .iter()
        .map(|&(f, a, ph)| {
            let h = transfer_eval(model, f)?;
            Ok((f, a * h.norm(), ph + h.arg()))
        })
        .collect()
}
