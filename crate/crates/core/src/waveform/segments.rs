//! The four analytic waveform segments and phase-continuous stitching.

use std::f64::consts::TAU;

use crate::error::{CoreError, Result};

/// Which of the four program segments a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SegmentKind {
    Sweep1,
    Hold1,
    Sweep2,
    Hold2,
}

impl std::fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SegmentKind::Sweep1 => write!(f, "sweep1"),
            SegmentKind::Hold1 => write!(f, "hold1"),
            SegmentKind::Sweep2 => write!(f, "sweep2"),
            SegmentKind::Hold2 => write!(f, "hold2"),
        }
    }
}

/// One waveform segment. Fields mirror the analytic forms:
///
/// * sweep1:  y = 1/2 exp(-(t-t_sw)^2/sigma^2) A1 sin(2pi[f_init t + (f1-f_init) t^2/(2 t_sw)] + phi1)
/// * hold1:   y = 1/2 A1 sin(2pi f1 t + phi1)
/// * sweep2:  y = 1/2 A1 sin(2pi f1 t + phi1)
///            + 1/2 exp(-(t-t_sw)^2/sigma^2) A2 sin(2pi f1 t + pi/2 + phi1)
///              * sin(2pi[f_init t + (f2-f_init) t^2/(2 t_sw)] + phi2)
/// * hold2:   y = 1/2 A1 sin(2pi f1 t + phi1)
///            + 1/2 A2 sin(2pi f1 t + pi/2 + phi1) sin(2pi f2 t + phi2)
///
/// `t` is segment-local time in [0, duration]. For sweeps `f_init` is the
/// chirp start (sweep1 chirps the fast tone, sweep2 the slow one) and the
/// Gaussian edge is evaluated truncated on [0, t_sw].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub kind: SegmentKind,
    pub a1: f64,
    pub a2: f64,
    pub f1_hz: f64,
    pub f2_hz: f64,
    pub f_init_hz: f64,
    pub t_sw_s: f64,
    pub sigma_s: f64,
    /// Fast-tone phase, rad (phi_fast on hold2).
    pub phi1_rad: f64,
    /// Slow-tone phase, rad (phi_slow on hold2).
    pub phi2_rad: f64,
    pub duration_s: f64,
}

impl SegmentSpec {
    /// First sweep with the default Gaussian edge sigma = t_sw / 3.
    pub fn sweep1(a1: f64, f1_hz: f64, sweep_range_hz: f64, t_sw_s: f64) -> Self {
        Self {
            kind: SegmentKind::Sweep1,
            a1,
            a2: 0.0,
            f1_hz,
            f2_hz: 0.0,
            // range convention: sweep_range = f1 - f_init
            f_init_hz: f1_hz - sweep_range_hz,
            t_sw_s,
            sigma_s: t_sw_s / 3.0,
            phi1_rad: 0.0,
            phi2_rad: 0.0,
            duration_s: t_sw_s,
        }
    }

    pub fn hold1(a1: f64, f1_hz: f64, duration_s: f64) -> Self {
        Self {
            kind: SegmentKind::Hold1,
            a1,
            a2: 0.0,
            f1_hz,
            f2_hz: 0.0,
            f_init_hz: 0.0,
            t_sw_s: 0.0,
            sigma_s: 0.0,
            phi1_rad: 0.0,
            phi2_rad: 0.0,
            duration_s,
        }
    }

    pub fn sweep2(a1: f64, a2: f64, f1_hz: f64, f2_hz: f64, sweep_range_hz: f64, t_sw_s: f64) -> Self {
        Self {
            kind: SegmentKind::Sweep2,
            a1,
            a2,
            f1_hz,
            f2_hz,
            f_init_hz: f2_hz - sweep_range_hz,
            t_sw_s,
            sigma_s: t_sw_s / 3.0,
            phi1_rad: 0.0,
            phi2_rad: 0.0,
            duration_s: t_sw_s,
        }
    }

    pub fn hold2(a1: f64, a2: f64, f1_hz: f64, f2_hz: f64, duration_s: f64) -> Self {
        Self {
            kind: SegmentKind::Hold2,
            a1,
            a2,
            f1_hz,
            f2_hz,
            f_init_hz: 0.0,
            t_sw_s: 0.0,
            sigma_s: 0.0,
            phi1_rad: 0.0,
            phi2_rad: 0.0,
            duration_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "duration",
                reason: format!("must be positive, got {}", self.duration_s),
            });
        }
        match self.kind {
            SegmentKind::Sweep1 | SegmentKind::Sweep2 => {
                if !(self.sigma_s > 0.0) {
                    return Err(CoreError::InvalidParameter {
                        name: "sigma",
                        reason: format!("Gaussian edge must be positive, got {}", self.sigma_s),
                    });
                }
                let target = if self.kind == SegmentKind::Sweep1 {
                    self.f1_hz
                } else {
                    self.f2_hz
                };
                let range = (target - self.f_init_hz).abs();
                if range >= 0.2 * self.f1_hz.abs() {
                    return Err(CoreError::InvalidParameter {
                        name: "sweep_range",
                        reason: format!(
                            "sweep range {range} Hz must stay below 0.2 * f1 = {} Hz",
                            0.2 * self.f1_hz.abs()
                        ),
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn gaussian_edge(&self, t: f64) -> f64 {
        let d = (t - self.t_sw_s) / self.sigma_s;
        (-d * d).exp()
    }

    /// Chirp phase (rad) of the swept tone at segment-local t, excluding
    /// the stitching phase offset.
    fn chirp_phase(&self, t: f64) -> f64 {
        let target = if self.kind == SegmentKind::Sweep1 {
            self.f1_hz
        } else {
            self.f2_hz
        };
        TAU * (self.f_init_hz * t + (target - self.f_init_hz) / (2.0 * self.t_sw_s) * t * t)
    }

    /// Instantaneous frequency of the swept tone at segment-local t, Hz.
    pub fn instantaneous_sweep_frequency(&self, t: f64) -> f64 {
        let target = if self.kind == SegmentKind::Sweep1 {
            self.f1_hz
        } else {
            self.f2_hz
        };
        self.f_init_hz + (target - self.f_init_hz) * t / self.t_sw_s
    }

    /// Waveform value at segment-local time t.
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            SegmentKind::Sweep1 => {
                0.5 * self.gaussian_edge(t) * self.a1 * (self.chirp_phase(t) + self.phi1_rad).sin()
            }
            SegmentKind::Hold1 => 0.5 * self.a1 * (TAU * self.f1_hz * t + self.phi1_rad).sin(),
            SegmentKind::Sweep2 => {
                let fast = TAU * self.f1_hz * t + self.phi1_rad;
                0.5 * self.a1 * fast.sin()
                    + 0.5
                        * self.gaussian_edge(t)
                        * self.a2
                        * (fast + std::f64::consts::FRAC_PI_2).sin()
                        * (self.chirp_phase(t) + self.phi2_rad).sin()
            }
            SegmentKind::Hold2 => {
                let fast = TAU * self.f1_hz * t + self.phi1_rad;
                0.5 * self.a1 * fast.sin()
                    + 0.5
                        * self.a2
                        * (fast + std::f64::consts::FRAC_PI_2).sin()
                        * (TAU * self.f2_hz * t + self.phi2_rad).sin()
            }
        }
    }

    /// Fast-tone phase accumulated over the whole segment, rad
    /// (including the initial phi1).
    pub fn fast_phase_end(&self) -> f64 {
        match self.kind {
            SegmentKind::Sweep1 => self.chirp_phase(self.duration_s) + self.phi1_rad,
            _ => TAU * self.f1_hz * self.duration_s + self.phi1_rad,
        }
    }

    /// Slow-tone phase at segment end for segments that carry one.
    pub fn slow_phase_end(&self) -> Option<f64> {
        match self.kind {
            SegmentKind::Sweep2 => Some(self.chirp_phase(self.duration_s) + self.phi2_rad),
            SegmentKind::Hold2 => Some(TAU * self.f2_hz * self.duration_s + self.phi2_rad),
            _ => None,
        }
    }

    /// Largest instantaneous tone frequency present in the segment, Hz.
    pub fn max_tone_hz(&self) -> f64 {
        let fast = match self.kind {
            SegmentKind::Sweep1 => self.f1_hz.abs().max(self.f_init_hz.abs()),
            _ => self.f1_hz.abs(),
        };
        let slow = match self.kind {
            SegmentKind::Sweep2 => self.f2_hz.abs().max(self.f_init_hz.abs()),
            SegmentKind::Hold2 => self.f2_hz.abs(),
            _ => 0.0,
        };
        fast + slow
    }
}

/// Reference sweep parameter sets (sweep_range_1, t_sw1, sweep_range_2, t_sw2),
/// ranges in Hz, times in seconds. The range convention is
/// delta_w_sw = f_target - f_init.
pub const TABLE_SWEEPS_RESONANT: (f64, f64, f64, f64) = (-150_000.0, 500e-6, 80_000.0, 7_000e-6);
pub const TABLE_SWEEPS_MAGIC: (f64, f64, f64, f64) = (-1_500_000.0, 500e-6, 30_000.0, 7_000e-6);

/// Program of solved, phase-continuous segments.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedProgram {
    pub segments: Vec<SegmentSpec>,
    /// Segment start times, s (same length as `segments`).
    pub starts_s: Vec<f64>,
    pub total_duration_s: f64,
}

/// Solve segment phases so every tone is phase-continuous at each
/// boundary, in the canonical order sweep1 -> hold1 -> sweep2 -> hold2
/// (subsets allowed).
pub fn stitch(specs: &[SegmentSpec]) -> Result<StitchedProgram> {
    if specs.is_empty() {
        return Err(CoreError::BadSegmentOrder("empty program".into()));
    }
    for w in specs.windows(2) {
        if w[1].kind <= w[0].kind {
            return Err(CoreError::BadSegmentOrder(format!(
                "{} may not follow {}",
                w[1].kind, w[0].kind
            )));
        }
    }
    for s in specs {
        s.validate()?;
    }

    let mut segments = Vec::with_capacity(specs.len());
    let mut starts = Vec::with_capacity(specs.len());
    let mut t0 = 0.0f64;
    let mut fast_phase: Option<f64> = None;
    let mut slow_phase: Option<f64> = None;
    for spec in specs {
        let mut seg = *spec;
        if let Some(ph) = fast_phase {
            seg.phi1_rad = ph.rem_euclid(TAU);
        }
        if let Some(ph) = slow_phase {
            if matches!(seg.kind, SegmentKind::Sweep2 | SegmentKind::Hold2) {
                seg.phi2_rad = ph.rem_euclid(TAU);
            }
        }
        fast_phase = Some(seg.fast_phase_end());
        if let Some(sp) = seg.slow_phase_end() {
            slow_phase = Some(sp);
        }
        starts.push(t0);
        t0 += seg.duration_s;
        segments.push(seg);
    }
    Ok(StitchedProgram {
        segments,
        starts_s: starts,
        total_duration_s: t0,
    })
}

impl StitchedProgram {
    /// Waveform value at global time t (0 outside the program).
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.total_duration_s {
            return 0.0;
        }
        let idx = match self
            .starts_s
            .iter()
            .rposition(|s| *s <= t + 1e-15)
        {
            Some(i) => i,
            None => return 0.0,
        };
        self.segments[idx].value(t - self.starts_s[idx])
    }

    pub fn max_tone_hz(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.max_tone_hz())
            .fold(0.0, f64::max)
    }

    /// Largest per-tone accumulated-phase mismatch across the segment
    /// boundaries, rad (wrapped to [-pi, pi]).
    pub fn boundary_phase_mismatch(&self) -> f64 {
        let wrap = |x: f64| {
            let y = x.rem_euclid(TAU);
            if y > std::f64::consts::PI {
                y - TAU
            } else {
                y
            }
        };
        let mut worst = 0.0f64;
        for w in self.segments.windows(2) {
            let fast_end = w[0].fast_phase_end();
            worst = worst.max(wrap(w[1].phi1_rad - fast_end).abs());
            if let (Some(slow_end), SegmentKind::Hold2) = (w[0].slow_phase_end(), w[1].kind) {
                worst = worst.max(wrap(w[1].phi2_rad - slow_end).abs());
            }
        }
        worst
    }

    /// Sample on a uniform grid. `sample_rate_hz` should satisfy the
    /// export precondition of at least ten samples per fastest tone cycle.
    pub fn sample(&self, sample_rate_hz: f64) -> SampledWaveform {
        let n = (self.total_duration_s * sample_rate_hz).round() as usize;
        let samples: Vec<f64> = (0..=n)
            .map(|k| self.value(k as f64 / sample_rate_hz))
            .collect();
        let boundaries = self
            .starts_s
            .iter()
            .skip(1)
            .map(|s| (s * sample_rate_hz).round() as usize)
            .collect();
        SampledWaveform {
            sample_rate_hz,
            samples,
            segment_boundaries: boundaries,
            max_tone_hz: self.max_tone_hz(),
        }
    }
}

/// Uniformly sampled waveform with segment-boundary bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    pub segment_boundaries: Vec<usize>,
    /// Largest tone frequency present, Hz (drives the export precondition).
    pub max_tone_hz: f64,
}

impl SampledWaveform {
    /// Largest sample-to-sample jump across the recorded boundaries.
    pub fn max_boundary_jump(&self) -> f64 {
        self.segment_boundaries
            .iter()
            .filter(|&&b| b > 0 && b < self.samples.len())
            .map(|&b| (self.samples[b] - self.samples[b - 1]).abs())
            .fold(0.0, f64::max)
    }
}
