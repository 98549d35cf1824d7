//! Run configuration: flat sectioned key = value text (hand-editable,
//! with the reference table's naming) plus an equivalent JSON form.
//! Unknown keys are rejected with their line numbers; every run emits a
//! resolved snapshot of the configuration it actually used.

use serde::Deserialize;

use cddclock_core::constants::{G_FACTOR_D, G_FACTOR_S, QUADRUPOLE_MOMENT_E_A0SQ};
use cddclock_core::dressing::{self, CddParameterSet, TargetTransition};
use cddclock_core::spin::SpinManifold;
use cddclock_core::PhysicalConstants;

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse { line: usize, message: String },
    UnknownKey { line: usize, key: String },
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "config i/o error: {m}"),
            ConfigError::Parse { line, message } => {
                write!(f, "config parse error on line {line}: {message}")
            }
            ConfigError::UnknownKey { line, key } => {
                write!(f, "unknown config key \"{key}\" on line {line}")
            }
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Built-in parameter presets, populated verbatim from the reference
/// drive-parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Resonant,
    Magic,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resonant" => Ok(Preset::Resonant),
            "magic" => Ok(Preset::Magic),
            other => Err(format!("unknown preset \"{other}\" (expected resonant|magic)")),
        }
    }
}

macro_rules! config_fields {
    ($(($section:literal, $key:literal, $field:ident)),+ $(,)?) => {
        /// All recognised configuration keys, every one optional; defaults
        /// are applied during resolution.
        #[derive(Debug, Clone, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct RawConfig {
            $(pub $field: Option<f64>,)+
            /// non-numeric keys handled separately
            pub readout: Option<String>,
            pub method: Option<String>,
            pub output_dir: Option<String>,
        }

        impl RawConfig {
            fn set_numeric(&mut self, section: &str, key: &str, value: f64) -> bool {
                match (section, key) {
                    $(($section, $key) => { self.$field = Some(value); true },)+
                    _ => false,
                }
            }
        }
    };
}

config_fields![
    ("constants", "mu_B_over_h", mu_b_over_h),
    ("constants", "electron_charge", electron_charge),
    ("constants", "bohr_radius", bohr_radius),
    ("constants", "ion_mass", ion_mass),
    ("constants", "coulomb_constant_e2", coulomb_constant_e2),
    ("constants", "planck_h", planck_h),
    ("cdd", "g_S", g_s),
    ("cdd", "g_D", g_d),
    ("cdd", "omega_S1", omega_s1),
    ("cdd", "omega_D1", omega_d1),
    ("cdd", "Omega_S1", amp_s1),
    ("cdd", "Omega_D1", amp_d1),
    ("cdd", "Omega_S2", amp_s2),
    ("cdd", "Omega_D2", amp_d2),
    ("cdd", "omega_S2", omega_s2),
    ("cdd", "omega_D2", omega_d2),
    ("cdd", "Delta_1S", delta_1s),
    ("cdd", "Delta_2S", delta_2s),
    ("cdd", "Delta_1D", delta_1d),
    ("cdd", "Delta_2D", delta_2d),
    ("cdd", "laser_Omega", laser_omega),
    ("cdd", "theta_Q", theta_q),
    ("cdd", "m0_S", m0_s),
    ("cdd", "m1_S", m1_s),
    ("cdd", "m2_S", m2_s),
    ("cdd", "m0_D", m0_d),
    ("cdd", "m1_D", m1_d),
    ("cdd", "m2_D", m2_d),
    ("trap", "omega_z", trap_omega_z),
    ("trap", "omega_r", trap_omega_r),
    ("trap", "N", trap_n),
    ("waveform", "Delta_omega_sw1", delta_omega_sw1),
    ("waveform", "t_sw1", t_sw1_us),
    ("waveform", "Delta_omega_sw2", delta_omega_sw2),
    ("waveform", "t_sw2", t_sw2_us),
    ("waveform", "sigma_factor", sigma_factor),
    ("waveform", "hold2", hold2_us),
    ("waveform", "sample_rate", sample_rate),
    ("waveform", "calib", calib),
    ("waveform", "Q_S", coil_q_s),
    ("waveform", "Q_D", coil_q_d),
    ("waveform", "coil_gain", coil_gain),
    ("noise", "mains_50", mains_50_nt),
    ("noise", "mains_100", mains_100_nt),
    ("noise", "mains_150", mains_150_nt),
    ("noise", "slow_drift", slow_drift_nt),
    ("noise", "b_grad_linear", b_grad_linear),
    ("noise", "b_grad_quad", b_grad_quad),
    ("noise", "drive_amp_noise", drive_amp_noise),
    ("servo", "probe_time", probe_time),
    ("servo", "cycle_time", cycle_time),
    ("servo", "gain", servo_gain),
    ("servo", "half_width", half_width),
    ("servo", "projection_noise", projection_noise),
    ("servo", "injected_offset", injected_offset),
    ("servo", "quad_coeff", quad_coeff),
    ("dynamics", "max_period", max_period),
    ("dynamics", "dt_factor", dt_factor),
    ("dynamics", "cross_coupling", cross_coupling),
    ("dynamics", "quad_gradient", quad_gradient),
    ("dynamics", "probe_time", dyn_probe_time),
    ("scan", "span", scan_span),
    ("scan", "points", scan_points),
    ("scan", "shots", scan_shots),
    ("clock", "duration", clock_duration),
    ("run", "seed", seed),
];

impl RawConfig {
    fn set_string(&mut self, section: &str, key: &str, value: &str) -> bool {
        match (section, key) {
            ("servo", "readout") => {
                self.readout = Some(value.to_string());
                true
            }
            ("dynamics", "method") => {
                self.method = Some(value.to_string());
                true
            }
            ("run", "output_dir") => {
                self.output_dir = Some(value.to_string());
                true
            }
            _ => false,
        }
    }
}

/// Parse the sectioned key = value text format.
pub fn parse_ini(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut section = String::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Parse {
            line: lineno,
            message: format!("expected key = value, got \"{trimmed}\""),
        })?;
        let key = key.trim();
        let value = value.trim();
        if raw.set_string(&section, key, value) {
            continue;
        }
        let parsed: f64 = match value {
            "true" | "camera" => 1.0,
            "false" | "pmt" => 0.0,
            v => v.parse().map_err(|_| ConfigError::Parse {
                line: lineno,
                message: format!("cannot parse value \"{v}\" for key \"{key}\""),
            })?,
        };
        if !raw.set_numeric(&section, key, parsed) {
            return Err(ConfigError::UnknownKey {
                line: lineno,
                key: if section.is_empty() {
                    key.to_string()
                } else {
                    format!("{section}.{key}")
                },
            });
        }
    }
    Ok(raw)
}

/// Parse the JSON mirror: one flat object of "section.key" entries.
pub fn parse_json(text: &str) -> Result<RawConfig, ConfigError> {
    let map: std::collections::BTreeMap<String, serde_json::Value> =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut raw = RawConfig::default();
    for (full_key, value) in map {
        let (section, key) = full_key.split_once('.').unwrap_or(("", full_key.as_str()));
        if let Some(s) = value.as_str() {
            if raw.set_string(section, key, s) {
                continue;
            }
        }
        let num = value
            .as_f64()
            .or_else(|| value.as_bool().map(|b| if b { 1.0 } else { 0.0 }))
            .ok_or_else(|| ConfigError::Invalid(format!("non-numeric value for {full_key}")))?;
        if !raw.set_numeric(section, key, num) {
            return Err(ConfigError::UnknownKey {
                line: 0,
                key: full_key,
            });
        }
    }
    Ok(raw)
}

/// Load a configuration file (JSON if the extension is .json, the
/// sectioned text format otherwise).
pub fn load(path: &std::path::Path) -> Result<RawConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        parse_json(&text)
    } else {
        parse_ini(&text)
    }
}

/// Fully resolved configuration with defaults applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub consts: PhysicalConstants,
    pub set: CddParameterSet,
    /// Hardware (printed-table) drive frequencies for waveform synthesis.
    pub hw_omega_s1: f64,
    pub hw_omega_d1: f64,
    pub hw_omega_s2: f64,
    pub hw_omega_d2: f64,
    pub sweeps: (f64, f64, f64, f64), // range1 Hz, t1 s, range2 Hz, t2 s
    pub sigma_factor: f64,
    pub hold2_s: f64,
    pub sample_rate_hz: f64,
    pub calib: f64,
    pub coil_q_s: f64,
    pub coil_q_d: f64,
    pub coil_gain: f64,
    pub theta_q_si: f64,
    pub trap: cddclock_core::crystal::TrapConfig,
    pub noise: cddclock_core::clocksim::NoiseModel,
    pub servo: cddclock_core::clocksim::ServoConfig,
    pub max_period_s: f64,
    pub dt_factor: f64,
    pub method: cddclock_core::dynamics::Method,
    pub cross_coupling: bool,
    pub quad_gradient: f64,
    pub dyn_probe_time_s: f64,
    pub scan_span_hz: f64,
    pub scan_points: usize,
    pub scan_shots: u32,
    pub clock_duration_s: f64,
    pub seed: u64,
    pub output_dir: std::path::PathBuf,
}

/// Default second-sweep range, Hz. The printed resonant-column value
/// (+80 kHz over 7 ms) under-runs the second-stage gap adiabaticity and
/// caps the preparation near 92%; the printed magic-column value
/// (+30 kHz over the same 7 ms) reaches the quoted >97% transfer, so it
/// is the preset default for both sets. Override with
/// waveform.Delta_omega_sw2.
pub const DEFAULT_SWEEP2_RANGE_HZ: f64 = 30_000.0;

impl RunConfig {
    pub fn resolve(raw: RawConfig, preset: Preset) -> Result<Self, ConfigError> {
        let mut consts = PhysicalConstants::default();
        if let Some(v) = raw.mu_b_over_h {
            consts.mu_b_over_h = v;
        }
        if let Some(v) = raw.electron_charge {
            consts.electron_charge = v;
        }
        if let Some(v) = raw.bohr_radius {
            consts.bohr_radius = v;
        }
        if let Some(v) = raw.ion_mass {
            consts.ion_mass = v;
        }
        if let Some(v) = raw.coulomb_constant_e2 {
            consts.coulomb_constant_e2 = v;
        }
        if let Some(v) = raw.planck_h {
            consts.planck_h = v;
        }
        consts
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let g_s = raw.g_s.unwrap_or(G_FACTOR_S);
        let g_d = raw.g_d.unwrap_or(G_FACTOR_D);
        let omega_s1 = raw.omega_s1.unwrap_or(dressing::TABLE_OMEGA_S1);
        let b0 = omega_s1 / (g_s * consts.mu_b_over_h);

        let amps = [
            raw.amp_s1.unwrap_or(dressing::TABLE_AMP_S1),
            raw.amp_s2.unwrap_or(dressing::TABLE_AMP_S2),
            raw.amp_d1.unwrap_or(dressing::TABLE_AMP_D1),
            raw.amp_d2.unwrap_or(dressing::TABLE_AMP_D2),
        ];
        let magic_delta2d = -dressing::magic_detuning_demodulated(amps[3], g_d);
        let magic_delta2s = {
            let wbar1s = dressing::dressed_splitting(amps[0], 0.0, g_s);
            wbar1s - dressing::TABLE_OMEGA_S2_MAGIC
        };
        let (d1s_def, d2s_def, d1d_def, d2d_def) = match preset {
            Preset::Resonant => (0.0, 0.0, 0.0, 0.0),
            Preset::Magic => (0.0, magic_delta2s, 0.0, magic_delta2d),
        };
        let deltas = [
            raw.delta_1s.unwrap_or(d1s_def),
            raw.delta_2s.unwrap_or(d2s_def),
            raw.delta_1d.unwrap_or(d1d_def),
            raw.delta_2d.unwrap_or(d2d_def),
        ];
        let target = TargetTransition {
            m0_s: raw.m0_s.unwrap_or(-0.5),
            m1_s: raw.m1_s.unwrap_or(0.5),
            m2_s: raw.m2_s.unwrap_or(0.5),
            m0_d: raw.m0_d.unwrap_or(-1.5),
            m1_d: raw.m1_d.unwrap_or(0.5),
            m2_d: raw.m2_d.unwrap_or(0.5),
        };
        let s = SpinManifold::new(
            cddclock_core::spin::ManifoldLabel::S,
            cddclock_core::spin::HalfSpin::from_twice(1),
            g_s,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = SpinManifold::new(
            cddclock_core::spin::ManifoldLabel::D,
            cddclock_core::spin::HalfSpin::from_twice(5),
            g_d,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let set = CddParameterSet::from_detunings(
            &consts,
            b0,
            s,
            d,
            amps,
            deltas,
            raw.laser_omega.unwrap_or(5.0),
            target,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let (hw_s2_def, hw_d2_def) = match preset {
            Preset::Resonant => (
                dressing::TABLE_OMEGA_S2_RESONANT,
                dressing::TABLE_OMEGA_D2_RESONANT,
            ),
            Preset::Magic => (
                dressing::TABLE_OMEGA_S2_MAGIC,
                dressing::TABLE_OMEGA_D2_MAGIC,
            ),
        };

        let trap = cddclock_core::crystal::TrapConfig::new(
            std::f64::consts::TAU * raw.trap_omega_z.unwrap_or(683e3),
            std::f64::consts::TAU * raw.trap_omega_r.unwrap_or(2.0e6),
            raw.trap_n.unwrap_or(5.0) as usize,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let noise = cddclock_core::clocksim::NoiseModel {
            mains: vec![
                cddclock_core::clocksim::MainsHarmonic {
                    freq_hz: 50.0,
                    amplitude_nt: raw.mains_50_nt.unwrap_or(6.0),
                    phase_rad: 0.0,
                },
                cddclock_core::clocksim::MainsHarmonic {
                    freq_hz: 100.0,
                    amplitude_nt: raw.mains_100_nt.unwrap_or(2.0),
                    phase_rad: 0.7,
                },
                cddclock_core::clocksim::MainsHarmonic {
                    freq_hz: 150.0,
                    amplitude_nt: raw.mains_150_nt.unwrap_or(1.0),
                    phase_rad: 1.9,
                },
            ],
            slow_drift_nt: raw.slow_drift_nt.unwrap_or(5.0),
            b_gradient_linear_nt_per_um: raw.b_grad_linear.unwrap_or(0.0),
            b_gradient_quad_nt_per_um2: raw.b_grad_quad.unwrap_or(0.0),
            drive_amp_noise_bound: raw.drive_amp_noise.unwrap_or(6e-5),
            seed: raw.seed.unwrap_or(1.0) as u64,
        };

        let servo = cddclock_core::clocksim::ServoConfig {
            probe_time_s: raw.probe_time.unwrap_or(0.1),
            cycle_time_s: raw.cycle_time.unwrap_or(0.3),
            gain: raw.servo_gain.unwrap_or(0.5),
            half_width_hz: raw.half_width.filter(|h| *h > 0.0),
            readout: match raw.readout.as_deref() {
                None | Some("camera") => cddclock_core::clocksim::Readout::Camera,
                Some("pmt") => cddclock_core::clocksim::Readout::Pmt,
                Some(other) => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown readout \"{other}\" (expected camera|pmt)"
                    )))
                }
            },
            projection_noise: raw.projection_noise.map(|v| v != 0.0).unwrap_or(true),
            injected_offset_hz: raw.injected_offset.unwrap_or(0.0),
            quadratic_hz_per_nt2: raw.quad_coeff.unwrap_or(-1.2e-4),
            ..Default::default()
        };

        let method = match raw.method.as_deref() {
            None | Some("cf4") => cddclock_core::dynamics::Method::CommutatorFree4,
            Some("midpoint") => cddclock_core::dynamics::Method::MidpointExponential,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown method \"{other}\" (expected midpoint|cf4)"
                )))
            }
        };

        let output_dir = raw
            .output_dir
            .clone()
            .or_else(|| std::env::var("CDDCLOCK_OUTPUT_DIR").ok())
            .unwrap_or_else(|| "output".to_string());
        let theta_q_si =
            consts.quadrupole_moment_si(raw.theta_q.unwrap_or(QUADRUPOLE_MOMENT_E_A0SQ));

        Ok(Self {
            consts,
            hw_omega_s1: omega_s1,
            hw_omega_d1: raw.omega_d1.unwrap_or(dressing::TABLE_OMEGA_D1),
            hw_omega_s2: raw.omega_s2.unwrap_or(hw_s2_def),
            hw_omega_d2: raw.omega_d2.unwrap_or(hw_d2_def),
            sweeps: (
                raw.delta_omega_sw1.unwrap_or(-150_000.0),
                raw.t_sw1_us.unwrap_or(500.0) * 1e-6,
                raw.delta_omega_sw2.unwrap_or(DEFAULT_SWEEP2_RANGE_HZ),
                raw.t_sw2_us.unwrap_or(7_000.0) * 1e-6,
            ),
            sigma_factor: raw.sigma_factor.unwrap_or(1.0 / 3.0),
            hold2_s: raw.hold2_us.unwrap_or(200.0) * 1e-6,
            sample_rate_hz: raw.sample_rate.unwrap_or(125e6),
            calib: raw.calib.unwrap_or(1.0),
            coil_q_s: raw.coil_q_s.unwrap_or(cddclock_core::waveform::COIL_Q_S),
            coil_q_d: raw.coil_q_d.unwrap_or(cddclock_core::waveform::COIL_Q_D),
            coil_gain: raw.coil_gain.unwrap_or(1.0),
            theta_q_si,
            trap,
            noise,
            servo,
            max_period_s: raw.max_period.unwrap_or(2e-3),
            dt_factor: raw.dt_factor.unwrap_or(50.0),
            method,
            cross_coupling: raw.cross_coupling.map(|v| v != 0.0).unwrap_or(false),
            quad_gradient: raw.quad_gradient.unwrap_or(0.0),
            dyn_probe_time_s: raw.dyn_probe_time.unwrap_or(0.1),
            scan_span_hz: raw.scan_span.unwrap_or(40.0),
            scan_points: raw.scan_points.unwrap_or(41.0) as usize,
            scan_shots: raw.scan_shots.unwrap_or(200.0) as u32,
            clock_duration_s: raw.clock_duration.unwrap_or(600.0),
            seed: raw.seed.unwrap_or(1.0) as u64,
            output_dir: std::path::PathBuf::from(output_dir),
            set,
        })
    }

    /// Canonical snapshot of the resolved configuration, rendered in the
    /// sectioned text format. Hashing this string identifies the run.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        // resolved values: refill the raw pairs with defaults applied
        let resolved = self.resolved_pairs();
        for (sec, key, value) in resolved {
            if sec != section {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{sec}]\n"));
                section = sec;
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out.push_str(&format!(
            "\n[servo.str]\nreadout = {}\n[dynamics.str]\nmethod = {}\n",
            match self.servo.readout {
                cddclock_core::clocksim::Readout::Camera => "camera",
                cddclock_core::clocksim::Readout::Pmt => "pmt",
            },
            match self.method {
                cddclock_core::dynamics::Method::CommutatorFree4 => "cf4",
                cddclock_core::dynamics::Method::MidpointExponential => "midpoint",
            },
        ));
        out
    }

    fn resolved_pairs(&self) -> Vec<(&'static str, &'static str, String)> {
        let f = |v: f64| format!("{v}");
        vec![
            ("constants", "mu_B_over_h", f(self.consts.mu_b_over_h)),
            ("constants", "electron_charge", f(self.consts.electron_charge)),
            ("constants", "bohr_radius", f(self.consts.bohr_radius)),
            ("constants", "ion_mass", f(self.consts.ion_mass)),
            ("constants", "coulomb_constant_e2", f(self.consts.coulomb_constant_e2)),
            ("constants", "planck_h", f(self.consts.planck_h)),
            ("cdd", "g_S", f(self.set.s.g)),
            ("cdd", "g_D", f(self.set.d.g)),
            ("cdd", "omega_S1", f(self.hw_omega_s1)),
            ("cdd", "omega_D1", f(self.hw_omega_d1)),
            ("cdd", "Omega_S1", f(self.set.stage1_s.amp_hz)),
            ("cdd", "Omega_D1", f(self.set.stage1_d.amp_hz)),
            ("cdd", "Omega_S2", f(self.set.stage2_s.amp_hz)),
            ("cdd", "Omega_D2", f(self.set.stage2_d.amp_hz)),
            ("cdd", "omega_S2", f(self.hw_omega_s2)),
            ("cdd", "omega_D2", f(self.hw_omega_d2)),
            ("cdd", "Delta_1S", f(self.set.stage1_s.delta_hz)),
            ("cdd", "Delta_2S", f(self.set.stage2_s.delta_hz)),
            ("cdd", "Delta_1D", f(self.set.stage1_d.delta_hz)),
            ("cdd", "Delta_2D", f(self.set.stage2_d.delta_hz)),
            ("cdd", "laser_Omega", f(self.set.laser_omega_hz)),
            ("cdd", "m0_S", f(self.set.target.m0_s)),
            ("cdd", "m1_S", f(self.set.target.m1_s)),
            ("cdd", "m2_S", f(self.set.target.m2_s)),
            ("cdd", "m0_D", f(self.set.target.m0_d)),
            ("cdd", "m1_D", f(self.set.target.m1_d)),
            ("cdd", "m2_D", f(self.set.target.m2_d)),
            ("trap", "omega_z", f(self.trap.omega_z / std::f64::consts::TAU)),
            ("trap", "omega_r", f(self.trap.omega_r / std::f64::consts::TAU)),
            ("trap", "N", f(self.trap.n_ions as f64)),
            ("waveform", "Delta_omega_sw1", f(self.sweeps.0)),
            ("waveform", "t_sw1", f(self.sweeps.1 * 1e6)),
            ("waveform", "Delta_omega_sw2", f(self.sweeps.2)),
            ("waveform", "t_sw2", f(self.sweeps.3 * 1e6)),
            ("waveform", "sigma_factor", f(self.sigma_factor)),
            ("waveform", "hold2", f(self.hold2_s * 1e6)),
            ("waveform", "sample_rate", f(self.sample_rate_hz)),
            ("waveform", "calib", f(self.calib)),
            ("waveform", "Q_S", f(self.coil_q_s)),
            ("waveform", "Q_D", f(self.coil_q_d)),
            ("waveform", "coil_gain", f(self.coil_gain)),
            ("noise", "mains_50", f(self.noise.mains[0].amplitude_nt)),
            ("noise", "mains_100", f(self.noise.mains[1].amplitude_nt)),
            ("noise", "mains_150", f(self.noise.mains[2].amplitude_nt)),
            ("noise", "slow_drift", f(self.noise.slow_drift_nt)),
            ("noise", "b_grad_linear", f(self.noise.b_gradient_linear_nt_per_um)),
            ("noise", "b_grad_quad", f(self.noise.b_gradient_quad_nt_per_um2)),
            ("noise", "drive_amp_noise", f(self.noise.drive_amp_noise_bound)),
            ("servo", "probe_time", f(self.servo.probe_time_s)),
            ("servo", "cycle_time", f(self.servo.cycle_time_s)),
            ("servo", "gain", f(self.servo.gain)),
            ("servo", "half_width", f(self.servo.half_width())),
            (
                "servo",
                "projection_noise",
                f(if self.servo.projection_noise { 1.0 } else { 0.0 }),
            ),
            ("servo", "injected_offset", f(self.servo.injected_offset_hz)),
            ("servo", "quad_coeff", f(self.servo.quadratic_hz_per_nt2)),
            ("dynamics", "max_period", f(self.max_period_s)),
            ("dynamics", "dt_factor", f(self.dt_factor)),
            (
                "dynamics",
                "cross_coupling",
                f(if self.cross_coupling { 1.0 } else { 0.0 }),
            ),
            ("dynamics", "quad_gradient", f(self.quad_gradient)),
            ("dynamics", "probe_time", f(self.dyn_probe_time_s)),
            ("scan", "span", f(self.scan_span_hz)),
            ("scan", "points", f(self.scan_points as f64)),
            ("scan", "shots", f(self.scan_shots as f64)),
            ("clock", "duration", f(self.clock_duration_s)),
            ("run", "seed", f(self.seed as f64)),
        ]
    }

    /// FNV-1a hash of the canonical snapshot.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.snapshot().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }
}
