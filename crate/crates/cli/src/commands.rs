//! Subcommand implementations.

use cddclock_core::clocksim::{
    default_taus, overlapping_allan, per_ion_line_scan, run_clock_servo, ClockIons,
    LineScanConfig,
};
use cddclock_core::crystal::{axial_field_gradient, equilibrium_positions, inhomogeneity_fit,
    per_ion_qps};
use cddclock_core::dressing::{
    artificial_transition_frequency, compensation_detuning_s, magic_detuning,
    magic_detuning_demodulated, qps_suppression_factor, zeeman_sensitivity, MixingAngles,
};
use cddclock_core::dynamics::{
    quasi_energies, simulate_adiabatic_preparation, Frame, PropagationConfig,
    QuasiEnergyOptions,
};
use cddclock_core::spin::{HalfSpin, ManifoldLabel};
use cddclock_core::waveform::{
    export_csv, export_raw_f32, precompensate, stitch, SegmentSpec, TransferFunctionModel,
};

use crate::config::RunConfig;
use crate::output::{fmt, read_clock_csv, ArtifactWriter};

pub type CmdResult = Result<(), Box<dyn std::error::Error>>;

fn quasi_opts(cfg: &RunConfig) -> QuasiEnergyOptions {
    QuasiEnergyOptions {
        max_period_s: cfg.max_period_s,
        method: cfg.method,
        dt_factor: cfg.dt_factor,
        stage2_on: true,
        cross_coupling: cfg.cross_coupling,
        delta_b_tesla: 0.0,
        quad_gradient_v_per_m2: cfg.quad_gradient,
    }
}

/// Closed-form dressed-state report: splittings, angles, sensitivities,
/// magic and compensation detunings.
pub fn analyze(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let set = &cfg.set;
    let angles = MixingAngles::from_set(set)?;
    let sens = zeeman_sensitivity(set, &angles, &cfg.consts);
    let mut bare = set.clone();
    bare.target.m2_s = -0.5;
    bare.target.m2_d = -0.5;
    let bare_sens = zeeman_sensitivity(&bare, &MixingAngles::bare(), &cfg.consts);
    let qps_factor = qps_suppression_factor(angles.cos_d1, angles.cos_d2);
    let comp = compensation_detuning_s(set, &cfg.consts)
        .map(fmt)
        .unwrap_or_else(|e| format!("unavailable ({e})"));

    let rows = vec![
        ("omega0_S_hz", fmt(set.omega0_s_hz)),
        ("omega0_D_hz", fmt(set.omega0_d_hz)),
        ("wbar1_S_hz", fmt(set.stage1_splitting_hz(ManifoldLabel::S))),
        ("wbar1_D_hz", fmt(set.stage1_splitting_hz(ManifoldLabel::D))),
        (
            "wbar1_S_hz_rounded",
            format!("{:.0}", set.stage1_splitting_hz(ManifoldLabel::S)),
        ),
        (
            "wbar1_D_hz_rounded",
            format!("{:.0}", set.stage1_splitting_hz(ManifoldLabel::D)),
        ),
        ("wbar2_S_hz", fmt(set.stage2_splitting_hz(ManifoldLabel::S))),
        ("wbar2_D_hz", fmt(set.stage2_splitting_hz(ManifoldLabel::D))),
        ("cos_theta1_S", fmt(angles.cos_s1)),
        ("cos_theta2_S", fmt(angles.cos_s2)),
        ("cos_theta1_D", fmt(angles.cos_d1)),
        ("cos_theta2_D", fmt(angles.cos_d2)),
        ("zeeman_sensitivity_hz_per_nt", fmt(sens)),
        ("bare_sensitivity_hz_per_nt", fmt(bare_sens)),
        ("qps_suppression_factor", fmt(qps_factor)),
        (
            "magic_detuning_printed_hz",
            fmt(magic_detuning(set.stage2_d.amp_hz, set.d.g)),
        ),
        (
            "magic_detuning_demodulated_hz",
            fmt(magic_detuning_demodulated(set.stage2_d.amp_hz, set.d.g)),
        ),
        ("compensation_delta2_S_hz", comp),
        (
            "artificial_transition_offset_hz",
            fmt(artificial_transition_frequency(set)),
        ),
        (
            "quadratic_zeeman_offset_hz",
            fmt(cddclock_core::clocksim::quadratic_zeeman_offset(
                set.b0_tesla,
                cddclock_core::clocksim::QUADRATIC_ZEEMAN_HZ_PER_T2,
            )),
        ),
    ];
    out.write_csv(
        "analyze.csv",
        "key,value",
        rows.into_iter().map(|(k, v)| format!("{k},{v}")),
    )?;
    Ok(())
}

/// Quasi-energy spectrum of both manifolds.
pub fn spectrum(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let spec = quasi_energies(&cfg.set, &cfg.consts, &quasi_opts(cfg))?;
    let mut rows = Vec::new();
    for sp in [&spec.s, &spec.d] {
        for l in &sp.levels {
            rows.push(format!(
                "{},{},{},{},{},{}",
                sp.manifold,
                l.m_label,
                fmt(l.energy_hz),
                fmt(l.overlap),
                fmt(sp.omega1_rounding_hz),
                fmt(sp.grid_hz),
            ));
        }
    }
    out.write_csv(
        "spectrum.csv",
        "manifold,m_label,energy_hz,overlap,carrier_rounding_hz,grid_hz",
        rows.into_iter(),
    )?;
    let offset = spec.transition_offset_hz(&cfg.set.target);
    let analytic = spec.analytic_offset_at_simulated(&cfg.set.target);
    out.write_csv(
        "spectrum_summary.csv",
        "key,value",
        [
            format!("transition_offset_hz,{}", fmt(offset)),
            format!("analytic_offset_at_simulated_hz,{}", fmt(analytic)),
            format!(
                "label_warning,{}",
                spec.label_warning.as_deref().unwrap_or("none")
            ),
        ]
        .into_iter(),
    )?;
    Ok(())
}

fn preparation_program(cfg: &RunConfig, manifold: ManifoldLabel) -> CmdResult2<cddclock_core::waveform::StitchedProgram> {
    let set = &cfg.set;
    let (a1, a2, f1, f2) = match manifold {
        ManifoldLabel::S => (
            set.stage1_s.amp_hz,
            set.stage2_s.amp_hz,
            set.stage1_s.omega_hz,
            set.stage2_s.omega_hz,
        ),
        ManifoldLabel::D => (
            set.stage1_d.amp_hz,
            set.stage2_d.amp_hz,
            set.stage1_d.omega_hz,
            set.stage2_d.omega_hz,
        ),
    };
    let (r1, t1, r2, t2) = cfg.sweeps;
    let mut s1 = SegmentSpec::sweep1(a1, f1, r1, t1);
    s1.sigma_s = t1 * cfg.sigma_factor;
    let mut s2 = SegmentSpec::sweep2(a1, a2, f1, f2, r2, t2);
    s2.sigma_s = t2 * cfg.sigma_factor;
    let h2 = SegmentSpec::hold2(a1, a2, f1, f2, cfg.hold2_s);
    Ok(stitch(&[s1, s2, h2])?)
}

type CmdResult2<T> = Result<T, Box<dyn std::error::Error>>;

/// Adiabatic-preparation fidelity on the S manifold.
pub fn prepare(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let prog = preparation_program(cfg, ManifoldLabel::S)?;
    let pcfg = PropagationConfig {
        dt_s: None,
        method: cfg.method,
        frame: Frame::Lab,
    };
    let res = simulate_adiabatic_preparation(
        &cfg.set,
        &cfg.consts,
        ManifoldLabel::S,
        &prog,
        cfg.set.target.m0_s,
        &pcfg,
    )?;
    let mut rows: Vec<String> = res
        .populations
        .iter()
        .map(|(m, p)| format!("{m},{}", fmt(*p)))
        .collect();
    rows.push(format!("target,{}", fmt(res.target_population)));
    if let Some(w) = &res.non_adiabatic_warning {
        rows.push(format!("warning,{w}"));
    }
    out.write_csv("prepare.csv", "dressed_m2,population", rows.into_iter())?;
    Ok(())
}

/// Per-ion line scans with centre fits and the inhomogeneity summary.
pub fn scan(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let crystal = equilibrium_positions(&cfg.trap, &cfg.consts)?;
    let grads = axial_field_gradient(&crystal, &cfg.trap, &cfg.consts)?;
    let qps = per_ion_qps(
        &grads,
        cfg.theta_q_si,
        HalfSpin::from_twice(5),
        cfg.set.target.m2_d,
        1.0,
        &cfg.consts,
    );
    let n = cfg.scan_points.max(3);
    let detunings: Vec<f64> = (0..n)
        .map(|k| -cfg.scan_span_hz + 2.0 * cfg.scan_span_hz * k as f64 / (n - 1) as f64)
        .collect();
    let scan_cfg = LineScanConfig {
        detunings_hz: detunings,
        shots_per_point: cfg.scan_shots,
        probe_time_s: cfg.servo.probe_time_s,
        ..Default::default()
    };
    let res = per_ion_line_scan(
        &cfg.set,
        &cfg.consts,
        &crystal.positions_m,
        &qps,
        &cfg.noise,
        &scan_cfg,
    )?;
    let mut rows = Vec::new();
    for (i, ion) in res.ions.iter().enumerate() {
        for (d, p) in &ion.curve {
            rows.push(format!("{i},{},{}", fmt(*d), fmt(*p)));
        }
    }
    out.write_csv("scan.csv", "ion,detuning_hz,excitation", rows.into_iter())?;
    let mut fit_rows = Vec::new();
    for (i, ion) in res.ions.iter().enumerate() {
        fit_rows.push(format!(
            "{i},{},{},{},{}",
            fmt(ion.position_m * 1e6),
            fmt(ion.center_hz),
            fmt(ion.center_err_hz),
            if ion.fit_failed {
                "failed"
            } else if ion.fallback_fit {
                "fallback"
            } else {
                "ok"
            }
        ));
    }
    out.write_csv(
        "scan_fits.csv",
        "ion,position_um,center_hz,center_err_hz,fit",
        fit_rows.into_iter(),
    )?;
    let centers: Vec<f64> = res.ions.iter().map(|i| i.center_hz).collect();
    if centers.iter().all(|c| c.is_finite()) {
        let fit = inhomogeneity_fit(&crystal.positions_m, &centers)?;
        out.write_csv(
            "scan_inhomogeneity.csv",
            "key,value",
            [
                format!("linear_hz_per_um,{}", fmt(fit.linear_hz_per_um)),
                format!("quadratic_hz_per_um2,{}", fmt(fit.quadratic_hz_per_um2)),
                format!("spread_hz,{}", fmt(fit.spread_hz)),
            ]
            .into_iter(),
        )?;
    }
    Ok(())
}

/// Crystal mechanics: positions, gradients, per-ion quadrupole shifts.
pub fn crystal(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let crystal = equilibrium_positions(&cfg.trap, &cfg.consts)?;
    let grads = axial_field_gradient(&crystal, &cfg.trap, &cfg.consts)?;
    let angles = MixingAngles::from_set(&cfg.set)?;
    let suppression = qps_suppression_factor(angles.cos_d1, angles.cos_d2);
    let bare32 = per_ion_qps(
        &grads,
        cfg.theta_q_si,
        HalfSpin::from_twice(5),
        1.5,
        1.0,
        &cfg.consts,
    );
    let dressed = per_ion_qps(
        &grads,
        cfg.theta_q_si,
        HalfSpin::from_twice(5),
        cfg.set.target.m2_d,
        suppression,
        &cfg.consts,
    );
    let rows = (0..crystal.n_ions()).map(|i| {
        format!(
            "{i},{},{},{},{}",
            fmt(crystal.positions_m[i] * 1e6),
            fmt(grads.per_ion_v_per_m2[i]),
            fmt(bare32[i]),
            fmt(dressed[i]),
        )
    });
    out.write_csv(
        "crystal.csv",
        "ion,position_um,gradient_v_per_m2,qps_bare_m32_hz,qps_dressed_target_hz",
        rows,
    )?;
    Ok(())
}

/// Synthesize the preparation program, pre-compensate it against the
/// coil response, and export samples for both coils.
pub fn waveform(cfg: &RunConfig, out: &ArtifactWriter, raw_binary: bool) -> CmdResult {
    for (tag, manifold, f0, q) in [
        ("s", ManifoldLabel::S, cfg.hw_omega_s1, cfg.coil_q_s),
        ("d", ManifoldLabel::D, cfg.hw_omega_d1, cfg.coil_q_d),
    ] {
        // hardware-facing program at the printed drive frequencies
        let set = &cfg.set;
        let (a1, a2, f2) = match manifold {
            ManifoldLabel::S => (set.stage1_s.amp_hz, set.stage2_s.amp_hz, cfg.hw_omega_s2),
            ManifoldLabel::D => (set.stage1_d.amp_hz, set.stage2_d.amp_hz, cfg.hw_omega_d2),
        };
        let (r1, t1, r2, t2) = cfg.sweeps;
        let mut s1 = SegmentSpec::sweep1(a1, f0, r1, t1);
        s1.sigma_s = t1 * cfg.sigma_factor;
        let mut s2 = SegmentSpec::sweep2(a1, a2, f0, f2, r2, t2);
        s2.sigma_s = t2 * cfg.sigma_factor;
        let h2 = SegmentSpec::hold2(a1, a2, f0, f2, cfg.hold2_s);
        let prog = stitch(&[s1, s2, h2])?;
        let model = TransferFunctionModel::from_q(f0, q, cfg.coil_gain)?;
        let comp = precompensate(&prog, &model)?;

        let wf = prog.sample(cfg.sample_rate_hz);
        let wf_comp = comp.sample(cfg.sample_rate_hz);
        export_csv(&wf, &out.path(&format!("wave_{tag}.csv")))?;
        export_csv(&wf_comp, &out.path(&format!("wave_{tag}_comp.csv")))?;
        if raw_binary {
            export_raw_f32(&wf, &out.path(&format!("wave_{tag}.f32")))?;
            export_raw_f32(&wf_comp, &out.path(&format!("wave_{tag}_comp.f32")))?;
        }
    }
    Ok(())
}

/// Run the two-point servo and write per-ion correction records.
pub fn clock(cfg: &RunConfig, out: &ArtifactWriter) -> CmdResult {
    let crystal = equilibrium_positions(&cfg.trap, &cfg.consts)?;
    let grads = axial_field_gradient(&crystal, &cfg.trap, &cfg.consts)?;
    let qps = per_ion_qps(
        &grads,
        cfg.theta_q_si,
        HalfSpin::from_twice(5),
        cfg.set.target.m2_d,
        1.0,
        &cfg.consts,
    );
    let ions = ClockIons {
        positions_m: crystal.positions_m.clone(),
        qps_bare_hz: qps,
    };
    let run = run_clock_servo(
        &cfg.set,
        &cfg.consts,
        &ions,
        &cfg.noise,
        &cfg.servo,
        cfg.clock_duration_s,
    )?;
    let mut rows = Vec::new();
    for (k, t) in run.timestamps_s.iter().enumerate() {
        for (ion, series) in run.corrections_hz.iter().enumerate() {
            rows.push(format!("{k},{},{ion},{}", fmt(*t), fmt(series[k])));
        }
    }
    out.write_csv("clock.csv", "pair,t_s,ion,correction_hz", rows.into_iter())?;
    Ok(())
}

/// Overlapping Allan deviation of a clock record file.
pub fn allan(_cfg: &RunConfig, out: &ArtifactWriter, input: &std::path::Path) -> CmdResult {
    let (times, series) = read_clock_csv(input).map_err(std::io::Error::other)?;
    if times.len() < 3 {
        return Err(Box::new(std::io::Error::other("record too short")));
    }
    let tau0 = if times.len() > 1 {
        times[1] - times[0]
    } else {
        1.0
    };
    let nu0 = cddclock_core::constants::CLOCK_FREQUENCY_HZ;
    let mut rows = Vec::new();
    for (ion, record) in series.iter().enumerate() {
        let y: Vec<f64> = record.iter().map(|c| c / nu0).collect();
        let taus = default_taus(y.len(), tau0);
        let res = overlapping_allan(&y, tau0, &taus)?;
        for p in res.points {
            rows.push(format!(
                "{ion},{},{},{}",
                fmt(p.tau_s),
                fmt(p.adev),
                fmt(p.error)
            ));
        }
        for (tau, why) in res.skipped {
            eprintln!("note: ion {ion}: tau {tau} s skipped: {why}");
        }
    }
    out.write_csv("adev.csv", "ion,tau_s,adev,adev_err", rows.into_iter())?;
    Ok(())
}
