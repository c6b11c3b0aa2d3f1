use dqubit_core::doc::{self, DocWriter};
use dqubit_core::dynamics::{
    evolve, evolve_pure, fit_rabi, make_synth_states, measure_populations, prepare_d1_by_rotation, prepare_d2_by_rotation,
    project_synth, stirap_prepare, trajectory_header, DecayModel, DriveKind, EffectiveDrive,
};
use dqubit_core::ramsey::{
    benchmark_qubits, benchmark_suite, calibrate_benchmark_noise, calibrate_noise, fit_t2star, predicted_t2, ramsey_scan,
    scan_delays, NoiseModel,
};
use dqubit_core::rng::derive_seed;
use dqubit_core::scatter::{
    detection_matrix_d, detection_matrix_s, find_dark_states_with, setting_label, BeamConfig, Color, DetectionMatrix,
    D_SETTINGS,
};
use dqubit_core::tomography::{solve_constrained, solve_direct, synth_counts};
use dqubit_core::{QuartetState, ZeemanState};

use crate::config::{Experiment, MatrixSource, Qubit, RunConfig};
use crate::{Artifact, CliError, RunOutput};

// Tags separating the random streams of independent sub-tasks within a run.
const TAG_MATRIX: u64 = 1;
const TAG_COUNTS: u64 = 2;
const TAG_READOUT: u64 = 3;

impl RunOutput {
    fn emit(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact { name: name.to_string(), contents });
    }
}

pub(crate) fn dispatch(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    match out.experiment {
        Experiment::DetmatrixS => detmatrix(config, out, false),
        Experiment::DetmatrixD => detmatrix(config, out, true),
        Experiment::Darkstates => darkstates(config, out),
        Experiment::Tomo => tomo(config, out),
        Experiment::Rabi => rabi(config, out),
        Experiment::Synthprep => synthprep(config, out),
        Experiment::Stirap => stirap(config, out),
        Experiment::Ramsey => ramsey(config, out),
        Experiment::Benchmark => benchmark(config, out),
    }
}

fn matrix_summary(m: &DetectionMatrix) -> Vec<String> {
    m.rows
        .iter()
        .zip(&m.mean)
        .zip(&m.stderr)
        .map(|((label, row), err)| {
            let cells: Vec<String> = row.iter().zip(err).map(|(v, e)| format!("{v:.3}±{e:.3}")).collect();
            format!("{label:>6}: {}", cells.join("  "))
        })
        .collect()
}

fn detmatrix(config: &RunConfig, out: &mut RunOutput, d: bool) -> Result<(), CliError> {
    let params = config.detection.params(config.constants);
    let trials = config.trials as usize;
    let (name, m) = if d {
        ("detmatrix_d.toml", detection_matrix_d(&params, trials, config.seed)?)
    } else {
        ("detmatrix_s.toml", detection_matrix_s(&params, trials, config.seed)?)
    };
    out.summary = matrix_summary(&m);
    out.warnings.extend(m.warnings.iter().cloned());
    out.emit(name, m.to_document(&out.provenance));
    Ok(())
}

fn darkstates(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let d = &config.detection;
    let mut w = DocWriter::new("dark_states", &out.provenance);
    w.comment("D3/2 dark states of the 650 nm settings; amplitudes ascending m_J")
        .float("b_gauss", d.b_gauss);
    for setting in D_SETTINGS {
        let beam = setting.iter().fold(BeamConfig::dark(Color::Red650), |b, &p| {
            b.with(p, d.saturation_650, d.offset_650[p.index()])
        });
        let states = find_dark_states_with(&config.constants, &beam, d.b_gauss)?;
        let label = setting_label(setting);
        let stationary = states.iter().filter(|s| s.stationary).count();
        out.summary.push(format!("{label:>6}: {} dark, {stationary} stationary", states.len()));
        for s in &states {
            let a = s.state.amplitudes();
            w.array_section("dark_state")
                .string("setting", &label)
                .boolean("stationary", s.stationary)
                .floats("re", &a.map(|c| c.re))
                .floats("im", &a.map(|c| c.im))
                .floats("populations", &s.state.populations());
        }
    }
    out.emit("darkstates.toml", w.finish());
    Ok(())
}

fn tomo(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let t = &config.tomo;
    let m = match t.matrix {
        MatrixSource::Published => DetectionMatrix::published_d(),
        MatrixSource::Simulated => detection_matrix_d(
            &config.detection.params(config.constants),
            t.matrix_trials as usize,
            derive_seed(config.seed, TAG_MATRIX),
        )?,
    };
    let counts = synth_counts(
        &t.populations,
        t.efficiency,
        t.background,
        &m,
        config.trials as u64,
        derive_seed(config.seed, TAG_COUNTS),
        t.convention,
        false,
    )?;
    out.emit("matrix.toml", m.to_document(&out.provenance));
    out.emit("counts.toml", counts.to_document(&out.provenance, &m.rows));
    match solve_direct(&counts, &m, t.convention) {
        Ok(e) => {
            out.summary.push(format!("direct:      d = {}", fmt_vec(&e.populations)));
            if !e.out_of_bounds.is_empty() {
                out.warnings.push(format!("direct solution outside [0, 1] at columns {:?}", e.out_of_bounds));
            }
            out.emit("estimate_direct.toml", e.to_document(&out.provenance));
        }
        Err(e) => out.warnings.push(format!("direct solve skipped: {e}")),
    }
    let e = solve_constrained(&counts, &m, t.efficiency, t.convention)?;
    out.summary.push(format!("constrained: d = {}", fmt_vec(&e.populations)));
    out.summary.push(format!("true:        d = {}", fmt_vec(&t.populations)));
    out.emit("estimate_constrained.toml", e.to_document(&out.provenance));
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", items.join(", "))
}

fn rabi(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let r = &config.rabi;
    let drive = EffectiveDrive::new(r.drive, r.rabi, r.phase)?.with_detuning(r.detuning);
    let decay = if r.tau.is_infinite() { DecayModel::none() } else { DecayModel::new(r.tau)? };
    let n = r.points as usize;
    let times: Vec<f64> = (0..n).map(|k| r.t_max * k as f64 / (n - 1) as f64).collect();
    let initial = QuartetState::basis(ZeemanState::d(r.initial_two_mj).index());
    let traj = evolve(&initial.to_density(), &drive, &decay, &times)?;
    let measured = measure_populations(&traj.populations, config.trials as u64, derive_seed(config.seed, TAG_READOUT))?;
    out.emit("trajectory.csv", traj.to_csv(&out.provenance));
    let header = trajectory_header();
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.emit(
        "measured.csv",
        doc::csv(&out.provenance, &refs, times.iter().zip(&measured).map(|(t, p)| vec![*t, p[0], p[1], p[2], p[3]])),
    );
    let fit = fit_rabi(&times, &measured, r.drive, &initial)?;
    out.summary.push(format!("Ω = {:.6e} ± {:.2e} rad/s (true {:.6e})", fit.omega, fit.omega_stderr, r.rabi));
    out.summary.push(format!("τ = {:.6e} ± {:.2e} s (true {:.6e})", fit.tau, fit.tau_stderr(), r.tau));
    out.warnings.extend(fit.flags.iter().cloned());
    out.emit("rabi_fit.toml", fit.to_document(&out.provenance));
    Ok(())
}

fn synthprep(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let s = &config.synthprep;
    let synth = make_synth_states(s.phi);
    let (sched1, d1) = prepare_d1_by_rotation(s.omega, s.phi)?;
    let (sched2, d2) = prepare_d2_by_rotation(s.omega, s.phi)?;
    let f1 = d1.fidelity(&synth.d1);
    let f2 = d2.fidelity(&synth.d2);

    // Δm = ±1 drive from D1: the D2 projection peaks within θ ∈ [0, π].
    let drive = EffectiveDrive::new(DriveKind::Dm1, s.transfer_omega, 0.0)?;
    let n = s.transfer_points as usize;
    let t_end = std::f64::consts::PI * 18f64.sqrt() / s.transfer_omega;
    let mut rows = Vec::with_capacity(n);
    let (mut best_t, mut best) = (0.0, project_synth(&synth.d1, s.phi));
    for k in 0..n {
        let t = t_end * k as f64 / (n - 1) as f64;
        let p = project_synth(&evolve_pure(&synth.d1, &drive, t)?, s.phi);
        if p.p_d2 > best.p_d2 {
            best = p;
            best_t = t;
        }
        rows.push(vec![t, p.p_d1, p.p_d2, p.leakage]);
    }
    out.summary.push(format!("D1 preparation fidelity {f1:.12}, D2 {f2:.12}"));
    out.summary.push(format!("max D1 → D2 transfer {:.6} at t = {best_t:.6e} s", best.p_d2));

    let mut w = DocWriter::new("synthetic_preparation", &out.provenance);
    w.float("phi", s.phi)
        .section("d1")
        .int("initial_two_mj", sched1.initial.two_mj() as i128)
        .float("phase", sched1.drive.phase)
        .float("duration_s", sched1.duration)
        .float("fidelity", f1)
        .floats("populations", &d1.populations())
        .section("d2")
        .int("initial_two_mj", sched2.initial.two_mj() as i128)
        .float("phase", sched2.drive.phase)
        .float("duration_s", sched2.duration)
        .float("fidelity", f2)
        .floats("populations", &d2.populations())
        .section("transfer")
        .float("rabi", s.transfer_omega)
        .float("best_time_s", best_t)
        .float("p_d2", best.p_d2)
        .float("leakage", best.leakage);
    out.emit("synthprep.toml", w.finish());
    out.emit("transfer.csv", doc::csv(&out.provenance, &["time_s", "p_D1", "p_D2", "leakage"], rows));
    Ok(())
}

fn stirap(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let p = &config.stirap;
    let r = stirap_prepare(&config.constants, p)?;
    let swapped = stirap_prepare(&config.constants, &dqubit_core::dynamics::StirapParams { delay: -p.delay, ..p.clone() })?;
    out.summary.push(format!("fidelity {:.6}, peak P population {:.3e}", r.fidelity, r.peak_p_population));
    out.summary.push(format!("reversed pulse order: fidelity {:.6}", swapped.fidelity));
    out.warnings.extend(r.warnings.iter().cloned());
    let mut w = DocWriter::new("stirap", &out.provenance);
    w.float("fidelity", r.fidelity)
        .float("peak_p_population", r.peak_p_population)
        .floats("final_populations", &r.final_populations)
        .float("lost", r.lost)
        .float("reversed_order_fidelity", swapped.fidelity)
        .strings("warnings", &r.warnings);
    out.emit("stirap.toml", w.finish());
    Ok(())
}

fn ramsey(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let r = &config.ramsey;
    let idx = match r.qubit {
        Qubit::S => 0,
        Qubit::D => 1,
        Qubit::Synth => 2,
    };
    let (name, s) = benchmark_qubits(&config.constants)?[idx].clone();
    let mut noise = config.noise.clone();
    if r.calibrate_t2 > 0.0 {
        noise = calibrate_to(&noise, s, r.calibrate_t2)?;
    }
    let n = r.points as usize;
    let delays = if r.t_max > 0.0 {
        (0..n).map(|k| r.t_max * k as f64 / (n - 1) as f64).collect()
    } else {
        scan_delays(predicted_t2(s, &noise), 1e-3, n)
    };
    let scan = ramsey_scan(s, &noise, &delays, config.trials as u64, config.seed, r.readout)?;
    let fit = fit_t2star(&scan)?;
    out.summary.push(format!("{name}: s = {s:.4} kHz/mG, σ_B = {:.6e} mG", noise.sigma_b_mg));
    out.summary.push(format!("T2* = {:.6e} ± {:.2e} s", fit.t2, fit.t2_stderr));
    out.warnings.extend(fit.flags.iter().cloned());
    out.emit("ramsey_scan.csv", scan.to_csv(&out.provenance));
    out.emit("t2star_fit.toml", fit.to_document(&out.provenance));
    Ok(())
}

/// Sets σ_B so that the qubit with sensitivity `s` reaches `target` T2*,
/// accounting for the residual rate and the harmonics.
fn calibrate_to(noise: &NoiseModel, s: f64, target: f64) -> Result<NoiseModel, CliError> {
    let left = target.powi(-2) - noise.residual_rate.powi(2);
    if left <= 0.0 {
        return Err(CliError::Validation {
            key: "ramsey.calibrate_t2".to_string(),
            message: "the residual rate alone already dephases faster than the target".to_string(),
        });
    }
    let total = calibrate_noise(1.0 / left.sqrt(), s).map_err(|e| CliError::Validation {
        key: "ramsey.calibrate_t2".to_string(),
        message: e.to_string(),
    })?;
    let var = total * total - noise.harmonic_variance();
    if var < 0.0 {
        return Err(CliError::Validation {
            key: "ramsey.calibrate_t2".to_string(),
            message: "the harmonics alone dephase faster than the target".to_string(),
        });
    }
    Ok(NoiseModel { sigma_b_mg: var.sqrt(), ..noise.clone() })
}

fn benchmark(config: &RunConfig, out: &mut RunOutput) -> Result<(), CliError> {
    let b = &config.benchmark;
    let noise = if b.calibrate {
        calibrate_benchmark_noise(&config.constants, &b.targets, &config.noise)?
    } else {
        config.noise.clone()
    };
    let table = benchmark_suite(&config.constants, &noise, config.trials as u64, b.points as usize, config.seed)?;
    for row in &table.rows {
        out.summary.push(format!(
            "{:>16}: s = {:.3} kHz/mG, T2* = {:.1} ± {:.1} μs",
            row.qubit,
            row.sensitivity,
            row.fit.t2 * 1e6,
            row.fit.t2_stderr * 1e6
        ));
        out.warnings.extend(row.fit.flags.iter().map(|f| format!("{}: {f}", row.qubit)));
    }
    out.summary.push(format!("insensitive / S = {:.3}", table.insensitive_over_s()));
    out.emit("benchmark.toml", table.to_document(&out.provenance));
    Ok(())
}

