//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use dqubit_cli::{run, Experiment, RunConfig};
use dqubit_core::atomic::jz_expectation;
use dqubit_core::dynamics::{
    evolve, evolve_pure, fit_rabi, make_synth_states, measure_populations, project_synth, stirap_prepare, DecayModel,
    DriveKind, EffectiveDrive, StirapParams,
};
use dqubit_core::ramsey::{calibrate_noise, fit_t2star, ramsey_scan, NoiseModel, Readout};
use dqubit_core::rng::substream;
use dqubit_core::scatter::{simulate_pumping, DetectionMatrix, DetectionParams, PUBLISHED_D, PUBLISHED_S_BUDGET};
use dqubit_core::tomography::{forward_counts, solve_constrained, solve_direct, synth_counts, BackgroundConvention, ConstrainedProblem};
use dqubit_core::{AtomConstants, CountsVector, Polarization, QuartetState, ZeemanState};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn canonical(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    RunConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn artifact(out: &dqubit_cli::RunOutput, name: &str) -> String {
    out.artifacts.iter().find(|a| a.name == name).unwrap().contents.clone()
}

fn c1_s_budget() -> Check {
    let params = DetectionParams::default();
    let model = dqubit_core::PumpModel::build(params.constants, params.b_gauss, &params.s_beams(Polarization::SigmaPlus))
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = simulate_pumping(&model, ZeemanState::s(-1), 100_000, 2024, &params.sim).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rel = (r.mean() / PUBLISHED_S_BUDGET - 1.0).abs();
    ensure(
        rel < 0.1 && elapsed < Duration::from_secs(60),
        format!("mean {:.4} ± {:.4} photons (1e5 trajectories, {:.1}% off 2.8) in {:.2} s", r.mean(), r.stderr(), 100.0 * rel, elapsed.as_secs_f64()),
    )
}

fn c2_d_matrix() -> Check {
    let out = run(&canonical("detmatrix_d")).map_err(|e| e.to_string())?;
    let m = DetectionMatrix::from_document(&artifact(&out, "detmatrix_d.toml")).map_err(|e| e.to_string())?;
    let mut zeros = 0;
    let mut pattern = true;
    let mut worst_rel: f64 = 0.0;
    for r in 0..5 {
        for c in 0..4 {
            let published_zero = PUBLISHED_D[r][c] == 0.0;
            zeros += published_zero as usize;
            if published_zero != (m.mean[r][c] == 0.0) {
                pattern = false;
            }
            if !published_zero {
                worst_rel = worst_rel.max((m.mean[r][c] / PUBLISHED_D[r][c] - 1.0).abs());
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    for (a, b) in [(0, 1), (1, 0), (2, 2), (3, 4), (4, 3)] {
        for c in 0..4 {
            let se = (m.stderr[a][c].powi(2) + m.stderr[b][3 - c].powi(2)).sqrt();
            let diff = (m.mean[a][c] - m.mean[b][3 - c]).abs();
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            } else if diff > 0.0 {
                worst_z = f64::INFINITY;
            }
        }
    }
    ensure(
        pattern && zeros == 8 && worst_rel <= 0.25 && worst_z <= 2.0,
        format!(
            "zero pattern {} ({zeros} zeros), worst magnitude deviation {:.1}%, worst mirror mismatch {worst_z:.2}σ ({} trajectories per entry)",
            if pattern { "exact" } else { "differs" },
            100.0 * worst_rel,
            m.trials
        ),
    )
}

/// Exhaustive simplex search: a step-0.02 pass locates the basin, then every
/// step-1e−3 point within ±0.04 of it is evaluated.
fn grid_minimum(p: &ConstrainedProblem) -> f64 {
    let eval = |i: i64, j: i64, k: i64, n: i64| -> Option<f64> {
        let l = n - i - j - k;
        if i < 0 || j < 0 || k < 0 || l < 0 {
            return None;
        }
        let d = [i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64, l as f64 / n as f64];
        Some(p.objective(&d, p.best_background(&d)))
    };
    let coarse = 50;
    let mut best = (f64::INFINITY, [0i64; 3]);
    for i in 0..=coarse {
        for j in 0..=coarse - i {
            for k in 0..=coarse - i - j {
                let f = eval(i, j, k, coarse).unwrap();
                if f < best.0 {
                    best = (f, [i, j, k]);
                }
            }
        }
    }
    let fine = 1000;
    let centre = best.1.map(|v| v * (fine / coarse));
    let mut best = f64::INFINITY;
    for i in centre[0] - 40..=centre[0] + 40 {
        for j in centre[1] - 40..=centre[1] + 40 {
            for k in centre[2] - 40..=centre[2] + 40 {
                if let Some(f) = eval(i, j, k, fine) {
                    best = best.min(f);
                }
            }
        }
    }
    best
}

/// Objective at the best grid point adjacent to `d`: the largest amount the
/// 1e−3 grid can exceed the continuous optimum near the solver's answer.
fn grid_gap_bound(p: &ConstrainedProblem, d: &[f64]) -> f64 {
    let base: Vec<i64> = d[..3].iter().map(|x| (x * 1e3).floor() as i64).collect();
    let mut best = f64::INFINITY;
    for di in 0..2 {
        for dj in 0..2 {
            for dk in 0..2 {
                let (i, j, k) = (base[0] + di, base[1] + dj, base[2] + dk);
                let l = 1000 - i - j - k;
                if i < 0 || j < 0 || k < 0 || l < 0 {
                    continue;
                }
                let g = [i as f64 / 1e3, j as f64 / 1e3, k as f64 / 1e3, l as f64 / 1e3];
                best = best.min(p.objective(&g, p.best_background(&g)));
            }
        }
    }
    best
}

fn random_simplex(seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = substream(seed, 0);
    let mut v: Vec<f64> = (0..4).map(|_| -rng.random::<f64>().ln()).collect();
    if seed % 2 == 0 {
        v[rng.random_range(0..4)] = 0.0;
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn c3_tomography() -> Check {
    let conv = BackgroundConvention::Scaled;
    let m = DetectionMatrix::published_d();
    let (e, cb) = (0.8, 0.1);
    let mut grid_fail = 0;
    for seed in 0..100u64 {
        let d = random_simplex(1000 + seed);
        let counts = synth_counts(&d, e, cb, &m, 300, seed, conv, false).map_err(|e| e.to_string())?;
        let est = solve_constrained(&counts, &m, e, conv).map_err(|e| e.to_string())?;
        let p = ConstrainedProblem::new(&counts, &m, e, conv).map_err(|e| e.to_string())?;
        let grid = grid_minimum(&p);
        let bound = grid_gap_bound(&p, &est.populations) - est.objective;
        if est.objective > grid + 1e-9 || grid - est.objective > bound + 1e-9 {
            grid_fail += 1;
        }
    }
    let mut worst_exact: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    for seed in 0..20u64 {
        let d = random_simplex(5000 + seed);
        let counts = CountsVector::new(forward_counts(&d, e, cb, &m, conv), 1_000_000).map_err(|e| e.to_string())?;
        let direct = solve_direct(&counts, &m, conv).map_err(|e| e.to_string())?;
        let constrained = solve_constrained(&counts, &m, e, conv).map_err(|e| e.to_string())?;
        for i in 0..4 {
            worst_exact = worst_exact.max((direct.populations[i] - d[i]).abs()).max((constrained.populations[i] - d[i]).abs());
            worst_agree = worst_agree.max((direct.populations[i] - constrained.populations[i]).abs());
        }
        worst_exact = worst_exact.max((direct.efficiency - e).abs()).max((direct.background - cb).abs());
    }
    ensure(
        grid_fail == 0 && worst_exact < 1e-9 && worst_agree < 1e-9,
        format!(
            "{} of 100 noisy instances disagree with the 1e-3 grid search; noiseless error {worst_exact:.1e}; direct vs constrained {worst_agree:.1e}",
            grid_fail
        ),
    )
}

/// |d^{3/2}_{m'm}(θ)|², rows and columns ascending m.
fn wigner_table(theta: f64) -> [[f64; 4]; 4] {
    let (c, s) = ((theta / 2.0).cos().powi(2), (theta / 2.0).sin().powi(2));
    let outer = c.powi(3);
    let near = 3.0 * c * c * s;
    let far = 3.0 * c * s * s;
    let corner = s.powi(3);
    let inner = c * (3.0 * c - 2.0).powi(2);
    let cross = s * (3.0 * s - 2.0).powi(2);
    [
        [outer, near, far, corner],
        [near, inner, cross, far],
        [far, cross, inner, near],
        [corner, far, near, outer],
    ]
}

fn c4_wigner() -> Check {
    let omega = 2.0 * PI * 50e3;
    let drive = EffectiveDrive::new(DriveKind::Dm1, omega, 0.0).map_err(|e| e.to_string())?;
    let t_of = |theta: f64| theta * 18f64.sqrt() / omega;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let theta = 2.0 * PI * (k as f64 + 0.5) / 50.0;
        let table = wigner_table(theta);
        for from in 0..4 {
            let s = evolve_pure(&QuartetState::basis(from), &drive, t_of(theta)).map_err(|e| e.to_string())?;
            for to in 0..4 {
                worst = worst.max((s.populations()[to] - table[from][to]).abs());
            }
        }
    }
    let half = evolve_pure(&QuartetState::basis(0), &drive, t_of(PI / 2.0)).map_err(|e| e.to_string())?.populations();
    let half_err = half.iter().zip([0.125, 0.375, 0.375, 0.125]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let flip = evolve_pure(&QuartetState::basis(0), &drive, t_of(PI)).map_err(|e| e.to_string())?.populations();
    let flip_err = (flip[3] - 1.0).abs();
    let elapsed = start.elapsed();
    ensure(
        worst < 1e-8 && half_err < 1e-8 && flip_err < 1e-8 && elapsed < Duration::from_secs(10),
        format!(
            "max deviation {worst:.1e} over 50 angles × 4 initial states; θ=π/2 error {half_err:.1e}; θ=π transfer error {flip_err:.1e}; {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_pair_isolation() -> Check {
    let omega = PI / 30e-6;
    let drive = EffectiveDrive::new(DriveKind::Dm2, omega, 0.4).map_err(|e| e.to_string())?;
    let period = PI / omega;
    let times: Vec<f64> = (0..=2000).map(|k| 10.0 * period * k as f64 / 2000.0).collect();
    let start = QuartetState::basis(ZeemanState::d(3).index()).to_density();
    let traj = evolve(&start, &drive, &DecayModel::none(), &times).map_err(|e| e.to_string())?;
    let leak = traj.populations.iter().map(|p| p[0].max(p[2])).fold(0.0, f64::max);
    let p = evolve_pure(&QuartetState::basis(ZeemanState::d(3).index()), &drive, 2.0 * period / 3.0)
        .map_err(|e| e.to_string())?
        .populations();
    let err = (p[1] - 0.75).abs().max((p[3] - 0.25).abs());
    ensure(
        leak < 1e-10 && err < 1e-8,
        format!("unpopulated pair max {leak:.1e} over 10 transfer times; at 2T/3 (d_-1/2, d_+3/2) = ({:.10}, {:.10})", p[1], p[3]),
    )
}

fn c6_synthetic_algebra() -> Check {
    let mut worst_jz: f64 = 0.0;
    let mut worst_ortho: f64 = 0.0;
    for phi in [0.0, PI, 0.77, -2.1] {
        let s = make_synth_states(phi);
        for a in [&s.d1, &s.d2] {
            for b in [&s.d1, &s.d2] {
                worst_jz = worst_jz.max(jz_expectation(a.amplitudes(), b.amplitudes()).map_err(|e| e.to_string())?.norm());
            }
        }
        let basis = [&s.d1, &s.d2, &s.b1, &s.b2];
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst_ortho = worst_ortho.max((a.inner(b).norm() - target).abs());
            }
        }
    }
    let phi = PI;
    let synth = make_synth_states(phi);
    let omega = 2.0 * PI * 50e3;
    let drive = EffectiveDrive::new(DriveKind::Dm1, omega, 0.0).map_err(|e| e.to_string())?;
    let t_end = PI * 18f64.sqrt() / omega;
    let mut best: f64 = 0.0;
    for k in 0..=1000 {
        let s = evolve_pure(&synth.d1, &drive, t_end * k as f64 / 1000.0).map_err(|e| e.to_string())?;
        best = best.max(project_synth(&s, phi).p_d2);
    }
    ensure(
        worst_jz < 1e-12 && worst_ortho < 1e-12 && best >= 0.99,
        format!("max |<D_i|Jz|D_j>| {worst_jz:.1e}; orthonormality error {worst_ortho:.1e}; max D1 → D2 transfer {best:.6}"),
    )
}

fn c7_hierarchy() -> Check {
    let config = canonical("benchmark");
    let start = Instant::now();
    let out = run(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    #[derive(serde::Deserialize)]
    struct Row {
        t2_s: f64,
        t2_stderr_s: f64,
        flags: Vec<String>,
    }
    #[derive(serde::Deserialize)]
    struct Table {
        shots: u64,
        insensitive_over_s: f64,
        qubit: Vec<Row>,
    }
    let t: Table = dqubit_core::doc::parse(&artifact(&out, "benchmark.toml")).map_err(|e| e.to_string())?;
    let (s, d, q) = (&t.qubit[0], &t.qubit[1], &t.qubit[2]);
    let bounded = t.qubit.iter().all(|r| r.flags.is_empty());
    ensure(
        t.shots == 10_000
            && (s.t2_s / 96e-6 - 1.0).abs() < 0.05
            && (106e-6..=128e-6).contains(&d.t2_s)
            && t.insensitive_over_s >= 3.0
            && bounded
            && elapsed < Duration::from_secs(300),
        format!(
            "S {:.1} ± {:.1} μs (calibrated to 96), d pair {:.1} ± {:.1} μs, D1/D2 {:.1} ± {:.1} μs, ratio {:.2}; {:.1} s",
            s.t2_s * 1e6,
            s.t2_stderr_s * 1e6,
            d.t2_s * 1e6,
            d.t2_stderr_s * 1e6,
            q.t2_s * 1e6,
            q.t2_stderr_s * 1e6,
            t.insensitive_over_s,
            elapsed.as_secs_f64()
        ),
    )
}

fn c8_stirap() -> Check {
    let c = AtomConstants::default();
    let base = StirapParams::default();
    let r = stirap_prepare(&c, &base).map_err(|e| e.to_string())?;
    let mut cases = 0;
    let mut wins = 0;
    let mut margin = f64::INFINITY;
    for peak_mhz in [15.0, 30.0, 60.0] {
        for width in [0.8e-6, 1.2e-6, 1.6e-6] {
            for delay_frac in [0.8, 1.25, 1.6] {
                let p = StirapParams {
                    peak_pump: 2.0 * PI * peak_mhz * 1e6,
                    peak_stokes: 2.0 * PI * peak_mhz * 1e6,
                    width,
                    delay: delay_frac * width,
                    ..base.clone()
                };
                let counter = stirap_prepare(&c, &p).map_err(|e| e.to_string())?.fidelity;
                let intuitive = stirap_prepare(&c, &StirapParams { delay: -p.delay, ..p.clone() }).map_err(|e| e.to_string())?.fidelity;
                cases += 1;
                wins += (counter > intuitive) as usize;
                margin = margin.min(counter - intuitive);
            }
        }
    }
    ensure(
        r.fidelity > 0.95 && wins == cases && base.total == 10e-6,
        format!("fidelity {:.4} over 10 μs; counterintuitive beats intuitive in {wins}/{cases} pulse sets (min margin {margin:.3})", r.fidelity),
    )
}

fn c9_fit_round_trips() -> Check {
    let omega = PI / 30e-6;
    let tau = 400e-6;
    let drive = EffectiveDrive::new(DriveKind::Dm2, omega, 0.0).map_err(|e| e.to_string())?;
    let times: Vec<f64> = (0..50).map(|k| 250e-6 * k as f64 / 49.0).collect();
    let initial = QuartetState::basis(3);
    let clean = evolve(&initial.to_density(), &drive, &DecayModel::new(tau).map_err(|e| e.to_string())?, &times)
        .map_err(|e| e.to_string())?;
    let mut rabi_hits = 0;
    for seed in 0..50 {
        let data = measure_populations(&clean.populations, 1000, seed).map_err(|e| e.to_string())?;
        let fit = fit_rabi(&times, &data, DriveKind::Dm2, &initial).map_err(|e| e.to_string())?;
        let ok = (fit.omega - omega).abs() < 3.0 * fit.omega_stderr && (fit.gamma - 1.0 / tau).abs() < 3.0 * fit.gamma_stderr;
        rabi_hits += ok as usize;
    }

    let target = 80e-6;
    let s = 2.0;
    let noise = NoiseModel { sigma_b_mg: calibrate_noise(target, s).map_err(|e| e.to_string())?, ..NoiseModel::quiet() };
    let delays: Vec<f64> = (0..16).map(|k| 2.5 * target * k as f64 / 15.0).collect();
    let mut t2_hits = 0;
    for seed in 0..50 {
        let scan = ramsey_scan(s, &noise, &delays, 2000, 100 + seed, Readout::Contrast).map_err(|e| e.to_string())?;
        let fit = fit_t2star(&scan).map_err(|e| e.to_string())?;
        t2_hits += ((fit.t2 - target).abs() < 3.0 * fit.t2_stderr) as usize;
    }
    ensure(
        rabi_hits >= 45 && t2_hits >= 45,
        format!("fit_rabi (Ω and τ) within 3σ on {rabi_hits}/50 datasets; fit_t2star within 3σ on {t2_hits}/50"),
    )
}

fn c10_determinism() -> Check {
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (one, many) = (pool(1), pool(8));
    let mut compared = 0;
    for e in Experiment::ALL {
        let mut config = canonical(e.name());
        if matches!(e, Experiment::DetmatrixS | Experiment::DetmatrixD) {
            config.trials = 4000;
        }
        let a = one.install(|| run(&config)).map_err(|e| e.to_string())?;
        let b = many.install(|| run(&config)).map_err(|e| e.to_string())?;
        let c = many.install(|| run(&config)).map_err(|e| e.to_string())?;
        if a.artifacts != b.artifacts || b.artifacts != c.artifacts {
            return Err(format!("{e}: outputs differ between runs or thread counts"));
        }
        compared += a.artifacts.len();
    }
    Ok(format!("{compared} artifacts from all 9 experiments byte-identical across 1- and 8-thread pools and repeated runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("S-detection photon budget", c1_s_budget),
        ("D-detection matrix zero pattern", c2_d_matrix),
        ("tomography oracle equivalence", c3_tomography),
        ("Wigner rotation oracle", c4_wigner),
        ("Δm = ±2 pair isolation", c5_pair_isolation),
        ("synthetic-qubit algebra", c6_synthetic_algebra),
        ("coherence hierarchy", c7_hierarchy),
        ("STIRAP transfer", c8_stirap),
        ("fit round trips", c9_fit_round_trips),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
