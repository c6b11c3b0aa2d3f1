//! Magnetic-field noise and Ramsey coherence scans.
//!
//! Each shot sees a field offset `δB(t) = B0 + Σ A_h·cos(2π f_h t + θ_h)`
//! with `B0 ~ N(0, σ_B)` and uniform random phases θ_h, all frozen for the
//! shot. The accumulated phase is `φ = 2π·s·∫δB dt` with s the qubit
//! sensitivity; the harmonic integrals are done in closed form. A residual
//! dephasing rate r multiplies the fringe by `exp(−(r t)²)` on every qubit.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{qubit_sensitivity, AtomConstants, QubitPair, ZeemanState};
use crate::doc::{self, DocWriter, Provenance};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::rng::{derive_seed, substream};

pub const BENCHMARK_KIND: &str = "ramsey_benchmark";
pub const T2_FIT_KIND: &str = "t2star_fit";

/// Hz per mG for a sensitivity of 1 kHz/mG.
const HZ_PER_KHZ: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub frequency_hz: f64,
    pub amplitude_mg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Quasi-static RMS field (mG), drawn once per shot.
    pub sigma_b_mg: f64,
    pub harmonics: Vec<Harmonic>,
    /// Field-independent dephasing rate (1/s).
    pub residual_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            sigma_b_mg: 0.0,
            harmonics: vec![
                Harmonic { frequency_hz: 60.0, amplitude_mg: 0.1 },
                Harmonic { frequency_hz: 120.0, amplitude_mg: 0.05 },
                Harmonic { frequency_hz: 180.0, amplitude_mg: 0.03 },
            ],
            residual_rate: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn quiet() -> Self {
        NoiseModel { sigma_b_mg: 0.0, harmonics: Vec::new(), residual_rate: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_b_mg >= 0.0) || !self.sigma_b_mg.is_finite() {
            return Err(Error::domain(format!("sigma_b_mg must be ≥ 0, got {}", self.sigma_b_mg)));
        }
        if !(self.residual_rate >= 0.0) || !self.residual_rate.is_finite() {
            return Err(Error::domain(format!("residual_rate must be ≥ 0, got {}", self.residual_rate)));
        }
        for h in &self.harmonics {
            if !(h.amplitude_mg >= 0.0) || !(h.frequency_hz > 0.0) || !h.amplitude_mg.is_finite() || !h.frequency_hz.is_finite() {
                return Err(Error::domain("harmonics need amplitude ≥ 0 and frequency > 0"));
            }
        }
        Ok(())
    }

    /// Field variance of the harmonics in the slow limit (Σ A²/2), mG².
    pub fn harmonic_variance(&self) -> f64 {
        self.harmonics.iter().map(|h| h.amplitude_mg * h.amplitude_mg / 2.0).sum()
    }

    /// ∫₀ᵗ δB dt for one shot (mG·s).
    fn field_integral(&self, b0: f64, phases: &[f64], t: f64) -> f64 {
        let mut acc = b0 * t;
        for (h, &th) in self.harmonics.iter().zip(phases) {
            let w = 2.0 * std::f64::consts::PI * h.frequency_hz;
            acc += h.amplitude_mg / w * ((w * t + th).sin() - th.sin());
        }
        acc
    }

    /// Residual contrast factor at delay t.
    pub fn residual_factor(&self, t: f64) -> f64 {
        (-(self.residual_rate * t).powi(2)).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Readout {
    /// Second π/2 pulse in phase with the first; contrast = 2p − 1.
    #[default]
    Contrast,
    /// Analysis phase advanced at `detuning_hz`; the fringe oscillates under the envelope.
    Fringe { detuning_hz: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RamseyScan {
    pub delays: Vec<f64>,
    /// Excited-state probability estimate per delay.
    pub probability: Vec<f64>,
    pub probability_stderr: Vec<f64>,
    pub shots: u64,
    /// kHz/mG.
    pub sensitivity: f64,
    pub readout: Readout,
}

impl RamseyScan {
    pub fn contrast(&self) -> Vec<f64> {
        self.probability.iter().map(|p| 2.0 * p - 1.0).collect()
    }

    pub fn contrast_stderr(&self) -> Vec<f64> {
        self.probability_stderr.iter().map(|e| 2.0 * e).collect()
    }

    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let c = self.contrast();
        let ce = self.contrast_stderr();
        doc::csv(
            provenance,
            &["delay_s", "probability", "probability_stderr", "contrast", "contrast_stderr"],
            (0..self.delays.len()).map(|k| vec![self.delays[k], self.probability[k], self.probability_stderr[k], c[k], ce[k]]),
        )
    }
}

fn binomial_stderr(p: f64, shots: u64) -> f64 {
    let n = shots as f64;
    (p * (1.0 - p)).max(1.0 / n).sqrt() / n.sqrt()
}

fn check_delays(delays: &[f64]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::domain("delays must not be empty"));
    }
    if delays.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::domain("delays must be finite and ≥ 0"));
    }
    if delays.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("delays must be ascending"));
    }
    Ok(())
}

/// Simulated Ramsey scan: one random substream per delay, one biased coin per shot.
pub fn ramsey_scan(
    sensitivity: f64,
    noise: &NoiseModel,
    delays: &[f64],
    shots: u64,
    seed: u64,
    readout: Readout,
) -> Result<RamseyScan> {
    noise.validate()?;
    check_delays(delays)?;
    if shots == 0 {
        return Err(Error::domain("shots must be ≥ 1"));
    }
    if !sensitivity.is_finite() {
        return Err(Error::domain("sensitivity must be finite"));
    }
    let analysis = match readout {
        Readout::Contrast => 0.0,
        Readout::Fringe { detuning_hz } => {
            if !detuning_hz.is_finite() {
                return Err(Error::domain("fringe detuning must be finite"));
            }
            detuning_hz
        }
    };
    let gauss = Normal::new(0.0, noise.sigma_b_mg).map_err(|e| Error::domain(e.to_string()))?;
    let s_hz = sensitivity * HZ_PER_KHZ;
    let two_pi = 2.0 * std::f64::consts::PI;
    let excited: Vec<u64> = delays
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut rng = substream(seed, k as u64);
            let residual = noise.residual_factor(t);
            let mut phases = vec![0.0; noise.harmonics.len()];
            let mut hits = 0u64;
            for _ in 0..shots {
                let b0 = gauss.sample(&mut rng);
                for th in phases.iter_mut() {
                    *th = rng.random::<f64>() * two_pi;
                }
                let phi = two_pi * s_hz * noise.field_integral(b0, &phases, t) + two_pi * analysis * t;
                let p = 0.5 * (1.0 + residual * phi.cos());
                hits += (rng.random::<f64>() < p) as u64;
            }
            hits
        })
        .collect();
    let probability: Vec<f64> = excited.iter().map(|&h| h as f64 / shots as f64).collect();
    Ok(RamseyScan {
        delays: delays.to_vec(),
        probability_stderr: probability.iter().map(|&p| binomial_stderr(p, shots)).collect(),
        probability,
        shots,
        sensitivity,
        readout,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Fit {
    pub t2: f64,
    pub t2_stderr: f64,
    pub amplitude: f64,
    pub floor: f64,
    /// Reduced chi-square of the weighted fit.
    pub reduced_chi2: f64,
    pub flags: Vec<String>,
}

impl T2Fit {
    pub fn is_bounded(&self) -> bool {
        !self.flags.iter().any(|f| f.contains("bound"))
    }

    pub fn to_document(&self, provenance: &Provenance) -> String {
        let mut w = DocWriter::new(T2_FIT_KIND, provenance);
        w.float("t2_s", self.t2)
            .float("t2_stderr_s", self.t2_stderr)
            .float("amplitude", self.amplitude)
            .float("floor", self.floor)
            .float("reduced_chi2", self.reduced_chi2)
            .strings("flags", &self.flags);
        w.finish()
    }
}

/// Weighted fit of `A·exp(−(t/T)²) + floor` to the contrast (or of the
/// corresponding fringe for [`Readout::Fringe`]).
pub fn fit_t2star(scan: &RamseyScan) -> Result<T2Fit> {
    let n = scan.delays.len();
    if n < 6 {
        return Err(Error::domain(format!("T2* fit needs at least 6 delays, got {n}")));
    }
    check_delays(&scan.delays)?;
    if scan.probability.len() != n || scan.probability_stderr.len() != n {
        return Err(Error::domain("scan arrays differ in length"));
    }
    let t_max = *scan.delays.last().unwrap();
    let t_min = scan.delays.iter().copied().find(|t| *t > 0.0).unwrap_or(t_max);
    if !(t_max > 0.0) {
        return Err(Error::domain("delays must span a positive range"));
    }
    let (lo, hi) = (t_min / 10.0, 100.0 * t_max);
    let y = scan.contrast();
    let sigma: Vec<f64> = scan.contrast_stderr().iter().map(|s| s.max(1e-12)).collect();

    // No resolvable contrast anywhere: the decay happened before the first delay.
    let significant = y.iter().zip(&sigma).any(|(c, s)| c.abs() > 5.0 * s);
    if !significant {
        return Ok(T2Fit {
            t2: lo,
            t2_stderr: f64::NAN,
            amplitude: 0.0,
            floor: 0.0,
            reduced_chi2: f64::NAN,
            flags: vec!["T2* at lower bound (no contrast)".into()],
        });
    }

    let fringe = match scan.readout {
        Readout::Contrast => None,
        Readout::Fringe { detuning_hz } => Some(2.0 * std::f64::consts::PI * detuning_hz),
    };
    // Parameters: A, T, floor [, phase].
    let model = |p: &[f64], t: f64| -> f64 {
        let env = p[0] * (-(t / p[1]).powi(2)).exp();
        match fringe {
            None => env + p[2],
            Some(w) => env * (w * t + p[3]).cos() + p[2],
        }
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        (0..n).map(|k| (model(p, scan.delays[k]) - y[k]) / sigma[k]).collect()
    };
    let cost = |p: &[f64]| residuals(p).iter().map(|r| r * r).sum::<f64>();

    let a0 = y.iter().copied().fold(0.0, |m: f64, v| m.max(v.abs())).clamp(0.05, 1.5);
    let phases: &[f64] = if fringe.is_some() { &[0.0, FRAC_PI_2, PI, -FRAC_PI_2] } else { &[0.0] };
    let mut best = (f64::INFINITY, vec![]);
    for k in 0..60 {
        let t = lo * (hi / lo).powf(k as f64 / 59.0);
        for &ph in phases {
            let mut p = vec![a0, t, 0.0];
            if fringe.is_some() {
                p.push(ph);
            }
            let c = cost(&p);
            if c < best.0 {
                best = (c, p);
            }
        }
    }
    let mut lower = vec![0.0, lo, -0.5];
    let mut upper = vec![1.5, hi, 0.5];
    let mut scale = vec![0.1, best.1[1], 0.01];
    if fringe.is_some() {
        lower.push(-4.0 * std::f64::consts::PI);
        upper.push(4.0 * std::f64::consts::PI);
        scale.push(0.1);
    }
    let res = levenberg_marquardt(residuals, &best.1, &lower, &upper, &scale, &LmOptions::default())?;
    if !res.converged {
        return Err(Error::FitFailure(format!(
            "T2* fit did not converge after {} iterations; last parameters {:?}, χ² = {}",
            res.iterations, res.params, res.ssr
        )));
    }
    let mut flags = Vec::new();
    match res.at_bound[1] {
        1 => flags.push("T2* at upper bound (unbounded within scan range)".to_string()),
        -1 => flags.push("T2* at lower bound".to_string()),
        _ => {}
    }
    let se = res.std_errors();
    let dof = n.saturating_sub(res.params.len()).max(1) as f64;
    Ok(T2Fit {
        t2: res.params[1],
        t2_stderr: se[1],
        amplitude: res.params[0],
        floor: res.params[2],
        reduced_chi2: res.ssr / dof,
        flags,
    })
}

/// Quasi-static field RMS giving a Gaussian Ramsey envelope exp(−(t/T2*)²):
/// `σ_B = √2 / (2π·s·T2*)`, s in Hz/mG.
pub fn calibrate_noise(target_t2: f64, sensitivity: f64) -> Result<f64> {
    if !(target_t2 > 0.0) {
        return Err(Error::domain(format!("target T2* must be > 0, got {target_t2}")));
    }
    if !(sensitivity.abs() > 0.0) || !sensitivity.is_finite() {
        return Err(Error::domain("zero sensitivity cannot be calibrated through the first-order term"));
    }
    if target_t2.is_infinite() {
        return Ok(0.0);
    }
    Ok(2f64.sqrt() / (2.0 * std::f64::consts::PI * sensitivity.abs() * HZ_PER_KHZ * target_t2))
}

/// Predicted Gaussian T2* for a sensitivity under a noise model, treating the
/// harmonics as quasi-static.
pub fn predicted_t2(sensitivity: f64, noise: &NoiseModel) -> f64 {
    let var = noise.sigma_b_mg.powi(2) + noise.harmonic_variance();
    let field = (2.0 * std::f64::consts::PI * sensitivity * HZ_PER_KHZ).powi(2) * var / 2.0;
    let rate2 = field + noise.residual_rate.powi(2);
    if rate2 > 0.0 {
        1.0 / rate2.sqrt()
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkTargets {
    /// T2* the S qubit is calibrated to (s).
    pub s_t2: f64,
    /// T2* the insensitive qubit is calibrated to (s), through the residual rate.
    pub insensitive_t2: f64,
}

impl Default for BenchmarkTargets {
    fn default() -> Self {
        BenchmarkTargets { s_t2: 96e-6, insensitive_t2: 350e-6 }
    }
}

/// Calibrates `noise` in place: the residual rate sets the insensitive
/// qubit's T2*, and σ_B supplies the rest of the S qubit's dephasing after
/// the residual and the harmonics are accounted for.
pub fn calibrate_benchmark_noise(constants: &AtomConstants, targets: &BenchmarkTargets, noise: &NoiseModel) -> Result<NoiseModel> {
    if !(targets.s_t2 > 0.0) || !(targets.insensitive_t2 > targets.s_t2) {
        return Err(Error::domain("targets need 0 < s_t2 < insensitive_t2"));
    }
    let s = benchmark_qubits(constants)?[0].1;
    let residual_rate = if targets.insensitive_t2.is_finite() { 1.0 / targets.insensitive_t2 } else { 0.0 };
    let magnetic_t2 = 1.0 / (targets.s_t2.powi(-2) - residual_rate.powi(2)).sqrt();
    let total = calibrate_noise(magnetic_t2, s)?;
    let var = total * total - noise.harmonic_variance();
    if var < 0.0 {
        return Err(Error::domain("harmonics alone dephase the S qubit faster than the target T2*"));
    }
    Ok(NoiseModel { sigma_b_mg: var.sqrt(), harmonics: noise.harmonics.clone(), residual_rate })
}

/// The three benchmark qubits with their sensitivities (kHz/mG).
pub fn benchmark_qubits(constants: &AtomConstants) -> Result<[(String, f64); 3]> {
    let s = qubit_sensitivity(constants, &QubitPair::Zeeman(ZeemanState::s(-1), ZeemanState::s(1)))?;
    let d = qubit_sensitivity(constants, &QubitPair::Zeeman(ZeemanState::d(3), ZeemanState::d(-1)))?;
    let synth = crate::dynamics::make_synth_states(std::f64::consts::PI);
    let q = qubit_sensitivity(constants, &QubitPair::Quartet(synth.d1, synth.d2))?;
    Ok([
        ("s_-1/2 / s_+1/2".to_string(), s),
        ("d_+3/2 / d_-1/2".to_string(), d),
        ("D1 / D2".to_string(), q),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub qubit: String,
    pub sensitivity: f64,
    pub predicted_t2: f64,
    pub fit: T2Fit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub noise: NoiseModel,
    pub shots: u64,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    /// Ratio of the insensitive qubit's T2* to the S qubit's.
    pub fn insensitive_over_s(&self) -> f64 {
        self.rows[2].fit.t2 / self.rows[0].fit.t2
    }

    pub fn to_document(&self, provenance: &Provenance) -> String {
        let mut w = DocWriter::new(BENCHMARK_KIND, provenance);
        w.comment("fitted T2* from simulated Ramsey scans; absolute values follow from the calibrated noise model")
            .int("shots", self.shots as i128)
            .float("sigma_b_mg", self.noise.sigma_b_mg)
            .float("residual_rate_per_s", self.noise.residual_rate)
            .float("insensitive_over_s", self.insensitive_over_s());
        for r in &self.rows {
            w.array_section("qubit")
                .string("name", &r.qubit)
                .float("sensitivity_khz_per_mg", r.sensitivity)
                .float("predicted_t2_s", r.predicted_t2)
                .float("t2_s", r.fit.t2)
                .float("t2_stderr_s", r.fit.t2_stderr)
                .float("reduced_chi2", r.fit.reduced_chi2)
                .strings("flags", &r.fit.flags);
        }
        w.finish()
    }
}

/// Evenly spaced delays over [0, 2.5·T], or over `fallback` when T is infinite.
pub fn scan_delays(t2: f64, fallback: f64, points: usize) -> Vec<f64> {
    let span = if t2.is_finite() { 2.5 * t2 } else { fallback };
    (0..points).map(|k| span * k as f64 / (points - 1) as f64).collect()
}

/// Ramsey scans and T2* fits for the S doublet, the d_+3/2/d_−1/2 pair and
/// the synthetic D1/D2 qubit under one (already calibrated) noise model.
pub fn benchmark_suite(
    constants: &AtomConstants,
    noise: &NoiseModel,
    shots: u64,
    points: usize,
    seed: u64,
) -> Result<BenchmarkTable> {
    noise.validate()?;
    if points < 6 {
        return Err(Error::domain("benchmark scans need at least 6 delays"));
    }
    let qubits = benchmark_qubits(constants)?;
    let predicted: Vec<f64> = qubits.iter().map(|(_, s)| predicted_t2(*s, noise)).collect();
    let longest = predicted.iter().copied().filter(|t| t.is_finite()).fold(0.0, f64::max);
    let fallback = if longest > 0.0 { 2.5 * longest } else { 1e-3 };
    let mut rows = Vec::new();
    for (k, (name, s)) in qubits.into_iter().enumerate() {
        let delays = scan_delays(predicted[k], fallback, points);
        let scan = ramsey_scan(s, noise, &delays, shots, derive_seed(seed, k as u64), Readout::Contrast)?;
        let fit = fit_t2star(&scan)?;
        rows.push(BenchmarkRow { qubit: name, sensitivity: s, predicted_t2: predicted[k], fit });
    }
    Ok(BenchmarkTable { noise: noise.clone(), shots, rows })
}
