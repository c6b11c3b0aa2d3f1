//! Run configuration: TOML with sections, every field defaulted.

use std::fmt;
use std::str::FromStr;

use dqubit_core::dynamics::{DriveKind, StirapParams};
use dqubit_core::ramsey::{BenchmarkTargets, NoiseModel, Readout};
use dqubit_core::scatter::{DetectionParams, SimOptions};
use dqubit_core::tomography::BackgroundConvention;
use dqubit_core::AtomConstants;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DetmatrixS,
    DetmatrixD,
    Darkstates,
    Tomo,
    Rabi,
    Synthprep,
    Stirap,
    Ramsey,
    Benchmark,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::DetmatrixS,
        Experiment::DetmatrixD,
        Experiment::Darkstates,
        Experiment::Tomo,
        Experiment::Rabi,
        Experiment::Synthprep,
        Experiment::Stirap,
        Experiment::Ramsey,
        Experiment::Benchmark,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DetmatrixS => "detmatrix_s",
            Experiment::DetmatrixD => "detmatrix_d",
            Experiment::Darkstates => "darkstates",
            Experiment::Tomo => "tomo",
            Experiment::Rabi => "rabi",
            Experiment::Synthprep => "synthprep",
            Experiment::Stirap => "stirap",
            Experiment::Ramsey => "ramsey",
            Experiment::Benchmark => "benchmark",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// 650/493 nm detection beams and the field. Atomic constants live in the
/// top-level `[constants]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub b_gauss: f64,
    pub saturation_493: f64,
    pub saturation_650: f64,
    /// Offsets from line center (Hz) for σ+, σ−, π.
    pub offset_493: [f64; 3],
    pub offset_650: [f64; 3],
    pub sim: SimOptions,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionParams::default();
        DetectionSection {
            b_gauss: d.b_gauss,
            saturation_493: d.saturation_493,
            saturation_650: d.saturation_650,
            offset_493: d.offset_493,
            offset_650: d.offset_650,
            sim: d.sim,
        }
    }
}

impl DetectionSection {
    pub fn params(&self, constants: AtomConstants) -> DetectionParams {
        DetectionParams {
            constants,
            b_gauss: self.b_gauss,
            saturation_493: self.saturation_493,
            saturation_650: self.saturation_650,
            offset_493: self.offset_493,
            offset_650: self.offset_650,
            sim: self.sim,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    /// The tabulated D-detection matrix.
    #[default]
    Published,
    /// Simulated with `tomo.matrix_trials` trajectories per entry.
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoSection {
    /// True D3/2 populations, ascending m_J.
    pub populations: Vec<f64>,
    pub efficiency: f64,
    pub background: f64,
    pub convention: BackgroundConvention,
    pub matrix: MatrixSource,
    pub matrix_trials: i64,
}

impl Default for TomoSection {
    fn default() -> Self {
        TomoSection {
            populations: vec![0.4, 0.3, 0.2, 0.1],
            efficiency: 0.8,
            background: 0.05,
            convention: BackgroundConvention::default(),
            matrix: MatrixSource::default(),
            matrix_trials: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiSection {
    pub drive: DriveKind,
    /// Ω in rad/s.
    pub rabi: f64,
    pub phase: f64,
    /// rad/s.
    pub detuning: f64,
    /// Depolarization time (s); `inf` for none.
    pub tau: f64,
    /// Initial basis state as 2·m_J.
    pub initial_two_mj: i32,
    pub t_max: f64,
    pub points: i64,
}

impl Default for RabiSection {
    fn default() -> Self {
        RabiSection {
            drive: DriveKind::Dm2,
            rabi: std::f64::consts::PI / 30e-6,
            phase: 0.0,
            detuning: 0.0,
            tau: 400e-6,
            initial_two_mj: 3,
            t_max: 250e-6,
            points: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Δm = ±2 Rabi frequency (rad/s) for preparation.
    pub omega: f64,
    /// Raman phase φ of the synthetic basis.
    pub phi: f64,
    /// Δm = ±1 Rabi frequency (rad/s) for the D1 → D2 transfer scan.
    pub transfer_omega: f64,
    pub transfer_points: i64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            omega: std::f64::consts::PI / 30e-6,
            phi: std::f64::consts::PI,
            transfer_omega: 2.0 * std::f64::consts::PI * 50e3,
            transfer_points: 401,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qubit {
    /// s_−1/2 / s_+1/2.
    #[default]
    S,
    /// d_+3/2 / d_−1/2.
    D,
    /// D1 / D2.
    Synth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseySection {
    pub qubit: Qubit,
    /// Longest delay (s); 0 picks 2.5 × the predicted T2*.
    pub t_max: f64,
    pub points: i64,
    pub readout: Readout,
    /// Calibrate σ_B so the chosen qubit has this T2* (s); 0 keeps `noise.sigma_b_mg`.
    pub calibrate_t2: f64,
}

impl Default for RamseySection {
    fn default() -> Self {
        RamseySection { qubit: Qubit::S, t_max: 0.0, points: 21, readout: Readout::Contrast, calibrate_t2: 96e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub calibrate: bool,
    pub targets: BenchmarkTargets,
    pub points: i64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection { calibrate: true, targets: BenchmarkTargets::default(), points: 21 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".to_string() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    /// Primary sample count: trajectories per matrix entry, counting trials
    /// per setting, or shots per time point / delay.
    pub trials: i64,
    pub output: OutputSection,
    pub constants: AtomConstants,
    pub detection: DetectionSection,
    pub tomo: TomoSection,
    pub rabi: RabiSection,
    pub synthprep: SynthSection,
    pub stirap: StirapParams,
    pub noise: NoiseModel,
    pub ramsey: RamseySection,
    pub benchmark: BenchmarkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            seed: 2024,
            trials: 10_000,
            output: OutputSection::default(),
            constants: AtomConstants::default(),
            detection: DetectionSection::default(),
            tomo: TomoSection::default(),
            rabi: RabiSection::default(),
            synthprep: SynthSection::default(),
            stirap: StirapParams::default(),
            noise: NoiseModel::default(),
            ramsey: RamseySection::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { key: key.to_string(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and ≥ 0, got {v}")))
    }
}

fn at_least(key: &str, v: i64, min: i64) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(key, format!("must be ≥ {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = message
                .split('`')
                .nth(1)
                .filter(|_| message.contains("unknown field"))
                .unwrap_or("config")
                .to_string();
            CliError::Validation { key, message: e.to_string() }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn experiment(&self) -> Result<Experiment, CliError> {
        self.experiment.ok_or_else(|| invalid("experiment", "no experiment selected"))
    }

    /// Hash of the resolved configuration. The output directory is excluded
    /// so that relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let experiment = self.experiment()?;
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", format!("must be ≤ {}, got {}", i64::MAX, self.seed)));
        }
        at_least("trials", self.trials, 1)?;
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }

        let c = &self.constants;
        for (key, v) in [
            ("constants.mu_b", c.mu_b),
            ("constants.p_lifetime", c.p_lifetime),
            ("constants.d_lifetime", c.d_lifetime),
            ("constants.branching_s_over_d", c.branching_s_over_d),
        ] {
            positive(key, v)?;
        }

        let d = &self.detection;
        non_negative("detection.b_gauss", d.b_gauss)?;
        positive("detection.saturation_493", d.saturation_493)?;
        positive("detection.saturation_650", d.saturation_650)?;
        if d.offset_493.iter().chain(&d.offset_650).any(|v| !v.is_finite()) {
            return Err(invalid("detection.offset_493", "offsets must be finite"));
        }
        if d.sim.step_cap == 0 {
            return Err(invalid("detection.sim.step_cap", "must be ≥ 1"));
        }

        match experiment {
            Experiment::Tomo => {
                let t = &self.tomo;
                if t.populations.len() != 4 {
                    return Err(invalid("tomo.populations", format!("need 4 entries, got {}", t.populations.len())));
                }
                if t.populations.iter().any(|p| !(*p >= 0.0)) || (t.populations.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(invalid("tomo.populations", "must be ≥ 0 and sum to 1"));
                }
                if !(t.efficiency > 0.0 && t.efficiency <= 1.0) {
                    return Err(invalid("tomo.efficiency", format!("must lie in (0, 1], got {}", t.efficiency)));
                }
                non_negative("tomo.background", t.background)?;
                if t.matrix == MatrixSource::Simulated {
                    at_least("tomo.matrix_trials", t.matrix_trials, 1)?;
                }
            }
            Experiment::Rabi => {
                let r = &self.rabi;
                positive("rabi.rabi", r.rabi)?;
                if !r.phase.is_finite() {
                    return Err(invalid("rabi.phase", "must be finite"));
                }
                if !r.detuning.is_finite() {
                    return Err(invalid("rabi.detuning", "must be finite"));
                }
                if !(r.tau > 0.0) {
                    return Err(invalid("rabi.tau", format!("must be > 0 (inf for no decay), got {}", r.tau)));
                }
                if !matches!(r.initial_two_mj, -3 | -1 | 1 | 3) {
                    return Err(invalid("rabi.initial_two_mj", format!("must be one of -3, -1, 1, 3, got {}", r.initial_two_mj)));
                }
                positive("rabi.t_max", r.t_max)?;
                at_least("rabi.points", r.points, 8)?;
            }
            Experiment::Synthprep => {
                let s = &self.synthprep;
                positive("synthprep.omega", s.omega)?;
                positive("synthprep.transfer_omega", s.transfer_omega)?;
                if !s.phi.is_finite() {
                    return Err(invalid("synthprep.phi", "must be finite"));
                }
                at_least("synthprep.transfer_points", s.transfer_points, 2)?;
            }
            Experiment::Stirap => {
                let s = &self.stirap;
                non_negative("stirap.peak_pump", s.peak_pump)?;
                non_negative("stirap.peak_stokes", s.peak_stokes)?;
                positive("stirap.width", s.width)?;
                positive("stirap.total", s.total)?;
                if !s.delay.is_finite() {
                    return Err(invalid("stirap.delay", "must be finite"));
                }
                if s.steps == 0 {
                    return Err(invalid("stirap.steps", "must be ≥ 1"));
                }
            }
            Experiment::Ramsey | Experiment::Benchmark => {
                non_negative("noise.sigma_b_mg", self.noise.sigma_b_mg)?;
                non_negative("noise.residual_rate", self.noise.residual_rate)?;
                for h in &self.noise.harmonics {
                    non_negative("noise.harmonics.frequency_hz", h.frequency_hz)?;
                    non_negative("noise.harmonics.amplitude_mg", h.amplitude_mg)?;
                }
                if experiment == Experiment::Ramsey {
                    let r = &self.ramsey;
                    non_negative("ramsey.t_max", r.t_max)?;
                    non_negative("ramsey.calibrate_t2", r.calibrate_t2)?;
                    at_least("ramsey.points", r.points, 6)?;
                    if let Readout::Fringe { detuning_hz } = r.readout {
                        if !detuning_hz.is_finite() {
                            return Err(invalid("ramsey.readout.detuning_hz", "must be finite"));
                        }
                    }
                } else {
                    let b = &self.benchmark;
                    positive("benchmark.targets.s_t2", b.targets.s_t2)?;
                    if !(b.targets.insensitive_t2 > b.targets.s_t2) {
                        return Err(invalid("benchmark.targets.insensitive_t2", "must exceed benchmark.targets.s_t2"));
                    }
                    at_least("benchmark.points", b.points, 6)?;
                }
            }
            Experiment::DetmatrixS | Experiment::DetmatrixD | Experiment::Darkstates => {}
        }
        Ok(())
    }
}
