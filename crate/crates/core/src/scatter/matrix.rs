//! Detection matrices: mean 493 nm photon counts per (polarization setting ×
//! initial sublevel).

use serde::{Deserialize, Serialize};

use crate::atomic::{AtomConstants, Manifold, Polarization, ZeemanState};
use crate::doc::{self, DocWriter, Provenance};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

use super::beams::{BeamConfig, Color};
use super::jump::{simulate_pumping, SimOptions};
use super::model::PumpModel;

pub const DOC_KIND: &str = "detection_matrix";

/// The five 650 nm settings used for D3/2 detection, in row order.
pub const D_SETTINGS: [&[Polarization]; 5] = [
    &[Polarization::SigmaPlus],
    &[Polarization::SigmaMinus],
    &[Polarization::Pi],
    &[Polarization::SigmaPlus, Polarization::Pi],
    &[Polarization::SigmaMinus, Polarization::Pi],
];

/// The two 493 nm settings used for S1/2 detection, in row order.
pub const S_SETTINGS: [Polarization; 2] = [Polarization::SigmaPlus, Polarization::SigmaMinus];

/// Published D3/2 detection matrix (rows as [`D_SETTINGS`], columns ascending m_J).
pub const PUBLISHED_D: [[f64; 4]; 5] = [
    [6.6, 5.4, 0.0, 0.0],
    [0.0, 0.0, 5.4, 6.6],
    [0.0, 6.0, 6.0, 0.0],
    [13.3, 12.6, 11.4, 0.0],
    [0.0, 11.4, 12.6, 13.3],
];

/// Published S1/2 photon budget per bright trial.
pub const PUBLISHED_S_BUDGET: f64 = 2.8;

pub fn setting_label(pols: &[Polarization]) -> String {
    pols.iter().map(|p| p.name()).collect::<Vec<_>>().join("+")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Trajectories per entry (0 for tabulated matrices).
    pub trials: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DetectionMatrix {
    pub fn published_d() -> Self {
        DetectionMatrix {
            rows: D_SETTINGS.iter().map(|s| setting_label(s)).collect(),
            cols: Manifold::DThreeHalf.states().map(|s| s.to_string()).collect(),
            mean: PUBLISHED_D.iter().map(|r| r.to_vec()).collect(),
            stderr: vec![vec![0.0; 4]; 5],
            trials: 0,
            warnings: Vec::new(),
        }
    }

    pub fn published_s() -> Self {
        DetectionMatrix {
            rows: S_SETTINGS.iter().map(|p| p.name().to_string()).collect(),
            cols: Manifold::SHalf.states().map(|s| s.to_string()).collect(),
            mean: vec![vec![PUBLISHED_S_BUDGET, 0.0], vec![0.0, PUBLISHED_S_BUDGET]],
            stderr: vec![vec![0.0; 2]; 2],
            trials: 0,
            warnings: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.mean.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rows.len();
        let c = self.cols.len();
        if r == 0 || c == 0 {
            return Err(Error::domain("detection matrix is empty"));
        }
        for (name, m) in [("mean", &self.mean), ("stderr", &self.stderr)] {
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(Error::domain(format!("`{name}` is not {r}×{c}")));
            }
        }
        if self.mean.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("detection matrix entries must be finite and ≥ 0"));
        }
        Ok(())
    }

    pub fn to_document(&self, provenance: &Provenance) -> String {
        let mut w = DocWriter::new(DOC_KIND, provenance);
        w.comment("mean 493 nm photons per trial until dark; rows are polarization settings, columns initial sublevels")
            .int("trials", self.trials as i128)
            .strings("rows", &self.rows)
            .strings("cols", &self.cols)
            .matrix("mean", &self.mean)
            .matrix("stderr", &self.stderr)
            .strings("warnings", &self.warnings);
        w.finish()
    }

    pub fn from_document(text: &str) -> Result<Self> {
        doc::expect_kind(text, DOC_KIND)?;
        let m: DetectionMatrix = doc::parse(text)?;
        m.validate()?;
        Ok(m)
    }
}

/// Physical parameters shared by the S and D detection experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub constants: AtomConstants,
    pub b_gauss: f64,
    pub saturation_493: f64,
    pub saturation_650: f64,
    /// Laser offsets from line center (Hz) for σ+, σ−, π.
    pub offset_493: [f64; 3],
    pub offset_650: [f64; 3],
    pub sim: SimOptions,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            constants: AtomConstants::default(),
            b_gauss: 2.2,
            saturation_493: 0.2,
            saturation_650: 0.2,
            offset_493: [0.0; 3],
            offset_650: [0.0; 3],
            sim: SimOptions::default(),
        }
    }
}

impl DetectionParams {
    fn beam(&self, color: Color, pols: &[Polarization]) -> BeamConfig {
        let (sat, offset) = match color {
            Color::Blue493 => (self.saturation_493, self.offset_493),
            Color::Red650 => (self.saturation_650, self.offset_650),
        };
        pols.iter()
            .fold(BeamConfig::dark(color), |b, &p| b.with(p, sat, offset[p.index()]))
    }

    /// Beams for S1/2 detection with the given 493 nm polarization.
    pub fn s_beams(&self, pol: Polarization) -> [BeamConfig; 2] {
        [self.beam(Color::Blue493, &[pol]), self.beam(Color::Red650, &Polarization::ALL)]
    }

    /// Beams for D3/2 detection with the given 650 nm setting.
    pub fn d_beams(&self, setting: &[Polarization]) -> [BeamConfig; 2] {
        [self.beam(Color::Blue493, &Polarization::ALL), self.beam(Color::Red650, setting)]
    }
}

fn run_matrix(
    params: &DetectionParams,
    rows: Vec<(String, [BeamConfig; 2])>,
    cols: Vec<ZeemanState>,
    trials: usize,
    seed: u64,
    mut warnings: Vec<String>,
) -> Result<DetectionMatrix> {
    let mut mean = Vec::with_capacity(rows.len());
    let mut stderr = Vec::with_capacity(rows.len());
    for (r, (label, beams)) in rows.iter().enumerate() {
        let model = PumpModel::build(params.constants, params.b_gauss, beams)?;
        for w in model.warnings() {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let mut m_row = Vec::with_capacity(cols.len());
        let mut e_row = Vec::with_capacity(cols.len());
        for (c, &initial) in cols.iter().enumerate() {
            let entry_seed = derive_seed(seed, (r * 16 + c) as u64);
            let res = simulate_pumping(&model, initial, trials, entry_seed, &params.sim)
                .map_err(|e| match e {
                    Error::NonTerminating { failed, trials, cap, config } => Error::NonTerminating {
                        failed,
                        trials,
                        cap,
                        config: format!("row {label}: {config}"),
                    },
                    other => other,
                })?;
            m_row.push(res.mean());
            e_row.push(res.stderr());
        }
        mean.push(m_row);
        stderr.push(e_row);
    }
    Ok(DetectionMatrix {
        rows: rows.into_iter().map(|r| r.0).collect(),
        cols: cols.iter().map(|s| s.to_string()).collect(),
        mean,
        stderr,
        trials: trials as u64,
        warnings,
    })
}

/// 2×2 S1/2 detection matrix: rows σ+, σ− at 493 nm with all-polarization
/// 650 nm repumping; columns s_−1/2, s_+1/2.
pub fn detection_matrix_s(params: &DetectionParams, trials: usize, seed: u64) -> Result<DetectionMatrix> {
    let rows = S_SETTINGS
        .iter()
        .map(|&p| (p.name().to_string(), params.s_beams(p)))
        .collect();
    run_matrix(params, rows, Manifold::SHalf.states().collect(), trials, seed, Vec::new())
}

/// 5×4 D3/2 detection matrix over {σ+, σ−, π, σ+&π, σ−&π} at 650 nm with
/// all-polarization 493 nm repumping; columns ascending m_J.
pub fn detection_matrix_d(params: &DetectionParams, trials: usize, seed: u64) -> Result<DetectionMatrix> {
    let mut warnings = Vec::new();
    let rows: Vec<(String, [BeamConfig; 2])> = D_SETTINGS
        .iter()
        .map(|s| (setting_label(s), params.d_beams(s)))
        .collect();
    for (label, beams) in &rows {
        let red = &beams[1];
        if red.is_on(Polarization::Pi) {
            let pi = red.detuning_from_resonance(Polarization::Pi, &params.constants, params.b_gauss);
            for sigma in [Polarization::SigmaPlus, Polarization::SigmaMinus] {
                if !red.is_on(sigma) {
                    continue;
                }
                let d = red.detuning_from_resonance(sigma, &params.constants, params.b_gauss);
                if (d - pi).abs() < 1.0 {
                    warnings.push(format!(
                        "row {label}: π and σ components share a detuning; the second dark state is stationary and the row loses rank"
                    ));
                }
            }
        }
    }
    run_matrix(params, rows, Manifold::DThreeHalf.states().collect(), trials, seed, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_document_round_trip() {
        let m = DetectionMatrix::published_d();
        let prov = Provenance { config_hash: "h".into(), seed: 3 };
        let back = DetectionMatrix::from_document(&m.to_document(&prov)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_ragged_or_negative() {
        let mut m = DetectionMatrix::published_d();
        m.mean[0][0] = -1.0;
        assert!(m.validate().is_err());
        let mut m = DetectionMatrix::published_d();
        m.stderr.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn equal_detunings_warn() {
        let params = DetectionParams {
            b_gauss: 0.0,
            ..DetectionParams::default()
        };
        let m = detection_matrix_d(&params, 20, 1).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("sigma_plus+pi")));
        assert!(m.warnings.iter().any(|w| w.contains("zero field")));
        let m = detection_matrix_d(&DetectionParams::default(), 20, 1).unwrap();
        assert!(m.warnings.is_empty());
    }
}
