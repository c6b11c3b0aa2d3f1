//! Photon counting until the ion is pumped dark.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{cg_amplitude, Manifold, Polarization, ZeemanState};
use crate::error::{Error, Result};
use crate::rng::substream;

use super::model::PumpModel;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Quantum-jump trajectories over the state vector; keeps coherent dark
    /// superpositions.
    #[default]
    QuantumJump,
    /// Classical Markov chain over sublevels with low-saturation rates. Only
    /// faithful when no coherent dark superposition is involved.
    RateChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub mode: SimulationMode,
    /// Maximum number of emission events per trajectory.
    pub step_cap: usize,
    /// Rate-chain mode: a sublevel is dark when its excitation rate is below
    /// this fraction of the largest rate in the model.
    pub dark_epsilon: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            mode: SimulationMode::QuantumJump,
            step_cap: 1_000_000,
            dark_epsilon: 1e-6,
        }
    }
}

/// Exact running tally of per-trajectory photon counts. Integer sums make the
/// merge associative and order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhotonTally {
    pub trials: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl PhotonTally {
    pub fn push(&mut self, photons: u64) {
        self.trials += 1;
        self.sum += photons;
        self.sum_sq += u128::from(photons) * u128::from(photons);
    }

    pub fn merge(self, other: PhotonTally) -> PhotonTally {
        PhotonTally {
            trials: self.trials + other.trials,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.sum as f64 / self.trials as f64
    }

    pub fn variance(&self) -> f64 {
        if self.trials < 2 {
            return 0.0;
        }
        let n = self.trials as f64;
        let mean = self.mean();
        ((self.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.variance() / self.trials as f64).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct PumpingResult {
    pub tally: PhotonTally,
    /// Trajectories that hit the event cap (counted with the photons so far).
    pub capped: usize,
}

impl PumpingResult {
    pub fn mean(&self) -> f64 {
        self.tally.mean()
    }

    pub fn stderr(&self) -> f64 {
        self.tally.stderr()
    }
}

struct Trajectory {
    photons: u64,
    capped: bool,
}

/// Mean number of 493 nm photons emitted before the ion is pumped dark.
pub fn simulate_pumping(
    model: &PumpModel,
    initial: ZeemanState,
    trials: usize,
    seed: u64,
    options: &SimOptions,
) -> Result<PumpingResult> {
    if trials == 0 {
        return Err(Error::domain("trials must be ≥ 1"));
    }
    if initial.manifold() == Manifold::PHalf {
        return Err(Error::domain("initial state must be an S or D sublevel"));
    }
    let channels = DecayChannels::new(model)?;
    let outcomes: Vec<Trajectory> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t as u64);
            match options.mode {
                SimulationMode::QuantumJump => run_quantum(model, &channels, initial, options, &mut rng),
                SimulationMode::RateChain => run_rate_chain(model, &channels, initial, options, &mut rng),
            }
        })
        .collect();

    let mut tally = PhotonTally::default();
    let mut capped = 0;
    for o in &outcomes {
        tally.push(o.photons);
        capped += usize::from(o.capped);
    }
    if capped * 100 > trials {
        return Err(Error::NonTerminating {
            failed: capped,
            trials,
            cap: options.step_cap,
            config: format!("{} starting in {initial}", model.describe()),
        });
    }
    Ok(PumpingResult { tally, capped })
}

/// Spontaneous-emission operators from P1/2 into each lower manifold.
struct DecayChannels {
    /// (target manifold, branching fraction, polarization, amplitude[lower][upper])
    ops: Vec<(Manifold, f64, Vec<[f64; 2]>)>,
}

impl DecayChannels {
    fn new(model: &PumpModel) -> Result<Self> {
        let c = model.constants();
        let mut ops = Vec::new();
        for target in [Manifold::SHalf, Manifold::DThreeHalf] {
            let beta = c.branching_fraction(target);
            for pol in Polarization::ALL {
                let mut amp = vec![[0.0; 2]; target.dim()];
                for l in target.states() {
                    for p in Manifold::PHalf.states() {
                        amp[l.index()][p.index()] = cg_amplitude(l, p, pol)?;
                    }
                }
                ops.push((target, beta, amp));
            }
        }
        Ok(DecayChannels { ops })
    }
}

fn run_quantum<R: Rng>(
    model: &PumpModel,
    channels: &DecayChannels,
    initial: ZeemanState,
    options: &SimOptions,
    rng: &mut R,
) -> Trajectory {
    let gamma = model.constants().p_linewidth();
    let mut manifold = initial.manifold();
    let mut psi = vec![Complex64::new(0.0, 0.0); manifold.dim()];
    psi[initial.index()] = Complex64::new(1.0, 0.0);
    let mut photons = 0;
    for _ in 0..options.step_cap {
        let sub = model.subsystem(manifold);
        let cov = sub.excited_covariance(&psi);
        let p_jump = (gamma * cov.trace().re).clamp(0.0, 1.0);
        if rng.random::<f64>() >= p_jump {
            return Trajectory { photons, capped: false };
        }
        let u = sample_excited_component(&cov, rng);
        let (target, next) = sample_emission(channels, &u, rng);
        if target == Manifold::SHalf {
            photons += 1;
        }
        manifold = target;
        psi = next;
    }
    Trajectory { photons, capped: true }
}

/// Draws one pure component of the excited-state ensemble ∫ a a† dt.
fn sample_excited_component<R: Rng>(cov: &Matrix2<Complex64>, rng: &mut R) -> [Complex64; 2] {
    let eig = cov.symmetric_eigen();
    let w0 = eig.eigenvalues[0].max(0.0);
    let w1 = eig.eigenvalues[1].max(0.0);
    let k = if rng.random::<f64>() * (w0 + w1) < w0 { 0 } else { 1 };
    let col = eig.eigenvectors.column(k);
    [col[0], col[1]]
}

fn sample_emission<R: Rng>(channels: &DecayChannels, u: &[Complex64; 2], rng: &mut R) -> (Manifold, Vec<Complex64>) {
    let candidates: Vec<(Manifold, Vec<Complex64>, f64)> = channels
        .ops
        .iter()
        .map(|(target, beta, amp)| {
            let v: Vec<Complex64> = amp.iter().map(|row| u[0] * row[0] + u[1] * row[1]).collect();
            let w = beta * v.iter().map(|c| c.norm_sqr()).sum::<f64>();
            (*target, v, w)
        })
        .collect();
    let total: f64 = candidates.iter().map(|c| c.2).sum();
    let mut pick = rng.random::<f64>() * total;
    let mut chosen = candidates.len() - 1;
    for (k, c) in candidates.iter().enumerate() {
        if c.2 > 0.0 && pick < c.2 {
            chosen = k;
            break;
        }
        pick -= c.2;
    }
    let (target, v, w) = candidates.into_iter().nth(chosen).unwrap();
    let norm = (w / channels.ops[chosen].1).sqrt();
    (target, v.into_iter().map(|c| c / norm).collect())
}

fn run_rate_chain<R: Rng>(
    model: &PumpModel,
    channels: &DecayChannels,
    initial: ZeemanState,
    options: &SimOptions,
    rng: &mut R,
) -> Trajectory {
    let scale = [Manifold::SHalf, Manifold::DThreeHalf]
        .iter()
        .flat_map(|&m| {
            let sub = model.subsystem(m);
            (0..sub.n_lower).map(move |l| sub.total_rate(l))
        })
        .fold(0.0, f64::max);
    let mut manifold = initial.manifold();
    let mut level = initial.index();
    let mut photons = 0;
    for _ in 0..options.step_cap {
        let sub = model.subsystem(manifold);
        let total = sub.total_rate(level);
        if total <= options.dark_epsilon * scale || total == 0.0 {
            return Trajectory { photons, capped: false };
        }
        let upper = if rng.random::<f64>() * total < sub.rates[level][0] { 0 } else { 1 };
        let mut pick = rng.random::<f64>();
        let mut landed = None;
        'outer: for (target, beta, amp) in &channels.ops {
            for (l, row) in amp.iter().enumerate() {
                let w = beta * row[upper] * row[upper];
                if w > 0.0 && pick < w {
                    landed = Some((*target, l));
                    break 'outer;
                }
                pick -= w;
            }
        }
        // Round-off can leave `pick` marginally above the last weight.
        let (target, l) = landed.unwrap_or((Manifold::DThreeHalf, if upper == 0 { 0 } else { 3 }));
        if target == Manifold::SHalf {
            photons += 1;
        }
        manifold = target;
        level = l;
    }
    Trajectory { photons, capped: true }
}
