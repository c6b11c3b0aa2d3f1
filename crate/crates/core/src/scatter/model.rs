//! Eight-level pumping model: S1/2 (2) + P1/2 (2) + D3/2 (4).
//!
//! The two colors are treated as mutually incoherent. While the ion sits in a
//! lower manifold it evolves under the effective non-Hermitian Hamiltonian of
//! that manifold plus P1/2, driven only by the color that addresses it, in the
//! frame rotating with the applied laser components. A spontaneous emission
//! returns it to S1/2 (emitting a 493 nm photon) or to D3/2.

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::atomic::{cg_amplitude, AtomConstants, Manifold, Polarization, ZeemanState};
use crate::error::{Error, Result};
use crate::linalg::{null_space, orthogonal_complement, CMatrix, Lyapunov, ZERO};

use super::beams::{BeamConfig, Color};

/// Relative singular-value threshold separating stationary dark states from
/// slowly pumped ones.
pub const DEFAULT_DARK_EPSILON: f64 = 1e-6;

/// Frame-consistency tolerance on loop closures, in rad/s.
const FRAME_TOLERANCE: f64 = 1.0;

/// A lower manifold together with P1/2 under one color.
#[derive(Clone, Debug)]
pub(crate) struct Subsystem {
    pub n_lower: usize,
    /// Rotating-frame Hamiltonian on (lower ⊕ P), rad/s.
    pub hamiltonian: CMatrix,
    /// Orthonormal basis of the stationary dark subspace of the lower manifold.
    pub dark_basis: CMatrix,
    /// `response[i * n + j]`: P-block of ∫ ψψ† dt for the source e_i e_j†.
    response: Vec<Matrix2<Complex64>>,
    /// Low-saturation excitation rates `rates[l][p]` in 1/s.
    pub rates: Vec<[f64; 2]>,
}

impl Subsystem {
    fn build(
        constants: &AtomConstants,
        b_gauss: f64,
        manifold: Manifold,
        beam: Option<&BeamConfig>,
        dark_epsilon: f64,
    ) -> Result<Self> {
        let gamma = constants.p_linewidth();
        let lower: Vec<ZeemanState> = manifold.states().collect();
        let upper: Vec<ZeemanState> = Manifold::PHalf.states().collect();
        let n_lower = lower.len();
        let n = n_lower + 2;
        let state = |k: usize| if k < n_lower { lower[k] } else { upper[k - n_lower] };

        let mut h = CMatrix::zeros(n, n);
        // (lower index, upper index, laser angular offset)
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut rates = vec![[0.0; 2]; n_lower];
        if let Some(beam) = beam {
            for pol in beam.active() {
                let s = beam.saturation[pol.index()];
                let rabi = gamma * (s / 2.0).sqrt();
                let offset = TAU * beam.offset[pol.index()];
                for (li, &l) in lower.iter().enumerate() {
                    for (pi, &p) in upper.iter().enumerate() {
                        let c = cg_amplitude(l, p, pol)?;
                        if c == 0.0 {
                            continue;
                        }
                        let pk = n_lower + pi;
                        h[(pk, li)] += Complex64::new(rabi * c / 2.0, 0.0);
                        h[(li, pk)] += Complex64::new(rabi * c / 2.0, 0.0);
                        edges.push((li, pk, offset));

                        let resonance = TAU * (constants.zeeman_shift(p, b_gauss) - constants.zeeman_shift(l, b_gauss));
                        let delta = offset - resonance;
                        rates[li][pi] += (rabi * c).powi(2) / gamma / (1.0 + (2.0 * delta / gamma).powi(2));
                    }
                }
            }
        }

        // Frame offsets f with f(p) − f(l) = ω_laser along every coupling.
        let mut frame: Vec<Option<f64>> = vec![None; n];
        for root in 0..n {
            if frame[root].is_some() {
                continue;
            }
            frame[root] = Some(0.0);
            let mut stack = vec![root];
            while let Some(a) = stack.pop() {
                for &(l, p, w) in &edges {
                    let (other, value) = if a == l {
                        (p, frame[l].unwrap() + w)
                    } else if a == p {
                        (l, frame[p].unwrap() - w)
                    } else {
                        continue;
                    };
                    match frame[other] {
                        None => {
                            frame[other] = Some(value);
                            stack.push(other);
                        }
                        Some(existing) if (existing - value).abs() > FRAME_TOLERANCE => {
                            return Err(Error::domain(format!(
                                "{manifold:?} beam components have no common rotating frame \
                                 (a coupling loop requires 2·ω_π = ω_σ+ + ω_σ−)"
                            )));
                        }
                        Some(_) => {}
                    }
                }
            }
        }
        for k in 0..n {
            let energy = TAU * constants.zeeman_shift(state(k), b_gauss);
            h[(k, k)] = Complex64::new(energy - frame[k].unwrap(), 0.0);
        }

        let dark_basis = stationary_dark_basis(&h, n_lower, dark_epsilon);

        // Non-Hermitian generator K = −i(H − iΓ/2 Π_P), restricted to the
        // complement of the stationary dark subspace where it is stable.
        let mut k_full = h.map(|c| c * Complex64::new(0.0, -1.0));
        for pi in 0..2 {
            k_full[(n_lower + pi, n_lower + pi)] -= Complex64::new(gamma / 2.0, 0.0);
        }
        let mut dark_full = CMatrix::zeros(n, dark_basis.ncols());
        dark_full.view_mut((0, 0), (n_lower, dark_basis.ncols())).copy_from(&dark_basis);
        let q = orthogonal_complement(&dark_full, n);
        let k_red = q.adjoint() * &k_full * &q;
        let lyap = Lyapunov::new(&k_red);

        let mut response = Vec::with_capacity(n_lower * n_lower);
        for i in 0..n_lower {
            for j in 0..n_lower {
                let qi = q.row(i).adjoint();
                let qj = q.row(j).adjoint();
                let source = &qi * qj.adjoint();
                let x_red = lyap
                    .solve(&source)
                    .ok_or_else(|| Error::domain("pumping generator is singular outside the dark subspace"))?;
                let x = &q * x_red * q.adjoint();
                response.push(Matrix2::new(
                    x[(n_lower, n_lower)],
                    x[(n_lower, n_lower + 1)],
                    x[(n_lower + 1, n_lower)],
                    x[(n_lower + 1, n_lower + 1)],
                ));
            }
        }

        Ok(Subsystem {
            n_lower,
            hamiltonian: h,
            dark_basis,
            response,
            rates,
        })
    }

    /// ∫₀^∞ a(t) a(t)† dt for the P1/2 amplitudes a(t) of the no-jump
    /// evolution started from the lower-manifold state `psi`.
    pub(crate) fn excited_covariance(&self, psi: &[Complex64]) -> Matrix2<Complex64> {
        let n = self.n_lower;
        let mut acc = Matrix2::zeros();
        for i in 0..n {
            if psi[i] == ZERO {
                continue;
            }
            for j in 0..n {
                if psi[j] == ZERO {
                    continue;
                }
                acc += self.response[i * n + j] * (psi[i] * psi[j].conj());
            }
        }
        // Hermitian part only; the antihermitian residue is round-off.
        (acc + acc.adjoint()) * Complex64::new(0.5, 0.0)
    }

    pub(crate) fn total_rate(&self, l: usize) -> f64 {
        self.rates[l][0] + self.rates[l][1]
    }
}

/// Lower-manifold states that never couple to P1/2 under the rotating-frame
/// evolution: the unobservable subspace of (V, H_lower).
pub(crate) fn stationary_dark_basis(h: &CMatrix, n_lower: usize, rel_tol: f64) -> CMatrix {
    let v = h.view((n_lower, 0), (2, n_lower)).clone_owned();
    let h_lower = h.view((0, 0), (n_lower, n_lower)).clone_owned();
    let scale = h_lower.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h_unit = if scale > 0.0 { h_lower.map(|c| c / scale) } else { h_lower };
    let mut blocks = CMatrix::zeros(2 * n_lower, n_lower);
    let mut power = CMatrix::identity(n_lower, n_lower);
    for k in 0..n_lower {
        let block = &v * &power;
        blocks.view_mut((2 * k, 0), (2, n_lower)).copy_from(&block);
        power = &power * &h_unit;
    }
    if blocks.iter().all(|c| c.norm() == 0.0) {
        return CMatrix::identity(n_lower, n_lower);
    }
    null_space(&blocks, rel_tol)
}

/// Immutable pumping model for a given field and set of beams.
#[derive(Clone, Debug)]
pub struct PumpModel {
    constants: AtomConstants,
    b_gauss: f64,
    beams: Vec<BeamConfig>,
    warnings: Vec<String>,
    pub(crate) s_sub: Subsystem,
    pub(crate) d_sub: Subsystem,
}

impl PumpModel {
    pub fn build(constants: AtomConstants, b_gauss: f64, beams: &[BeamConfig]) -> Result<Self> {
        Self::build_with_epsilon(constants, b_gauss, beams, DEFAULT_DARK_EPSILON)
    }

    pub fn build_with_epsilon(
        constants: AtomConstants,
        b_gauss: f64,
        beams: &[BeamConfig],
        dark_epsilon: f64,
    ) -> Result<Self> {
        constants.validate()?;
        if !(b_gauss >= 0.0 && b_gauss.is_finite()) {
            return Err(Error::domain(format!("field must be finite and ≥ 0 G, got {b_gauss}")));
        }
        if beams.is_empty() {
            return Err(Error::domain("beam set is empty"));
        }
        for (i, beam) in beams.iter().enumerate() {
            beam.validate()?;
            if beams[..i].iter().any(|b| b.color == beam.color) {
                return Err(Error::domain(format!("more than one {:?} beam given", beam.color)));
            }
        }
        let mut warnings = Vec::new();
        if b_gauss == 0.0 {
            warnings.push("zero field: Zeeman levels are degenerate and dark states exist for any polarization set".to_string());
        }
        let find = |c: Color| beams.iter().find(|b| b.color == c);
        let s_sub = Subsystem::build(&constants, b_gauss, Manifold::SHalf, find(Color::Blue493), dark_epsilon)?;
        let d_sub = Subsystem::build(&constants, b_gauss, Manifold::DThreeHalf, find(Color::Red650), dark_epsilon)?;
        Ok(PumpModel {
            constants,
            b_gauss,
            beams: beams.to_vec(),
            warnings,
            s_sub,
            d_sub,
        })
    }

    pub fn constants(&self) -> &AtomConstants {
        &self.constants
    }

    pub fn field(&self) -> f64 {
        self.b_gauss
    }

    pub fn beams(&self) -> &[BeamConfig] {
        &self.beams
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn subsystem(&self, manifold: Manifold) -> &Subsystem {
        match manifold {
            Manifold::SHalf => &self.s_sub,
            Manifold::DThreeHalf => &self.d_sub,
            Manifold::PHalf => unreachable!("P1/2 is never a resting manifold"),
        }
    }

    /// Low-saturation excitation rate out of a lower sublevel, in 1/s.
    pub fn excitation_rate(&self, state: ZeemanState) -> Result<f64> {
        match state.manifold() {
            Manifold::PHalf => Err(Error::domain("excitation rate is defined for S and D sublevels")),
            m => Ok(self.subsystem(m).total_rate(state.index())),
        }
    }

    /// Number of stationary dark states in a lower manifold.
    pub fn stationary_dark_dimension(&self, manifold: Manifold) -> usize {
        self.subsystem(manifold).dark_basis.ncols()
    }

    /// Short human-readable description used in diagnostics.
    pub fn describe(&self) -> String {
        let beams: Vec<String> = self
            .beams
            .iter()
            .map(|b| {
                let pols: Vec<&str> = b.active().map(Polarization::name).collect();
                format!("{:?}[{}]", b.color, pols.join("+"))
            })
            .collect();
        format!("B = {} G, beams {}", self.b_gauss, beams.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_493() -> BeamConfig {
        BeamConfig::all_polarizations(Color::Blue493, 0.2)
    }

    #[test]
    fn blue_only_leaves_d_unexcited() {
        let m = PumpModel::build(AtomConstants::default(), 2.2, &[all_493()]).unwrap();
        for d in Manifold::DThreeHalf.states() {
            assert_eq!(m.excitation_rate(d).unwrap(), 0.0);
        }
        assert_eq!(m.stationary_dark_dimension(Manifold::DThreeHalf), 4);
        assert_eq!(m.stationary_dark_dimension(Manifold::SHalf), 0);
    }

    #[test]
    fn sigma_plus_red_selection_rule() {
        let red = BeamConfig::line_center(Color::Red650, &[Polarization::SigmaPlus], 0.2);
        let m = PumpModel::build(AtomConstants::default(), 2.2, &[red, all_493()]).unwrap();
        assert_eq!(m.excitation_rate(ZeemanState::d(1)).unwrap(), 0.0);
        assert_eq!(m.excitation_rate(ZeemanState::d(3)).unwrap(), 0.0);
        assert!(m.excitation_rate(ZeemanState::d(-3)).unwrap() > 0.0);
        assert!(m.excitation_rate(ZeemanState::d(-1)).unwrap() > 0.0);
    }

    #[test]
    fn zero_field_is_flagged() {
        let m = PumpModel::build(AtomConstants::default(), 0.0, &[all_493()]).unwrap();
        assert_eq!(m.warnings().len(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = AtomConstants::default();
        assert!(PumpModel::build(c, 2.2, &[]).is_err());
        assert!(PumpModel::build(c, -1.0, &[all_493()]).is_err());
        assert!(PumpModel::build(c, 2.2, &[all_493(), all_493()]).is_err());
        // Three independent frequencies around a coupling loop.
        let red = BeamConfig::dark(Color::Red650)
            .with(Polarization::SigmaPlus, 0.2, 1e6)
            .with(Polarization::SigmaMinus, 0.2, 1e6)
            .with(Polarization::Pi, 0.2, 0.0);
        assert!(PumpModel::build(c, 2.2, &[red]).is_err());
    }

    #[test]
    fn jump_probability_equals_bright_weight() {
        let red = BeamConfig::line_center(Color::Red650, &[Polarization::SigmaPlus, Polarization::Pi], 0.2);
        let m = PumpModel::build(AtomConstants::default(), 2.2, &[red, all_493()]).unwrap();
        let gamma = m.constants().p_linewidth();
        let sub = &m.d_sub;
        assert_eq!(sub.dark_basis.ncols(), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [Complex64::new(0.0, 0.0), Complex64::new(s, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, s)];
        let a = sub.excited_covariance(&psi);
        // d_+3/2 is stationary dark, d_−1/2 is eventually pumped.
        assert!((gamma * a.trace().re - 0.5).abs() < 1e-8);
    }
}
