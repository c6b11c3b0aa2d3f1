//! Dark states of the D3/2 quartet under 650 nm light.

use num_complex::Complex64;

use crate::atomic::{AtomConstants, Polarization, JZ_DIAGONAL};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, null_space, CMatrix};
use crate::quartet::QuartetState;

use super::beams::{BeamConfig, Color};
use super::model::{PumpModel, DEFAULT_DARK_EPSILON};

#[derive(Clone, Debug)]
pub struct DarkState {
    pub state: QuartetState,
    /// Stays dark under the rotating-frame Zeeman evolution.
    pub stationary: bool,
}

/// Dark states for a set of 650 nm polarizations from a single laser at line
/// center (π resonant, σ components one Zeeman splitting off their lines).
pub fn find_dark_states(pols: &[Polarization], b_gauss: f64) -> Result<Vec<DarkState>> {
    if pols.is_empty() {
        return Err(Error::domain("polarization set is empty"));
    }
    let beam = BeamConfig::line_center(Color::Red650, pols, 0.2);
    find_dark_states_with(&AtomConstants::default(), &beam, b_gauss)
}

/// Dark space of the 2×4 coupling map from the quartet into P1/2, split into
/// a stationary part and its non-stationary complement.
///
/// Stationary states come out as J_z eigenstates whenever the stationary
/// subspace is spanned by Zeeman sublevels.
pub fn find_dark_states_with(constants: &AtomConstants, beam: &BeamConfig, b_gauss: f64) -> Result<Vec<DarkState>> {
    if beam.color != Color::Red650 {
        return Err(Error::domain("dark states of D3/2 need a 650 nm beam"));
    }
    let model = PumpModel::build(*constants, b_gauss, &[*beam])?;
    let sub = &model.d_sub;
    let coupling = sub.hamiltonian.view((4, 0), (2, 4)).clone_owned();
    let dark = null_space(&coupling, DEFAULT_DARK_EPSILON);
    let stationary = sub.dark_basis.clone();

    let jz = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        JZ_DIAGONAL.iter().map(|&m| Complex64::new(m, 0.0)),
    ));
    let mut out = Vec::new();
    if stationary.ncols() > 0 {
        let restricted = stationary.adjoint() * &jz * &stationary;
        let (_, rot) = hermitian_eigen(&restricted);
        let basis = &stationary * rot;
        for col in basis.column_iter() {
            out.push(DarkState {
                state: canonical(col.iter().copied())?,
                stationary: true,
            });
        }
    }
    let projector = &dark * dark.adjoint() - &stationary * stationary.adjoint();
    let (values, vectors) = hermitian_eigen(&projector);
    for (k, v) in values.iter().enumerate() {
        if *v > 0.5 {
            out.push(DarkState {
                state: canonical(vectors.column(k).iter().copied())?,
                stationary: false,
            });
        }
    }
    Ok(out)
}

/// Normalizes, fixes the global phase (largest component real positive) and
/// drops round-off components.
fn canonical(amps: impl Iterator<Item = Complex64>) -> Result<QuartetState> {
    let mut a: Vec<Complex64> = amps.collect();
    let big = a.iter().cloned().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
    let phase = big.conj() / big.norm();
    for c in a.iter_mut() {
        *c *= phase;
        if c.norm() < 1e-12 {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    QuartetState::normalized([a[0], a[1], a[2], a[3]])
}
