//! States of the D3/2 quartet in the ascending-m_J basis
//! (d_−3/2, d_−1/2, d_+1/2, d_+3/2).

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const NORM_TOLERANCE: f64 = 1e-9;
const HERMITIAN_TOLERANCE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = 1e-10;

/// Normalized pure state of the quartet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuartetState {
    amps: [Complex64; 4],
}

impl QuartetState {
    pub fn new(amps: [Complex64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("quartet state has norm {norm}")));
        }
        Ok(QuartetState { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: [Complex64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot normalize a zero vector"));
        }
        Ok(QuartetState {
            amps: amps.map(|c| c / norm),
        })
    }

    /// Basis state by ascending-m_J index.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "quartet basis index {index} out of range");
        let mut amps = [Complex64::new(0.0, 0.0); 4];
        amps[index] = Complex64::new(1.0, 0.0);
        QuartetState { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn to_vector(&self) -> Vector4<Complex64> {
        Vector4::from_column_slice(&self.amps)
    }

    pub(crate) fn from_vector_unchecked(v: &Vector4<Complex64>) -> Self {
        QuartetState {
            amps: [v[0], v[1], v[2], v[3]],
        }
    }

    pub fn populations(&self) -> [f64; 4] {
        self.amps.map(|c| c.norm_sqr())
    }

    pub fn inner(&self, other: &QuartetState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &QuartetState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = self.to_vector();
        DensityMatrix(v * v.adjoint())
    }
}

/// Mixed state of the quartet.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub(crate) Matrix4<Complex64>);

impl DensityMatrix {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(m: Matrix4<Complex64>) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::domain(format!("density matrix not Hermitian (deviation {herm})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > NORM_TOLERANCE || tr.im.abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("density matrix trace {tr}")));
        }
        let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::domain(format!("density matrix has eigenvalue {min_eig}")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix4::identity().map(|c: Complex64| c * 0.25))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn populations(&self) -> [f64; 4] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re, self.0[(3, 3)].re]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn overlap(&self, psi: &QuartetState) -> f64 {
        let v = psi.to_vector();
        (v.adjoint() * self.0 * v)[(0, 0)].re
    }
}
