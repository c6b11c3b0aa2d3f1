//! Small dense complex linear algebra used by the simulators.

use nalgebra::{DMatrix, DVector, LU, SymmetricEigen};
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
#[cfg(test)]
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
#[cfg(test)]
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Orthonormal eigenvectors of a Hermitian matrix, ascending eigenvalues.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// A right singular vector counts as null when its singular value is below
/// `rel_tol` times the largest one.
pub(crate) fn null_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = m.ncols();
    let gram = m.adjoint() * m;
    let (values, vectors) = hermitian_eigen(&gram);
    let scale = values.iter().cloned().fold(0.0, f64::max);
    let cut = (rel_tol * rel_tol) * scale;
    let cols: Vec<usize> = (0..n).filter(|&k| scale == 0.0 || values[k] <= cut).collect();
    CMatrix::from_fn(n, cols.len(), |r, c| vectors[(r, cols[c])])
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `basis` (whose columns must be orthonormal) in C^n.
pub(crate) fn orthogonal_complement(basis: &CMatrix, n: usize) -> CMatrix {
    let projector = CMatrix::identity(n, n) - basis * basis.adjoint();
    let (values, vectors) = hermitian_eigen(&projector);
    let cols: Vec<usize> = (0..n).filter(|&k| values[k] > 0.5).collect();
    CMatrix::from_fn(n, cols.len(), |r, c| vectors[(r, cols[c])])
}

/// Solver for the continuous Lyapunov equation K X + X K† = −S with a fixed
/// stable generator K.
pub(crate) struct Lyapunov {
    n: usize,
    lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Lyapunov {
    pub(crate) fn new(k: &CMatrix) -> Self {
        let n = k.nrows();
        let kc = k.map(|c| c.conj());
        // vec(K X + X K†) = (I ⊗ K + conj(K) ⊗ I) vec(X), column-major vec.
        let op = CMatrix::from_fn(n * n, n * n, |row, col| {
            let (i, j) = (row % n, row / n);
            let (p, q) = (col % n, col / n);
            let mut v = ZERO;
            if q == j {
                v += k[(i, p)];
            }
            if p == i {
                v += kc[(j, q)];
            }
            v
        });
        Lyapunov { n, lu: op.lu() }
    }

    pub(crate) fn solve(&self, source: &CMatrix) -> Option<CMatrix> {
        let n = self.n;
        let rhs = CVector::from_iterator(n * n, source.iter().map(|c| -c));
        let x = self.lu.solve(&rhs)?;
        Some(CMatrix::from_column_slice(n, n, x.as_slice()))
    }
}
