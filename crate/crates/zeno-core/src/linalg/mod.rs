//! Dense complex linear algebra: density matrices, Liouvillians, matrix
//! exponentials and superoperator propagation.
//!
//! Units are natural throughout (ℏ = 1): Hamiltonian entries are angular
//! frequencies, collapse operators carry sqrt(angular frequency).
//! Superoperators act on column-stacked density matrices.

mod eig;
mod expm;
mod liouville;

pub use eig::eigvalsh;
pub use expm::matrix_exp;
pub use liouville::{
    build_liouvillian, compose, expm_action, pair_generator_superop, propagate, propagate_matrix,
    Liouvillian, MatrixMap, Propagator,
};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};

/// Largest Hilbert-space dimension accepted anywhere in the crate.
pub const DIM_CAP: usize = 64;
/// Largest matrix accepted by [`matrix_exp`] (superoperator of a `DIM_CAP` system).
pub const EXP_SIZE_CAP: usize = DIM_CAP * DIM_CAP;

/// Hermiticity tolerance used at construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Unit-trace tolerance used at construction.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue a density matrix may have at construction.
pub const PSD_FLOOR: f64 = -1e-10;

/// Conjugate transpose.
pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Sum of diagonal entries.
pub fn trace(m: &Array2<Complex64>) -> Complex64 {
    m.diag().iter().sum()
}

/// Largest entry-wise deviation from Hermiticity, max |m[i,j] − conj(m[j,i])|.
pub fn hermiticity_deviation(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Largest entry magnitude.
pub fn max_abs(m: &Array2<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn one_norm(m: &Array2<Complex64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Frobenius norm.
pub fn frobenius_norm(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-stack a matrix into a vector: v[j·d + i] = m[i, j].
pub fn vec_col(m: &Array2<Complex64>) -> Vec<Complex64> {
    let d = m.nrows();
    let mut v = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        for i in 0..d {
            v[j * d + i] = m[(i, j)];
        }
    }
    v
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &[Complex64], dim: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((dim, dim));
    for j in 0..dim {
        for i in 0..dim {
            m[(i, j)] = v[j * dim + i];
        }
    }
    m
}

fn check_square(m: &Array2<Complex64>, what: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(ZenoError::Config(format!(
            "{what} must be square and non-empty, got {r}×{c}"
        )));
    }
    Ok(r)
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<Complex64>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix. Checks Hermiticity within 1e-12, unit
    /// trace within 1e-12 and smallest eigenvalue ≥ −1e-10.
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let dim = check_square(&entries, "density matrix")?;
        if dim > DIM_CAP {
            return Err(ZenoError::Config(format!(
                "density matrix dimension {dim} exceeds cap {DIM_CAP}"
            )));
        }
        let herm = hermiticity_deviation(&entries);
        if herm > HERMITICITY_TOL {
            return Err(ZenoError::Validation(format!(
                "density matrix not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = trace(&entries);
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(ZenoError::Validation(format!(
                "density matrix trace {tr} is not 1"
            )));
        }
        let min_eig = eigvalsh(&entries)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < PSD_FLOOR {
            return Err(ZenoError::Validation(format!(
                "density matrix not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        Ok(Self { entries })
    }

    /// Pure state |k⟩⟨k| in a `dim`-dimensional space.
    pub fn pure(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(ZenoError::Config(format!(
                "pure state index {k} out of range for dimension {dim}"
            )));
        }
        let mut m = Array2::zeros((dim, dim));
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn density_matrix_accepts_valid_mixed_state() {
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.75, 0.0);
        m[(1, 1)] = c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.2);
        m[(1, 0)] = c(0.1, -0.2);
        let rho = DensityMatrix::new(m).unwrap();
        assert_eq!(rho.dim(), 2);
    }

    #[test]
    fn density_matrix_rejects_non_hermitian() {
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(0.3, 0.0);
        m[(1, 0)] = c(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(ZenoError::Validation(_))
        ));
    }

    #[test]
    fn density_matrix_rejects_wrong_trace() {
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.9, 0.0);
        m[(1, 1)] = c(0.3, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(ZenoError::Validation(_))
        ));
    }

    #[test]
    fn density_matrix_rejects_negative_eigenvalue() {
        // Hermitian, unit trace, but indefinite: eigenvalues 1.5 and -0.5.
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.5, 0.0);
        m[(1, 1)] = c(0.5, 0.0);
        m[(0, 1)] = c(1.0, 0.0);
        m[(1, 0)] = c(1.0, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(ZenoError::Validation(_))
        ));
    }

    #[test]
    fn density_matrix_rejects_dimensions_beyond_cap() {
        let n = DIM_CAP + 1;
        let mut m = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            m[(i, i)] = c(1.0 / n as f64, 0.0);
        }
        assert!(matches!(DensityMatrix::new(m), Err(ZenoError::Config(_))));
    }

    #[test]
    fn kron_and_vec_are_consistent() {
        // vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ) for column stacking.
        let a = ndarray::arr2(&[[c(1.0, 0.5), c(0.0, -1.0)], [c(2.0, 0.0), c(0.3, 0.1)]]);
        let b = ndarray::arr2(&[[c(0.2, 0.0), c(1.0, 1.0)], [c(-1.0, 0.0), c(0.0, 0.7)]]);
        let rho = ndarray::arr2(&[[c(0.5, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.5, 0.0)]]);
        let lhs = vec_col(&a.dot(&rho).dot(&b));
        let op = kron(&b.t().to_owned(), &a);
        let v = vec_col(&rho);
        for (i, l) in lhs.iter().enumerate() {
            let r: Complex64 = (0..4).map(|j| op[(i, j)] * v[j]).sum();
            assert_relative_eq!(l.re, r.re, epsilon = 1e-14);
            assert_relative_eq!(l.im, r.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn one_norm_matches_definition() {
        let m = ndarray::arr2(&[[c(3.0, 4.0), c(0.0, 0.0)], [c(0.0, 1.0), c(2.0, 0.0)]]);
        assert_relative_eq!(one_norm(&m), 6.0, epsilon = 1e-15);
    }
}
