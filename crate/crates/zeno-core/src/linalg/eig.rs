//! Eigenvalues of complex Hermitian matrices via the real symmetric
//! embedding and cyclic Jacobi rotations.
//!
//! H = A + iB maps to the real symmetric matrix [[A, −B], [B, A]] whose
//! spectrum is that of H with every eigenvalue doubled. Adequate for the
//! small dimensions (≤ 64) this crate works at.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};

use super::hermiticity_deviation;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a Hermitian matrix, ascending. The input must be
/// Hermitian within 1e-10 (symmetrized internally before embedding).
pub fn eigvalsh(m: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n != m.ncols() || n == 0 {
        return Err(ZenoError::Config(format!(
            "eigvalsh needs a square non-empty matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(ZenoError::Validation(
            "eigvalsh input has non-finite entries".into(),
        ));
    }
    if hermiticity_deviation(m) > 1e-10 * (1.0 + super::max_abs(m)) {
        return Err(ZenoError::Validation(
            "eigvalsh input is not Hermitian".into(),
        ));
    }

    // Real symmetric embedding, symmetrized to kill rounding asymmetry.
    let dim = 2 * n;
    let mut a = vec![0.0_f64; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            a[i * dim + j] = z.re;
            a[(i + n) * dim + (j + n)] = z.re;
            a[i * dim + (j + n)] = -z.im;
            a[(i + n) * dim + j] = z.im;
        }
    }

    jacobi_symmetric(&mut a, dim);

    let mut eigs: Vec<f64> = (0..dim).map(|i| a[i * dim + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // Doubled spectrum: average adjacent pairs.
    let out: Vec<f64> = (0..n)
        .map(|k| 0.5 * (eigs[2 * k] + eigs[2 * k + 1]))
        .collect();
    Ok(out)
}

/// Classic cyclic Jacobi on a dense real symmetric matrix stored row-major.
/// Diagonalizes in place; off-diagonals are driven below 1e-14·scale.
fn jacobi_symmetric(a: &mut [f64], n: usize) {
    let scale = a
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let m = arr2(&[[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
        let e = eigvalsh(&m).unwrap();
        assert_relative_eq!(e[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let m = arr2(&[[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]);
        let e = eigvalsh(&m).unwrap();
        assert_relative_eq!(e[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_and_frobenius_identities() {
        // Fixed pseudo-random Hermitian 5×5: Σλ = tr, Σλ² = ‖·‖_F².
        let n = 5;
        let mut m = Array2::zeros((n, n));
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1_u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i..n {
                if i == j {
                    m[(i, j)] = c(next(), 0.0);
                } else {
                    let z = c(next(), next());
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
        }
        let e = eigvalsh(&m).unwrap();
        let tr: f64 = m.diag().iter().map(|z| z.re).sum();
        let fr: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(e.iter().sum::<f64>(), tr, epsilon = 1e-10);
        assert_relative_eq!(e.iter().map(|x| x * x).sum::<f64>(), fr, epsilon = 1e-10);
    }

    #[test]
    fn psd_gram_matrix_is_nonnegative() {
        let b = arr2(&[
            [c(1.0, 0.2), c(0.3, -0.4), c(0.0, 1.0)],
            [c(0.5, 0.0), c(-1.0, 0.1), c(0.2, 0.2)],
            [c(0.0, -0.3), c(0.7, 0.0), c(1.5, 0.0)],
        ]);
        let g = super::super::dagger(&b).dot(&b);
        let e = eigvalsh(&g).unwrap();
        assert!(e.iter().all(|&x| x >= -1e-12), "eigs {e:?}");
    }
}
