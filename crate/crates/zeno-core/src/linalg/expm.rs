//! Dense complex matrix exponential.
//!
//! Scaling and squaring with diagonal Padé approximants, following
//! Higham, "The Scaling and Squaring Method for the Matrix Exponential
//! Revisited", SIAM J. Matrix Anal. Appl. 26 (2005).

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};

use super::{check_square, one_norm, EXP_SIZE_CAP};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

/// exp(M) for a square complex matrix. Relative accuracy is at the 1e-13
/// level for ‖M‖₁ ≤ 100. Matrices larger than 4096×4096 are rejected.
pub fn matrix_exp(m: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = check_square(m, "matrix_exp input")?;
    if n > EXP_SIZE_CAP {
        return Err(ZenoError::Config(format!(
            "matrix_exp input is {n}×{n}, cap is {EXP_SIZE_CAP}×{EXP_SIZE_CAP}"
        )));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(ZenoError::Validation(
            "matrix_exp input has non-finite entries".into(),
        ));
    }

    let norm = one_norm(m);
    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade(m, &PADE3);
        (u, v, 0)
    } else if norm < THETA_5 {
        let (u, v) = pade(m, &PADE5);
        (u, v, 0)
    } else if norm < THETA_7 {
        let (u, v) = pade(m, &PADE7);
        (u, v, 0)
    } else if norm < THETA_9 {
        let (u, v) = pade(m, &PADE9);
        (u, v, 0)
    } else {
        let mut s = (norm / THETA_13).log2().ceil() as i32;
        if s < 0 {
            s = 0;
        }
        let scaled = m.mapv(|z| z * 2f64.powi(-s));
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };

    // Padé approximant is (V + U)(V − U)⁻¹.
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = lu_solve(denom, numer)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn identity(n: usize) -> Array2<Complex64> {
    Array2::eye(n)
}

/// U, V for the order-3/5/7/9 approximants (coefficient table selects order).
fn pade(m: &Array2<Complex64>, b: &[f64]) -> (Array2<Complex64>, Array2<Complex64>) {
    let n = m.nrows();
    let m2 = m.dot(m);
    // Even powers m2, m4, ... as needed by the coefficient count.
    let mut powers = vec![identity(n), m2];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap().dot(&powers[1]);
        powers.push(next);
    }
    let mut odd = Array2::<Complex64>::zeros((n, n));
    let mut even = Array2::<Complex64>::zeros((n, n));
    for (k, &coeff) in b.iter().enumerate() {
        let c = Complex64::new(coeff, 0.0);
        if k % 2 == 1 {
            odd = odd + powers[k / 2].mapv(|z| z * c);
        } else {
            even = even + powers[k / 2].mapv(|z| z * c);
        }
    }
    (m.dot(&odd), even)
}

fn pade13(m: &Array2<Complex64>) -> (Array2<Complex64>, Array2<Complex64>) {
    let b = &PADE13;
    let n = m.nrows();
    let m2 = m.dot(m);
    let m4 = m2.dot(&m2);
    let m6 = m4.dot(&m2);
    let coef = |k: usize| Complex64::new(b[k], 0.0);

    let inner_u = m6.mapv(|z| z * coef(13)) + m4.mapv(|z| z * coef(11)) + m2.mapv(|z| z * coef(9));
    let u_poly = m6.dot(&inner_u)
        + m6.mapv(|z| z * coef(7))
        + m4.mapv(|z| z * coef(5))
        + m2.mapv(|z| z * coef(3))
        + identity(n).mapv(|z| z * coef(1));
    let u = m.dot(&u_poly);

    let inner_v = m6.mapv(|z| z * coef(12)) + m4.mapv(|z| z * coef(10)) + m2.mapv(|z| z * coef(8));
    let v = m6.dot(&inner_v)
        + m6.mapv(|z| z * coef(6))
        + m4.mapv(|z| z * coef(4))
        + m2.mapv(|z| z * coef(2))
        + identity(n).mapv(|z| z * coef(0));
    (u, v)
}

/// Solve A·X = B by LU with partial pivoting.
fn lu_solve(a: Array2<Complex64>, b: Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    let mut lu = a;
    let mut x = b;
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut pivot = k;
        let mut best = lu[(perm[k], k)].norm();
        for r in (k + 1)..n {
            let v = lu[(perm[r], k)].norm();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(ZenoError::Numerics(
                "singular matrix in Padé denominator".into(),
            ));
        }
        perm.swap(k, pivot);
        let pk = perm[k];
        let diag = lu[(pk, k)];
        for r in (k + 1)..n {
            let pr = perm[r];
            let factor = lu[(pr, k)] / diag;
            lu[(pr, k)] = factor;
            for c in (k + 1)..n {
                let sub = factor * lu[(pk, c)];
                lu[(pr, c)] -= sub;
            }
            for c in 0..x.ncols() {
                let sub = factor * x[(pk, c)];
                x[(pr, c)] -= sub;
            }
        }
    }

    // Back substitution on the permuted rows.
    let cols = x.ncols();
    let mut out = Array2::zeros((n, cols));
    for c in 0..cols {
        for i in (0..n).rev() {
            let pi = perm[i];
            let mut acc = x[(pi, c)];
            for j in (i + 1)..n {
                acc -= lu[(pi, j)] * out[(j, c)];
            }
            out[(i, c)] = acc / lu[(pi, i)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let m = Array2::zeros((3, 3));
        let e = matrix_exp(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(e[(i, j)].re, want, epsilon = 1e-15);
                assert_relative_eq!(e[(i, j)].im, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn exp_of_imaginary_diagonal() {
        let thetas = [0.3, -2.0, 11.0];
        let mut m = Array2::zeros((3, 3));
        for (i, &t) in thetas.iter().enumerate() {
            m[(i, i)] = c(0.0, t);
        }
        let e = matrix_exp(&m).unwrap();
        for (i, &t) in thetas.iter().enumerate() {
            assert_relative_eq!(e[(i, i)].re, t.cos(), epsilon = 1e-13);
            assert_relative_eq!(e[(i, i)].im, t.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn exp_matches_known_2x2() {
        // exp([[0, θ], [−θ, 0]]) is a rotation by θ.
        let theta = 1.234_f64;
        let m = arr2(&[[c(0.0, 0.0), c(theta, 0.0)], [c(-theta, 0.0), c(0.0, 0.0)]]);
        let e = matrix_exp(&m).unwrap();
        assert_relative_eq!(e[(0, 0)].re, theta.cos(), epsilon = 1e-13);
        assert_relative_eq!(e[(0, 1)].re, theta.sin(), epsilon = 1e-13);
        assert_relative_eq!(e[(1, 0)].re, -theta.sin(), epsilon = 1e-13);
    }

    #[test]
    fn accurate_at_norm_one_hundred() {
        // Rotation generator with ‖M‖₁ = 100: entries stay within 1e-12
        // relative of cos/sin(100).
        let theta = 100.0_f64;
        let m = arr2(&[[c(0.0, 0.0), c(theta, 0.0)], [c(-theta, 0.0), c(0.0, 0.0)]]);
        let e = matrix_exp(&m).unwrap();
        assert_relative_eq!(e[(0, 0)].re, theta.cos(), max_relative = 1e-12);
        assert_relative_eq!(e[(0, 1)].re, theta.sin(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m: Array2<Complex64> = Array2::zeros((2, 2));
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matrix_exp(&m).is_err());
    }

    #[test]
    fn large_norm_uses_squaring() {
        // diag(±40i): norm forces scaling, result stays on the unit circle.
        let mut m = Array2::zeros((2, 2));
        m[(0, 0)] = c(0.0, 40.0);
        m[(1, 1)] = c(0.0, -40.0);
        let e = matrix_exp(&m).unwrap();
        assert_relative_eq!(e[(0, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[(0, 0)].re, 40.0_f64.cos(), epsilon = 1e-11);
    }

    proptest! {
        // exp(M)·exp(−M) = 1 for random 4×4 matrices scaled to ‖M‖₁ = 1.
        #[test]
        fn exp_inverse_identity(seed in proptest::array::uniform32(-1.0_f64..1.0)) {
            let mut m = Array2::zeros((4, 4));
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] = c(seed[2 * (4 * i + j)], seed[2 * (4 * i + j) + 1]);
                }
            }
            let norm = one_norm(&m);
            prop_assume!(norm > 1e-3);
            let m = m.mapv(|z| z / norm);
            let e = matrix_exp(&m).unwrap();
            let einv = matrix_exp(&m.mapv(|z| -z)).unwrap();
            let prod = e.dot(&einv);
            for i in 0..4 {
                for j in 0..4 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((prod[(i, j)] - c(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}
