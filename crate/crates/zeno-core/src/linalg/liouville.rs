//! Liouvillian generators, superoperator matrices and propagation.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};

use super::{
    check_square, dagger, frobenius_norm, hermiticity_deviation, kron, matrix_exp, max_abs, trace,
    unvec_col, vec_col, DensityMatrix, DIM_CAP, HERMITICITY_TOL,
};

/// A linear map on dim×dim matrices, abstract enough to cover both the dense
/// Liouvillian here and structured generators elsewhere. `norm_bound` must
/// return an upper bound on the induced norm (any overestimate is safe, it
/// only controls substep counts in [`expm_action`]).
pub trait MatrixMap {
    fn dim(&self) -> usize;
    fn apply_to(&self, m: &Array2<Complex64>) -> Array2<Complex64>;
    fn norm_bound(&self) -> f64;
}

/// Lindblad-form generator: L(ρ) = −i[H, ρ] + Σ_k (A_k ρ A_k† − ½{A_k†A_k, ρ}).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hamiltonian: Array2<Complex64>,
    collapse_ops: Vec<Array2<Complex64>>,
    // Precomputed A†A per collapse operator.
    ada: Vec<Array2<Complex64>>,
    norm_bound: f64,
}

/// Validate inputs and build the generator.
pub fn build_liouvillian(
    hamiltonian: Array2<Complex64>,
    collapse_ops: Vec<Array2<Complex64>>,
) -> Result<Liouvillian> {
    let dim = check_square(&hamiltonian, "Hamiltonian")?;
    if dim > DIM_CAP {
        return Err(ZenoError::Config(format!(
            "Hamiltonian dimension {dim} exceeds cap {DIM_CAP}"
        )));
    }
    let dev = hermiticity_deviation(&hamiltonian);
    if dev > HERMITICITY_TOL * (1.0 + max_abs(&hamiltonian)) {
        return Err(ZenoError::Validation(format!(
            "Hamiltonian is not Hermitian (deviation {dev:.3e})"
        )));
    }
    for (k, a) in collapse_ops.iter().enumerate() {
        let d = check_square(a, "collapse operator")?;
        if d != dim {
            return Err(ZenoError::Config(format!(
                "collapse operator {k} is {d}×{d}, expected {dim}×{dim}"
            )));
        }
    }
    let ada: Vec<_> = collapse_ops.iter().map(|a| dagger(a).dot(a)).collect();
    let norm_bound = 2.0 * frobenius_norm(&hamiltonian)
        + collapse_ops
            .iter()
            .map(|a| 2.0 * frobenius_norm(a).powi(2))
            .sum::<f64>();
    Ok(Liouvillian {
        hamiltonian,
        collapse_ops,
        ada,
        norm_bound,
    })
}

impl Liouvillian {
    pub fn hamiltonian(&self) -> &Array2<Complex64> {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[Array2<Complex64>] {
        &self.collapse_ops
    }

    /// Explicit dim²×dim² superoperator matrix in column-stacking convention.
    pub fn superoperator_matrix(&self) -> Array2<Complex64> {
        pair_generator_superop(&self.hamiltonian, &self.hamiltonian, &self.collapse_ops)
    }
}

impl MatrixMap for Liouvillian {
    fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn apply_to(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let h_rho = self.hamiltonian.dot(rho);
        let rho_h = rho.dot(&self.hamiltonian);
        let mut out = (h_rho - rho_h).mapv(|z| -i * z);
        let half = Complex64::new(0.5, 0.0);
        for (a, ada) in self.collapse_ops.iter().zip(&self.ada) {
            let a_rho_ad = a.dot(rho).dot(&dagger(a));
            let ada_rho = ada.dot(rho);
            let rho_ada = rho.dot(ada);
            out = out + a_rho_ad - (ada_rho + rho_ada).mapv(|z| half * z);
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

/// Superoperator matrix of the block generator
/// K(X) = −i(h_left X − X h_right) + Σ_k (A_k X A_k† − ½{A_k†A_k, X})
/// in column-stacking convention. With h_left = h_right this is the
/// ordinary Lindblad superoperator; with different conditioning
/// Hamiltonians it generates the off-diagonal measurement kernels.
pub fn pair_generator_superop(
    h_left: &Array2<Complex64>,
    h_right: &Array2<Complex64>,
    collapse_ops: &[Array2<Complex64>],
) -> Array2<Complex64> {
    let dim = h_left.nrows();
    let eye: Array2<Complex64> = Array2::eye(dim);
    let i = Complex64::new(0.0, 1.0);
    let mut sup = (kron(&eye, h_left) - kron(&h_right.t().to_owned(), &eye)).mapv(|z| -i * z);
    let half = Complex64::new(0.5, 0.0);
    for a in collapse_ops {
        let ada = dagger(a).dot(a);
        sup = sup + kron(&a.mapv(|z| z.conj()), a)
            - (kron(&eye, &ada) + kron(&ada.t().to_owned(), &eye)).mapv(|z| half * z);
    }
    sup
}

/// A superoperator frozen as an explicit dim²×dim² matrix.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    superoperator: Array2<Complex64>,
}

impl Propagator {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            superoperator: Array2::eye(dim * dim),
        }
    }

    /// exp(L·t) as an explicit matrix. Checks that the result preserves
    /// trace and Hermiticity, as any Lindblad exponential must.
    pub fn from_liouvillian(l: &Liouvillian, t: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(ZenoError::Validation(format!(
                "propagation time must be nonnegative, got {t}"
            )));
        }
        let sup = l.superoperator_matrix().mapv(|z| z * t);
        let p = Self {
            dim: l.dim(),
            superoperator: matrix_exp(&sup)?,
        };
        p.check_trace_preserving()?;
        Ok(p)
    }

    /// exp(K·t) for an arbitrary block generator. No trace-preservation is
    /// implied; off-diagonal measurement kernels genuinely lose trace.
    pub fn from_generator(generator: &Array2<Complex64>, dim: usize, t: f64) -> Result<Self> {
        let n = check_square(generator, "generator superoperator")?;
        if n != dim * dim {
            return Err(ZenoError::Config(format!(
                "generator is {n}×{n}, expected {}×{} for dimension {dim}",
                dim * dim,
                dim * dim
            )));
        }
        if t < 0.0 {
            return Err(ZenoError::Validation(format!(
                "propagation time must be nonnegative, got {t}"
            )));
        }
        Ok(Self {
            dim,
            superoperator: matrix_exp(&generator.mapv(|z| z * t))?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &Array2<Complex64> {
        &self.superoperator
    }

    /// Apply to a matrix (not required to be a density matrix).
    pub fn apply(&self, m: &Array2<Complex64>) -> Array2<Complex64> {
        let v = vec_col(m);
        let n = self.dim * self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += self.superoperator[(r, k)] * v[k];
            }
            *o = acc;
        }
        unvec_col(&out, self.dim)
    }

    fn check_trace_preserving(&self) -> Result<()> {
        // Trace functional must be a left fixed point: Σ_i S[(i,i),(k,l)] = δ_kl.
        let d = self.dim;
        let mut worst = 0.0_f64;
        for k in 0..d {
            for l in 0..d {
                let col = l * d + k;
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    acc += self.superoperator[(i * d + i, col)];
                }
                let want = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((acc - Complex64::new(want, 0.0)).norm());
            }
        }
        if worst > 1e-10 {
            return Err(ZenoError::Numerics(format!(
                "propagator is not trace-preserving (deviation {worst:.3e})"
            )));
        }
        Ok(())
    }
}

/// Composition: the action of the result equals applying `second` first and
/// `first` after, matching operator-product order first∘second.
pub fn compose(first: &Propagator, second: &Propagator) -> Result<Propagator> {
    if first.dim != second.dim {
        return Err(ZenoError::Config(format!(
            "cannot compose propagators of dimensions {} and {}",
            first.dim, second.dim
        )));
    }
    Ok(Propagator {
        dim: first.dim,
        superoperator: first.superoperator.dot(&second.superoperator),
    })
}

/// exp(generator·t) applied to a matrix without forming the dim²×dim²
/// exponential: scaled Taylor series of the action, converged to machine
/// precision per substep.
pub fn expm_action<G: MatrixMap + ?Sized>(
    generator: &G,
    m: &Array2<Complex64>,
    t: f64,
) -> Result<Array2<Complex64>> {
    if t < 0.0 {
        return Err(ZenoError::Validation(format!(
            "propagation time must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(m.clone());
    }
    let eta = generator.norm_bound() * t;
    // Keep ‖L·Δt‖ ≲ 3 so the Taylor series of each substep converges fast
    // and without destructive cancellation.
    let substeps = (eta / 3.0).ceil().max(1.0) as usize;
    let dt = Complex64::new(t / substeps as f64, 0.0);

    const MAX_TERMS: usize = 80;
    let mut state = m.clone();
    for _ in 0..substeps {
        let mut acc = state.clone();
        let mut term = state;
        let mut small_streak = 0;
        let mut converged = false;
        for k in 1..=MAX_TERMS {
            term = generator
                .apply_to(&term)
                .mapv(|z| z * dt / Complex64::new(k as f64, 0.0));
            acc = acc + &term;
            let tnorm = max_abs(&term);
            let anorm = max_abs(&acc).max(f64::MIN_POSITIVE);
            if tnorm <= 1e-16 * anorm {
                small_streak += 1;
                if small_streak >= 2 {
                    converged = true;
                    break;
                }
            } else {
                small_streak = 0;
            }
        }
        if !converged {
            return Err(ZenoError::Numerics(
                "matrix exponential action did not converge".into(),
            ));
        }
        state = acc;
    }
    Ok(state)
}

/// Propagate a raw matrix: returns exp(L t)·m. Accepts any matrix so
/// linearity can be exercised on non-states.
pub fn propagate_matrix(
    l: &Liouvillian,
    m: &Array2<Complex64>,
    t: f64,
) -> Result<Array2<Complex64>> {
    if m.nrows() != l.dim() || m.ncols() != l.dim() {
        return Err(ZenoError::Config(format!(
            "state is {}×{}, generator dimension is {}",
            m.nrows(),
            m.ncols(),
            l.dim()
        )));
    }
    expm_action(l, m, t)
}

/// Propagate a density matrix: ρ(t) = exp(L t)·ρ. The result is validated,
/// so trace and positivity drift beyond tolerance surface as errors.
pub fn propagate(l: &Liouvillian, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let out = propagate_matrix(l, rho.matrix(), t)?;
    let tr = trace(&out);
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(ZenoError::Numerics(format!("propagation lost trace: {tr}")));
    }
    // Symmetrize away the last-ulp Hermiticity drift before validating.
    let sym = symmetrize(&out);
    DensityMatrix::new(sym)
}

fn symmetrize(m: &Array2<Complex64>) -> Array2<Complex64> {
    let n = m.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)].conj());
        }
    }
    out
}
