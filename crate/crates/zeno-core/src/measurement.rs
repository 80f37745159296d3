//! Concrete non-demolition measurement kernels.
//!
//! A measurement is described by a family of superoperators acting on the
//! detector state, one per ordered pair of system levels it dresses. The
//! diagonal blocks are trace-preserving; the trace of an off-diagonal block
//! applied to the initial detector state is the decoherence function F,
//! the factor multiplying system coherences after the measurement.
//!
//! Three models ship:
//!
//! - **Projective**: trivial detector, F(t) = 1 inside the cycle, system
//!   coherences erased exactly at the cycle boundary. The idealized
//!   instantaneous-measurement limit without stiff dynamics.
//! - **Dephasing**: trivial detector, F(t) = exp(−Γ t) between different
//!   levels. The canonical continuous-measurement kernel.
//! - **ExplicitDetector**: a physical two-level detector starting in its
//!   ground state, driven conditioned on a designated measured level and
//!   relaxing at a tunable rate. Kernels are computed by propagating the
//!   pair-conditioned detector generator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};
use crate::linalg::{
    expm_action, max_abs, pair_generator_superop, trace, DensityMatrix, MatrixMap, Propagator,
};
use crate::system::{LevelPair, SystemSpec};

/// Relative slack on cycle-span checks, to absorb composite-grid rounding.
const SPAN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Projective,
    Dephasing,
    ExplicitDetector,
}

#[derive(Debug, Clone)]
enum ModelParams {
    Projective,
    Dephasing {
        gamma: f64,
    },
    ExplicitDetector {
        lambda: f64,
        relax_rate: f64,
        measured_level: usize,
    },
}

/// The action of one kernel block at a fixed time difference: either a plain
/// scalar factor (trivial detector) or a frozen detector superoperator.
#[derive(Debug, Clone)]
pub enum KernelAction {
    Scalar(Complex64),
    Matrix(Arc<Propagator>),
}

impl KernelAction {
    pub fn apply(&self, rho: &Array2<Complex64>) -> Array2<Complex64> {
        match self {
            KernelAction::Scalar(s) => rho.mapv(|z| z * s),
            KernelAction::Matrix(p) => p.apply(rho),
        }
    }

    pub fn trace_after(&self, rho: &Array2<Complex64>) -> Complex64 {
        match self {
            KernelAction::Scalar(s) => s * trace(rho),
            KernelAction::Matrix(p) => trace(&p.apply(rho)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum KernelKey {
    Pair {
        left_measured: bool,
        right_measured: bool,
        dt_bits: u64,
    },
    Free {
        t_bits: u64,
    },
}

/// A measurement model: detector initial state plus the kernel family.
/// Immutable after construction; evaluation is pure. The propagator cache is
/// internally synchronized, so sharing across threads is safe.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    kind: ModelKind,
    detector_dim: usize,
    rho_d0: DensityMatrix,
    tau: f64,
    params: ModelParams,
    interchange_valid: bool,
    cache: Arc<Mutex<HashMap<KernelKey, Arc<Propagator>>>>,
}

/// Ideal instantaneous measurement repeated every `tau`: trivial detector,
/// F(t) = 1 inside the cycle, coherence erased at the cycle boundary.
pub fn make_projective(tau: f64) -> Result<MeasurementModel> {
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "measurement duration must be positive, got {tau}"
        )));
    }
    Ok(MeasurementModel {
        kind: ModelKind::Projective,
        detector_dim: 1,
        rho_d0: DensityMatrix::pure(1, 0).expect("1x1 state"),
        tau,
        params: ModelParams::Projective,
        interchange_valid: true,
        cache: Arc::new(Mutex::new(HashMap::new())),
    })
}

/// Continuous measurement with exponential suppression of level coherences:
/// F(t) = exp(−Γ t) for pairs with different level index, 1 otherwise.
/// `gamma = 0` yields the trivial (do-nothing) kernel.
pub fn make_dephasing(gamma: f64, tau: f64) -> Result<MeasurementModel> {
    if gamma < 0.0 {
        return Err(ZenoError::Validation(format!(
            "dephasing rate must be nonnegative, got {gamma}"
        )));
    }
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "measurement duration must be positive, got {tau}"
        )));
    }
    Ok(MeasurementModel {
        kind: ModelKind::Dephasing,
        detector_dim: 1,
        rho_d0: DensityMatrix::pure(1, 0).expect("1x1 state"),
        tau,
        params: ModelParams::Dephasing { gamma },
        interchange_valid: true,
        cache: Arc::new(Mutex::new(HashMap::new())),
    })
}

/// Physical two-level detector, ground-state initialized. While the system
/// occupies `measured_level` the detector is driven at Rabi rate `lambda`;
/// it relaxes back at `relax_rate`. Kernels come from propagating the
/// pair-conditioned generator, so they are genuinely non-commuting once
/// `relax_rate > 0`.
pub fn make_two_level_detector(
    sys: &SystemSpec,
    lambda: f64,
    relax_rate: f64,
    tau: f64,
    measured_level: &str,
) -> Result<MeasurementModel> {
    if lambda < 0.0 {
        return Err(ZenoError::Validation(format!(
            "detector coupling must be nonnegative, got {lambda}"
        )));
    }
    if relax_rate < 0.0 {
        return Err(ZenoError::Validation(format!(
            "detector relaxation rate must be nonnegative, got {relax_rate}"
        )));
    }
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "measurement duration must be positive, got {tau}"
        )));
    }
    let measured = sys.level_index(measured_level)?;

    // The interchange of a pair kernel with the diagonal kernel under the
    // trace holds exactly when the conditioned generators commute. Without
    // relaxation every generator is a combination of left/right
    // multiplications by the same drive operator, which all commute; the
    // dissipator breaks that.
    let model = MeasurementModel {
        kind: ModelKind::ExplicitDetector,
        detector_dim: 2,
        rho_d0: DensityMatrix::pure(2, 0).expect("ground state"),
        tau,
        params: ModelParams::ExplicitDetector {
            lambda,
            relax_rate,
            measured_level: measured,
        },
        interchange_valid: false,
        cache: Arc::new(Mutex::new(HashMap::new())),
    };
    let interchange_valid = model.check_generator_commutation();
    Ok(MeasurementModel {
        interchange_valid,
        ..model
    })
}

impl MeasurementModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn detector_dim(&self) -> usize {
        self.detector_dim
    }

    pub fn rho_d0(&self) -> &DensityMatrix {
        &self.rho_d0
    }

    /// Measurement duration (kernel arguments must stay within one cycle).
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Whether system coherences are erased exactly at the cycle boundary
    /// (true only for the projective model).
    pub fn erases_at_cycle_boundary(&self) -> bool {
        self.kind == ModelKind::Projective
    }

    /// Whether the kernel order under the trace may be interchanged, the
    /// prerequisite for the broadening-profile reduction.
    pub fn interchange_valid(&self) -> bool {
        self.interchange_valid
    }

    /// −Re F′(0) for a pair: the initial decay rate of the decoherence
    /// function, used for analytic quadrature tail corrections.
    pub fn decoherence_decay_rate(&self, pair: &LevelPair) -> f64 {
        if pair.is_level_diagonal() {
            return 0.0;
        }
        match &self.params {
            ModelParams::Projective => 0.0,
            ModelParams::Dephasing { gamma } => *gamma,
            ModelParams::ExplicitDetector { .. } => {
                let gen = self.pair_generator(pair.bra.level, pair.ket.level);
                let dim = self.detector_dim;
                let v = crate::linalg::vec_col(self.rho_d0.matrix());
                let mut rate = Complex64::new(0.0, 0.0);
                for i in 0..dim {
                    for k in 0..dim * dim {
                        rate += gen[(i * dim + i, k)] * v[k];
                    }
                }
                -rate.re
            }
        }
    }

    /// Oscillation rate the kernel imprints on a pair's decoherence
    /// function (the conditioned drive frequency); zero for scalar kernels.
    /// Frequency integrals widen their windows by this scale.
    pub fn kernel_drive_rate(&self, pair: &LevelPair) -> f64 {
        match &self.params {
            ModelParams::ExplicitDetector {
                lambda,
                measured_level,
                ..
            } if pair.bra.level == *measured_level || pair.ket.level == *measured_level => *lambda,
            _ => 0.0,
        }
    }

    /// (coupling, relaxation rate, measured level) of an explicit-detector
    /// model; the oracle re-embeds them in the compound generator.
    pub(crate) fn explicit_detector_params(&self) -> Option<(f64, f64, usize)> {
        match &self.params {
            ModelParams::ExplicitDetector {
                lambda,
                relax_rate,
                measured_level,
            } => Some((*lambda, *relax_rate, *measured_level)),
            _ => None,
        }
    }

    fn check_span(&self, t1: f64, t2: f64) -> Result<()> {
        if t2 < 0.0 || t1 < t2 {
            return Err(ZenoError::Validation(format!(
                "kernel times must satisfy 0 ≤ t2 ≤ t1, got t1={t1}, t2={t2}"
            )));
        }
        if t1 > self.tau * (1.0 + SPAN_SLACK) {
            return Err(ZenoError::Validation(format!(
                "kernel time {t1} exceeds the measurement cycle span {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Conditioned detector Hamiltonian for a given system level.
    fn conditioned_hamiltonian(&self, level: usize) -> Array2<Complex64> {
        let mut h = Array2::zeros((self.detector_dim, self.detector_dim));
        if let ModelParams::ExplicitDetector {
            lambda,
            measured_level,
            ..
        } = &self.params
        {
            if level == *measured_level {
                h[(0, 1)] = Complex64::new(*lambda, 0.0);
                h[(1, 0)] = Complex64::new(*lambda, 0.0);
            }
        }
        h
    }

    fn detector_collapse_ops(&self) -> Vec<Array2<Complex64>> {
        match &self.params {
            ModelParams::ExplicitDetector { relax_rate, .. } if *relax_rate > 0.0 => {
                let mut sm = Array2::zeros((2, 2));
                sm[(0, 1)] = Complex64::new(relax_rate.sqrt(), 0.0);
                vec![sm]
            }
            _ => vec![],
        }
    }

    /// Superoperator matrix of the pair-conditioned detector generator.
    fn pair_generator(&self, left_level: usize, right_level: usize) -> Array2<Complex64> {
        pair_generator_superop(
            &self.conditioned_hamiltonian(left_level),
            &self.conditioned_hamiltonian(right_level),
            &self.detector_collapse_ops(),
        )
    }

    fn check_generator_commutation(&self) -> bool {
        let ModelParams::ExplicitDetector { measured_level, .. } = &self.params else {
            return true;
        };
        let m = *measured_level;
        let other = m + 1; // any non-measured level id behaves identically
        let gens = [
            self.pair_generator(m, m),
            self.pair_generator(m, other),
            self.pair_generator(other, m),
            self.pair_generator(other, other),
        ];
        let scale = gens.iter().map(max_abs).fold(1.0_f64, f64::max);
        for a in &gens {
            for b in &gens {
                let comm = a.dot(b) - b.dot(a);
                if max_abs(&comm) > 1e-10 * scale * scale.max(1.0) {
                    return false;
                }
            }
        }
        true
    }

    /// Kernel block for the level pair (left, right) at time difference `dt`,
    /// as a reusable action. Pair kernels never depend on the channel index.
    pub(crate) fn kernel_action(
        &self,
        left_level: usize,
        right_level: usize,
        dt: f64,
    ) -> Result<KernelAction> {
        match &self.params {
            ModelParams::Projective => Ok(KernelAction::Scalar(Complex64::new(1.0, 0.0))),
            ModelParams::Dephasing { gamma } => {
                let rate = if left_level == right_level {
                    0.0
                } else {
                    *gamma
                };
                Ok(KernelAction::Scalar(Complex64::new(
                    (-rate * dt).exp(),
                    0.0,
                )))
            }
            ModelParams::ExplicitDetector { measured_level, .. } => {
                let key = KernelKey::Pair {
                    left_measured: left_level == *measured_level,
                    right_measured: right_level == *measured_level,
                    dt_bits: dt.to_bits(),
                };
                if let Some(p) = self.cache.lock().unwrap().get(&key) {
                    return Ok(KernelAction::Matrix(Arc::clone(p)));
                }
                let gen = self.pair_generator(left_level, right_level);
                let p = Arc::new(Propagator::from_generator(&gen, self.detector_dim, dt)?);
                self.cache
                    .lock()
                    .unwrap()
                    .entry(key)
                    .or_insert_with(|| Arc::clone(&p));
                Ok(KernelAction::Matrix(p))
            }
        }
    }

    /// Detector evolution during measurement-free segments: its own
    /// relaxation only, identical for every level pair.
    pub(crate) fn free_action(&self, t: f64) -> Result<KernelAction> {
        if t < 0.0 {
            return Err(ZenoError::Validation(format!(
                "free-evolution duration must be nonnegative, got {t}"
            )));
        }
        match &self.params {
            ModelParams::Projective | ModelParams::Dephasing { .. } => {
                Ok(KernelAction::Scalar(Complex64::new(1.0, 0.0)))
            }
            ModelParams::ExplicitDetector { .. } => {
                let key = KernelKey::Free {
                    t_bits: t.to_bits(),
                };
                if let Some(p) = self.cache.lock().unwrap().get(&key) {
                    return Ok(KernelAction::Matrix(Arc::clone(p)));
                }
                let zero = Array2::zeros((2, 2));
                let gen = pair_generator_superop(&zero, &zero, &self.detector_collapse_ops());
                let p = Arc::new(Propagator::from_generator(&gen, self.detector_dim, t)?);
                self.cache
                    .lock()
                    .unwrap()
                    .entry(key)
                    .or_insert_with(|| Arc::clone(&p));
                Ok(KernelAction::Matrix(p))
            }
        }
    }

    /// Apply the kernel block S⁰_pair(t1, t2) to a detector matrix. Linear in
    /// the input; depends on t1 − t2 only (all shipped generators are
    /// time-independent within a cycle).
    pub fn kernel_apply(
        &self,
        pair: &LevelPair,
        t1: f64,
        t2: f64,
        rho_d: &Array2<Complex64>,
    ) -> Result<Array2<Complex64>> {
        self.check_span(t1, t2)?;
        if rho_d.nrows() != self.detector_dim || rho_d.ncols() != self.detector_dim {
            return Err(ZenoError::Config(format!(
                "detector state is {}×{}, expected {}×{}",
                rho_d.nrows(),
                rho_d.ncols(),
                self.detector_dim,
                self.detector_dim
            )));
        }
        let action = self.kernel_action(pair.bra.level, pair.ket.level, t1 - t2)?;
        Ok(action.apply(rho_d))
    }

    /// Decoherence function F_pair(t) = Tr{S⁰_pair(t, 0) ρ_D(0)}.
    pub fn decoherence_function(&self, pair: &LevelPair, t: f64) -> Result<Complex64> {
        if t < 0.0 {
            return Err(ZenoError::Validation(format!(
                "decoherence function time must be nonnegative, got {t}"
            )));
        }
        let out = self.kernel_apply(pair, t, 0.0, self.rho_d0.matrix())?;
        Ok(trace(&out))
    }
}

/// Free-function form of [`MeasurementModel::kernel_apply`].
pub fn kernel_apply(
    model: &MeasurementModel,
    pair: &LevelPair,
    t1: f64,
    t2: f64,
    rho_d: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    model.kernel_apply(pair, t1, t2, rho_d)
}

/// Free-function form of [`MeasurementModel::decoherence_function`].
pub fn decoherence_function(
    model: &MeasurementModel,
    pair: &LevelPair,
    t: f64,
) -> Result<Complex64> {
    model.decoherence_function(pair, t)
}

/// Direct propagation route to the same kernel: exp-action of the
/// pair-conditioned generator on the detector state, bypassing the frozen
/// propagator cache. Used to cross-validate the kernel path.
pub fn kernel_apply_direct(
    model: &MeasurementModel,
    pair: &LevelPair,
    dt: f64,
    rho_d: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    struct Gen {
        sup: Array2<Complex64>,
        dim: usize,
    }
    impl MatrixMap for Gen {
        fn dim(&self) -> usize {
            self.dim
        }
        fn apply_to(&self, m: &Array2<Complex64>) -> Array2<Complex64> {
            let v = crate::linalg::vec_col(m);
            let n = self.dim * self.dim;
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.sup[(r, k)] * v[k];
                }
                *o = acc;
            }
            crate::linalg::unvec_col(&out, self.dim)
        }
        fn norm_bound(&self) -> f64 {
            crate::linalg::one_norm(&self.sup)
        }
    }
    match model.params {
        ModelParams::ExplicitDetector { .. } => {
            let gen = Gen {
                sup: model.pair_generator(pair.bra.level, pair.ket.level),
                dim: model.detector_dim,
            };
            expm_action(&gen, rho_d, dt)
        }
        _ => model.kernel_apply(pair, dt, 0.0, rho_d),
    }
}
