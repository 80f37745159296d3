//! Second-order jump probability during a measurement, its pulsed
//! free/measurement/interference decomposition, decay rates and survival.
//!
//! The central object is a double time integral over the ordered triangle
//! 0 ≤ t₂ ≤ t₁ ≤ τ of two mutually conjugate terms: transition matrix
//! elements times a phase at the transition frequency, dressed by the
//! measurement kernel between the two interaction times and by the diagonal
//! kernel before the first one. Pulsed cycles use the same integral with a
//! composite kernel that switches from free evolution to measurement at the
//! segment boundary; the boundary is always a quadrature mesh point.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, ZenoError};
use crate::measurement::MeasurementModel;
use crate::quad::{allocate_panels, build_panels, gauss_legendre, Panel};
use crate::system::{MeasurementSchedule, StateLabel, SystemSpec, TransitionOperator};

/// Gauss–Legendre order per time panel.
const TIME_ORDER: usize = 4;
/// Richardson divisor for the half-grid error estimate: the composite rule
/// converges at order 2·TIME_ORDER, so the fine-grid error is the observed
/// half-grid difference over 2^(2·TIME_ORDER) − 1.
const RICHARDSON_DIVISOR: f64 = 255.0;
/// Default number of panels across a cycle.
pub const DEFAULT_PANELS: usize = 128;
/// Relative convergence target for the Richardson half-grid check.
const QUAD_REL_TOL: f64 = 1e-8;
/// Imaginary-residue bound on any computed probability.
const REALNESS_TOL: f64 = 1e-10;

/// Time-quadrature settings. `panels` is the total panel budget across one
/// cycle (the CLI exposes it as `--grid`).
#[derive(Debug, Clone, Copy)]
pub struct QuadSpec {
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            panels: DEFAULT_PANELS,
        }
    }
}

impl QuadSpec {
    pub fn with_panels(panels: usize) -> Self {
        Self { panels }
    }

    fn validated(&self) -> Result<usize> {
        if self.panels < 2 {
            return Err(ZenoError::Validation(
                "time quadrature needs at least 2 panels".into(),
            ));
        }
        Ok(self.panels)
    }
}

/// Jump probability of one (initial → final) pair over one pulsed cycle,
/// split into measurement, free and interference parts, with the per-pair
/// rate and survival after the scheduled repetitions.
#[derive(Debug, Clone, Copy)]
pub struct JumpResult {
    pub w_total: f64,
    pub w_m: f64,
    pub w_f: f64,
    pub w_i: f64,
    /// w_total / τ, angular frequency.
    pub rate: f64,
    /// exp(−rate · n_repeats · τ), clamped to [0, 1].
    pub survival: f64,
}

/// Composite-kernel integrand for one (i, f) pair: everything inside the
/// double integral except the quadrature weights.
struct PairIntegrand<'a> {
    model: &'a MeasurementModel,
    i_level: usize,
    f_level: usize,
    /// ω of the f ← i transition (final energy minus initial energy).
    omega: f64,
    /// |V_{iα,fα′}|².
    pref: f64,
    v: &'a TransitionOperator,
    /// Free-evolution duration; 0 for a continuous measurement.
    tau_f: f64,
    /// Cache of S⁰_ii(t₂,0)·ρ_D(0), keyed by t₂ bits.
    inner_cache: HashMap<u64, Array2<Complex64>>,
}

impl<'a> PairIntegrand<'a> {
    fn new(
        sys: &SystemSpec,
        v: &'a TransitionOperator,
        model: &'a MeasurementModel,
        initial: StateLabel,
        final_: StateLabel,
        tau_f: f64,
    ) -> Result<Self> {
        if initial.level == final_.level {
            return Err(ZenoError::Validation(
                "jump probability requires different initial and final levels".into(),
            ));
        }
        sys.state(initial.level, initial.channel)?;
        sys.state(final_.level, final_.channel)?;
        let amp = v.element(initial, final_);
        Ok(Self {
            model,
            i_level: initial.level,
            f_level: final_.level,
            omega: sys.omega(final_, initial),
            pref: amp.norm_sqr(),
            v,
            tau_f,
            inner_cache: HashMap::new(),
        })
    }

    /// S⁰_ii(t₂, 0) ρ_D(0) under the composite kernel.
    fn inner_state(&mut self, t2: f64) -> Result<Array2<Complex64>> {
        if let Some(m) = self.inner_cache.get(&t2.to_bits()) {
            return Ok(m.clone());
        }
        let rho0 = self.model.rho_d0().matrix();
        let state = if t2 <= self.tau_f {
            self.model.free_action(t2)?.apply(rho0)
        } else {
            let after_free = self.model.free_action(self.tau_f)?.apply(rho0);
            self.model
                .kernel_action(self.i_level, self.i_level, t2 - self.tau_f)?
                .apply(&after_free)
        };
        self.inner_cache.insert(t2.to_bits(), state.clone());
        Ok(state)
    }

    /// Traces of the two kernel orderings applied after the inner state.
    fn pair_traces(&mut self, t1: f64, t2: f64) -> Result<(Complex64, Complex64)> {
        let inner = self.inner_state(t2)?;
        if t1 <= self.tau_f {
            // Both times in the free window: pair-independent kernel.
            let tr = self.model.free_action(t1 - t2)?.trace_after(&inner);
            Ok((tr, tr))
        } else if t2 >= self.tau_f {
            let dt = t1 - t2;
            let c_if = self
                .model
                .kernel_action(self.i_level, self.f_level, dt)?
                .trace_after(&inner);
            let c_fi = self
                .model
                .kernel_action(self.f_level, self.i_level, dt)?
                .trace_after(&inner);
            Ok((c_if, c_fi))
        } else {
            // Straddling the boundary: free evolution up to τ_F, then the
            // measurement kernel for the remainder.
            let mid = self.model.free_action(self.tau_f - t2)?.apply(&inner);
            let dt = t1 - self.tau_f;
            let c_if = self
                .model
                .kernel_action(self.i_level, self.f_level, dt)?
                .trace_after(&mid);
            let c_fi = self
                .model
                .kernel_action(self.f_level, self.i_level, dt)?
                .trace_after(&mid);
            Ok((c_if, c_fi))
        }
    }

    /// Full integrand at (t₁, t₂), t₂ ≤ t₁.
    fn eval(&mut self, t1: f64, t2: f64) -> Result<Complex64> {
        let (c_if, c_fi) = self.pair_traces(t1, t2)?;
        let phase = Complex64::from_polar(1.0, self.omega * (t1 - t2));
        let envelope = self.v.envelope_at(t1) * self.v.envelope_at(t2);
        Ok(Complex64::new(self.pref * envelope, 0.0) * (phase * c_if + phase.conj() * c_fi))
    }

    /// Interference-region integrand: t₂ in the free window, t₁ in the
    /// measurement window; the kernel sees only t₁ − τ_F while the phase
    /// keeps the full t₁ − t₂.
    fn eval_interference(&mut self, t1: f64, t2: f64) -> Result<Complex64> {
        let rho_f = self.inner_state_free_end()?;
        let dt_kernel = t1 - self.tau_f;
        let c_if = self
            .model
            .kernel_action(self.i_level, self.f_level, dt_kernel)?
            .trace_after(&rho_f);
        let c_fi = self
            .model
            .kernel_action(self.f_level, self.i_level, dt_kernel)?
            .trace_after(&rho_f);
        let phase = Complex64::from_polar(1.0, self.omega * (t1 - t2));
        let envelope = self.v.envelope_at(t1) * self.v.envelope_at(t2);
        Ok(Complex64::new(self.pref * envelope, 0.0) * (phase * c_if + phase.conj() * c_fi))
    }

    fn inner_state_free_end(&mut self) -> Result<Array2<Complex64>> {
        let key = (-1.0_f64).to_bits(); // sentinel: detector state at τ_F
        if let Some(m) = self.inner_cache.get(&key) {
            return Ok(m.clone());
        }
        let state = self
            .model
            .free_action(self.tau_f)?
            .apply(self.model.rho_d0().matrix());
        self.inner_cache.insert(key, state.clone());
        Ok(state)
    }

    /// Free-window integrand of the square-form free-evolution probability:
    /// no kernel factors at all (free evolution preserves the detector trace).
    fn eval_free_square(&self, t1: f64, t2: f64) -> Complex64 {
        let phase = Complex64::from_polar(1.0, self.omega * (t1 - t2));
        let envelope = self.v.envelope_at(t1) * self.v.envelope_at(t2);
        phase * Complex64::new(self.pref * envelope, 0.0)
    }
}

/// ∫∫ over the ordered triangle t₂ ≤ t₁ covered by `panels`; square cells are
/// tensor Gauss–Legendre, diagonal cells map the inner variable affinely.
fn triangle_integral(
    panels: &[Panel],
    mut f: impl FnMut(f64, f64) -> Result<Complex64>,
) -> Result<Complex64> {
    let (unit_nodes, unit_weights) = unit_gl();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, pa) in panels.iter().enumerate() {
        // Full square cells below the diagonal.
        for pb in panels.iter().take(a) {
            for (x1, w1) in pa.nodes.iter().zip(&pa.weights) {
                for (x2, w2) in pb.nodes.iter().zip(&pb.weights) {
                    acc += f(*x1, *x2)? * Complex64::new(w1 * w2, 0.0);
                }
            }
        }
        // Diagonal cell: t₂ = lo + (t₁ − lo)·u with u ∈ (0, 1).
        for (x1, w1) in pa.nodes.iter().zip(&pa.weights) {
            let span = x1 - pa.lo;
            for (u, wu) in unit_nodes.iter().zip(&unit_weights) {
                let t2 = pa.lo + span * u;
                acc += f(*x1, t2)? * Complex64::new(w1 * wu * span, 0.0);
            }
        }
    }
    Ok(acc)
}

/// Tensor-product integral over a rectangle of panel sets.
fn rectangle_integral(
    panels_t1: &[Panel],
    panels_t2: &[Panel],
    mut f: impl FnMut(f64, f64) -> Result<Complex64>,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for pa in panels_t1 {
        for pb in panels_t2 {
            for (x1, w1) in pa.nodes.iter().zip(&pa.weights) {
                for (x2, w2) in pb.nodes.iter().zip(&pb.weights) {
                    acc += f(*x1, *x2)? * Complex64::new(w1 * w2, 0.0);
                }
            }
        }
    }
    Ok(acc)
}

fn unit_gl() -> (Vec<f64>, Vec<f64>) {
    let (n, w) = gauss_legendre(TIME_ORDER);
    (
        n.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        w.iter().map(|x| 0.5 * x).collect(),
    )
}

fn real_part_checked(value: Complex64, what: &str) -> Result<f64> {
    let scale = value.re.abs().max(1.0);
    if value.im.abs() > REALNESS_TOL * scale {
        return Err(ZenoError::Numerics(format!(
            "{what} has imaginary residue {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Probability scale used as the absolute floor in convergence checks:
/// the resonant value |V|²·τ² of the bare double integral.
fn natural_scale(pref: f64, tau: f64) -> f64 {
    pref * tau * tau
}

/// Jump probability over a single continuous measurement of duration `tau`.
///
/// The initial and final states must differ in the level index. The result
/// is real within 1e-10 and may be negative only at the −1e-10 level.
pub fn jump_probability(
    sys: &SystemSpec,
    v: &TransitionOperator,
    model: &MeasurementModel,
    initial: StateLabel,
    final_: StateLabel,
    tau: f64,
    quad: &QuadSpec,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "measurement duration must be positive, got {tau}"
        )));
    }
    if tau > model.tau() * (1.0 + 1e-9) {
        return Err(ZenoError::Validation(format!(
            "integration span {tau} exceeds the model cycle span {}",
            model.tau()
        )));
    }
    let panels_budget = quad.validated()?;
    let mut ctx = PairIntegrand::new(sys, v, model, initial, final_, 0.0)?;
    if ctx.pref == 0.0 {
        return Ok(0.0);
    }

    let compute = |ctx: &mut PairIntegrand, m: usize| -> Result<Complex64> {
        let panels = build_panels(&[0.0, tau], &[m], TIME_ORDER);
        triangle_integral(&panels, |t1, t2| ctx.eval(t1, t2))
    };
    let full = compute(&mut ctx, panels_budget)?;
    let half = compute(&mut ctx, (panels_budget / 2).max(1))?;
    let w = real_part_checked(full, "jump probability")?;
    let err = (full - half).norm() / RICHARDSON_DIVISOR;
    let tol = QUAD_REL_TOL * w.abs() + 1e-13 * natural_scale(ctx.pref, tau);
    if err > tol {
        return Err(ZenoError::Numerics(format!(
            "jump-probability quadrature did not converge: achieved {err:.3e}, tolerance {tol:.3e}"
        )));
    }
    if w < -1e-10 {
        return Err(ZenoError::Numerics(format!(
            "jump probability is negative beyond tolerance: {w:.3e}"
        )));
    }
    Ok(w)
}

/// One first-order block of the perturbed state: the detector-valued
/// coefficient of |p α₁⟩⟨i α|. The full first-order state is the sum of
/// these blocks minus their Hermitian conjugates.
#[derive(Debug, Clone)]
pub struct FirstOrderBlock {
    pub state: StateLabel,
    pub detector_block: Array2<Complex64>,
    /// Trace of the detector block: the scalar coherence amplitude.
    pub amplitude: Complex64,
}

/// First-order contribution to the evolved state at time `t` of a continuous
/// measurement, resolved into (p α₁, i α) blocks. Exposed for validation.
pub fn first_order_state(
    sys: &SystemSpec,
    v: &TransitionOperator,
    model: &MeasurementModel,
    initial: StateLabel,
    t: f64,
    quad: &QuadSpec,
) -> Result<Vec<FirstOrderBlock>> {
    if t < 0.0 || t > model.tau() * (1.0 + 1e-9) {
        return Err(ZenoError::Validation(format!(
            "time {t} outside the measurement cycle [0, {}]",
            model.tau()
        )));
    }
    sys.state(initial.level, initial.channel)?;
    let panels_budget = quad.validated()?;
    let panels = build_panels(&[0.0, t], &[panels_budget], TIME_ORDER);
    let dim = model.detector_dim();
    let minus_i = Complex64::new(0.0, -1.0);

    let mut blocks = Vec::new();
    for (a, b, amp) in v.upper_entries() {
        // Keep the entry whose ket side is the initial state.
        let (p_state, amp_pi) = if b == initial {
            (a, amp)
        } else if a == initial {
            (b, amp.conj())
        } else {
            continue;
        };
        let omega = sys.omega(initial, p_state);
        let mut block: Array2<Complex64> = Array2::zeros((dim, dim));
        for panel in &panels {
            for (t2, w) in panel.nodes.iter().zip(&panel.weights) {
                let inner = model
                    .kernel_action(initial.level, initial.level, *t2)?
                    .apply(model.rho_d0().matrix());
                let dressed = model
                    .kernel_action(p_state.level, initial.level, t - t2)?
                    .apply(&inner);
                let phase = Complex64::from_polar(1.0, omega * (t - t2));
                let coeff = minus_i * amp_pi * phase * Complex64::new(v.envelope_at(*t2) * w, 0.0);
                block = block + dressed.mapv(|z| z * coeff);
            }
        }
        let amplitude = crate::linalg::trace(&block);
        blocks.push(FirstOrderBlock {
            state: p_state,
            detector_block: block,
            amplitude,
        });
    }
    Ok(blocks)
}

/// Population the first-order blocks contribute at a final state. Identically
/// zero whenever the final level differs from the initial one: every block is
/// a coherence against ⟨i α|.
pub fn first_order_jump_contribution(
    blocks: &[FirstOrderBlock],
    initial: StateLabel,
    final_: StateLabel,
) -> f64 {
    if final_ != initial {
        return 0.0;
    }
    blocks
        .iter()
        .filter(|b| b.state == final_)
        .map(|b| 2.0 * b.amplitude.re)
        .sum()
}

/// Pulsed cycle: free evolution for τ_F, measurement until τ. Returns the
/// three-term decomposition alongside the composite total.
pub fn pulsed_jump_probability(
    sys: &SystemSpec,
    v: &TransitionOperator,
    model: &MeasurementModel,
    schedule: &MeasurementSchedule,
    initial: StateLabel,
    final_: StateLabel,
    quad: &QuadSpec,
) -> Result<JumpResult> {
    let tau = schedule.tau;
    let tau_f = schedule.tau_f;
    if schedule.tau_m() > model.tau() * (1.0 + 1e-9) {
        return Err(ZenoError::Validation(format!(
            "measurement segment {} exceeds the model cycle span {}",
            schedule.tau_m(),
            model.tau()
        )));
    }
    let panels_budget = quad.validated()?;
    let mut ctx = PairIntegrand::new(sys, v, model, initial, final_, tau_f)?;
    if ctx.pref == 0.0 {
        return JumpResult::assemble(0.0, 0.0, 0.0, 0.0, schedule);
    }

    let compute = |ctx: &mut PairIntegrand,
                   budget: usize|
     -> Result<(Complex64, Complex64, Complex64, Complex64)> {
        let breaks = [0.0, tau_f, tau];
        let alloc = allocate_panels(&breaks, budget);
        let all_panels = build_panels(&breaks, &alloc, TIME_ORDER);
        let free_panels: Vec<Panel> = all_panels
            .iter()
            .filter(|p| p.hi <= tau_f + 1e-15 * tau)
            .cloned()
            .collect();
        let meas_panels: Vec<Panel> = all_panels
            .iter()
            .filter(|p| p.lo >= tau_f - 1e-15 * tau)
            .cloned()
            .collect();

        let composite = triangle_integral(&all_panels, |t1, t2| ctx.eval(t1, t2))?;
        let w_m = triangle_integral(&meas_panels, |t1, t2| ctx.eval(t1, t2))?;
        let w_f = rectangle_integral(&free_panels, &free_panels, |t1, t2| {
            Ok(ctx.eval_free_square(t1, t2))
        })?;
        let w_i = rectangle_integral(&meas_panels, &free_panels, |t1, t2| {
            ctx.eval_interference(t1, t2)
        })?;
        Ok((composite, w_m, w_f, w_i))
    };

    let (composite, w_m, w_f, w_i) = compute(&mut ctx, panels_budget)?;
    let (composite_half, ..) = compute(&mut ctx, (panels_budget / 2).max(2))?;

    let w_total = real_part_checked(composite, "composite jump probability")?;
    let err = (composite - composite_half).norm() / RICHARDSON_DIVISOR;
    let tol = QUAD_REL_TOL * w_total.abs() + 1e-13 * natural_scale(ctx.pref, tau);
    if err > tol {
        return Err(ZenoError::Numerics(format!(
            "pulsed-jump quadrature did not converge: achieved {err:.3e}, tolerance {tol:.3e}"
        )));
    }
    JumpResult::assemble(
        w_total,
        real_part_checked(w_m, "measurement term")?,
        real_part_checked(w_f, "free-evolution term")?,
        real_part_checked(w_i, "interference term")?,
        schedule,
    )
}

impl JumpResult {
    fn assemble(
        w_total: f64,
        w_m: f64,
        w_f: f64,
        w_i: f64,
        schedule: &MeasurementSchedule,
    ) -> Result<Self> {
        let residue = (w_total - (w_m + w_f + w_i)).abs();
        if residue > 1e-10 {
            return Err(ZenoError::Numerics(format!(
                "pulsed decomposition identity violated by {residue:.3e}"
            )));
        }
        let rate = (w_total / schedule.tau).max(0.0);
        Ok(Self {
            w_total,
            w_m,
            w_f,
            w_i,
            rate,
            survival: survival(rate, schedule),
        })
    }
}

/// Total decay rate from per-final-channel jump probabilities: R = Σ W / τ.
pub fn decay_rate(per_channel: &[f64], tau: f64) -> Result<f64> {
    if per_channel.is_empty() {
        return Err(ZenoError::Validation(
            "decay rate needs at least one channel probability".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "cycle duration must be positive, got {tau}"
        )));
    }
    if let Some(w) = per_channel.iter().find(|w| **w < 0.0) {
        return Err(ZenoError::Validation(format!(
            "negative jump probability {w} passed to decay_rate"
        )));
    }
    let total: f64 = per_channel.iter().sum();
    if total > 0.1 {
        log::warn!(
            "per-cycle jump probability {total:.3} exceeds 0.1; the perturbative treatment may be outside its validity range"
        );
    }
    Ok(total / tau)
}

/// Survival probability after the scheduled repetitions: exp(−R·N·τ),
/// clamped to [0, 1].
pub fn survival(rate: f64, schedule: &MeasurementSchedule) -> f64 {
    debug_assert!(rate >= 0.0, "survival expects a nonnegative rate");
    let x = (-rate * schedule.n_repeats as f64 * schedule.tau).exp();
    x.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{make_dephasing, make_projective, make_two_level_detector};
    use crate::system::{Channel, Envelope, Level};
    use approx::assert_relative_eq;

    fn sys_with_detuning(omega: f64) -> SystemSpec {
        SystemSpec::new(
            vec![
                Level {
                    label: "g".into(),
                    energy: 0.0,
                },
                Level {
                    label: "e".into(),
                    energy: 5.0,
                },
            ],
            vec![
                Channel {
                    label: "vac".into(),
                    energy: 0.0,
                },
                Channel {
                    label: "m".into(),
                    energy: 5.0 + omega,
                },
            ],
        )
        .unwrap()
    }

    fn states(sys: &SystemSpec) -> (StateLabel, StateLabel) {
        // initial |e, vac⟩ → final |g, m⟩, transition frequency ω.
        (sys.state(1, 0).unwrap(), sys.state(0, 1).unwrap())
    }

    fn coupling(sys: &SystemSpec, amp: f64) -> TransitionOperator {
        let (i, f) = states(sys);
        TransitionOperator::new(
            sys,
            vec![(i, f, Complex64::new(amp, 0.0))],
            Envelope::Constant,
        )
        .unwrap()
    }

    /// Closed form of the bare double integral: 2·Re[(e^{zτ} − 1 − zτ)/z²]
    /// with z = iω − Γ. The independent oracle for trivial and dephasing
    /// kernels with constant coupling.
    fn w_closed_form(pref: f64, omega: f64, gamma: f64, tau: f64) -> f64 {
        let z = Complex64::new(-gamma, omega);
        if z.norm() < 1e-12 {
            return pref * tau * tau;
        }
        let val = ((z * tau).exp() - Complex64::new(1.0, 0.0) - z * tau) / (z * z);
        2.0 * pref * val.re
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let sys = sys_with_detuning(1.0);
        let (i, f) = states(&sys);
        let v = TransitionOperator::empty();
        let model = make_projective(1.0).unwrap();
        let w = jump_probability(&sys, &v, &model, i, f, 1.0, &QuadSpec::default()).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn equal_levels_rejected() {
        let sys = sys_with_detuning(1.0);
        let i = sys.state(1, 0).unwrap();
        let f = sys.state(1, 1).unwrap();
        let v = coupling(&sys, 0.1);
        let model = make_projective(1.0).unwrap();
        assert!(matches!(
            jump_probability(&sys, &v, &model, i, f, 1.0, &QuadSpec::default()),
            Err(ZenoError::Validation(_))
        ));
    }

    #[test]
    fn trivial_kernel_reproduces_free_oscillation() {
        // W = |V|²·4 sin²(ωτ/2)/ω² for a kernel that does nothing.
        let tau = 1.0;
        let amp = 0.05;
        for omega in [0.1, 0.7, 3.0, 11.0, 20.0] {
            let sys = sys_with_detuning(omega);
            let (i, f) = states(&sys);
            let v = coupling(&sys, amp);
            let model = make_dephasing(0.0, tau).unwrap();
            let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
            let expected = amp * amp * 4.0 * (0.5 * omega * tau).sin().powi(2) / (omega * omega);
            assert_relative_eq!(w, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn resonant_limit_is_quadratic() {
        let tau = 2.0;
        let amp = 0.02;
        let sys = sys_with_detuning(0.0);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_projective(tau).unwrap();
        let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
        assert_relative_eq!(w, amp * amp * tau * tau, max_relative = 1e-10);
    }

    #[test]
    fn dephasing_matches_closed_form_double_integral() {
        // Resonant, Γτ = 5.
        let tau = 1.0;
        let gamma = 5.0;
        let amp = 0.05;
        let sys = sys_with_detuning(0.0);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_dephasing(gamma, tau).unwrap();
        let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
        let oracle = w_closed_form(amp * amp, 0.0, gamma, tau);
        assert_relative_eq!(w, oracle, max_relative = 1e-8);
    }

    #[test]
    fn dephasing_detuned_matches_closed_form() {
        let tau = 1.5;
        let gamma = 2.0;
        let omega = 3.0;
        let amp = 0.05;
        let sys = sys_with_detuning(omega);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_dephasing(gamma, tau).unwrap();
        let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
        let oracle = w_closed_form(amp * amp, omega, gamma, tau);
        assert_relative_eq!(w, oracle, max_relative = 1e-8);
    }

    #[test]
    fn bilinearity_is_exact() {
        let tau = 1.0;
        let sys = sys_with_detuning(2.0);
        let (i, f) = states(&sys);
        let model = make_dephasing(1.0, tau).unwrap();
        let v1 = coupling(&sys, 0.04);
        let w1 = jump_probability(&sys, &v1, &model, i, f, tau, &QuadSpec::default()).unwrap();
        for s in [0.5, 2.0, 3.0] {
            let vs = v1.scaled(s);
            let ws = jump_probability(&sys, &vs, &model, i, f, tau, &QuadSpec::default()).unwrap();
            assert_relative_eq!(ws, s * s * w1, max_relative = 1e-12);
        }
    }

    #[test]
    fn doubling_grid_changes_little() {
        let tau = 1.0;
        let sys = sys_with_detuning(4.0);
        let (i, f) = states(&sys);
        let v = coupling(&sys, 0.05);
        let model = make_dephasing(2.0, tau).unwrap();
        let w128 = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
        let w256 =
            jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::with_panels(256)).unwrap();
        assert!(((w128 - w256) / w128).abs() <= 1e-8);
    }

    #[test]
    fn explicit_detector_w_is_real_and_nonnegative() {
        let tau = 1.0;
        let sys = sys_with_detuning(1.5);
        let (i, f) = states(&sys);
        let v = coupling(&sys, 0.05);
        let model = make_two_level_detector(&sys, 2.0, 3.0, tau, "e").unwrap();
        let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::with_panels(64)).unwrap();
        assert!(w >= -1e-10);
        assert!(w <= 1.0);
    }

    #[test]
    fn first_order_zero_coupling_gives_no_blocks() {
        let sys = sys_with_detuning(1.0);
        let i = sys.state(1, 0).unwrap();
        let model = make_projective(1.0).unwrap();
        let blocks = first_order_state(
            &sys,
            &TransitionOperator::empty(),
            &model,
            i,
            0.5,
            &QuadSpec::default(),
        )
        .unwrap();
        assert!(blocks.is_empty());
    }

    #[test]
    fn first_order_amplitude_matches_analytic_form() {
        // Trivial kernel, constant V: amplitude = −i·V_{p,i}·(e^{iωt} − 1)/(iω).
        let omega = 2.4;
        let t = 0.8;
        let amp = 0.07;
        let sys = sys_with_detuning(omega);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_dephasing(0.0, 1.0).unwrap();
        let blocks = first_order_state(&sys, &v, &model, i, t, &QuadSpec::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].state, f);
        // ω_{iα,pα₁} = E(i) − E(p) = −ω.
        let iw = Complex64::new(0.0, -omega);
        let expected = Complex64::new(0.0, -1.0)
            * Complex64::new(amp, 0.0)
            * ((iw * t).exp() - Complex64::new(1.0, 0.0))
            / iw;
        assert!(
            (blocks[0].amplitude - expected).norm() < 1e-10,
            "got {:?}, want {:?}",
            blocks[0].amplitude,
            expected
        );
    }

    #[test]
    fn first_order_never_feeds_other_levels() {
        let sys = sys_with_detuning(1.0);
        let (i, f) = states(&sys);
        let v = coupling(&sys, 0.1);
        let model = make_dephasing(0.5, 1.0).unwrap();
        let blocks = first_order_state(&sys, &v, &model, i, 1.0, &QuadSpec::default()).unwrap();
        assert_eq!(first_order_jump_contribution(&blocks, i, f), 0.0);
    }

    #[test]
    fn pulsed_degenerate_schedule_matches_continuous() {
        let tau = 1.0;
        let sys = sys_with_detuning(2.0);
        let (i, f) = states(&sys);
        let v = coupling(&sys, 0.05);
        let model = make_dephasing(1.5, tau).unwrap();
        let schedule = MeasurementSchedule::new(tau, 0.0, 5).unwrap();
        let r = pulsed_jump_probability(&sys, &v, &model, &schedule, i, f, &QuadSpec::default())
            .unwrap();
        assert_eq!(r.w_f, 0.0);
        assert_eq!(r.w_i, 0.0);
        let w = jump_probability(&sys, &v, &model, i, f, tau, &QuadSpec::default()).unwrap();
        assert_relative_eq!(r.w_total, w, epsilon = 1e-12);
        assert_relative_eq!(r.w_m, w, epsilon = 1e-12);
    }

    #[test]
    fn pulsed_free_term_is_the_sinc_form() {
        // Trivial measurement kernel and detector-invariant free evolution.
        let tau = 2.0;
        let tau_f = 1.2;
        let omega = 3.0;
        let amp = 0.04;
        let sys = sys_with_detuning(omega);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_dephasing(0.0, tau - tau_f).unwrap();
        let schedule = MeasurementSchedule::new(tau, tau_f, 1).unwrap();
        let r = pulsed_jump_probability(&sys, &v, &model, &schedule, i, f, &QuadSpec::default())
            .unwrap();
        let expected = amp * amp * 4.0 * (0.5 * omega * tau_f).sin().powi(2) / (omega * omega);
        assert_relative_eq!(r.w_f, expected, max_relative = 1e-9);
    }

    /// Single-integral closed form of the interference term for a dephasing
    /// kernel and constant coupling: the independent oracle for the general
    /// rectangle-integral route.
    fn w_i_closed_form(pref: f64, omega: f64, gamma: f64, tau: f64, tau_f: f64) -> f64 {
        let tau_m = tau - tau_f;
        let z = Complex64::new(-gamma, omega);
        let sin_fac = if omega.abs() < 1e-12 {
            tau_f
        } else {
            2.0 * (0.5 * omega * tau_f).sin() / omega
        };
        let integral = if z.norm() < 1e-14 {
            Complex64::new(tau_m, 0.0)
        } else {
            ((z * tau_m).exp() - Complex64::new(1.0, 0.0)) / z
        };
        let phase = Complex64::from_polar(1.0, 0.5 * omega * tau_f);
        pref * sin_fac * 2.0 * (phase * integral).re
    }

    #[test]
    fn pulsed_interference_matches_closed_form() {
        let tau = 2.0;
        let tau_f = 0.8;
        let gamma = 1.3;
        let omega = 2.2;
        let amp = 0.05;
        let sys = sys_with_detuning(omega);
        let (i, f) = states(&sys);
        let v = coupling(&sys, amp);
        let model = make_dephasing(gamma, tau - tau_f).unwrap();
        let schedule = MeasurementSchedule::new(tau, tau_f, 1).unwrap();
        let r = pulsed_jump_probability(&sys, &v, &model, &schedule, i, f, &QuadSpec::default())
            .unwrap();
        let oracle = w_i_closed_form(amp * amp, omega, gamma, tau, tau_f);
        assert_relative_eq!(r.w_i, oracle, max_relative = 1e-8);
    }

    #[test]
    fn pulsed_decomposition_identity_across_models() {
        let tau = 1.4;
        let sys = sys_with_detuning(1.7);
        let (i, f) = states(&sys);
        let v = coupling(&sys, 0.06);
        for tau_f in [0.0, 0.7, 0.9 * tau] {
            let tau_m: f64 = tau - tau_f;
            let models = [
                make_projective(tau_m.max(1e-6)).unwrap(),
                make_dephasing(2.0, tau_m.max(1e-6)).unwrap(),
                make_two_level_detector(&sys, 1.5, 2.0, tau_m.max(1e-6), "e").unwrap(),
            ];
            for model in &models {
                let schedule = MeasurementSchedule::new(tau, tau_f, 1).unwrap();
                let r = pulsed_jump_probability(
                    &sys,
                    &v,
                    &model,
                    &schedule,
                    i,
                    f,
                    &QuadSpec::with_panels(64),
                )
                .unwrap();
                let residue = (r.w_total - (r.w_m + r.w_f + r.w_i)).abs();
                assert!(residue <= 1e-10, "residue {residue:.3e} at τ_F={tau_f}");
            }
        }
    }

    #[test]
    fn decay_rate_arithmetic() {
        assert_relative_eq!(decay_rate(&[0.0, 0.0], 1.0).unwrap(), 0.0);
        assert_relative_eq!(decay_rate(&[0.01], 2.0).unwrap(), 0.005);
        assert_relative_eq!(decay_rate(&[0.01, 0.02], 1.0).unwrap(), 0.03);
        assert!(decay_rate(&[], 1.0).is_err());
        assert!(decay_rate(&[-0.1], 1.0).is_err());
        assert!(decay_rate(&[0.1], 0.0).is_err());
    }

    #[test]
    fn survival_values() {
        let s1 = MeasurementSchedule::new(1.0, 0.0, 10).unwrap();
        assert_eq!(survival(0.0, &s1), 1.0);
        let s2 = MeasurementSchedule::new(2.0, 0.0, 5).unwrap();
        assert_relative_eq!(survival(0.1, &s2), (-1.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn survival_consistency_with_power_form() {
        // (1 − ΣW)^N vs exp(−R·N·τ) within 1% for small ΣW.
        let w_sum = 0.008;
        let tau = 1.0;
        for n in [1_usize, 10, 100] {
            let schedule = MeasurementSchedule::new(tau, 0.0, n).unwrap();
            let rate = w_sum / tau;
            let exp_form = survival(rate, &schedule);
            let pow_form = (1.0 - w_sum).powi(n as i32);
            assert!(
                ((exp_form - pow_form) / pow_form).abs() < 0.01,
                "n={n}: {exp_form} vs {pow_form}"
            );
        }
    }

    #[test]
    fn gaussian_envelope_reduces_probability() {
        let tau = 1.0;
        let sys = sys_with_detuning(0.0);
        let (i, f) = states(&sys);
        let amp = 0.05;
        let v_const = coupling(&sys, amp);
        let v_pulse = TransitionOperator::new(
            &sys,
            vec![(i, f, Complex64::new(amp, 0.0))],
            Envelope::Gaussian {
                center: 0.5,
                width: 0.2,
            },
        )
        .unwrap();
        let model = make_dephasing(0.0, tau).unwrap();
        let w_const =
            jump_probability(&sys, &v_const, &model, i, f, tau, &QuadSpec::default()).unwrap();
        let w_pulse =
            jump_probability(&sys, &v_pulse, &model, i, f, tau, &QuadSpec::default()).unwrap();
        assert!(w_pulse < w_const);
        // Resonant pulsed case has its own closed form: W = (∫v dt)².
        let (panels, weights) = {
            let ps = build_panels(&[0.0, tau], &[256], 8);
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            for p in &ps {
                xs.extend_from_slice(&p.nodes);
                ws.extend_from_slice(&p.weights);
            }
            (xs, ws)
        };
        let integral: f64 = panels
            .iter()
            .zip(&weights)
            .map(|(t, w)| w * v_pulse.envelope_at(*t))
            .sum();
        assert_relative_eq!(
            w_pulse,
            amp * amp * integral * integral,
            max_relative = 1e-8
        );
    }
}
