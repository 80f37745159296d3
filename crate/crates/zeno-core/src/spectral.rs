//! Spectral form of the decay rate: reservoir coupling spectrum G(ω),
//! measurement-induced level broadening P(ω), their overlap, and Zeno /
//! anti-Zeno regime sweeps.
//!
//! P(ω) is obtained from the decoherence function F of a measurement model:
//! P(ω) = (1/π) Re ∫₀^τ (1 − u/τ) F(u) e^{i(ω−ω_if)u} du.
//! This reduction is only valid when the kernel ordering under the trace can
//! be interchanged; models advertise that as a constructor-checked flag. The
//! profile decays as 1/ω², so every frequency integral here carries an
//! analytic tail correction with coefficient (1/τ − Re F′(0))/π.

use num_complex::Complex64;

use crate::error::{Result, ZenoError};
use crate::jump::QuadSpec;
use crate::measurement::{MeasurementModel, ModelKind};
use crate::quad::{build_panels, integrate_adaptive};
use crate::system::LevelPair;

/// Gauss–Legendre order per panel for the u-integral defining P(ω).
const PROFILE_ORDER: usize = 8;
/// Relative tolerance of frequency quadratures.
const FREQ_REL_TOL: f64 = 1e-7;
/// Spectrum support is cut where G drops below this fraction of its peak.
const SUPPORT_EPS: f64 = 1e-14;
/// Construction check: |∫G − declared strength| / strength must stay below.
const STRENGTH_CHECK_TOL: f64 = 1e-6;

/// One Lorentzian component of a reservoir spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianComponent {
    pub center: f64,
    pub half_width: f64,
    /// Integrated strength ∫G dω of this component (angular frequency²).
    pub strength: f64,
}

impl LorentzianComponent {
    fn eval(&self, omega: f64) -> f64 {
        let d = omega - self.center;
        self.strength / std::f64::consts::PI * self.half_width
            / (d * d + self.half_width * self.half_width)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SpectrumKind {
    Lorentzian(LorentzianComponent),
    DoubleLorentzian(LorentzianComponent, LorentzianComponent),
    FlatWindow { lo: f64, hi: f64, height: f64 },
    Tabulated { points: Vec<(f64, f64)> },
}

/// Reservoir coupling spectrum G(ω) ≥ 0 with finite integrated strength.
/// Construction verifies by quadrature that the integral matches the
/// declared strength to 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirSpectrum {
    kind: SpectrumKind,
    strength: f64,
    support: (f64, f64),
    hints: Vec<f64>,
}

impl ReservoirSpectrum {
    pub fn lorentzian(center: f64, half_width: f64, strength: f64) -> Result<Self> {
        let comp = LorentzianComponent {
            center,
            half_width,
            strength,
        };
        validate_component(&comp)?;
        let radius = support_radius(half_width);
        let spectrum = Self {
            kind: SpectrumKind::Lorentzian(comp),
            strength,
            support: (center - radius, center + radius),
            hints: ladder_hints(center, half_width),
        };
        spectrum.check_strength()?;
        Ok(spectrum)
    }

    pub fn double_lorentzian(a: LorentzianComponent, b: LorentzianComponent) -> Result<Self> {
        validate_component(&a)?;
        validate_component(&b)?;
        let ra = support_radius(a.half_width);
        let rb = support_radius(b.half_width);
        let lo = (a.center - ra).min(b.center - rb);
        let hi = (a.center + ra).max(b.center + rb);
        let mut hints = ladder_hints(a.center, a.half_width);
        hints.extend(ladder_hints(b.center, b.half_width));
        let spectrum = Self {
            kind: SpectrumKind::DoubleLorentzian(a, b),
            strength: a.strength + b.strength,
            support: (lo, hi),
            hints,
        };
        spectrum.check_strength()?;
        Ok(spectrum)
    }

    pub fn flat_window(lo: f64, hi: f64, height: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(ZenoError::Validation(format!(
                "flat window needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        if height < 0.0 {
            return Err(ZenoError::Validation(format!(
                "spectrum height must be nonnegative, got {height}"
            )));
        }
        let mid = 0.5 * (lo + hi);
        Ok(Self {
            kind: SpectrumKind::FlatWindow { lo, hi, height },
            strength: height * (hi - lo),
            support: (lo, hi),
            hints: vec![lo, mid, hi],
        })
    }

    /// Piecewise-linear spectrum through sample points (strictly increasing
    /// ω, nonnegative values); zero outside the sampled range.
    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(ZenoError::Validation(
                "tabulated spectrum needs at least two samples".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ZenoError::Validation(
                    "tabulated spectrum frequencies must be strictly increasing".into(),
                ));
            }
        }
        if let Some((w, g)) = points.iter().find(|(_, g)| *g < 0.0) {
            return Err(ZenoError::Validation(format!(
                "tabulated spectrum is negative at ω={w}: {g}"
            )));
        }
        // Trapezoid integral is exact for the piecewise-linear interpolant.
        let strength: f64 = points
            .windows(2)
            .map(|w| 0.5 * (w[1].1 + w[0].1) * (w[1].0 - w[0].0))
            .sum();
        let hints: Vec<f64> = points.iter().map(|(w, _)| *w).collect();
        let spectrum = Self {
            kind: SpectrumKind::Tabulated { points },
            strength,
            support: (hints[0], *hints.last().unwrap()),
            hints,
        };
        spectrum.check_strength()?;
        Ok(spectrum)
    }

    /// G(ω).
    pub fn eval(&self, omega: f64) -> f64 {
        match &self.kind {
            SpectrumKind::Lorentzian(c) => c.eval(omega),
            SpectrumKind::DoubleLorentzian(a, b) => a.eval(omega) + b.eval(omega),
            SpectrumKind::FlatWindow { lo, hi, height } => {
                if omega >= *lo && omega <= *hi {
                    *height
                } else {
                    0.0
                }
            }
            SpectrumKind::Tabulated { points } => {
                let n = points.len();
                if omega < points[0].0 || omega > points[n - 1].0 {
                    return 0.0;
                }
                let idx = points.partition_point(|(w, _)| *w <= omega).min(n - 1);
                if idx == 0 {
                    return points[0].1;
                }
                let (w0, g0) = points[idx - 1];
                let (w1, g1) = points[idx];
                if w1 == w0 {
                    return g1;
                }
                g0 + (g1 - g0) * (omega - w0) / (w1 - w0)
            }
        }
    }

    /// Declared integrated strength ∫G dω.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Interval outside which G is below 1e-14 of its peak.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn hints(&self) -> &[f64] {
        &self.hints
    }

    fn check_strength(&self) -> Result<()> {
        if self.strength == 0.0 {
            return Ok(());
        }
        let integral = integrate_adaptive(
            |w| self.eval(w),
            self.support.0,
            self.support.1,
            &self.hints,
            1e-9,
            0.0,
        )?;
        let rel = ((integral - self.strength) / self.strength).abs();
        if rel > STRENGTH_CHECK_TOL {
            return Err(ZenoError::Validation(format!(
                "spectrum integral {integral:.9e} deviates from declared strength {:.9e} by {rel:.3e}",
                self.strength
            )));
        }
        Ok(())
    }
}

fn validate_component(c: &LorentzianComponent) -> Result<()> {
    if !(c.half_width > 0.0) {
        return Err(ZenoError::Validation(format!(
            "Lorentzian half-width must be positive, got {}",
            c.half_width
        )));
    }
    if c.strength < 0.0 {
        return Err(ZenoError::Validation(format!(
            "spectrum strength must be nonnegative, got {}",
            c.strength
        )));
    }
    Ok(())
}

fn support_radius(half_width: f64) -> f64 {
    // G/peak = hw²/(d² + hw²) = SUPPORT_EPS at d = hw·sqrt(1/eps − 1).
    half_width * (1.0 / SUPPORT_EPS - 1.0).sqrt()
}

fn ladder_hints(center: f64, scale: f64) -> Vec<f64> {
    let mut hints = vec![center];
    let radius = support_radius(scale);
    let mut step = scale;
    while step <= radius {
        hints.push(center + step);
        hints.push(center - step);
        step *= 3.0;
    }
    hints
}

/// Where a profile evaluator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Model(ModelKind),
    ClosedSinc,
}

#[derive(Debug, Clone)]
enum ProfileEvaluator {
    ClosedSinc,
    /// Precomputed u-quadrature: coefficients w_k (1 − u_k/τ) F(u_k), so one
    /// P(ω) evaluation is a single pass over the nodes.
    Sampled {
        u_nodes: Vec<f64>,
        coefficients: Vec<Complex64>,
    },
}

/// Measurement-induced broadening profile P(ω) of one transition.
///
/// Sampled profiles are exact inside a resolved window around ω_if sized so
/// the u-grid tracks the fastest retained oscillation; outside it the
/// evaluator switches to the asymptotic form A/(π(ω−ω_if)²), which is what
/// the integral actually looks like there.
#[derive(Debug, Clone)]
pub struct BroadeningProfile {
    omega_if: f64,
    tau: f64,
    evaluator: ProfileEvaluator,
    /// Tail coefficient A = 1/τ − Re F′(0): P(ω) ≈ A/(π(ω−ω_if)²) far out.
    tail_coeff: f64,
    /// Kernel oscillation rate (conditioned drive); widens the window.
    drive: f64,
    /// Half-width of the resolved window around ω_if.
    window: f64,
    source: ProfileSource,
}

/// Build P(ω) for a model and level pair by sampling the decoherence
/// function on a composite Gauss–Legendre grid over [0, τ].
///
/// Models whose pair-conditioned generators do not commute cannot be
/// reduced to a broadening profile; they are rejected with an assumption
/// error (the kernel-ordering interchange their construction checks).
pub fn broadening_profile(
    model: &MeasurementModel,
    pair: &LevelPair,
    omega_if: f64,
    tau: f64,
    quad: &QuadSpec,
) -> Result<BroadeningProfile> {
    if !model.interchange_valid() {
        return Err(ZenoError::Assumption(
            "kernel-ordering interchange does not hold for this measurement model \
             (pair-conditioned detector generators fail to commute); the broadening \
             profile is undefined"
                .into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "profile duration must be positive, got {tau}"
        )));
    }
    if tau > model.tau() * (1.0 + 1e-9) {
        return Err(ZenoError::Validation(format!(
            "profile duration {tau} exceeds the model cycle span {}",
            model.tau()
        )));
    }
    let decay = model.decoherence_decay_rate(pair);
    let drive = model.kernel_drive_rate(pair);
    let tail_coeff = 1.0 / tau + decay;
    let window = resolved_window(tau, tail_coeff, drive);

    // |F| drops below e⁻⁴⁰ past u_cut; the rest of [0, τ] contributes
    // nothing the f64 sum could see.
    let u_cut = if decay > 0.0 {
        tau.min(40.0 / decay)
    } else {
        tau
    };
    // Panel width small enough that the fastest phase inside the window
    // advances ≤ 2.5 rad per panel.
    let needed = (u_cut * window / 2.5).ceil() as usize;
    let panels = build_panels(
        &[0.0, u_cut],
        &[needed.max(quad.panels.max(8))],
        PROFILE_ORDER,
    );
    let mut u_nodes = Vec::new();
    let mut coefficients = Vec::new();
    for p in &panels {
        for (u, w) in p.nodes.iter().zip(&p.weights) {
            let f = model.decoherence_function(pair, *u)?;
            u_nodes.push(*u);
            coefficients.push(f * Complex64::new(w * (1.0 - u / tau), 0.0));
        }
    }
    Ok(BroadeningProfile {
        omega_if,
        tau,
        evaluator: ProfileEvaluator::Sampled {
            u_nodes,
            coefficients,
        },
        tail_coeff,
        drive,
        window,
        source: ProfileSource::Model(model.kind()),
    })
}

/// Window half-width inside which the profile is evaluated exactly: covers
/// the central lobes, twenty decay widths (keeping the dropped next-order
/// tail terms at the 1e-4 level) and any kernel drive resonances.
fn resolved_window(tau: f64, tail_coeff: f64, drive: f64) -> f64 {
    let lobes = 50.0 * std::f64::consts::PI / tau;
    lobes.max(20.0 * tail_coeff) + 2.0 * drive
}

/// Closed-form profile of ideal instantaneous measurements repeated every
/// `tau`: 2 sin²(τ(ω−ω_if)/2) / (πτ(ω−ω_if)²).
pub fn sinc_profile(omega_if: f64, tau: f64) -> Result<BroadeningProfile> {
    if !(tau > 0.0) {
        return Err(ZenoError::Validation(format!(
            "profile duration must be positive, got {tau}"
        )));
    }
    Ok(BroadeningProfile {
        omega_if,
        tau,
        evaluator: ProfileEvaluator::ClosedSinc,
        tail_coeff: 1.0 / tau,
        drive: 0.0,
        window: resolved_window(tau, 1.0 / tau, 0.0),
        source: ProfileSource::ClosedSinc,
    })
}

impl BroadeningProfile {
    pub fn omega_if(&self) -> f64 {
        self.omega_if
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    /// P(ω). Real by construction; shipped models keep it nonnegative up to
    /// quadrature noise. Sampled profiles hand off to the asymptotic
    /// A/(π(ω−ω_if)²) form outside their resolved window.
    pub fn eval(&self, omega: f64) -> f64 {
        let delta = omega - self.omega_if;
        match &self.evaluator {
            ProfileEvaluator::ClosedSinc => {
                let x = self.tau * delta;
                if x.abs() < 1e-4 {
                    // 2sin²(x/2)/(πτδ²) = (τ/2π)(1 − y²/3 + 2y⁴/45), y = x/2.
                    let y = 0.5 * x;
                    self.tau / (2.0 * std::f64::consts::PI)
                        * (1.0 - y * y / 3.0 + 2.0 * y.powi(4) / 45.0)
                } else {
                    2.0 * (0.5 * x).sin().powi(2)
                        / (std::f64::consts::PI * self.tau * delta * delta)
                }
            }
            ProfileEvaluator::Sampled {
                u_nodes,
                coefficients,
            } => {
                if delta.abs() > self.window {
                    return self.tail_coeff / (std::f64::consts::PI * delta * delta);
                }
                let mut acc = 0.0;
                for (u, c) in u_nodes.iter().zip(coefficients) {
                    let (s, co) = (delta * u).sin_cos();
                    acc += c.re * co - c.im * s;
                }
                acc / std::f64::consts::PI
            }
        }
    }

    /// Tail coefficient A in P(ω) ≈ A/(π(ω−ω_if)²).
    pub fn tail_coeff(&self) -> f64 {
        self.tail_coeff
    }

    /// Half-width of the resolved window around ω_if.
    pub fn window_halfwidth(&self) -> f64 {
        self.window
    }

    /// Split hints for frequency quadrature: lobe boundaries, drive
    /// resonances, and a geometric ladder out to the window edge.
    pub fn hints(&self) -> Vec<f64> {
        let mut hints = vec![self.omega_if];
        for k in 1..=8 {
            let d = k as f64 * std::f64::consts::PI / self.tau;
            hints.push(self.omega_if + d);
            hints.push(self.omega_if - d);
        }
        if self.drive > 0.0 {
            for k in [1.0, 0.5, 1.5] {
                hints.push(self.omega_if + k * self.drive);
                hints.push(self.omega_if - k * self.drive);
            }
        }
        let cap = self.window;
        let mut step = self.tail_coeff.max(1.0 / self.tau);
        while step <= cap {
            hints.push(self.omega_if + step);
            hints.push(self.omega_if - step);
            step *= 3.0;
        }
        hints
    }

    /// ∫P dω: adaptive quadrature over the resolved window plus the analytic
    /// 1/ω² tail beyond it. Equals 1 within 2e-3 for shipped models; the
    /// residual is the neglected oscillatory part of the tail.
    pub fn normalization(&self) -> Result<f64> {
        let half = self.window;
        let numeric = integrate_adaptive(
            |w| self.eval(w),
            self.omega_if - half,
            self.omega_if + half,
            &self.hints(),
            FREQ_REL_TOL,
            1e-12 / self.tau,
        )?;
        let tail = 2.0 * self.tail_coeff / (std::f64::consts::PI * half);
        Ok(numeric + tail)
    }
}

/// G(ω) evaluation (free-function form of [`ReservoirSpectrum::eval`]).
pub fn spectrum_eval(g: &ReservoirSpectrum, omega: f64) -> f64 {
    g.eval(omega)
}

/// Overlap decay rate R = 2π ∫ G(ω) P(ω) dω.
///
/// The quadrature runs over the effective support of G with split hints at
/// both the spectrum's and the profile's features. G is negligible outside
/// its support by construction, so no additional tail term is required.
pub fn overlap_decay_rate(g: &ReservoirSpectrum, p: &BroadeningProfile) -> Result<f64> {
    let (lo, hi) = g.support();
    let mut hints = g.hints().to_vec();
    hints.extend(p.hints());
    let scale = g.strength() * p.tau;
    let integral = integrate_adaptive(
        |w| g.eval(w) * p.eval(w),
        lo,
        hi,
        &hints,
        FREQ_REL_TOL,
        1e-15 * scale.max(f64::MIN_POSITIVE),
    )?;
    let r = 2.0 * std::f64::consts::PI * integral;
    if r < -1e-9 * (1.0 + 2.0 * std::f64::consts::PI * scale) {
        return Err(ZenoError::Numerics(format!(
            "overlap rate came out negative: {r:.3e}"
        )));
    }
    Ok(r.max(0.0))
}

/// Regime label of one sweep interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Decay slows down as measurements get more frequent.
    Zeno,
    /// Decay accelerates as measurements get more frequent.
    AntiZeno,
    /// Rate change below resolution.
    Neutral,
}

#[derive(Debug, Clone, Copy)]
pub struct RegimeInterval {
    pub regime: Regime,
    /// Set when the interval is anti-Zeno and its rate exceeds the
    /// golden-rule reference.
    pub exceeds_golden_rule: bool,
}

/// R(τ) samples over a τ grid, the golden-rule reference, and per-interval
/// regime labels.
#[derive(Debug, Clone)]
pub struct RegimeCurve {
    pub taus: Vec<f64>,
    pub rates: Vec<f64>,
    /// Unmeasured reference rate 2π G(ω_if).
    pub golden_rule: f64,
    /// One label per adjacent τ pair.
    pub intervals: Vec<RegimeInterval>,
}

/// Sweep the measurement duration over `tau_grid`, computing the overlap
/// rate at each point, and classify every interval by plain discrete
/// differences: R rising with τ means the decay slows as measurements
/// become more frequent (Zeno), falling means anti-Zeno; differences below
/// 1e-12 are neutral.
pub fn sweep_and_classify(
    g: &ReservoirSpectrum,
    model_family: &dyn Fn(f64) -> Result<MeasurementModel>,
    pair: &LevelPair,
    omega_if: f64,
    tau_grid: &[f64],
    quad: &QuadSpec,
) -> Result<RegimeCurve> {
    if tau_grid.len() < 8 {
        return Err(ZenoError::Validation(format!(
            "sweep grid needs at least 8 points, got {}",
            tau_grid.len()
        )));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ZenoError::Validation(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    let mut rates = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let model = model_family(tau)?;
        let profile = broadening_profile(&model, pair, omega_if, tau, quad)?;
        rates.push(overlap_decay_rate(g, &profile)?);
    }
    let golden_rule = 2.0 * std::f64::consts::PI * g.eval(omega_if);
    let intervals = classify_intervals(&rates, golden_rule);
    Ok(RegimeCurve {
        taus: tau_grid.to_vec(),
        rates,
        golden_rule,
        intervals,
    })
}

/// Label consecutive rate samples: R rising with τ is Zeno, falling is
/// anti-Zeno, |ΔR| < 1e-12 is neutral. Anti-Zeno intervals additionally
/// record whether they exceed the golden-rule reference.
pub fn classify_intervals(rates: &[f64], golden_rule: f64) -> Vec<RegimeInterval> {
    rates
        .windows(2)
        .map(|w| {
            let diff = w[1] - w[0];
            let regime = if diff.abs() < 1e-12 {
                Regime::Neutral
            } else if diff > 0.0 {
                Regime::Zeno
            } else {
                Regime::AntiZeno
            };
            RegimeInterval {
                regime,
                exceeds_golden_rule: regime == Regime::AntiZeno && w[0].max(w[1]) > golden_rule,
            }
        })
        .collect()
}
