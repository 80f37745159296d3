//! Cross-module invariants: propagation properties on arbitrary generators,
//! the discrete/continuum consistency of the two rate routes, and the
//! convergence order of the jump formula against the exact oracle.

use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

use zeno_core::jump::{jump_probability, QuadSpec};
use zeno_core::linalg::{
    build_liouvillian, hermiticity_deviation, max_abs, propagate_matrix, trace, Liouvillian,
};
use zeno_core::measurement::make_dephasing;
use zeno_core::oracle::{canonical_scenarios, convergence_fit};
use zeno_core::spectral::{broadening_profile, overlap_decay_rate, ReservoirSpectrum};
use zeno_core::system::{Channel, Envelope, Level, StateLabel, SystemSpec, TransitionOperator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Deterministic pseudo-random generator built from 3 seeds: a Hamiltonian
/// with norm ≤ 10 plus one damping and one dephasing collapse operator.
fn seeded_liouvillian(dim: usize, seed: u64) -> Liouvillian {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1_u64 << 53) as f64) - 0.5
    };
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            if i == j {
                h[(i, j)] = c(4.0 * next(), 0.0);
            } else {
                let z = c(2.0 * next(), 2.0 * next());
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
    }
    let mut damp = Array2::<Complex64>::zeros((dim, dim));
    damp[(0, dim - 1)] = c(0.6, 0.0);
    let mut deph = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        deph[(i, i)] = c(0.3 * (i as f64 + 1.0), 0.0);
    }
    build_liouvillian(h, vec![damp, deph]).unwrap()
}

fn seeded_density(dim: usize, seed: u64) -> Array2<Complex64> {
    // B†B normalized to unit trace: a strictly valid state.
    let mut state = seed.wrapping_add(7);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1_u64 << 53) as f64) - 0.5
    };
    let mut b = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            b[(i, j)] = c(next(), next());
        }
    }
    let g = zeno_core::linalg::dagger(&b).dot(&b);
    let tr = trace(&g);
    g.mapv(|z| z / tr)
}

#[test]
fn propagation_preserves_trace_and_hermiticity_over_long_times() {
    for (seed, t) in [(1_u64, 0.5), (2, 7.0), (3, 100.0)] {
        let l = seeded_liouvillian(4, seed);
        let rho = seeded_density(4, seed);
        let out = propagate_matrix(&l, &rho, t).unwrap();
        let tr = trace(&out);
        assert!(
            (tr - c(1.0, 0.0)).norm() < 1e-10,
            "seed {seed}, t {t}: trace {tr}"
        );
        assert!(hermiticity_deviation(&out) < 1e-10);
    }
}

#[test]
fn propagation_semigroup_property() {
    let l = seeded_liouvillian(3, 11);
    let rho = seeded_density(3, 11);
    for (s, t) in [(0.3, 0.9), (1.5, 2.5)] {
        let two_step = propagate_matrix(&l, &propagate_matrix(&l, &rho, s).unwrap(), t).unwrap();
        let one_step = propagate_matrix(&l, &rho, s + t).unwrap();
        let dev = max_abs(&(&two_step - &one_step));
        assert!(dev < 1e-9, "semigroup deviation {dev:.3e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Linearity on arbitrary Hermitian (non-state) inputs.
    #[test]
    fn propagation_is_linear(seed in 1_u64..500, a in -2.0_f64..2.0, b in -2.0_f64..2.0) {
        let l = seeded_liouvillian(3, seed);
        let rho1 = seeded_density(3, seed);
        let rho2 = seeded_density(3, seed.wrapping_add(1));
        let combo = rho1.mapv(|z| z * c(a, 0.0)) + rho2.mapv(|z| z * c(b, 0.0));
        let t = 0.8;
        let lhs = propagate_matrix(&l, &combo, t).unwrap();
        let rhs = propagate_matrix(&l, &rho1, t).unwrap().mapv(|z| z * c(a, 0.0))
            + propagate_matrix(&l, &rho2, t).unwrap().mapv(|z| z * c(b, 0.0));
        let dev = max_abs(&(&lhs - &rhs));
        prop_assert!(dev < 1e-10, "linearity deviation {dev:.3e}");
    }
}

/// Riemann-sum channel set against the spectral overlap rate, dephasing
/// model: the two routes to the decay rate agree within 1%.
#[test]
fn discrete_channels_match_overlap_rate() {
    let tau = 1.0;
    let omega0 = 5.0;
    for gamma_tau in [0.5_f64, 2.0, 10.0] {
        let gamma = gamma_tau / tau;
        // Flat spectrum window centered on resonance, wide enough to hold
        // the profile's central mass at every Γτ.
        let half = 30.0 / tau + 2.0 * gamma;
        let g0 = 2e-5;
        let g = ReservoirSpectrum::flat_window(omega0 - half, omega0 + half, g0).unwrap();

        // Discrete midpoint sampling of the same window.
        let n_modes = 600;
        let dw = 2.0 * half / n_modes as f64;
        let mut channels = vec![Channel {
            label: "vac".into(),
            energy: 0.0,
        }];
        for k in 0..n_modes {
            channels.push(Channel {
                label: format!("m{k}"),
                energy: omega0 - half + (k as f64 + 0.5) * dw,
            });
        }
        let sys = SystemSpec::new(
            vec![
                Level {
                    label: "f".into(),
                    energy: 0.0,
                },
                Level {
                    label: "i".into(),
                    energy: omega0,
                },
            ],
            channels,
        )
        .unwrap();
        let initial = sys.state(1, 0).unwrap();
        let amp = (g0 * dw).sqrt();
        let entries: Vec<_> = (1..=n_modes)
            .map(|a| {
                (
                    initial,
                    StateLabel {
                        level: 0,
                        channel: a,
                    },
                    c(amp, 0.0),
                )
            })
            .collect();
        let v = TransitionOperator::new(&sys, entries, Envelope::Constant).unwrap();
        let model = make_dephasing(gamma, tau).unwrap();

        let quad = QuadSpec::with_panels(64);
        let mut total = 0.0;
        for a in 1..=n_modes {
            let final_ = sys.state(0, a).unwrap();
            total += jump_probability(&sys, &v, &model, initial, final_, tau, &quad).unwrap();
        }
        let r_discrete = total / tau;

        let pair = sys.pair(initial, sys.state(0, 1).unwrap()).unwrap();
        let profile = broadening_profile(&model, &pair, omega0, tau, &quad).unwrap();
        let r_overlap = overlap_decay_rate(&g, &profile).unwrap();

        let rel = ((r_discrete - r_overlap) / r_overlap).abs();
        assert!(
            rel < 0.01,
            "Γτ = {gamma_tau}: discrete {r_discrete:.6e} vs overlap {r_overlap:.6e} ({rel:.4})"
        );
    }
}

/// The jump formula's error against the exact oracle shrinks faster than
/// second order on at least 3 of the 4 canonical scenarios.
#[test]
fn convergence_order_on_canonical_scenarios() {
    let quad = QuadSpec::with_panels(64);
    let scales = [1.0, 0.5, 0.25];
    let mut passing = 0;
    let mut report = String::new();
    for named in canonical_scenarios().unwrap() {
        let fit = convergence_fit(
            &named.scenario,
            named.initial,
            named.final_level,
            &scales,
            &quad,
        )
        .unwrap();
        report.push_str(&format!("{}: p = {:.3}\n", named.name, fit.exponent));
        if fit.exponent >= 2.7 {
            passing += 1;
        }
    }
    assert!(
        passing >= 3,
        "only {passing}/4 scenarios converged:\n{report}"
    );
}
