//! Quadrature building blocks: Gauss–Legendre node tables, composite grids
//! over segmented intervals, and adaptive Gauss–Kronrod integration.

use crate::error::{Result, ZenoError};

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration
/// on the Legendre polynomial. Converges to machine precision for the small
/// orders used here.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A panel of a composite grid: Gauss–Legendre nodes mapped to [lo, hi].
#[derive(Debug, Clone)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Uniform panels over each segment of a partitioned interval. Segment
/// boundaries are honored exactly, so kernel discontinuities placed on them
/// never fall inside a panel.
pub fn build_panels(breaks: &[f64], panels_per_segment: &[usize], order: usize) -> Vec<Panel> {
    assert!(breaks.len() >= 2);
    assert_eq!(breaks.len() - 1, panels_per_segment.len());
    let (gl_nodes, gl_weights) = gauss_legendre(order);
    let mut panels = Vec::new();
    for (seg, &count) in panels_per_segment.iter().enumerate() {
        let (a, b) = (breaks[seg], breaks[seg + 1]);
        if b <= a || count == 0 {
            continue;
        }
        let h = (b - a) / count as f64;
        for p in 0..count {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == count {
                b
            } else {
                a + (p + 1) as f64 * h
            };
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let nodes: Vec<f64> = gl_nodes.iter().map(|&x| mid + half * x).collect();
            let weights: Vec<f64> = gl_weights.iter().map(|&w| w * half).collect();
            panels.push(Panel {
                lo,
                hi,
                nodes,
                weights,
            });
        }
    }
    panels
}

/// Split a total panel budget across segments proportionally to length,
/// with at least one panel per non-degenerate segment.
pub fn allocate_panels(breaks: &[f64], total: usize) -> Vec<usize> {
    let full: f64 = breaks.last().unwrap() - breaks.first().unwrap();
    breaks
        .windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            if len <= 0.0 {
                0
            } else {
                (((total as f64) * len / full).round() as usize).max(1)
            }
        })
        .collect()
}

/// ∫f over composite panels.
pub fn integrate_panels(panels: &[Panel], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for p in panels {
        for (x, w) in p.nodes.iter().zip(&p.weights) {
            acc += w * f(*x);
        }
    }
    acc
}

// Gauss–Kronrod 7–15 pair (positive abscissae; symmetric).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Adaptive Gauss–Kronrod over an interval list. `hints` are additional
/// initial split points (feature locations); out-of-range hints are ignored.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    hints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if !(a < b) {
        return Err(ZenoError::Validation(format!(
            "adaptive quadrature needs a < b, got [{a}, {b}]"
        )));
    }
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(hints.iter().copied().filter(|x| *x > a && *x < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();

    // Work list of (lo, hi, value, err).
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        intervals.push((w[0], w[1], v, e));
        total += v;
        total_err += e;
    }

    const MAX_INTERVALS: usize = 20000;
    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(ZenoError::Numerics(format!(
                "adaptive quadrature failed to converge: error {total_err:.3e} after {} intervals (tolerance {tol:.3e})",
                intervals.len()
            )));
        }
        // Bisect the worst interval.
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval at floating-point resolution; accept its contribution.
            intervals.push((lo, hi, v, 0.0));
            total_err -= e;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // Order q integrates degree 2q−1 exactly.
        for q in [2, 4, 6, 8, 12] {
            let (nodes, weights) = gauss_legendre(q);
            let deg = 2 * q - 1;
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            let num: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            assert_relative_eq!(num, exact, epsilon = 1e-13);
            let mass: f64 = weights.iter().sum();
            assert_relative_eq!(mass, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn composite_panels_integrate_oscillatory() {
        let breaks = [0.0, 2.0];
        let panels = build_panels(&breaks, &[32], 6);
        let val = integrate_panels(&panels, |x| (7.0 * x).sin());
        let exact = (1.0 - (14.0_f64).cos()) / 7.0;
        assert_relative_eq!(val, exact, epsilon = 1e-12);
    }

    #[test]
    fn panel_allocation_respects_segments() {
        let breaks = [0.0, 0.9, 1.0];
        let alloc = allocate_panels(&breaks, 10);
        assert_eq!(alloc.len(), 2);
        assert_eq!(alloc[0], 9);
        assert_eq!(alloc[1], 1);
        let panels = build_panels(&breaks, &alloc, 4);
        assert!(panels.iter().any(|p| (p.hi - 0.9).abs() < 1e-15));
    }

    #[test]
    fn adaptive_gaussian_bump() {
        // Narrow Gaussian inside a huge interval; hints mark the feature.
        let sigma = 1e-3;
        let f = |x: f64| (-0.5 * (x / sigma).powi(2)).exp();
        let exact = sigma * (2.0 * std::f64::consts::PI).sqrt();
        // Geometric hint ladder around the feature; a bare center hint would
        // let the outer Kronrod nodes skip the remaining tail mass entirely.
        let mut hints = vec![0.0];
        for k in [1.0, 3.0, 10.0, 30.0] {
            hints.push(k * sigma);
            hints.push(-k * sigma);
        }
        let val = integrate_adaptive(f, -1e4, 1e4, &hints, 1e-10, 0.0).unwrap();
        assert_relative_eq!(val, exact, epsilon = 1e-8);
    }

    #[test]
    fn adaptive_lorentzian_wide_domain() {
        let hw = 2.0;
        let f = |x: f64| hw / std::f64::consts::PI / (x * x + hw * hw);
        let cut = 1e7 * hw;
        let val = integrate_adaptive(
            f,
            -cut,
            cut,
            &[-100.0 * hw, -hw, 0.0, hw, 100.0 * hw, 1e4, -1e4, 1e6, -1e6],
            1e-9,
            0.0,
        )
        .unwrap();
        // Mass outside ±1e7·hw is ~6.4e-8.
        assert_relative_eq!(val, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_rejects_bad_interval() {
        assert!(integrate_adaptive(|x| x, 1.0, 1.0, &[], 1e-8, 0.0).is_err());
    }
}
