//! Numerical integration.
//!
//! [`Quadrature`] is a globally adaptive Gauss–Kronrod (7/15) integrator in
//! the style of QUADPACK's `qag`: the interval with the largest error
//! estimate is bisected until the summed estimate meets the tolerance.
//! Callers supply breakpoints at known kinks or discontinuities of the
//! integrand so that no panel straddles one.
//!
//! [`gauss_legendre`] produces fixed n-point rules used for the volume grids
//! of the network model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, SnmError};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { rel_tol: 1e-8, abs_tol: 1e-300, max_panels: 4000 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).abs();
    // QUADPACK's error scaling: pessimistic for rough panels, sharp for smooth ones.
    let error = if raw == 0.0 { 0.0 } else { raw.min(200.0 * raw * (200.0 * raw).sqrt().min(1.0)) };
    let error = error.max(50.0 * f64::EPSILON * value.abs());
    (value, error)
}

impl Quadrature {
    pub fn new(rel_tol: f64) -> Self {
        Quadrature { rel_tol, ..Default::default() }
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    /// Integrate `f` over `[a, b]`, splitting first at every breakpoint that
    /// falls strictly inside the interval.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, breakpoints: &[f64]) -> Result<Integral> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(SnmError::invalid(format!("integration bounds must be finite, got [{a}, {b}]")));
        }
        if b <= a {
            return Ok(Integral { value: 0.0, abs_error: 0.0, evaluations: 0 });
        }
        let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b && x.is_finite()).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut heap = BinaryHeap::new();
        let mut lo = a;
        let mut total = 0.0;
        let mut total_err = 0.0;
        let mut evaluations = 0;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            if hi > lo {
                let (value, error) = kronrod15(&f, lo, hi);
                evaluations += 15;
                total += value;
                total_err += error;
                heap.push(Panel { a: lo, b: hi, value, error });
            }
            lo = hi;
        }

        while total_err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_panels {
                return Err(SnmError::Quadrature {
                    value: total,
                    error: total_err,
                    requested: self.abs_tol.max(self.rel_tol * total.abs()),
                });
            }
            let worst = heap.pop().expect("heap is never empty here");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel has collapsed to floating-point resolution.
                heap.push(Panel { error: 0.0, ..worst });
                total_err = heap.iter().map(|p| p.error).sum();
                continue;
            }
            let (v1, e1) = kronrod15(&f, worst.a, mid);
            let (v2, e2) = kronrod15(&f, mid, worst.b);
            evaluations += 30;
            total += v1 + v2 - worst.value;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
            if total_err < 0.0 {
                total_err = heap.iter().map(|p| p.error).sum();
            }
        }
        // Re-sum to shed accumulated cancellation in the running totals.
        let value = heap.iter().map(|p| p.value).sum();
        let abs_error = heap.iter().map(|p| p.error).sum();
        Ok(Integral { value, abs_error, evaluations })
    }
}

/// Panel edges `scale·2^k` covering `(lo, hi)`; used to resolve integrands
/// that vary on several scales (heavy tails, near-singular endpoints).
pub fn geometric_breakpoints(scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(scale > 0.0) || !(hi > lo) {
        return out;
    }
    let mut x = scale;
    while x > lo && x > scale * 1e-12 {
        out.push(x);
        x *= 0.5;
    }
    let mut x = scale * 2.0;
    while x < hi {
        out.push(x);
        x *= 2.0;
    }
    out.retain(|&x| x > lo && x < hi);
    out.sort_by(f64::total_cmp);
    out
}

/// Nodes and weights of the n-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
