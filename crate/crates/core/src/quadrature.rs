//! Numerical integration: Gauss–Legendre rules and adaptive Gauss–Kronrod
//! (G7/K15) with algebraic maps for semi-infinite and infinite intervals.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (mid + half * x, w * half))
            .collect()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    let result = rk * h;
    let err = ((rk - rg) * h).abs();
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_segments: 2000,
        }
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`; either end may be
/// infinite.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    integrate_with_error(f, a, b, tol).map(|(v, _)| v)
}

/// Like [`integrate`] but also returns the final error estimate.
pub fn integrate_with_error(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    if a > b {
        return integrate_with_error(f, b, a, tol).map(|(v, e)| (-v, e));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&mut f, a, b, tol),
        (true, false) => {
            // x = a + t / (1 - t), t in [0, 1)
            let mut g = |t: f64| {
                if t >= 1.0 {
                    return 0.0;
                }
                let d = 1.0 - t;
                let v = f(a + t / d) / (d * d);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            adaptive(&mut g, 0.0, 1.0, tol).map_err(|e| relabel(e, a, b))
        }
        (false, true) => {
            let mut g = |t: f64| {
                if t >= 1.0 {
                    return 0.0;
                }
                let d = 1.0 - t;
                let v = f(b - t / d) / (d * d);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            adaptive(&mut g, 0.0, 1.0, tol).map_err(|e| relabel(e, a, b))
        }
        (false, false) => {
            // x = t / (1 - t^2), t in (-1, 1)
            let mut g = |t: f64| {
                let d = 1.0 - t * t;
                if d <= 0.0 {
                    return 0.0;
                }
                let v = f(t / d) * (1.0 + t * t) / (d * d);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            adaptive(&mut g, -1.0, 1.0, tol).map_err(|e| relabel(e, a, b))
        }
    }
}

fn relabel(e: Error, a: f64, b: f64) -> Error {
    match e {
        Error::Quadrature { estimate, .. } => Error::Quadrature {
            lo: a,
            hi: b,
            estimate,
        },
        other => other,
    }
}

fn adaptive(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let (v, e) = kronrod15(a, b, f);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v,
        err: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut segments = 1;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if segments >= tol.max_segments {
            return Err(Error::Quadrature {
                lo: a,
                hi: b,
                estimate: total_err,
            });
        }
        let seg = heap.pop().expect("heap never empties");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval exhausted at machine precision; accept it as is.
            heap.push(Segment { err: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.err).sum();
            if heap.iter().all(|s| s.err == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod15(seg.a, mid, f);
        let (v2, e2) = kronrod15(mid, seg.b, f);
        total += v1 + v2 - seg.value;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        segments += 1;
        // Re-sum to avoid drift from repeated increments.
        total_err = heap.iter().map(|s| s.err).sum();
    }
    let total = heap.iter().map(|s| s.value).sum();
    Ok((total, total_err))
}
