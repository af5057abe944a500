//! Gaussian smoothing followed by Gaussian damping of a 1D log-concave measure.

use super::LogConcaveMeasure1D;
use crate::error::{Error, Result};
use crate::quadrature::{self, GaussLegendre, Tolerance};
use crate::roots::solve_increasing;
use std::f64::consts::PI;

const WINDOW: f64 = 10.0;
const TAIL_LEVEL: f64 = 1e-18;
const PANEL_NODES: usize = 16;
const MIN_PANELS: usize = 400;
const MAX_PANELS: usize = 40_000;

/// Density `∝ (ρ * φ_s)(x) · exp(−x²/(2N))` with `s = 1/N`, tabulated on
/// Gauss–Legendre panels for the CDF and quantile.
#[derive(Debug, Clone)]
pub struct Regularized {
    base: LogConcaveMeasure1D,
    level: u32,
    s: f64,
    damping: f64,
    gl: GaussLegendre,
    edges: Vec<f64>,
    /// Unnormalized mass to the left of each edge.
    left: Vec<f64>,
    /// Unnormalized mass to the right of each edge.
    right: Vec<f64>,
    log_z: f64,
}

/// Moments of the tilted law `w(y) ∝ ρ(y) exp(−(x−y)²/(2s²))`.
struct Tilted {
    log_conv: f64,
    mean_offset: f64,
    variance: f64,
}

impl Regularized {
    pub(super) fn new(base: LogConcaveMeasure1D, level: u32) -> Result<Self> {
        let s = 1.0 / level as f64;
        let (a, b) = base.support();
        let lo = if a.is_finite() {
            a
        } else {
            base.quantile(TAIL_LEVEL)?
        };
        let hi = if b.is_finite() {
            b
        } else {
            base.inverse_sf(TAIL_LEVEL)?
        };
        let (lo, hi) = (lo - 12.0 * s, hi + 12.0 * s);
        let panels = (((hi - lo) / s).ceil() as usize).clamp(MIN_PANELS, MAX_PANELS);
        let edges: Vec<f64> = (0..=panels)
            .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
            .collect();
        let mut r = Self {
            base,
            level,
            s,
            damping: level as f64,
            gl: GaussLegendre::new(PANEL_NODES),
            edges,
            left: vec![],
            right: vec![],
            log_z: 0.0,
        };
        let masses: Vec<f64> = r
            .edges
            .windows(2)
            .map(|w| r.unnormalized_mass(w[0], w[1]))
            .collect::<Result<_>>()?;
        let mut left = vec![0.0; panels + 1];
        for k in 0..panels {
            left[k + 1] = left[k] + masses[k];
        }
        let mut right = vec![0.0; panels + 1];
        for k in (0..panels).rev() {
            right[k] = right[k + 1] + masses[k];
        }
        let total = left[panels];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: total,
            });
        }
        r.left = left;
        r.right = right;
        r.log_z = total.ln();
        Ok(r)
    }

    pub fn base(&self) -> &LogConcaveMeasure1D {
        &self.base
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Standard deviation of the smoothing kernel.
    pub fn smoothing_scale(&self) -> f64 {
        self.s
    }

    /// Variance of the damping Gaussian.
    pub fn damping_variance(&self) -> f64 {
        self.damping
    }

    pub(super) fn log_norm(&self) -> f64 {
        self.log_z
    }

    /// Interval outside of which the tabulated mass is negligible.
    pub fn table_range(&self) -> (f64, f64) {
        (self.edges[0], *self.edges.last().unwrap())
    }

    fn tilted(&self, x: f64) -> Result<Tilted> {
        let s = self.s;
        let s2 = s * s;
        let base = &self.base;
        let (a, b) = base.support();
        let guess = x.clamp(
            if a.is_finite() { a } else { f64::NEG_INFINITY },
            if b.is_finite() { b } else { f64::INFINITY },
        );
        // Mode of the tilted law: V′(y) + (y − x)/s² = 0.
        let mode = solve_increasing(
            |y| {
                let curv = base.potential_d2(y).unwrap_or(0.0) + 1.0 / s2;
                (base.potential_d1(y) + (y - x) / s2, curv)
            },
            a,
            b,
            guess,
        )?;
        let lo = (mode - WINDOW * s).max(a);
        let hi = (mode + WINDOW * s).min(b);
        // log w(y) − log w(mode), with the quadratic difference factored to
        // avoid cancellation when |x − mode| ≫ s.
        let v_mode = base.potential(mode);
        let rel_log_w =
            |y: f64| -(base.potential(y) - v_mode) - (mode - y) * (2.0 * x - y - mode) / (2.0 * s2);
        let peak = -v_mode - (x - mode) * (x - mode) / (2.0 * s2);
        if !peak.is_finite() {
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: f64::NAN,
            });
        }
        let mut breaks = vec![lo];
        breaks.extend(base.kinks().into_iter().filter(|k| *k > lo && *k < hi));
        breaks.push(hi);
        let mut moments = [0.0; 3];
        for order in 0..3 {
            // Higher moments may vanish by symmetry, so their tolerance is
            // anchored to the zeroth moment.
            let abs = if order == 0 {
                1e-300
            } else {
                1e-14 * moments[0] * s.powi(order as i32)
            };
            let tol = Tolerance {
                abs,
                rel: 1e-13,
                max_segments: 2000,
            };
            for w in breaks.windows(2) {
                moments[order] += quadrature::integrate(
                    |y| (y - mode).powi(order as i32) * rel_log_w(y).exp(),
                    w[0],
                    w[1],
                    tol,
                )?;
            }
        }
        let [m0, m1, m2] = moments;
        let shift = m1 / m0;
        Ok(Tilted {
            log_conv: peak + m0.ln() - (s * (2.0 * PI).sqrt()).ln(),
            mean_offset: mode - x + shift,
            variance: (m2 / m0 - shift * shift).max(0.0),
        })
    }

    /// Unnormalized log density `log (ρ * φ_s)(x) − x²/(2N)`.
    fn log_unnormalized(&self, x: f64) -> Result<f64> {
        Ok(self.tilted(x)?.log_conv - x * x / (2.0 * self.damping))
    }

    fn unnormalized_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.gl.mapped(lo, hi) {
            acc += w * self.log_unnormalized(x)?.exp();
        }
        Ok(acc)
    }

    pub fn potential(&self, x: f64) -> f64 {
        match self.log_unnormalized(x) {
            Ok(l) => self.log_z - l,
            Err(_) => f64::NAN,
        }
    }

    pub fn potential_d1(&self, x: f64) -> f64 {
        match self.tilted(x) {
            Ok(t) => -t.mean_offset / (self.s * self.s) + x / self.damping,
            Err(_) => f64::NAN,
        }
    }

    /// `V_N″ = 1/s² − Var_w/s⁴ + 1/N`, where the first two terms are the
    /// (nonnegative) curvature of the smoothed potential.
    pub fn potential_d2(&self, x: f64) -> f64 {
        match self.tilted(x) {
            Ok(t) => {
                let s2 = self.s * self.s;
                (s2 - t.variance) / (s2 * s2) + 1.0 / self.damping
            }
            Err(_) => f64::NAN,
        }
    }

    fn density(&self, x: f64) -> f64 {
        (-self.potential(x)).exp()
    }

    fn panel_of(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.table_range();
        if x <= lo || x >= hi {
            return None;
        }
        let k = self.edges.partition_point(|e| *e <= x);
        Some(k - 1)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.panel_of(x) {
            None => {
                if x <= self.edges[0] {
                    0.0
                } else {
                    1.0
                }
            }
            Some(k) => {
                let partial = self.unnormalized_mass(self.edges[k], x).unwrap_or(f64::NAN);
                ((self.left[k] + partial) / self.log_z.exp()).min(1.0)
            }
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match self.panel_of(x) {
            None => {
                if x <= self.edges[0] {
                    1.0
                } else {
                    0.0
                }
            }
            Some(k) => {
                let partial = self
                    .unnormalized_mass(x, self.edges[k + 1])
                    .unwrap_or(f64::NAN);
                ((self.right[k + 1] + partial) / self.log_z.exp()).min(1.0)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        let z = self.log_z.exp();
        let target = p * z;
        let k = self
            .left
            .partition_point(|m| *m < target)
            .clamp(1, self.edges.len() - 1)
            - 1;
        solve_increasing(
            |x| (self.cdf(x) - p, self.density(x)),
            self.edges[k],
            self.edges[k + 1],
            f64::NAN,
        )
    }

    pub fn inverse_sf(&self, q: f64) -> Result<f64> {
        let z = self.log_z.exp();
        let target = q * z;
        // `right` is decreasing; find the last edge with more than `target` to its right.
        let k = self
            .right
            .partition_point(|m| *m > target)
            .clamp(1, self.edges.len() - 1)
            - 1;
        solve_increasing(
            |x| (q - self.sf(x), self.density(x)),
            self.edges[k],
            self.edges[k + 1],
            f64::NAN,
        )
    }

    /// `∫ |V_N′|^p e^{-V_N}`, a monitored integrability quantity.
    pub fn gradient_moment(&self, p: f64) -> Result<f64> {
        let mut acc = 0.0;
        for w in self.edges.windows(2) {
            for (x, wt) in self.gl.mapped(w[0], w[1]) {
                let d = self.density(x);
                if d > 0.0 {
                    acc += wt * d * self.potential_d1(x).abs().powf(p);
                }
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use crate::measures::{default_catalog, make_catalog_measure};
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn uniform_smoothing_near_midpoint() {
        let u = make_catalog_measure("uniform", &[0.0, 1.0]).unwrap();
        let r = u.regularize(10).unwrap();
        assert!((r.density(0.5) - 1.0).abs() < 0.01);
        // Oracle: closed-form convolution of the indicator with a Gaussian.
        let erf_cdf = |z: f64| 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        let s = 0.1;
        let tol = Tolerance {
            abs: 1e-14,
            rel: 1e-14,
            max_segments: 4000,
        };
        let unnorm = |x: f64| (erf_cdf(x / s) - erf_cdf((x - 1.0) / s)) * (-x * x / 20.0).exp();
        let z = integrate(unnorm, -3.0, 4.0, tol).unwrap();
        for x in [-0.3, 0.0, 0.25, 0.5, 1.1] {
            let exact = unnorm(x) / z;
            assert!(
                (r.density(x) - exact).abs() <= 1e-9 * exact.max(1e-3),
                "x={x}"
            );
        }
    }

    #[test]
    fn regularized_members_are_normalized_and_curved() {
        for mu in default_catalog() {
            if mu.name() == "gaussian" {
                continue;
            }
            for n in [5u32, 20] {
                let r = mu.regularize(n).unwrap();
                let tol = Tolerance {
                    abs: 1e-13,
                    rel: 1e-12,
                    max_segments: 4000,
                };
                let (lo, hi) = match r.family() {
                    super::super::Family::Regularized(reg) => reg.table_range(),
                    _ => unreachable!(),
                };
                let mass = integrate(|x| r.density(x), lo, hi, tol).unwrap();
                assert!((mass - 1.0).abs() < 1e-8, "{} mass {mass}", r.label());
                let floor = 1.0 / n as f64;
                for k in 0..=200 {
                    let x = -10.0 + 0.1 * k as f64;
                    let c = r.potential_d2(x).unwrap();
                    assert!(c >= floor - 1e-6, "{} x={x} V''={c}", r.label());
                }
            }
        }
    }

    #[test]
    fn regularized_derivatives_match_finite_differences() {
        let mu = make_catalog_measure("exponential", &[1.0])
            .unwrap()
            .regularize(8)
            .unwrap();
        for x in [-0.2, 0.05, 0.5, 2.0] {
            let h = 1e-4;
            let fd1 = (mu.potential(x + h) - mu.potential(x - h)) / (2.0 * h);
            let fd2 = (mu.potential_d1(x + h) - mu.potential_d1(x - h)) / (2.0 * h);
            assert!(
                (fd1 - mu.potential_d1(x)).abs() < 1e-5 * fd1.abs().max(1.0),
                "x={x}"
            );
            assert!(
                (fd2 - mu.potential_d2(x).unwrap()).abs() < 1e-4 * fd2.abs().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn regularized_quantile_roundtrip() {
        let mu = make_catalog_measure("laplace", &[0.0, 1.0])
            .unwrap()
            .regularize(10)
            .unwrap();
        for p in [1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-6] {
            let x = mu.quantile(p).unwrap();
            let back = if p > 0.5 { 1.0 - mu.sf(x) } else { mu.cdf(x) };
            assert!((back - p).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn potential_converges_on_support() {
        let u = make_catalog_measure("uniform", &[0.0, 1.0]).unwrap();
        let mut prev = f64::INFINITY;
        for n in [5u32, 10, 20, 40] {
            let r = u.regularize(n).unwrap();
            let err = (0..=80)
                .map(|k| 0.1 + 0.01 * k as f64)
                .map(|x| (r.potential(x) - u.potential(x)).abs())
                .fold(0.0, f64::max);
            assert!(err < prev, "N={n}: {err} !< {prev}");
            prev = err;
        }
    }
}
