//! Log-concave probability measures with potential, CDF, quantile and sampling
//! oracles.
//!
//! A measure has density `e^{-V}` with `V` convex on its support. One-dimensional
//! members come from a fixed catalog ([`make_catalog_measure`]) or from
//! [`LogConcaveMeasure1D::regularize`]; multivariate members are Gaussian,
//! product and radially symmetric measures.

mod multivariate;
mod regularized;

pub use multivariate::{GaussianMeasure, Measure, ProductMeasure, RadialMeasure, RadialProfile};
pub use regularized::Regularized;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::roots::solve_increasing;
use rand::Rng;
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::sync::Arc;

/// Catalog family names accepted by [`make_catalog_measure`].
pub const CATALOG_NAMES: [&str; 8] = [
    "gaussian",
    "uniform",
    "exponential",
    "gamma",
    "beta",
    "logistic",
    "laplace",
    "subbotin",
];

#[derive(Debug, Clone)]
pub enum Family {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    Logistic {
        loc: f64,
        scale: f64,
    },
    Laplace {
        loc: f64,
        scale: f64,
    },
    /// Density proportional to `exp(-|x|^p / p)`.
    Subbotin {
        p: f64,
    },
    Regularized(Arc<Regularized>),
}

/// A log-concave probability measure on an interval of the real line.
#[derive(Debug, Clone)]
pub struct LogConcaveMeasure1D {
    family: Family,
    /// `log ∫ e^{-V₀}` for the unnormalized potential `V₀`; the normalized
    /// potential is `V₀ + log_norm`.
    log_norm: f64,
}

fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(what.to_string()))
    }
}

fn not_log_concave(name: &str, constraint: &str) -> Error {
    Error::NotLogConcave {
        name: name.to_string(),
        constraint: constraint.to_string(),
    }
}

/// Builds a catalog measure from its name and parameter list.
///
/// | name        | params          | constraint            |
/// |-------------|-----------------|-----------------------|
/// | gaussian    | mean, sd        | sd > 0                |
/// | uniform     | a, b            | a < b                 |
/// | exponential | rate            | rate > 0              |
/// | gamma       | shape, rate     | shape ≥ 1, rate > 0   |
/// | beta        | α, β            | α ≥ 1, β ≥ 1          |
/// | logistic    | loc, scale      | scale > 0             |
/// | laplace     | loc, scale      | scale > 0             |
/// | subbotin    | p               | p ≥ 1                 |
pub fn make_catalog_measure(name: &str, params: &[f64]) -> Result<LogConcaveMeasure1D> {
    let expect = |n: usize| -> Result<()> {
        if params.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{name} takes {n} parameter(s), got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} parameters must be finite"
            )));
        }
        Ok(())
    };
    let family = match name {
        "gaussian" => {
            expect(2)?;
            require(params[1] > 0.0, "gaussian sd must be positive")?;
            Family::Gaussian {
                mean: params[0],
                sd: params[1],
            }
        }
        "uniform" => {
            expect(2)?;
            require(params[0] < params[1], "uniform needs a < b")?;
            Family::Uniform {
                lo: params[0],
                hi: params[1],
            }
        }
        "exponential" => {
            expect(1)?;
            require(params[0] > 0.0, "exponential rate must be positive")?;
            Family::Exponential { rate: params[0] }
        }
        "gamma" => {
            expect(2)?;
            if params[0] < 1.0 {
                return Err(not_log_concave(name, "shape >= 1"));
            }
            require(params[1] > 0.0, "gamma rate must be positive")?;
            Family::Gamma {
                shape: params[0],
                rate: params[1],
            }
        }
        "beta" => {
            expect(2)?;
            if params[0] < 1.0 || params[1] < 1.0 {
                return Err(not_log_concave(name, "alpha >= 1 and beta >= 1"));
            }
            Family::Beta {
                alpha: params[0],
                beta: params[1],
            }
        }
        "logistic" => {
            expect(2)?;
            require(params[1] > 0.0, "logistic scale must be positive")?;
            Family::Logistic {
                loc: params[0],
                scale: params[1],
            }
        }
        "laplace" => {
            expect(2)?;
            require(params[1] > 0.0, "laplace scale must be positive")?;
            Family::Laplace {
                loc: params[0],
                scale: params[1],
            }
        }
        "subbotin" => {
            expect(1)?;
            if params[0] < 1.0 {
                return Err(not_log_concave(name, "p >= 1"));
            }
            Family::Subbotin { p: params[0] }
        }
        other => return Err(Error::UnknownMeasure(other.to_string())),
    };
    Ok(LogConcaveMeasure1D::from_family(family))
}

/// One representative of each catalog family, used for sweeps.
pub fn default_catalog() -> Vec<LogConcaveMeasure1D> {
    [
        ("gaussian", vec![0.0, 1.0]),
        ("uniform", vec![0.0, 1.0]),
        ("exponential", vec![1.0]),
        ("gamma", vec![2.0, 1.0]),
        ("beta", vec![2.0, 2.0]),
        ("logistic", vec![0.0, 1.0]),
        ("laplace", vec![0.0, 1.0]),
        ("subbotin", vec![3.0]),
    ]
    .iter()
    .map(|(n, p)| make_catalog_measure(n, p).expect("catalog defaults are valid"))
    .collect()
}

impl LogConcaveMeasure1D {
    fn from_family(family: Family) -> Self {
        let log_norm = match &family {
            Family::Gaussian { sd, .. } => (sd * (2.0 * PI).sqrt()).ln(),
            Family::Uniform { lo, hi } => (hi - lo).ln(),
            Family::Exponential { rate } => -rate.ln(),
            Family::Gamma { shape, rate } => ln_gamma(*shape) - shape * rate.ln(),
            Family::Beta { alpha, beta } => ln_beta(*alpha, *beta),
            Family::Logistic { scale, .. } => scale.ln(),
            Family::Laplace { scale, .. } => (2.0 * scale).ln(),
            Family::Subbotin { p } => LN_2 + p.ln() / p + ln_gamma(1.0 + 1.0 / p),
            Family::Regularized(r) => r.log_norm(),
        };
        Self { family, log_norm }
    }

    pub(crate) fn from_regularized(r: Regularized) -> Self {
        Self::from_family(Family::Regularized(Arc::new(r)))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Gaussian { .. } => "gaussian",
            Family::Uniform { .. } => "uniform",
            Family::Exponential { .. } => "exponential",
            Family::Gamma { .. } => "gamma",
            Family::Beta { .. } => "beta",
            Family::Logistic { .. } => "logistic",
            Family::Laplace { .. } => "laplace",
            Family::Subbotin { .. } => "subbotin",
            Family::Regularized(_) => "regularized",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match &self.family {
            Family::Gaussian { mean, sd } => vec![*mean, *sd],
            Family::Uniform { lo, hi } => vec![*lo, *hi],
            Family::Exponential { rate } => vec![*rate],
            Family::Gamma { shape, rate } => vec![*shape, *rate],
            Family::Beta { alpha, beta } => vec![*alpha, *beta],
            Family::Logistic { loc, scale } | Family::Laplace { loc, scale } => vec![*loc, *scale],
            Family::Subbotin { p } => vec![*p],
            Family::Regularized(r) => vec![r.level() as f64],
        }
    }

    /// Human-readable label such as `gamma(2,1)`.
    pub fn label(&self) -> String {
        match &self.family {
            Family::Regularized(r) => format!("regularized[{}](N={})", r.base().label(), r.level()),
            _ => {
                let p: Vec<String> = self.params().iter().map(|v| format!("{v}")).collect();
                format!("{}({})", self.name(), p.join(","))
            }
        }
    }

    /// Open support interval `(a, b)`.
    pub fn support(&self) -> (f64, f64) {
        match &self.family {
            Family::Uniform { lo, hi } => (*lo, *hi),
            Family::Exponential { .. } | Family::Gamma { .. } => (0.0, f64::INFINITY),
            Family::Beta { .. } => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        let (a, b) = self.support();
        x > a && x < b
    }

    /// Points where `V′` jumps or `V″` is unbounded.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            Family::Laplace { loc, .. } => vec![*loc],
            Family::Subbotin { p } if *p < 2.0 => vec![0.0],
            _ => vec![],
        }
    }

    /// Whether the catalog provides a `V″` oracle.
    pub fn has_second_derivative(&self) -> bool {
        match &self.family {
            Family::Laplace { .. } => false,
            Family::Subbotin { p } => *p >= 2.0,
            _ => true,
        }
    }

    /// Normalized potential `V = -log density`; `+∞` outside the closed support.
    pub fn potential(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x < a || x > b || x.is_nan() {
            return f64::INFINITY;
        }
        let v0 = match &self.family {
            Family::Gaussian { mean, sd } => 0.5 * ((x - mean) / sd).powi(2),
            Family::Uniform { .. } => 0.0,
            Family::Exponential { rate } => rate * x,
            Family::Gamma { shape, rate } => rate * x - xlogy(shape - 1.0, x),
            Family::Beta { alpha, beta } => -xlogy(alpha - 1.0, x) - xlogy(beta - 1.0, 1.0 - x),
            Family::Logistic { loc, scale } => {
                let z = ((x - loc) / scale).abs();
                z + 2.0 * (-z).exp().ln_1p()
            }
            Family::Laplace { loc, scale } => (x - loc).abs() / scale,
            Family::Subbotin { p } => x.abs().powf(*p) / p,
            Family::Regularized(r) => return r.potential(x),
        };
        v0 + self.log_norm
    }

    /// `V′(x)`; right derivative at kinks.
    pub fn potential_d1(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => (x - mean) / (sd * sd),
            Family::Uniform { .. } => 0.0,
            Family::Exponential { rate } => *rate,
            Family::Gamma { shape, rate } => rate - (shape - 1.0) / x,
            Family::Beta { alpha, beta } => -(alpha - 1.0) / x + (beta - 1.0) / (1.0 - x),
            Family::Logistic { loc, scale } => (0.5 * (x - loc) / scale).tanh() / scale,
            Family::Laplace { loc, scale } => {
                if x >= *loc {
                    1.0 / scale
                } else {
                    -1.0 / scale
                }
            }
            Family::Subbotin { p } => {
                if x >= 0.0 {
                    x.powf(p - 1.0)
                } else {
                    -(-x).powf(p - 1.0)
                }
            }
            Family::Regularized(r) => r.potential_d1(x),
        }
    }

    /// `V″(x)` where the family is twice differentiable.
    pub fn potential_d2(&self, x: f64) -> Option<f64> {
        if !self.has_second_derivative() {
            return None;
        }
        Some(match &self.family {
            Family::Gaussian { sd, .. } => 1.0 / (sd * sd),
            Family::Uniform { .. } | Family::Exponential { .. } => 0.0,
            Family::Gamma { shape, .. } => (shape - 1.0) / (x * x),
            Family::Beta { alpha, beta } => {
                (alpha - 1.0) / (x * x) + (beta - 1.0) / ((1.0 - x) * (1.0 - x))
            }
            Family::Logistic { loc, scale } => {
                let c = (0.5 * (x - loc) / scale).cosh();
                0.5 / (scale * scale * c * c)
            }
            Family::Subbotin { p } => {
                if *p == 2.0 {
                    1.0
                } else {
                    (p - 1.0) * x.abs().powf(p - 2.0)
                }
            }
            Family::Laplace { .. } => unreachable!(),
            Family::Regularized(r) => r.potential_d2(x),
        })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        -self.potential(x)
    }

    pub fn density(&self, x: f64) -> f64 {
        (-self.potential(x)).exp()
    }

    /// `P(X ≤ x)`; 0 below and 1 above the support.
    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        match &self.family {
            Family::Gaussian { mean, sd } => 0.5 * erfc(-(x - mean) / (sd * SQRT_2)),
            Family::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Family::Exponential { rate } => -(-rate * x).exp_m1(),
            Family::Gamma { shape, rate } => gamma_lr(*shape, rate * x),
            Family::Beta { alpha, beta } => beta_reg(*alpha, *beta, x),
            Family::Logistic { loc, scale } => 1.0 / (1.0 + (-(x - loc) / scale).exp()),
            Family::Laplace { loc, scale } => {
                if x < *loc {
                    0.5 * ((x - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(x - loc) / scale).exp()
                }
            }
            Family::Subbotin { p } => {
                let t = x.abs().powf(*p) / p;
                if x >= 0.0 {
                    0.5 + 0.5 * gamma_lr(1.0 / p, t)
                } else {
                    0.5 * gamma_ur(1.0 / p, t)
                }
            }
            Family::Regularized(r) => r.cdf(x),
        }
    }

    /// `P(X > x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 1.0;
        }
        if x >= b {
            return 0.0;
        }
        match &self.family {
            Family::Gaussian { mean, sd } => 0.5 * erfc((x - mean) / (sd * SQRT_2)),
            Family::Uniform { lo, hi } => (hi - x) / (hi - lo),
            Family::Exponential { rate } => (-rate * x).exp(),
            Family::Gamma { shape, rate } => gamma_ur(*shape, rate * x),
            Family::Beta { alpha, beta } => beta_reg(*beta, *alpha, 1.0 - x),
            Family::Logistic { loc, scale } => 1.0 / (1.0 + ((x - loc) / scale).exp()),
            Family::Laplace { loc, scale } => {
                if x >= *loc {
                    0.5 * (-(x - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * ((x - loc) / scale).exp()
                }
            }
            Family::Subbotin { .. } => {
                // Symmetric about 0.
                self.cdf(-x)
            }
            Family::Regularized(r) => r.sf(x),
        }
    }

    fn check_level(p: f64) -> Result<()> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside (0, 1)"
            )));
        }
        Ok(())
    }

    /// Inverse CDF. Closed forms where available, otherwise safeguarded Newton
    /// on the CDF with bisection fallback. Levels above 1/2 are routed through
    /// the survival function for tail accuracy.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        Self::check_level(p)?;
        if p > 0.5 {
            return self.inverse_sf(1.0 - p);
        }
        match &self.family {
            Family::Uniform { lo, hi } => Ok(lo + p * (hi - lo)),
            Family::Exponential { rate } => Ok(-(-p).ln_1p() / rate),
            Family::Logistic { loc, scale } => Ok(loc + scale * (p / (1.0 - p)).ln()),
            Family::Laplace { loc, scale } => Ok(loc + scale * (2.0 * p).ln()),
            Family::Regularized(r) => r.quantile(p),
            Family::Gaussian { mean, sd } => {
                let guess = mean - sd * SQRT_2 * erfc_inv(2.0 * p);
                self.newton_cdf(p, guess)
            }
            _ => {
                let guess = self.median_guess();
                self.newton_cdf(p, guess)
            }
        }
    }

    /// `x` with `P(X > x) = q`.
    pub fn inverse_sf(&self, q: f64) -> Result<f64> {
        Self::check_level(q)?;
        if q > 0.5 {
            return self.quantile(1.0 - q);
        }
        match &self.family {
            Family::Uniform { lo, hi } => Ok(hi - q * (hi - lo)),
            Family::Exponential { rate } => Ok(-q.ln() / rate),
            Family::Logistic { loc, scale } => Ok(loc + scale * ((1.0 - q) / q).ln()),
            Family::Laplace { loc, scale } => Ok(loc - scale * (2.0 * q).ln()),
            Family::Subbotin { .. } => Ok(-self.quantile(q)?),
            Family::Regularized(r) => r.inverse_sf(q),
            Family::Gaussian { mean, sd } => {
                let guess = mean + sd * SQRT_2 * erfc_inv(2.0 * q);
                self.newton_sf(q, guess)
            }
            _ => {
                let guess = self.median_guess();
                self.newton_sf(q, guess)
            }
        }
    }

    fn median_guess(&self) -> f64 {
        match &self.family {
            Family::Gamma { shape, rate } => shape / rate,
            Family::Beta { alpha, beta } => alpha / (alpha + beta),
            Family::Gaussian { mean, .. } => *mean,
            _ => 0.0,
        }
    }

    fn newton_cdf(&self, p: f64, guess: f64) -> Result<f64> {
        let (a, b) = self.support();
        solve_increasing(|x| (self.cdf(x) - p, self.density(x)), a, b, guess)
    }

    fn newton_sf(&self, q: f64, guess: f64) -> Result<f64> {
        let (a, b) = self.support();
        solve_increasing(|x| (q - self.sf(x), self.density(x)), a, b, guess)
    }

    /// Inverse-CDF sample from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                if let Ok(x) = self.quantile(u) {
                    return x;
                }
            }
        }
    }

    /// `|∫ e^{-V} − 1|` by adaptive quadrature over the support.
    pub fn normalization_error(&self) -> Result<f64> {
        let (a, b) = self.support();
        let mut breaks = vec![a];
        breaks.extend(self.kinks().into_iter().filter(|k| *k > a && *k < b));
        breaks.push(b);
        let tol = Tolerance {
            abs: 1e-13,
            rel: 1e-13,
            max_segments: 4000,
        };
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += quadrature::integrate(|x| self.density(x), w[0], w[1], tol)?;
        }
        Ok((total - 1.0).abs())
    }

    /// Minimum of `V″` over `points` equally spaced nodes of `[lo, hi]`
    /// intersected with the support, or `None` without a `V″` oracle.
    pub fn min_curvature(&self, lo: f64, hi: f64, points: usize) -> Option<f64> {
        if !self.has_second_derivative() || points < 2 {
            return None;
        }
        let (a, b) = self.support();
        let min = (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .filter(|&x| x > a && x < b)
            .filter_map(|x| self.potential_d2(x))
            .fold(f64::INFINITY, f64::min);
        Some(min)
    }

    /// Minimum of `V″` on a 1000-point grid spanning the central
    /// `[1e-6, 1 − 1e-6]` quantile range.
    pub fn log_concavity_margin(&self) -> Result<Option<f64>> {
        let lo = self.quantile(1e-6)?;
        let hi = self.quantile(1.0 - 1e-6)?;
        Ok(self.min_curvature(lo, hi, 1000))
    }

    /// Smoothed and damped version of the measure: density proportional to
    /// `(e^{-V} * φ_{1/N})(x) · exp(−x²/(2N))`, where `φ_s` is the centred
    /// normal density with standard deviation `s`.
    ///
    /// The result has full support, a smooth potential and `V_N″ ≥ 1/N`.
    /// Gaussian inputs stay Gaussian and are returned in closed form.
    pub fn regularize(&self, n: u32) -> Result<LogConcaveMeasure1D> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "regularization level must be >= 1".into(),
            ));
        }
        let s2 = 1.0 / (n as f64 * n as f64);
        let damping = n as f64;
        match &self.family {
            Family::Gaussian { mean, sd } => {
                let smoothed = sd * sd + s2;
                let precision = 1.0 / smoothed + 1.0 / damping;
                let new_mean = (mean / smoothed) / precision;
                make_catalog_measure("gaussian", &[new_mean, precision.recip().sqrt()])
            }
            Family::Regularized(_) => Err(Error::Unsupported(
                "regularizing a regularized measure".into(),
            )),
            _ => Ok(Self::from_regularized(Regularized::new(self.clone(), n)?)),
        }
    }
}

/// Regularized lower incomplete gamma `P(a, x)`, total on `x ≥ 0`.
pub(crate) fn gamma_lr(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        statrs::function::gamma::gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`, total on `x ≥ 0`.
pub(crate) fn gamma_ur(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        statrs::function::gamma::gamma_ur(a, x)
    }
}

/// `a·log(x)` with the convention `0·log(0) = 0`.
fn xlogy(a: f64, x: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * x.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(name: &str, p: &[f64]) -> LogConcaveMeasure1D {
        make_catalog_measure(name, p).unwrap()
    }

    #[test]
    fn catalog_validation() {
        assert!(matches!(
            make_catalog_measure("gamma", &[0.5, 1.0]),
            Err(Error::NotLogConcave { .. })
        ));
        assert!(matches!(
            make_catalog_measure("beta", &[0.9, 2.0]),
            Err(Error::NotLogConcave { .. })
        ));
        assert!(matches!(
            make_catalog_measure("subbotin", &[0.5]),
            Err(Error::NotLogConcave { .. })
        ));
        assert!(matches!(
            make_catalog_measure("cauchy", &[0.0, 1.0]),
            Err(Error::UnknownMeasure(_))
        ));
        assert!(make_catalog_measure("gaussian", &[0.0]).is_err());
        assert!(make_catalog_measure("uniform", &[1.0, 0.0]).is_err());
    }

    #[test]
    fn standard_gaussian_potential() {
        let g = m("gaussian", &[0.0, 1.0]);
        for x in [-2.0, 0.0, 1.5] {
            let expected = 0.5 * x * x + (2.0 * PI).sqrt().ln();
            assert!((g.potential(x) - expected).abs() < 1e-15);
            assert_eq!(g.potential_d1(x), x);
        }
    }

    #[test]
    fn every_catalog_member_is_normalized() {
        for mu in default_catalog() {
            assert!(mu.normalization_error().unwrap() < 1e-8, "{}", mu.label());
        }
        let b = m("beta", &[2.0, 2.0]);
        assert!((b.density(0.3) - 6.0 * 0.3 * 0.7).abs() < 1e-14);
        for (n, p) in [
            ("gamma", vec![3.5, 2.0]),
            ("beta", vec![1.5, 4.0]),
            ("subbotin", vec![1.3]),
        ] {
            assert!(m(n, &p).normalization_error().unwrap() < 1e-8, "{n}");
        }
    }

    #[test]
    fn derivative_oracles_match_finite_differences() {
        for mu in default_catalog() {
            let xs: Vec<f64> = [0.2, 0.45, 0.7]
                .iter()
                .map(|&p| mu.quantile(p).unwrap())
                .collect();
            for x in xs {
                if mu.kinks().iter().any(|k| (k - x).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-5;
                let fd1 = (mu.potential(x + h) - mu.potential(x - h)) / (2.0 * h);
                assert!(
                    (fd1 - mu.potential_d1(x)).abs() < 1e-6,
                    "{} at {x}",
                    mu.label()
                );
                if let Some(d2) = mu.potential_d2(x) {
                    let fd2 = (mu.potential_d1(x + h) - mu.potential_d1(x - h)) / (2.0 * h);
                    assert!((fd2 - d2).abs() < 1e-6, "{} at {x}", mu.label());
                }
            }
        }
    }

    #[test]
    fn second_derivative_absent_for_kinked_members() {
        assert!(m("laplace", &[0.0, 1.0]).potential_d2(0.3).is_none());
        assert!(m("subbotin", &[1.5]).potential_d2(0.3).is_none());
        assert!(m("subbotin", &[2.0]).potential_d2(0.3).is_some());
    }

    #[test]
    fn closed_form_quantiles() {
        let u = m("uniform", &[0.0, 1.0]);
        assert_eq!(u.cdf(0.3), 0.3);
        assert!((u.quantile(0.3).unwrap() - 0.3).abs() < 1e-16);
        let e = m("exponential", &[1.0]);
        for p in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
            assert!((e.quantile(p).unwrap() + (1.0 - p).ln()).abs() < 1e-9);
        }
        assert!(u.quantile(0.0).is_err() && u.quantile(1.0).is_err());
        assert_eq!(u.cdf(-1.0), 0.0);
        assert_eq!(u.cdf(2.0), 1.0);
    }

    #[test]
    fn gaussian_quantile_against_quadrature_oracle() {
        // Oracle: root of an independently integrated CDF.
        let g = m("gaussian", &[0.0, 1.0]);
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-15,
            max_segments: 4000,
        };
        let cdf = |x: f64| {
            0.5 + quadrature::integrate(|t| (-0.5 * t * t).exp() / (2.0 * PI).sqrt(), 0.0, x, tol)
                .unwrap()
        };
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = g.quantile(0.975).unwrap();
        assert!((q - lo).abs() < 1e-9);
        assert!((q - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn quantile_roundtrip_across_catalog() {
        let mut levels = vec![1e-6, 1.0 - 1e-6];
        levels.extend((1..100).map(|k| k as f64 / 100.0));
        for mu in default_catalog() {
            for &p in &levels {
                let x = mu.quantile(p).unwrap();
                let back = if p > 0.5 { 1.0 - mu.sf(x) } else { mu.cdf(x) };
                assert!((back - p).abs() <= 1e-9, "{} p={p}", mu.label());
            }
        }
    }

    #[test]
    fn uniform_sample_is_inverse_cdf() {
        struct Fixed;
        impl rand::RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                unimplemented!()
            }
            fn next_u64(&mut self) -> u64 {
                // 0.3 in the 53-bit mantissa convention used by `random::<f64>()`.
                ((0.3f64 * (1u64 << 53) as f64) as u64) << 11
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                unimplemented!()
            }
        }
        let u = m("uniform", &[0.0, 1.0]);
        assert!((u.sample(&mut Fixed) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn gaussian_sample_mean_clt() {
        let g = m("gaussian", &[0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let mean = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.004, "{mean}");
    }

    #[test]
    fn log_concavity_on_grid() {
        for mu in default_catalog() {
            if let Some(margin) = mu.log_concavity_margin().unwrap() {
                assert!(margin >= -1e-9, "{}", mu.label());
            }
        }
    }

    #[test]
    fn gaussian_regularization_is_closed_form() {
        let g = m("gaussian", &[0.0, 1.0]);
        for n in [1, 2, 5, 40] {
            let r = g.regularize(n).unwrap();
            assert_eq!(r.name(), "gaussian");
            let var = r.params()[1].powi(2);
            assert!(var > 0.0 && var <= 1.0);
            assert!(r.normalization_error().unwrap() < 1e-10);
            assert!(r.potential_d2(0.0).unwrap() >= 1.0 / n as f64);
        }
        assert!(g.regularize(0).is_err());
    }
}
