//! Multivariate log-concave measures: Gaussian, product and radial.

use super::LogConcaveMeasure1D;
use super::{gamma_lr, gamma_ur};
use crate::error::{Error, Result};
use crate::roots::solve_increasing;
use crate::spd_geometry::SpdMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    mean: Vec<f64>,
    covariance: SpdMatrix,
    precision: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianMeasure {
    pub fn new(mean: Vec<f64>, covariance: SpdMatrix) -> Result<Self> {
        let n = covariance.dim();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        let log_det: f64 = covariance.eigenvalues().iter().map(|l| l.ln()).sum();
        Ok(Self {
            precision: covariance.power_matrix(-1.0),
            sqrt_cov: covariance.power_matrix(0.5),
            log_norm: 0.5 * (n as f64 * (2.0 * PI).ln() + log_det),
            mean,
            covariance,
        })
    }

    pub fn standard(n: usize) -> Self {
        Self::new(vec![0.0; n], SpdMatrix::identity(n)).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `(x − m)ᵗ Σ⁻¹ (x − m)`.
    pub fn mahalanobis2(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        (&self.precision * &d).dot(&d)
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        0.5 * self.mahalanobis2(x) + self.log_norm
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, b)| a - b));
        (&self.precision * d).iter().copied().collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::<f64>::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        let y = &self.sqrt_cov * z;
        y.iter().zip(&self.mean).map(|(a, b)| a + b).collect()
    }
}

/// Independent coordinates with one-dimensional factors.
#[derive(Debug, Clone)]
pub struct ProductMeasure {
    factors: Vec<LogConcaveMeasure1D>,
}

impl ProductMeasure {
    pub fn new(factors: Vec<LogConcaveMeasure1D>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "product measure needs at least one factor".into(),
            ));
        }
        Ok(Self { factors })
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[LogConcaveMeasure1D] {
        &self.factors
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.potential(*xi))
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.potential_d1(*xi))
            .collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let d: Option<Vec<f64>> = self
            .factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.potential_d2(*xi))
            .collect();
        d.map(|d| DMatrix::from_diagonal(&DVector::from_vec(d)))
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        self.factors.iter().zip(x).all(|(f, xi)| f.in_support(*xi))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factors.iter().map(|f| f.sample(rng)).collect()
    }
}

/// Radial potential profile `v(r)`, with density `∝ e^{-v(|x|)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    /// Uniform on the centred ball of the given radius.
    UniformBall { radius: f64 },
    /// `v(r) = (r/scale)^p / p` with `p ≥ 1`; `p = 2` is a centred Gaussian
    /// with standard deviation `scale`.
    ExpPower { p: f64, scale: f64 },
}

/// Rotation-invariant log-concave measure on `ℝⁿ`.
#[derive(Debug, Clone)]
pub struct RadialMeasure {
    dim: usize,
    profile: RadialProfile,
    log_norm: f64,
}

/// `log |S^{n−1}|`, the log surface area of the unit sphere in `ℝⁿ`.
fn log_sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    (2.0f64).ln() + h * PI.ln() - ln_gamma(h)
}

impl RadialMeasure {
    pub fn new(dim: usize, profile: RadialProfile) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "radial measure needs dim >= 1".into(),
            ));
        }
        let n = dim as f64;
        let log_norm = match profile {
            RadialProfile::UniformBall { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidArgument(
                        "ball radius must be positive".into(),
                    ));
                }
                log_sphere_area(dim) - n.ln() + n * radius.ln()
            }
            RadialProfile::ExpPower { p, scale } => {
                if p < 1.0 {
                    return Err(Error::NotLogConcave {
                        name: "radial exp-power".into(),
                        constraint: "p >= 1".into(),
                    });
                }
                if !(scale > 0.0) {
                    return Err(Error::InvalidArgument(
                        "radial scale must be positive".into(),
                    ));
                }
                log_sphere_area(dim) + n * scale.ln() + (n / p - 1.0) * p.ln() + ln_gamma(n / p)
            }
        };
        Ok(Self {
            dim,
            profile,
            log_norm,
        })
    }

    pub fn uniform_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, RadialProfile::UniformBall { radius })
    }

    pub fn gaussian(dim: usize, sd: f64) -> Result<Self> {
        Self::new(dim, RadialProfile::ExpPower { p: 2.0, scale: sd })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> RadialProfile {
        self.profile
    }

    pub fn label(&self) -> String {
        match self.profile {
            RadialProfile::UniformBall { radius } => format!("ball(n={},R={radius})", self.dim),
            RadialProfile::ExpPower { p, scale } => {
                format!("exp-power(n={},p={p},s={scale})", self.dim)
            }
        }
    }

    /// Radius of the support (infinite for exp-power profiles).
    pub fn support_radius(&self) -> f64 {
        match self.profile {
            RadialProfile::UniformBall { radius } => radius,
            RadialProfile::ExpPower { .. } => f64::INFINITY,
        }
    }

    /// `v(r)` without the normalizing constant.
    pub fn radial_potential(&self, r: f64) -> f64 {
        match self.profile {
            RadialProfile::UniformBall { radius } => {
                if r <= radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RadialProfile::ExpPower { p, scale } => (r / scale).powf(p) / p,
        }
    }

    pub fn radial_potential_d1(&self, r: f64) -> f64 {
        match self.profile {
            RadialProfile::UniformBall { .. } => 0.0,
            RadialProfile::ExpPower { p, scale } => (r / scale).powf(p - 1.0) / scale,
        }
    }

    pub fn radial_potential_d2(&self, r: f64) -> f64 {
        match self.profile {
            RadialProfile::UniformBall { .. } => 0.0,
            RadialProfile::ExpPower { p, scale } => {
                if p == 2.0 {
                    1.0 / (scale * scale)
                } else {
                    (p - 1.0) * (r / scale).powf(p - 2.0) / (scale * scale)
                }
            }
        }
    }

    /// Mass of the centred ball of radius `r`.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let n = self.dim as f64;
        match self.profile {
            RadialProfile::UniformBall { radius } => (r / radius).min(1.0).powf(n),
            RadialProfile::ExpPower { p, scale } => gamma_lr(n / p, (r / scale).powf(p) / p),
        }
    }

    /// Mass outside the centred ball of radius `r`.
    pub fn radial_sf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        let n = self.dim as f64;
        match self.profile {
            RadialProfile::UniformBall { radius } => {
                if r >= radius {
                    0.0
                } else {
                    -(n * (r / radius).ln()).exp_m1()
                }
            }
            RadialProfile::ExpPower { p, scale } => gamma_ur(n / p, (r / scale).powf(p) / p),
        }
    }

    /// Log of the radial density `d/dr radial_cdf(r)`.
    pub fn log_radial_density(&self, r: f64) -> f64 {
        if r <= 0.0 || r >= self.support_radius() {
            return f64::NEG_INFINITY;
        }
        let n = self.dim as f64;
        log_sphere_area(self.dim) + (n - 1.0) * r.ln() - self.radial_potential(r) - self.log_norm
    }

    /// `d/dr log` of the radial density: `(n−1)/r − v′(r)`.
    pub fn log_radial_density_d1(&self, r: f64) -> f64 {
        (self.dim as f64 - 1.0) / r - self.radial_potential_d1(r)
    }

    /// Density at the origin, `e^{-V(0)}`.
    pub fn density_at_origin(&self) -> f64 {
        (-self.radial_potential(0.0) - self.log_norm).exp()
    }

    pub fn radial_quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside (0, 1)"
            )));
        }
        let n = self.dim as f64;
        if p > 0.5 {
            return self.radial_inverse_sf(1.0 - p);
        }
        match self.profile {
            RadialProfile::UniformBall { radius } => Ok(radius * p.powf(1.0 / n)),
            RadialProfile::ExpPower { .. } => solve_increasing(
                |r| (self.radial_cdf(r) - p, self.log_radial_density(r).exp()),
                0.0,
                f64::INFINITY,
                self.typical_radius(),
            ),
        }
    }

    pub fn radial_inverse_sf(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {q} outside (0, 1)"
            )));
        }
        let n = self.dim as f64;
        if q > 0.5 {
            return self.radial_quantile(1.0 - q);
        }
        match self.profile {
            RadialProfile::UniformBall { radius } => Ok(radius * ((-q).ln_1p() / n).exp()),
            RadialProfile::ExpPower { .. } => solve_increasing(
                |r| (q - self.radial_sf(r), self.log_radial_density(r).exp()),
                0.0,
                f64::INFINITY,
                self.typical_radius(),
            ),
        }
    }

    fn typical_radius(&self) -> f64 {
        match self.profile {
            RadialProfile::UniformBall { radius } => 0.5 * radius,
            RadialProfile::ExpPower { scale, p } => scale * (self.dim as f64).powf(1.0 / p),
        }
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.radial_potential(crate::linalg::norm(x)) + self.log_norm
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::linalg::norm(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let c = self.radial_potential_d1(r) / r;
        x.iter().map(|xi| c * xi).collect()
    }

    /// `v″ x̂x̂ᵗ + (v′/r)(I − x̂x̂ᵗ)`; at the origin the limit `v″(0)·I`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let r = crate::linalg::norm(x);
        let d2 = self.radial_potential_d2(r);
        if r == 0.0 {
            return DMatrix::identity(n, n) * d2;
        }
        let t = self.radial_potential_d1(r) / r;
        DMatrix::from_fn(n, n, |i, j| {
            let proj = x[i] * x[j] / (r * r);
            d2 * proj + t * ((i == j) as u8 as f64 - proj)
        })
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        crate::linalg::norm(x) < self.support_radius()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dir: Vec<f64> = loop {
            let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let nz = crate::linalg::norm(&z);
            if nz > 1e-300 {
                break z.into_iter().map(|v| v / nz).collect();
            }
        };
        let r = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                if let Ok(r) = self.radial_quantile(u) {
                    break r;
                }
            }
        };
        dir.into_iter().map(|d| d * r).collect()
    }
}

/// Any measure the library can transport or discretize.
#[derive(Debug, Clone)]
pub enum Measure {
    OneD(LogConcaveMeasure1D),
    Gaussian(GaussianMeasure),
    Product(ProductMeasure),
    Radial(RadialMeasure),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::OneD(_) => 1,
            Measure::Gaussian(g) => g.dim(),
            Measure::Product(p) => p.dim(),
            Measure::Radial(r) => r.dim(),
        }
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        match self {
            Measure::OneD(m) => m.potential(x[0]),
            Measure::Gaussian(g) => g.potential(x),
            Measure::Product(p) => p.potential(x),
            Measure::Radial(r) => r.potential(x),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        (-self.potential(x)).exp()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Measure::OneD(m) => vec![m.potential_d1(x[0])],
            Measure::Gaussian(g) => g.gradient(x),
            Measure::Product(p) => p.gradient(x),
            Measure::Radial(r) => r.gradient(x),
        }
    }

    /// `D²V(x)` if all components are twice differentiable.
    pub fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        match self {
            Measure::OneD(m) => m.potential_d2(x[0]).map(|v| DMatrix::from_element(1, 1, v)),
            Measure::Gaussian(g) => Some(g.precision().clone()),
            Measure::Product(p) => p.hessian(x),
            Measure::Radial(r) => Some(r.hessian(x)),
        }
    }

    pub fn in_support(&self, x: &[f64]) -> bool {
        match self {
            Measure::OneD(m) => m.in_support(x[0]),
            Measure::Gaussian(_) => true,
            Measure::Product(p) => p.in_support(x),
            Measure::Radial(r) => r.in_support(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Measure::OneD(m) => vec![m.sample(rng)],
            Measure::Gaussian(g) => g.sample(rng),
            Measure::Product(p) => p.sample(rng),
            Measure::Radial(r) => r.sample(rng),
        }
    }
}
