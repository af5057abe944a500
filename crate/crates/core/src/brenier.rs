//! Brenier maps `∇Φ` with evaluable Hessians `D²Φ` for measure pairs that admit
//! exact or quadrature-exact constructions: one-dimensional monotone
//! rearrangement, Gaussian linear maps, coordinatewise products and radial
//! maps.

use crate::error::{Error, Result};
use crate::linalg::Tensor3;
use crate::measures::{
    GaussianMeasure, LogConcaveMeasure1D, Measure, ProductMeasure, RadialMeasure,
};
use crate::roots::solve_increasing;
use crate::spd_geometry::{log_eigen_map, LogSpectrum, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    #[serde(rename = "1d")]
    OneD,
    GaussianLinear,
    Product,
    Radial,
    EntropicGrid,
}

/// An evaluable Brenier map `x ↦ ∇Φ(x)` with Hessian oracle `x ↦ D²Φ(x)`.
pub trait TransportMap: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> MapKind;
    fn label(&self) -> String;
    /// `∇Φ(x)`.
    fn map(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `D²Φ(x)`.
    fn hessian(&self, x: &[f64]) -> Result<SpdMatrix>;
    /// Source potential `V`, with `dμ = e^{-V}dx`.
    fn source_potential(&self, x: &[f64]) -> f64;
    /// Target potential `W`, with `dν = e^{-W}dx`.
    fn target_potential(&self, y: &[f64]) -> f64;
    fn in_source_support(&self, x: &[f64]) -> bool;
    fn sample_source(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

fn check_point(tm: &dyn TransportMap, x: &[f64]) -> Result<()> {
    if x.len() != tm.dim() {
        return Err(Error::DimensionMismatch {
            expected: tm.dim(),
            got: x.len(),
        });
    }
    if !tm.in_source_support(x) {
        return Err(Error::OutsideSupport { x: x.to_vec() });
    }
    Ok(())
}

/// Residual `V(x) + log det D²Φ(x) − W(∇Φ(x))` of the transport equation.
pub fn transport_residual(tm: &dyn TransportMap, x: &[f64]) -> Result<f64> {
    check_point(tm, x)?;
    let h = tm.hessian(x)?;
    let log_det: f64 = h.eigenvalues().iter().map(|l| l.ln()).sum();
    let y = tm.map(x)?;
    Ok(tm.source_potential(x) + log_det - tm.target_potential(&y))
}

/// `Λ(D²Φ(x))`.
pub fn hessian_spectrum_at(tm: &dyn TransportMap, x: &[f64]) -> Result<LogSpectrum> {
    check_point(tm, x)?;
    Ok(log_eigen_map(&tm.hessian(x)?))
}

/// Monotone rearrangement `T = G⁻¹ ∘ F` between two 1D measures.
#[derive(Debug, Clone)]
pub struct Map1D {
    mu: LogConcaveMeasure1D,
    nu: LogConcaveMeasure1D,
}

pub fn brenier_1d(mu: LogConcaveMeasure1D, nu: LogConcaveMeasure1D) -> Map1D {
    Map1D { mu, nu }
}

impl Map1D {
    pub fn source(&self) -> &LogConcaveMeasure1D {
        &self.mu
    }

    pub fn target(&self) -> &LogConcaveMeasure1D {
        &self.nu
    }

    /// `T(x)`, routed through survival functions in the upper half for tail
    /// accuracy.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.mu.in_support(x) {
            return Err(Error::OutsideSupport { x: vec![x] });
        }
        let p = self.mu.cdf(x);
        if p <= 0.5 {
            if p <= 0.0 {
                return Err(Error::OutsideSupport { x: vec![x] });
            }
            self.nu.quantile(p)
        } else {
            let q = self.mu.sf(x);
            if q <= 0.0 {
                return Err(Error::OutsideSupport { x: vec![x] });
            }
            self.nu.inverse_sf(q)
        }
    }

    /// `T` at probability level `p`, i.e. the pair `(F⁻¹(p), G⁻¹(p))`.
    pub fn at_level(&self, p: f64) -> Result<(f64, f64)> {
        Ok((self.mu.quantile(p)?, self.nu.quantile(p)?))
    }

    /// `Φ″(x) = exp(−V(x) + W(T(x)))`, from the transport equation.
    pub fn phi_d2(&self, x: f64) -> Result<f64> {
        let t = self.eval(x)?;
        Ok(self.phi_d2_given(x, t))
    }

    fn phi_d2_given(&self, x: f64, t: f64) -> f64 {
        (-self.mu.potential(x) + self.nu.potential(t)).exp()
    }

    /// `Φ‴(x) = Φ″(x)·(−V′(x) + W′(T(x))·Φ″(x))`.
    pub fn phi_d3(&self, x: f64) -> Result<f64> {
        let t = self.eval(x)?;
        let a = self.phi_d2_given(x, t);
        Ok(a * (-self.mu.potential_d1(x) + self.nu.potential_d1(t) * a))
    }

    /// `log Φ″` at level `p`, as `log f(F⁻¹(p)) − log g(G⁻¹(p))`.
    pub fn log_phi_d2_at_level(&self, p: f64) -> Result<f64> {
        let (x, t) = self.at_level(p)?;
        Ok(-self.mu.potential(x) + self.nu.potential(t))
    }
}

impl TransportMap for Map1D {
    fn dim(&self) -> usize {
        1
    }
    fn kind(&self) -> MapKind {
        MapKind::OneD
    }
    fn label(&self) -> String {
        format!("{} -> {}", self.mu.label(), self.nu.label())
    }
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.eval(x[0])?])
    }
    fn hessian(&self, x: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::from_diagonal(&[self.phi_d2(x[0])?])
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.mu.potential(x[0])
    }
    fn target_potential(&self, y: &[f64]) -> f64 {
        self.nu.potential(y[0])
    }
    fn in_source_support(&self, x: &[f64]) -> bool {
        self.mu.in_support(x[0])
    }
    fn sample_source(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![self.mu.sample(rng)]
    }
}

/// Linear map `T(x) = A(x − m₁) + m₂` between Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMap {
    mu: GaussianMeasure,
    nu: GaussianMeasure,
    a: SpdMatrix,
}

pub fn brenier_gaussian(mu: GaussianMeasure, nu: GaussianMeasure) -> Result<GaussianMap> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    let s1 = mu.covariance();
    let r = s1.power_matrix(0.5);
    let r_inv = s1.power_matrix(-0.5);
    let middle = SpdMatrix::new(&r * nu.covariance().matrix() * &r)?;
    let a = SpdMatrix::new(&r_inv * middle.power_matrix(0.5) * &r_inv)?;
    Ok(GaussianMap { mu, nu, a })
}

impl GaussianMap {
    pub fn matrix(&self) -> &SpdMatrix {
        &self.a
    }

    pub fn source(&self) -> &GaussianMeasure {
        &self.mu
    }

    pub fn target(&self) -> &GaussianMeasure {
        &self.nu
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_iterator(x.len(), x.iter().zip(self.mu.mean()).map(|(a, b)| a - b));
        let y = self.a.matrix() * d;
        y.iter().zip(self.nu.mean()).map(|(a, b)| a + b).collect()
    }
}

impl TransportMap for GaussianMap {
    fn dim(&self) -> usize {
        self.mu.dim()
    }
    fn kind(&self) -> MapKind {
        MapKind::GaussianLinear
    }
    fn label(&self) -> String {
        format!(
            "gaussian(n={}) -> gaussian(n={})",
            self.mu.dim(),
            self.nu.dim()
        )
    }
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply(x))
    }
    fn hessian(&self, _x: &[f64]) -> Result<SpdMatrix> {
        Ok(self.a.clone())
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.mu.potential(x)
    }
    fn target_potential(&self, y: &[f64]) -> f64 {
        self.nu.potential(y)
    }
    fn in_source_support(&self, _x: &[f64]) -> bool {
        true
    }
    fn sample_source(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mu.sample(rng)
    }
}

/// Coordinatewise product of 1D maps.
#[derive(Debug, Clone)]
pub struct ProductMap {
    factors: Vec<Map1D>,
    source: ProductMeasure,
    target: ProductMeasure,
}

pub fn brenier_product(factors: Vec<Map1D>) -> Result<ProductMap> {
    let source = ProductMeasure::new(factors.iter().map(|f| f.mu.clone()).collect())?;
    let target = ProductMeasure::new(factors.iter().map(|f| f.nu.clone()).collect())?;
    Ok(ProductMap {
        factors,
        source,
        target,
    })
}

impl ProductMap {
    pub fn factors(&self) -> &[Map1D] {
        &self.factors
    }

    pub fn source(&self) -> &ProductMeasure {
        &self.source
    }

    pub fn target(&self) -> &ProductMeasure {
        &self.target
    }

    pub fn phi_d2(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.phi_d2(*xi))
            .collect()
    }

    pub fn phi_d3(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.phi_d3(*xi))
            .collect()
    }
}

impl TransportMap for ProductMap {
    fn dim(&self) -> usize {
        self.factors.len()
    }
    fn kind(&self) -> MapKind {
        MapKind::Product
    }
    fn label(&self) -> String {
        let parts: Vec<String> = self.factors.iter().map(|f| f.label()).collect();
        format!("product[{}]", parts.join("; "))
    }
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.eval(*xi))
            .collect()
    }
    fn hessian(&self, x: &[f64]) -> Result<SpdMatrix> {
        SpdMatrix::from_diagonal(&self.phi_d2(x)?)
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.source.potential(x)
    }
    fn target_potential(&self, y: &[f64]) -> f64 {
        self.target.potential(y)
    }
    fn in_source_support(&self, x: &[f64]) -> bool {
        self.source.in_support(x)
    }
    fn sample_source(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.source.sample(rng)
    }
}

const RADIAL_CACHE_NODES: usize = 10_000;
/// Below this radius the map is evaluated through its `r → 0` limit.
const RADIAL_ORIGIN: f64 = 1e-7;

/// Radial map `x ↦ φ(|x|) x/|x|` with radial mass balance
/// `F_μ(r) = F_ν(φ(r))`.
#[derive(Debug, Clone)]
pub struct RadialMap {
    mu: RadialMeasure,
    nu: RadialMeasure,
    radii: Vec<f64>,
    profile: Vec<f64>,
    slope_at_origin: f64,
}

/// Radial derivatives of the profile: `φ, φ′, φ″`.
#[derive(Debug, Clone, Copy)]
pub struct RadialJet {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn brenier_radial(mu: RadialMeasure, nu: RadialMeasure) -> Result<RadialMap> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: nu.dim(),
        });
    }
    if mu.dim() < 2 {
        return Err(Error::InvalidArgument("radial maps need n >= 2".into()));
    }
    let n = mu.dim() as f64;
    let slope_at_origin = (mu.density_at_origin() / nu.density_at_origin()).powf(1.0 / n);
    let r_max = if mu.support_radius().is_finite() {
        mu.support_radius()
    } else {
        mu.radial_inverse_sf(1e-16)?
    };
    let mut map = RadialMap {
        mu,
        nu,
        radii: vec![],
        profile: vec![],
        slope_at_origin,
    };
    let radii: Vec<f64> = (0..RADIAL_CACHE_NODES)
        .map(|k| r_max * k as f64 / RADIAL_CACHE_NODES as f64)
        .collect();
    let profile = radii
        .iter()
        .map(|&r| {
            if r == 0.0 {
                Ok(0.0)
            } else {
                map.solve_profile(r, None)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    map.radii = radii;
    map.profile = profile;
    Ok(map)
}

impl RadialMap {
    pub fn source(&self) -> &RadialMeasure {
        &self.mu
    }

    pub fn target(&self) -> &RadialMeasure {
        &self.nu
    }

    /// `φ′(0) = (ρ_μ(0)/ρ_ν(0))^{1/n}`.
    pub fn slope_at_origin(&self) -> f64 {
        self.slope_at_origin
    }

    fn solve_profile(&self, r: f64, bracket: Option<(f64, f64, f64)>) -> Result<f64> {
        let (lo, hi, guess) = bracket.unwrap_or((0.0, self.nu.support_radius(), f64::NAN));
        let p = self.mu.radial_cdf(r);
        let dens = |t: f64| self.nu.log_radial_density(t).exp();
        if p <= 0.5 {
            if bracket.is_none() {
                return self.nu.radial_quantile(p);
            }
            solve_increasing(|t| (self.nu.radial_cdf(t) - p, dens(t)), lo, hi, guess)
        } else {
            let q = self.mu.radial_sf(r);
            if q <= 0.0 {
                return Err(Error::OutsideSupport { x: vec![r] });
            }
            if bracket.is_none() {
                return self.nu.radial_inverse_sf(q);
            }
            solve_increasing(|t| (q - self.nu.radial_sf(t), dens(t)), lo, hi, guess)
        }
    }

    /// `φ(r)`, polished by Newton from the cached monotone table.
    pub fn profile(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r >= self.mu.support_radius() {
            return Err(Error::OutsideSupport { x: vec![r] });
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let step = self.radii[1] - self.radii[0];
        let k = (r / step).floor() as usize;
        if k + 1 < self.radii.len() {
            let (r0, r1) = (self.radii[k], self.radii[k + 1]);
            let (p0, p1) = (self.profile[k], self.profile[k + 1]);
            let guess = p0 + (p1 - p0) * (r - r0) / (r1 - r0);
            let lo = p0 * (1.0 - 1e-12);
            let hi = p1 * (1.0 + 1e-12) + f64::MIN_POSITIVE;
            return self.solve_profile(r, Some((lo, hi, guess)));
        }
        self.solve_profile(r, None)
    }

    /// `φ, φ′, φ″` at radius `r > 0`.
    pub fn jet(&self, r: f64) -> Result<RadialJet> {
        let phi = self.profile(r)?;
        let d1 = (self.mu.log_radial_density(r) - self.nu.log_radial_density(phi)).exp();
        let d2 = d1 * (self.mu.log_radial_density_d1(r) - self.nu.log_radial_density_d1(phi) * d1);
        Ok(RadialJet { phi, d1, d2 })
    }

    /// Third derivatives `Φ_ijk(x)`.
    pub fn third_derivatives(&self, x: &[f64]) -> Result<Tensor3> {
        let n = x.len();
        let r = crate::linalg::norm(x);
        if r < RADIAL_ORIGIN {
            return Ok(Tensor3::zeros(n));
        }
        let j = self.jet(r)?;
        let a = j.d1;
        let b = j.phi / r;
        let db = (a - b) / r;
        let da = j.d2;
        let c = a - b;
        let r2 = r * r;
        Ok(Tensor3::from_fn(n, |i, jj, k| {
            let d = |p: usize, q: usize| (p == q) as u8 as f64;
            db * x[k] / r * d(i, jj)
                + (da - db) * x[k] / r * x[i] * x[jj] / r2
                + c * (d(i, k) * x[jj] + x[i] * d(jj, k)) / r2
                - 2.0 * c * x[i] * x[jj] * x[k] / (r2 * r2)
        }))
    }
}

impl TransportMap for RadialMap {
    fn dim(&self) -> usize {
        self.mu.dim()
    }
    fn kind(&self) -> MapKind {
        MapKind::Radial
    }
    fn label(&self) -> String {
        format!("{} -> {}", self.mu.label(), self.nu.label())
    }
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = crate::linalg::norm(x);
        if r < RADIAL_ORIGIN {
            return Ok(x.iter().map(|xi| xi * self.slope_at_origin).collect());
        }
        let phi = self.profile(r)?;
        Ok(x.iter().map(|xi| xi * phi / r).collect())
    }
    fn hessian(&self, x: &[f64]) -> Result<SpdMatrix> {
        let n = x.len();
        let r = crate::linalg::norm(x);
        if r < RADIAL_ORIGIN {
            return SpdMatrix::from_diagonal(&vec![self.slope_at_origin; n]);
        }
        let j = self.jet(r)?;
        let radial = j.d1;
        let tangential = j.phi / r;
        SpdMatrix::new(DMatrix::from_fn(n, n, |i, k| {
            let proj = x[i] * x[k] / (r * r);
            radial * proj + tangential * ((i == k) as u8 as f64 - proj)
        }))
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.mu.potential(x)
    }
    fn target_potential(&self, y: &[f64]) -> f64 {
        self.nu.potential(y)
    }
    fn in_source_support(&self, x: &[f64]) -> bool {
        self.mu.in_support(x)
    }
    fn sample_source(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.mu.sample(rng)
    }
}

/// Builds the Brenier map between two measures of matching type.
pub fn brenier_map(mu: &Measure, nu: &Measure) -> Result<Box<dyn TransportMap>> {
    Ok(match (mu, nu) {
        (Measure::OneD(a), Measure::OneD(b)) => Box::new(brenier_1d(a.clone(), b.clone())),
        (Measure::Gaussian(a), Measure::Gaussian(b)) => {
            Box::new(brenier_gaussian(a.clone(), b.clone())?)
        }
        (Measure::Product(a), Measure::Product(b)) => {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.dim(),
                    got: b.dim(),
                });
            }
            let factors = a
                .factors()
                .iter()
                .zip(b.factors())
                .map(|(f, g)| brenier_1d(f.clone(), g.clone()))
                .collect();
            Box::new(brenier_product(factors)?)
        }
        (Measure::Radial(a), Measure::Radial(b)) => Box::new(brenier_radial(a.clone(), b.clone())?),
        _ => {
            return Err(Error::Unsupported(
                "no closed-form map between these measure types".into(),
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_catalog_measure;
    use crate::quadrature::{integrate, Tolerance};
    use crate::spd_geometry::random_spd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(name: &str, p: &[f64]) -> LogConcaveMeasure1D {
        make_catalog_measure(name, p).unwrap()
    }

    #[test]
    fn gaussian_scaling_1d() {
        let t = brenier_1d(m("gaussian", &[0.0, 1.0]), m("gaussian", &[0.0, 2.0]));
        for x in [-2.0, 0.3, 1.7] {
            assert!((t.eval(x).unwrap() - 2.0 * x).abs() < 1e-12);
            assert!((t.phi_d2(x).unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_to_exponential_closed_form() {
        let t = brenier_1d(m("uniform", &[0.0, 1.0]), m("exponential", &[1.0]));
        for x in [0.01, 0.5, 0.9, 0.999] {
            assert!((t.eval(x).unwrap() + (1.0 - x).ln()).abs() < 1e-12);
            assert!((t.phi_d2(x).unwrap() - 1.0 / (1.0 - x)).abs() < 1e-9 / (1.0 - x));
            // Φ‴ = 1/(1−x)².
            assert!((t.phi_d3(x).unwrap() - (1.0 - x).powi(-2)).abs() < 1e-8 * (1.0 - x).powi(-2));
        }
        assert!(t.eval(1.5).is_err());
    }

    #[test]
    fn one_d_hessian_matches_finite_difference_of_map() {
        let cat = crate::measures::default_catalog();
        for mu in &cat {
            for nu in &cat {
                let t = brenier_1d(mu.clone(), nu.clone());
                for p in [0.1, 0.35, 0.6, 0.85] {
                    let x = mu.quantile(p).unwrap();
                    let h = 1e-5 * (1.0 + x.abs());
                    let fd = (t.eval(x + h).unwrap() - t.eval(x - h).unwrap()) / (2.0 * h);
                    let exact = t.phi_d2(x).unwrap();
                    assert!(
                        (fd - exact).abs() <= 1e-5 * exact.max(1.0),
                        "{} x={x}: {fd} vs {exact}",
                        t.label()
                    );
                }
            }
        }
    }

    #[test]
    fn pushforward_moments_1d() {
        let pairs = [
            (m("uniform", &[0.0, 1.0]), m("exponential", &[1.0])),
            (m("gamma", &[2.0, 1.0]), m("logistic", &[0.0, 1.0])),
            (m("beta", &[2.0, 2.0]), m("gaussian", &[1.0, 0.5])),
        ];
        let tol = Tolerance {
            abs: 1e-12,
            rel: 1e-12,
            max_segments: 4000,
        };
        for (mu, nu) in pairs {
            let t = brenier_1d(mu.clone(), nu.clone());
            let tests: [fn(f64) -> f64; 3] = [|y| y, |y| y * y, |y| (-y * y).exp()];
            for b in tests {
                // Integrate in the probability variable to stay clear of the tails.
                let lhs = integrate(
                    |p| b(t.eval(mu.quantile(p).unwrap()).unwrap()),
                    1e-12,
                    1.0 - 1e-12,
                    tol,
                )
                .unwrap();
                let (a, c) = nu.support();
                let rhs = integrate(|y| b(y) * nu.density(y), a, c, tol).unwrap();
                assert!((lhs - rhs).abs() < 1e-7, "{}: {lhs} vs {rhs}", t.label());
            }
        }
    }

    #[test]
    fn composition_law() {
        let mu = m("beta", &[2.0, 3.0]);
        let nu = m("logistic", &[0.5, 2.0]);
        let ka = m("gamma", &[3.0, 2.0]);
        let ab = brenier_1d(mu.clone(), nu.clone());
        let bc = brenier_1d(nu, ka.clone());
        let ac = brenier_1d(mu.clone(), ka);
        for p in [0.01, 0.2, 0.5, 0.8, 0.99] {
            let x = mu.quantile(p).unwrap();
            let lhs = bc.eval(ab.eval(x).unwrap()).unwrap();
            let rhs = ac.eval(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-7);
        }
    }

    #[test]
    fn residual_one_d_catalog() {
        let cat = crate::measures::default_catalog();
        for mu in &cat {
            for nu in &cat {
                let t = brenier_1d(mu.clone(), nu.clone());
                for k in 0..100 {
                    let x = mu.quantile((k as f64 + 0.5) / 100.0).unwrap();
                    assert!(transport_residual(&t, &[x]).unwrap().abs() <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn gaussian_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s1 = random_spd(4, &mut rng);
        let s2 = random_spd(4, &mut rng);
        let mu = GaussianMeasure::new(vec![0.5; 4], s1.clone()).unwrap();
        let nu = GaussianMeasure::new(vec![-1.0; 4], s2.clone()).unwrap();
        let t = brenier_gaussian(mu, nu).unwrap();
        let a = t.matrix().matrix();
        let back = a * s1.matrix() * a;
        assert!(
            crate::linalg::hs_norm(&(back - s2.matrix()))
                <= 1e-9 * crate::linalg::hs_norm(s2.matrix())
        );
        for x in [[0.0; 4], [1.0, -2.0, 0.3, 0.7]] {
            assert!(transport_residual(&t, &x).unwrap().abs() < 1e-10);
        }
        let id = GaussianMeasure::standard(3);
        let sig = random_spd(3, &mut rng);
        let t2 =
            brenier_gaussian(id, GaussianMeasure::new(vec![0.0; 3], sig.clone()).unwrap()).unwrap();
        let root = sig.power_matrix(0.5);
        assert!(crate::linalg::hs_norm(&(t2.matrix().matrix() - root)) < 1e-10);
    }

    #[test]
    fn gaussian_diagonal_covariances() {
        let mu = GaussianMeasure::new(vec![0.0; 2], SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap())
            .unwrap();
        let nu = GaussianMeasure::new(vec![0.0; 2], SpdMatrix::from_diagonal(&[1.0, 9.0]).unwrap())
            .unwrap();
        let t = brenier_gaussian(mu, nu).unwrap();
        let a = t.matrix().matrix();
        assert!((a[(0, 0)] - 0.5).abs() < 1e-14 && (a[(1, 1)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn product_examples() {
        let u = m("uniform", &[0.0, 1.0]);
        let e = m("exponential", &[1.0]);
        let ident = brenier_product(vec![brenier_1d(u.clone(), u.clone()); 2]).unwrap();
        let h = ident.hessian(&[0.3, 0.6]).unwrap();
        assert!(h.eigenvalues().iter().all(|l| (l - 1.0).abs() < 1e-12));

        let pm = brenier_product(vec![brenier_1d(u.clone(), e.clone()), brenier_1d(u, e)]).unwrap();
        let h = pm.hessian(&[0.5, 0.9]).unwrap();
        assert!(
            (h.eigenvalues()[0] - 10.0).abs() < 1e-9 && (h.eigenvalues()[1] - 2.0).abs() < 1e-12
        );
        let spec = hessian_spectrum_at(&pm, &[0.5, 0.9]).unwrap();
        assert!(
            (spec.values()[0] - 10f64.ln()).abs() < 1e-10
                && (spec.values()[1] - 2f64.ln()).abs() < 1e-12
        );
        assert_eq!(spec, log_eigen_map(&h));
    }

    #[test]
    fn product_pushforward_n3() {
        // Tensor Gauss–Legendre in the probability variables.
        let maps = vec![
            brenier_1d(m("uniform", &[0.0, 1.0]), m("gaussian", &[0.0, 1.0])),
            brenier_1d(m("logistic", &[0.0, 1.0]), m("beta", &[2.0, 2.0])),
            brenier_1d(m("gamma", &[2.0, 1.0]), m("exponential", &[2.0])),
        ];
        let pm = brenier_product(maps).unwrap();
        let gl = crate::quadrature::GaussLegendre::new(48);
        let nodes = gl.mapped(0.0, 1.0);
        let mut lhs = 0.0;
        for (p0, w0) in &nodes {
            for (p1, w1) in &nodes {
                for (p2, w2) in &nodes {
                    let x: Vec<f64> = [p0, p1, p2]
                        .iter()
                        .zip(pm.factors())
                        .map(|(p, f)| f.source().quantile(**p).unwrap())
                        .collect();
                    let y = pm.map(&x).unwrap();
                    lhs += w0 * w1 * w2 * (y[0] * y[1] + y[2]).tanh();
                }
            }
        }
        let mut rhs = 0.0;
        for (p0, w0) in &nodes {
            for (p1, w1) in &nodes {
                for (p2, w2) in &nodes {
                    let y: Vec<f64> = [p0, p1, p2]
                        .iter()
                        .zip(pm.factors())
                        .map(|(p, f)| f.target().quantile(**p).unwrap())
                        .collect();
                    rhs += w0 * w1 * w2 * (y[0] * y[1] + y[2]).tanh();
                }
            }
        }
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn radial_ball_scaling() {
        let t = brenier_radial(
            RadialMeasure::uniform_ball(3, 1.0).unwrap(),
            RadialMeasure::uniform_ball(3, 2.5).unwrap(),
        )
        .unwrap();
        for x in [[0.1, 0.2, -0.3], [0.5, 0.5, 0.5], [0.0, 0.0, 0.0]] {
            let h = t.hessian(&x).unwrap();
            assert!(
                h.eigenvalues().iter().all(|l| (l - 2.5).abs() < 1e-9),
                "{:?}",
                h.eigenvalues()
            );
        }
    }

    #[test]
    fn radial_disk_to_gaussian_closed_form() {
        let t = brenier_radial(
            RadialMeasure::uniform_ball(2, 1.0).unwrap(),
            RadialMeasure::gaussian(2, 1.0).unwrap(),
        )
        .unwrap();
        for r in [0.05f64, 0.3, 0.7, 0.95, 0.999] {
            let exact = (-2.0 * (-r * r).ln_1p()).sqrt();
            assert!(
                (t.profile(r).unwrap() - exact).abs() < 1e-10 * exact.max(1.0),
                "r={r}"
            );
        }
        assert!((t.slope_at_origin() - (2.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn radial_hessian_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 5] {
            let t = brenier_radial(
                RadialMeasure::uniform_ball(n, 1.0).unwrap(),
                RadialMeasure::gaussian(n, 1.0).unwrap(),
            )
            .unwrap();
            for _ in 0..100 {
                let x = t.sample_source(&mut rng);
                if crate::linalg::norm(&x) > 0.98 {
                    continue;
                }
                let h = t.hessian(&x).unwrap();
                // FD Hessian of Φ from the map.
                let step = 1e-6;
                for j in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += step;
                    xm[j] -= step;
                    let tp = t.map(&xp).unwrap();
                    let tm = t.map(&xm).unwrap();
                    for i in 0..n {
                        let fd = (tp[i] - tm[i]) / (2.0 * step);
                        assert!(
                            (fd - h.matrix()[(i, j)]).abs() < 1e-5 * h.eigenvalues()[0].max(1.0)
                        );
                    }
                }
                assert!(transport_residual(&t, &x).unwrap().abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn radial_third_derivatives_match_finite_differences() {
        let t = brenier_radial(
            RadialMeasure::uniform_ball(3, 1.0).unwrap(),
            RadialMeasure::new(
                3,
                crate::measures::RadialProfile::ExpPower { p: 1.5, scale: 1.0 },
            )
            .unwrap(),
        )
        .unwrap();
        let x = [0.3, -0.2, 0.4];
        let d3 = t.third_derivatives(&x).unwrap();
        assert!(d3.symmetry_defect() < 1e-10);
        let step = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += step;
            xm[k] -= step;
            let hp = t.hessian(&xp).unwrap();
            let hm = t.hessian(&xm).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let fd = (hp.matrix()[(i, j)] - hm.matrix()[(i, j)]) / (2.0 * step);
                    assert!(
                        (fd - d3.get(i, j, k)).abs() < 1e-5,
                        "{i}{j}{k}: {fd} vs {}",
                        d3.get(i, j, k)
                    );
                }
            }
        }
    }

    #[test]
    fn monotonicity_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let maps: Vec<Box<dyn TransportMap>> = vec![
            Box::new(
                brenier_radial(
                    RadialMeasure::uniform_ball(3, 1.0).unwrap(),
                    RadialMeasure::gaussian(3, 1.0).unwrap(),
                )
                .unwrap(),
            ),
            Box::new(
                brenier_product(vec![
                    brenier_1d(m("gamma", &[2.0, 1.0]), m("laplace", &[0.0, 1.0])),
                    brenier_1d(m("beta", &[2.0, 5.0]), m("subbotin", &[3.0])),
                ])
                .unwrap(),
            ),
        ];
        for t in &maps {
            for _ in 0..10_000 {
                let x = t.sample_source(&mut rng);
                let y = t.sample_source(&mut rng);
                let (tx, ty) = (t.map(&x).unwrap(), t.map(&y).unwrap());
                let inner: f64 = tx
                    .iter()
                    .zip(&ty)
                    .zip(x.iter().zip(&y))
                    .map(|((a, b), (c, d))| (a - b) * (c - d))
                    .sum();
                assert!(inner >= -1e-10);
            }
        }
    }
}
