//! Concrete transport triples.
//!
//! Analytic triples come from the closed-form maps in [`crate::brenier`].
//! [`SyntheticTriple`] perturbs the identity by a cubic and defines `V` from
//! the transport equation, so it is consistent by construction but `V` need
//! not be convex. [`FdTriple`] wraps any map and takes the missing
//! derivatives by Richardson-extrapolated central differences.

use super::{symmetric_tensor, Provenance, SmoothTriple, TripleJet};
use crate::brenier::{GaussianMap, Map1D, ProductMap, RadialMap, TransportMap};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Tensor3};
use crate::measures::LogConcaveMeasure1D;
use crate::spd_geometry::{random_spd_with_range, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

/// Probability window used when sampling evaluation points from a source.
const LEVEL_LO: f64 = 0.02;
const LEVEL_HI: f64 = 0.98;

fn curvature(m: &LogConcaveMeasure1D, x: f64) -> Result<f64> {
    m.potential_d2(x)
        .ok_or_else(|| Error::Unsupported(format!("{} has no second derivative", m.label())))
}

fn require_smooth(m: &LogConcaveMeasure1D) -> Result<()> {
    if m.has_second_derivative() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{} is not twice differentiable",
            m.label()
        )))
    }
}

#[derive(Debug, Clone)]
pub struct OneDTriple {
    map: Map1D,
}

impl OneDTriple {
    pub fn new(map: Map1D) -> Result<Self> {
        require_smooth(map.source())?;
        require_smooth(map.target())?;
        Ok(Self { map })
    }

    pub fn map(&self) -> &Map1D {
        &self.map
    }
}

impl SmoothTriple for OneDTriple {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        self.map.label()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let (mu, nu) = (self.map.source(), self.map.target());
        let x0 = x[0];
        let t = self.map.eval(x0)?;
        let a = (-mu.potential(x0) + nu.potential(t)).exp();
        let b = a * (-mu.potential_d1(x0) + nu.potential_d1(t) * a);
        let mut third = Tensor3::zeros(1);
        third.set(0, 0, 0, b);
        Ok(TripleJet {
            grad_phi: vec![t],
            hess_phi: DMatrix::from_element(1, 1, a),
            third_phi: third,
            v_grad: vec![mu.potential_d1(x0)],
            v_hess: DMatrix::from_element(1, 1, curvature(mu, x0)?),
            w_grad: vec![nu.potential_d1(t)],
            w_hess: DMatrix::from_element(1, 1, curvature(nu, t)?),
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.map.source().potential(x[0])
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![sample_level(self.map.source(), rng)]
    }
    fn log_concave(&self) -> bool {
        true
    }
}

fn sample_level(m: &LogConcaveMeasure1D, rng: &mut dyn RngCore) -> f64 {
    loop {
        let p = rng.random_range(LEVEL_LO..LEVEL_HI);
        if let Ok(x) = m.quantile(p) {
            return x;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProductTriple {
    factors: Vec<OneDTriple>,
    map: ProductMap,
}

impl ProductTriple {
    pub fn new(map: ProductMap) -> Result<Self> {
        let factors = map
            .factors()
            .iter()
            .cloned()
            .map(OneDTriple::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors, map })
    }
}

impl SmoothTriple for ProductTriple {
    fn dim(&self) -> usize {
        self.factors.len()
    }
    fn label(&self) -> String {
        self.map.label()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let parts = self
            .factors
            .iter()
            .zip(x)
            .map(|(f, xi)| f.jet(&[*xi]))
            .collect::<Result<Vec<_>>>()?;
        let diag = |f: &dyn Fn(&TripleJet) -> f64| {
            DMatrix::from_diagonal(&DVector::from_iterator(n, parts.iter().map(f)))
        };
        let mut third = Tensor3::zeros(n);
        for (i, p) in parts.iter().enumerate() {
            third.set(i, i, i, p.third_phi.get(0, 0, 0));
        }
        Ok(TripleJet {
            grad_phi: parts.iter().map(|p| p.grad_phi[0]).collect(),
            hess_phi: diag(&|p| p.hess_phi[(0, 0)]),
            third_phi: third,
            v_grad: parts.iter().map(|p| p.v_grad[0]).collect(),
            v_hess: diag(&|p| p.v_hess[(0, 0)]),
            w_grad: parts.iter().map(|p| p.w_grad[0]).collect(),
            w_hess: diag(&|p| p.w_hess[(0, 0)]),
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.map.source().potential(x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.factors
            .iter()
            .map(|f| sample_level(f.map.source(), rng))
            .collect()
    }
    fn log_concave(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct GaussianTriple {
    map: GaussianMap,
}

impl GaussianTriple {
    pub fn new(map: GaussianMap) -> Self {
        Self { map }
    }
}

impl SmoothTriple for GaussianTriple {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn label(&self) -> String {
        self.map.label()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let y = self.map.apply(x);
        Ok(TripleJet {
            grad_phi: y.clone(),
            hess_phi: self.map.matrix().matrix().clone(),
            third_phi: Tensor3::zeros(n),
            v_grad: self.map.source().gradient(x),
            v_hess: self.map.source().precision().clone(),
            w_grad: self.map.target().gradient(&y),
            w_hess: self.map.target().precision().clone(),
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.map.source().potential(x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.map.sample_source(rng)
    }
    fn log_concave(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct RadialTriple {
    map: RadialMap,
}

impl RadialTriple {
    pub fn new(map: RadialMap) -> Self {
        Self { map }
    }
}

impl SmoothTriple for RadialTriple {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn label(&self) -> String {
        self.map.label()
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if !self.map.in_source_support(x) {
            return Err(Error::OutsideSupport { x: x.to_vec() });
        }
        let y = self.map.map(x)?;
        let (mu, nu) = (self.map.source(), self.map.target());
        Ok(TripleJet {
            grad_phi: y.clone(),
            hess_phi: self.map.hessian(x)?.into_matrix(),
            third_phi: self.map.third_derivatives(x)?,
            v_grad: mu.gradient(x),
            v_hess: mu.hessian(x),
            w_grad: nu.gradient(&y),
            w_hess: nu.hessian(&y),
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.map.source().potential(x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mu = self.map.source();
        loop {
            let x = self.map.sample_source(rng);
            let p = mu.radial_cdf(crate::linalg::norm(&x));
            if p <= LEVEL_HI {
                return x;
            }
        }
    }
    fn log_concave(&self) -> bool {
        true
    }
}

/// `W(y) = ½yᵗSy + Σ log cosh yᵢ`, convex.
#[derive(Debug, Clone)]
pub struct SyntheticTarget {
    pub s: SpdMatrix,
}

impl SyntheticTarget {
    pub fn value(&self, y: &[f64]) -> f64 {
        let yv = DVector::from_column_slice(y);
        0.5 * yv.dot(&(self.s.matrix() * &yv)) + y.iter().map(|v| v.cosh().ln()).sum::<f64>()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let sy = self.s.matrix() * DVector::from_column_slice(y);
        sy.iter().zip(y).map(|(a, v)| a + v.tanh()).collect()
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let mut h = self.s.matrix().clone();
        for (i, v) in y.iter().enumerate() {
            h[(i, i)] += 1.0 / v.cosh().powi(2);
        }
        h
    }
}

/// `Φ = |x|²/2 + δ·p(x)` with `p` a homogeneous cubic, evaluated on the box
/// `[-1, 1]ⁿ`. `V` is defined by `V = W(∇Φ) − log det D²Φ`.
#[derive(Debug, Clone)]
pub struct SyntheticTriple {
    delta: f64,
    /// Third derivatives of `p`, fully symmetric.
    cubic: Tensor3,
    target: SyntheticTarget,
}

/// Lower bound on `D²Φ` over the box.
pub const SYNTHETIC_HESSIAN_FLOOR: f64 = 0.7;

impl SyntheticTriple {
    pub fn new(cubic: Tensor3, delta: f64, target: SyntheticTarget) -> Result<Self> {
        let n = cubic.dim();
        if target.s.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: target.s.dim(),
            });
        }
        if cubic.symmetry_defect() > 1e-12 {
            return Err(Error::InvalidArgument(
                "cubic tensor must be symmetric".into(),
            ));
        }
        // ‖δ Σ_k x_k C_k‖ ≤ δ Σ_k ‖C_k‖ on the box.
        let bound: f64 = (0..n)
            .map(|k| crate::linalg::singular_values(&cubic.slice(k))[0])
            .sum();
        if delta.abs() * bound > 1.0 - SYNTHETIC_HESSIAN_FLOOR {
            return Err(Error::InvalidArgument(format!(
                "delta {delta} lets D²Φ drop below {SYNTHETIC_HESSIAN_FLOOR} on the box"
            )));
        }
        Ok(Self {
            delta,
            cubic,
            target,
        })
    }

    /// Random cubic with `δ` at the largest admissible value and a random
    /// quadratic part of `W` with eigenvalues in `[e^{-0.5}, e^{0.5}]`.
    pub fn random(n: usize, rng: &mut dyn RngCore) -> Self {
        let raw: Vec<f64> = (0..n * n * n)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let cubic = symmetric_tensor(n, &raw);
        let bound: f64 = (0..n)
            .map(|k| crate::linalg::singular_values(&cubic.slice(k))[0])
            .sum();
        let delta = (1.0 - SYNTHETIC_HESSIAN_FLOOR) / bound.max(1e-12) * 0.999;
        let s = random_spd_with_range(n, 0.5, rng);
        Self::new(cubic, delta, SyntheticTarget { s }).expect("admissible by construction")
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn phi_parts(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>, Tensor3) {
        let n = x.len();
        let cx = DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.cubic.get(i, j, k) * x[k]).sum::<f64>()
        });
        let cxx = &cx * DVector::from_column_slice(x);
        let grad = (0..n).map(|i| x[i] + 0.5 * self.delta * cxx[i]).collect();
        let hess = DMatrix::identity(n, n) + cx * self.delta;
        let third = Tensor3::from_fn(n, |i, j, k| self.delta * self.cubic.get(i, j, k));
        (grad, hess, third)
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut c = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c += self.cubic.get(i, j, k) * x[i] * x[j] * x[k];
                }
            }
        }
        0.5 * crate::linalg::dot(x, x) + self.delta * c / 6.0
    }

    fn in_box(x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= 1.0)
    }
}

impl SmoothTriple for SyntheticTriple {
    fn dim(&self) -> usize {
        self.cubic.dim()
    }
    fn label(&self) -> String {
        format!("synthetic-cubic(n={}, delta={:.4})", self.dim(), self.delta)
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let (y, h, third) = self.phi_parts(x);
        let hs = SpdMatrix::new(symmetrize(&h))?;
        let p = hs.inverse().into_matrix();
        let w_grad = self.target.gradient(&y);
        let w_hess = self.target.hessian(&y);
        let pd: Vec<DMatrix<f64>> = (0..n).map(|k| &p * third.slice(k)).collect();
        let hw = &h * DVector::from_column_slice(&w_grad);
        // V_j = Σ_i W_i Φ_ij − Tr(P ∂_j D²Φ).
        let v_grad: Vec<f64> = (0..n).map(|j| hw[j] - pd[j].trace()).collect();
        // ∂_{jk} D²Φ = 0 for a cubic, leaving the pullback term.
        let hwh = &h * &w_hess * &h;
        let v_hess = symmetrize(&DMatrix::from_fn(n, n, |j, k| {
            let push: f64 = (0..n).map(|i| w_grad[i] * third.get(i, j, k)).sum();
            hwh[(j, k)] + push + pd[j].component_mul(&pd[k].transpose()).sum()
        }));
        Ok(TripleJet {
            grad_phi: y,
            hess_phi: h,
            third_phi: third,
            v_grad,
            v_hess,
            w_grad,
            w_hess,
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        if !Self::in_box(x) {
            return f64::INFINITY;
        }
        let (y, h, _) = self.phi_parts(x);
        match SpdMatrix::new(symmetrize(&h)) {
            Ok(hs) => self.target.value(&y) - hs.eigenvalues().iter().map(|l| l.ln()).sum::<f64>(),
            Err(_) => f64::INFINITY,
        }
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }
    fn log_concave(&self) -> bool {
        false
    }
}

/// Wraps a map whose only oracles are `∇Φ`, `D²Φ`, `V` and `W`; third
/// derivatives and the potentials' derivatives come from Richardson
/// extrapolation of central differences.
pub struct FdTriple {
    map: Box<dyn TransportMap>,
}

impl FdTriple {
    pub fn new(map: Box<dyn TransportMap>) -> Self {
        Self { map }
    }

    fn step(x: f64) -> f64 {
        1e-3 * (1.0 + x.abs())
    }

    fn shifted(x: &[f64], k: usize, h: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        y[k] += h;
        y
    }

    fn grad_of(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let d =
                    |h: f64| (f(&Self::shifted(x, k, h)) - f(&Self::shifted(x, k, -h))) / (2.0 * h);
                let h = Self::step(x[k]);
                (4.0 * d(h / 2.0) - d(h)) / 3.0
            })
            .collect()
    }

    fn hess_of(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let f0 = f(x);
        DMatrix::from_fn(n, n, |i, j| {
            let d = |h: f64| {
                if i == j {
                    (f(&Self::shifted(x, i, h)) - 2.0 * f0 + f(&Self::shifted(x, i, -h))) / (h * h)
                } else {
                    let pp = Self::shifted(&Self::shifted(x, i, h), j, h);
                    let pm = Self::shifted(&Self::shifted(x, i, h), j, -h);
                    let mp = Self::shifted(&Self::shifted(x, i, -h), j, h);
                    let mm = Self::shifted(&Self::shifted(x, i, -h), j, -h);
                    (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h)
                }
            };
            let h = Self::step(x[i].abs().max(x[j].abs()));
            (4.0 * d(h / 2.0) - d(h)) / 3.0
        })
    }
}

impl SmoothTriple for FdTriple {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn label(&self) -> String {
        format!("fd[{}]", self.map.label())
    }
    fn provenance(&self) -> Provenance {
        Provenance::FiniteDifference
    }
    fn jet(&self, x: &[f64]) -> Result<TripleJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let y = self.map.map(x)?;
        let hess = self.map.hessian(x)?.into_matrix();
        let mut raw = vec![0.0; n * n * n];
        for k in 0..n {
            let d = |h: f64| -> Result<DMatrix<f64>> {
                let hp = self.map.hessian(&Self::shifted(x, k, h))?.into_matrix();
                let hm = self.map.hessian(&Self::shifted(x, k, -h))?.into_matrix();
                Ok((hp - hm) / (2.0 * h))
            };
            let h = Self::step(x[k]);
            let r = (d(h / 2.0)? * 4.0 - d(h)?) / 3.0;
            for i in 0..n {
                for j in 0..n {
                    raw[(i * n + j) * n + k] = r[(i, j)];
                }
            }
        }
        let v = |z: &[f64]| self.map.source_potential(z);
        let w = |z: &[f64]| self.map.target_potential(z);
        Ok(TripleJet {
            grad_phi: y.clone(),
            hess_phi: hess,
            third_phi: symmetric_tensor(n, &raw),
            v_grad: Self::grad_of(&v, x),
            v_hess: symmetrize(&Self::hess_of(&v, x)),
            w_grad: Self::grad_of(&w, &y),
            w_hess: symmetrize(&Self::hess_of(&w, &y)),
        })
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.map.source_potential(x)
    }
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.map.sample_source(rng)
    }
    fn log_concave(&self) -> bool {
        true
    }
}
