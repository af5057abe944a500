//! Γ-calculus of the weighted manifold `(ℝⁿ, D²Φ, μ)` at single points.
//!
//! Everything here is pointwise: a [`SmoothTriple`] supplies `Φ` up to third
//! derivatives and `V`, `W` up to second derivatives, a [`TestFunction`]
//! supplies `u` up to second derivatives, and [`Gamma2Point`] assembles the
//! contractions once so every quantity at that point shares one inverse
//! Hessian.
//!
//! Index conventions: with `P = (D²Φ)⁻¹`,
//! `Φ^i_{jk} = P_{iℓ}Φ_{jkℓ}`, `Φ^{ij}_k = P_{iℓ}P_{jm}Φ_{kmℓ}` and
//! `Φ^{ijk} = P_{ia}P_{jb}P_{kc}Φ_{abc}`.

mod triples;

pub use triples::*;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, symmetrize, Tensor3};
use crate::spd_geometry::{log_eigen_map, SpdMatrix};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use std::sync::Arc;

/// Hessians with a larger condition estimate are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Tolerance at which the two forms of `L` must agree.
pub const L_FORMS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    FiniteDifference,
}

/// Derivatives of a triple at one point; `W` terms are evaluated at `∇Φ(x)`.
#[derive(Debug, Clone)]
pub struct TripleJet {
    pub grad_phi: Vec<f64>,
    pub hess_phi: DMatrix<f64>,
    pub third_phi: Tensor3,
    pub v_grad: Vec<f64>,
    pub v_hess: DMatrix<f64>,
    pub w_grad: Vec<f64>,
    pub w_hess: DMatrix<f64>,
}

/// A transport triple `(Φ, V, W)` with `(∇Φ)_# e^{-V} = e^{-W}`.
pub trait SmoothTriple: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn provenance(&self) -> Provenance;
    fn jet(&self, x: &[f64]) -> Result<TripleJet>;
    fn source_potential(&self, x: &[f64]) -> f64;
    /// A point from the region where the triple is meant to be evaluated.
    fn sample_point(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    /// `V` and `W` convex by construction. Synthetic triples return false and
    /// are checked point by point instead.
    fn log_concave(&self) -> bool;
}

/// Value, gradient and Hessian of a test function.
#[derive(Debug, Clone)]
pub struct TestJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    fn jet(&self, x: &[f64]) -> Result<TestJet>;
    /// Third derivatives where cheaply available.
    fn third(&self, x: &[f64]) -> Result<Option<Tensor3>>;
}

/// `u(x) = c₀ + a·x + ½xᵗBx + ⅙ c_{ijk}x_ix_jx_k`.
#[derive(Debug, Clone)]
pub struct CubicTest {
    pub c0: f64,
    pub a: Vec<f64>,
    pub b: DMatrix<f64>,
    pub c: Tensor3,
}

impl CubicTest {
    pub fn random(n: usize, rng: &mut dyn RngCore) -> Self {
        use rand::Rng;
        let mut g = || rng.random_range(-1.0..1.0);
        let c0 = g();
        let a = (0..n).map(|_| g()).collect();
        let b = symmetrize(&DMatrix::from_fn(n, n, |_, _| g()));
        let raw: Vec<f64> = (0..n * n * n).map(|_| g()).collect();
        let c = symmetric_tensor(n, &raw);
        Self { c0, a, b, c }
    }

    /// `u(x) = θ·x`.
    pub fn linear(theta: &[f64]) -> Self {
        let n = theta.len();
        Self {
            c0: 0.0,
            a: theta.to_vec(),
            b: DMatrix::zeros(n, n),
            c: Tensor3::zeros(n),
        }
    }
}

/// Fully symmetrizes an `n³` array given in `(i, j, k)` row-major order.
pub(crate) fn symmetric_tensor(n: usize, raw: &[f64]) -> Tensor3 {
    let at = |i: usize, j: usize, k: usize| raw[(i * n + j) * n + k];
    Tensor3::from_fn(n, |i, j, k| {
        (at(i, j, k) + at(i, k, j) + at(j, i, k) + at(j, k, i) + at(k, i, j) + at(k, j, i)) / 6.0
    })
}

impl TestFunction for CubicTest {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn label(&self) -> String {
        format!("cubic(n={})", self.a.len())
    }
    fn jet(&self, x: &[f64]) -> Result<TestJet> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let xv = DVector::from_column_slice(x);
        let cx = DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.c.get(i, j, k) * x[k]).sum::<f64>()
        });
        let hess = &self.b + &cx;
        let bx = &self.b * &xv;
        let cxx = &cx * &xv;
        let grad: Vec<f64> = (0..n).map(|i| self.a[i] + bx[i] + 0.5 * cxx[i]).collect();
        let value =
            self.c0 + crate::linalg::dot(&self.a, x) + 0.5 * xv.dot(&bx) + xv.dot(&cxx) / 6.0;
        Ok(TestJet { value, grad, hess })
    }
    fn third(&self, _x: &[f64]) -> Result<Option<Tensor3>> {
        Ok(Some(self.c.clone()))
    }
}

/// `u = θ·∇Φ`; with `θ = e₁` this is `Φ₁`.
#[derive(Clone)]
pub struct PhiDirectional {
    triple: Arc<dyn SmoothTriple>,
    theta: Vec<f64>,
}

impl PhiDirectional {
    pub fn new(triple: Arc<dyn SmoothTriple>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != triple.dim() {
            return Err(Error::DimensionMismatch {
                expected: triple.dim(),
                got: theta.len(),
            });
        }
        Ok(Self { triple, theta })
    }

    pub fn coordinate(triple: Arc<dyn SmoothTriple>, k: usize) -> Result<Self> {
        let mut theta = vec![0.0; triple.dim()];
        *theta
            .get_mut(k)
            .ok_or_else(|| Error::InvalidArgument(format!("coordinate {k} out of range")))? = 1.0;
        Self::new(triple, theta)
    }
}

impl TestFunction for PhiDirectional {
    fn dim(&self) -> usize {
        self.theta.len()
    }
    fn label(&self) -> String {
        format!("theta.grad_phi({:?})", self.theta)
    }
    fn jet(&self, x: &[f64]) -> Result<TestJet> {
        let j = self.triple.jet(x)?;
        let n = self.dim();
        let th = DVector::from_column_slice(&self.theta);
        let grad = (&j.hess_phi * &th).iter().copied().collect();
        let hess = DMatrix::from_fn(n, n, |a, b| {
            (0..n)
                .map(|k| self.theta[k] * j.third_phi.get(k, a, b))
                .sum()
        });
        Ok(TestJet {
            value: crate::linalg::dot(&self.theta, &j.grad_phi),
            grad,
            hess,
        })
    }
    fn third(&self, _x: &[f64]) -> Result<Option<Tensor3>> {
        Ok(None)
    }
}

/// Inverse Hessian and the raised-index third-derivative tensors.
#[derive(Debug, Clone)]
pub struct Contracted {
    /// `Φ^{ij}`.
    pub inv: DMatrix<f64>,
    /// `Φ^i_{jk}` stored at `(i, j, k)`.
    pub up1: Tensor3,
    /// `Φ^{ij}_k` stored at `(i, j, k)`.
    pub up2: Tensor3,
    /// `Φ^{ijk}`.
    pub up3: Tensor3,
    pub hessian: SpdMatrix,
}

pub fn contract(hess: &DMatrix<f64>, third: &Tensor3) -> Result<Contracted> {
    let hessian = SpdMatrix::new(symmetrize(hess))?;
    let cond = hessian.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition: cond });
    }
    let p = hessian.inverse().into_matrix();
    let n = p.nrows();
    let up1 = Tensor3::from_fn(n, |i, j, k| {
        (0..n).map(|l| p[(i, l)] * third.get(j, k, l)).sum()
    });
    let up2 = Tensor3::from_fn(n, |i, j, k| {
        (0..n).map(|m| p[(j, m)] * up1.get(i, k, m)).sum()
    });
    let up3 = Tensor3::from_fn(n, |i, j, k| {
        (0..n).map(|m| p[(k, m)] * up2.get(i, j, m)).sum()
    });
    Ok(Contracted {
        inv: p,
        up1,
        up2,
        up3,
        hessian,
    })
}

/// Contracted tensors of `t` at `x`.
pub fn contracted_tensors(t: &dyn SmoothTriple, x: &[f64]) -> Result<Contracted> {
    let j = t.jet(x)?;
    contract(&j.hess_phi, &j.third_phi)
}

/// Both forms of `Lu` at one point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LValue {
    /// `Φ^{ij}u_{ij} − W_j(∇Φ)u_j`.
    pub w_form: f64,
    /// `Φ^{ij}u_{ij} − (Φ^{ij}_i + Φ^{ij}V_i)u_j`.
    pub v_form: f64,
}

/// All pointwise Γ-calculus quantities for one `(triple, u, x)`.
#[derive(Debug, Clone)]
pub struct Gamma2Point {
    pub jet: TripleJet,
    pub c: Contracted,
    pub u: TestJet,
    /// `∇_M u = P∇u`.
    pub xi: Vec<f64>,
}

fn mat_tr_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(&b.transpose()).sum()
}

impl Gamma2Point {
    pub fn new(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<Self> {
        if x.len() != t.dim() {
            return Err(Error::DimensionMismatch {
                expected: t.dim(),
                got: x.len(),
            });
        }
        if u.dim() != t.dim() {
            return Err(Error::DimensionMismatch {
                expected: t.dim(),
                got: u.dim(),
            });
        }
        let jet = t.jet(x)?;
        let uj = u.jet(x)?;
        Self::from_jets(jet, uj)
    }

    pub fn from_jets(jet: TripleJet, u: TestJet) -> Result<Self> {
        let c = contract(&jet.hess_phi, &jet.third_phi)?;
        let xi = (&c.inv * DVector::from_column_slice(&u.grad))
            .iter()
            .copied()
            .collect();
        Ok(Self { jet, c, u, xi })
    }

    fn n(&self) -> usize {
        self.xi.len()
    }

    fn trace_pu(&self) -> f64 {
        mat_tr_prod(&self.c.inv, &self.u.hess)
    }

    /// `Σ_i Φ^{ij}_i`.
    fn up2_trace(&self, j: usize) -> f64 {
        (0..self.n()).map(|i| self.c.up2.get(i, j, i)).sum()
    }

    /// Both forms of `Lu`, refusing if they disagree by more than
    /// [`L_FORMS_TOL`] relative to the size of the terms.
    pub fn operator_l(&self) -> Result<LValue> {
        let n = self.n();
        let tr = self.trace_pu();
        let g = &self.u.grad;
        let w_drift = crate::linalg::dot(&self.jet.w_grad, g);
        let pv = &self.c.inv * DVector::from_column_slice(&self.jet.v_grad);
        let v_drift: f64 = (0..n).map(|j| (self.up2_trace(j) + pv[j]) * g[j]).sum();
        let out = LValue {
            w_form: tr - w_drift,
            v_form: tr - v_drift,
        };
        let scale = 1.0 + tr.abs() + w_drift.abs();
        let gap = (out.w_form - out.v_form).abs();
        if !(gap <= L_FORMS_TOL * scale) {
            return Err(Error::IdentityViolation {
                name: "two forms of L".into(),
                residual: gap,
            });
        }
        Ok(out)
    }

    /// `V_j + Φ^i_{ji} − Σ_i Φ_{ij}W_i(∇Φ)` for each `j`.
    pub fn transport_derivative_residual(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| {
                let contraction: f64 = (0..n).map(|i| self.c.up1.get(i, j, i)).sum();
                let pushed: f64 = (0..n)
                    .map(|i| self.jet.hess_phi[(i, j)] * self.jet.w_grad[i])
                    .sum();
                self.jet.v_grad[j] + contraction - pushed
            })
            .collect()
    }

    /// `Φ^{kl}Φ^{ij}u_{ik}u_{jl}`.
    pub fn hs_term(&self) -> f64 {
        let pu = &self.c.inv * &self.u.hess;
        mat_tr_prod(&pu, &pu)
    }

    /// `Φ^{ijk}u_{ij}u_k`.
    pub fn third_term(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += self.c.up3.get(i, j, k) * self.u.hess[(i, j)] * self.u.grad[k];
                }
            }
        }
        s
    }

    /// `Φ^{ik}_ℓΦ^{jℓ}_k u_iu_j`.
    pub fn pullback_quadratic(&self) -> f64 {
        let n = self.n();
        let g = &self.u.grad;
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                let a: f64 = (0..n).map(|i| self.c.up2.get(i, k, l) * g[i]).sum();
                let b: f64 = (0..n).map(|j| self.c.up2.get(j, l, k) * g[j]).sum();
                s += a * b;
            }
        }
        s
    }

    /// `Φ^{ik}Φ^{jℓ}V_{kℓ}u_iu_j = ξᵗ D²V ξ`.
    pub fn v_term(&self) -> f64 {
        let xi = DVector::from_column_slice(&self.xi);
        xi.dot(&(&self.jet.v_hess * &xi))
    }

    /// `(W_{ij}∘∇Φ)u_iu_j`.
    pub fn w_term(&self) -> f64 {
        let g = DVector::from_column_slice(&self.u.grad);
        g.dot(&(&self.jet.w_hess * &g))
    }

    /// The four-term expansion of `Γ₂(u)`.
    pub fn gamma2_expanded(&self) -> f64 {
        self.hs_term() - self.third_term()
            + 0.5 * (self.pullback_quadratic() + self.v_term())
            + 0.5 * self.w_term()
    }

    /// `¼Φ^{ik}_ℓΦ^{jℓ}_k u_iu_j`.
    pub fn lower_bound(&self) -> f64 {
        0.25 * self.pullback_quadratic()
    }

    /// The part of the expansion that is a trace of a square.
    pub fn trace_square_lhs(&self) -> f64 {
        self.hs_term() - self.third_term() + 0.25 * self.pullback_quadratic()
    }

    /// `b_i^j = Φ^{jk}u_{ki} − ½Φ^{jk}_i u_k`, row `j`, column `i`.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let pu = &self.c.inv * &self.u.hess;
        DMatrix::from_fn(n, n, |j, i| {
            let m: f64 = (0..n)
                .map(|k| self.c.up2.get(j, k, i) * self.u.grad[k])
                .sum();
            pu[(j, i)] - 0.5 * m
        })
    }

    /// `Tr(B²)` through `A = D²Φ·B` and the congruence
    /// `(D²Φ)^{-1/2} A (D²Φ)^{-1/2}`.
    pub fn bmatrix_certificate(&self) -> f64 {
        let a = symmetrize(&(&self.jet.hess_phi * self.b_matrix()));
        let s = self.c.hessian.whiten(&a);
        let h = hs_norm(&s);
        h * h
    }

    /// `(D²_M u)_{ij} = u_{ij} − ½Φ^k_{ij}u_k`.
    pub fn riemannian_hessian(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let c: f64 = (0..n)
                .map(|k| self.c.up1.get(k, i, j) * self.u.grad[k])
                .sum();
            self.u.hess[(i, j)] - 0.5 * c
        })
    }

    /// `‖D²_M u‖²_M`.
    pub fn riemannian_hessian_norm2(&self) -> f64 {
        let pa = &self.c.inv * self.riemannian_hessian();
        mat_tr_prod(&pa, &pa)
    }

    pub fn ricci(&self) -> DMatrix<f64> {
        ricci_from(&self.jet, &self.c)
    }

    /// `Ric_M(∇_M u, ∇_M u)`.
    pub fn ricci_quadratic(&self) -> f64 {
        let xi = DVector::from_column_slice(&self.xi);
        xi.dot(&(self.ricci() * &xi))
    }

    /// Expansion minus the Bochner right-hand side.
    pub fn bochner_residual(&self) -> f64 {
        self.gamma2_expanded() - (self.riemannian_hessian_norm2() + self.ricci_quadratic())
    }

    /// Size of the terms entering the expansion, for relative tolerances.
    pub fn magnitude(&self) -> f64 {
        1.0 + self.hs_term().abs()
            + self.third_term().abs()
            + self.pullback_quadratic().abs()
            + self.v_term().abs()
            + self.w_term().abs()
    }
}

fn ricci_from(jet: &TripleJet, c: &Contracted) -> DMatrix<f64> {
    let n = jet.hess_phi.nrows();
    let hwh = &jet.hess_phi * &jet.w_hess * &jet.hess_phi;
    let m = DMatrix::from_fn(n, n, |i, l| {
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                s += c.up1.get(k, i, j) * c.up1.get(j, l, k);
            }
        }
        0.25 * s + 0.5 * jet.v_hess[(i, l)] + 0.5 * hwh[(i, l)]
    });
    symmetrize(&m)
}

/// Both forms of the pullback metric.
#[derive(Debug, Clone)]
pub struct PullbackMetric {
    /// `Φ^ℓ_{ik}Φ^k_{jℓ}`.
    pub contraction: DMatrix<f64>,
    /// `Tr[(D²Φ)⁻¹∂_i(D²Φ)(D²Φ)⁻¹∂_j(D²Φ)]`.
    pub trace_form: DMatrix<f64>,
}

impl PullbackMetric {
    pub fn discrepancy(&self) -> f64 {
        hs_norm(&(&self.contraction - &self.trace_form))
    }
}

pub fn pullback_from(jet: &TripleJet, c: &Contracted) -> PullbackMetric {
    let n = jet.hess_phi.nrows();
    let contraction = DMatrix::from_fn(n, n, |i, j| {
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += c.up1.get(l, i, k) * c.up1.get(k, j, l);
            }
        }
        s
    });
    let pd: Vec<DMatrix<f64>> = (0..n).map(|i| &c.inv * jet.third_phi.slice(i)).collect();
    let trace_form = DMatrix::from_fn(n, n, |i, j| mat_tr_prod(&pd[i], &pd[j]));
    PullbackMetric {
        contraction,
        trace_form,
    }
}

/// Pullback of the SPD metric under `x ↦ D²Φ(x)`.
pub fn pullback_metric(t: &dyn SmoothTriple, x: &[f64]) -> Result<PullbackMetric> {
    let jet = t.jet(x)?;
    let c = contract(&jet.hess_phi, &jet.third_phi)?;
    Ok(pullback_from(&jet, &c))
}

pub fn ricci_tensor(t: &dyn SmoothTriple, x: &[f64]) -> Result<DMatrix<f64>> {
    let jet = t.jet(x)?;
    let c = contract(&jet.hess_phi, &jet.third_phi)?;
    Ok(ricci_from(&jet, &c))
}

pub fn operator_l(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<LValue> {
    Gamma2Point::new(t, u, x)?.operator_l()
}

pub fn gamma2_expanded(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    Ok(Gamma2Point::new(t, u, x)?.gamma2_expanded())
}

pub fn gamma2_lower_bound(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    Ok(Gamma2Point::new(t, u, x)?.lower_bound())
}

pub fn bmatrix_certificate(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    Ok(Gamma2Point::new(t, u, x)?.bmatrix_certificate())
}

pub fn bochner_residual(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    Ok(Gamma2Point::new(t, u, x)?.bochner_residual())
}

/// `V_j + Φ^i_{ji} − Σ_i Φ_{ij}W_i(∇Φ)`.
pub fn transport_derivative_residual(t: &dyn SmoothTriple, x: &[f64]) -> Result<Vec<f64>> {
    let jet = t.jet(x)?;
    let n = jet.grad_phi.len();
    let u = TestJet {
        value: 0.0,
        grad: vec![0.0; n],
        hess: DMatrix::zeros(n, n),
    };
    Ok(Gamma2Point::from_jets(jet, u)?.transport_derivative_residual())
}

/// Central-difference step used by the finite-difference oracles.
pub fn fd_step(xk: f64) -> f64 {
    1e-4 * (1.0 + xk.abs())
}

/// `∂_k f(x)` for vector-valued `f` by Richardson-extrapolated central
/// differences with base step [`fd_step`].
pub fn richardson_partial(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let central = |h: f64| -> Result<Vec<f64>> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let (fp, fm) = (f(&xp)?, f(&xm)?);
        Ok(fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    };
    let h = fd_step(x[k]);
    let (coarse, fine) = (central(h)?, central(h / 2.0)?);
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

/// `Lf` at `x` with `∇f` supplied and `D²f` taken by [`richardson_partial`] of
/// `∇f`.
pub fn l_of_gradient_field(
    t: &dyn SmoothTriple,
    grad_f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
) -> Result<f64> {
    let n = x.len();
    let jet = t.jet(x)?;
    let c = contract(&jet.hess_phi, &jet.third_phi)?;
    let g = grad_f(x)?;
    let mut hess = DMatrix::zeros(n, n);
    for k in 0..n {
        let d = richardson_partial(&|y: &[f64]| grad_f(y), x, k)?;
        for i in 0..n {
            hess[(i, k)] = d[i];
        }
    }
    let hess = symmetrize(&hess);
    Ok(mat_tr_prod(&c.inv, &hess) - crate::linalg::dot(&jet.w_grad, &g))
}

/// `Γ₂(u) = ½L(Φ^{ij}u_iu_j) − Φ^{ij}(Lu)_iu_j`, with the outer derivatives
/// by [`richardson_partial`].
pub fn gamma2_direct_fd(t: &dyn SmoothTriple, u: &dyn TestFunction, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let grad_q = |y: &[f64]| -> Result<Vec<f64>> {
        let p = Gamma2Point::new(t, u, y)?;
        Ok((0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    s += 2.0 * p.xi[i] * p.u.hess[(i, k)];
                    for j in 0..n {
                        s -= p.c.up2.get(i, j, k) * p.u.grad[i] * p.u.grad[j];
                    }
                }
                s
            })
            .collect())
    };
    let half_lq = 0.5 * l_of_gradient_field(t, &grad_q, x)?;
    let lu = |y: &[f64]| -> Result<f64> { Ok(Gamma2Point::new(t, u, y)?.operator_l()?.w_form) };
    let p = Gamma2Point::new(t, u, x)?;
    let mut cross = 0.0;
    for k in 0..n {
        cross += p.xi[k] * richardson_partial(&|y: &[f64]| Ok(vec![lu(y)?]), x, k)?[0];
    }
    Ok(half_lq - cross)
}

/// `Γ₂(Φ_k)` rebuilt as `½L(Φ_{kk}) + V_{kk}`, the form obtained by
/// differentiating `LΦ_k = −V_k` once more.
pub fn gamma2_phi_partial_via_l(t: &dyn SmoothTriple, k: usize, x: &[f64]) -> Result<f64> {
    let n = t.dim();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "coordinate {k} out of range"
        )));
    }
    let grad = |y: &[f64]| -> Result<Vec<f64>> {
        let j = t.jet(y)?;
        Ok((0..n).map(|i| j.third_phi.get(k, k, i)).collect())
    };
    let l = l_of_gradient_field(t, &grad, x)?;
    Ok(0.5 * l + t.jet(x)?.v_hess[(k, k)])
}

/// Norm of `d/dt Λ(D²Φ(x + te))` at `t = 0` by central differences, and
/// `√g_ee`.
pub fn lambda_differential(t: &dyn SmoothTriple, x: &[f64], e: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    let len = crate::linalg::norm(e);
    let e: Vec<f64> = e.iter().map(|v| v / len).collect();
    let h = 1e-5;
    let at = |s: f64| -> Result<crate::spd_geometry::LogSpectrum> {
        let y: Vec<f64> = (0..n).map(|i| x[i] + s * e[i]).collect();
        Ok(log_eigen_map(&SpdMatrix::new(symmetrize(
            &t.jet(&y)?.hess_phi,
        ))?))
    };
    let (lp, lm) = (at(h)?, at(-h)?);
    let d = lp.distance(&lm) / (2.0 * h);
    let g = pullback_metric(t, x)?.contraction;
    let ev = DVector::from_column_slice(&e);
    Ok((d, ev.dot(&(&g * &ev)).max(0.0).sqrt()))
}

#[cfg(test)]
mod tests;
