//! The manifold of symmetric positive-definite matrices with its affine-invariant
//! Riemannian metric.
//!
//! All matrix functions (square roots, powers, logarithms) go through the cached
//! eigendecomposition of an [`SpdMatrix`], so distances, geodesics and
//! log-spectra share one numerical pathway. Spectra are always sorted in
//! descending order.

use crate::error::{Error, Result};
use crate::linalg::{self, hs_norm, spectral_compose, sym_eigen, SymEigen};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Inputs whose relative asymmetry exceeds this are rejected rather than
/// symmetrized.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// A symmetric matrix, e.g. a tangent vector to the SPD manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let defect = linalg::asymmetry(&m);
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        Ok(Self(linalg::symmetrize(&m)))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn hs_norm(&self) -> f64 {
        hs_norm(&self.0)
    }
}

/// A symmetric positive-definite matrix together with its spectral data.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: DMatrix<f64>,
    eig: SymEigen,
}

impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

impl SpdMatrix {
    /// Validates, symmetrizes and diagonalizes `m`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let sym = SymMatrix::new(m)?;
        Self::from_sym(sym)
    }

    pub fn from_sym(sym: SymMatrix) -> Result<Self> {
        let mat = sym.0;
        let eig = sym_eigen(&mat);
        let min = *eig.values.last().expect("non-empty matrix");
        if !(min > 0.0) || !min.is_finite() {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(Self { mat, eig })
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// Builds `Σ λᵢ vᵢ vᵢᵗ` from an orthonormal basis (columns of `basis`).
    pub fn from_spectrum(values: &[f64], basis: &DMatrix<f64>) -> Result<Self> {
        let n = values.len();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        if basis.nrows() != n || basis.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: basis.nrows(),
            });
        }
        Self::new(basis * d * basis.transpose())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eig.vectors
    }

    pub fn condition_number(&self) -> f64 {
        self.eig.values[0] / self.eig.values[self.dim() - 1]
    }

    /// `A^p` as a plain matrix.
    pub fn power_matrix(&self, p: f64) -> DMatrix<f64> {
        spectral_compose(&self.eig, |x| x.powf(p))
    }

    pub fn power(&self, p: f64) -> Result<SpdMatrix> {
        SpdMatrix::new(self.power_matrix(p))
    }

    pub fn sqrt(&self) -> SpdMatrix {
        self.power(0.5).expect("square root of SPD is SPD")
    }

    pub fn inverse(&self) -> SpdMatrix {
        self.power(-1.0).expect("inverse of SPD is SPD")
    }

    /// `A^{-1/2} M A^{-1/2}` for a square matrix `M`.
    pub fn whiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.power_matrix(-0.5);
        &r * m * &r
    }

    /// Congruence `Tᵗ A T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> Result<SpdMatrix> {
        if t.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: t.nrows(),
            });
        }
        SpdMatrix::new(t.transpose() * &self.mat * t)
    }

    /// Reconstruction error `‖Σλᵢvᵢvᵢᵗ − A‖_HS / ‖A‖_HS`.
    pub fn reconstruction_error(&self) -> f64 {
        hs_norm(&(spectral_compose(&self.eig, |x| x) - &self.mat)) / hs_norm(&self.mat)
    }

    pub fn log_spectrum(&self) -> LogSpectrum {
        LogSpectrum(self.eig.values.iter().map(|x| x.ln()).collect())
    }

    /// Product of the `k` largest eigenvalues.
    pub fn volume_ratio(&self, k: usize) -> Result<f64> {
        check_rank(k, self.dim())?;
        Ok(self.eig.values[..k].iter().product())
    }
}

/// Logarithms of the eigenvalues, sorted non-increasing.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogSpectrum(Vec<f64>);

impl LogSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean distance between two log-spectra.
    pub fn distance(&self, other: &LogSpectrum) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(())
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

fn check_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    Ok(())
}

/// `f(A) = Σ f(λᵢ) vᵢ vᵢᵗ`.
pub fn matrix_function(a: &SpdMatrix, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    for &lam in a.eigenvalues() {
        if !f(lam).is_finite() {
            return Err(Error::NonFiniteSpectralValue { eigenvalue: lam });
        }
    }
    Ok(SymMatrix(spectral_compose(&a.eig, f)))
}

/// Eigenvalues (descending) of `A^{-1/2} B A^{-1/2}`.
pub fn relative_eigenvalues(a: &SpdMatrix, b: &SpdMatrix) -> Result<Vec<f64>> {
    check_same_dim(a.dim(), b.dim())?;
    let c = linalg::symmetrize(&a.whiten(b.matrix()));
    Ok(sym_eigen(&c).values)
}

/// Affine-invariant distance `‖log(A^{-1/2} B A^{-1/2})‖_HS`.
pub fn spd_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    let ev = relative_eigenvalues(a, b)?;
    Ok(ev.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Riemannian norm `‖A^{-1/2} B A^{-1/2}‖_HS` of a tangent vector `B` at `A`.
pub fn local_norm(a: &SpdMatrix, b: &SymMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    Ok(hs_norm(&a.whiten(b.matrix())))
}

/// The same norm through `√Tr[(A^{-1}B)²]`.
pub fn local_norm_trace(a: &SpdMatrix, b: &SymMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    let m = a.power_matrix(-1.0) * b.matrix();
    Ok((&m * &m).trace().max(0.0).sqrt())
}

/// Point `γ(s) = A^{1/2} (A^{-1/2} B A^{-1/2})^s A^{1/2}` of the geodesic from
/// `A` to `B`.
pub fn geodesic_point(a: &SpdMatrix, b: &SpdMatrix, s: f64) -> Result<SpdMatrix> {
    check_same_dim(a.dim(), b.dim())?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "geodesic parameter {s} outside [0, 1]"
        )));
    }
    if s == 0.0 {
        return Ok(a.clone());
    }
    if s == 1.0 {
        return Ok(b.clone());
    }
    let c = linalg::symmetrize(&a.whiten(b.matrix()));
    let cs = spectral_compose(&sym_eigen(&c), |x| x.powf(s));
    let r = a.power_matrix(0.5);
    SpdMatrix::new(&r * cs * &r)
}

/// `m` equally spaced points of the geodesic from `A` to `B`, endpoints
/// included. One eigendecomposition serves the whole curve.
pub fn geodesic_curve(a: &SpdMatrix, b: &SpdMatrix, m: usize) -> Result<Vec<SpdMatrix>> {
    check_same_dim(a.dim(), b.dim())?;
    if m < 2 {
        return Err(Error::InvalidArgument(
            "curve needs at least 2 points".into(),
        ));
    }
    let eig = sym_eigen(&linalg::symmetrize(&a.whiten(b.matrix())));
    let r = a.power_matrix(0.5);
    (0..m)
        .map(|k| match k {
            0 => Ok(a.clone()),
            _ if k == m - 1 => Ok(b.clone()),
            _ => {
                let s = k as f64 / (m - 1) as f64;
                SpdMatrix::new(&r * spectral_compose(&eig, |x| x.powf(s)) * &r)
            }
        })
        .collect()
}

/// Exponential map `A^{1/2} exp(U) A^{1/2}` for a tangent `U` given in
/// whitened coordinates, so the result lies at distance `‖U‖_HS` from `A`.
pub fn exp_whitened(a: &SpdMatrix, u: &SymMatrix) -> Result<SpdMatrix> {
    check_same_dim(a.dim(), u.dim())?;
    let e = spectral_compose(&sym_eigen(u.matrix()), f64::exp);
    let r = a.power_matrix(0.5);
    SpdMatrix::new(&r * e * &r)
}

/// Length of a curve sampled at uniform parameters on `[0, 1]`.
///
/// Tangents come from fourth-order finite differences (one-sided near the
/// ends; second order below five points) and the integral of
/// `‖γ̇(s)‖_{γ(s)}` is taken with the trapezoidal rule.
pub fn curve_length(points: &[SpdMatrix]) -> Result<f64> {
    let m = points.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "curve needs at least 2 points".into(),
        ));
    }
    let n = points[0].dim();
    for p in points {
        check_same_dim(n, p.dim())?;
    }
    let h = 1.0 / (m - 1) as f64;
    let mat = |k: usize| points[k].matrix();
    let stencil = |base: usize, c: [f64; 5]| -> DMatrix<f64> {
        let mut t = DMatrix::zeros(n, n);
        for (j, cj) in c.iter().enumerate() {
            if *cj != 0.0 {
                t += mat(base + j) * *cj;
            }
        }
        t / (12.0 * h)
    };
    let speeds: Vec<f64> = (0..m)
        .map(|k| {
            let tangent = if m == 2 {
                (mat(1) - mat(0)) / h
            } else if m < 5 {
                if k == 0 {
                    (mat(1) * 4.0 - mat(0) * 3.0 - mat(2)) / (2.0 * h)
                } else if k == m - 1 {
                    (mat(m - 1) * 3.0 - mat(m - 2) * 4.0 + mat(m - 3)) / (2.0 * h)
                } else {
                    (mat(k + 1) - mat(k - 1)) / (2.0 * h)
                }
            } else if k == 0 {
                stencil(0, [-25.0, 48.0, -36.0, 16.0, -3.0])
            } else if k == 1 {
                stencil(0, [-3.0, -10.0, 18.0, -6.0, 1.0])
            } else if k == m - 2 {
                stencil(m - 5, [-1.0, 6.0, -18.0, 10.0, 3.0])
            } else if k == m - 1 {
                stencil(m - 5, [3.0, -16.0, 36.0, -48.0, 25.0])
            } else {
                stencil(k - 2, [1.0, -8.0, 0.0, 8.0, -1.0])
            };
            hs_norm(&points[k].whiten(&linalg::symmetrize(&tangent)))
        })
        .collect();
    let inner: f64 = speeds[1..m - 1].iter().sum();
    Ok(h * (inner + 0.5 * (speeds[0] + speeds[m - 1])))
}

/// `Λ(A)`: descending logarithms of the eigenvalues.
pub fn log_eigen_map(a: &SpdMatrix) -> LogSpectrum {
    a.log_spectrum()
}

/// `log(Av·v)`.
pub fn log_quadratic_form(a: &SpdMatrix, v: &[f64]) -> Result<f64> {
    check_same_dim(a.dim(), v.len())?;
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidArgument("direction vector is zero".into()));
    }
    let v = DVector::from_column_slice(v);
    Ok((a.matrix() * &v).dot(&v).ln())
}

/// Maximal `k`-volume distortion of `T`: the product of its `k` largest
/// singular values.
pub fn volume_ratio(t: &DMatrix<f64>, k: usize) -> Result<f64> {
    check_square(t)?;
    check_rank(k, t.nrows())?;
    Ok(linalg::singular_values(t)[..k].iter().product())
}

/// Margins of the log-majorization chain relating `γ = Λ(A^{1/2} B A^{1/2})`
/// to `α = Λ(A)` and `β = Λ(B)`. Every margin is nonnegative when the
/// corresponding inequality holds.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MajorizationReport {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `Σ_{i≤k}(αᵢ+βᵢ) − Σ_{i≤k} γᵢ` for `k = 1..n` (top partial products).
    pub top_partial: Vec<f64>,
    /// `Σ_{i>n−k} γᵢ − Σ_{i>n−k}(αᵢ+βᵢ)` for `k = 1..n` (bottom partial products
    /// of the inverses).
    pub bottom_partial: Vec<f64>,
    /// `Σ((αᵢ+βᵢ)₊)² − Σ((γᵢ)₊)²`.
    pub positive_part: f64,
    /// `Σ((−αᵢ−βᵢ)₊)² − Σ((−γᵢ)₊)²`.
    pub negative_part: f64,
    /// `Σ(αᵢ+βᵢ)² − Σγᵢ²`.
    pub sum_of_squares: f64,
    /// `‖log A‖_HS + ‖log B‖_HS − ‖log(A^{1/2} B A^{1/2})‖_HS`.
    pub triangle: f64,
}

impl MajorizationReport {
    pub fn min_margin(&self) -> f64 {
        self.top_partial
            .iter()
            .chain(&self.bottom_partial)
            .chain([
                &self.positive_part,
                &self.negative_part,
                &self.sum_of_squares,
                &self.triangle,
            ])
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.min_margin() >= -slack
    }
}

pub fn majorization_check(a: &SpdMatrix, b: &SpdMatrix) -> Result<MajorizationReport> {
    check_same_dim(a.dim(), b.dim())?;
    let n = a.dim();
    let r = a.power_matrix(0.5);
    let middle = SpdMatrix::new(&r * b.matrix() * &r)?;
    let gamma = middle.log_spectrum().0;
    let alpha = a.log_spectrum().0;
    let beta = b.log_spectrum().0;
    let sum: Vec<f64> = alpha.iter().zip(&beta).map(|(x, y)| x + y).collect();

    let mut top_partial = Vec::with_capacity(n);
    let mut bottom_partial = Vec::with_capacity(n);
    let (mut s_sum, mut s_gamma) = (0.0, 0.0);
    let (mut b_sum, mut b_gamma) = (0.0, 0.0);
    for k in 0..n {
        s_sum += sum[k];
        s_gamma += gamma[k];
        top_partial.push(s_sum - s_gamma);
        b_sum += sum[n - 1 - k];
        b_gamma += gamma[n - 1 - k];
        bottom_partial.push(b_gamma - b_sum);
    }
    let pos2 = |x: f64| x.max(0.0).powi(2);
    let positive_part =
        sum.iter().map(|&x| pos2(x)).sum::<f64>() - gamma.iter().map(|&x| pos2(x)).sum::<f64>();
    let negative_part =
        sum.iter().map(|&x| pos2(-x)).sum::<f64>() - gamma.iter().map(|&x| pos2(-x)).sum::<f64>();
    let sum_of_squares =
        sum.iter().map(|x| x * x).sum::<f64>() - gamma.iter().map(|x| x * x).sum::<f64>();
    let triangle = linalg::norm(&alpha) + linalg::norm(&beta) - linalg::norm(&gamma);
    Ok(MajorizationReport {
        gamma,
        alpha,
        beta,
        top_partial,
        bottom_partial,
        positive_part,
        negative_part,
        sum_of_squares,
        triangle,
    })
}

/// `√(Σ log²(λᵢ/μᵢ))` for the sorted spectra of `A` and `B`; bounded by
/// `dist(A, B)`.
pub fn sorted_spectra_deviation(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    check_same_dim(a.dim(), b.dim())?;
    Ok(a.log_spectrum().distance(&b.log_spectrum()))
}

/// Lower estimate of the upper gradient `|∇F|(A)`: the largest difference
/// quotient `|F(Y) − F(Z)| / dist(Y, Z)` over `probes` random pairs in the
/// geodesic ball `B(A, eps)`.
///
/// Even-numbered probes place both points on one random geodesic through `A`;
/// odd-numbered probes draw the two points along independent directions.
pub fn numeric_upper_gradient<F, R>(
    f: F,
    a: &SpdMatrix,
    eps: f64,
    probes: usize,
    rng: &mut R,
) -> Result<f64>
where
    F: Fn(&SpdMatrix) -> f64,
    R: Rng + ?Sized,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let n = a.dim();
    let mut best = 0.0f64;
    for probe in 0..probes {
        let (y, z) = if probe % 2 == 0 {
            let u = random_unit_tangent(n, rng);
            let ends = scaled(&u, eps);
            let p = exp_whitened(a, &ends)?;
            let q = exp_whitened(a, &scaled(&u, -eps))?;
            let s1: f64 = rng.random();
            let s2: f64 = rng.random();
            (geodesic_point(&q, &p, s1)?, geodesic_point(&q, &p, s2)?)
        } else {
            let u1 = random_unit_tangent(n, rng);
            let u2 = random_unit_tangent(n, rng);
            let r1 = eps * rng.random::<f64>();
            let r2 = eps * rng.random::<f64>();
            (
                exp_whitened(a, &scaled(&u1, r1))?,
                exp_whitened(a, &scaled(&u2, r2))?,
            )
        };
        let d = spd_distance(&y, &z)?;
        if d < 1e-12 * eps {
            continue;
        }
        let (fy, fz) = (f(&y), f(&z));
        if !fy.is_finite() || !fz.is_finite() {
            return Err(Error::NonFiniteProbe { probe });
        }
        best = best.max((fy - fz).abs() / d);
    }
    Ok(best)
}

fn scaled(u: &SymMatrix, t: f64) -> SymMatrix {
    SymMatrix(u.0.clone() * t)
}

/// Symmetric matrix with isotropic Gaussian direction and unit HS norm.
pub fn random_unit_tangent<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = rng.sample(StandardNormal);
        for j in (i + 1)..n {
            let x: f64 = rng.sample(StandardNormal);
            m[(i, j)] = x * std::f64::consts::FRAC_1_SQRT_2;
            m[(j, i)] = m[(i, j)];
        }
    }
    let norm = hs_norm(&m);
    SymMatrix(m / norm)
}

/// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian
/// matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random SPD matrix `QᵗDQ` with `D` log-uniform on `[e^{-3}, e^{3}]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpdMatrix {
    random_spd_with_range(n, 3.0, rng)
}

/// Random SPD matrix with log-eigenvalues uniform on `[-log_range, log_range]`.
pub fn random_spd_with_range<R: Rng + ?Sized>(n: usize, log_range: f64, rng: &mut R) -> SpdMatrix {
    let q = random_orthogonal(n, rng);
    let d: Vec<f64> = (0..n)
        .map(|_| (rng.random_range(-log_range..=log_range)).exp())
        .collect();
    let dm = DMatrix::from_diagonal(&DVector::from_vec(d));
    SpdMatrix::new(q.transpose() * dm * q).expect("constructed SPD")
}

/// Random invertible matrix `Q₁ D Q₂` with singular values log-uniform on
/// `[e^{-1}, e]`.
pub fn random_invertible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let q1 = random_orthogonal(n, rng);
    let q2 = random_orthogonal(n, rng);
    let d: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-1.0f64..=1.0).exp())
        .collect();
    q1 * DMatrix::from_diagonal(&DVector::from_vec(d)) * q2
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn diag(d: &[f64]) -> SpdMatrix {
        SpdMatrix::from_diagonal(d).unwrap()
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        hs_norm(&(a - b)) <= tol * hs_norm(b).max(1.0)
    }

    #[test]
    fn construction_rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            SpdMatrix::new(asym),
            Err(Error::NotSymmetric { .. })
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            SpdMatrix::new(indefinite),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(SymMatrix::new(rect).is_err());
    }

    #[test]
    fn reconstruction_invariant() {
        let mut r = rng(1);
        for n in 1..=8 {
            let a = random_spd(n, &mut r);
            assert!(a.reconstruction_error() <= 1e-10);
            assert!(a.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn matrix_function_examples() {
        let mut r = rng(2);
        let a = random_spd(4, &mut r);
        let id = matrix_function(&a, |x| x).unwrap();
        assert!(close(id.matrix(), a.matrix(), 1e-12));

        let d = diag(&[E, E * E]);
        let l = matrix_function(&d, f64::ln).unwrap();
        assert!(close(
            l.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            1e-14
        ));

        let s = matrix_function(&a, f64::sqrt).unwrap();
        assert!(close(&(s.matrix() * s.matrix()), a.matrix(), 1e-10));
    }

    #[test]
    fn matrix_function_reports_offending_eigenvalue() {
        let d = diag(&[2.0, 0.5]);
        let err = matrix_function(&d, |x| if x < 1.0 { f64::NAN } else { x }).unwrap_err();
        assert_eq!(err, Error::NonFiniteSpectralValue { eigenvalue: 0.5 });
    }

    #[test]
    fn distance_examples() {
        let id = SpdMatrix::identity(2);
        assert_eq!(spd_distance(&id, &id).unwrap(), 0.0);
        let b = diag(&[E * E, 1.0 / E]);
        assert!((spd_distance(&id, &b).unwrap() - 5f64.sqrt()).abs() < 1e-14);
        assert!(spd_distance(&id, &SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn distance_matches_general_eigensolve_of_product() {
        // Oracle: eigenvalues of the non-symmetric A⁻¹B from nalgebra's Schur form.
        let mut r = rng(3);
        for _ in 0..20 {
            let a = random_spd(5, &mut r);
            let b = random_spd(5, &mut r);
            let prod = a.matrix().clone().try_inverse().unwrap() * b.matrix();
            let ev = prod.complex_eigenvalues();
            let oracle = ev.iter().map(|z| z.re.ln().powi(2)).sum::<f64>().sqrt();
            let d = spd_distance(&a, &b).unwrap();
            assert!(
                (d - oracle).abs() <= 1e-10 * oracle.max(1.0),
                "{d} vs {oracle}"
            );
        }
    }

    #[test]
    fn local_norm_examples() {
        let mut r = rng(4);
        let a = random_spd(3, &mut r);
        let b = random_unit_tangent(3, &mut r);
        let id = SpdMatrix::identity(3);
        assert!((local_norm(&id, &b).unwrap() - b.hs_norm()).abs() < 1e-14);
        let a_as_tangent = SymMatrix::new(a.matrix().clone()).unwrap();
        assert!((local_norm(&a, &a_as_tangent).unwrap() - 3f64.sqrt()).abs() < 1e-10);
        let n1 = local_norm(&a, &b).unwrap();
        let n2 = local_norm_trace(&a, &b).unwrap();
        assert!((n1 - n2).abs() <= 1e-10 * n1.max(1.0));
    }

    #[test]
    fn local_norm_is_small_distance_limit() {
        let mut r = rng(5);
        let a = random_spd(4, &mut r);
        let b = random_unit_tangent(4, &mut r);
        let eps = 1e-4;
        let moved = SpdMatrix::new(a.matrix() + b.matrix() * eps).unwrap();
        let ratio = spd_distance(&moved, &a).unwrap() / eps;
        let norm = local_norm(&a, &b).unwrap();
        assert!((ratio - norm).abs() <= 1e-3 * norm, "{ratio} vs {norm}");
        // Second-order accurate in eps, so the stated 1e-5 relative is met at
        // smaller steps.
        let eps = 1e-6;
        let moved = SpdMatrix::new(a.matrix() + b.matrix() * eps).unwrap();
        let ratio = spd_distance(&moved, &a).unwrap() / eps;
        assert!((ratio - norm).abs() <= 1e-5 * norm);
    }

    #[test]
    fn geodesic_examples() {
        let mut r = rng(6);
        let a = random_spd(3, &mut r);
        let b = random_spd(3, &mut r);
        assert_eq!(geodesic_point(&a, &b, 0.0).unwrap(), a);
        assert_eq!(geodesic_point(&a, &b, 1.0).unwrap(), b);
        assert!(geodesic_point(&a, &b, 1.5).is_err());
        let mid = geodesic_point(&SpdMatrix::identity(2), &diag(&[E * E, 1.0]), 0.5).unwrap();
        assert!(close(mid.matrix(), diag(&[E, 1.0]).matrix(), 1e-14));
        // Nearly-endpoint evaluations still reproduce the endpoints.
        let near = geodesic_point(&a, &b, 1.0 - 1e-15).unwrap();
        assert!(close(near.matrix(), b.matrix(), 1e-10));
    }

    #[test]
    fn geodesic_has_constant_speed() {
        let mut r = rng(7);
        let a = random_spd(4, &mut r);
        let b = random_spd(4, &mut r);
        let d = spd_distance(&a, &b).unwrap();
        let h = 1e-5;
        for s in [0.25, 0.5, 0.75] {
            let p = geodesic_point(&a, &b, s + h).unwrap();
            let m = geodesic_point(&a, &b, s - h).unwrap();
            let tangent = SymMatrix::new((p.matrix() - m.matrix()) / (2.0 * h)).unwrap();
            let here = geodesic_point(&a, &b, s).unwrap();
            let speed = local_norm(&here, &tangent).unwrap();
            assert!((speed - d).abs() <= 1e-5, "s={s}: {speed} vs {d}");
        }
    }

    fn sample_geodesic(a: &SpdMatrix, b: &SpdMatrix, m: usize) -> Vec<SpdMatrix> {
        (0..m)
            .map(|k| geodesic_point(a, b, k as f64 / (m - 1) as f64).unwrap())
            .collect()
    }

    #[test]
    fn curve_length_examples() {
        let a = SpdMatrix::identity(2);
        assert_eq!(
            curve_length(&[a.clone(), a.clone(), a.clone()]).unwrap(),
            0.0
        );
        assert!(curve_length(std::slice::from_ref(&a)).is_err());

        let b = diag(&[E * E, 1.0]);
        let pts = sample_geodesic(&a, &b, 1000);
        assert!((curve_length(&pts).unwrap() - 2.0).abs() < 1e-4);

        let mut r = rng(8);
        let t = random_invertible(2, &mut r);
        let conj: Vec<SpdMatrix> = pts.iter().map(|p| p.congruence(&t).unwrap()).collect();
        let l1 = curve_length(&pts).unwrap();
        let l2 = curve_length(&conj).unwrap();
        assert!((l1 - l2).abs() < 1e-4);
    }

    #[test]
    fn log_eigen_examples() {
        assert_eq!(
            log_eigen_map(&SpdMatrix::identity(3)).values(),
            &[0.0, 0.0, 0.0]
        );
        let l = log_eigen_map(&diag(&[E, E.powi(3)]));
        assert!((l.values()[0] - 3.0).abs() < 1e-14 && (l.values()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_quadratic_form_examples() {
        assert_eq!(
            log_quadratic_form(&SpdMatrix::identity(2), &[0.6, 0.8]).unwrap(),
            0.0
        );
        assert!(
            (log_quadratic_form(&diag(&[E * E, 1.0]), &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-14
        );
        assert!(log_quadratic_form(&SpdMatrix::identity(2), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn volume_ratio_examples() {
        assert_eq!(volume_ratio(&DMatrix::identity(3, 3), 2).unwrap(), 1.0);
        let d = diag(&[3.0, 2.0, 1.0]);
        assert!((volume_ratio(d.matrix(), 2).unwrap() - 6.0).abs() < 1e-13);
        assert!((d.volume_ratio(2).unwrap() - 6.0).abs() < 1e-13);
        assert!(volume_ratio(d.matrix(), 0).is_err());
        assert!(volume_ratio(d.matrix(), 4).is_err());
    }

    #[test]
    fn volume_ratio_matches_svd_and_is_submultiplicative() {
        let mut r = rng(9);
        for _ in 0..200 {
            let n = r.random_range(2..=6);
            let a = DMatrix::<f64>::from_fn(n, n, |_, _| r.sample(StandardNormal));
            let b = DMatrix::<f64>::from_fn(n, n, |_, _| r.sample(StandardNormal));
            let sv = a.clone().svd(false, false).singular_values;
            let mut sv: Vec<f64> = sv.iter().copied().collect();
            sv.sort_by(|x, y| y.total_cmp(x));
            for k in 1..=n {
                let ours = volume_ratio(&a, k).unwrap();
                let oracle: f64 = sv[..k].iter().product();
                assert!((ours - oracle).abs() <= 1e-9 * oracle.max(1e-300));
                let ab = volume_ratio(&(&a * &b), k).unwrap();
                assert!(ab <= ours * volume_ratio(&b, k).unwrap() * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn majorization_identity_and_commuting_cases() {
        let id = SpdMatrix::identity(3);
        let rep = majorization_check(&id, &id).unwrap();
        assert!(rep.min_margin().abs() < 1e-14);

        let a = diag(&[5.0, 0.5, 2.0]);
        let b = diag(&[0.1, 3.0, 1.5]);
        let rep = majorization_check(&a, &b).unwrap();
        let mut sums: Vec<f64> = [5.0f64 * 0.1, 0.5 * 3.0, 2.0 * 1.5]
            .iter()
            .map(|x| x.ln())
            .collect();
        sums.sort_by(|x, y| y.total_cmp(x));
        for (g, s) in rep.gamma.iter().zip(&sums) {
            assert!((g - s).abs() < 1e-13);
        }
        assert!(rep.triangle >= 0.0);
        assert!(rep.holds(1e-12));
    }

    #[test]
    fn majorization_holds_on_random_pairs() {
        let mut r = rng(10);
        for _ in 0..300 {
            let n = r.random_range(1..=8);
            let a = random_spd(n, &mut r);
            let b = random_spd(n, &mut r);
            let rep = majorization_check(&a, &b).unwrap();
            assert!(rep.holds(1e-9), "{rep:?}");
        }
    }

    #[test]
    fn eigenvalue_derivative_along_line() {
        // dλᵢ/dt (A + tB) = Bvᵢ·vᵢ for simple eigenvalues.
        let mut r = rng(11);
        let mut tested = 0;
        while tested < 20 {
            let a = random_spd(4, &mut r);
            let gaps_ok = a.eigenvalues().windows(2).all(|w| w[0] - w[1] > 1e-6);
            if !gaps_ok {
                continue;
            }
            tested += 1;
            let b = random_unit_tangent(4, &mut r);
            let h = 1e-6;
            let plus = SpdMatrix::new(a.matrix() + b.matrix() * h).unwrap();
            let minus = SpdMatrix::new(a.matrix() - b.matrix() * h).unwrap();
            for i in 0..4 {
                let fd = (plus.eigenvalues()[i] - minus.eigenvalues()[i]) / (2.0 * h);
                let v = a.eigenvectors().column(i);
                let exact = (b.matrix() * v).dot(&v);
                assert!((fd - exact).abs() < 1e-5, "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn upper_gradient_examples() {
        let mut r = rng(12);
        let a = random_spd(2, &mut r);
        let constant = numeric_upper_gradient(|_| 3.0, &a, 0.1, 50, &mut r).unwrap();
        assert_eq!(constant, 0.0);

        let v = [0.3, -1.2];
        let lq = numeric_upper_gradient(
            |m| log_quadratic_form(m, &v).unwrap(),
            &a,
            1e-3,
            500,
            &mut r,
        )
        .unwrap();
        assert!(lq <= 1.0 + 1e-6 && lq > 0.5);

        let c = random_spd(2, &mut r);
        let few =
            numeric_upper_gradient(|m| spd_distance(m, &c).unwrap(), &a, 1e-3, 20, &mut r).unwrap();
        let many = numeric_upper_gradient(|m| spd_distance(m, &c).unwrap(), &a, 1e-3, 4000, &mut r)
            .unwrap();
        assert!(many <= 1.0 + 1e-6);
        assert!(many > 0.99, "{many}");
        assert!(many >= few - 1e-3);

        assert!(numeric_upper_gradient(|_| 1.0, &a, 0.0, 10, &mut r).is_err());
        let err = numeric_upper_gradient(|_| f64::NAN, &a, 0.1, 10, &mut r).unwrap_err();
        assert_eq!(err, Error::NonFiniteProbe { probe: 0 });
    }
}
