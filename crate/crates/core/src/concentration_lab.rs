//! Distribution of the log-spectrum `Λ(X)` of `D²Φ(X)` under the source
//! measure, and the variance, Poincaré and exponential-concentration
//! statistics built on it.
//!
//! Every bound check here is of the form "estimate ≤ bound + 3 s.e."; the
//! estimates carry delete-one-block jackknife standard errors.

use crate::brenier::{Map1D, TransportMap};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, stream_rng, ExecMode};
use crate::measures::LogConcaveMeasure1D;
use crate::quadrature::GaussLegendre;
use crate::spd_geometry::{log_eigen_map, spd_distance, LogSpectrum, SpdMatrix};
use crate::stats::{jackknife_means, jackknife_variance, pairwise_sum, Estimate, JACKKNIFE_BLOCKS};

/// Variance bound in the log-spectrum concentration inequality.
pub const VARIANCE_BOUND: f64 = 4.0;

/// Default constant in the exponential concentration check.
pub const DEFAULT_EXP_C: f64 = 0.1;

/// Calibration grid for the exponential concentration constant.
pub const C_GRID: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];

/// Smallest MC sample accepted.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralSample {
    pub x: Vec<f64>,
    pub spectrum: LogSpectrum,
    /// `log(D²Φ(x)v·v)` for each configured direction.
    pub quadform_logs: Vec<f64>,
    pub weight: f64,
    #[serde(skip)]
    pub matrix: Option<SpdMatrix>,
}

/// Draws from `Λ_*μ` together with the bookkeeping of rejected draws.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    pub samples: Vec<SpectralSample>,
    /// Draws whose Hessian could not be formed (outside the domain of the
    /// estimator or not positive-definite); excluded from every statistic.
    pub flagged: usize,
    pub approximate: bool,
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub n_samples: usize,
    pub seed: u64,
    /// Directions `v` for the quadratic-form statistics; normalized on use.
    pub directions: Vec<Vec<f64>>,
    /// Keep each `D²Φ(X)` for statistics on the matrix itself.
    pub keep_matrices: bool,
    pub mode: ExecMode,
}

impl SampleOptions {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            directions: vec![],
            keep_matrices: false,
            mode: ExecMode::Parallel,
        }
    }
}

/// `e₁` and the normalized all-ones vector.
pub fn default_directions(n: usize) -> Vec<Vec<f64>> {
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    if n == 1 {
        return vec![e1];
    }
    vec![e1, vec![1.0 / (n as f64).sqrt(); n]]
}

/// Samples `X ~ μ` with stream `i` of `seed` and records `Λ(D²Φ(X))`.
/// Results are identical for sequential and parallel execution.
pub fn spectral_samples(tm: &dyn TransportMap, opts: &SampleOptions) -> Result<SampleSet> {
    if opts.n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples"
        )));
    }
    let n = tm.dim();
    let directions: Vec<Vec<f64>> = if opts.directions.is_empty() {
        default_directions(n)
    } else {
        opts.directions.clone()
    };
    for d in &directions {
        if d.len() != n || !(crate::linalg::norm(d) > 0.0) {
            return Err(Error::InvalidArgument(
                "directions must be nonzero and match the dimension".into(),
            ));
        }
    }
    let draws = map_indexed(opts.n_samples, opts.mode, |i| {
        let mut rng = stream_rng(opts.seed, i as u64);
        let x = tm.sample_source(&mut rng);
        let h = tm.hessian(&x).ok()?;
        let quadform_logs = directions
            .iter()
            .map(|v| crate::spd_geometry::log_quadratic_form(&h, v))
            .collect::<Result<Vec<_>>>()
            .ok()?;
        let spectrum = log_eigen_map(&h);
        if spectrum.values().iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(SpectralSample {
            x,
            spectrum,
            quadform_logs,
            weight: 1.0,
            matrix: opts.keep_matrices.then_some(h),
        })
    });
    let flagged = draws.iter().filter(|d| d.is_none()).count();
    let samples: Vec<SpectralSample> = draws.into_iter().flatten().collect();
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "fewer than two usable samples".into(),
        ));
    }
    Ok(SampleSet {
        dim: n,
        directions,
        samples,
        flagged,
        approximate: tm.kind() == crate::brenier::MapKind::EntropicGrid,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarianceReport {
    /// `Var[log λᵢ]`, `i` in non-increasing eigenvalue order.
    pub variances: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: usize,
    pub flagged: usize,
    /// `4 − max variance`.
    pub margin: f64,
    /// Bound on the error from clipping quadrature tails, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_bound: Option<f64>,
    pub approximate: bool,
}

impl VarianceReport {
    fn new(variances: Vec<f64>, std_errors: Vec<f64>, samples: usize, flagged: usize) -> Self {
        let max = variances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            variances,
            std_errors,
            samples,
            flagged,
            margin: VARIANCE_BOUND - max,
            truncation_bound: None,
            approximate: false,
        }
    }

    pub fn max_variance(&self) -> f64 {
        self.variances
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every variance within `bound + k·s.e.`.
    pub fn within(&self, bound: f64, k: f64) -> bool {
        self.variances
            .iter()
            .zip(&self.std_errors)
            .all(|(v, s)| *v <= bound + k * s)
    }
}

/// Per-index variance of `Λ(X)` with jackknife standard errors.
pub fn eigen_log_variance(set: &SampleSet) -> VarianceReport {
    let (variances, std_errors) = (0..set.dim)
        .map(|i| {
            let col: Vec<f64> = set.samples.iter().map(|s| s.spectrum.values()[i]).collect();
            let e = jackknife_variance(&col, JACKKNIFE_BLOCKS);
            (e.value, e.std_error)
        })
        .unzip();
    let mut r = VarianceReport::new(variances, std_errors, set.samples.len(), set.flagged);
    r.approximate = set.approximate;
    r
}

pub fn eigen_log_variance_mc(
    tm: &dyn TransportMap,
    n_samples: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<VarianceReport> {
    let mut opts = SampleOptions::new(n_samples, seed);
    opts.mode = mode;
    Ok(eigen_log_variance(&spectral_samples(tm, &opts)?))
}

/// Lowest and highest probability level covered by the 1D quadrature.
pub const LEVEL_CLIP: f64 = 1e-9;

/// Quadrature rule in the logit of the probability level:
/// `p = 1/(1 + e^{-s})`, `dp = p(1 − p) ds`, with `1 − p` kept separately so
/// the upper tail is resolved through survival functions.
#[derive(Debug, Clone)]
pub struct LogitNodes {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

impl LogitNodes {
    /// About `nodes` points as 16-point Gauss–Legendre panels over
    /// `s ∈ [logit(LEVEL_CLIP), −logit(LEVEL_CLIP)]`.
    pub fn new(nodes: usize) -> Self {
        let per = 16;
        let panels = nodes.div_ceil(per).max(1);
        let gl = GaussLegendre::new(per);
        let smax = ((1.0 - LEVEL_CLIP) / LEVEL_CLIP).ln();
        let width = 2.0 * smax / panels as f64;
        let (mut p, mut q, mut w) = (vec![], vec![], vec![]);
        for k in 0..panels {
            let a = -smax + k as f64 * width;
            for (s, ws) in gl.mapped(a, a + width) {
                let pk = 1.0 / (1.0 + (-s).exp());
                let qk = 1.0 / (1.0 + s.exp());
                p.push(pk);
                q.push(qk);
                w.push(ws * pk * qk);
            }
        }
        Self { p, q, w }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Mass outside the clipped range.
    pub fn tail_mass(&self) -> f64 {
        2.0 * LEVEL_CLIP
    }
}

/// Quantiles and potentials of one measure at every node, shared across all
/// pairs that involve it.
#[derive(Debug, Clone)]
pub struct QuantileTable {
    pub points: Vec<f64>,
    pub potentials: Vec<f64>,
}

impl QuantileTable {
    pub fn new(m: &LogConcaveMeasure1D, nodes: &LogitNodes) -> Result<Self> {
        let points = nodes
            .p
            .iter()
            .zip(&nodes.q)
            .map(|(p, q)| {
                if *p <= 0.5 {
                    m.quantile(*p)
                } else {
                    m.inverse_sf(*q)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let potentials = points.iter().map(|x| m.potential(*x)).collect();
        Ok(Self { points, potentials })
    }
}

/// `Var[log Φ″(X)]` from precomputed tables; `log Φ″ = −V(F⁻¹(p)) + W(G⁻¹(p))`.
pub fn variance_from_tables(
    nodes: &LogitNodes,
    src: &QuantileTable,
    dst: &QuantileTable,
) -> VarianceReport {
    let logs: Vec<f64> = src
        .potentials
        .iter()
        .zip(&dst.potentials)
        .map(|(v, w)| -v + w)
        .collect();
    let mass = pairwise_sum(&nodes.w);
    let wl: Vec<f64> = logs.iter().zip(&nodes.w).map(|(l, w)| l * w).collect();
    let mean = pairwise_sum(&wl) / mass;
    let sq: Vec<f64> = logs
        .iter()
        .zip(&nodes.w)
        .map(|(l, w)| w * (l - mean).powi(2))
        .collect();
    let var = pairwise_sum(&sq) / mass;
    let range = logs.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max);
    let mut r = VarianceReport::new(vec![var], vec![0.0], nodes.len(), 0);
    r.truncation_bound = Some(nodes.tail_mass() * range * range);
    r
}

/// Deterministic `Var[log Φ″(X)]` for a 1D map by quadrature in the
/// probability level.
pub fn eigen_log_variance_quadrature_1d(tm: &Map1D, nodes: usize) -> Result<VarianceReport> {
    let rule = LogitNodes::new(nodes);
    let src = QuantileTable::new(tm.source(), &rule)?;
    let dst = QuantileTable::new(tm.target(), &rule)?;
    Ok(variance_from_tables(&rule, &src, &dst))
}

/// Lipschitz test functions on `ℝⁿ` with exact gradient norms.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BankFunction {
    Coordinate(usize),
    Mean,
    Max,
    /// `log Σ exp(xᵢ)`.
    LogSumExp,
    DistanceTo(Vec<f64>),
    Constant(f64),
}

impl BankFunction {
    pub fn name(&self) -> String {
        match self {
            Self::Coordinate(i) => format!("coord{i}"),
            Self::Mean => "mean".into(),
            Self::Max => "max".into(),
            Self::LogSumExp => "logsumexp".into(),
            Self::DistanceTo(_) => "distance".into(),
            Self::Constant(_) => "constant".into(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Coordinate(i) => x[*i],
            Self::Mean => x.iter().sum::<f64>() / x.len() as f64,
            Self::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Self::LogSumExp => {
                let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            }
            Self::DistanceTo(p) => x
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
            Self::Constant(c) => *c,
        }
    }

    /// `|∇f|²(x)`; at the nondifferentiable points of max and distance the
    /// value 1 bounds the upper gradient.
    pub fn grad_norm_sq(&self, x: &[f64]) -> f64 {
        match self {
            Self::Coordinate(_) | Self::Max | Self::DistanceTo(_) => 1.0,
            Self::Mean => 1.0 / x.len() as f64,
            Self::LogSumExp => {
                let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.iter().map(|v| (v / z).powi(2)).sum()
            }
            Self::Constant(_) => 0.0,
        }
    }

    /// Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Constant(_) => 0.0,
            _ => 1.0,
        }
    }
}

/// Coordinates, mean, max, log-sum-exp and distance to `(½, −½, ½, …)`.
pub fn default_bank(n: usize) -> Vec<BankFunction> {
    let mut b: Vec<BankFunction> = (0..n).map(BankFunction::Coordinate).collect();
    b.push(BankFunction::Mean);
    b.push(BankFunction::Max);
    b.push(BankFunction::LogSumExp);
    b.push(BankFunction::DistanceTo(
        (0..n)
            .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect(),
    ));
    b
}

/// `Var̂[f]/(4Ê|∇f|²)` with a jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub std_error: f64,
    pub variance: f64,
    pub energy: f64,
    /// Zero energy with nonzero variance.
    pub violation_candidate: bool,
}

impl RatioEstimate {
    pub fn within(&self, bound: f64, k: f64) -> bool {
        !self.violation_candidate && self.ratio <= bound + k * self.std_error
    }
}

/// Poincaré-type ratio from paired columns of values and squared gradient
/// bounds.
pub fn ratio_from_columns(values: &[f64], grad_sq: &[f64]) -> RatioEstimate {
    let c = crate::stats::mean(values);
    let centred: Vec<f64> = values.iter().map(|v| v - c).collect();
    let sq: Vec<f64> = centred.iter().map(|v| v * v).collect();
    let variance = (crate::stats::mean(&sq) - crate::stats::mean(&centred).powi(2)).max(0.0);
    let energy = crate::stats::mean(grad_sq);
    if variance == 0.0 {
        return RatioEstimate {
            ratio: 0.0,
            std_error: 0.0,
            variance,
            energy,
            violation_candidate: false,
        };
    }
    if !(energy > 0.0) {
        return RatioEstimate {
            ratio: f64::INFINITY,
            std_error: 0.0,
            variance,
            energy,
            violation_candidate: true,
        };
    }
    let e: Estimate = jackknife_means(&[&centred, &sq, grad_sq], JACKKNIFE_BLOCKS, |m| {
        (m[1] - m[0] * m[0]).max(0.0) / (VARIANCE_BOUND * m[2])
    });
    RatioEstimate {
        ratio: e.value,
        std_error: e.std_error,
        variance,
        energy,
        violation_candidate: false,
    }
}

/// `Var̂[f(Λ(X))] / (4·Ê|∇f|²(Λ(X)))`.
pub fn poincare_ratio(set: &SampleSet, f: &BankFunction) -> RatioEstimate {
    let vals: Vec<f64> = set
        .samples
        .iter()
        .map(|s| f.value(s.spectrum.values()))
        .collect();
    let g: Vec<f64> = set
        .samples
        .iter()
        .map(|s| f.grad_norm_sq(s.spectrum.values()))
        .collect();
    ratio_from_columns(&vals, &g)
}

/// One-dimensional Lipschitz functions of `Y = log(D²Φ(X)v·v)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarFunction {
    Identity,
    /// Clamp to `[−1, 1]`.
    Clamp,
    Tanh,
}

impl ScalarFunction {
    pub fn value(self, y: f64) -> f64 {
        match self {
            Self::Identity => y,
            Self::Clamp => y.clamp(-1.0, 1.0),
            Self::Tanh => y.tanh(),
        }
    }

    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Clamp => {
                if y.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - y.tanh().powi(2),
        }
    }
}

/// Poincaré ratio for `f(Y)` with `Y` the log quadratic form along direction
/// `dir` of the sample set.
pub fn quadform_poincare(set: &SampleSet, dir: usize, f: ScalarFunction) -> Result<RatioEstimate> {
    if dir >= set.directions.len() {
        return Err(Error::InvalidArgument(format!(
            "direction {dir} not sampled"
        )));
    }
    let ys: Vec<f64> = set.samples.iter().map(|s| s.quadform_logs[dir]).collect();
    let vals: Vec<f64> = ys.iter().map(|y| f.value(*y)).collect();
    let g: Vec<f64> = ys.iter().map(|y| f.derivative(*y).powi(2)).collect();
    Ok(ratio_from_columns(&vals, &g))
}

/// `Var[log(D²Φ(X)v·v)]` with its standard error.
pub fn quadform_variance(set: &SampleSet, dir: usize) -> Result<Estimate> {
    if dir >= set.directions.len() {
        return Err(Error::InvalidArgument(format!(
            "direction {dir} not sampled"
        )));
    }
    let ys: Vec<f64> = set.samples.iter().map(|s| s.quadform_logs[dir]).collect();
    Ok(jackknife_variance(&ys, JACKKNIFE_BLOCKS))
}

/// `Ê exp(c|f(Λ(X)) − Â|)`, `Â` the sample mean of `f(Λ(X))`. Overflow gives
/// `+∞`.
pub fn exp_concentration(set: &SampleSet, f: &BankFunction, c: f64) -> Result<Estimate> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("c must be positive".into()));
    }
    let vals: Vec<f64> = set
        .samples
        .iter()
        .map(|s| f.value(s.spectrum.values()))
        .collect();
    let a = crate::stats::mean(&vals);
    let col: Vec<f64> = vals.iter().map(|v| (c * (v - a).abs()).exp()).collect();
    if col.iter().any(|v| !v.is_finite()) {
        return Ok(Estimate {
            value: f64::INFINITY,
            std_error: 0.0,
        });
    }
    Ok(jackknife_means(&[&col], JACKKNIFE_BLOCKS, |m| m[0]))
}

/// The calibration curve `c ↦ Ê exp(c|f − Â|)` over [`C_GRID`].
pub fn exp_concentration_sweep(set: &SampleSet, f: &BankFunction) -> Result<Vec<(f64, Estimate)>> {
    C_GRID
        .iter()
        .map(|&c| Ok((c, exp_concentration(set, f, c)?)))
        .collect()
}

/// Functions on the SPD cone with upper-gradient bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFunction {
    /// `A ↦ log(Av·v)` for sampled direction `i`; upper gradient 1.
    LogQuadraticForm(usize),
    /// `A ↦ f(Λ(A))`; upper gradient at most `|∇f|(Λ(A))`.
    Spectral(BankFunction),
    /// `A ↦ dist(A, Id) = |Λ(A)|`; upper gradient 1.
    DistanceToIdentity,
    /// `A ↦ dist(A, B)`; needs the sampled matrices. Upper gradient 1.
    DistanceTo(SpdMatrix),
}

impl MatrixFunction {
    pub fn name(&self) -> String {
        match self {
            Self::LogQuadraticForm(i) => format!("logquad{i}"),
            Self::Spectral(f) => format!("spectral-{}", f.name()),
            Self::DistanceToIdentity => "dist-identity".into(),
            Self::DistanceTo(_) => "dist-reference".into(),
        }
    }

    fn eval(&self, s: &SpectralSample) -> Result<(f64, f64)> {
        Ok(match self {
            Self::LogQuadraticForm(i) => {
                let v = *s
                    .quadform_logs
                    .get(*i)
                    .ok_or_else(|| Error::InvalidArgument(format!("direction {i} not sampled")))?;
                (v, 1.0)
            }
            Self::Spectral(f) => (
                f.value(s.spectrum.values()),
                f.grad_norm_sq(s.spectrum.values()),
            ),
            Self::DistanceToIdentity => (s.spectrum.norm(), 1.0),
            Self::DistanceTo(b) => {
                let a = s
                    .matrix
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("matrices were not kept".into()))?;
                (spd_distance(a, b)?, 1.0)
            }
        })
    }
}

/// `Var̂_θ[F] / (4Ê_θ|∇F|²)` with `θ` the law of `D²Φ(X)`.
pub fn poincare_on_theta(set: &SampleSet, f: &MatrixFunction) -> Result<RatioEstimate> {
    let pairs = set
        .samples
        .iter()
        .map(|s| f.eval(s))
        .collect::<Result<Vec<_>>>()?;
    let (vals, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(ratio_from_columns(&vals, &g))
}

/// `min Φ_N″ − N^{-2}` over the levels `(k + ½)/points` for the map between
/// the regularized measures.
pub fn caffarelli_floor_check(
    mu: &LogConcaveMeasure1D,
    nu: &LogConcaveMeasure1D,
    n: u32,
    points: usize,
) -> Result<f64> {
    if points == 0 {
        return Err(Error::InvalidArgument(
            "need at least one grid point".into(),
        ));
    }
    let map = crate::brenier::brenier_1d(mu.regularize(n)?, nu.regularize(n)?);
    let mut min = f64::INFINITY;
    for k in 0..points {
        let p = (k as f64 + 0.5) / points as f64;
        min = min.min(map.log_phi_d2_at_level(p)?.exp());
    }
    Ok(min - 1.0 / (n as f64).powi(2))
}
