//! Entropic optimal transport between 2D grid measures.
//!
//! Quadratic cost `|x − y|²/2`, log-domain Sinkhorn with ε-scaling. The
//! Gaussian kernel factorizes over the two axes, so each log-sum-exp over the
//! `n₁n₂` target nodes is done as two one-axis passes, `O(n³)` per update
//! instead of `O(n⁴)`.
//!
//! The Brenier map is estimated by the barycentric projection
//! `T_ε(x) = E_π[Y | X = x]`, evaluated at any point of the source box from
//! the target dual potential.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, ExecMode};
use crate::measures::Measure;
use crate::quadrature::GaussLegendre;
use crate::spd_geometry::SpdMatrix;
use nalgebra::DMatrix;

/// Minimum mass a discretization box must capture.
pub const MIN_COVERAGE: f64 = 1.0 - 1e-6;

/// Marginal tolerance used for intermediate ε stages.
const STAGE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 < x.1 && y.0 < y.1) || ![x.0, x.1, y.0, y.1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "degenerate box {x:?} x {y:?}"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn square(half_width: f64) -> Result<Self> {
        Self::new((-half_width, half_width), (-half_width, half_width))
    }

    pub fn diameter_squared(&self) -> f64 {
        (self.x.1 - self.x.0).powi(2) + (self.y.1 - self.y.0).powi(2)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == 2 && p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }

    /// Distance from `p` to the boundary, negative outside.
    pub fn inset(&self, p: &[f64]) -> f64 {
        (p[0] - self.x.0)
            .min(self.x.1 - p[0])
            .min(p[1] - self.y.0)
            .min(self.y.1 - p[1])
    }
}

/// Weights on an `nx × ny` lattice, stored with `iy` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    rect: Rect,
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl GridMeasure {
    /// Normalizes nonnegative node masses into a grid measure.
    pub fn from_masses(rect: Rect, nx: usize, ny: usize, masses: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        if masses.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                got: masses.len(),
            });
        }
        if masses.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "node masses must be finite and nonnegative".into(),
            ));
        }
        let total = crate::stats::pairwise_sum(&masses);
        if !(total > 0.0) {
            return Err(Error::InsufficientCoverage { captured: 0.0 });
        }
        let weights = masses.iter().map(|w| w / total).collect();
        Ok(Self {
            rect,
            xs: lattice(rect.x.0, rect.x.1, nx),
            ys: lattice(rect.y.0, rect.y.1, ny),
            weights,
        })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }
    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn ny(&self) -> usize {
        self.ys.len()
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.xs[1] - self.xs[0], self.ys[1] - self.ys[0])
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        [self.xs[k / self.ny()], self.ys[k % self.ny()]]
    }

    fn log_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.ln()).collect()
    }
}

/// Mass of a 2D measure inside `rect`: exact for products, composite
/// Gauss–Legendre otherwise.
pub fn mass_in_box(m: &Measure, rect: &Rect) -> Result<f64> {
    if m.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: m.dim(),
        });
    }
    if let Measure::Product(p) = m {
        let f = p.factors();
        let axis = |i: usize, (lo, hi): (f64, f64)| {
            let below = f[i].cdf(lo);
            let above = f[i].sf(hi);
            (1.0 - below - above).max(0.0)
        };
        return Ok(axis(0, rect.x) * axis(1, rect.y));
    }
    let gl = GaussLegendre::new(12);
    let panels = 48;
    let nodes = |(lo, hi): (f64, f64)| -> Vec<(f64, f64)> {
        let w = (hi - lo) / panels as f64;
        (0..panels)
            .flat_map(|p| gl.mapped(lo + p as f64 * w, lo + (p + 1) as f64 * w))
            .collect()
    };
    let (nx, ny) = (nodes(rect.x), nodes(rect.y));
    let mut total = 0.0;
    for (x, wx) in &nx {
        let row: Vec<f64> = ny.iter().map(|(y, wy)| wy * m.density(&[*x, *y])).collect();
        total += wx * crate::stats::pairwise_sum(&row);
    }
    Ok(total)
}

/// Node weights proportional to the density, after checking that the box
/// holds at least [`MIN_COVERAGE`] of the mass.
pub fn discretize(m: &Measure, rect: Rect, nx: usize, ny: usize) -> Result<GridMeasure> {
    let captured = mass_in_box(m, &rect)?;
    if captured < MIN_COVERAGE {
        return Err(Error::InsufficientCoverage { captured });
    }
    let xs = lattice(rect.x.0, rect.x.1, nx.max(2));
    let ys = lattice(rect.y.0, rect.y.1, ny.max(2));
    let masses = xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| (*x, *y)))
        .map(|(x, y)| m.density(&[x, y]))
        .collect();
    GridMeasure::from_masses(rect, nx, ny, masses)
}

/// Decreasing regularization levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpsSchedule(Vec<f64>);

impl EpsSchedule {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidArgument("ε levels must be positive".into()));
        }
        if levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument(
                "ε schedule must be strictly decreasing".into(),
            ));
        }
        Ok(Self(levels))
    }

    /// `start, start·factor, …` down to and including `end`.
    pub fn geometric(start: f64, end: f64, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) || !(end > 0.0) || !(start >= end) {
            return Err(Error::InvalidArgument(
                "need start ≥ end > 0 and factor in (0, 1)".into(),
            ));
        }
        let mut levels = vec![];
        let mut e = start;
        while e > end * (1.0 + 1e-12) {
            levels.push(e);
            e *= factor;
        }
        levels.push(end);
        Self::new(levels)
    }

    /// `0.1·diam²` down to `1e-3·diam²`, halving.
    pub fn default_for(rect: &Rect) -> Self {
        let d2 = rect.diameter_squared();
        Self::geometric(0.1 * d2, 1e-3 * d2, 0.5).expect("valid defaults")
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn last(&self) -> f64 {
        *self.0.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StageLog {
    pub eps: f64,
    pub iterations: usize,
    pub marginal_error: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone)]
pub struct SinkhornOptions {
    pub schedule: EpsSchedule,
    /// Iteration cap per ε level.
    pub max_iter: usize,
    /// Final marginal tolerance (max absolute deviation).
    pub tol: f64,
    pub mode: ExecMode,
    /// Record the dual objective after every iteration of the final stage.
    pub trace_objective: bool,
}

impl SinkhornOptions {
    pub fn new(schedule: EpsSchedule) -> Self {
        Self {
            schedule,
            max_iter: 5000,
            tol: 1e-8,
            mode: ExecMode::Parallel,
            trace_objective: false,
        }
    }
}

/// Solved entropic problem; immutable.
#[derive(Debug, Clone)]
pub struct EntropicPlan {
    source: GridMeasure,
    target: GridMeasure,
    f: Vec<f64>,
    g: Vec<f64>,
    eps: f64,
    log: Vec<StageLog>,
    objective_trace: Vec<f64>,
}

/// One-axis squared-distance table `(a_i − b_j)²/2`, row-major in `i`.
fn half_sq_table(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| 0.5 * (x - y).powi(2)))
        .collect()
}

fn lse(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Separable kernel step: shared dimensions of the input are `(n1, n2)`,
/// output `(m1, m2)`, and
/// `out[i1,i2] = LSE_{a,b}(h[a,b] − c1[i1,a]/ε − c2[i2,b]/ε)`.
struct Kernel {
    n1: usize,
    n2: usize,
    m1: usize,
    m2: usize,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl Kernel {
    fn apply(&self, h: &[f64], inv_eps: f64, mode: ExecMode) -> Vec<f64> {
        let (n1, n2, m1, m2) = (self.n1, self.n2, self.m1, self.m2);
        // Pass over the second axis: t[i2, a] = LSE_b(h[a,b] − c2[i2,b]/ε).
        let mut t = vec![0.0; m2 * n1];
        for_each_chunk_mut(&mut t, n1, mode, |i2, row| {
            let mut buf = vec![0.0; n2];
            let c = &self.c2[i2 * n2..(i2 + 1) * n2];
            for (a, out) in row.iter_mut().enumerate() {
                let hrow = &h[a * n2..(a + 1) * n2];
                for b in 0..n2 {
                    buf[b] = hrow[b] - c[b] * inv_eps;
                }
                *out = lse(&buf);
            }
        });
        // Pass over the first axis.
        let mut out = vec![0.0; m1 * m2];
        for_each_chunk_mut(&mut out, m2, mode, |i1, row| {
            let mut buf = vec![0.0; n1];
            let c = &self.c1[i1 * n1..(i1 + 1) * n1];
            for (i2, o) in row.iter_mut().enumerate() {
                let trow = &t[i2 * n1..(i2 + 1) * n1];
                for a in 0..n1 {
                    buf[a] = trow[a] - c[a] * inv_eps;
                }
                *o = lse(&buf);
            }
        });
        out
    }
}

fn weighted(p: &[f64], logw: &[f64], inv_eps: f64) -> Vec<f64> {
    p.iter().zip(logw).map(|(v, l)| v * inv_eps + l).collect()
}

/// Log-domain Sinkhorn with ε-scaling warm starts.
///
/// Each iteration updates `f` then `g`; after the `g` update the plan's
/// target marginal is exact and the source marginal error is
/// `max_i μ_i |exp((f_i − f̃_i)/ε) − 1|`, `f̃` being the next `f` update, so
/// the stopping test costs nothing extra.
pub fn sinkhorn_solve(
    mu: &GridMeasure,
    nu: &GridMeasure,
    opts: &SinkhornOptions,
) -> Result<EntropicPlan> {
    let to_target = Kernel {
        n1: nu.nx(),
        n2: nu.ny(),
        m1: mu.nx(),
        m2: mu.ny(),
        c1: half_sq_table(&mu.xs, &nu.xs),
        c2: half_sq_table(&mu.ys, &nu.ys),
    };
    let to_source = Kernel {
        n1: mu.nx(),
        n2: mu.ny(),
        m1: nu.nx(),
        m2: nu.ny(),
        c1: half_sq_table(&nu.xs, &mu.xs),
        c2: half_sq_table(&nu.ys, &mu.ys),
    };
    let (log_mu, log_nu) = (mu.log_weights(), nu.log_weights());
    let mut f = vec![0.0; mu.len()];
    let mut g = vec![0.0; nu.len()];
    let mut log = vec![];
    let mut trace = vec![];
    let levels = opts.schedule.levels();
    for (stage, &eps) in levels.iter().enumerate() {
        let last = stage + 1 == levels.len();
        let tol = if last {
            opts.tol
        } else {
            opts.tol.max(STAGE_TOL)
        };
        let inv = 1.0 / eps;
        let mut err = f64::INFINITY;
        let mut iterations = 0;
        // Warm start: g from the previous level is kept; one g update makes
        // the pair consistent at the new ε.
        g = to_source
            .apply(&weighted(&f, &log_mu, inv), inv, opts.mode)
            .iter()
            .map(|v| -eps * v)
            .collect();
        while iterations < opts.max_iter {
            let f_next: Vec<f64> = to_target
                .apply(&weighted(&g, &log_nu, inv), inv, opts.mode)
                .iter()
                .map(|v| -eps * v)
                .collect();
            err = f
                .iter()
                .zip(&f_next)
                .zip(&mu.weights)
                .map(|((a, b), w)| {
                    if *w > 0.0 {
                        w * ((a - b) * inv).exp_m1().abs()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max);
            if err <= tol {
                break;
            }
            f = f_next;
            g = to_source
                .apply(&weighted(&f, &log_mu, inv), inv, opts.mode)
                .iter()
                .map(|v| -eps * v)
                .collect();
            iterations += 1;
            if last && opts.trace_objective {
                trace.push(dual_objective(mu, nu, &f, &g));
            }
        }
        log.push(StageLog {
            eps,
            iterations,
            marginal_error: err,
            dual_objective: dual_objective(mu, nu, &f, &g),
        });
        if err > tol {
            return Err(Error::NotConverged {
                iterations,
                marginal_error: err,
            });
        }
    }
    Ok(EntropicPlan {
        source: mu.clone(),
        target: nu.clone(),
        f,
        g,
        eps: opts.schedule.last(),
        log,
        objective_trace: trace,
    })
}

/// `⟨f, μ⟩ + ⟨g, ν⟩`, which equals the dual objective whenever the plan has
/// unit mass (true after every `g` update).
fn dual_objective(mu: &GridMeasure, nu: &GridMeasure, f: &[f64], g: &[f64]) -> f64 {
    let a: Vec<f64> = f
        .iter()
        .zip(&mu.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| v * w)
        .collect();
    let b: Vec<f64> = g
        .iter()
        .zip(&nu.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| v * w)
        .collect();
    crate::stats::pairwise_sum(&a) + crate::stats::pairwise_sum(&b)
}

/// Conditional law of the target given a source point: normalized weights.
struct Conditional {
    weights: Vec<f64>,
}

/// `D²Φ` estimate with its diagnostics.
#[derive(Debug, Clone)]
pub struct HessianEstimate {
    pub matrix: SpdMatrix,
    /// `‖J − Jᵗ‖/‖J‖` of the raw Jacobian.
    pub symmetry_defect: f64,
}

/// One row of a potential dump.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PotentialRow {
    pub grid: &'static str,
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub potential: f64,
}

impl EntropicPlan {
    pub fn source(&self) -> &GridMeasure {
        &self.source
    }
    pub fn target(&self) -> &GridMeasure {
        &self.target
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn source_potential(&self) -> &[f64] {
        &self.f
    }
    pub fn target_potential(&self) -> &[f64] {
        &self.g
    }
    pub fn log(&self) -> &[StageLog] {
        &self.log
    }
    pub fn final_marginal_error(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |s| s.marginal_error)
    }
    /// Dual objective after each iteration of the last ε level, when traced.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    fn conditional(&self, x: &[f64]) -> Result<Conditional> {
        if !self.source.rect.contains(x) {
            return Err(Error::OutsideSupport { x: x.to_vec() });
        }
        let inv = 1.0 / self.eps;
        let nu = &self.target;
        let ax: Vec<f64> = nu
            .xs
            .iter()
            .map(|y| 0.5 * (x[0] - y).powi(2) * inv)
            .collect();
        let ay: Vec<f64> = nu
            .ys
            .iter()
            .map(|y| 0.5 * (x[1] - y).powi(2) * inv)
            .collect();
        let ny = nu.ny();
        let logw: Vec<f64> = (0..nu.len())
            .map(|k| {
                let w = nu.weights[k];
                if w > 0.0 {
                    self.g[k] * inv + w.ln() - ax[k / ny] - ay[k % ny]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let z = lse(&logw);
        Ok(Conditional {
            weights: logw.iter().map(|l| (l - z).exp()).collect(),
        })
    }

    /// Barycentric projection `E_π[Y | X = x]`.
    pub fn map(&self, x: &[f64]) -> Result<[f64; 2]> {
        let c = self.conditional(x)?;
        Ok(self.mean_of(&c))
    }

    fn mean_of(&self, c: &Conditional) -> [f64; 2] {
        let ny = self.target.ny();
        let mut m = [0.0; 2];
        for (k, w) in c.weights.iter().enumerate() {
            m[0] += w * self.target.xs[k / ny];
            m[1] += w * self.target.ys[k % ny];
        }
        m
    }

    /// Exact Jacobian of the barycentric projection, `Cov_π(Y | X = x)/ε`.
    pub fn conditional_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let c = self.conditional(x)?;
        let m = self.mean_of(&c);
        let ny = self.target.ny();
        let mut cov = DMatrix::zeros(2, 2);
        for (k, w) in c.weights.iter().enumerate() {
            let d = [self.target.xs[k / ny] - m[0], self.target.ys[k % ny] - m[1]];
            for i in 0..2 {
                for j in 0..2 {
                    cov[(i, j)] += w * d[i] * d[j];
                }
            }
        }
        Ok(cov / self.eps)
    }

    /// Central-difference Jacobian of [`Self::map`] with step `h`,
    /// symmetrized. Fails if the symmetrized estimate is not positive-definite.
    pub fn hessian_fd(&self, x: &[f64], h: f64) -> Result<HessianEstimate> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        if x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        if self.source.rect.inset(x) < 2.0 * h {
            return Err(Error::OutsideSupport { x: x.to_vec() });
        }
        let mut j = DMatrix::zeros(2, 2);
        for k in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let (tp, tm) = (self.map(&xp)?, self.map(&xm)?);
            for i in 0..2 {
                j[(i, k)] = (tp[i] - tm[i]) / (2.0 * h);
            }
        }
        let norm = crate::linalg::hs_norm(&j);
        let symmetry_defect = crate::linalg::hs_norm(&(&j - j.transpose())) / norm;
        let matrix = SpdMatrix::new(crate::linalg::symmetrize(&j))?;
        Ok(HessianEstimate {
            matrix,
            symmetry_defect,
        })
    }

    /// Default Hessian step: twice the larger source grid spacing.
    pub fn default_step(&self) -> f64 {
        let (hx, hy) = self.source.spacing();
        2.0 * hx.max(hy)
    }

    /// Both dual potentials as flat rows for CSV output.
    pub fn potential_rows(&self) -> Vec<PotentialRow> {
        let rows = |name: &'static str, grid: &GridMeasure, p: &[f64]| -> Vec<PotentialRow> {
            (0..grid.len())
                .map(|k| {
                    let [x, y] = grid.node(k);
                    PotentialRow {
                        grid: name,
                        ix: k / grid.ny(),
                        iy: k % grid.ny(),
                        x,
                        y,
                        weight: grid.weights[k],
                        potential: p[k],
                    }
                })
                .collect()
        };
        let mut out = rows("source", &self.source, &self.f);
        out.extend(rows("target", &self.target, &self.g));
        out
    }
}

/// An entropic plan viewed as an approximate Brenier map from the
/// continuous source it was discretized from.
pub struct EntropicTransport {
    plan: EntropicPlan,
    source: Measure,
    target: Measure,
    step: f64,
}

impl EntropicTransport {
    pub fn new(plan: EntropicPlan, source: Measure, target: Measure) -> Result<Self> {
        if source.dim() != 2 || target.dim() != 2 {
            return Err(Error::InvalidArgument(
                "entropic transport is two-dimensional".into(),
            ));
        }
        let step = plan.default_step();
        Ok(Self {
            plan,
            source,
            target,
            step,
        })
    }

    /// Discretize both measures on `rect` with `n × n` nodes and solve with
    /// ε decreasing geometrically to `h²`.
    pub fn solve(
        source: Measure,
        target: Measure,
        rect: Rect,
        n: usize,
        mode: ExecMode,
    ) -> Result<Self> {
        let mu = discretize(&source, rect, n, n)?;
        let nu = discretize(&target, rect, n, n)?;
        let (hx, hy) = mu.spacing();
        let mut opts = SinkhornOptions::new(EpsSchedule::geometric(
            0.1 * rect.diameter_squared(),
            hx * hy,
            0.5,
        )?);
        opts.mode = mode;
        Self::new(sinkhorn_solve(&mu, &nu, &opts)?, source, target)
    }

    pub fn plan(&self) -> &EntropicPlan {
        &self.plan
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        self.step = h;
        Ok(self)
    }
}

impl crate::brenier::TransportMap for EntropicTransport {
    fn dim(&self) -> usize {
        2
    }
    fn kind(&self) -> crate::brenier::MapKind {
        crate::brenier::MapKind::EntropicGrid
    }
    fn label(&self) -> String {
        format!(
            "entropic {}x{} eps={:.3e}",
            self.plan.source.nx(),
            self.plan.source.ny(),
            self.plan.eps
        )
    }
    fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.plan.map(x)?.to_vec())
    }
    fn hessian(&self, x: &[f64]) -> Result<SpdMatrix> {
        Ok(self.plan.hessian_fd(x, self.step)?.matrix)
    }
    fn source_potential(&self, x: &[f64]) -> f64 {
        self.source.potential(x)
    }
    fn target_potential(&self, y: &[f64]) -> f64 {
        self.target.potential(y)
    }
    fn in_source_support(&self, x: &[f64]) -> bool {
        self.plan.source.rect.inset(x) >= 2.0 * self.step && self.source.in_support(x)
    }
    /// Draws from the continuous source; draws too close to the box edge
    /// fail in [`Self::hessian`] and are flagged by callers.
    fn sample_source(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.source.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brenier::{brenier_gaussian, TransportMap};
    use crate::measures::{make_catalog_measure, GaussianMeasure, ProductMeasure};

    fn gaussian2(mean: [f64; 2], cov: [f64; 3]) -> GaussianMeasure {
        GaussianMeasure::new(
            mean.to_vec(),
            SpdMatrix::from_row_slice(2, &[cov[0], cov[1], cov[1], cov[2]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_square_gives_equal_weights() {
        let u = make_catalog_measure("uniform", &[0.0, 1.0]).unwrap();
        let m = Measure::Product(ProductMeasure::new(vec![u.clone(), u]).unwrap());
        let g = discretize(&m, Rect::new((0.0, 1.0), (0.0, 1.0)).unwrap(), 7, 9).unwrap();
        let w0 = g.weights()[0];
        assert!(g.weights().iter().all(|w| (w - w0).abs() < 1e-15));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_coverage() {
        let m = Measure::Gaussian(GaussianMeasure::standard(2));
        let mass = mass_in_box(&m, &Rect::square(5.0).unwrap()).unwrap();
        // P(|X₁| ≤ 5)² from the 1D tail.
        let tail = statrs::function::erf::erfc(5.0 / 2f64.sqrt());
        assert!((mass - (1.0 - tail).powi(2)).abs() < 1e-12);
        // [-5, 5]² misses 1.15e-6 of the mass, just over the allowance.
        assert!(matches!(
            discretize(&m, Rect::square(5.0).unwrap(), 64, 64),
            Err(Error::InsufficientCoverage { .. })
        ));
        let g = discretize(&m, Rect::square(5.5).unwrap(), 64, 64).unwrap();
        assert!((crate::stats::pairwise_sum(g.weights()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        let s = EpsSchedule::geometric(1.0, 0.1, 0.5).unwrap();
        assert_eq!(s.levels().len(), 5);
        assert_eq!(s.last(), 0.1);
        assert!(EpsSchedule::new(vec![1.0, 2.0]).is_err());
        assert!(EpsSchedule::new(vec![1.0, 0.0]).is_err());
    }

    fn small_problem() -> (GridMeasure, GridMeasure) {
        let a = Measure::Gaussian(gaussian2([0.0, 0.0], [1.0, 0.3, 0.8]));
        let b = Measure::Gaussian(gaussian2([0.5, -0.2], [0.6, -0.1, 1.2]));
        let r = Rect::square(6.0).unwrap();
        (
            discretize(&a, r, 20, 20).unwrap(),
            discretize(&b, r, 20, 20).unwrap(),
        )
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn marginals_and_dual_monotonicity() {
        let (mu, nu) = small_problem();
        let mut opts = SinkhornOptions::new(EpsSchedule::geometric(10.0, 0.5, 0.5).unwrap());
        opts.trace_objective = true;
        let plan = sinkhorn_solve(&mu, &nu, &opts).unwrap();
        assert!(plan.final_marginal_error() <= 1e-8);
        let tr = plan.objective_trace();
        assert!(tr.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{tr:?}");
        // Brute-force marginals and dual objective.
        let eps = plan.eps();
        let mut rows = vec![0.0; mu.len()];
        let mut cols = vec![0.0; nu.len()];
        let mut cost_free = 0.0;
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                let (x, y) = (mu.node(i), nu.node(j));
                let c = 0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2));
                let p =
                    ((plan.f[i] + plan.g[j] - c) / eps).exp() * mu.weights()[i] * nu.weights()[j];
                rows[i] += p;
                cols[j] += p;
                cost_free += p;
            }
        }
        let merr = rows
            .iter()
            .zip(mu.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let nerr = cols
            .iter()
            .zip(nu.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(merr <= 1.01e-8 && nerr <= 1e-12, "{merr} {nerr}");
        let direct = mu
            .weights()
            .iter()
            .zip(&plan.f)
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + nu.weights()
                .iter()
                .zip(&plan.g)
                .map(|(w, g)| w * g)
                .sum::<f64>()
            - eps * (cost_free - 1.0);
        assert!((direct - plan.log().last().unwrap().dual_objective).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_is_reported() {
        let (mu, nu) = small_problem();
        let mut opts = SinkhornOptions::new(EpsSchedule::new(vec![0.05]).unwrap());
        opts.max_iter = 3;
        assert!(matches!(
            sinkhorn_solve(&mu, &nu, &opts),
            Err(Error::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn self_transport_is_near_identity() {
        let m = Measure::Gaussian(GaussianMeasure::standard(2));
        let r = Rect::square(5.5).unwrap();
        let g = discretize(&m, r, 32, 32).unwrap();
        let eps = 0.05;
        let plan = sinkhorn_solve(
            &g,
            &g,
            &SinkhornOptions::new(EpsSchedule::geometric(5.0, eps, 0.5).unwrap()),
        )
        .unwrap();
        let diam = r.diameter_squared().sqrt();
        for k in 0..g.len() {
            let x = g.node(k);
            if r.inset(&x) < 1.0 {
                continue;
            }
            let t = plan.map(&x).unwrap();
            assert!(
                ((t[0] - x[0]).powi(2) + (t[1] - x[1]).powi(2)).sqrt() <= 3.0 * eps.sqrt() * diam
            );
        }
        let h = plan.hessian_fd(&[0.3, -0.2], plan.default_step()).unwrap();
        assert!(h.matrix.eigenvalues().iter().all(|l| (l - 1.0).abs() < 0.1));
    }

    #[test]
    fn gaussian_pair_matches_linear_map() {
        let a = gaussian2([0.0, 0.0], [1.0, 0.3, 0.8]);
        let b = gaussian2([0.5, -0.2], [0.6, -0.1, 1.2]);
        let r = Rect::square(6.0).unwrap();
        let mu = discretize(&Measure::Gaussian(a.clone()), r, 48, 48).unwrap();
        let nu = discretize(&Measure::Gaussian(b.clone()), r, 48, 48).unwrap();
        let (hx, _) = mu.spacing();
        let sched = EpsSchedule::geometric(0.1 * r.diameter_squared(), hx * hx, 0.5).unwrap();
        let plan = sinkhorn_solve(&mu, &nu, &SinkhornOptions::new(sched)).unwrap();
        let exact = brenier_gaussian(a.clone(), b).unwrap();
        for x in [[0.0, 0.0], [0.5, -0.4], [-0.6, 0.3]] {
            let t = plan.map(&x).unwrap();
            let te = exact.map(&x).unwrap();
            let err = ((t[0] - te[0]).powi(2) + (t[1] - te[1]).powi(2)).sqrt();
            assert!(err < 0.05, "{t:?} vs {te:?}");
            let h = plan.hessian_fd(&x, plan.default_step()).unwrap();
            let rel = crate::linalg::hs_norm(&(h.matrix.matrix() - exact.matrix().matrix()))
                / crate::linalg::hs_norm(exact.matrix().matrix());
            assert!(rel < 0.05, "{rel}");
            assert!(h.symmetry_defect < 0.05);
            let jc = plan.conditional_jacobian(&x).unwrap();
            assert!(crate::linalg::hs_norm(&(jc - h.matrix.matrix())) < 0.02);
        }
        assert!(plan.hessian_fd(&[5.9, 0.0], 0.5).is_err());
        assert!(plan.map(&[7.0, 0.0]).is_err());
        assert_eq!(plan.potential_rows().len(), 2 * 48 * 48);
    }

    #[test]
    fn entropic_transport_wraps_plan() {
        let a = Measure::Gaussian(GaussianMeasure::standard(2));
        let b = Measure::Gaussian(gaussian2([0.0, 0.0], [2.0, 0.0, 0.5]));
        let t =
            EntropicTransport::solve(a, b, Rect::square(7.0).unwrap(), 40, ExecMode::Sequential)
                .unwrap();
        assert_eq!(t.kind(), crate::brenier::MapKind::EntropicGrid);
        let h = t.hessian(&[0.1, 0.2]).unwrap();
        let d = h.matrix();
        assert!(
            (d[(0, 0)] - 2f64.sqrt()).abs() < 0.1 && (d[(1, 1)] - 0.5f64.sqrt()).abs() < 0.1,
            "{d}"
        );
        assert!(!t.in_source_support(&[6.9, 0.0]));
        assert!(t.hessian(&[6.9, 0.0]).is_err());
    }
}
