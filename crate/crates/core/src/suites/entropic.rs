use super::SuiteOptions;
use crate::brenier::{brenier_map, TransportMap};
use crate::concentration_lab::{eigen_log_variance, spectral_samples, SampleOptions};
use crate::entropic_2d::{EntropicTransport, Rect};
use crate::error::{Error, Result};
use crate::measures::{make_catalog_measure, GaussianMeasure, Measure, ProductMeasure};
use crate::report::{CheckRecord, Observation, SuiteOutcome};
use crate::spd_geometry::SpdMatrix;

/// Relative tolerance on the map and Hessian against the closed forms.
pub const ORACLE_TOL: f64 = 0.05;
/// Entropic samples used for the approximate variance report.
const MAX_ENTROPIC_SAMPLES: usize = 20_000;
/// Points per axis of the evaluation grid on the central region.
const CENTRAL_GRID: usize = 9;

#[derive(Debug, Clone)]
pub struct EntropicCase {
    pub label: String,
    pub source: Measure,
    pub target: Measure,
    pub rect: Rect,
}

/// Points of the central half of the source mass: the Mahalanobis disk of
/// probability ½ for a Gaussian, the box of per-axis quantiles
/// `[a, 1 − a]`, `(1 − 2a)² = ½`, for a product.
pub fn central_points(m: &Measure, k: usize) -> Result<Vec<Vec<f64>>> {
    let grid = |i: usize| -1.0 + 2.0 * i as f64 / (k - 1) as f64;
    match m {
        Measure::Gaussian(g) if g.dim() == 2 => {
            let r = (2.0 * std::f64::consts::LN_2).sqrt();
            let root = g.covariance().power_matrix(0.5);
            let mut out = vec![];
            for i in 0..k {
                for j in 0..k {
                    let z = nalgebra::DVector::from_vec(vec![r * grid(i), r * grid(j)]);
                    if z.norm() <= r {
                        let x = &root * z;
                        out.push(vec![g.mean()[0] + x[0], g.mean()[1] + x[1]]);
                    }
                }
            }
            Ok(out)
        }
        Measure::Product(p) if p.dim() == 2 => {
            let a = 0.5 * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
            let f = p.factors();
            let (lo0, hi0) = (f[0].quantile(a)?, f[0].quantile(1.0 - a)?);
            let (lo1, hi1) = (f[1].quantile(a)?, f[1].quantile(1.0 - a)?);
            let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * 0.5 * (grid(i) + 1.0);
            Ok((0..k)
                .flat_map(|i| (0..k).map(move |j| vec![at(lo0, hi0, i), at(lo1, hi1, j)]))
                .collect())
        }
        _ => Err(Error::Unsupported(
            "central region needs a 2D Gaussian or product source".into(),
        )),
    }
}

/// Root of the trace of the covariance of a 2D target, the scale for map
/// errors.
fn spread(m: &Measure) -> Result<f64> {
    match m {
        Measure::Gaussian(g) => Ok(g.covariance().matrix().trace().sqrt()),
        Measure::Product(p) => {
            let mut v = 0.0;
            for f in p.factors() {
                let (q1, q3) = (f.quantile(0.25)?, f.quantile(0.75)?);
                // Interquartile range of a normal is 1.349σ.
                v += ((q3 - q1) / 1.349).powi(2);
            }
            Ok(v.sqrt())
        }
        _ => Err(Error::Unsupported("spread of this target".into())),
    }
}

/// Solves one case on an `opts.grid²` grid and compares with the closed-form map.
pub fn entropic_pair(case: &EntropicCase, opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let name = format!("entropic/{}", case.label);
    if let Err(e) = entropic_checks(&mut out, &name, case, opts) {
        out.check(CheckRecord::errored(name, "evaluation", &e));
    }
    out
}

fn entropic_checks(
    out: &mut SuiteOutcome,
    name: &str,
    case: &EntropicCase,
    opts: &SuiteOptions,
) -> Result<()> {
    let exact = brenier_map(&case.source, &case.target)?;
    let et = EntropicTransport::solve(
        case.source.clone(),
        case.target.clone(),
        case.rect,
        opts.grid,
        opts.mode,
    )?;
    let plan = et.plan();
    out.observe(Observation::new(name, "eps", plan.eps()).approximate(true));
    out.observe(
        Observation::new(name, "marginal-error", plan.final_marginal_error()).approximate(true),
    );
    let iters: usize = plan.log().iter().map(|s| s.iterations).sum();
    out.observe(Observation::new(name, "sinkhorn-iterations", iters as f64));

    let scale = spread(&case.target)?;
    let (mut map_err, mut hess_err) = (0.0f64, 0.0f64);
    let points = central_points(&case.source, CENTRAL_GRID)?;
    for x in &points {
        let t = et.map(x)?;
        let te = exact.map(x)?;
        let d = ((t[0] - te[0]).powi(2) + (t[1] - te[1]).powi(2)).sqrt() / scale;
        map_err = if d.is_nan() { d } else { map_err.max(d) };
        let h: SpdMatrix = et.hessian(x)?;
        let he = exact.hessian(x)?;
        let r = crate::linalg::hs_norm(&(h.matrix() - he.matrix()))
            / crate::linalg::hs_norm(he.matrix());
        hess_err = if r.is_nan() { r } else { hess_err.max(r) };
    }
    let note = format!(
        "{} points of the central half of the mass, {}x{} grid",
        points.len(),
        opts.grid,
        opts.grid
    );
    out.check(
        CheckRecord::at_most(
            format!("{name}/map"),
            "entropic-map-agreement",
            map_err,
            ORACLE_TOL,
        )
        .with_note(note.clone()),
    );
    out.check(
        CheckRecord::at_most(
            format!("{name}/hessian"),
            "entropic-hessian-agreement",
            hess_err,
            ORACLE_TOL,
        )
        .with_note(note),
    );

    let mut so = SampleOptions::new(
        opts.mc_samples
            .clamp(crate::concentration_lab::MIN_SAMPLES, MAX_ENTROPIC_SAMPLES),
        opts.seed,
    );
    so.mode = opts.mode;
    let set = spectral_samples(&et, &so)?;
    let r = eigen_log_variance(&set);
    for (i, (v, se)) in r.variances.iter().zip(&r.std_errors).enumerate() {
        out.observe(
            Observation::new(name, "variance", *v)
                .index(i)
                .std_error(*se)
                .approximate(true),
        );
    }
    out.observe(Observation::new(name, "flagged", r.flagged as f64).approximate(true));
    Ok(())
}

fn gaussian2(mean: [f64; 2], cov: [f64; 3]) -> Result<GaussianMeasure> {
    GaussianMeasure::new(
        mean.to_vec(),
        SpdMatrix::from_row_slice(2, &[cov[0], cov[1], cov[1], cov[2]])?,
    )
}

/// The two fixed cases: correlated Gaussians, and a product of a Gaussian
/// and a Subbotin law mapped to a product of Subbotin and Gaussian laws.
pub fn default_cases() -> Result<Vec<EntropicCase>> {
    let g = EntropicCase {
        label: "gaussian -> gaussian".into(),
        source: Measure::Gaussian(gaussian2([0.0, 0.0], [1.0, 0.3, 0.8])?),
        target: Measure::Gaussian(gaussian2([0.5, -0.2], [0.6, -0.1, 1.2])?),
        rect: Rect::square(6.0)?,
    };
    let p = EntropicCase {
        label: "product -> product".into(),
        source: Measure::Product(ProductMeasure::new(vec![
            make_catalog_measure("gaussian", &[0.0, 1.0])?,
            make_catalog_measure("subbotin", &[4.0])?,
        ])?),
        target: Measure::Product(ProductMeasure::new(vec![
            make_catalog_measure("subbotin", &[3.0])?,
            make_catalog_measure("gaussian", &[0.5, 1.2])?,
        ])?),
        rect: Rect::square(6.5)?,
    };
    Ok(vec![g, p])
}

pub(super) fn entropic_suite(opts: &SuiteOptions) -> SuiteOutcome {
    match default_cases() {
        Ok(cases) => {
            let mut out = SuiteOutcome::default();
            for c in &cases {
                out.extend(entropic_pair(c, opts));
            }
            out
        }
        Err(e) => {
            let mut out = SuiteOutcome::default();
            out.check(CheckRecord::errored(
                "entropic/construction",
                "evaluation",
                &e,
            ));
            out
        }
    }
}
