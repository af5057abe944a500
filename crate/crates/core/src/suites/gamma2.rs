use super::SuiteOptions;
use crate::error::Result;
use crate::exec::{map_indexed, stream_rng};
use crate::gamma2::{CubicTest, Gamma2Point, SmoothTriple, TestJet};
use crate::report::{CheckRecord, Observation, SuiteOutcome};

const IDENTITY_TOL: f64 = 1e-8;
const CERTIFICATE_TOL: f64 = 1e-9;
const BOCHNER_TOL: f64 = 1e-6;
const LOWER_BOUND_MARGIN: f64 = -1e-9;

/// Worst relative residuals of one triple over its sample points.
#[derive(Debug, Clone, Copy)]
struct TripleSummary {
    transport_derivative: f64,
    generator_on_phi: f64,
    certificate: f64,
    bochner: f64,
    /// `min (Γ₂ − lower bound)/scale`, when `V` and `W` are convex.
    lower_bound: Option<f64>,
}

fn summarize(t: &dyn SmoothTriple, points: usize, seed: u64) -> Result<TripleSummary> {
    let mut rng = stream_rng(seed, 0);
    let n = t.dim();
    let mut s = TripleSummary {
        transport_derivative: 0.0,
        generator_on_phi: 0.0,
        certificate: 0.0,
        bochner: 0.0,
        lower_bound: t.log_concave().then_some(f64::INFINITY),
    };
    let worse = |a: f64, b: f64| if b.is_nan() || b > a { b } else { a };
    for _ in 0..points {
        let x = t.sample_point(&mut rng);
        let jet = t.jet(&x)?;
        let u = CubicTest::random(n, &mut rng);
        let p = Gamma2Point::from_jets(jet.clone(), crate::gamma2::TestFunction::jet(&u, &x)?)?;

        let pushed = &jet.hess_phi * nalgebra::DVector::from_column_slice(&jet.w_grad);
        let scale = 1.0 + crate::linalg::norm(&jet.v_grad) + pushed.norm();
        let r = crate::linalg::norm(&p.transport_derivative_residual()) / scale;
        s.transport_derivative = worse(s.transport_derivative, r);

        for k in 0..n {
            // u = Φ_k: gradient is the k-th Hessian column, Hessian the k-th third-derivative slice.
            let uk = TestJet {
                value: jet.grad_phi[k],
                grad: jet.hess_phi.column(k).iter().copied().collect(),
                hess: jet.third_phi.slice(k),
            };
            let l = Gamma2Point::from_jets(jet.clone(), uk)?.operator_l()?;
            let vk = jet.v_grad[k];
            let r = (l.w_form + vk).abs().max((l.v_form + vk).abs()) / (1.0 + vk.abs());
            s.generator_on_phi = worse(s.generator_on_phi, r);
        }

        let mag = p.magnitude();
        s.certificate = worse(
            s.certificate,
            (p.bmatrix_certificate() - p.trace_square_lhs()).abs() / mag,
        );
        s.bochner = worse(s.bochner, p.bochner_residual().abs() / mag);
        if let Some(lb) = s.lower_bound.as_mut() {
            let m = (p.gamma2_expanded() - p.lower_bound()) / mag;
            *lb = if m.is_nan() || m < *lb { m } else { *lb };
        }
    }
    Ok(s)
}

/// All pointwise identity and inequality checks for the given triples.
pub fn gamma2_triple_checks(
    triples: &[std::sync::Arc<dyn SmoothTriple>],
    opts: &SuiteOptions,
) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let results = map_indexed(triples.len(), opts.mode, |i| {
        summarize(
            triples[i].as_ref(),
            opts.gamma2_points,
            opts.seed ^ (0x6a22 + i as u64),
        )
    });
    let mut log_concave = 0usize;
    for (i, (t, r)) in triples.iter().zip(results).enumerate() {
        let name = format!("gamma2/{i:02} {}", t.label());
        match r {
            Err(e) => out.check(CheckRecord::errored(name, "evaluation", &e)),
            Ok(s) => {
                out.check(CheckRecord::at_most(
                    format!("{name}/transport-derivative"),
                    "differentiated-transport-equation",
                    s.transport_derivative,
                    IDENTITY_TOL,
                ));
                out.check(CheckRecord::at_most(
                    format!("{name}/generator-on-phi"),
                    "generator-of-phi-partial",
                    s.generator_on_phi,
                    IDENTITY_TOL,
                ));
                out.check(CheckRecord::at_most(
                    format!("{name}/trace-certificate"),
                    "trace-square-certificate",
                    s.certificate,
                    CERTIFICATE_TOL,
                ));
                out.check(CheckRecord::at_most(
                    format!("{name}/bochner"),
                    "bochner-formula",
                    s.bochner,
                    BOCHNER_TOL,
                ));
                if let Some(lb) = s.lower_bound {
                    log_concave += 1;
                    out.check(CheckRecord::at_least(
                        format!("{name}/lower-bound"),
                        "gamma2-lower-bound",
                        lb,
                        LOWER_BOUND_MARGIN,
                    ));
                }
            }
        }
        out.observe(Observation::new(
            &format!("gamma2/{i:02}"),
            "dimension",
            t.dim() as f64,
        ));
    }
    out.observe(Observation::new("gamma2", "triples", triples.len() as f64));
    out.observe(Observation::new(
        "gamma2",
        "log-concave-triples",
        log_concave as f64,
    ));
    out.observe(Observation::new(
        "gamma2",
        "points-per-triple",
        opts.gamma2_points as f64,
    ));
    out
}

pub(super) fn gamma2_suite(opts: &SuiteOptions) -> SuiteOutcome {
    match super::gamma2_triples(opts.seed) {
        Ok(t) => gamma2_triple_checks(&t, opts),
        Err(e) => {
            let mut out = SuiteOutcome::default();
            out.check(CheckRecord::errored(
                "gamma2/construction",
                "evaluation",
                &e,
            ));
            out
        }
    }
}
