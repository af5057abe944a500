//! Dispatch from a validated config to the library suites.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::ExperimentReport;
use spectral_transport::brenier::{
    brenier_1d, brenier_gaussian, brenier_map, brenier_product, brenier_radial,
};
use spectral_transport::entropic_2d::Rect;
use spectral_transport::gamma2::{
    GaussianTriple, OneDTriple, ProductTriple, RadialTriple, SmoothTriple,
};
use spectral_transport::measures::Measure;
use spectral_transport::report::{CheckRecord, SampleDump, SuiteOutcome};
use spectral_transport::suites::{self, run_suite, EntropicCase, Experiment, Suite, SuiteOptions};
use spectral_transport::Result;
use std::sync::Arc;

pub struct RunOutput {
    pub report: ExperimentReport,
    pub samples: Vec<SampleDump>,
}

fn label(m: &Measure) -> String {
    match m {
        Measure::OneD(m) => m.label(),
        Measure::Gaussian(g) => format!("gaussian n={}", g.dim()),
        Measure::Product(p) => {
            format!(
                "product({})",
                p.factors()
                    .iter()
                    .map(|f| f.label())
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        }
        Measure::Radial(r) => r.label(),
    }
}

fn experiment(src: &Measure, dst: &Measure) -> Result<Experiment> {
    let name = format!("{} -> {}", label(src), label(dst));
    let mut e = Experiment::new(name, Arc::from(brenier_map(src, dst)?));
    if let (Measure::Product(a), Measure::Product(b)) = (src, dst) {
        e.factors = Some(
            a.factors()
                .iter()
                .zip(b.factors())
                .map(|(f, g)| brenier_1d(f.clone(), g.clone()))
                .collect(),
        );
    }
    Ok(e)
}

fn triple(src: &Measure, dst: &Measure) -> Result<Arc<dyn SmoothTriple>> {
    Ok(match (src, dst) {
        (Measure::OneD(a), Measure::OneD(b)) => {
            Arc::new(OneDTriple::new(brenier_1d(a.clone(), b.clone()))?)
        }
        (Measure::Gaussian(a), Measure::Gaussian(b)) => {
            Arc::new(GaussianTriple::new(brenier_gaussian(a.clone(), b.clone())?))
        }
        (Measure::Product(a), Measure::Product(b)) => {
            Arc::new(ProductTriple::new(brenier_product(
                a.factors()
                    .iter()
                    .zip(b.factors())
                    .map(|(f, g)| brenier_1d(f.clone(), g.clone()))
                    .collect(),
            )?)?)
        }
        (Measure::Radial(a), Measure::Radial(b)) => {
            Arc::new(RadialTriple::new(brenier_radial(a.clone(), b.clone())?))
        }
        _ => {
            return Err(spectral_transport::Error::Unsupported(
                "pair of different measure types".into(),
            ));
        }
    })
}

fn errored(name: &str, e: &spectral_transport::Error) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    out.check(CheckRecord::errored(name, "evaluation", e));
    out
}

fn pair_outcome(
    kind: ExperimentKind,
    src: &Measure,
    dst: &Measure,
    cfg: &ExperimentConfig,
    opts: &SuiteOptions,
) -> SuiteOutcome {
    let opts = opts.clone();
    let name = kind.name();
    match kind {
        ExperimentKind::GeometrySelftest => unreachable!("validated: no pair"),
        ExperimentKind::Gamma2Check => match triple(src, dst) {
            Ok(t) => suites::gamma2_triple_checks(&[t], &opts),
            Err(e) => errored(name, &e),
        },
        ExperimentKind::Sinkhorn2d => match Rect::square(cfg.half_width) {
            Ok(rect) => suites::entropic_pair(
                &EntropicCase {
                    label: format!("{} -> {}", label(src), label(dst)),
                    source: src.clone(),
                    target: dst.clone(),
                    rect,
                },
                &opts,
            ),
            Err(e) => errored(name, &e),
        },
        ExperimentKind::Variance => match (src, dst) {
            (Measure::OneD(a), Measure::OneD(b)) => {
                suites::variance_1d(&brenier_1d(a.clone(), b.clone()), &opts)
            }
            _ => experiment(src, dst)
                .map_or_else(|e| errored(name, &e), |x| suites::variance_for(&x, &opts)),
        },
        ExperimentKind::Poincare => experiment(src, dst)
            .map_or_else(|e| errored(name, &e), |x| suites::poincare_for(&x, &opts)),
        ExperimentKind::Concentration => experiment(src, dst).map_or_else(
            |e| errored(name, &e),
            |x| suites::concentration_for(&x, &opts),
        ),
    }
}

fn catalog_outcome(kind: ExperimentKind, opts: &SuiteOptions) -> SuiteOutcome {
    let suites: &[Suite] = match kind {
        ExperimentKind::GeometrySelftest => &[Suite::Geometry, Suite::Lipschitz],
        ExperimentKind::Variance => &[Suite::Variance],
        ExperimentKind::Poincare => &[Suite::Poincare],
        ExperimentKind::Gamma2Check => &[Suite::Gamma2],
        ExperimentKind::Sinkhorn2d => &[Suite::Entropic],
        ExperimentKind::Concentration => &[Suite::Concentration],
    };
    let mut out = SuiteOutcome::default();
    for s in suites {
        out.extend(run_suite(*s, opts));
    }
    out
}

/// Runs a validated config. Module errors become failed checks; the run
/// always completes.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunOutput {
    run_experiment_with(cfg, false)
}

/// As [`run_experiment`], also collecting raw samples when `keep_samples`
/// is set even if the config names no sample file.
pub fn run_experiment_with(cfg: &ExperimentConfig, keep_samples: bool) -> RunOutput {
    let kind = cfg.kind.expect("validated config has a kind");
    let mut opts = cfg.suite_options();
    opts.keep_samples |= keep_samples;
    let start = std::time::Instant::now();
    let out = match cfg.pair() {
        Some((src, dst)) => pair_outcome(kind, &src, &dst, cfg, &opts),
        None => catalog_outcome(kind, &opts),
    };
    let mut report = ExperimentReport::new(cfg.clone(), out.checks, out.observations);
    if cfg.output.wall_clock {
        report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    RunOutput {
        report,
        samples: out.samples,
    }
}
