use super::{bank_for, catalog_experiments, Experiment, SuiteOptions, SE_ALLOWANCE};
use crate::brenier::{brenier_1d, Map1D};
use crate::concentration_lab::{
    eigen_log_variance, exp_concentration, poincare_on_theta, poincare_ratio, quadform_poincare,
    quadform_variance, spectral_samples, variance_from_tables, LogitNodes, MatrixFunction,
    QuantileTable, SampleOptions, SampleSet, ScalarFunction, VARIANCE_BOUND,
};
use crate::error::{Error, Result};
use crate::measures::{default_catalog, make_catalog_measure, Family, LogConcaveMeasure1D};
use crate::report::{CheckRecord, Observation, SampleDump, SuiteOutcome};

const EXP_BOUND: f64 = 2.0;
const GAUSSIAN_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-6;

/// Closed-form `Var[log Φ″(X)]` where one is known: 0 between Gaussians and
/// 1 from a uniform to an exponential law.
pub fn known_variance_1d(
    src: &LogConcaveMeasure1D,
    dst: &LogConcaveMeasure1D,
) -> Option<(f64, f64)> {
    match (src.family(), dst.family()) {
        (Family::Gaussian { .. }, Family::Gaussian { .. }) => Some((0.0, GAUSSIAN_TOL)),
        (Family::Uniform { .. }, Family::Exponential { .. }) => Some((1.0, ORACLE_TOL)),
        _ => None,
    }
}

fn variance_checks(
    out: &mut SuiteOutcome,
    name: &str,
    src: &LogConcaveMeasure1D,
    dst: &LogConcaveMeasure1D,
    r: &crate::concentration_lab::VarianceReport,
) {
    let var = r.variances[0];
    let trunc = r.truncation_bound.unwrap_or(0.0);
    out.check(
        CheckRecord::at_most(
            format!("{name}/variance-bound"),
            "log-eigenvalue-variance-bound",
            var,
            VARIANCE_BOUND,
        )
        .with_note(format!(
            "quadrature, {} nodes, truncation bound {trunc:.1e}",
            r.samples
        )),
    );
    if let Some((target, tol)) = known_variance_1d(src, dst) {
        out.check(
            CheckRecord::near(
                format!("{name}/closed-form"),
                "closed-form-variance",
                var,
                target,
                tol,
            )
            .with_note(format!("truncation bound {trunc:.1e}")),
        );
    }
    out.observe(Observation::new(name, "variance", var));
    out.observe(Observation::new(name, "bound-margin", r.margin));
}

/// Variance of `log Φ″(X)` for one 1D pair by quadrature.
pub fn variance_1d(map: &Map1D, opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let name = format!(
        "variance/1d {} -> {}",
        map.source().label(),
        map.target().label()
    );
    match crate::concentration_lab::eigen_log_variance_quadrature_1d(map, opts.quad_nodes) {
        Ok(r) => variance_checks(&mut out, &name, map.source(), map.target(), &r),
        Err(e) => out.check(CheckRecord::errored(name, "evaluation", &e)),
    }
    out
}

/// The 8×8 grid of catalog pairs, quantile tables shared across the grid.
pub fn variance_grid_1d(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let cat = default_catalog();
    let nodes = LogitNodes::new(opts.quad_nodes);
    let tables: Vec<Result<QuantileTable>> =
        crate::exec::map_slice(&cat, opts.mode, |m| QuantileTable::new(m, &nodes));
    let mut max: f64 = 0.0;
    for (i, a) in cat.iter().enumerate() {
        for (j, b) in cat.iter().enumerate() {
            let name = format!("variance/1d {} -> {}", a.label(), b.label());
            match (&tables[i], &tables[j]) {
                (Ok(ta), Ok(tb)) => {
                    let r = variance_from_tables(&nodes, ta, tb);
                    max = max.max(r.variances[0]);
                    variance_checks(&mut out, &name, a, b, &r);
                }
                (Err(e), _) | (_, Err(e)) => out.check(CheckRecord::errored(name, "evaluation", e)),
            }
        }
    }
    out.observe(Observation::new("variance/1d-grid", "max-variance", max));
    // An extra Gaussian pair with different means and scales.
    if let (Ok(a), Ok(b)) = (
        make_catalog_measure("gaussian", &[0.0, 1.0]),
        make_catalog_measure("gaussian", &[3.0, 2.5]),
    ) {
        out.extend(variance_1d(&brenier_1d(a, b), opts));
    }
    out
}

fn samples_for(exp: &Experiment, opts: &SuiteOptions, seed: u64) -> Result<SampleSet> {
    let mut so = SampleOptions::new(opts.mc_samples, seed);
    so.mode = opts.mode;
    spectral_samples(exp.map.as_ref(), &so)
}

fn dump(out: &mut SuiteOutcome, exp: &Experiment, set: &SampleSet, opts: &SuiteOptions) {
    if opts.keep_samples {
        out.samples.push(SampleDump {
            experiment: exp.label.clone(),
            rows: set
                .samples
                .iter()
                .map(|s| s.spectrum.values().to_vec())
                .collect(),
        });
    }
}

fn mc_variance_checks(
    out: &mut SuiteOutcome,
    name: &str,
    set: &SampleSet,
) -> crate::concentration_lab::VarianceReport {
    let r = eigen_log_variance(set);
    for (i, (v, se)) in r.variances.iter().zip(&r.std_errors).enumerate() {
        out.check(
            CheckRecord::at_most(
                format!("{name}/variance-bound[{i}]"),
                "log-eigenvalue-variance-bound",
                *v,
                VARIANCE_BOUND + SE_ALLOWANCE * se,
            )
            .with_note(if set.approximate {
                "approximate"
            } else {
                "monte carlo"
            }),
        );
        out.observe(
            Observation::new(name, "variance", *v)
                .index(i)
                .std_error(*se)
                .approximate(set.approximate),
        );
    }
    out.observe(
        Observation::new(name, "max-variance", r.max_variance()).approximate(set.approximate),
    );
    out.observe(Observation::new(name, "bound-margin", r.margin).approximate(set.approximate));
    out.observe(Observation::new(name, "samples", r.samples as f64));
    out.observe(Observation::new(name, "flagged", r.flagged as f64));
    r
}

/// Monte Carlo variance of `Λ(X)` for one experiment.
pub fn variance_for(exp: &Experiment, opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let name = format!("variance/{}", exp.label);
    match samples_for(exp, opts, opts.seed) {
        Ok(set) => {
            mc_variance_checks(&mut out, &name, &set);
            dump(&mut out, exp, &set, opts);
        }
        Err(e) => out.check(CheckRecord::errored(name, "evaluation", &e)),
    }
    out
}

pub(super) fn variance_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = variance_grid_1d(opts);
    let exps = match catalog_experiments(opts.seed) {
        Ok(e) => e,
        Err(e) => {
            out.check(CheckRecord::errored("variance/catalog", "evaluation", &e));
            return out;
        }
    };
    let nodes = LogitNodes::new(opts.quad_nodes);
    for (k, exp) in exps.iter().enumerate().filter(|(_, e)| e.map.dim() > 1) {
        let name = format!("variance/{}", exp.label);
        let n = exp.map.dim();
        let mut so = SampleOptions::new(opts.mc_samples, opts.seed.wrapping_add(k as u64));
        so.mode = opts.mode;
        so.directions = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let set = match spectral_samples(exp.map.as_ref(), &so) {
            Ok(s) => s,
            Err(e) => {
                out.check(CheckRecord::errored(name, "evaluation", &e));
                continue;
            }
        };
        let r = mc_variance_checks(&mut out, &name, &set);
        if exp.map.kind() == crate::brenier::MapKind::GaussianLinear {
            out.check(CheckRecord::near(
                format!("{name}/constant-hessian"),
                "constant-hessian-variance",
                r.max_variance(),
                0.0,
                GAUSSIAN_TOL,
            ));
        }
        // Along eᵢ a product map's log quadratic form is log Φᵢ″(Xᵢ); its
        // variance must match the factor's quadrature value.
        if let Some(factors) = &exp.factors {
            for (i, f) in factors.iter().enumerate() {
                let q = QuantileTable::new(f.source(), &nodes).and_then(|a| {
                    Ok(variance_from_tables(
                        &nodes,
                        &a,
                        &QuantileTable::new(f.target(), &nodes)?,
                    ))
                });
                match (q, quadform_variance(&set, i)) {
                    (Ok(q), Ok(e)) => out.check(CheckRecord::near(
                        format!("{name}/factor-{i}-matches-quadrature"),
                        "product-factor-variance",
                        e.value,
                        q.variances[0],
                        SE_ALLOWANCE * e.std_error,
                    )),
                    (Err(e), _) | (_, Err(e)) => out.check(CheckRecord::errored(
                        format!("{name}/factor-{i}"),
                        "evaluation",
                        &e,
                    )),
                }
            }
        }
        dump(&mut out, exp, &set, opts);
    }
    let max = out
        .observations
        .iter()
        .filter(|o| o.statistic == "variance")
        .map(|o| o.value)
        .fold(0.0, f64::max);
    out.observe(Observation::new("variance", "max-observed-variance", max));
    out
}

fn ratio_check(
    out: &mut SuiteOutcome,
    name: String,
    tag: &str,
    r: crate::concentration_lab::RatioEstimate,
) {
    let mut c = CheckRecord::at_most(name, tag, r.ratio, 1.0 + SE_ALLOWANCE * r.std_error);
    if r.violation_candidate {
        c.pass = false;
        c.note = Some("zero gradient energy with nonzero variance".into());
    }
    out.check(c);
}

fn poincare_cells(
    out: &mut SuiteOutcome,
    exp: &Experiment,
    set: &SampleSet,
    opts: &SuiteOptions,
) -> Result<()> {
    let name = format!("poincare/{}", exp.label);
    for f in bank_for(&opts.bank, set.dim) {
        ratio_check(
            out,
            format!("{name}/{}", f.name()),
            "log-spectrum-poincare",
            poincare_ratio(set, &f),
        );
    }
    for d in 0..set.directions.len() {
        for g in [
            ScalarFunction::Identity,
            ScalarFunction::Clamp,
            ScalarFunction::Tanh,
        ] {
            let tag = "log-quadratic-form-poincare";
            ratio_check(
                out,
                format!("{name}/quadform{d}-{g:?}").to_lowercase(),
                tag,
                quadform_poincare(set, d, g)?,
            );
        }
    }
    let mut mfs: Vec<MatrixFunction> = (0..set.directions.len())
        .map(MatrixFunction::LogQuadraticForm)
        .collect();
    mfs.push(MatrixFunction::DistanceToIdentity);
    mfs.push(MatrixFunction::Spectral(
        crate::concentration_lab::BankFunction::LogSumExp,
    ));
    for f in mfs {
        ratio_check(
            out,
            format!("{name}/theta-{}", f.name()),
            "hessian-law-poincare",
            poincare_on_theta(set, &f)?,
        );
    }
    Ok(())
}

/// Poincaré ratios for one experiment.
pub fn poincare_for(exp: &Experiment, opts: &SuiteOptions) -> SuiteOutcome {
    poincare_with_seed(exp, opts, opts.seed)
}

fn poincare_with_seed(exp: &Experiment, opts: &SuiteOptions, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let res = samples_for(exp, opts, seed).and_then(|set| {
        poincare_cells(&mut out, exp, &set, opts)?;
        dump(&mut out, exp, &set, opts);
        Ok(())
    });
    if let Err(e) = res {
        out.check(CheckRecord::errored(
            format!("poincare/{}", exp.label),
            "evaluation",
            &e,
        ));
    }
    out
}

fn for_catalog(
    opts: &SuiteOptions,
    name: &str,
    f: impl Fn(&Experiment, u64) -> SuiteOutcome,
) -> SuiteOutcome {
    match catalog_experiments(opts.seed) {
        Ok(exps) => {
            let mut out = SuiteOutcome::default();
            for (k, e) in exps.iter().enumerate() {
                out.extend(f(e, opts.seed.wrapping_add(k as u64)));
            }
            out.observe(Observation::new(name, "experiments", exps.len() as f64));
            out
        }
        Err(e) => {
            let mut out = SuiteOutcome::default();
            out.check(CheckRecord::errored(
                format!("{name}/catalog"),
                "evaluation",
                &e,
            ));
            out
        }
    }
}

pub(super) fn poincare_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = for_catalog(opts, "poincare", |e, s| poincare_with_seed(e, opts, s));
    let cells = out.checks.len();
    out.observe(Observation::new("poincare", "cells", cells as f64));
    out
}

fn concentration_cells(
    out: &mut SuiteOutcome,
    exp: &Experiment,
    set: &SampleSet,
    opts: &SuiteOptions,
) -> Result<()> {
    if !(opts.exp_c > 0.0) {
        return Err(Error::InvalidArgument("c must be positive".into()));
    }
    let name = format!("concentration/{}", exp.label);
    for f in bank_for(&opts.bank, set.dim) {
        let e = exp_concentration(set, &f, opts.exp_c)?;
        out.check(
            CheckRecord::at_most(
                format!("{name}/{}", f.name()),
                "exponential-concentration",
                e.value,
                EXP_BOUND + SE_ALLOWANCE * e.std_error,
            )
            .with_note(format!("c = {}", opts.exp_c)),
        );
        for &c in &opts.c_grid {
            let e = exp_concentration(set, &f, c)?;
            out.observe(
                Observation::new(
                    &format!("{name}/{}", f.name()),
                    &format!("mgf(c={c})"),
                    e.value,
                )
                .std_error(e.std_error),
            );
        }
    }
    Ok(())
}

/// Exponential concentration values and the `c` calibration curve for one
/// experiment.
pub fn concentration_for(exp: &Experiment, opts: &SuiteOptions) -> SuiteOutcome {
    concentration_with_seed(exp, opts, opts.seed)
}

fn concentration_with_seed(exp: &Experiment, opts: &SuiteOptions, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let res = samples_for(exp, opts, seed).and_then(|set| {
        concentration_cells(&mut out, exp, &set, opts)?;
        dump(&mut out, exp, &set, opts);
        Ok(())
    });
    if let Err(e) = res {
        out.check(CheckRecord::errored(
            format!("concentration/{}", exp.label),
            "evaluation",
            &e,
        ));
    }
    out
}

pub(super) fn concentration_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = for_catalog(opts, "concentration", |e, s| {
        concentration_with_seed(e, opts, s)
    });
    let cells = out.checks.len();
    out.observe(Observation::new("concentration", "cells", cells as f64));
    out
}
