//! Runs the eight acceptance criteria at full size and prints one PASS/FAIL
//! line each. Exits non-zero if any criterion fails.

use spectral_transport::report::SuiteOutcome;
use spectral_transport::suites::{run_suite, Suite, SuiteOptions};
use std::time::{Duration, Instant};

struct Criterion {
    id: usize,
    title: &'static str,
    suite: Suite,
    budget: Duration,
    /// Extra coverage requirement on the outcome.
    coverage: fn(&SuiteOutcome) -> Result<(), String>,
}

fn observed(out: &SuiteOutcome, experiment: &str, statistic: &str) -> f64 {
    out.observations
        .iter()
        .find(|o| o.experiment == experiment && o.statistic == statistic)
        .map_or(0.0, |o| o.value)
}

fn none(_: &SuiteOutcome) -> Result<(), String> {
    Ok(())
}

fn gamma2_coverage(out: &SuiteOutcome) -> Result<(), String> {
    let triples = observed(out, "gamma2", "triples");
    let points = observed(out, "gamma2", "points-per-triple");
    let dims: std::collections::BTreeSet<u64> = out
        .observations
        .iter()
        .filter(|o| o.statistic == "dimension")
        .map(|o| o.value as u64)
        .collect();
    if triples >= 20.0 && points >= 100.0 && dims == [1, 2, 3].into() {
        Ok(())
    } else {
        Err(format!(
            "{triples} triples x {points} points, dimensions {dims:?}"
        ))
    }
}

fn cells(name: &'static str) -> impl Fn(&SuiteOutcome) -> Result<(), String> {
    move |out| {
        let c = observed(out, name, "cells");
        if c >= 40.0 {
            Ok(())
        } else {
            Err(format!("only {c} cells"))
        }
    }
}

fn poincare_cells(out: &SuiteOutcome) -> Result<(), String> {
    cells("poincare")(out)
}

fn concentration_coverage(out: &SuiteOutcome) -> Result<(), String> {
    cells("concentration")(out)?;
    if out
        .observations
        .iter()
        .any(|o| o.statistic.starts_with("mgf(c="))
    {
        Ok(())
    } else {
        Err("no calibration sweep reported".into())
    }
}

fn entropic_coverage(out: &SuiteOutcome) -> Result<(), String> {
    let v: Vec<_> = out
        .observations
        .iter()
        .filter(|o| o.statistic == "variance")
        .collect();
    if !v.is_empty() && v.iter().all(|o| o.approximate) {
        Ok(())
    } else {
        Err("entropic variances missing or not flagged approximate".into())
    }
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            title: "SPD metric suite",
            suite: Suite::Geometry,
            budget: Duration::from_secs(30),
            coverage: none,
        },
        Criterion {
            id: 2,
            title: "Lipschitz functionals",
            suite: Suite::Lipschitz,
            budget: Duration::from_secs(10),
            coverage: none,
        },
        Criterion {
            id: 3,
            title: "Gamma-2 identities",
            suite: Suite::Gamma2,
            budget: Duration::from_secs(120),
            coverage: gamma2_coverage,
        },
        Criterion {
            id: 4,
            title: "log-eigenvalue variance bound",
            suite: Suite::Variance,
            budget: Duration::from_secs(300),
            coverage: none,
        },
        Criterion {
            id: 5,
            title: "Poincare ratios",
            suite: Suite::Poincare,
            budget: Duration::from_secs(300),
            coverage: poincare_cells,
        },
        Criterion {
            id: 6,
            title: "exponential concentration",
            suite: Suite::Concentration,
            budget: Duration::from_secs(120),
            coverage: concentration_coverage,
        },
        Criterion {
            id: 7,
            title: "regularization",
            suite: Suite::Regularization,
            budget: Duration::from_secs(60),
            coverage: none,
        },
        Criterion {
            id: 8,
            title: "entropic cross-validation",
            suite: Suite::Entropic,
            budget: Duration::from_secs(300),
            coverage: entropic_coverage,
        },
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let opts = SuiteOptions::default();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
    {
        let start = Instant::now();
        let out = run_suite(c.suite, &opts);
        let took = start.elapsed();
        let mut problems: Vec<String> = out
            .failures()
            .map(|f| {
                format!(
                    "{} = {} (tolerance {}){}",
                    f.check,
                    f.value,
                    f.tolerance,
                    f.note
                        .as_ref()
                        .map(|n| format!(" [{n}]"))
                        .unwrap_or_default()
                )
            })
            .collect();
        if let Err(e) = (c.coverage)(&out) {
            problems.push(format!("coverage: {e}"));
        }
        if took > c.budget {
            problems.push(format!(
                "runtime {:.1}s over budget {}s",
                took.as_secs_f64(),
                c.budget.as_secs()
            ));
        }
        let verdict = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {} {:<32} {verdict}  ({} checks, {:.1}s of {}s)",
            c.id,
            c.title,
            out.checks.len(),
            took.as_secs_f64(),
            c.budget.as_secs()
        );
        for p in problems.iter().take(12) {
            println!("    {p}");
        }
        if problems.len() > 12 {
            println!("    ... {} more", problems.len() - 12);
        }
        if !problems.is_empty() {
            failed += 1;
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
