//! Every suite at reduced size: all checks pass and the parallel and
//! sequential paths produce identical outcomes.

use spectral_transport::exec::ExecMode;
use spectral_transport::suites::{run_suite, Suite, SuiteOptions};

fn small() -> SuiteOptions {
    SuiteOptions {
        mc_samples: 4000,
        quad_nodes: 512,
        geometry_pairs: 40,
        curve_points: 200,
        gamma2_points: 20,
        grid: 64,
        ..SuiteOptions::default()
    }
}

#[test]
fn reduced_suites_pass_and_are_mode_independent() {
    for suite in Suite::ALL {
        if suite == Suite::Entropic || suite == Suite::Regularization {
            continue;
        }
        let par = run_suite(suite, &small());
        let failures: Vec<_> = par
            .failures()
            .map(|c| (&c.check, c.value, c.tolerance))
            .collect();
        assert!(failures.is_empty(), "{}: {failures:?}", suite.name());
        assert!(!par.checks.is_empty(), "{}", suite.name());
        let seq = run_suite(
            suite,
            &SuiteOptions {
                mode: ExecMode::Sequential,
                ..small()
            },
        );
        assert_eq!(par.checks, seq.checks, "{}", suite.name());
        assert_eq!(par.observations, seq.observations, "{}", suite.name());
    }
}

#[test]
fn seeds_change_monte_carlo_values() {
    let a = run_suite(Suite::Poincare, &small());
    let b = run_suite(Suite::Poincare, &SuiteOptions { seed: 7, ..small() });
    assert_eq!(a.checks.len(), b.checks.len());
    assert_ne!(a.checks, b.checks);
}
