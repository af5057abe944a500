use super::SuiteOptions;
use crate::concentration_lab::caffarelli_floor_check;
use crate::error::Result;
use crate::exec::map_slice;
use crate::measures::{default_catalog, make_catalog_measure, LogConcaveMeasure1D};
use crate::report::{CheckRecord, Observation, SuiteOutcome};

pub const LEVELS: [u32; 4] = [5, 10, 20, 40];
const NORMALIZATION_TOL: f64 = 1e-8;
const CURVATURE_SLACK: f64 = 1e-6;
const CAFFARELLI_GRIDS: [usize; 4] = [50, 100, 200, 400];

struct LevelRow {
    normalization: f64,
    curvature: Option<f64>,
}

fn level_row(m: &LogConcaveMeasure1D, n: u32) -> Result<LevelRow> {
    let r = m.regularize(n)?;
    Ok(LevelRow {
        normalization: r.normalization_error()?,
        curvature: r.min_curvature(-10.0, 10.0, 401),
    })
}

/// `max |V_N − V|` over `points` nodes of `[lo, hi]`.
fn sup_gap(m: &LogConcaveMeasure1D, n: u32, lo: f64, hi: f64, points: usize) -> Result<f64> {
    let r = m.regularize(n)?;
    Ok((0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .map(|x| (r.potential(x) - m.potential(x)).abs())
        .fold(0.0, f64::max))
}

pub(super) fn regularization_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let cat = default_catalog();
    let jobs: Vec<(usize, u32)> = (0..cat.len())
        .flat_map(|i| LEVELS.map(|n| (i, n)))
        .collect();
    let rows = map_slice(&jobs, opts.mode, |&(i, n)| level_row(&cat[i], n));
    for (&(i, n), r) in jobs.iter().zip(rows) {
        let name = format!("regularize/{} N={n}", cat[i].label());
        match r {
            Err(e) => out.check(CheckRecord::errored(name, "evaluation", &e)),
            Ok(r) => {
                out.check(CheckRecord::at_most(
                    format!("{name}/normalization"),
                    "regularized-normalization",
                    r.normalization,
                    NORMALIZATION_TOL,
                ));
                match r.curvature {
                    Some(c) => out.check(
                        CheckRecord::at_least(
                            format!("{name}/curvature-floor"),
                            "regularized-curvature-floor",
                            c,
                            1.0 / n as f64 - CURVATURE_SLACK,
                        )
                        .with_note("min V_N'' on 401 nodes of [-10, 10]"),
                    ),
                    None => out.check(
                        CheckRecord::at_most(
                            format!("{name}/curvature-floor"),
                            "regularized-curvature-floor",
                            f64::NAN,
                            0.0,
                        )
                        .with_note("no second derivative"),
                    ),
                }
            }
        }
    }

    // V_N → V on compact subsets of the support.
    let conv: [(&str, &[f64], f64, f64); 3] = [
        ("uniform", &[0.0, 1.0], 0.1, 0.9),
        ("exponential", &[1.0], 0.1, 5.0),
        ("beta", &[2.0, 2.0], 0.1, 0.9),
    ];
    for (name, p, lo, hi) in conv {
        let label = format!("regularize/{name} convergence on [{lo}, {hi}]");
        let gaps: Result<Vec<f64>> = make_catalog_measure(name, p)
            .and_then(|m| LEVELS.iter().map(|&n| sup_gap(&m, n, lo, hi, 81)).collect());
        match gaps {
            Err(e) => out.check(CheckRecord::errored(label, "evaluation", &e)),
            Ok(g) => {
                for (n, v) in LEVELS.iter().zip(&g) {
                    out.observe(Observation::new(&label, &format!("sup-gap(N={n})"), *v));
                }
                let worst_ratio = g.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
                out.check(
                    CheckRecord::at_most(
                        format!("{label}/decreasing"),
                        "regularized-potential-convergence",
                        worst_ratio,
                        1.0,
                    )
                    .with_note("largest ratio of successive sup-gaps"),
                );
            }
        }
    }

    // Lower bound on the regularized map's second derivative.
    let pairs: [(&str, &[f64], &str, &[f64]); 3] = [
        ("gaussian", &[0.0, 1.0], "gaussian", &[0.0, 2.0]),
        ("uniform", &[0.0, 1.0], "exponential", &[1.0]),
        ("beta", &[2.0, 2.0], "logistic", &[0.0, 1.0]),
    ];
    let n = 10;
    for (a, pa, b, pb) in pairs {
        let label = format!("caffarelli/{a} -> {b} N={n}");
        let res = make_catalog_measure(a, pa).and_then(|mu| {
            let nu = make_catalog_measure(b, pb)?;
            CAFFARELLI_GRIDS
                .iter()
                .map(|&m| caffarelli_floor_check(&mu, &nu, n, m))
                .collect::<Result<Vec<f64>>>()
        });
        match res {
            Err(e) => out.check(CheckRecord::errored(label, "evaluation", &e)),
            Ok(margins) => {
                for (m, v) in CAFFARELLI_GRIDS.iter().zip(&margins) {
                    out.observe(Observation::new(&label, &format!("margin(grid={m})"), *v));
                }
                let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
                // Strictly positive: the smallest normal float is the threshold.
                out.check(
                    CheckRecord::at_least(
                        format!("{label}/margin"),
                        "caffarelli-floor",
                        min,
                        f64::MIN_POSITIVE,
                    )
                    .with_note("min over all grids, must be > 0"),
                );
                let drift = margins
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs())
                    .fold(0.0, f64::max);
                out.observe(Observation::new(&label, "refinement-drift", drift));
            }
        }
    }
    out
}
