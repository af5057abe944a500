use super::SuiteOptions;
use crate::error::Result;
use crate::exec::{map_indexed, stream_rng};
use crate::report::{CheckRecord, Observation, SuiteOutcome};
use crate::spd_geometry::{
    curve_length, geodesic_curve, log_eigen_map, log_quadratic_form, majorization_check,
    numeric_upper_gradient, random_invertible, random_spd, sorted_spectra_deviation, spd_distance,
};
use rand::Rng;
use rand_distr::StandardNormal;

const MARGIN: f64 = -1e-9;
const GEODESIC_TOL: f64 = 1e-4;

fn dim_of(i: usize) -> usize {
    2 + i % 7
}

struct MetricRow {
    symmetry: f64,
    triangle: f64,
    congruence: f64,
    inversion: f64,
    geodesic: f64,
}

fn metric_row(seed: u64, i: usize, curve_points: usize) -> Result<MetricRow> {
    let mut rng = stream_rng(seed, i as u64);
    let n = dim_of(i);
    let (a, b, c) = (
        random_spd(n, &mut rng),
        random_spd(n, &mut rng),
        random_spd(n, &mut rng),
    );
    let t = random_invertible(n, &mut rng);
    let d_ab = spd_distance(&a, &b)?;
    let d_ba = spd_distance(&b, &a)?;
    let triangle = d_ab + spd_distance(&b, &c)? - spd_distance(&a, &c)?;
    let congruence = -(spd_distance(&a.congruence(&t)?, &b.congruence(&t)?)? - d_ab).abs();
    let inversion = -(spd_distance(&a.inverse(), &b.inverse())? - d_ab).abs();
    let geodesic = (curve_length(&geodesic_curve(&a, &b, curve_points)?)? - d_ab).abs();
    Ok(MetricRow {
        symmetry: -(d_ab - d_ba).abs(),
        triangle,
        congruence,
        inversion,
        geodesic,
    })
}

fn min_by<T>(rows: &[T], f: impl Fn(&T) -> f64) -> (f64, usize) {
    rows.iter()
        .enumerate()
        .map(|(i, r)| (f(r), i))
        .fold((f64::INFINITY, 0), |a, b| {
            if b.0 < a.0 || b.0.is_nan() {
                b
            } else {
                a
            }
        })
}

/// Collects per-pair results, turning the first error into a failed check.
fn collect<T>(out: &mut SuiteOutcome, name: &str, rows: Vec<Result<T>>) -> Option<Vec<T>> {
    let mut ok = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                out.check(CheckRecord::errored(
                    format!("{name}/pair-{i}"),
                    "evaluation",
                    &e,
                ));
                return None;
            }
        }
    }
    Some(ok)
}

pub(super) fn metric_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let rows = map_indexed(opts.geometry_pairs, opts.mode, |i| {
        metric_row(opts.seed, i, opts.curve_points)
    });
    let Some(rows) = collect(&mut out, "spd-metric", rows) else {
        return out;
    };
    let pairs = rows.len() as f64;
    out.observe(Observation::new("spd-metric", "pairs", pairs));
    for (name, tag, f) in [
        (
            "spd-metric/symmetry",
            "metric-symmetry",
            (|r: &MetricRow| r.symmetry) as fn(&MetricRow) -> f64,
        ),
        ("spd-metric/triangle", "metric-triangle-inequality", |r| {
            r.triangle
        }),
        (
            "spd-metric/congruence-invariance",
            "metric-congruence-invariance",
            |r| r.congruence,
        ),
        (
            "spd-metric/inversion-invariance",
            "metric-inversion-invariance",
            |r| r.inversion,
        ),
    ] {
        let (v, i) = min_by(&rows, f);
        out.check(
            CheckRecord::at_least(name, tag, v, MARGIN)
                .with_note(format!("worst pair {i}, n = {}", dim_of(i))),
        );
    }
    let (v, i) = min_by(&rows, |r| -r.geodesic);
    out.check(
        CheckRecord::at_most(
            "spd-geodesic/length-equals-distance",
            "geodesic-length",
            -v,
            GEODESIC_TOL,
        )
        .with_note(format!(
            "{} points per curve, worst pair {i}",
            opts.curve_points
        )),
    );
    out
}

struct LipschitzRow {
    quadform: f64,
    spectrum: f64,
    sorted: f64,
    majorization: f64,
}

fn lipschitz_row(seed: u64, i: usize) -> Result<LipschitzRow> {
    let mut rng = stream_rng(seed ^ 0x5eed_1a95, i as u64);
    let n = dim_of(i);
    let (a, b) = (random_spd(n, &mut rng), random_spd(n, &mut rng));
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let d = spd_distance(&a, &b)?;
    let quadform = d - (log_quadratic_form(&a, &v)? - log_quadratic_form(&b, &v)?).abs();
    let spectrum = d - log_eigen_map(&a).distance(&log_eigen_map(&b));
    let sorted = d - sorted_spectra_deviation(&a, &b)?;
    let majorization = majorization_check(&a, &b)?.min_margin();
    Ok(LipschitzRow {
        quadform,
        spectrum,
        sorted,
        majorization,
    })
}

pub(super) fn lipschitz_suite(opts: &SuiteOptions) -> SuiteOutcome {
    let mut out = SuiteOutcome::default();
    let rows = map_indexed(opts.geometry_pairs, opts.mode, |i| {
        lipschitz_row(opts.seed, i)
    });
    let Some(rows) = collect(&mut out, "lipschitz", rows) else {
        return out;
    };
    for (name, tag, f) in [
        (
            "lipschitz/log-quadratic-form",
            "log-quadratic-form-1-lipschitz",
            (|r: &LipschitzRow| r.quadform) as fn(&LipschitzRow) -> f64,
        ),
        ("lipschitz/log-spectrum", "log-spectrum-1-lipschitz", |r| {
            r.spectrum
        }),
        (
            "lipschitz/sorted-spectra",
            "sorted-spectra-deviation-bound",
            |r| r.sorted,
        ),
        (
            "lipschitz/log-majorization",
            "log-majorization-chain",
            |r| r.majorization,
        ),
    ] {
        let (v, i) = min_by(&rows, f);
        out.check(
            CheckRecord::at_least(name, tag, v, MARGIN)
                .with_note(format!("worst pair {i}, n = {}", dim_of(i))),
        );
    }
    // Difference-quotient slopes stay below the Lipschitz constant.
    let probes = map_indexed(20, opts.mode, |i| -> Result<f64> {
        let mut rng = stream_rng(opts.seed ^ 0x0051_09e5, i as u64);
        let n = dim_of(i);
        let a = random_spd(n, &mut rng);
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let f = |m: &crate::spd_geometry::SpdMatrix| log_quadratic_form(m, &v).unwrap_or(f64::NAN);
        numeric_upper_gradient(f, &a, 1e-3, 200, &mut rng)
    });
    if let Some(slopes) = collect(&mut out, "lipschitz/upper-gradient", probes) {
        let max = slopes.iter().copied().fold(0.0, f64::max);
        out.check(CheckRecord::at_most(
            "lipschitz/upper-gradient-log-quadratic-form",
            "upper-gradient-bound",
            max,
            1.0 + 1e-6,
        ));
    }
    out
}
