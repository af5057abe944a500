//! Order-fixed reductions and jackknife standard errors.

/// Pairwise summation in index order; deterministic for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Population variance (divides by `n`), two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / xs.len() as f64
}

/// Default number of jackknife blocks.
pub const JACKKNIFE_BLOCKS: usize = 50;

/// Point estimate with a delete-one-block jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Block jackknife for a statistic of paired columns.
///
/// `columns` holds per-sample values of each input series (all the same
/// length); `stat` maps the per-column means of a subsample to the estimate.
/// Works for any smooth function of means, e.g. variances and ratios.
pub fn jackknife_means<F>(columns: &[&[f64]], blocks: usize, stat: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == n));
    let full: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let value = stat(&full);
    let blocks = blocks.min(n);
    if blocks < 2 {
        return Estimate {
            value,
            std_error: f64::NAN,
        };
    }
    let bounds: Vec<usize> = (0..=blocks).map(|b| b * n / blocks).collect();
    let block_sums: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            (0..blocks)
                .map(|b| pairwise_sum(&c[bounds[b]..bounds[b + 1]]))
                .collect()
        })
        .collect();
    let totals: Vec<f64> = block_sums.iter().map(|s| pairwise_sum(s)).collect();
    let leave_out: Vec<f64> = (0..blocks)
        .map(|b| {
            let size = (n - (bounds[b + 1] - bounds[b])) as f64;
            let means: Vec<f64> = totals
                .iter()
                .zip(&block_sums)
                .map(|(t, s)| (t - s[b]) / size)
                .collect();
            stat(&means)
        })
        .collect();
    let centre = mean(&leave_out);
    let dev: Vec<f64> = leave_out
        .iter()
        .map(|x| (x - centre) * (x - centre))
        .collect();
    let g = blocks as f64;
    Estimate {
        value,
        std_error: ((g - 1.0) / g * pairwise_sum(&dev)).sqrt(),
    }
}

/// Variance of `xs` with a jackknife standard error.
pub fn jackknife_variance(xs: &[f64], blocks: usize) -> Estimate {
    // Centre first so the second-moment formula does not cancel badly.
    let c = mean(xs);
    let centred: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let sq: Vec<f64> = centred.iter().map(|x| x * x).collect();
    jackknife_means(&[&centred, &sq], blocks, |m| (m[1] - m[0] * m[0]).max(0.0))
}
