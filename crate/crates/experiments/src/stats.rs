//! Small statistics helpers shared by the studies: mean/standard-error,
//! ordinary least squares with a slope confidence interval, and the
//! last-third trend test used as the stationarity flag.

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares of `y` on `x`; the slope standard error comes
/// from the residual variance with `n - 2` degrees of freedom.
pub fn ols(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm) * (v - xm)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let slope_se = (rss / dof / sxx).sqrt();
    LineFit { slope, intercept, slope_se }
}

/// Stationarity flag: the linear trend of the last third of a trace must be
/// within two standard errors of zero. Snapshots are autocorrelated, so the
/// naive OLS slope error is inflated by the AR(1) factor
/// `sqrt((1 + rho) / (1 - rho))` estimated from the residuals.
pub fn last_third_is_trend_free(trace: &[(usize, f64)]) -> bool {
    let start = trace.len() - trace.len() / 3;
    let tail = &trace[start.min(trace.len().saturating_sub(3))..];
    if tail.len() < 3 {
        return true;
    }
    let x: Vec<f64> = tail.iter().map(|(k, _)| *k as f64).collect();
    let y: Vec<f64> = tail.iter().map(|(_, v)| *v).collect();
    let fit = ols(&x, &y);
    if fit.slope_se == 0.0 {
        return fit.slope == 0.0;
    }
    let resid: Vec<f64> =
        x.iter().zip(&y).map(|(a, b)| b - (fit.intercept + fit.slope * a)).collect();
    let var: f64 = resid.iter().map(|r| r * r).sum();
    let cov: f64 = resid.windows(2).map(|w| w[0] * w[1]).sum();
    let rho = if var > 0.0 { (cov / var).clamp(0.0, 0.95) } else { 0.0 };
    let se = fit.slope_se * ((1.0 + rho) / (1.0 - rho)).sqrt();
    (fit.slope / se).abs() < 2.0
}

/// Deterministic distinct-index subsample of `0..len`, a partial
/// Fisher-Yates keyed by the stream.
pub fn subsample_indices(
    streams: &mfld_core::rng::Streams,
    salt: u64,
    len: usize,
    take: usize,
) -> Vec<usize> {
    use mfld_core::rng::tag;
    let take = take.min(len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..take {
        let j = i + streams.index(tag::SHUFFLE, salt, i as u64, len - i);
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}
