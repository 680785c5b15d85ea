//! Small summary statistics. All inputs are sorted first, so results do not
//! depend on the order trials finished in.

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(xs: &[f64]) -> f64 {
    sorted(xs).iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean, using the unbiased sample variance.
pub fn mean_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = sorted(xs).iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64 / n as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty data");
    let h = (xs.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Binomial standard error at the nominal level `p0`.
pub(crate) fn binomial_se(p0: f64, trials: usize) -> f64 {
    (p0 * (1.0 - p0) / trials as f64).sqrt()
}
