//! Small statistics toolbox shared by the Monte Carlo estimators.

use serde::Serialize;

/// z-quantile for two-sided 95% bands.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% z-quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_6;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    pub fn upper(&self, z: f64) -> f64 {
        self.value + z * self.stderr
    }

    pub fn lower(&self, z: f64) -> f64 {
        self.value - z * self.stderr
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean with the usual standard error of the mean.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return Estimate::new(m, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate::new(m, (var / n as f64).sqrt())
}

/// Binomial proportion estimate; a zero or full count gets the rule-of-three
/// resolution as its standard error so bands never collapse to a point.
pub fn proportion(successes: u64, trials: u64) -> Estimate {
    if trials == 0 {
        return Estimate::new(f64::NAN, f64::INFINITY);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    let floor = 3.0 / n / Z95;
    Estimate::new(p, se.max(if successes == 0 || successes == trials { floor } else { 0.0 }))
}

/// Wilson score upper bound of a binomial proportion.
pub fn wilson_upper(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 || successes >= trials {
        return 1.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre + spread) / (1.0 + z2 / n)).min(1.0)
}

/// Wilson score lower bound of a binomial proportion.
pub fn wilson_lower(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 || successes == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - spread) / (1.0 + z2 / n)).max(0.0)
}

/// Delete-one jackknife standard error of a statistic computed from groups.
/// `leave_one_out[g]` is the statistic with group `g` removed.
pub fn jackknife_stderr(leave_one_out: &[f64]) -> f64 {
    let g = leave_one_out.len();
    if g < 2 {
        return f64::INFINITY;
    }
    let m = mean(leave_one_out);
    let ss: f64 = leave_one_out.iter().map(|x| (x - m).powi(2)).sum();
    ((g - 1) as f64 / g as f64 * ss).sqrt()
}

/// Weighted least-squares line `y = a + b x`; returns `(a, b, stderr(b))`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n || ws.len() != n {
        return None;
    }
    let sw: f64 = ws.iter().sum();
    if !(sw > 0.0) {
        return None;
    }
    let xm = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - xm).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (x - xm) * (y - ym)).sum();
    let b = sxy / sxx;
    let a = ym - b * xm;
    Some((a, b, (1.0 / sxx).sqrt()))
}

/// Ordinary least-squares line; returns `(intercept, slope)`.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let ws = vec![1.0; xs.len()];
    weighted_line(xs, ys, &ws).map(|(a, b, _)| (a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (a, b) = ols_line(&xs, &ys).unwrap();
        assert!((a - 2.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = (wilson_lower(30, 100, Z95), wilson_upper(30, 100, Z95));
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(wilson_upper(0, 100, Z95) > 0.0);
        assert_eq!(wilson_lower(0, 100, Z95), 0.0);
        assert_eq!(wilson_upper(100, 100, Z95), 1.0);
    }

    #[test]
    fn jackknife_of_group_means_matches_stderr_of_mean() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let loo: Vec<f64> = (0..xs.len())
            .map(|i| {
                let rest: Vec<f64> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
                mean(&rest)
            })
            .collect();
        let se = mean_estimate(&xs).stderr;
        assert!((jackknife_stderr(&loo) - se).abs() < 1e-12);
    }
}
