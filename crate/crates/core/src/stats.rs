//! Scalar numeric helpers shared across the crate: normal and beta
//! distribution functions, descriptive statistics, and Kolmogorov-Smirnov
//! statistics used by the test suites.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

pub const SQRT_2PI: f64 = 2.506628274631000502415765284811;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function, accurate over the full range.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
///
/// Rational initial guess (Acklam) polished with two Halley steps against
/// `norm_cdf`, giving roughly full double precision on (0, 1).
pub fn norm_inv_cdf(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "normal quantile requires p in (0,1), got {p}"
    );
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // Halley refinement against norm_cdf; skipped in the extreme tails
    // where exp(x^2/2) overflows and the rational guess is already the
    // best f64 can do.
    if x.abs() < 37.0 {
        for _ in 0..2 {
            let e = norm_cdf(x) - p;
            let u = e * SQRT_2PI * (0.5 * x * x).exp();
            x -= u / (1.0 + x * u / 2.0);
        }
    }
    x
}

/// Distribution function of Beta(a, b) at `x`, clamped to [0, 1].
pub fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation (divisor n-1).
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2, "sample_std needs at least two values");
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile on sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

/// Interquartile range of an unsorted slice.
pub fn iqr(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Pearson correlation of two equal-length slices.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (ties take maximal rank, matching the rank
/// convention used throughout the crate; exact for tie-free data).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = rank_vector(x);
    let ry = rank_vector(y);
    pearson(&rx, &ry)
}

fn rank_vector(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        for k in i..=j {
            ranks[idx[k]] = (j + 1) as f64;
        }
        i = j + 1;
    }
    ranks
}

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
pub fn ks_statistic_uniform(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi.abs()).max(lo.abs());
    }
    d
}

/// Asymptotic one-sample KS critical value at level `alpha`.
pub fn ks_critical_value(alpha: f64, n: usize) -> f64 {
    kolmogorov_factor(alpha) / (n as f64).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = sa[i].min(sb[j]);
        while i < n && sa[i] <= v {
            i += 1;
        }
        while j < m && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    kolmogorov_factor(alpha) * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

fn kolmogorov_factor(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 5e-12);
        assert!(norm_cdf(-12.0) < 1e-30);
    }

    #[test]
    fn norm_inv_cdf_round_trip() {
        for k in 1..2000 {
            let p = k as f64 / 2000.0;
            let x = norm_inv_cdf(p);
            assert!(
                (norm_cdf(x) - p).abs() < 1e-13,
                "round trip failed at p={p}"
            );
        }
        assert!((norm_inv_cdf(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn norm_inv_cdf_tails() {
        for &p in &[1e-12, 1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8] {
            let x = norm_inv_cdf(p);
            assert!((norm_cdf(x) - p).abs() / p.min(1.0 - p) < 1e-8);
        }
    }

    #[test]
    fn beta_cdf_uniform_case() {
        // Beta(1,1) is Uniform(0,1).
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            assert!((beta_cdf(u, 1.0, 1.0) - u).abs() < 1e-12);
        }
        assert_eq!(beta_cdf(-0.5, 2.0, 3.0), 0.0);
        assert_eq!(beta_cdf(1.5, 2.0, 3.0), 1.0);
    }

    #[test]
    fn quantile_and_iqr() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((quantile_sorted(&s, 0.5) - 2.5).abs() < 1e-15);
        assert!((iqr(&v) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_matches_direct_sum() {
        let v: [f64; 3] = [-1.0, 0.5, 2.0];
        let direct: f64 = v.iter().map(|x| x.exp()).sum::<f64>();
        assert!((logsumexp(&v) - direct.ln()).abs() < 1e-12);
        // Stable far outside exp range.
        assert!((logsumexp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn ks_uniform_detects_shift() {
        let good: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_statistic_uniform(&good) < ks_critical_value(0.01, 1000));
        let bad: Vec<f64> = good.iter().map(|u| u * 0.8).collect();
        assert!(ks_statistic_uniform(&bad) > ks_critical_value(0.01, 1000));
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = [0.1, 0.4, 0.9, 0.2];
        assert_eq!(ks_two_sample_statistic(&a, &a), 0.0);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let x: [f64; 4] = [0.3, 1.2, -5.0, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x, &y) - 1.0).abs() < 1e-12);
    }
}
