//! Univariate Gaussian-kernel density estimation: Silverman bandwidth,
//! density, distribution function and its inverse, and sampling. These
//! models carry the per-dimension margins used by the independent sampler
//! and by both copula models.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::{iqr, norm_cdf, norm_pdf, sample_std, SQRT_2PI};

/// A fitted univariate kernel density: one Gaussian of scale `bandwidth`
/// centered at every observed value, with equal weights. The cdf is
/// strictly increasing on the whole real line with limits 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel {
    centers: Vec<f64>,
    sorted: Vec<f64>,
    bandwidth: f64,
}

/// Rule-of-thumb bandwidth `0.9 * min(std, IQR / 1.34) * n^(-1/5)`,
/// falling back to the standard deviation alone when the IQR is zero.
pub fn silverman_bandwidth(column: &[f64]) -> Result<f64> {
    let n = column.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "bandwidth selection needs at least 2 values, got {n}"
        )));
    }
    let std = sample_std(column);
    if std == 0.0 {
        return Err(Error::DegenerateData(
            "column has zero spread; a continuous margin cannot be fitted".into(),
        ));
    }
    let range = iqr(column) / 1.34;
    let scale = if range > 0.0 { std.min(range) } else { std };
    Ok(0.9 * scale * (n as f64).powf(-0.2))
}

/// Fits the kernel density of one data column.
pub fn fit_marginal(column: &[f64]) -> Result<MarginalModel> {
    if let Some(&bad) = column.iter().find(|v| !v.is_finite()) {
        return Err(Error::DataValidation(format!(
            "non-finite value {bad} in margin data"
        )));
    }
    let bandwidth = silverman_bandwidth(column)?;
    MarginalModel::from_parts(column.to_vec(), bandwidth)
}

impl MarginalModel {
    /// Rebuilds a model from stored parameters, re-validating invariants.
    pub fn from_parts(centers: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centers.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a margin needs at least 2 centers, got {}",
                centers.len()
            )));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::DataValidation(format!(
                "bandwidth must be a positive real, got {bandwidth}"
            )));
        }
        if let Some(&bad) = centers.iter().find(|v| !v.is_finite()) {
            return Err(Error::DataValidation(format!(
                "non-finite center {bad}"
            )));
        }
        let mut sorted = centers.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            centers,
            sorted,
            bandwidth,
        })
    }

    /// Observed values, in the order they were fitted.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.centers.iter().map(|c| norm_pdf((x - c) / h)).sum();
        sum / (self.centers.len() as f64 * h)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let terms: Vec<f64> = self
            .centers
            .iter()
            .map(|c| {
                let z = (x - c) / h;
                -0.5 * z * z
            })
            .collect();
        crate::stats::logsumexp(&terms) - (self.centers.len() as f64 * h * SQRT_2PI).ln()
    }

    /// Mean of the per-center Gaussian distribution functions.
    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.centers.iter().map(|c| norm_cdf((x - c) / h)).sum();
        sum / self.centers.len() as f64
    }

    /// Solves `cdf(x) = u` by safeguarded Newton iteration inside a bracket
    /// expanded from `[min - 12h, max + 12h]`, to within 1e-12 in u.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "inverse cdf requires u in (0,1), got {u}"
            )));
        }
        let h = self.bandwidth;
        let n = self.sorted.len();
        let mut lo = self.sorted[0] - 12.0 * h;
        let mut hi = self.sorted[n - 1] + 12.0 * h;
        // The default bracket covers all but ~1e-33 of mass; widen in the
        // astronomically unlikely case u falls outside it.
        let mut guard = 0;
        while self.cdf(lo) > u {
            lo -= 12.0 * h;
            guard += 1;
            if guard > 64 {
                return Err(Error::NumericFailure("inverse cdf bracket failed".into()));
            }
        }
        while self.cdf(hi) < u {
            hi += 12.0 * h;
            guard += 1;
            if guard > 128 {
                return Err(Error::NumericFailure("inverse cdf bracket failed".into()));
            }
        }
        // Order-statistic guess: the u-quantile sits near the u*(n-1)-th
        // sorted center.
        let mut x = self.sorted[((u * (n - 1) as f64) as usize).min(n - 1)];
        if x <= lo || x >= hi {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f.abs() <= 1e-12 {
                return Ok(x);
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.pdf(x);
            let newton = x - f / slope;
            x = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        // Bisection has narrowed the bracket far below any practical
        // tolerance by now; return the midpoint.
        Ok(0.5 * (lo + hi))
    }

    /// One draw: a uniformly chosen center plus bandwidth-scaled Gaussian
    /// noise.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let i = rng.random_range(0..self.centers.len());
        let z: f64 = StandardNormal.sample(rng);
        self.centers[i] + self.bandwidth * z
    }
}
