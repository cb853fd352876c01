//! Two-sample evaluation metrics over raw feature vectors: exact earth
//! mover distance, Gaussian-kernel maximum mean discrepancy, and the
//! leave-one-out 1-nearest-neighbor two-sample accuracy.

mod assignment;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on exact-assignment size; evaluation sets in this crate use
/// 2000 samples, which fits.
pub const EMD_MAX_SAMPLES: usize = 2048;

/// Metric values for one (real, synthetic) sample pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub emd: f64,
    pub mmd: f64,
    pub onenn_accuracy: f64,
    pub sample_sizes: (usize, usize),
}

impl EvalReport {
    /// Single-line JSON record, the CLI output format.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Exact earth mover distance between two equal-size samples under the
/// Euclidean ground metric: the optimal one-to-one assignment cost
/// divided by n.
pub fn emd(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    check_dims(x, y)?;
    let n = x.nrows();
    if n != y.nrows() {
        return Err(Error::InvalidArgument(format!(
            "earth mover distance needs equal sample counts, got {n} and {}",
            y.nrows()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty samples".into()));
    }
    if n > EMD_MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "{n} samples exceed the exact-assignment cap of {EMD_MAX_SAMPLES}"
        )));
    }
    let mut cost = ndarray::Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            cost[[i, j]] = euclidean(x, i, y, j);
        }
    }
    let (_, total) = assignment::solve(&cost);
    Ok(total / n as f64)
}

/// Biased squared maximum mean discrepancy with a Gaussian kernel,
/// clamped at zero. `bandwidth = None` uses the median pairwise distance
/// of the pooled sample.
pub fn mmd(x: ArrayView2<f64>, y: ArrayView2<f64>, bandwidth: Option<f64>) -> Result<f64> {
    check_dims(x, y)?;
    let (n, m) = (x.nrows(), y.nrows());
    if n < 2 || m < 2 {
        return Err(Error::InvalidArgument(
            "discrepancy needs at least 2 samples per set".into(),
        ));
    }
    let h = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        None => match median_pooled_distance(x, y) {
            Some(h) => h,
            // Every pooled point coincides: the sets are identical
            // multisets of one point, so the discrepancy is zero.
            None => return Ok(0.0),
        },
    };
    let two_h2 = 2.0 * h * h;
    let kernel_mean = |a: ArrayView2<f64>, b: ArrayView2<f64>| -> f64 {
        let mut total = 0.0;
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                let d2: f64 = (0..a.ncols())
                    .map(|k| (a[[i, k]] - b[[j, k]]) * (a[[i, k]] - b[[j, k]]))
                    .sum();
                total += (-d2 / two_h2).exp();
            }
        }
        total / (a.nrows() * b.nrows()) as f64
    };
    let value = kernel_mean(x, x) + kernel_mean(y, y) - 2.0 * kernel_mean(x, y);
    Ok(value.max(0.0))
}

/// Leave-one-out 1-nearest-neighbor classification accuracy on the pooled
/// labeled samples; distance ties keep the lower pooled index. Values near
/// 0.5 indicate indistinguishable samples.
pub fn one_nn_accuracy(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    check_dims(x, y)?;
    let n = x.nrows();
    if n != y.nrows() {
        return Err(Error::InvalidArgument(format!(
            "the two-sample test needs equal sample counts, got {n} and {}",
            y.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 samples per set".into(),
        ));
    }
    let total = 2 * n;
    let point = |i: usize| -> (ArrayView2<f64>, usize) {
        if i < n {
            (x, i)
        } else {
            (y, i - n)
        }
    };
    let mut correct = 0usize;
    for i in 0..total {
        let (a, ia) = point(i);
        let mut best = f64::INFINITY;
        let mut best_idx = usize::MAX;
        for j in 0..total {
            if j == i {
                continue;
            }
            let (b, jb) = point(j);
            let mut d2 = 0.0;
            for k in 0..a.ncols() {
                let diff = a[[ia, k]] - b[[jb, k]];
                d2 += diff * diff;
            }
            if d2 < best {
                best = d2;
                best_idx = j;
            }
        }
        if (best_idx < n) == (i < n) {
            correct += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// All three metrics in one report. EMD and 1NN require equal counts.
pub fn evaluate(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    bandwidth: Option<f64>,
) -> Result<EvalReport> {
    Ok(EvalReport {
        emd: emd(x, y)?,
        mmd: mmd(x, y, bandwidth)?,
        onenn_accuracy: one_nn_accuracy(x, y)?,
        sample_sizes: (x.nrows(), y.nrows()),
    })
}

fn check_dims(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

fn euclidean(x: ArrayView2<f64>, i: usize, y: ArrayView2<f64>, j: usize) -> f64 {
    (0..x.ncols())
        .map(|k| (x[[i, k]] - y[[j, k]]) * (x[[i, k]] - y[[j, k]]))
        .sum::<f64>()
        .sqrt()
}

fn median_pooled_distance(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Option<f64> {
    let total = x.nrows() + y.nrows();
    let row = |i: usize| if i < x.nrows() { (x, i) } else { (y, i - x.nrows()) };
    let mut dists = Vec::with_capacity(total * (total - 1) / 2);
    for i in 0..total {
        for j in (i + 1)..total {
            let (a, ia) = row(i);
            let (b, jb) = row(j);
            dists.push(euclidean(a, ia, b, jb));
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = crate::stats::quantile_sorted(&dists, 0.5);
    if median > 0.0 {
        Some(median)
    } else {
        // Heavy duplication: fall back to the smallest positive distance.
        dists.into_iter().find(|&d| d > 0.0)
    }
}
