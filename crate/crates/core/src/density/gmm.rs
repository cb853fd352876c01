use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LatentMatrix;
use crate::error::{Error, Result};
use crate::linalg::{ridge_cholesky, solve_lower};
use crate::rng::seeded_rng;
use crate::stats::logsumexp;

/// Gaussian mixture with full covariances; weights form a simplex.
#[derive(Debug, Clone)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Array2<f64>,
    covariances: Vec<Array2<f64>>,
    chols: Vec<Array2<f64>>,
}

/// Fits an M-component mixture by expectation maximization.
///
/// Means are seeded k-means++ style from the data, all components start
/// from the shared sample covariance with uniform weights, and iteration
/// stops when the log-likelihood improves by less than `tol` or after
/// `max_iters` rounds. A component whose responsibility mass collapses is
/// re-seeded from the lowest-likelihood point, at most three times in
/// total.
///
/// Returns the model and the per-iteration log-likelihood trace, which is
/// non-decreasing up to floating-point slack.
pub fn fit_gmm_em(
    y: &LatentMatrix,
    components: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(GmmModel, Vec<f64>)> {
    let (n, d) = (y.n(), y.dim());
    if components == 0 {
        return Err(Error::InvalidArgument("component count must be >= 1".into()));
    }
    if components > n {
        return Err(Error::InvalidArgument(format!(
            "component count {components} exceeds the sample count {n}"
        )));
    }
    let m = components;
    let mut rng = seeded_rng(seed);

    // Shared initial covariance: sample covariance of the full data
    // (biased divisor keeps n = 1 components meaningful).
    let mut grand_mean = Array1::<f64>::zeros(d);
    for i in 0..n {
        grand_mean += &y.row(i);
    }
    grand_mean /= n as f64;
    let mut shared_cov = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let c = &y.row(i) - &grand_mean;
        for a in 0..d {
            for b in 0..=a {
                shared_cov[[a, b]] += c[a] * c[b];
            }
        }
    }
    shared_cov /= n as f64;
    for a in 0..d {
        for b in 0..a {
            shared_cov[[b, a]] = shared_cov[[a, b]];
        }
    }

    let mut means = kmeans_pp_means(y, m, &mut rng);
    let mut covs: Vec<Array2<f64>> = (0..m).map(|_| shared_cov.clone()).collect();
    let mut weights = vec![1.0 / m as f64; m];

    let mut log_resp = Array2::<f64>::zeros((n, m));
    let mut history: Vec<f64> = Vec::new();
    let mut reseeds = 0usize;

    for _iter in 0..max_iters {
        let chols: Vec<Array2<f64>> = covs
            .iter()
            .map(ridge_cholesky)
            .collect::<Result<_>>()?;

        // E-step: responsibilities and total log-likelihood.
        let mut loglik = 0.0;
        let mut point_ll = vec![0.0; n];
        for i in 0..n {
            let mut terms = vec![0.0; m];
            for k in 0..m {
                terms[k] = weights[k].ln()
                    + gaussian_log_density(&means.row(k).to_owned(), &chols[k], y.row(i));
            }
            let norm = logsumexp(&terms);
            point_ll[i] = norm;
            loglik += norm;
            for k in 0..m {
                log_resp[[i, k]] = terms[k] - norm;
            }
        }
        history.push(loglik);

        // M-step.
        let mut masses = vec![0.0; m];
        for k in 0..m {
            masses[k] = (0..n).map(|i| log_resp[[i, k]].exp()).sum();
        }
        if let Some(k) = masses.iter().position(|&mass| mass < 1e-12) {
            if reseeds >= 3 {
                return Err(Error::NumericFailure(format!(
                    "component {k} collapsed after 3 re-seeds"
                )));
            }
            reseeds += 1;
            let worst = point_ll
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            means.row_mut(k).assign(&y.row(worst));
            covs[k] = shared_cov.clone();
            weights[k] = 1.0 / n as f64;
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
            // A re-seed restarts the optimization; the returned trace
            // covers the final run so its monotonicity guarantee holds.
            history.clear();
            continue;
        }
        for k in 0..m {
            weights[k] = masses[k] / n as f64;
            let mut mu = Array1::<f64>::zeros(d);
            for i in 0..n {
                mu.scaled_add(log_resp[[i, k]].exp(), &y.row(i));
            }
            mu /= masses[k];
            let mut cov = Array2::<f64>::zeros((d, d));
            for i in 0..n {
                let r = log_resp[[i, k]].exp();
                let c = &y.row(i) - &mu;
                for a in 0..d {
                    for b in 0..=a {
                        cov[[a, b]] += r * c[a] * c[b];
                    }
                }
            }
            cov /= masses[k];
            for a in 0..d {
                for b in 0..a {
                    cov[[b, a]] = cov[[a, b]];
                }
            }
            means.row_mut(k).assign(&mu);
            covs[k] = cov;
        }

        if history.len() >= 2 {
            let improvement = history[history.len() - 1] - history[history.len() - 2];
            if improvement < tol {
                break;
            }
        }
    }

    let model = GmmModel::from_parts(weights, means, covs)?;
    Ok((model, history))
}

fn kmeans_pp_means<R: Rng>(y: &LatentMatrix, m: usize, rng: &mut R) -> Array2<f64> {
    let (n, d) = (y.n(), y.dim());
    let mut means = Array2::<f64>::zeros((m, d));
    let first = rng.random_range(0..n);
    means.row_mut(0).assign(&y.row(first));
    let mut dist2 = vec![f64::INFINITY; n];
    for k in 1..m {
        for (i, slot) in dist2.iter_mut().enumerate() {
            let prev = means.row(k - 1);
            let d2: f64 = y
                .row(i)
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            *slot = slot.min(d2);
        }
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        means.row_mut(k).assign(&y.row(pick));
    }
    means
}

fn gaussian_log_density(
    mean: &Array1<f64>,
    chol: &Array2<f64>,
    x: ndarray::ArrayView1<f64>,
) -> f64 {
    let d = mean.len();
    let centered = Array1::from_iter(x.iter().zip(mean.iter()).map(|(a, b)| a - b));
    let z = solve_lower(chol, centered.view());
    let quad: f64 = z.iter().map(|v| v * v).sum();
    let log_det: f64 = (0..d).map(|i| chol[[i, i]].ln()).sum();
    -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det - 0.5 * quad
}

impl GmmModel {
    pub fn from_parts(
        weights: Vec<f64>,
        means: Array2<f64>,
        covariances: Vec<Array2<f64>>,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.nrows() != m || covariances.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} weights, {} mean rows, {} covariances",
                means.nrows(),
                covariances.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::DataValidation(format!(
                "mixture weights must be a simplex, sum = {total}"
            )));
        }
        let chols = covariances
            .iter()
            .map(ridge_cholesky)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights,
            means,
            covariances,
            chols,
        })
    }

    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn covariances(&self) -> &[Array2<f64>] {
        &self.covariances
    }

    /// Draws rows by picking a component from the weights, then a Gaussian
    /// draw from it.
    pub fn sample(&self, count: usize, seed: u64) -> Result<LatentMatrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.dim();
        let mut rng = seeded_rng(seed);
        let mut out = Array2::<f64>::zeros((count, d));
        for i in 0..count {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (idx, &w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = idx;
                    break;
                }
            }
            let mut z = Array1::<f64>::zeros(d);
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let noise = self.chols[k].dot(&z);
            for j in 0..d {
                out[[i, j]] = self.means[[k, j]] + noise[j];
            }
        }
        LatentMatrix::new(out)
    }

    /// Log mixture density via log-sum-exp over components.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.component_count())
            .map(|k| {
                self.weights[k].max(f64::MIN_POSITIVE).ln()
                    + gaussian_log_density(
                        &self.means.row(k).to_owned(),
                        &self.chols[k],
                        ndarray::ArrayView1::from(x),
                    )
            })
            .collect();
        logsumexp(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::fit_gaussian;

    fn cluster_data(seed: u64, offset: f64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z + offset
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn single_component_matches_gaussian_mle() {
        let rows = cluster_data(3, 0.0, 200, 2);
        let y = LatentMatrix::from_rows(&rows).unwrap();
        let (gmm, history) = fit_gmm_em(&y, 1, 0, 50, 1e-9).unwrap();
        let gauss = fit_gaussian(&y).unwrap();
        for j in 0..2 {
            assert!((gmm.means()[[0, j]] - gauss.mean()[j]).abs() < 1e-9);
        }
        // EM's fixed point is the biased covariance (divisor n).
        let n = y.n() as f64;
        for (a, b) in gmm.covariances()[0].iter().zip(gauss.covariance().iter()) {
            assert!((a - b * (n - 1.0) / n).abs() < 1e-9);
        }
        assert!(history.len() >= 2);

        // The fitted mixture density equals the density of the fixed-point
        // Gaussian everywhere, not just in its parameters.
        let biased = gauss.covariance().mapv(|v| v * (n - 1.0) / n);
        let fixed_point =
            crate::density::GaussianModel::from_parts(gmm.means().row(0).to_owned(), biased)
                .unwrap();
        for point in [[0.0, 0.0], [1.5, -0.5], [-2.0, 2.0]] {
            let a = gmm.log_density(&point);
            let b = fixed_point.log_density(&point);
            assert!((a - b).abs() < 1e-9, "{a} vs {b} at {point:?}");
        }
    }

    #[test]
    fn recovers_well_separated_clusters() {
        let mut rows = cluster_data(5, 0.0, 300, 2);
        rows.extend(cluster_data(6, 20.0, 300, 2));
        let y = LatentMatrix::from_rows(&rows).unwrap();
        let (gmm, _) = fit_gmm_em(&y, 2, 1, 200, 1e-8).unwrap();
        let mut found = [false; 2];
        for k in 0..2 {
            for (t, target) in [0.0, 20.0].iter().enumerate() {
                if (0..2).all(|j| (gmm.means()[[k, j]] - target).abs() < 0.5) {
                    found[t] = true;
                }
            }
        }
        assert!(found[0] && found[1], "means {:?}", gmm.means());
        for &w in gmm.weights() {
            assert!((w - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn log_likelihood_is_non_decreasing() {
        for seed in 0..5 {
            let mut rows = cluster_data(seed, 0.0, 100, 3);
            rows.extend(cluster_data(seed + 50, 4.0, 80, 3));
            let y = LatentMatrix::from_rows(&rows).unwrap();
            let (_, history) = fit_gmm_em(&y, 3, seed, 100, 1e-10).unwrap();
            for w in history.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "seed {seed}: log-likelihood dropped {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn rejects_more_components_than_points() {
        let y = LatentMatrix::from_rows(&cluster_data(1, 0.0, 5, 2)).unwrap();
        assert!(matches!(
            fit_gmm_em(&y, 6, 0, 10, 1e-8),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sampling_respects_degenerate_weights() {
        let means = Array2::from_shape_vec((2, 1), vec![0.0, 100.0]).unwrap();
        let covs = vec![
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
        ];
        let gmm = GmmModel::from_parts(vec![1.0, 0.0], means, covs).unwrap();
        let s = gmm.sample(500, 9).unwrap();
        for v in s.data().iter() {
            assert!(v.abs() < 10.0, "draw {v} came from the zero-weight component");
        }
    }

    #[test]
    fn component_frequencies_match_weights() {
        let means = Array2::from_shape_vec((2, 1), vec![0.0, 1000.0]).unwrap();
        let covs = vec![
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
        ];
        let alpha = 0.3;
        let gmm = GmmModel::from_parts(vec![alpha, 1.0 - alpha], means, covs).unwrap();
        let count = 20_000;
        let s = gmm.sample(count, 21).unwrap();
        let freq = s.data().iter().filter(|v| **v < 500.0).count() as f64 / count as f64;
        let bound = 3.0 * (alpha * (1.0 - alpha) / count as f64).sqrt();
        assert!((freq - alpha).abs() < bound, "freq {freq} vs alpha {alpha}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let y = LatentMatrix::from_rows(&cluster_data(2, 0.0, 50, 2)).unwrap();
        let (gmm, _) = fit_gmm_em(&y, 2, 4, 50, 1e-8).unwrap();
        assert_eq!(gmm.sample(20, 8).unwrap(), gmm.sample(20, 8).unwrap());
    }

    #[test]
    fn mixture_of_identical_components_equals_single_gaussian() {
        let mean = Array2::from_shape_vec((2, 1), vec![0.0, 0.0]).unwrap();
        let covs = vec![
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
        ];
        let gmm = GmmModel::from_parts(vec![0.5, 0.5], mean, covs).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((gmm.log_density(&[0.0]) - expected).abs() < 1e-12);
    }
}
