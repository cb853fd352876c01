use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};

use crate::data::LatentMatrix;
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, ridge_cholesky, solve_lower};
use crate::rng::seeded_rng;

/// Multivariate Gaussian with sample mean and unbiased sample covariance.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    cholesky_factor: Array2<f64>,
}

/// Estimates mean and covariance (divisor n-1) of the latent data.
pub fn fit_gaussian(y: &LatentMatrix) -> Result<GaussianModel> {
    let (n, d) = (y.n(), y.dim());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance estimation needs at least 2 rows, got {n}"
        )));
    }
    let mut mean = Array1::<f64>::zeros(d);
    for i in 0..n {
        mean += &y.row(i);
    }
    mean /= n as f64;
    let mut cov = Array2::<f64>::zeros((d, d));
    for i in 0..n {
        let centered = &y.row(i) - &mean;
        for a in 0..d {
            for b in 0..=a {
                cov[[a, b]] += centered[a] * centered[b];
            }
        }
    }
    cov /= (n - 1) as f64;
    for a in 0..d {
        for b in 0..a {
            cov[[b, a]] = cov[[a, b]];
        }
    }
    GaussianModel::from_parts(mean, cov)
}

impl GaussianModel {
    /// Builds a model from parameters, recomputing the ridge-stabilized
    /// Cholesky factor.
    pub fn from_parts(mean: Array1<f64>, covariance: Array2<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries but covariance is {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if !is_symmetric(&covariance, 1e-12) {
            return Err(Error::DataValidation(
                "covariance is not symmetric within 1e-12".into(),
            ));
        }
        let cholesky_factor = ridge_cholesky(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            cholesky_factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn cholesky_factor(&self) -> &Array2<f64> {
        &self.cholesky_factor
    }

    /// Draws `count` rows `mean + L z` with iid standard normal `z`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<LatentMatrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.dim();
        let mut rng = seeded_rng(seed);
        let mut out = Array2::<f64>::zeros((count, d));
        let mut z = Array1::<f64>::zeros(d);
        for i in 0..count {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let noise = self.cholesky_factor.dot(&z);
            for j in 0..d {
                out[[i, j]] = self.mean[j] + noise[j];
            }
        }
        LatentMatrix::new(out)
    }

    /// Log density at a point, through the stored Cholesky factor.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let centered = Array1::from_iter(x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        let z = solve_lower(&self.cholesky_factor, centered.view());
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let log_det: f64 = (0..d).map(|i| self.cholesky_factor[[i, i]].ln()).sum();
        -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det - 0.5 * quad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LatentMatrix;
    use crate::rng::seeded_rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_point_formula() {
        let y = LatentMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let m = fit_gaussian(&y).unwrap();
        assert_eq!(m.mean().to_vec(), vec![1.0, 1.0]);
        for v in m.covariance().iter() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_rejected() {
        let y = LatentMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit_gaussian(&y),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn recovers_identity_covariance() {
        // Standard normal draws: the fitted covariance should be close to I.
        let d = 3;
        let n = 10_000;
        let mut rng = seeded_rng(11);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            rows.push((0..d).map(|_| StandardNormal.sample(&mut rng)).collect());
        }
        let y = LatentMatrix::from_rows(&rows).unwrap();
        let m = fit_gaussian(&y).unwrap();
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (m.covariance()[[a, b]] - target).abs() < 0.1,
                    "cov[{a},{b}] = {}",
                    m.covariance()[[a, b]]
                );
            }
        }
    }

    #[test]
    fn near_degenerate_spread_stays_at_mean() {
        // Collinear data: ridge keeps sampling alive, draws hug the mean
        // along the collapsed direction.
        let y = LatentMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0 + 1e-9, 1.0 + 1e-9],
            vec![1.0 - 1e-9, 1.0 - 1e-9],
        ])
        .unwrap();
        let m = fit_gaussian(&y).unwrap();
        let s = m.sample(50, 3).unwrap();
        for v in s.data().iter() {
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn sample_mean_obeys_clt_bound() {
        let y = LatentMatrix::from_rows(&[
            vec![0.0, 10.0],
            vec![2.0, 12.0],
            vec![-2.0, 8.0],
            vec![1.0, 11.0],
            vec![-1.0, 9.0],
        ])
        .unwrap();
        let m = fit_gaussian(&y).unwrap();
        let count = 100_000;
        let s = m.sample(count, 17).unwrap();
        for j in 0..2 {
            let mean_j: f64 = s.data().column(j).sum() / count as f64;
            let sigma = m.covariance()[[j, j]].sqrt();
            let bound = 3.0 * sigma / (count as f64).sqrt();
            assert!(
                (mean_j - m.mean()[j]).abs() < bound,
                "dim {j}: {mean_j} vs {} (bound {bound})",
                m.mean()[j]
            );
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let y = LatentMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 1.0]])
            .unwrap();
        let m = fit_gaussian(&y).unwrap();
        assert_eq!(m.sample(10, 5).unwrap(), m.sample(10, 5).unwrap());
        assert_ne!(m.sample(10, 5).unwrap(), m.sample(10, 6).unwrap());
    }

    #[test]
    fn log_density_standard_normal_peak() {
        let m = GaussianModel::from_parts(
            Array1::zeros(1),
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
        )
        .unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_density(&[0.0]) - expected).abs() < 1e-12);
        assert!((expected + 0.9189).abs() < 1e-4);
    }
}
