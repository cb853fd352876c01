use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LatentMatrix;
use crate::error::{Error, Result};
use crate::marginals::silverman_bandwidth;
use crate::rng::seeded_rng;
use crate::stats::{logsumexp, SQRT_2PI};

/// Multivariate Gaussian-kernel density with a diagonal bandwidth matrix:
/// one kernel per data row, one bandwidth per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MkdeModel {
    centers: Array2<f64>,
    bandwidths: Vec<f64>,
}

/// Fits the kernel density, choosing a single scale factor for the
/// per-dimension rule-of-thumb bandwidths by grid search with k-fold
/// cross-validation on held-out log-likelihood. Ties prefer the smaller
/// factor.
pub fn fit_mkde_cv(
    y: &LatentMatrix,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<MkdeModel> {
    let (n, d) = (y.n(), y.dim());
    if grid.is_empty() {
        return Err(Error::InvalidArgument("bandwidth grid is empty".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&f| !(f.is_finite() && f > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "grid factors must be positive, got {bad}"
        )));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if folds > n {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds exceed the sample count {n}"
        )));
    }

    let base: Vec<f64> = (0..d)
        .map(|j| silverman_bandwidth(&y.column(j)))
        .collect::<Result<_>>()?;

    let mut factors: Vec<f64> = grid.to_vec();
    factors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    factors.dedup();

    let best = if factors.len() == 1 {
        factors[0]
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut seeded_rng(seed));

        let mut best_factor = factors[0];
        let mut best_score = f64::NEG_INFINITY;
        for &factor in &factors {
            let bands: Vec<f64> = base.iter().map(|b| b * factor).collect();
            let mut score = 0.0;
            for fold in 0..folds {
                let mut test = Vec::new();
                let mut train = Vec::new();
                for (pos, &i) in perm.iter().enumerate() {
                    if pos % folds == fold {
                        test.push(i);
                    } else {
                        train.push(i);
                    }
                }
                let train_rows = y.select_rows(&train)?;
                let mut fold_ll = 0.0;
                for &i in &test {
                    fold_ll += kde_log_density(train_rows.data().view(), &bands, y.row(i));
                }
                score += fold_ll / test.len() as f64;
            }
            score /= folds as f64;
            if score > best_score {
                best_score = score;
                best_factor = factor;
            }
        }
        best_factor
    };

    MkdeModel::from_parts(
        y.data().clone(),
        base.iter().map(|b| b * best).collect(),
    )
}

/// Log density of a diagonal-bandwidth Gaussian-kernel mixture.
pub fn kde_log_density(centers: ArrayView2<f64>, bandwidths: &[f64], x: ArrayView1<f64>) -> f64 {
    let n = centers.nrows();
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let mut quad = 0.0;
        for (j, &h) in bandwidths.iter().enumerate() {
            let z = (x[j] - centers[[i, j]]) / h;
            quad += z * z;
        }
        terms.push(-0.5 * quad);
    }
    let log_norm: f64 = bandwidths.iter().map(|h| (h * SQRT_2PI).ln()).sum();
    logsumexp(&terms) - (n as f64).ln() - log_norm
}

impl MkdeModel {
    pub fn from_parts(centers: Array2<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        if centers.nrows() == 0 || centers.ncols() == 0 {
            return Err(Error::DataValidation("empty center matrix".into()));
        }
        if bandwidths.len() != centers.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} bandwidths for {} columns",
                bandwidths.len(),
                centers.ncols()
            )));
        }
        if let Some(&bad) = bandwidths.iter().find(|&&h| !(h.is_finite() && h > 0.0)) {
            return Err(Error::DataValidation(format!(
                "bandwidths must be positive, got {bad}"
            )));
        }
        Ok(Self {
            centers,
            bandwidths,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// Draws rows by choosing a center uniformly and adding per-dimension
    /// Gaussian noise at the model bandwidths.
    pub fn sample(&self, count: usize, seed: u64) -> Result<LatentMatrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.dim();
        let n = self.centers.nrows();
        let mut rng = seeded_rng(seed);
        let mut out = Array2::<f64>::zeros((count, d));
        for i in 0..count {
            let c = rng.random_range(0..n);
            for j in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                out[[i, j]] = self.centers[[c, j]] + self.bandwidths[j] * z;
            }
        }
        LatentMatrix::new(out)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        kde_log_density(
            self.centers.view(),
            &self.bandwidths,
            ArrayView1::from(x),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_rows(seed: u64, n: usize, d: usize) -> LatentMatrix {
        let mut rng = seeded_rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        LatentMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn singleton_grid_keeps_base_bandwidths() {
        let y = normal_rows(1, 200, 2);
        let m = fit_mkde_cv(&y, &[1.0], 10, 0).unwrap();
        for j in 0..2 {
            let base = silverman_bandwidth(&y.column(j)).unwrap();
            assert!((m.bandwidths()[j] - base).abs() < 1e-12);
        }
    }

    #[test]
    fn cv_never_picks_oversmoothed_factor() {
        let y = normal_rows(7, 500, 1);
        let m = fit_mkde_cv(&y, &[0.25, 1.0, 4.0], 10, 3).unwrap();
        let base = silverman_bandwidth(&y.column(0)).unwrap();
        let factor = m.bandwidths()[0] / base;
        assert!(
            (factor - 0.25).abs() < 1e-9 || (factor - 1.0).abs() < 1e-9,
            "selected factor {factor}"
        );
    }

    #[test]
    fn folds_bounds_checked() {
        let y = normal_rows(2, 5, 1);
        assert!(matches!(
            fit_mkde_cv(&y, &[1.0], 6, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fit_mkde_cv(&y, &[1.0], 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            fit_mkde_cv(&y, &[], 2, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn near_zero_bandwidth_reproduces_rows() {
        let y = LatentMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])
            .unwrap();
        let m = MkdeModel::from_parts(y.data().clone(), vec![1e-12, 1e-12]).unwrap();
        let s = m.sample(100, 5).unwrap();
        for i in 0..s.n() {
            let matched = (0..y.n()).any(|r| {
                (0..2).all(|j| (s.data()[[i, j]] - y.data()[[r, j]]).abs() < 1e-6)
            });
            assert!(matched, "row {i} not close to any center");
        }
    }

    #[test]
    fn sample_mean_matches_data_mean() {
        let y = normal_rows(12, 50, 2);
        let m = fit_mkde_cv(&y, &[1.0], 5, 0).unwrap();
        let count = 100_000;
        let s = m.sample(count, 99).unwrap();
        for j in 0..2 {
            let data_mean: f64 = y.data().column(j).sum() / y.n() as f64;
            let sample_mean: f64 = s.data().column(j).sum() / count as f64;
            // Mixture mean equals the data mean; spread per draw is bounded
            // by data std plus bandwidth.
            let spread = crate::stats::sample_std(&y.column(j)) + m.bandwidths()[j];
            let bound = 3.0 * spread / (count as f64).sqrt();
            assert!(
                (sample_mean - data_mean).abs() < bound,
                "dim {j}: {sample_mean} vs {data_mean}"
            );
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let y = normal_rows(3, 40, 2);
        let m = fit_mkde_cv(&y, &[1.0], 5, 0).unwrap();
        assert_eq!(m.sample(25, 7).unwrap(), m.sample(25, 7).unwrap());
    }

    #[test]
    fn single_kernel_log_density() {
        let m = MkdeModel::from_parts(
            Array2::from_shape_vec((1, 1), vec![0.0]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((m.log_density(&[0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one_1d() {
        let y = normal_rows(8, 30, 1);
        let m = fit_mkde_cv(&y, &[1.0], 5, 0).unwrap();
        let h = m.bandwidths()[0];
        let col = y.column(0);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0 * h;
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 10.0 * h;
        let steps = 4000;
        let dx = (hi - lo) / steps as f64;
        let mut total = m.log_density(&[lo]).exp() + m.log_density(&[hi]).exp();
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            total += w * m.log_density(&[lo + k as f64 * dx]).exp();
        }
        total *= dx / 3.0;
        assert!((total - 1.0).abs() < 1e-4, "integral = {total}");
    }

    #[test]
    fn density_integrates_to_one_2d() {
        let y = normal_rows(9, 20, 2);
        let m = fit_mkde_cv(&y, &[1.0], 5, 0).unwrap();
        let mut bounds = Vec::new();
        for j in 0..2 {
            let col = y.column(j);
            let h = m.bandwidths()[j];
            bounds.push((
                col.iter().cloned().fold(f64::INFINITY, f64::min) - 8.0 * h,
                col.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 8.0 * h,
            ));
        }
        let steps = 220;
        let dx = (bounds[0].1 - bounds[0].0) / steps as f64;
        let dy = (bounds[1].1 - bounds[1].0) / steps as f64;
        let mut total = 0.0;
        for a in 0..steps {
            let x = bounds[0].0 + (a as f64 + 0.5) * dx;
            for b in 0..steps {
                let yv = bounds[1].0 + (b as f64 + 0.5) * dy;
                total += m.log_density(&[x, yv]).exp();
            }
        }
        total *= dx * dy;
        assert!((total - 1.0).abs() < 1e-4, "integral = {total}");
    }
}
