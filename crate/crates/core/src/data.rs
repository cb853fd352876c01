//! Core data model: latent matrices, rank matrices, labeled datasets,
//! rank computation and dataset splitting.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// An n x d matrix of encoded samples. Every entry is finite and n, d >= 1;
/// instances are immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    data: Array2<f64>,
}

impl LatentMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, d) = data.dim();
        if n == 0 || d == 0 {
            return Err(Error::DataValidation(format!(
                "matrix must have at least one row and one column, got {n}x{d}"
            )));
        }
        for ((i, j), v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::DataValidation(format!(
                    "non-finite entry {v} at row {i}, column {j}"
                )));
            }
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DataValidation("zero rows".into()));
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::DataValidation(format!(
                    "row {i} has {} entries, expected {d}",
                    r.len()
                )));
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .expect("shape checked above");
        Self::new(data)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).to_vec()
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty row selection".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        let mut out = Array2::zeros((indices.len(), self.dim()));
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).assign(&self.data.row(i));
        }
        Self::new(out)
    }
}

/// Per-column ranks of a latent matrix; entries lie in [1, n] and tied
/// values share the maximal rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    ranks: Array2<u64>,
}

impl RankMatrix {
    pub fn n(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn dim(&self) -> usize {
        self.ranks.ncols()
    }

    pub fn ranks(&self) -> &Array2<u64> {
        &self.ranks
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.ranks[[i, j]]
    }

    pub(crate) fn from_raw(ranks: Array2<u64>) -> Result<Self> {
        let n = ranks.nrows() as u64;
        if ranks.nrows() == 0 || ranks.ncols() == 0 {
            return Err(Error::DataValidation("empty rank matrix".into()));
        }
        if let Some(&bad) = ranks.iter().find(|&&r| r < 1 || r > n) {
            return Err(Error::DataValidation(format!(
                "rank {bad} outside [1, {n}]"
            )));
        }
        Ok(Self { ranks })
    }
}

/// A latent matrix with one categorical group label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLatentMatrix {
    matrix: LatentMatrix,
    labels: Vec<String>,
}

impl LabeledLatentMatrix {
    pub fn new(matrix: LatentMatrix, labels: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.n() {
            return Err(Error::DataValidation(format!(
                "{} labels for {} rows",
                labels.len(),
                matrix.n()
            )));
        }
        Ok(Self { matrix, labels })
    }

    pub fn matrix(&self) -> &LatentMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Row indices of each group, keyed by label.
    pub fn group_indices(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, l) in self.labels.iter().enumerate() {
            map.entry(l.clone()).or_default().push(i);
        }
        map
    }
}

/// Column-wise ranks: `ranks[i][j]` counts entries of column j that are <=
/// `y[i][j]`, so ties receive the maximal rank and a tie-free column ranks
/// to a permutation of 1..=n.
///
/// Non-finite input is rejected at [`LatentMatrix`] construction, so this
/// function cannot fail.
pub fn compute_ranks(y: &LatentMatrix) -> RankMatrix {
    let (n, d) = (y.n(), y.dim());
    let mut ranks = Array2::<u64>::zeros((n, d));
    let mut idx: Vec<usize> = Vec::with_capacity(n);
    for j in 0..d {
        let col = y.data().column(j);
        idx.clear();
        idx.extend(0..n);
        idx.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).expect("finite by invariant"));
        let mut i = 0;
        while i < n {
            let mut hi = i;
            while hi + 1 < n && col[idx[hi + 1]] == col[idx[i]] {
                hi += 1;
            }
            // Everything in the tied run [i, hi] counts all of it as <=.
            let rank = (hi + 1) as u64;
            for k in i..=hi {
                ranks[[idx[k], j]] = rank;
            }
            i = hi + 1;
        }
    }
    RankMatrix { ranks }
}

/// Splits rows into a training part and a held-out part of `holdout_count`
/// rows, chosen uniformly by the seeded generator. Row order within each
/// part follows the original matrix.
pub fn split_holdout(
    y: &LatentMatrix,
    holdout_count: usize,
    seed: u64,
) -> Result<(LatentMatrix, LatentMatrix)> {
    let (train_idx, holdout_idx) = split_holdout_indices(y.n(), holdout_count, seed)?;
    Ok((y.select_rows(&train_idx)?, y.select_rows(&holdout_idx)?))
}

/// Index-level form of [`split_holdout`], for callers that must split
/// several aligned sequences (rows plus labels) identically.
pub fn split_holdout_indices(
    n: usize,
    holdout_count: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if holdout_count == 0 {
        return Err(Error::InvalidArgument(
            "holdout count must be positive".into(),
        ));
    }
    if holdout_count >= n {
        return Err(Error::InvalidArgument(format!(
            "holdout count {holdout_count} must be smaller than the sample count {n}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut holdout_idx: Vec<usize> = perm[..holdout_count].to_vec();
    let mut train_idx: Vec<usize> = perm[holdout_count..].to_vec();
    holdout_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((train_idx, holdout_idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(rows: &[Vec<f64>]) -> LatentMatrix {
        LatentMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let err = LatentMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::DataValidation(_)));
        let err = LatentMatrix::new(array![[1.0], [f64::INFINITY]]).unwrap_err();
        assert!(matches!(err, Error::DataValidation(_)));
    }

    #[test]
    fn ranks_strict_ordering() {
        let y = matrix(&[vec![0.3], vec![0.1], vec![0.2]]);
        let r = compute_ranks(&y);
        assert_eq!(r.ranks().column(0).to_vec(), vec![3, 1, 2]);
    }

    #[test]
    fn ranks_ties_take_maximal_rank() {
        let y = matrix(&[vec![1.0], vec![1.0], vec![2.0]]);
        let r = compute_ranks(&y);
        assert_eq!(r.ranks().column(0).to_vec(), vec![2, 2, 3]);
    }

    #[test]
    fn ranks_single_element() {
        let y = matrix(&[vec![5.0]]);
        let r = compute_ranks(&y);
        assert_eq!(r.get(0, 0), 1);
    }

    #[test]
    fn tie_free_column_is_permutation() {
        let y = matrix(&[vec![0.9], vec![-2.0], vec![0.4], vec![7.0]]);
        let r = compute_ranks(&y);
        let mut seen: Vec<u64> = r.ranks().column(0).to_vec();
        seen.sort_unstable();
        assert_eq!(seen, vec![1, 2, 3, 4]);
    }

    #[test]
    fn ranks_invariant_under_monotone_transform() {
        let y = matrix(&[vec![0.3, -1.0], vec![0.1, 2.5], vec![0.2, 0.0]]);
        let transformed = matrix(&[
            vec![(0.3f64).exp(), -1.0 / 3.0],
            vec![(0.1f64).exp(), 2.5 / 3.0],
            vec![(0.2f64).exp(), 0.0],
        ]);
        assert_eq!(compute_ranks(&y), compute_ranks(&transformed));
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = matrix(&rows);
        let (train, hold) = split_holdout(&y, 2, 7).unwrap();
        assert_eq!(train.n(), 8);
        assert_eq!(hold.n(), 2);
        let mut all: Vec<f64> = train
            .data()
            .column(0)
            .iter()
            .chain(hold.data().column(0).iter())
            .copied()
            .collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, -(i as f64)]).collect();
        let y = matrix(&rows);
        let (t1, h1) = split_holdout(&y, 5, 99).unwrap();
        let (t2, h2) = split_holdout(&y, 5, 99).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(h1, h2);
        let (_, h3) = split_holdout(&y, 5, 100).unwrap();
        assert_ne!(h1, h3);
    }

    #[test]
    fn split_rejects_full_holdout() {
        let rows: Vec<Vec<f64>> = (0..2000).map(|i| vec![i as f64]).collect();
        let y = matrix(&rows);
        assert!(matches!(
            split_holdout(&y, 2000, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn labels_length_checked() {
        let y = matrix(&[vec![1.0], vec![2.0]]);
        assert!(LabeledLatentMatrix::new(y.clone(), vec!["a".into()]).is_err());
        let lab = LabeledLatentMatrix::new(y, vec!["a".into(), "b".into()]).unwrap();
        let groups = lab.group_indices();
        assert_eq!(groups["a"], vec![0]);
        assert_eq!(groups["b"], vec![1]);
    }
}
