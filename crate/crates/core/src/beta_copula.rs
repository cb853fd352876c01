//! The empirical beta copula model: a nonparametric copula built from the
//! per-column ranks of the data, with kernel-density margins for moving
//! between the unit cube and the data scale.
//!
//! The copula distribution function replaces each indicator of the
//! empirical copula with the Beta(r, n+1-r) distribution function of the
//! corresponding uniform order statistic. Sampling picks a data row at
//! random, draws each coordinate from that row's rank Beta, and maps the
//! result through the inverse marginal cdfs. Restricting the row draw to a
//! labeled sub-group yields targeted sampling, and pairing one group's
//! ranks with another group's margins recombines dependence and margins.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{compute_ranks, LatentMatrix, RankMatrix};
use crate::error::{Error, Result};
use crate::marginals::{fit_marginal, MarginalModel};
use crate::rng::seeded_rng;
use crate::stats::beta_cdf;

/// Largest double strictly below 1; copula coordinates are clamped into
/// `[MIN_POSITIVE, OPEN_UPPER]` so they stay inside the open unit interval.
const OPEN_UPPER: f64 = 1.0 - f64::EPSILON / 2.0;

/// A fitted empirical beta copula with per-dimension margins and optional
/// row groups for targeted sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EbcModel {
    ranks: RankMatrix,
    margins: Vec<MarginalModel>,
    group_index: Option<BTreeMap<String, Vec<usize>>>,
}

/// Fits ranks, margins, and (when labels are given) the group index.
pub fn fit_ebc(y: &LatentMatrix, labels: Option<&[String]>) -> Result<EbcModel> {
    if y.n() < 2 {
        return Err(Error::InsufficientData(format!(
            "copula fitting needs at least 2 rows, got {}",
            y.n()
        )));
    }
    let ranks = compute_ranks(y);
    let margins = (0..y.dim())
        .map(|j| fit_marginal(&y.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let group_index = match labels {
        None => None,
        Some(l) => {
            if l.len() != y.n() {
                return Err(Error::DataValidation(format!(
                    "{} labels for {} rows",
                    l.len(),
                    y.n()
                )));
            }
            let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, label) in l.iter().enumerate() {
                map.entry(label.clone()).or_default().push(i);
            }
            Some(map)
        }
    };
    EbcModel::from_parts(ranks, margins, group_index)
}

/// Copula distribution function from ranks alone:
/// `(1/n) * sum_i prod_j BetaCDF(u_j; r_ij, n+1-r_ij)`.
pub fn empirical_beta_copula_cdf(ranks: &RankMatrix, u: &[f64]) -> Result<f64> {
    validate_unit_cube(u, ranks.dim())?;
    let n = ranks.n();
    let nf = n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let mut prod = 1.0;
        for (j, &uj) in u.iter().enumerate() {
            let r = ranks.get(i, j) as f64;
            prod *= beta_cdf(uj, r, nf + 1.0 - r);
            if prod == 0.0 {
                break;
            }
        }
        total += prod;
    }
    Ok(total / nf)
}

/// Step-function empirical copula from scaled ranks:
/// `(1/n) * sum_i prod_j 1{r_ij / n <= u_j}`.
pub fn empirical_copula_cdf(ranks: &RankMatrix, u: &[f64]) -> Result<f64> {
    validate_unit_cube(u, ranks.dim())?;
    let n = ranks.n();
    let nf = n as f64;
    let mut count = 0usize;
    for i in 0..n {
        if u
            .iter()
            .enumerate()
            .all(|(j, &uj)| ranks.get(i, j) as f64 / nf <= uj)
        {
            count += 1;
        }
    }
    Ok(count as f64 / nf)
}

/// Largest absolute difference between the empirical copulas of two
/// datasets over a tensor grid with `grid` points per axis.
pub fn empirical_copula_sup_distance(
    a: &LatentMatrix,
    b: &LatentMatrix,
    grid: usize,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} columns",
            a.dim(),
            b.dim()
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    let d = a.dim();
    let ra = compute_ranks(a);
    let rb = compute_ranks(b);
    let mut u = vec![0.0; d];
    let mut index = vec![0usize; d];
    let mut sup: f64 = 0.0;
    loop {
        for j in 0..d {
            u[j] = index[j] as f64 / (grid - 1) as f64;
        }
        let diff = (empirical_copula_cdf(&ra, &u)? - empirical_copula_cdf(&rb, &u)?).abs();
        sup = sup.max(diff);
        // Odometer increment over the d-dimensional grid.
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(sup);
            }
            index[axis] += 1;
            if index[axis] < grid {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
    }
}

fn validate_unit_cube(u: &[f64], d: usize) -> Result<()> {
    if u.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, copula has {d}",
            u.len()
        )));
    }
    if let Some(&bad) = u.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidArgument(format!(
            "coordinate {bad} outside the unit cube"
        )));
    }
    Ok(())
}

/// One Beta(a, b) draw as a ratio of two Gamma draws, clamped inside the
/// open unit interval.
fn beta_draw<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
    let y = Gamma::new(b, 1.0).expect("positive shape").sample(rng);
    let u = x / (x + y);
    u.clamp(f64::MIN_POSITIVE, OPEN_UPPER)
}

impl EbcModel {
    pub fn from_parts(
        ranks: RankMatrix,
        margins: Vec<MarginalModel>,
        group_index: Option<BTreeMap<String, Vec<usize>>>,
    ) -> Result<Self> {
        if margins.len() != ranks.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} margins for {} rank columns",
                margins.len(),
                ranks.dim()
            )));
        }
        for (j, m) in margins.iter().enumerate() {
            if m.centers().len() != ranks.n() {
                return Err(Error::DimensionMismatch(format!(
                    "margin {j} has {} centers, ranks have {} rows",
                    m.centers().len(),
                    ranks.n()
                )));
            }
        }
        if let Some(groups) = &group_index {
            for (label, rows) in groups {
                if rows.is_empty() {
                    return Err(Error::DataValidation(format!("group {label} is empty")));
                }
                if let Some(&bad) = rows.iter().find(|&&r| r >= ranks.n()) {
                    return Err(Error::DataValidation(format!(
                        "group {label} references row {bad}, only {} rows",
                        ranks.n()
                    )));
                }
            }
        }
        Ok(Self {
            ranks,
            margins,
            group_index,
        })
    }

    pub fn n(&self) -> usize {
        self.ranks.n()
    }

    pub fn dim(&self) -> usize {
        self.ranks.dim()
    }

    pub fn ranks(&self) -> &RankMatrix {
        &self.ranks
    }

    pub fn margins(&self) -> &[MarginalModel] {
        &self.margins
    }

    pub fn group_index(&self) -> Option<&BTreeMap<String, Vec<usize>>> {
        self.group_index.as_ref()
    }

    /// Copula distribution function at a point of the unit cube.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        empirical_beta_copula_cdf(&self.ranks, u)
    }

    /// Draws `count` samples; returns both the copula-scale rows (strictly
    /// inside the open unit cube) and the rescaled latent rows.
    pub fn sample(&self, count: usize, seed: u64) -> Result<(Array2<f64>, LatentMatrix)> {
        let all_rows: Vec<usize> = (0..self.n()).collect();
        self.sample_rows(&all_rows, count, seed)
    }

    /// As [`EbcModel::sample`], but the row draw is restricted to a labeled
    /// group.
    pub fn sample_targeted(&self, group: &str, count: usize, seed: u64) -> Result<LatentMatrix> {
        let rows = self.group_rows(group)?;
        Ok(self.sample_rows(&rows, count, seed)?.1)
    }

    /// As [`EbcModel::sample_targeted`] but also returning copula rows.
    pub fn sample_targeted_with_copula(
        &self,
        group: &str,
        count: usize,
        seed: u64,
    ) -> Result<(Array2<f64>, LatentMatrix)> {
        let rows = self.group_rows(group)?;
        self.sample_rows(&rows, count, seed)
    }

    fn group_rows(&self, group: &str) -> Result<Vec<usize>> {
        let groups = self
            .group_index
            .as_ref()
            .ok_or_else(|| Error::DataValidation("model was fitted without labels".into()))?;
        groups
            .get(group)
            .cloned()
            .ok_or_else(|| Error::UnknownGroup(group.to_string()))
    }

    fn sample_rows(
        &self,
        rows: &[usize],
        count: usize,
        seed: u64,
    ) -> Result<(Array2<f64>, LatentMatrix)> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty row pool".into()));
        }
        let d = self.dim();
        let n = self.n() as f64;
        let mut rng = seeded_rng(seed);
        let mut copula = Array2::<f64>::zeros((count, d));
        let mut latent = Array2::<f64>::zeros((count, d));
        for i in 0..count {
            let row = rows[rng.random_range(0..rows.len())];
            for j in 0..d {
                let r = self.ranks.get(row, j) as f64;
                let u = beta_draw(&mut rng, r, n + 1.0 - r);
                copula[[i, j]] = u;
                latent[[i, j]] = self.margins[j].inverse_cdf(u)?;
            }
        }
        Ok((copula, LatentMatrix::new(latent)?))
    }
}

/// Combines the dependence structure of one group with the margins of
/// another: ranks are recomputed inside group A, margins are refitted on
/// group B's rows, and Algorithm-style sampling runs on that pair.
///
/// `dependence_from` and `margins_from` are usually the same model; they
/// only need to agree on the dimension.
pub fn recombine(
    dependence_from: &EbcModel,
    group_a: &str,
    margins_from: &EbcModel,
    group_b: &str,
    count: usize,
    seed: u64,
) -> Result<LatentMatrix> {
    if dependence_from.dim() != margins_from.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dependence model has {} dimensions, margin model {}",
            dependence_from.dim(),
            margins_from.dim()
        )));
    }
    let rows_a = dependence_from.group_rows(group_a)?;
    let rows_b = margins_from.group_rows(group_b)?;
    if rows_a.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "group {group_a} has {} rows, need at least 2",
            rows_a.len()
        )));
    }
    if rows_b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "group {group_b} has {} rows, need at least 2",
            rows_b.len()
        )));
    }

    // The margins store every fitted column in row order, so the original
    // data of each model is recoverable from them.
    let sub_a = rows_of(dependence_from, &rows_a)?;
    let ranks_a = compute_ranks(&sub_a);
    let sub_b = rows_of(margins_from, &rows_b)?;
    let margins_b = (0..sub_b.dim())
        .map(|j| fit_marginal(&sub_b.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let merged = EbcModel::from_parts(ranks_a, margins_b, None)?;
    Ok(merged.sample(count, seed)?.1)
}

fn rows_of(model: &EbcModel, rows: &[usize]) -> Result<LatentMatrix> {
    let d = model.dim();
    let mut out = Array2::<f64>::zeros((rows.len(), d));
    for (k, &i) in rows.iter().enumerate() {
        for j in 0..d {
            out[[k, j]] = model.margins()[j].centers()[i];
        }
    }
    LatentMatrix::new(out)
}
