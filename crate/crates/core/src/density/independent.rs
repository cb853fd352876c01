use ndarray::Array2;

use crate::data::LatentMatrix;
use crate::error::{Error, Result};
use crate::marginals::{fit_marginal, MarginalModel};
use crate::rng::seeded_rng;

/// Per-dimension kernel densities with the dependence structure dropped:
/// every dimension is sampled from its own margin, independently.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentModel {
    margins: Vec<MarginalModel>,
}

/// Fits one univariate kernel density per column.
pub fn fit_independent(y: &LatentMatrix) -> Result<IndependentModel> {
    let margins = (0..y.dim())
        .map(|j| fit_marginal(&y.column(j)))
        .collect::<Result<Vec<_>>>()?;
    IndependentModel::from_margins(margins)
}

impl IndependentModel {
    pub fn from_margins(margins: Vec<MarginalModel>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::DataValidation("no margins".into()));
        }
        Ok(Self { margins })
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }

    pub fn margins(&self) -> &[MarginalModel] {
        &self.margins
    }

    /// Draws each dimension independently from its margin.
    pub fn sample(&self, count: usize, seed: u64) -> Result<LatentMatrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.dim();
        let mut rng = seeded_rng(seed);
        let mut out = Array2::<f64>::zeros((count, d));
        for i in 0..count {
            for (j, margin) in self.margins.iter().enumerate() {
                out[[i, j]] = margin.sample(&mut rng);
            }
        }
        LatentMatrix::new(out)
    }
}
