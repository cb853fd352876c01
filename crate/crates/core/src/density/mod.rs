//! The non-copula latent-space models: multivariate Gaussian, Gaussian
//! mixture fitted by EM, multivariate kernel density with cross-validated
//! bandwidth, and the independent-margins model.

mod gaussian;
mod gmm;
mod independent;
mod mkde;

pub use gaussian::{fit_gaussian, GaussianModel};
pub use gmm::{fit_gmm_em, GmmModel};
pub use independent::{fit_independent, IndependentModel};
pub use mkde::{fit_mkde_cv, kde_log_density, MkdeModel};
