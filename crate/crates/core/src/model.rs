//! The fitted-sampler union over all six latent-space models, plus the
//! tagged binary persistence used by the command line: magic `LGMM`, a
//! format version, a kind tag, then the model parameters. Autoencoder
//! checkpoints share the container with their own tag.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::autoencoder::{Activation, Layer, MlpAutoencoder};
use crate::beta_copula::EbcModel;
use crate::blob::{BlobReader, BlobWriter};
use crate::data::{LatentMatrix, RankMatrix};
use crate::density::{GaussianModel, GmmModel, IndependentModel, MkdeModel};
use crate::error::{Error, Result};
use crate::marginals::MarginalModel;
use crate::vine::{VineEdge, VineModel};

const MODEL_MAGIC: &[u8; 4] = b"LGMM";
const FORMAT_VERSION: u16 = 1;
const AE_TAG: u8 = 7;

/// The six latent-space model kinds, named as on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gauss,
    Indep,
    Mkde,
    Gmm,
    Vine,
    Ebc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Gauss,
        ModelKind::Indep,
        ModelKind::Mkde,
        ModelKind::Gmm,
        ModelKind::Vine,
        ModelKind::Ebc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gauss => "gauss",
            ModelKind::Indep => "indep",
            ModelKind::Mkde => "mkde",
            ModelKind::Gmm => "gmm",
            ModelKind::Vine => "vine",
            ModelKind::Ebc => "ebc",
        }
    }

    fn tag(self) -> u8 {
        match self {
            ModelKind::Gauss => 1,
            ModelKind::Indep => 2,
            ModelKind::Mkde => 3,
            ModelKind::Gmm => 4,
            ModelKind::Vine => 5,
            ModelKind::Ebc => 6,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => ModelKind::Gauss,
            2 => ModelKind::Indep,
            3 => ModelKind::Mkde,
            4 => ModelKind::Gmm,
            5 => ModelKind::Vine,
            6 => ModelKind::Ebc,
            other => {
                return Err(Error::DataValidation(format!(
                    "unknown model tag {other}"
                )))
            }
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss" => Ok(ModelKind::Gauss),
            "indep" => Ok(ModelKind::Indep),
            "mkde" => Ok(ModelKind::Mkde),
            "gmm" => Ok(ModelKind::Gmm),
            "vine" => Ok(ModelKind::Vine),
            "ebc" => Ok(ModelKind::Ebc),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind '{other}', expected one of gauss|indep|mkde|gmm|vine|ebc"
            ))),
        }
    }
}

/// A fitted latent-space sampler.
#[derive(Debug, Clone)]
pub enum LatentModel {
    Gauss(GaussianModel),
    Indep(IndependentModel),
    Mkde(MkdeModel),
    Gmm(GmmModel),
    Vine(VineModel),
    Ebc(EbcModel),
}

impl LatentModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            LatentModel::Gauss(_) => ModelKind::Gauss,
            LatentModel::Indep(_) => ModelKind::Indep,
            LatentModel::Mkde(_) => ModelKind::Mkde,
            LatentModel::Gmm(_) => ModelKind::Gmm,
            LatentModel::Vine(_) => ModelKind::Vine,
            LatentModel::Ebc(_) => ModelKind::Ebc,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LatentModel::Gauss(m) => m.dim(),
            LatentModel::Indep(m) => m.dim(),
            LatentModel::Mkde(m) => m.dim(),
            LatentModel::Gmm(m) => m.dim(),
            LatentModel::Vine(m) => m.dim(),
            LatentModel::Ebc(m) => m.dim(),
        }
    }

    /// Draws `count` latent rows, reproducibly for a given seed.
    pub fn sample(&self, count: usize, seed: u64) -> Result<LatentMatrix> {
        match self {
            LatentModel::Gauss(m) => m.sample(count, seed),
            LatentModel::Indep(m) => m.sample(count, seed),
            LatentModel::Mkde(m) => m.sample(count, seed),
            LatentModel::Gmm(m) => m.sample(count, seed),
            LatentModel::Vine(m) => m.sample(count, seed),
            LatentModel::Ebc(m) => Ok(m.sample(count, seed)?.1),
        }
    }

    /// Log density where the model defines one (the Gaussian, mixture, and
    /// kernel-density models).
    pub fn log_density(&self, x: &[f64]) -> Option<f64> {
        match self {
            LatentModel::Gauss(m) => Some(m.log_density(x)),
            LatentModel::Gmm(m) => Some(m.log_density(x)),
            LatentModel::Mkde(m) => Some(m.log_density(x)),
            _ => None,
        }
    }

    pub fn as_ebc(&self) -> Option<&EbcModel> {
        match self {
            LatentModel::Ebc(m) => Some(m),
            _ => None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BlobWriter::new(BufWriter::new(File::create(path)?));
        w.bytes(MODEL_MAGIC)?;
        w.u16(FORMAT_VERSION)?;
        w.u8(self.kind().tag())?;
        match self {
            LatentModel::Gauss(m) => {
                w.f64_slice(m.mean().as_slice().unwrap())?;
                write_matrix(&mut w, m.covariance())?;
            }
            LatentModel::Indep(m) => {
                w.usize(m.margins().len())?;
                for margin in m.margins() {
                    write_margin(&mut w, margin)?;
                }
            }
            LatentModel::Mkde(m) => {
                write_matrix(&mut w, m.centers())?;
                w.f64_slice(m.bandwidths())?;
            }
            LatentModel::Gmm(m) => {
                w.usize(m.component_count())?;
                w.f64_slice(m.weights())?;
                write_matrix(&mut w, m.means())?;
                for cov in m.covariances() {
                    write_matrix(&mut w, cov)?;
                }
            }
            LatentModel::Vine(m) => {
                w.usize(m.dim())?;
                w.usize(m.truncation_level())?;
                for margin in m.margins() {
                    write_margin(&mut w, margin)?;
                }
                w.usize(m.trees().len())?;
                for tree in m.trees() {
                    w.usize(tree.len())?;
                    for e in tree {
                        w.usize(e.conditioned.0)?;
                        w.usize(e.conditioned.1)?;
                        w.usize(e.conditioning.len())?;
                        for &v in &e.conditioning {
                            w.usize(v)?;
                        }
                        w.f64(e.rho)?;
                    }
                }
            }
            LatentModel::Ebc(m) => {
                write_rank_matrix(&mut w, m.ranks())?;
                w.usize(m.margins().len())?;
                for margin in m.margins() {
                    write_margin(&mut w, margin)?;
                }
                match m.group_index() {
                    None => w.u8(0)?,
                    Some(groups) => {
                        w.u8(1)?;
                        w.usize(groups.len())?;
                        for (label, rows) in groups {
                            w.string(label)?;
                            w.usize(rows.len())?;
                            for &r in rows {
                                w.usize(r)?;
                            }
                        }
                    }
                }
            }
        }
        w.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = open_blob(path)?;
        let kind = ModelKind::from_tag(r.u8()?)?;
        let model = match kind {
            ModelKind::Gauss => {
                let mean = Array1::from_vec(r.f64_vec()?);
                let cov = read_matrix(&mut r)?;
                LatentModel::Gauss(GaussianModel::from_parts(mean, cov)?)
            }
            ModelKind::Indep => {
                let d = r.usize_checked(1 << 20)?;
                let margins = (0..d)
                    .map(|_| read_margin(&mut r))
                    .collect::<Result<Vec<_>>>()?;
                LatentModel::Indep(IndependentModel::from_margins(margins)?)
            }
            ModelKind::Mkde => {
                let centers = read_matrix(&mut r)?;
                let bandwidths = r.f64_vec()?;
                LatentModel::Mkde(MkdeModel::from_parts(centers, bandwidths)?)
            }
            ModelKind::Gmm => {
                let m = r.usize_checked(1 << 20)?;
                let weights = r.f64_vec()?;
                let means = read_matrix(&mut r)?;
                let covs = (0..m)
                    .map(|_| read_matrix(&mut r))
                    .collect::<Result<Vec<_>>>()?;
                LatentModel::Gmm(GmmModel::from_parts(weights, means, covs)?)
            }
            ModelKind::Vine => {
                let d = r.usize_checked(1 << 20)?;
                let truncation = r.usize_checked(1 << 20)?;
                let margins = (0..d)
                    .map(|_| read_margin(&mut r))
                    .collect::<Result<Vec<_>>>()?;
                let tree_count = r.usize_checked(1 << 20)?;
                let mut trees = Vec::with_capacity(tree_count);
                for _ in 0..tree_count {
                    let edges = r.usize_checked(1 << 20)?;
                    let mut tree = Vec::with_capacity(edges);
                    for _ in 0..edges {
                        let a = r.usize_checked(1 << 20)?;
                        let b = r.usize_checked(1 << 20)?;
                        let clen = r.usize_checked(1 << 20)?;
                        let conditioning = (0..clen)
                            .map(|_| r.usize_checked(1 << 20))
                            .collect::<Result<Vec<_>>>()?;
                        let rho = r.f64()?;
                        tree.push(VineEdge {
                            conditioned: (a, b),
                            conditioning,
                            rho,
                        });
                    }
                    trees.push(tree);
                }
                LatentModel::Vine(VineModel::from_parts(trees, truncation, margins)?)
            }
            ModelKind::Ebc => {
                let ranks = read_rank_matrix(&mut r)?;
                let d = r.usize_checked(1 << 20)?;
                let margins = (0..d)
                    .map(|_| read_margin(&mut r))
                    .collect::<Result<Vec<_>>>()?;
                let groups = match r.u8()? {
                    0 => None,
                    1 => {
                        let count = r.usize_checked(1 << 20)?;
                        let mut map = BTreeMap::new();
                        for _ in 0..count {
                            let label = r.string()?;
                            let rows = r.usize_checked(1 << 32)?;
                            let idx = (0..rows)
                                .map(|_| r.usize_checked(1 << 32))
                                .collect::<Result<Vec<_>>>()?;
                            map.insert(label, idx);
                        }
                        Some(map)
                    }
                    other => {
                        return Err(Error::DataValidation(format!(
                            "bad group flag {other}"
                        )))
                    }
                };
                LatentModel::Ebc(EbcModel::from_parts(ranks, margins, groups)?)
            }
        };
        Ok(model)
    }
}

/// Writes an autoencoder checkpoint in the shared tagged container.
pub fn save_autoencoder(path: &Path, model: &MlpAutoencoder) -> Result<()> {
    let mut w = BlobWriter::new(BufWriter::new(File::create(path)?));
    w.bytes(MODEL_MAGIC)?;
    w.u16(FORMAT_VERSION)?;
    w.u8(AE_TAG)?;
    w.usize(model.input_dim())?;
    w.usize(model.latent_dim())?;
    for stack in [model.encoder(), model.decoder()] {
        w.usize(stack.len())?;
        for layer in stack {
            write_matrix(&mut w, &layer.weights)?;
            w.f64_slice(layer.biases.as_slice().unwrap())?;
            w.u8(layer.activation.tag())?;
        }
    }
    w.finish()
}

pub fn load_autoencoder(path: &Path) -> Result<MlpAutoencoder> {
    let mut r = open_blob(path)?;
    let tag = r.u8()?;
    if tag != AE_TAG {
        return Err(Error::DataValidation(format!(
            "expected an autoencoder checkpoint, found model tag {tag}"
        )));
    }
    let _input_dim = r.usize_checked(1 << 24)?;
    let _latent_dim = r.usize_checked(1 << 24)?;
    let mut stacks = Vec::with_capacity(2);
    for _ in 0..2 {
        let layers = r.usize_checked(64)?;
        let mut stack = Vec::with_capacity(layers);
        for _ in 0..layers {
            let weights = read_matrix(&mut r)?;
            let biases = Array1::from_vec(r.f64_vec()?);
            let activation = Activation::from_tag(r.u8()?)?;
            stack.push(Layer {
                weights,
                biases,
                activation,
            });
        }
        stacks.push(stack);
    }
    let decoder = stacks.pop().unwrap();
    let encoder = stacks.pop().unwrap();
    MlpAutoencoder::from_layers(encoder, decoder)
}

fn open_blob(path: &Path) -> Result<BlobReader<BufReader<File>>> {
    let mut r = BlobReader::new(BufReader::new(File::open(path)?));
    let magic = r.bytes(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::DataValidation(
            "not a model file (bad magic)".into(),
        ));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::DataValidation(format!(
            "unsupported model format version {version}"
        )));
    }
    Ok(r)
}

fn write_matrix<W: std::io::Write>(w: &mut BlobWriter<W>, m: &Array2<f64>) -> Result<()> {
    w.usize(m.nrows())?;
    w.usize(m.ncols())?;
    for &v in m.iter() {
        w.f64(v)?;
    }
    Ok(())
}

fn read_matrix<R: std::io::Read>(r: &mut BlobReader<R>) -> Result<Array2<f64>> {
    let n = r.usize_checked(1 << 32)?;
    let d = r.usize_checked(1 << 32)?;
    if n.saturating_mul(d) > (1 << 32) {
        return Err(Error::DataValidation(format!("implausible shape {n}x{d}")));
    }
    let data = (0..n * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::DataValidation(e.to_string()))
}

fn write_rank_matrix<W: std::io::Write>(w: &mut BlobWriter<W>, m: &RankMatrix) -> Result<()> {
    w.usize(m.n())?;
    w.usize(m.dim())?;
    for &v in m.ranks().iter() {
        w.u64(v)?;
    }
    Ok(())
}

fn read_rank_matrix<R: std::io::Read>(r: &mut BlobReader<R>) -> Result<RankMatrix> {
    let n = r.usize_checked(1 << 32)?;
    let d = r.usize_checked(1 << 32)?;
    if n.saturating_mul(d) > (1 << 32) {
        return Err(Error::DataValidation(format!("implausible shape {n}x{d}")));
    }
    let data = (0..n * d).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let ranks = ndarray::Array2::from_shape_vec((n, d), data)
        .map_err(|e| Error::DataValidation(e.to_string()))?;
    RankMatrix::from_raw(ranks)
}

fn write_margin<W: std::io::Write>(w: &mut BlobWriter<W>, m: &MarginalModel) -> Result<()> {
    w.f64_slice(m.centers())?;
    w.f64(m.bandwidth())
}

fn read_margin<R: std::io::Read>(r: &mut BlobReader<R>) -> Result<MarginalModel> {
    let centers = r.f64_vec()?;
    let bandwidth = r.f64()?;
    MarginalModel::from_parts(centers, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{train, LossKind, TrainConfig};
    use rand::Rng;
    use crate::beta_copula::fit_ebc;
    use crate::density::{fit_gaussian, fit_gmm_em, fit_independent, fit_mkde_cv};
    use crate::rng::seeded_rng;
    use crate::vine::fit_vine;
    use rand_distr::{Distribution, StandardNormal};
    use tempfile::tempdir;

    fn sample_data(seed: u64, n: usize, d: usize) -> LatentMatrix {
        let mut rng = seeded_rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (0..d)
                    .map(|j| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        0.6 * z + 0.8 * e + j as f64
                    })
                    .collect()
            })
            .collect();
        LatentMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("nope".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_model_kind_round_trips_through_disk() {
        let dir = tempdir().unwrap();
        let y = sample_data(1, 60, 3);
        let labels: Vec<String> = (0..60).map(|i| format!("g{}", i % 2)).collect();

        let models = vec![
            LatentModel::Gauss(fit_gaussian(&y).unwrap()),
            LatentModel::Indep(fit_independent(&y).unwrap()),
            LatentModel::Mkde(fit_mkde_cv(&y, &[1.0], 5, 0).unwrap()),
            LatentModel::Gmm(fit_gmm_em(&y, 2, 0, 60, 1e-8).unwrap().0),
            LatentModel::Vine(fit_vine(&y, 2).unwrap()),
            LatentModel::Ebc(fit_ebc(&y, Some(&labels)).unwrap()),
        ];
        for model in models {
            let path = dir.path().join(format!("{}.lgm", model.kind()));
            model.save(&path).unwrap();
            let back = LatentModel::load(&path).unwrap();
            assert_eq!(back.kind(), model.kind());
            assert_eq!(back.dim(), model.dim());
            // Identical parameters produce identical draws.
            assert_eq!(
                back.sample(20, 123).unwrap(),
                model.sample(20, 123).unwrap(),
                "round-tripped {} model samples differently",
                model.kind()
            );
        }
    }

    #[test]
    fn ebc_groups_survive_round_trip() {
        let dir = tempdir().unwrap();
        let y = sample_data(2, 30, 2);
        let labels: Vec<String> = (0..30).map(|i| format!("g{}", i % 3)).collect();
        let model = LatentModel::Ebc(fit_ebc(&y, Some(&labels)).unwrap());
        let path = dir.path().join("ebc.lgm");
        model.save(&path).unwrap();
        let back = LatentModel::load(&path).unwrap();
        let ebc = back.as_ebc().unwrap();
        assert_eq!(ebc.group_index().unwrap().len(), 3);
        assert_eq!(
            ebc.sample_targeted("g1", 10, 7).unwrap(),
            model.as_ebc().unwrap().sample_targeted("g1", 10, 7).unwrap()
        );
    }

    #[test]
    fn autoencoder_checkpoint_round_trips() {
        let dir = tempdir().unwrap();
        let mut rng = seeded_rng(3);
        let data = ndarray::Array2::from_shape_fn((40, 6), |_| {
            if rng.random::<f64>() < 0.5 {
                0.0
            } else {
                1.0
            }
        });
        let config = TrainConfig {
            epochs: 5,
            batch_size: 10,
            loss: LossKind::BinaryCrossEntropy,
            ..TrainConfig::default()
        };
        let (model, _) = train(data.view(), 2, 8, &config).unwrap();
        let path = dir.path().join("ae.lgm");
        save_autoencoder(&path, &model).unwrap();
        let back = load_autoencoder(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(
            back.encode(data.view()).unwrap(),
            model.encode(data.view()).unwrap()
        );
        // A latent model file is not an autoencoder checkpoint.
        let y = sample_data(4, 20, 2);
        let gauss_path = dir.path().join("g.lgm");
        LatentModel::Gauss(fit_gaussian(&y).unwrap())
            .save(&gauss_path)
            .unwrap();
        assert!(load_autoencoder(&gauss_path).is_err());
        assert!(LatentModel::load(&path).is_err());
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.lgm");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(LatentModel::load(&path).is_err());
        std::fs::write(&path, b"LGMM\x01\x00\x01").unwrap();
        assert!(matches!(
            LatentModel::load(&path),
            Err(Error::DataValidation(_))
        ));
    }
}
