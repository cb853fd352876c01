//! `lgm` wires the full pipeline together: train an autoencoder, encode
//! data, fit one of six latent-space models, sample new latent vectors,
//! decode them, and score real-versus-synthetic sample pairs.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or validation error,
//! 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lgm_core::autoencoder::{self, LossKind, TrainConfig};
use lgm_core::beta_copula::{fit_ebc, recombine};
use lgm_core::data::{split_holdout_indices, LatentMatrix};
use lgm_core::density::{fit_gaussian, fit_gmm_em, fit_independent, fit_mkde_cv};
use lgm_core::io::{load_csv, load_matrix, save_csv, save_matrix};
use lgm_core::metrics;
use lgm_core::model::{load_autoencoder, save_autoencoder, LatentModel, ModelKind};
use lgm_core::rng::seeded_rng;
use lgm_core::vine::{default_truncation, fit_vine};
use lgm_core::Error;

#[derive(Parser)]
#[command(name = "lgm", version, about = "Latent-space generative modeling for autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fully-connected autoencoder and write a checkpoint.
    TrainAe(TrainAeArgs),
    /// Encode a dataset into the latent space, optionally holding rows out.
    Encode(EncodeArgs),
    /// Decode latent vectors back to the data space.
    Decode(DecodeArgs),
    /// Fit a latent-space model to an encoded matrix.
    Fit(FitArgs),
    /// Draw latent samples from a fitted model.
    Sample(SampleArgs),
    /// Draw latent samples restricted to one labeled group.
    SampleTargeted(SampleTargetedArgs),
    /// Combine one group's dependence structure with another's margins.
    Recombine(RecombineArgs),
    /// Score a real/synthetic pair and print one JSON report line.
    Eval(EvalArgs),
    /// Nearest training neighbor of every synthetic row, as CSV.
    NnAudit(NnAuditArgs),
}

#[derive(Args)]
struct TrainAeArgs {
    /// Training data (CSV or LGM1 binary).
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_name = "D")]
    latent_dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    weight_decay: f64,
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    loss: LossArg,
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Bce,
}

impl From<LossArg> for LossKind {
    fn from(value: LossArg) -> Self {
        match value {
            LossArg::Squared => LossKind::SquaredError,
            LossArg::Bce => LossKind::BinaryCrossEntropy,
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    /// Autoencoder checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Latent matrix output; labels from a labeled CSV input are carried over.
    #[arg(long)]
    output: PathBuf,
    /// Hold this many rows out into --holdout-output (requires --seed).
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long)]
    holdout_output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Autoencoder checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    latents: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: ModelKind,
    /// Latent matrix (labels in a CSV enable targeted sampling for ebc).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Mixture components for --kind gmm.
    #[arg(long, default_value_t = 10)]
    components: usize,
    /// Tree levels for --kind vine (default min(d-1, 5)).
    #[arg(long)]
    truncation: Option<usize>,
    /// Bandwidth scale grid for --kind mkde.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 1.0, 2.0, 4.0])]
    grid: Vec<f64>,
    /// Cross-validation folds for --kind mkde.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// EM iteration cap for --kind gmm.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// EM log-likelihood improvement tolerance for --kind gmm.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Optional check that the model file holds this kind.
    #[arg(long, value_parser = parse_kind)]
    kind: Option<ModelKind>,
}

#[derive(Args)]
struct SampleTargetedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    group: String,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RecombineArgs {
    #[arg(long)]
    model: PathBuf,
    /// Group providing the dependence structure.
    #[arg(long)]
    group_a: String,
    /// Group providing the margins.
    #[arg(long)]
    group_b: String,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    /// Kernel bandwidth for the discrepancy; defaults to the median
    /// pairwise distance of the pooled sample.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Subsample both files to this many rows before scoring
    /// (requires --seed).
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct NnAuditArgs {
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::NumericFailure(_)) => 4,
            CliError::Core(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::TrainAe(args) => cmd_train_ae(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Sample(args) => cmd_sample(args),
        Command::SampleTargeted(args) => cmd_sample_targeted(args),
        Command::Recombine(args) => cmd_recombine(args),
        Command::Eval(args) => cmd_eval(args),
        Command::NnAudit(args) => cmd_nn_audit(args),
    }
}

fn cmd_train_ae(args: TrainAeArgs) -> Result<(), CliError> {
    let (data, _) = load_input(&args.data)?;
    let config = TrainConfig {
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        loss: args.loss.into(),
    };
    let started = Instant::now();
    let (model, history) = autoencoder::train(data.data().view(), args.latent_dim, args.hidden, &config)?;
    println!("train_seconds={}", started.elapsed().as_secs_f64());
    println!("final_loss={}", history.last().copied().unwrap_or(f64::NAN));
    save_autoencoder(&args.output, &model)?;
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), CliError> {
    let model = load_autoencoder(&args.model)?;
    let (data, labels) = load_input(&args.data)?;
    let latents = model.encode(data.data().view())?;
    match args.holdout {
        None => {
            write_output(&args.output, &latents, labels.as_deref())?;
        }
        Some(count) => {
            let holdout_output = args.holdout_output.as_ref().ok_or_else(|| {
                CliError::Usage("--holdout requires --holdout-output".into())
            })?;
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--holdout requires --seed".into()))?;
            let (train_idx, holdout_idx) = split_holdout_indices(latents.n(), count, seed)?;
            let pick = |idx: &[usize]| -> Result<(LatentMatrix, Option<Vec<String>>), Error> {
                let m = latents.select_rows(idx)?;
                let l = labels
                    .as_ref()
                    .map(|all| idx.iter().map(|&i| all[i].clone()).collect());
                Ok((m, l))
            };
            let (train, train_labels) = pick(&train_idx)?;
            let (hold, hold_labels) = pick(&holdout_idx)?;
            write_output(&args.output, &train, train_labels.as_deref())?;
            write_output(holdout_output, &hold, hold_labels.as_deref())?;
        }
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), CliError> {
    let model = load_autoencoder(&args.model)?;
    let (latents, _) = load_input(&args.latents)?;
    let decoded = model.decode(latents.data().view())?;
    let out = LatentMatrix::new(decoded)?;
    write_output(&args.output, &out, None)?;
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let (data, labels) = load_input(&args.data)?;
    let started = Instant::now();
    let model = match args.kind {
        ModelKind::Gauss => LatentModel::Gauss(fit_gaussian(&data)?),
        ModelKind::Indep => LatentModel::Indep(fit_independent(&data)?),
        ModelKind::Mkde => LatentModel::Mkde(fit_mkde_cv(&data, &args.grid, args.folds, args.seed)?),
        ModelKind::Gmm => {
            let (m, _) = fit_gmm_em(&data, args.components, args.seed, args.max_iters, args.tol)?;
            LatentModel::Gmm(m)
        }
        ModelKind::Vine => {
            let truncation = args
                .truncation
                .unwrap_or_else(|| default_truncation(data.dim()));
            LatentModel::Vine(fit_vine(&data, truncation)?)
        }
        ModelKind::Ebc => LatentModel::Ebc(fit_ebc(&data, labels.as_deref())?),
    };
    println!("fit_seconds={}", started.elapsed().as_secs_f64());
    model.save(&args.output)?;
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<(), CliError> {
    let model = LatentModel::load(&args.model)?;
    if let Some(expected) = args.kind {
        if expected != model.kind() {
            return Err(Error::DataValidation(format!(
                "model file holds a {} model, --kind says {expected}",
                model.kind()
            ))
            .into());
        }
    }
    if args.count == 0 {
        write_empty(&args.output, model.dim())?;
        println!("sample_seconds=0");
        return Ok(());
    }
    let started = Instant::now();
    let samples = model.sample(args.count, args.seed)?;
    println!("sample_seconds={}", started.elapsed().as_secs_f64());
    write_output(&args.output, &samples, None)?;
    Ok(())
}

fn cmd_sample_targeted(args: SampleTargetedArgs) -> Result<(), CliError> {
    let model = LatentModel::load(&args.model)?;
    let ebc = model.as_ebc().ok_or_else(|| {
        Error::DataValidation("targeted sampling requires a copula model with labels".into())
    })?;
    if args.count == 0 {
        write_empty(&args.output, model.dim())?;
        println!("sample_seconds=0");
        return Ok(());
    }
    let started = Instant::now();
    let samples = ebc.sample_targeted(&args.group, args.count, args.seed)?;
    println!("sample_seconds={}", started.elapsed().as_secs_f64());
    write_output(&args.output, &samples, None)?;
    Ok(())
}

fn cmd_recombine(args: RecombineArgs) -> Result<(), CliError> {
    let model = LatentModel::load(&args.model)?;
    let ebc = model
        .as_ebc()
        .ok_or_else(|| Error::DataValidation("recombination requires a copula model".into()))?;
    if args.count == 0 {
        write_empty(&args.output, model.dim())?;
        println!("sample_seconds=0");
        return Ok(());
    }
    let started = Instant::now();
    let samples = recombine(ebc, &args.group_a, ebc, &args.group_b, args.count, args.seed)?;
    println!("sample_seconds={}", started.elapsed().as_secs_f64());
    write_output(&args.output, &samples, None)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let (real, _) = load_input(&args.real)?;
    let (synthetic, _) = load_input(&args.synthetic)?;
    let (real, synthetic) = match args.subsample {
        None => {
            if real.n() != synthetic.n() {
                return Err(Error::DataValidation(format!(
                    "row counts differ ({} real vs {} synthetic); \
                     pass --subsample N --seed S to score equal-size subsamples",
                    real.n(),
                    synthetic.n()
                ))
                .into());
            }
            (real, synthetic)
        }
        Some(count) => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--subsample requires --seed".into()))?;
            if count == 0 || count > real.n().min(synthetic.n()) {
                return Err(Error::InvalidArgument(format!(
                    "--subsample {count} must lie in [1, {}]",
                    real.n().min(synthetic.n())
                ))
                .into());
            }
            let mut rng = seeded_rng(seed);
            (
                subsample(&real, count, &mut rng)?,
                subsample(&synthetic, count, &mut rng)?,
            )
        }
    };
    let report = metrics::evaluate(
        real.data().view(),
        synthetic.data().view(),
        args.bandwidth,
    )?;
    println!("{}", report.to_json_line());
    Ok(())
}

fn subsample(
    y: &LatentMatrix,
    count: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<LatentMatrix, Error> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..y.n()).collect();
    idx.shuffle(rng);
    idx.truncate(count);
    idx.sort_unstable();
    y.select_rows(&idx)
}

fn cmd_nn_audit(args: NnAuditArgs) -> Result<(), CliError> {
    let (synthetic, _) = load_input(&args.synthetic)?;
    let (train, _) = load_input(&args.train)?;
    if synthetic.dim() != train.dim() {
        return Err(Error::DimensionMismatch(format!(
            "synthetic has {} columns, training data {}",
            synthetic.dim(),
            train.dim()
        ))
        .into());
    }
    let mut out = String::from("row,nn_index,nn_distance\n");
    for i in 0..synthetic.n() {
        let mut best = f64::INFINITY;
        let mut best_idx = 0usize;
        for r in 0..train.n() {
            let d2: f64 = synthetic
                .row(i)
                .iter()
                .zip(train.row(r).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 < best {
                best = d2;
                best_idx = r;
            }
        }
        out.push_str(&format!("{i},{best_idx},{}\n", best.sqrt()));
    }
    std::fs::write(&args.output, out).map_err(Error::from)?;
    Ok(())
}

/// Loads either format; CSV may carry a label column. Errors carry the
/// file name.
fn load_input(path: &Path) -> Result<(LatentMatrix, Option<Vec<String>>), Error> {
    let result = if path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
    {
        load_csv(path)
    } else {
        load_matrix(path).map(|m| (m, None))
    };
    result.map_err(|e| Error::DataValidation(format!("{}: {e}", path.display())))
}

fn write_output(
    path: &Path,
    y: &LatentMatrix,
    labels: Option<&[String]>,
) -> Result<(), Error> {
    if path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
    {
        save_csv(path, y, labels)
    } else {
        save_matrix(y, path)
    }
}

/// Zero-row output: a bare CSV header, or an LGM1 file with n = 0.
fn write_empty(path: &Path, dim: usize) -> Result<(), Error> {
    if path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false)
    {
        let header: Vec<String> = (0..dim).map(|j| format!("dim_{j}")).collect();
        std::fs::write(path, format!("{}\n", header.join(",")))?;
    } else {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"LGM1");
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&(dim as u64).to_le_bytes());
        std::fs::write(path, bytes)?;
    }
    Ok(())
}
