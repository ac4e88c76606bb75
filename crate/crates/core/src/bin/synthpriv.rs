use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use synthpriv::datamodel::{load_csv, to_csv_string};
use synthpriv::inversion::{invert, train_mlp};
use synthpriv::mechanism::calibrate_sigma;
use synthpriv::synthgen::{generate, GeneratorKind, GeneratorSpec, DEFAULT_MEMORIZE_BANDWIDTH};
use synthpriv::{audit, AuditConfig, AuditReport, Dataset, Direction, Error, FeatureVector};

/// Empirical privacy-loss auditing for synthetic datasets.
#[derive(Debug, Parser)]
#[command(name = "synthpriv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the (mu, gamma) expected privacy-loss bound of a synthetic set.
    Audit(AuditArgs),
    /// Print the Gaussian-mechanism noise scale for (epsilon, delta, clip).
    Calibrate(CalibrateArgs),
    /// Generate a synthetic CSV from a real one.
    Gen(GenArgs),
    /// Train a classifier and run a model-inversion attack on it.
    Attack(AttackArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Max,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum KindArg {
    SmoothedBootstrap,
    Memorize,
    GaussianFit,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    #[arg(long, default_value_t = 1e-5, value_parser = open_unit)]
    gamma: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pairs: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long = "nn-order", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    nn_order: u64,
    #[arg(long, value_enum, default_value = "max")]
    direction: DirectionArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Include every per-pair loss in the report.
    #[arg(long)]
    emit_samples: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Input files carry an integer label in their last column (ignored).
    #[arg(long)]
    labels: bool,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, allow_negative_numbers = true, value_parser = positive)]
    epsilon: f64,
    #[arg(long, allow_negative_numbers = true, value_parser = open_unit)]
    delta: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true, value_parser = positive)]
    clip: f64,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long, value_enum, default_value = "smoothed_bootstrap")]
    kind: KindArg,
    /// Noise scale; defaults to 0.5, or 1e-3 for memorize.
    #[arg(long, allow_negative_numbers = true, value_parser = non_negative)]
    bandwidth: Option<f64>,
    /// Number of points; defaults to the size of the real set.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    count: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    /// The real file carries labels in its last column; they are copied.
    #[arg(long)]
    labels: bool,
}

#[derive(Debug, Args)]
struct AttackArgs {
    /// Labelled training CSV (label in the last column).
    #[arg(long)]
    train: PathBuf,
    /// Labelled CSV scored against; without it 20% of --train is held out.
    #[arg(long)]
    holdout: Option<PathBuf>,
    /// Layer sizes, e.g. 2,16,2; defaults to dim,16,classes.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    lr: f64,
    #[arg(long = "target-class", default_value_t = 0)]
    target_class: usize,
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long = "step-size", default_value_t = 0.1, value_parser = positive)]
    step_size: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie strictly between 0 and 1"))
    }
}

/// `x` rounded to six significant digits.
fn six_significant(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn run_audit(args: &AuditArgs) -> Result<(), Error> {
    let real = load_csv(&args.real, args.labels)?;
    let synthetic = load_csv(&args.synthetic, args.labels)?;
    let config = AuditConfig {
        n_pairs: args.pairs as usize,
        k_override: args.k.map(|k| k as usize),
        nn_order: args.nn_order as usize,
        direction: match args.direction {
            DirectionArg::Forward => Direction::Forward,
            DirectionArg::Max => Direction::Max,
        },
        seed: args.seed,
        gamma: args.gamma,
    };
    let (estimate, samples) = audit(&real, &synthetic, &config)?;
    let report = AuditReport::new(
        &real,
        &synthetic,
        &estimate,
        args.emit_samples.then_some(samples.as_slice()),
    );
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    write_output(args.output.as_deref(), &text)
}

fn run_calibrate(args: &CalibrateArgs) -> Result<(), Error> {
    let sigma = calibrate_sigma(args.epsilon, args.delta, args.clip)?;
    write_output(None, &format!("{}\n", six_significant(sigma)))
}

fn run_gen(args: &GenArgs) -> Result<(), Error> {
    let real = load_csv(&args.real, args.labels)?;
    let kind = match args.kind {
        KindArg::SmoothedBootstrap => GeneratorKind::SmoothedBootstrap,
        KindArg::Memorize => GeneratorKind::Memorize,
        KindArg::GaussianFit => GeneratorKind::GaussianFit,
    };
    let bandwidth = args.bandwidth.unwrap_or(match kind {
        GeneratorKind::Memorize => DEFAULT_MEMORIZE_BANDWIDTH,
        _ => 0.5,
    });
    let spec = GeneratorSpec {
        kind,
        bandwidth,
        count: args.count.map_or(real.len(), |c| c as usize),
        seed: args.seed,
    };
    let synthetic = generate(&real, &spec)?;
    write_output(args.output.as_deref(), &to_csv_string(&synthetic))
}

#[derive(Serialize)]
struct AttackOutput<'a> {
    reconstruction: &'a [f64],
    final_confidence: f64,
    quality: f64,
    train_accuracy: f64,
}

fn holdout_split(data: &Dataset, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_5EED));
    let n_hold = (data.len() / 5).max(1);
    let mut hold = idx[..n_hold].to_vec();
    let mut train = idx[n_hold..].to_vec();
    hold.sort_unstable();
    train.sort_unstable();
    (data.select(train), data.select(hold))
}

fn run_attack(args: &AttackArgs) -> Result<(), Error> {
    let data = load_csv(&args.train, true)?;
    let (train, holdout) = match &args.holdout {
        Some(path) => (data, load_csv(path, true)?),
        None => holdout_split(&data, args.seed),
    };
    let layers = match &args.layers {
        Some(l) => l.clone(),
        None => {
            let classes = train
                .labels()
                .and_then(|l| l.iter().max())
                .map_or(2, |m| m + 1);
            vec![train.dim(), 16, classes.max(2)]
        }
    };
    let trained = train_mlp(&train, &layers, args.epochs, args.lr, args.seed)?;
    let classes = trained.model.classes();
    if args.target_class >= classes {
        return Err(Error::LabelOutOfRange {
            label: args.target_class,
            classes,
        });
    }
    let class_examples = holdout.class_subset(args.target_class)?;
    if class_examples.is_empty() {
        return Err(Error::Undersized {
            found: 0,
            required: 1,
        });
    }
    let init = FeatureVector::zeros(trained.model.input_dim())?;
    let result = invert(
        &trained.model,
        args.target_class,
        args.steps,
        args.step_size,
        &init,
        &class_examples,
    )?;
    let out = AttackOutput {
        reconstruction: result.reconstruction.as_slice(),
        final_confidence: result.final_confidence,
        quality: result.quality,
        train_accuracy: trained.train_accuracy,
    };
    let mut json = serde_json::to_string(&out).expect("attack output serialises");
    json.push('\n');
    write_output(None, &json)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Audit(a) => run_audit(a),
        Command::Calibrate(a) => run_calibrate(a),
        Command::Gen(a) => run_gen(a),
        Command::Attack(a) => run_attack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
