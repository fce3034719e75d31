use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cbss::christoffel::{classify, ClassifierConfig, Frame, DEFAULT_DEGREE};
use cbss::enumerate_basis;
use cbss::evalmetrics::{aligned_mse, upsilon};
use cbss::experiment::{run_experiment, ExperimentConfig};
use cbss::ica::{separate_with, Contrast, FixedPointIca};
use cbss::io;
use cbss::synthdata::{gen_mixture, MixtureSpec, P1Kind};

#[derive(Parser)]
#[command(
    name = "cbss",
    version,
    about = "Christoffel-function classification and blind source separation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Raw,
    Standardized,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::Raw => Frame::Raw,
            FrameArg::Standardized => Frame::Standardized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ContrastArg {
    Kurtosis,
    Logcosh,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    /// Three sources, singular part on a cubic curve.
    Cubic,
    /// Five sources, two of them switched off in the singular part.
    Vanishing,
}

#[derive(clap::Args)]
struct ClassifyArgs {
    /// CSV file, one sample per row.
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(short = 'd', long = "degree", default_value_t = DEFAULT_DEGREE)]
    degree: usize,
    /// Weight of the regular component; the threshold is eta*C(n+d, n).
    #[arg(long)]
    eta: f64,
    #[arg(long, value_enum, default_value = "standardized")]
    frame: FrameArg,
    /// True labels (0/1, one per line) to report classification accuracy.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl ClassifyArgs {
    fn config(&self) -> ClassifierConfig {
        ClassifierConfig::new(self.degree, self.eta).with_frame(self.frame.into())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the graded-lex monomial basis and its size.
    Basis {
        #[arg(short = 'n')]
        n: usize,
        #[arg(short = 'd')]
        d: usize,
    },
    /// Score samples and write scores.csv and scores.json.
    Classify(ClassifyArgs),
    /// Classify, unmix the retained samples and write S_hat.csv and B_hat.json.
    Separate {
        #[command(flatten)]
        classify: ClassifyArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "kurtosis")]
        contrast: ContrastArg,
        /// True sources (CSV) to report the aligned MSE.
        #[arg(long)]
        sources: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment grid from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one synthetic data set and write S.csv, X.csv, labels.csv, A.json.
    Generate {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        eta: f64,
        #[arg(short = 't', long = "samples", default_value_t = 2000)]
        samples: usize,
        /// Half-width of s2 for the cubic model.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("CBSS_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("CBSS_THREADS must be a positive integer, got '{value}'"))?;
    if threads == 0 {
        bail!("CBSS_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("cannot configure the thread pool")?;
    Ok(())
}

fn cmd_basis(n: usize, d: usize) -> Result<()> {
    let basis = enumerate_basis(n, d)?;
    for alpha in basis.indices() {
        println!("{alpha}");
    }
    println!("size={}", basis.len());
    Ok(())
}

fn read_input(path: &Path) -> Result<cbss::ObservationSet> {
    io::read_observations(path).with_context(|| format!("reading {}", path.display()))
}

fn print_accuracy(labels_path: &Option<PathBuf>, estimated: &[u8]) -> Result<()> {
    if let Some(path) = labels_path {
        let truth = io::read_labels(path)?;
        println!("upsilon={:.6}", upsilon(estimated, &truth)?);
    }
    Ok(())
}

fn cmd_classify(args: &ClassifyArgs) -> Result<()> {
    let obs = read_input(&args.input)?;
    let report = classify(&obs, &args.config())?;
    io::write_score_report(&args.out, &report)?;
    let (zeros, ones) = report.counts();
    println!(
        "T={} n={} d={} m={}",
        report.len(),
        report.n,
        report.degree,
        report.m
    );
    println!("threshold={}", report.threshold);
    println!("label0={zeros} label1={ones}");
    if report.condition_warning {
        println!(
            "warning: moment matrix truncated ({} directions)",
            report.truncated
        );
    }
    if report.small_sample_warning {
        println!("warning: T={} does not exceed m={}", report.len(), report.m);
    }
    print_accuracy(&args.labels, &report.labels)
}

fn cmd_separate(
    args: &ClassifyArgs,
    seed: u64,
    contrast: ContrastArg,
    sources: &Option<PathBuf>,
) -> Result<()> {
    let obs = read_input(&args.input)?;
    let contrast = match contrast {
        ContrastArg::Kurtosis => Contrast::Kurtosis,
        ContrastArg::Logcosh => Contrast::LogCosh,
    };
    let start = Instant::now();
    let result = separate_with(
        &obs,
        &args.config(),
        &FixedPointIca::with_contrast(contrast),
        seed,
    )?;
    log::info!(
        "separation took {:.1} ms",
        start.elapsed().as_secs_f64() * 1e3
    );
    io::write_separation(&args.out, &result)?;
    println!("retained={} of {}", result.retained_count, obs.len());
    println!(
        "converged={} iterations={}",
        result.unmixing.converged, result.unmixing.iterations
    );
    print_accuracy(&args.labels, &result.labels)?;
    if let Some(path) = sources {
        let s = io::read_matrix_csv(path)?;
        println!("mse={:.6}", aligned_mse(&result.s_hat, &s)?);
    }
    Ok(())
}

fn cmd_experiment(
    config: &Path,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg =
        ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let start = Instant::now();
    let report = run_experiment(&cfg)?;
    log::info!("experiment took {:.1} s", start.elapsed().as_secs_f64());
    report.write(&cfg.output_dir)?;
    print!("{}", report.markdown_table());
    for cell in report.cells.iter().filter(|c| c.failed > 0) {
        println!(
            "{} eta={} d={:?}: {} failed trials ({})",
            cell.method.name(),
            cell.eta,
            cell.d,
            cell.failed,
            cell.first_error.as_deref().unwrap_or("")
        );
    }
    println!("wrote {}", cfg.output_dir.join("report.csv").display());
    Ok(())
}

fn cmd_generate(
    model: Model,
    eta: f64,
    samples: usize,
    gamma: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let spec = match model {
        Model::Cubic => MixtureSpec::cubic(eta, gamma),
        Model::Vanishing => MixtureSpec::vanishing(eta),
    };
    if matches!(model, Model::Vanishing) && gamma != 0.0 {
        bail!("--gamma only applies to the cubic model");
    }
    let data = gen_mixture(&spec, samples, seed)?;
    io::write_generated(out, &data, &spec, seed)?;
    let kind = match &spec.p1 {
        P1Kind::CubicCurve3D { .. } => "cubic_curve_3d",
        P1Kind::VanishingPair5D { .. } => "vanishing_pair_5d",
        P1Kind::Pluggable(p) => &p.name,
    };
    println!(
        "{kind}: n={} T={samples} regular fraction {:.4}",
        spec.n,
        data.regular_fraction()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::Basis { n, d } => cmd_basis(n, d),
        Command::Classify(args) => cmd_classify(&args),
        Command::Separate {
            classify,
            seed,
            contrast,
            sources,
        } => cmd_separate(&classify, seed, contrast, &sources),
        Command::Experiment {
            config,
            trials,
            seed,
            out,
        } => cmd_experiment(&config, trials, seed, out),
        Command::Generate {
            model,
            eta,
            samples,
            gamma,
            seed,
            out,
        } => cmd_generate(model, eta, samples, gamma, seed, &out),
    }
}
