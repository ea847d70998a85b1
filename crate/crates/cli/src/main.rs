//! Batch command-line front end for the patch-cluster Poisson denoiser.
//!
//! Four subcommands cover the full workflow: `build-index` turns clean
//! images into a reusable cluster index, `simulate` draws photon counts
//! from a clean image at a chosen peak intensity, `denoise` restores a
//! count image with a prebuilt index, and `evaluate` runs the peak-sweep
//! benchmark and emits a CSV report.
//!
//! All randomness is seed-controlled and every output file is written
//! atomically, so runs are reproducible and interruptions never leave
//! partial files behind. Exit codes are stable and documented in the
//! README: distinct failure classes (I/O, format, parameters, index
//! corruption, ...) map to distinct codes so scripts can branch on them.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmse::denoise::DenoiseParams;
use pmse::corpus::{ingest_corpus, normalize_corpus};
use pmse::image::IntensityImage;
use pmse::index::{build_denoise_index, DenoiseIndex, IndexBuildParams};
use pmse::noise::add_poisson_noise;
use pmse::pipeline::{denoise_image, evaluate};
use pmse::{pfm, pgm};
use pmse::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pmse",
    version,
    about = "Photon-limited image denoising with clustered patch priors",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a cluster index from clean reference images.
    BuildIndex(BuildIndexArgs),
    /// Draw Poisson photon counts from a clean image at a target peak.
    Simulate(SimulateArgs),
    /// Denoise a photon-count image with a prebuilt index.
    Denoise(DenoiseArgs),
    /// Benchmark an index on a clean image across several peaks.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct BuildIndexArgs {
    /// Clean input images (PGM, 8- or 16-bit).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Where to write the index.
    #[arg(long, short)]
    output: PathBuf,

    /// Patch side in pixels.
    #[arg(long, default_value_t = 14)]
    side: usize,

    /// Number of clusters to compress the corpus into.
    #[arg(long, default_value_t = 1_000_000)]
    clusters: usize,

    /// Randomized lookup trees.
    #[arg(long, default_value_t = 64)]
    trees: usize,

    /// Maximum clusters per tree leaf.
    #[arg(long, default_value_t = 32)]
    leaf_size: usize,

    /// Graph neighbors per cluster (default: twice the patch dimension).
    #[arg(long)]
    knn: Option<usize>,

    /// Keep at most this many patches (uniform random subsample).
    #[arg(long)]
    cap: Option<usize>,

    /// Cap on k-means update iterations.
    #[arg(long, default_value_t = 30)]
    max_iters: usize,

    /// Seed for subsampling, clustering, and tree randomization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Clean input image (PGM).
    #[arg(long, short)]
    input: PathBuf,

    /// Where to write the noisy count image (16-bit PGM).
    #[arg(long, short)]
    output: PathBuf,

    /// Peak intensity the clean image is scaled to before sampling.
    #[arg(long)]
    peak: f64,

    /// Seed for the count draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Noisy photon-count image (PGM).
    #[arg(long, short)]
    input: PathBuf,

    /// Index built by `build-index`.
    #[arg(long)]
    index: PathBuf,

    /// Where to write the float estimate (PFM).
    #[arg(long, short)]
    output: PathBuf,

    /// Also write a rounded integer preview here (PGM).
    #[arg(long)]
    pgm: Option<PathBuf>,

    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Clean reference image (PGM).
    #[arg(long, short)]
    input: PathBuf,

    /// Index built by `build-index`.
    #[arg(long)]
    index: PathBuf,

    /// Peak intensities to benchmark, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    peaks: Vec<f64>,

    /// Independent noise draws averaged per peak.
    #[arg(long, default_value_t = 5)]
    realizations: usize,

    /// Seed for the noise draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Also write the report as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,

    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct SearchArgs {
    /// Convergence window: pops the total weight is compared across.
    #[arg(long, default_value_t = 10)]
    window: usize,

    /// Relative weight-change threshold that stops the search (0 disables).
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,

    /// Process every cluster instead of searching (slow, exact).
    #[arg(long, default_value_t = false)]
    exhaustive: bool,
}

impl SearchArgs {
    fn to_params(&self) -> DenoiseParams {
        DenoiseParams {
            convergence_window: self.window,
            epsilon: self.epsilon,
            exhaustive: self.exhaustive,
        }
    }
}

/// Maps each error class to a stable exit code; scripts rely on these.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::Format { .. } => 4,
        Error::InvalidParameter { .. } | Error::EmptyInput(_) | Error::Domain(_) => 5,
        Error::ImageTooSmall { .. }
        | Error::DimensionMismatch { .. }
        | Error::PatchOutOfBounds { .. }
        | Error::UncoveredPixel { .. } => 6,
        Error::NotAnIndexFile { .. } => 7,
        Error::UnsupportedIndexVersion { .. } => 8,
        Error::TruncatedIndex { .. } => 9,
        Error::InconsistentIndex { .. } => 10,
        Error::ValueOutOfRange(_) => 11,
        Error::DegenerateWeights(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: invalid parameter workers: must be positive");
            return ExitCode::from(5);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildIndex(args) => build_index(args),
        Command::Simulate(args) => simulate(args),
        Command::Denoise(args) => denoise(args),
        Command::Evaluate(args) => evaluate_cmd(args),
    }
}

fn build_index(args: BuildIndexArgs) -> Result<()> {
    let images: Vec<IntensityImage> = args
        .inputs
        .iter()
        .map(pgm::load_intensity)
        .collect::<Result<_>>()?;
    let corpus = ingest_corpus(&images, args.side, args.cap, args.seed)?;
    let corpus = normalize_corpus(corpus)?;
    let n_patches = corpus.len();
    let params = IndexBuildParams {
        n_clusters: args.clusters,
        knn_k: args.knn,
        tree_count: args.trees,
        leaf_capacity: args.leaf_size,
        max_iters: args.max_iters,
        seed: args.seed,
    };
    let index = build_denoise_index(corpus, &params)?;
    index.save(&args.output)?;
    println!(
        "indexed {} patches into {} clusters -> {}",
        n_patches,
        index.n_clusters(),
        args.output.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let clean = pgm::load_intensity(&args.input)?;
    let noisy = add_poisson_noise(&clean, args.peak, args.seed)?;
    pgm::save_count(&noisy, &args.output)?;
    println!(
        "simulated peak {} counts from {} -> {}",
        args.peak,
        args.input.display(),
        args.output.display()
    );
    Ok(())
}

fn denoise(args: DenoiseArgs) -> Result<()> {
    let index = DenoiseIndex::load(&args.index)?;
    let noisy = pgm::load_count(&args.input)?;
    let params = args.search.to_params();
    let result = denoise_image(&noisy, &index, &params)?;
    pfm::save(&result.image, &args.output)?;
    if let Some(pgm_path) = &args.pgm {
        pgm::save_intensity_rounded(&result.image, pgm_path)?;
    }
    println!(
        "denoised {} patches ({} fallbacks, {:.1} clusters/patch) -> {}",
        result.patches,
        result.fallbacks,
        result.clusters_processed as f64 / result.patches.max(1) as f64,
        args.output.display()
    );
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let index = DenoiseIndex::load(&args.index)?;
    let clean = pgm::load_intensity(&args.input)?;
    let name = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.input.display().to_string());
    let params = args.search.to_params();
    let report = evaluate(
        &name,
        &clean,
        &index,
        &args.peaks,
        args.realizations,
        args.seed,
        &params,
    )?;
    print!("{}", report.render_table());
    if let Some(csv_path) = &args.csv {
        atomic_write(csv_path, report.render_csv().as_bytes())?;
        println!("report written to {}", csv_path.display());
    }
    Ok(())
}

/// Writes through a temp sibling and renames, so a failed run never leaves
/// a partial file at the target path.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.to_path_buf();
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "output".into());
    name.push(".tmp");
    tmp.set_file_name(name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
    })
}
