//! Command-line front end for the terrain segmentation pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use terraseg_core::config::PipelineConfig;
use terraseg_core::Error;

#[derive(Parser)]
#[command(
    name = "terraseg",
    about = "Texture-based terrain segmentation: SURF features, three classifiers, dense maps",
    version
)]
struct Cli {
    /// TOML pipeline configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Progress chatter on stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect, describe and grid-thin features; one CSV per input image.
    Extract {
        /// Output directory for the per-image feature CSVs.
        #[arg(long)]
        out_dir: PathBuf,
        /// Descriptor variant (surf64, usurf64, usurf36, usurf32, usurf32abs).
        #[arg(long)]
        variant: Option<String>,
        /// Input images (PGM P5 or PPM P6).
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Build a labeled training CSV from an image/mask manifest.
    Preprocess {
        /// Manifest: one `image<TAB>mask` line per training pair.
        #[arg(long)]
        manifest: PathBuf,
        /// Output labeled feature CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also split into dense/non-dense CSVs with this neighbor count.
        #[arg(long)]
        dense_split: Option<usize>,
        /// Outlier share to drop per class, in [0.05, 0.20].
        #[arg(long)]
        drop_fraction: Option<f64>,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Train a classifier on a labeled feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
        /// knn, mlp or svm.
        #[arg(long)]
        classifier: String,
        /// k-NN neighbor count.
        #[arg(long)]
        k: Option<usize>,
        /// k-NN kernel width (default: data-driven).
        #[arg(long)]
        h: Option<f64>,
        /// MLP hidden widths, e.g. 60,60.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        /// MLP trainer: rprop or lma.
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        /// SVM RBF width.
        #[arg(long)]
        gamma: Option<f64>,
        /// SVM upper bound C.
        #[arg(long)]
        cost: Option<f64>,
        /// SMO stopping tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Accuracy over a (gamma, C) grid, reported like a parameter table.
    GridSearch {
        #[arg(long)]
        features: PathBuf,
        /// Output CSV (gamma rows, C columns, `*` for skipped cells).
        #[arg(long)]
        out: PathBuf,
        /// Gamma exponent range, e.g. -4..5 for 2^-4 .. 2^5.
        #[arg(long, default_value = "-4..5")]
        gamma_exp: String,
        /// C exponent range, e.g. -1..7.
        #[arg(long, default_value = "-1..7")]
        cost_exp: String,
        /// Holdout fraction for scoring.
        #[arg(long, default_value_t = 0.3)]
        holdout: f64,
        /// Use stratified k-fold cross validation instead of a holdout.
        #[arg(long)]
        folds: Option<usize>,
        /// Cells to skip as `gi,ci` index pairs separated by `;`.
        #[arg(long)]
        skip: Option<String>,
    },
    /// Classify the features of a CSV with a trained model.
    Classify {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output CSV with predicted class and per-class scores.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one image into a dense label map plus a color overlay.
    Segment {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Overlay PPM output.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Label-map PGM output (255 = unknown).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        radius_factor: Option<f64>,
        #[arg(long)]
        min_weight: Option<f64>,
    },
    /// Per-image feature error rates of a model over a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Report CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row label; defaults to variant-classifier.
        #[arg(long)]
        label: Option<String>,
    },
    /// Project descriptors to 3 coordinates for point-cloud plots.
    Reduce {
        #[arg(long)]
        features: PathBuf,
        /// pca or bottleneck.
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        /// Mark each point dense/non-dense using this neighbor count.
        #[arg(long)]
        dense_split: Option<usize>,
        /// Bottleneck hidden width.
        #[arg(long, default_value_t = 3)]
        hidden: usize,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
    },
    /// Generate the synthetic texture corpus with exact masks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        scenes: usize,
        /// Scenes listed in the train manifest; the rest go to test.
        #[arg(long, default_value_t = 20)]
        train: usize,
        /// Scene size as WxH.
        #[arg(long, default_value = "256x256")]
        size: String,
        /// Tile grid as XxY.
        #[arg(long, default_value = "2x2")]
        tiles: String,
        /// IGNORE band half-width along tile seams.
        #[arg(long, default_value_t = 10)]
        ignore_margin: usize,
    },
}

fn load_config(cli: &Cli) -> terraseg_core::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("terraseg: failed to size worker pool: {e}");
            return ExitCode::from(1);
        }
    }

    let config = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => return fail(e),
    };

    match commands::run(cli.command, config, cli.verbose) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("terraseg: {e}");
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}
