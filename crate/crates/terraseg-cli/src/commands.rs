//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use terraseg_core::config::PipelineConfig;
use terraseg_core::dataset::{self, LabeledFeatureSet};
use terraseg_core::error::{Error, Result};
use terraseg_core::features::io as feature_io;
use terraseg_core::knn::KnnModel;
use terraseg_core::mlp::{self, TrainAlgorithm, TrainConfig};
use terraseg_core::model::TrainedModel;
use terraseg_core::reduce;
use terraseg_core::svm::{self, GridEval, GridSearchConfig, SmoConfig};
use terraseg_core::synth::{generate_corpus, SynthSpec};
use terraseg_core::{imaging, pipeline};

use crate::Command;

pub fn run(command: Command, config: PipelineConfig, verbose: bool) -> Result<()> {
    match command {
        Command::Extract {
            out_dir,
            variant,
            images,
        } => extract(&config, out_dir, variant, images, verbose),
        Command::Preprocess {
            manifest,
            out,
            dense_split,
            drop_fraction,
            variant,
        } => preprocess(&config, manifest, out, dense_split, drop_fraction, variant, verbose),
        Command::Train {
            features,
            model,
            classifier,
            k,
            h,
            hidden,
            algorithm,
            epochs,
            gamma,
            cost,
            tol,
        } => {
            let overrides = TrainOverrides {
                k,
                h,
                hidden,
                algorithm,
                epochs,
                gamma,
                cost,
                tol,
            };
            train(&config, features, model, &classifier, overrides, verbose)
        }
        Command::GridSearch {
            features,
            out,
            gamma_exp,
            cost_exp,
            holdout,
            folds,
            skip,
        } => grid_search(&config, features, out, &gamma_exp, &cost_exp, holdout, folds, skip),
        Command::Classify {
            features,
            model,
            out,
        } => classify(&config, features, model, out),
        Command::Segment {
            image,
            model,
            overlay,
            labels,
            radius_factor,
            min_weight,
        } => segment(&config, image, model, overlay, labels, radius_factor, min_weight),
        Command::Evaluate {
            manifest,
            model,
            out,
            label,
        } => evaluate(&config, manifest, model, out, label),
        Command::Reduce {
            features,
            method,
            out,
            dense_split,
            hidden,
            epochs,
        } => reduce_cmd(&config, features, &method, out, dense_split, hidden, epochs),
        Command::Synth {
            out,
            scenes,
            train,
            size,
            tiles,
            ignore_margin,
        } => synth(&config, out, scenes, train, &size, &tiles, ignore_margin),
    }
}

fn apply_variant(config: &PipelineConfig, variant: Option<String>) -> Result<PipelineConfig> {
    let mut cfg = config.clone();
    if let Some(v) = variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn extract(
    config: &PipelineConfig,
    out_dir: PathBuf,
    variant: Option<String>,
    images: Vec<PathBuf>,
    verbose: bool,
) -> Result<()> {
    let cfg = apply_variant(config, variant)?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let outputs: Vec<(PathBuf, usize)> = images
        .par_iter()
        .map(|path| {
            let img = imaging::pnm::read_gray(path)?;
            let features = pipeline::extract_thinned(&img, &cfg)?;
            let stem = path
                .file_stem()
                .ok_or_else(|| Error::format(path, "no file name"))?;
            let out = out_dir.join(Path::new(stem)).with_extension("csv");
            feature_io::write_csv(&out, &features, None)?;
            Ok((out, features.len()))
        })
        .collect::<Result<_>>()?;
    if verbose {
        for (path, count) in &outputs {
            eprintln!("{}: {count} features", path.display());
        }
    }
    Ok(())
}

fn preprocess(
    config: &PipelineConfig,
    manifest: PathBuf,
    out: PathBuf,
    dense_split: Option<usize>,
    drop_fraction: Option<f64>,
    variant: Option<String>,
    verbose: bool,
) -> Result<()> {
    let mut cfg = apply_variant(config, variant)?;
    if let Some(fraction) = drop_fraction {
        cfg.outliers.drop_fraction = fraction;
        cfg.outliers.validate()?;
    }
    let pairs = dataset::read_manifest(&manifest)?;
    let raw = pipeline::build_labeled_set(&pairs, &cfg)?;
    let cleaned = dataset::eliminate_outliers(&raw, &cfg.outliers)?;
    if verbose {
        eprintln!(
            "{} features from {} pairs, {} after outlier elimination",
            raw.len(),
            pairs.len(),
            cleaned.len()
        );
    }
    feature_io::write_csv(&out, &cleaned.features, Some(&cleaned.labels))?;
    if let Some(n) = dense_split {
        let (dense, sparse) = dataset::dense_split(&cleaned, n)?;
        let dense_path = out.with_extension("dense.csv");
        let sparse_path = out.with_extension("nondense.csv");
        feature_io::write_csv(&dense_path, &dense.features, Some(&dense.labels))?;
        feature_io::write_csv(&sparse_path, &sparse.features, Some(&sparse.labels))?;
        println!(
            "dense {} ({:.0}%) / non-dense {} ({:.0}%)",
            dense.len(),
            100.0 * dense.len() as f64 / cleaned.len().max(1) as f64,
            sparse.len(),
            100.0 * sparse.len() as f64 / cleaned.len().max(1) as f64,
        );
    }
    Ok(())
}

fn load_labeled(config: &PipelineConfig, path: &Path) -> Result<LabeledFeatureSet> {
    let variant = config.variant()?;
    let (features, raw_labels) = feature_io::read_csv(path, Some(variant))
        .or_else(|_| feature_io::read_csv(path, None))?;
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|&l| {
            usize::try_from(l)
                .map_err(|_| Error::format(path, "training features must be labeled"))
        })
        .collect::<Result<_>>()?;
    LabeledFeatureSet::new(features, labels, config.class_count())
}

struct TrainOverrides {
    k: Option<usize>,
    h: Option<f64>,
    hidden: Option<Vec<usize>>,
    algorithm: Option<String>,
    epochs: Option<usize>,
    gamma: Option<f64>,
    cost: Option<f64>,
    tol: Option<f64>,
}

fn train(
    config: &PipelineConfig,
    features: PathBuf,
    model_path: PathBuf,
    classifier: &str,
    overrides: TrainOverrides,
    verbose: bool,
) -> Result<()> {
    let set = load_labeled(config, &features)?;
    let names = config.class_names.clone();
    match classifier {
        "knn" => {
            let k = overrides.k.unwrap_or(config.knn.k);
            let h = overrides.h.or(config.knn.h);
            let model = KnnModel::new(set, k, h, names)?;
            println!(
                "knn model: {} features, k={}, h={:.6}",
                model.set.len(),
                model.k,
                model.h
            );
            model.save(&model_path)
        }
        "mlp" => {
            let hidden = overrides.hidden.unwrap_or_else(|| config.mlp.hidden.clone());
            let mut structure = vec![set.descriptor_dims()];
            structure.extend(&hidden);
            structure.push(set.class_count);
            let algorithm = TrainAlgorithm::parse(
                overrides
                    .algorithm
                    .as_deref()
                    .unwrap_or(&config.mlp.algorithm),
            )?;
            let train_cfg = TrainConfig {
                algorithm,
                epochs: overrides.epochs.unwrap_or(config.mlp.epochs),
                seed: config.seed,
                val_fraction: config.mlp.val_fraction,
                patience: config.mlp.patience,
            };
            let (model, trace) = mlp::train(&set, &structure, &train_cfg)?;
            println!(
                "mlp model: structure {structure:?}, parameters {}, epochs {} (best {})",
                model.param_count(),
                trace.epochs_run,
                trace.best_epoch
            );
            if verbose {
                for (epoch, err) in trace.train_errors.iter().enumerate() {
                    eprintln!("epoch {epoch}: train error {err:.6}");
                }
            }
            model.save(&model_path)
        }
        "svm" => {
            let smo = SmoConfig {
                tol: overrides.tol.unwrap_or(config.svm.tol),
                ..SmoConfig::default()
            };
            let gamma = overrides.gamma.unwrap_or(config.svm.gamma);
            let cost = overrides.cost.unwrap_or(config.svm.cost);
            let model = svm::ovo_train(&set, gamma, cost, &smo, names)?;
            let sv_total: usize = model.machines.iter().map(|(_, m)| m.vectors.len()).sum();
            println!(
                "svm model: {} machines, {} support vectors, gamma={gamma}, C={cost}",
                model.machines.len(),
                sv_total
            );
            model.save(&model_path)
        }
        other => Err(Error::Config(format!(
            "unknown classifier {other:?} (expected knn, mlp or svm)"
        ))),
    }
}

fn parse_exp_range(text: &str) -> Result<Vec<f64>> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("bad exponent range {text:?}, expected lo..hi")))?;
    let lo: i32 = lo
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad exponent {lo:?}")))?;
    let hi: i32 = hi
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad exponent {hi:?}")))?;
    if lo > hi {
        return Err(Error::Config(format!("empty exponent range {text:?}")));
    }
    Ok((lo..=hi).map(|e| 2f64.powi(e)).collect())
}

fn parse_skip(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (g, c) = pair
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("bad skip cell {pair:?}")))?;
            let g = g
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad skip index {g:?}")))?;
            let c = c
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad skip index {c:?}")))?;
            Ok((g, c))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn grid_search(
    config: &PipelineConfig,
    features: PathBuf,
    out: PathBuf,
    gamma_exp: &str,
    cost_exp: &str,
    holdout: f64,
    folds: Option<usize>,
    skip: Option<String>,
) -> Result<()> {
    let set = load_labeled(config, &features)?;
    let cfg = GridSearchConfig {
        gammas: parse_exp_range(gamma_exp)?,
        costs: parse_exp_range(cost_exp)?,
        eval: match folds {
            Some(folds) => GridEval::KFold { folds },
            None => GridEval::Holdout { fraction: holdout },
        },
        seed: config.seed,
        skip: skip.as_deref().map(parse_skip).transpose()?.unwrap_or_default(),
        smo: SmoConfig {
            tol: config.svm.tol,
            ..SmoConfig::default()
        },
    };
    let report = svm::grid_search(&set, &cfg)?;
    fs::write(&out, report.to_csv()).map_err(|e| Error::io(&out, e))?;
    println!(
        "best accuracy {:.2}% at gamma={} C={}",
        report.best.2,
        report.best_gamma(),
        report.best_cost()
    );
    Ok(())
}

fn classify(
    config: &PipelineConfig,
    features: PathBuf,
    model_path: PathBuf,
    out: PathBuf,
) -> Result<()> {
    let model = TrainedModel::load(&model_path)?;
    let variant = config.variant()?;
    let (features, labels) = feature_io::read_csv(&features, Some(variant))
        .or_else(|_| feature_io::read_csv(&features, None))?;
    let rows: Vec<(usize, Vec<f64>)> = features
        .par_iter()
        .map(|f| model.classify(&f.descriptor.values))
        .collect::<Result<_>>()?;
    let mut text = String::from("x,y,label,predicted");
    for c in 0..model.class_count() {
        write!(text, ",s{c}").expect("string write");
    }
    text.push('\n');
    for ((f, label), (predicted, scores)) in features.iter().zip(&labels).zip(&rows) {
        write!(
            text,
            "{:.8e},{:.8e},{label},{predicted}",
            f.point.x, f.point.y
        )
        .expect("string write");
        for s in scores {
            write!(text, ",{s:.8e}").expect("string write");
        }
        text.push('\n');
    }
    fs::write(&out, text).map_err(|e| Error::io(&out, e))
}

#[allow(clippy::too_many_arguments)]
fn segment(
    config: &PipelineConfig,
    image: PathBuf,
    model_path: PathBuf,
    overlay: Option<PathBuf>,
    labels: Option<PathBuf>,
    radius_factor: Option<f64>,
    min_weight: Option<f64>,
) -> Result<()> {
    let mut cfg = config.clone();
    if let Some(r) = radius_factor {
        cfg.splat.radius_factor = r;
    }
    if let Some(w) = min_weight {
        cfg.splat.min_weight = w;
    }
    cfg.validate()?;
    let model = TrainedModel::load(&model_path)?;
    let gray = imaging::pnm::read_gray(&image)?;
    let seg = pipeline::segment_image(&gray, &model, &cfg)?;
    if let Some(path) = labels {
        pipeline::write_label_map(path, &seg)?;
    }
    if let Some(path) = overlay {
        let rgb = imaging::pnm::read_rgb(&image)?;
        let blended = pipeline::overlay_for(&rgb, &seg)?;
        imaging::pnm::write_ppm(path, &blended)?;
    }
    Ok(())
}

fn evaluate(
    config: &PipelineConfig,
    manifest: PathBuf,
    model_path: PathBuf,
    out: Option<PathBuf>,
    label: Option<String>,
) -> Result<()> {
    let model = TrainedModel::load(&model_path)?;
    let pairs = dataset::read_manifest(&manifest)?;
    let row_label = label.unwrap_or_else(|| format!("{}-{}", config.variant, model.kind()));
    let report = pipeline::per_image_report(&model, &pairs, config, &row_label)?;
    if let Some(path) = out {
        let mut csv = terraseg_core::evaluation::EvalReport::csv_header(report.rates.len());
        csv.push_str(&report.csv_row());
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    }
    let width = report.row_label.len().max(12);
    println!("{}", report.text_row(width));
    Ok(())
}

fn reduce_cmd(
    config: &PipelineConfig,
    features: PathBuf,
    method: &str,
    out: PathBuf,
    dense_split: Option<usize>,
    hidden: usize,
    epochs: usize,
) -> Result<()> {
    let variant = config.variant()?;
    let (features, labels) = feature_io::read_csv(&features, Some(variant))
        .or_else(|_| feature_io::read_csv(&features, None))?;
    if features.is_empty() {
        return Err(Error::Data("nothing to reduce".into()));
    }
    let descriptors: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.descriptor.values.clone())
        .collect();
    let coords: Vec<Vec<f64>> = match method {
        "pca" => {
            let model = reduce::pca_fit(&descriptors, hidden)?;
            reduce::pca_transform(&model, &descriptors)?
        }
        "bottleneck" => {
            let model = reduce::bottleneck_fit(&descriptors, hidden, epochs, config.seed)?;
            descriptors
                .iter()
                .map(|d| model.encode(d))
                .collect::<Result<_>>()?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown reduction {other:?} (expected pca or bottleneck)"
            )))
        }
    };

    let dense_flags: Option<Vec<bool>> = match dense_split {
        Some(n) => {
            let usable: Vec<usize> = labels
                .iter()
                .map(|&l| {
                    usize::try_from(l).map_err(|_| {
                        Error::Data("dense-split needs labeled features".into())
                    })
                })
                .collect::<Result<_>>()?;
            let class_count = usable.iter().max().map_or(1, |m| m + 1);
            let set = LabeledFeatureSet::new(features.clone(), usable, class_count)?;
            Some(dataset::dense_flags(&set, n)?)
        }
        None => None,
    };

    let mut text = String::new();
    for c in 0..coords[0].len() {
        if c > 0 {
            text.push(',');
        }
        write!(text, "c{c}").expect("string write");
    }
    text.push_str(",label");
    if dense_flags.is_some() {
        text.push_str(",dense");
    }
    text.push('\n');
    for (i, (coord, label)) in coords.iter().zip(&labels).enumerate() {
        for (j, c) in coord.iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            write!(text, "{c:.8e}").expect("string write");
        }
        write!(text, ",{label}").expect("string write");
        if let Some(flags) = &dense_flags {
            write!(text, ",{}", u8::from(flags[i])).expect("string write");
        }
        text.push('\n');
    }
    fs::write(&out, text).map_err(|e| Error::io(&out, e))
}

fn parse_pair(text: &str, what: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("bad {what} {text:?}, expected WxH")))?;
    let a = a
        .parse()
        .map_err(|_| Error::Config(format!("bad {what} {text:?}")))?;
    let b = b
        .parse()
        .map_err(|_| Error::Config(format!("bad {what} {text:?}")))?;
    Ok((a, b))
}

fn synth(
    config: &PipelineConfig,
    out: PathBuf,
    scenes: usize,
    train: usize,
    size: &str,
    tiles: &str,
    ignore_margin: usize,
) -> Result<()> {
    let (width, height) = parse_pair(size, "size")?;
    let (tiles_x, tiles_y) = parse_pair(tiles, "tile grid")?;
    let spec = SynthSpec {
        scenes,
        train_scenes: train,
        width,
        height,
        tiles_x,
        tiles_y,
        ignore_margin,
        seed: config.seed,
    };
    let output = generate_corpus(&out, &spec)?;
    println!(
        "wrote {} scenes; train manifest {}, test manifest {}",
        spec.scenes,
        output.train_manifest.display(),
        output.test_manifest.display()
    );
    Ok(())
}
