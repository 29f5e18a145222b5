//! Synthetic texture corpus: five texture families standing in for the five
//! terrain classes, composed into tiled scenes with exact masks. Used by the
//! end-to-end benchmark and the demos.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::IGNORE;
use crate::error::{Error, Result};
use crate::imaging::{pnm, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub scenes: usize,
    /// Leading scenes listed in the train manifest; the rest go to test.
    pub train_scenes: usize,
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Half-width of the IGNORE band along interior tile seams; mixed-texture
    /// borders carry no trustworthy label.
    pub ignore_margin: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            scenes: 30,
            train_scenes: 20,
            width: 256,
            height: 256,
            tiles_x: 2,
            tiles_y: 2,
            ignore_margin: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub images: Vec<PathBuf>,
    pub masks: Vec<PathBuf>,
}

/// Separable Gaussian blur with per-axis widths, clamped at the borders.
fn blur_xy(data: &[f64], w: usize, h: usize, sigma_x: f64, sigma_y: f64) -> Vec<f64> {
    let kernel_for = |sigma: f64| -> (i64, Vec<f64>) {
        let radius = (3.0 * sigma).ceil().max(1.0) as i64;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        (radius, kernel)
    };
    let (rx, kx) = kernel_for(sigma_x);
    let norm_x: f64 = kx.iter().sum();
    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kx.iter().enumerate() {
                let sx = (x as i64 + ki as i64 - rx).clamp(0, w as i64 - 1) as usize;
                acc += k * data[y * w + sx];
            }
            horizontal[y * w + x] = acc / norm_x;
        }
    }
    let (ry, ky) = kernel_for(sigma_y);
    let norm_y: f64 = ky.iter().sum();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in ky.iter().enumerate() {
                let sy = (y as i64 + ki as i64 - ry).clamp(0, h as i64 - 1) as usize;
                acc += k * horizontal[sy * w + x];
            }
            out[y * w + x] = acc / norm_y;
        }
    }
    out
}

fn blur(data: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    blur_xy(data, w, h, sigma, sigma)
}

fn noise(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Rescale to the target mean and contrast: three standard deviations map
/// to the amplitude, excursions clamp.
fn normalize(data: &mut [f64], base: f64, amplitude: f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let std = (data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
        .sqrt()
        .max(1e-12);
    for v in data.iter_mut() {
        *v = (base + amplitude * (*v - mean) / (3.0 * std)).clamp(base - amplitude, base + amplitude);
    }
}

/// Fine band-limited noise: small isotropic grain.
fn texture_grass(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let raw = noise(rng, w, h);
    let fine = blur(&raw, w, h, 0.8);
    let coarse = blur(&raw, w, h, 2.0);
    let mut band: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| f - c).collect();
    normalize(&mut band, 0.45, 0.3);
    band
}

/// Sparse dark pebbles: sharp round dots on a light ground. Polarity and
/// sharpness keep them apart from the soft bright sky blobs, sparseness
/// from the dense grass grain.
fn texture_gravel(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.72; w * h];
    let dots = (w * h / 550).max(8);
    for _ in 0..dots {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let radius = rng.gen_range(4.0..7.0);
        let depth = rng.gen_range(0.4..0.5);
        let x0 = (cx - radius - 2.0).floor().max(0.0) as usize;
        let x1 = ((cx + radius + 2.0).ceil() as usize).min(w - 1);
        let y0 = (cy - radius - 2.0).floor().max(0.0) as usize;
        let y1 = ((cy + radius + 2.0).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                // Smooth rim over ~1.5 px.
                let t = ((radius - d) / 1.5).clamp(0.0, 1.0);
                let v = 0.72 - depth * t;
                let cell = &mut out[y * w + x];
                if v < *cell {
                    *cell = v;
                }
            }
        }
    }
    out
}

/// Oriented stripes at a per-tile angle, broken into dashes; a pure grating
/// would defeat the determinant-of-Hessian detector.
fn texture_trees(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    // Grating direction within 45 degrees of horizontal: the stripe
    // lines themselves then run within 45 degrees of vertical, never
    // approaching the horizontal mud smears.
    let angle = rng.gen_range(-45f64..45f64).to_radians();
    let wavelength = rng.gen_range(7.0..11.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let beads = blur(&noise(rng, w, h), w, h, 2.5);
    let (sin_a, cos_a) = angle.sin_cos();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let t = x as f64 * cos_a + y as f64 * sin_a;
            let stripe = (std::f64::consts::TAU * t / wavelength + phase).sin();
            let dash = if beads[y * w + x] > 0.0 { 1.0 } else { 0.25 };
            out[y * w + x] = 0.5 + 0.38 * stripe * dash;
        }
    }
    out
}

/// Low-frequency horizontally smeared blotches; the near-horizontal
/// anisotropy separates mud streaks from every other family (tree stripes
/// never run close to horizontal).
fn texture_dirt(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let base = noise(rng, w, h);
    let mut streaks = blur_xy(&base, w, h, 8.0, 3.0);
    normalize(&mut streaks, 0.42, 0.34);
    streaks
}

/// Smooth vertical gradient with a few soft cloud blobs.
fn texture_sky(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let top = rng.gen_range(0.82..0.9);
    let bottom = rng.gen_range(0.6..0.68);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let t = y as f64 / (h.max(2) - 1) as f64;
        let v = top + (bottom - top) * t;
        for x in 0..w {
            out[y * w + x] = v;
        }
    }
    let clouds = (w * h / 1000).clamp(8, 32);
    for _ in 0..clouds {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = rng.gen_range(0.0..h as f64);
        let sigma = rng.gen_range(4.0..8.0);
        let amp = rng.gen_range(0.12..0.2);
        for y in 0..h {
            for x in 0..w {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                out[y * w + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    for v in out.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

fn render_texture(class: usize, rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    match class {
        0 => texture_grass(rng, w, h),
        1 => texture_gravel(rng, w, h),
        2 => texture_trees(rng, w, h),
        3 => texture_dirt(rng, w, h),
        _ => texture_sky(rng, w, h),
    }
}

/// One scene plus its exact mask.
pub fn generate_scene(spec: &SynthSpec, scene_index: usize) -> (GrayImage, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(
        spec.seed
            .wrapping_add((scene_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let (w, h) = (spec.width, spec.height);
    let tiles = spec.tiles_x * spec.tiles_y;

    // Distinct classes per scene while tiles allow it, cycling otherwise.
    let mut classes: Vec<usize> = (0..5).collect();
    classes.shuffle(&mut rng);
    let tile_classes: Vec<usize> = (0..tiles).map(|t| classes[t % 5]).collect();

    let mut image = vec![0.0; w * h];
    let mut mask = vec![0u8; w * h];
    for ty in 0..spec.tiles_y {
        for tx in 0..spec.tiles_x {
            let class = tile_classes[ty * spec.tiles_x + tx];
            let x0 = tx * w / spec.tiles_x;
            let x1 = (tx + 1) * w / spec.tiles_x;
            let y0 = ty * h / spec.tiles_y;
            let y1 = (ty + 1) * h / spec.tiles_y;
            let (tw, th) = (x1 - x0, y1 - y0);
            let texture = render_texture(class, &mut rng, tw, th);
            for y in y0..y1 {
                for x in x0..x1 {
                    image[y * w + x] = texture[(y - y0) * tw + (x - x0)];
                    mask[y * w + x] = class as u8;
                }
            }
        }
    }

    // IGNORE bands along interior seams: features there mix textures.
    let margin = spec.ignore_margin as i64;
    if margin > 0 {
        for tx in 1..spec.tiles_x {
            let seam = (tx * w / spec.tiles_x) as i64;
            for y in 0..h {
                for x in (seam - margin).max(0)..(seam + margin).min(w as i64) {
                    mask[y * w + x as usize] = IGNORE;
                }
            }
        }
        for ty in 1..spec.tiles_y {
            let seam = (ty * h / spec.tiles_y) as i64;
            for y in (seam - margin).max(0)..(seam + margin).min(h as i64) {
                for x in 0..w {
                    mask[y as usize * w + x] = IGNORE;
                }
            }
        }
    }

    let image = GrayImage::new(w, h, image).expect("non-empty scene");
    (image, mask)
}

/// Write the whole corpus: scene and mask PGMs plus train/test manifests.
pub fn generate_corpus(dir: impl AsRef<Path>, spec: &SynthSpec) -> Result<SynthOutput> {
    let dir = dir.as_ref();
    if spec.scenes == 0 || spec.train_scenes >= spec.scenes {
        return Err(Error::Config(
            "need at least one train and one test scene".into(),
        ));
    }
    if spec.width < 64 || spec.height < 64 {
        return Err(Error::Config("scenes must be at least 64x64".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut images = Vec::new();
    let mut masks = Vec::new();
    let mut train_lines = String::new();
    let mut test_lines = String::new();
    for s in 0..spec.scenes {
        let (image, mask) = generate_scene(spec, s);
        let image_name = format!("scene_{s:03}.pgm");
        let mask_name = format!("scene_{s:03}_mask.pgm");
        let image_path = dir.join(&image_name);
        let mask_path = dir.join(&mask_name);
        pnm::write_gray(&image_path, &image)?;
        pnm::write_pgm(&mask_path, spec.width, spec.height, &mask)?;
        let line = format!("{image_name}\t{mask_name}\n");
        if s < spec.train_scenes {
            train_lines.push_str(&line);
        } else {
            test_lines.push_str(&line);
        }
        images.push(image_path);
        masks.push(mask_path);
    }
    let train_manifest = dir.join("train.manifest");
    let test_manifest = dir.join("test.manifest");
    fs::write(&train_manifest, train_lines).map_err(|e| Error::io(&train_manifest, e))?;
    fs::write(&test_manifest, test_lines).map_err(|e| Error::io(&test_manifest, e))?;

    let mut summary = String::new();
    writeln!(
        summary,
        "scenes {} train {} size {}x{} seed {}",
        spec.scenes, spec.train_scenes, spec.width, spec.height, spec.seed
    )
    .expect("string write");
    let summary_path = dir.join("corpus.txt");
    fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;

    Ok(SynthOutput {
        train_manifest,
        test_manifest,
        images,
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;
    use crate::dataset::{label_features, LabelMask};
    use crate::pipeline::extract_thinned;

    #[test]
    fn scenes_are_deterministic() {
        let spec = SynthSpec {
            scenes: 2,
            train_scenes: 1,
            width: 96,
            height: 96,
            ..SynthSpec::default()
        };
        let (a, mask_a) = generate_scene(&spec, 0);
        let (b, mask_b) = generate_scene(&spec, 0);
        assert_eq!(a, b);
        assert_eq!(mask_a, mask_b);
        let (c, _) = generate_scene(&spec, 1);
        assert_ne!(a, c);
    }

    #[test]
    fn corpus_files_and_manifests_exist() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            scenes: 3,
            train_scenes: 2,
            width: 96,
            height: 96,
            ..SynthSpec::default()
        };
        let out = generate_corpus(dir.path(), &spec).unwrap();
        assert_eq!(out.images.len(), 3);
        let train = std::fs::read_to_string(&out.train_manifest).unwrap();
        assert_eq!(train.lines().count(), 2);
        let test = std::fs::read_to_string(&out.test_manifest).unwrap();
        assert_eq!(test.lines().count(), 1);
        for path in out.images.iter().chain(&out.masks) {
            assert!(path.exists(), "{path:?}");
        }
    }

    #[test]
    fn every_texture_family_yields_labeled_features() {
        // Each class must contribute features under the default detector,
        // otherwise downstream training would see empty classes.
        let spec = SynthSpec {
            scenes: 10,
            train_scenes: 8,
            width: 192,
            height: 192,
            ..SynthSpec::default()
        };
        let cfg = PipelineConfig::default();
        let mut counts = vec![0usize; 5];
        for s in 0..spec.scenes {
            let (image, mask) = generate_scene(&spec, s);
            let features = extract_thinned(&image, &cfg).unwrap();
            let mask = LabelMask::new(image.width, image.height, mask).unwrap();
            let set = label_features(&features, &mask, 5).unwrap();
            for (c, n) in set.class_counts().into_iter().enumerate() {
                counts[c] += n;
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            assert!(n >= 10, "class {c} produced only {n} features: {counts:?}");
        }
    }
}
