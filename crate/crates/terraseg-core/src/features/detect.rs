//! Fast-Hessian blob detection over the integral image.

use nalgebra::{Matrix3, Vector3};

use super::{DetectorConfig, InterestPoint};
use crate::error::{Error, Result};
use crate::imaging::{box_sum, IntegralImage, Rect};

/// Normalized Fast-Hessian determinant at pixel `(x, y)` for a box filter of
/// side `filter_size` (9 + 6k). Second derivatives are approximated by box
/// filters over the integral image and scaled by the filter area; the mixed
/// term carries the usual 0.9 balancing weight.
pub fn hessian_response(ii: &IntegralImage, x: i64, y: i64, filter_size: i64) -> Result<f64> {
    if filter_size < 9 || (filter_size - 9) % 6 != 0 {
        return Err(Error::BadFilterSize(filter_size));
    }
    let lobe = filter_size / 3;
    let border = (filter_size - 1) / 2;
    let inv_area = 1.0 / (filter_size * filter_size) as f64;

    let dxx = box_sum(ii, Rect::new(x - border, y - lobe + 1, filter_size, 2 * lobe - 1))
        - 3.0 * box_sum(ii, Rect::new(x - lobe / 2, y - lobe + 1, lobe, 2 * lobe - 1));
    let dyy = box_sum(ii, Rect::new(x - lobe + 1, y - border, 2 * lobe - 1, filter_size))
        - 3.0 * box_sum(ii, Rect::new(x - lobe + 1, y - lobe / 2, 2 * lobe - 1, lobe));
    let dxy = box_sum(ii, Rect::new(x + 1, y - lobe, lobe, lobe))
        + box_sum(ii, Rect::new(x - lobe, y + 1, lobe, lobe))
        - box_sum(ii, Rect::new(x - lobe, y - lobe, lobe, lobe))
        - box_sum(ii, Rect::new(x + 1, y + 1, lobe, lobe));

    let dxx = dxx * inv_area;
    let dyy = dyy * inv_area;
    let dxy = dxy * inv_area;
    Ok(dxx * dyy - (0.9 * dxy) * (0.9 * dxy))
}

/// One scale-space slice: responses sampled every `step` pixels.
struct ResponseLayer {
    width: usize,
    height: usize,
    step: usize,
    filter_size: i64,
    responses: Vec<f64>,
}

impl ResponseLayer {
    fn build(ii: &IntegralImage, step: usize, filter_size: i64) -> Result<Self> {
        let width = ii.width / step;
        let height = ii.height / step;
        let mut responses = vec![0.0; width * height];
        for ly in 0..height {
            for lx in 0..width {
                responses[ly * width + lx] =
                    hessian_response(ii, (lx * step) as i64, (ly * step) as i64, filter_size)?;
            }
        }
        Ok(Self {
            width,
            height,
            step,
            filter_size,
            responses,
        })
    }

    #[inline]
    fn at(&self, lx: usize, ly: usize) -> f64 {
        self.responses[ly * self.width + lx]
    }
}

/// Strict 3x3x3 maximum across (x, y, scale) within one octave.
fn is_local_maximum(layers: [&ResponseLayer; 3], lx: usize, ly: usize) -> bool {
    let center = layers[1].at(lx, ly);
    for (li, layer) in layers.iter().enumerate() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if li == 1 && dx == 0 && dy == 0 {
                    continue;
                }
                let nx = (lx as i64 + dx) as usize;
                let ny = (ly as i64 + dy) as usize;
                if layer.at(nx, ny) >= center {
                    return false;
                }
            }
        }
    }
    true
}

/// Quadratic interpolation of the maximum; `None` when the 3x3 system is
/// singular or the offset leaves the sampled cell.
fn interpolate(layers: [&ResponseLayer; 3], lx: usize, ly: usize) -> Option<Vector3<f64>> {
    let v = |l: usize, dx: i64, dy: i64| -> f64 {
        layers[l].at((lx as i64 + dx) as usize, (ly as i64 + dy) as usize)
    };
    let dx = (v(1, 1, 0) - v(1, -1, 0)) / 2.0;
    let dy = (v(1, 0, 1) - v(1, 0, -1)) / 2.0;
    let ds = (v(2, 0, 0) - v(0, 0, 0)) / 2.0;

    let c = v(1, 0, 0);
    let dxx = v(1, 1, 0) + v(1, -1, 0) - 2.0 * c;
    let dyy = v(1, 0, 1) + v(1, 0, -1) - 2.0 * c;
    let dss = v(2, 0, 0) + v(0, 0, 0) - 2.0 * c;
    let dxy = (v(1, 1, 1) - v(1, -1, 1) - v(1, 1, -1) + v(1, -1, -1)) / 4.0;
    let dxs = (v(2, 1, 0) - v(2, -1, 0) - v(0, 1, 0) + v(0, -1, 0)) / 4.0;
    let dys = (v(2, 0, 1) - v(2, 0, -1) - v(0, 0, 1) + v(0, 0, -1)) / 4.0;

    let hessian = Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
    let gradient = Vector3::new(dx, dy, ds);
    let offset = hessian.lu().solve(&(-gradient))?;
    if offset.iter().any(|o| o.abs() > 0.5) {
        return None;
    }
    Some(offset)
}

/// Scale-space interest-point detection: 3x3x3 maxima of the Fast-Hessian
/// determinant above the blob threshold, refined by quadratic interpolation.
/// Near-identical detections from overlapping octaves collapse to the
/// strongest one.
pub fn detect(ii: &IntegralImage, cfg: &DetectorConfig) -> Result<Vec<InterestPoint>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for octave in 0..cfg.octaves {
        let step = cfg.init_step << octave;
        if ii.width / step < 3 || ii.height / step < 3 {
            break;
        }
        let filter_step = 6 * (1i64 << octave);
        let base = filter_step + 3;
        let mut layers: Vec<ResponseLayer> = Vec::with_capacity(cfg.intervals);
        for interval in 0..cfg.intervals {
            layers.push(ResponseLayer::build(
                ii,
                step,
                base + interval as i64 * filter_step,
            )?);
        }
        for mid in 1..cfg.intervals - 1 {
            let triple = [&layers[mid - 1], &layers[mid], &layers[mid + 1]];
            collect_maxima(triple, cfg.blob_threshold, ii, &mut points);
        }
    }
    Ok(dedup(points))
}

fn collect_maxima(
    layers: [&ResponseLayer; 3],
    threshold: f64,
    ii: &IntegralImage,
    out: &mut Vec<InterestPoint>,
) {
    let mid = layers[1];
    // Candidates must keep the largest filter of the triple fully inside the
    // image: clipped boxes produce spurious responses at the borders.
    let margin = ((layers[2].filter_size + 1) / 2) as usize;
    let lo = margin.div_ceil(mid.step).max(1);
    let hi_x = ((ii.width - margin.min(ii.width)) / mid.step).min(mid.width.saturating_sub(1));
    let hi_y = ((ii.height - margin.min(ii.height)) / mid.step).min(mid.height.saturating_sub(1));
    if lo >= hi_x || lo >= hi_y {
        return;
    }
    for ly in lo..hi_y {
        for lx in lo..hi_x {
            let strength = mid.at(lx, ly);
            if strength <= threshold || !is_local_maximum(layers, lx, ly) {
                continue;
            }
            let Some(offset) = interpolate(layers, lx, ly) else {
                continue;
            };
            let step = mid.step as f64;
            let filter_step = (layers[2].filter_size - layers[1].filter_size) as f64;
            let x = (lx as f64 + offset[0]) * step;
            let y = (ly as f64 + offset[1]) * step;
            let filter = mid.filter_size as f64 + offset[2] * filter_step;
            out.push(InterestPoint {
                x: x.clamp(0.0, (ii.width - 1) as f64),
                y: y.clamp(0.0, (ii.height - 1) as f64),
                scale: 1.2 * filter / 9.0,
                strength,
                orientation: 0.0,
            });
        }
    }
}

/// Adjacent octaves evaluate overlapping filter sizes, so one blob can fire
/// twice at nearly the same position and scale. Keep the strongest of each
/// such pair; ordering is canonicalized afterwards.
fn dedup(mut points: Vec<InterestPoint>) -> Vec<InterestPoint> {
    points.sort_by(|a, b| {
        b.strength
            .total_cmp(&a.strength)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    let mut kept: Vec<InterestPoint> = Vec::with_capacity(points.len());
    for p in points {
        let duplicate = kept.iter().any(|q| {
            let (lo, hi) = if p.scale < q.scale {
                (p.scale, q.scale)
            } else {
                (q.scale, p.scale)
            };
            let r = 0.5 * lo;
            hi <= 1.5 * lo && (p.x - q.x).powi(2) + (p.y - q.y).powi(2) <= r * r
        });
        if !duplicate {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| {
        a.y.total_cmp(&b.y)
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{build_integral, GrayImage};

    fn constant(w: usize, h: usize, v: f64) -> IntegralImage {
        build_integral(&GrayImage::new(w, h, vec![v; w * h]).unwrap())
    }

    /// Gaussian blob rendered into a flat background.
    fn gaussian_blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> GrayImage {
        let mut img = GrayImage::new(w, h, vec![0.2; w * h]).unwrap();
        for y in 0..h {
            for x in 0..w {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                let v = 0.2 + 0.7 * (-d2 / (2.0 * sigma * sigma)).exp();
                img.set(x, y, v);
            }
        }
        img
    }

    #[test]
    fn response_rejects_bad_filter_size() {
        let ii = constant(32, 32, 0.5);
        assert!(matches!(
            hessian_response(&ii, 16, 16, 10),
            Err(Error::BadFilterSize(10))
        ));
        assert!(hessian_response(&ii, 16, 16, 15).is_ok());
    }

    #[test]
    fn response_zero_on_constant_image() {
        // Box sums cancel wherever the filter fits; only summed-area rounding
        // residue remains.
        let ii = constant(48, 48, 0.37);
        for &size in &[9i64, 15, 21, 27] {
            let border = (size + 1) / 2;
            for y in (border..48 - border).step_by(5) {
                for x in (border..48 - border).step_by(5) {
                    let r = hessian_response(&ii, x, y, size).unwrap();
                    assert!(r.abs() <= 1e-24, "size {size} at ({x},{y}): {r}");
                }
            }
        }
    }

    #[test]
    fn response_positive_on_centered_square_blob() {
        // Dark-on-light square of side ~ filter_size / 3.
        let size = 64usize;
        let mut img = GrayImage::new(size, size, vec![0.9; size * size]).unwrap();
        let filter = 15i64;
        let side = (filter / 3) as usize;
        let start = size / 2 - side / 2;
        for y in start..start + side {
            for x in start..start + side {
                img.set(x, y, 0.1);
            }
        }
        let ii = build_integral(&img);
        let c = (size / 2) as i64;
        let response = hessian_response(&ii, c, c, filter).unwrap();
        assert!(response > 0.0, "blob response {response}");
    }

    #[test]
    fn response_symmetric_under_mirror() {
        let img = gaussian_blob(48, 48, 17.0, 23.0, 3.0);
        let mut mirrored = img.clone();
        for y in 0..48 {
            for x in 0..48 {
                mirrored.set(47 - x, y, img.get(x, y));
            }
        }
        let ii = build_integral(&img);
        let mi = build_integral(&mirrored);
        for &size in &[9i64, 15] {
            for y in [10i64, 23, 30] {
                for x in [10i64, 17, 30] {
                    let a = hessian_response(&ii, x, y, size).unwrap();
                    let b = hessian_response(&mi, 47 - x, y, size).unwrap();
                    assert!((a - b).abs() <= 1e-12, "size {size} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn detect_constant_image_is_empty() {
        let ii = constant(64, 64, 0.5);
        let points = detect(&ii, &DetectorConfig::default()).unwrap();
        assert!(points.is_empty());
    }

    #[test]
    fn detect_single_gaussian_blob() {
        let img = gaussian_blob(96, 96, 48.0, 48.0, 4.0);
        let ii = build_integral(&img);
        let points = detect(&ii, &DetectorConfig::default()).unwrap();
        assert_eq!(points.len(), 1, "points: {points:?}");
        let p = &points[0];
        assert!((p.x - 48.0).abs() <= 2.0 && (p.y - 48.0).abs() <= 2.0);
        assert!(p.scale >= 2.0 && p.scale <= 8.0, "scale {}", p.scale);
    }

    #[test]
    fn detect_two_separated_blobs() {
        let mut img = gaussian_blob(128, 96, 32.0, 48.0, 4.0);
        let second = gaussian_blob(128, 96, 96.0, 48.0, 4.0);
        for y in 0..96 {
            for x in 64..128 {
                img.set(x, y, second.get(x, y));
            }
        }
        let ii = build_integral(&img);
        let points = detect(&ii, &DetectorConfig::default()).unwrap();
        assert_eq!(points.len(), 2, "points: {points:?}");
    }

    #[test]
    fn detection_count_non_increasing_in_threshold() {
        let mut img = gaussian_blob(96, 96, 30.0, 30.0, 3.0);
        let more = gaussian_blob(96, 96, 70.0, 60.0, 5.0);
        for y in 0..96 {
            for x in 48..96 {
                img.set(x, y, more.get(x, y));
            }
        }
        let ii = build_integral(&img);
        let mut last = usize::MAX;
        for threshold in [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
            let cfg = DetectorConfig {
                blob_threshold: threshold,
                ..DetectorConfig::default()
            };
            let count = detect(&ii, &cfg).unwrap().len();
            assert!(count <= last);
            last = count;
        }
    }

    #[test]
    fn detect_is_deterministic() {
        let img = gaussian_blob(96, 96, 40.0, 52.0, 4.0);
        let ii = build_integral(&img);
        let a = detect(&ii, &DetectorConfig::default()).unwrap();
        let b = detect(&ii, &DetectorConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
