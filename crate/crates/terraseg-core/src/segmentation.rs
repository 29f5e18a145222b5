//! Sparse-to-dense segmentation: likelihood splatting, per-pixel argmax
//! labeling and overlay rendering.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::RgbImage;

/// Label value for pixels no feature reached.
pub const UNKNOWN: u8 = 255;

/// Default class palette: grass green, gravel orange, trees blue, dirt/mud
/// brown, sky cyan.
pub const DEFAULT_PALETTE: [[u8; 3]; 5] = [
    [0, 170, 0],
    [255, 140, 0],
    [40, 60, 255],
    [139, 69, 19],
    [0, 220, 220],
];

/// Gray tint for UNKNOWN pixels.
pub const UNKNOWN_COLOR: [u8; 3] = [128, 128, 128];

/// A classified feature ready for splatting: position, scale and its
/// non-negative per-class score vector.
#[derive(Debug, Clone)]
pub struct ScoredFeature {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub scores: Vec<f64>,
}

/// Per-pixel class-score accumulator plus the total deposited weight.
#[derive(Debug, Clone)]
pub struct LikelihoodMap {
    pub width: usize,
    pub height: usize,
    pub class_count: usize,
    /// Row-major, `class_count` scores per pixel.
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LikelihoodMap {
    pub fn zeroed(width: usize, height: usize, class_count: usize) -> Self {
        Self {
            width,
            height,
            class_count,
            scores: vec![0.0; width * height * class_count],
            weights: vec![0.0; width * height],
        }
    }

    pub fn pixel_scores(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.class_count;
        &self.scores[base..base + self.class_count]
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }
}

/// Per-pixel labels; [`UNKNOWN`] where the accumulated weight stayed below
/// the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl SegmentationMap {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }
}

/// Deposit every feature's score vector onto the pixels within three
/// standard deviations of its center, Gaussian-weighted with
/// `sigma = radius_factor * scale`. Parallel over rows; each row gathers
/// from all features in input order, so the result is deterministic.
pub fn splat(
    features: &[ScoredFeature],
    dims: (usize, usize),
    class_count: usize,
    radius_factor: f64,
) -> LikelihoodMap {
    let (width, height) = dims;
    let mut map = LikelihoodMap::zeroed(width, height, class_count);
    for f in features {
        assert_eq!(f.scores.len(), class_count, "score vector width");
        assert!(
            f.scores.iter().all(|&s| s >= 0.0),
            "negative score reached the splatter"
        );
    }
    // Row bands are written by exactly one task each.
    let score_rows: Vec<&mut [f64]> = map.scores.chunks_mut(width * class_count).collect();
    let weight_rows: Vec<&mut [f64]> = map.weights.chunks_mut(width).collect();
    score_rows
        .into_par_iter()
        .zip(weight_rows)
        .enumerate()
        .for_each(|(y, (score_row, weight_row))| {
            let yf = y as f64;
            for f in features {
                let sigma = radius_factor * f.scale;
                if sigma <= 0.0 {
                    continue;
                }
                let radius = 3.0 * sigma;
                if (yf - f.y).abs() > radius {
                    continue;
                }
                let x_lo = ((f.x - radius).floor().max(0.0)) as usize;
                let x_hi = ((f.x + radius).ceil() as usize).min(width - 1);
                let inv = 1.0 / (2.0 * sigma * sigma);
                for x in x_lo..=x_hi {
                    let d2 = (x as f64 - f.x).powi(2) + (yf - f.y).powi(2);
                    if d2 > radius * radius {
                        continue;
                    }
                    let w = (-d2 * inv).exp();
                    weight_row[x] += w;
                    let base = x * class_count;
                    for (c, &s) in f.scores.iter().enumerate() {
                        score_row[base + c] += s * w;
                    }
                }
            }
        });
    map
}

/// Per pixel: [`UNKNOWN`] when the deposited weight is below `min_weight`,
/// otherwise the argmax class (ties to the lowest index).
pub fn to_labels(map: &LikelihoodMap, min_weight: f64) -> SegmentationMap {
    let labels = (0..map.width * map.height)
        .map(|i| {
            if map.weights[i] < min_weight {
                return UNKNOWN;
            }
            let base = i * map.class_count;
            let scores = &map.scores[base..base + map.class_count];
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate().skip(1) {
                if s > scores[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    SegmentationMap {
        width: map.width,
        height: map.height,
        labels,
    }
}

/// Alpha-blend the class palette over the source at 50% opacity; UNKNOWN
/// pixels blend with gray.
pub fn render_overlay(
    image: &RgbImage,
    seg: &SegmentationMap,
    palette: &[[u8; 3]],
) -> Result<RgbImage> {
    if image.width != seg.width || image.height != seg.height {
        return Err(Error::DimensionMismatch {
            expected: image.width * image.height,
            got: seg.width * seg.height,
        });
    }
    let mut data = Vec::with_capacity(image.data.len());
    for (i, &label) in seg.labels.iter().enumerate() {
        let color = if label == UNKNOWN {
            UNKNOWN_COLOR
        } else {
            *palette
                .get(usize::from(label))
                .unwrap_or(&UNKNOWN_COLOR)
        };
        for ch in 0..3 {
            let src = f64::from(image.data[3 * i + ch]);
            let pal = f64::from(color[ch]);
            data.push((0.5 * src + 0.5 * pal).round() as u8);
        }
    }
    RgbImage::new(image.width, image.height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feature(x: f64, y: f64, scale: f64, scores: Vec<f64>) -> ScoredFeature {
        ScoredFeature { x, y, scale, scores }
    }

    #[test]
    fn no_features_leave_the_map_empty() {
        let map = splat(&[], (8, 8), 5, 1.0);
        assert!(map.scores.iter().all(|&s| s == 0.0));
        assert!(map.weights.iter().all(|&w| w == 0.0));
        let seg = to_labels(&map, 1e-3);
        assert!(seg.labels.iter().all(|&l| l == UNKNOWN));
    }

    #[test]
    fn single_feature_peaks_at_its_center_pixel() {
        let map = splat(&[feature(5.2, 6.8, 2.0, vec![1.0, 0.0])], (16, 16), 2, 1.0);
        let peak = map.weight(5, 7);
        for y in 0..16 {
            for x in 0..16 {
                assert!(map.weight(x, y) <= peak, "({x},{y})");
            }
        }
        assert!(peak > 0.0);
    }

    #[test]
    fn distant_features_label_their_own_neighborhoods() {
        let features = vec![
            feature(8.0, 8.0, 2.0, vec![1.0, 0.0]),
            feature(40.0, 8.0, 2.0, vec![0.0, 1.0]),
        ];
        let map = splat(&features, (48, 16), 2, 1.0);
        let seg = to_labels(&map, 1e-6);
        assert_eq!(seg.get(8, 8), 0);
        assert_eq!(seg.get(40, 8), 1);
    }

    #[test]
    fn splatting_is_additive() {
        let a = vec![feature(10.0, 10.0, 2.5, vec![0.5, 0.2])];
        let b = vec![feature(14.0, 9.0, 1.5, vec![0.1, 0.9])];
        let both: Vec<ScoredFeature> = a.iter().chain(b.iter()).cloned().collect();
        let map_a = splat(&a, (24, 24), 2, 1.0);
        let map_b = splat(&b, (24, 24), 2, 1.0);
        let map_ab = splat(&both, (24, 24), 2, 1.0);
        for i in 0..map_ab.scores.len() {
            let sum = map_a.scores[i] + map_b.scores[i];
            assert!((map_ab.scores[i] - sum).abs() <= 1e-9);
        }
        for i in 0..map_ab.weights.len() {
            let sum = map_a.weights[i] + map_b.weights[i];
            assert!((map_ab.weights[i] - sum).abs() <= 1e-9);
        }
    }

    #[test]
    #[should_panic(expected = "negative score")]
    fn negative_scores_are_rejected() {
        splat(&[feature(4.0, 4.0, 1.0, vec![-0.1, 0.5])], (8, 8), 2, 1.0);
    }

    #[test]
    fn to_labels_picks_argmax_with_low_tie() {
        let mut map = LikelihoodMap::zeroed(2, 1, 5);
        map.weights = vec![1.0, 1.0];
        map.scores[..5].copy_from_slice(&[0.2, 0.7, 0.0, 0.0, 0.1]);
        // Exact tie between classes 1 and 3.
        map.scores[5..].copy_from_slice(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        let seg = to_labels(&map, 1e-3);
        assert_eq!(seg.get(0, 0), 1);
        assert_eq!(seg.get(1, 0), 1);
    }

    #[test]
    fn to_labels_is_idempotent_on_the_same_map() {
        let features = vec![
            feature(3.0, 3.0, 1.0, vec![0.9, 0.1]),
            feature(9.0, 9.0, 2.0, vec![0.2, 0.3]),
        ];
        let map = splat(&features, (12, 12), 2, 1.0);
        assert_eq!(to_labels(&map, 1e-3), to_labels(&map, 1e-3));
    }

    #[test]
    fn nearby_pixels_inherit_the_feature_class() {
        // Isolated features: every labeled pixel within 10 px of a feature
        // center must carry that feature's class.
        let features = vec![
            feature(20.0, 20.0, 3.0, vec![1.0, 0.0, 0.0]),
            feature(70.0, 20.0, 3.0, vec![0.0, 1.0, 0.0]),
            feature(45.0, 70.0, 3.0, vec![0.0, 0.0, 1.0]),
        ];
        let map = splat(&features, (96, 96), 3, 1.0);
        let seg = to_labels(&map, 1e-3);
        let mut checked = 0;
        let mut correct = 0;
        for (fi, f) in features.iter().enumerate() {
            for dy in -10i64..=10 {
                for dx in -10i64..=10 {
                    let x = (f.x as i64 + dx) as usize;
                    let y = (f.y as i64 + dy) as usize;
                    let label = seg.get(x, y);
                    if label != UNKNOWN {
                        checked += 1;
                        if usize::from(label) == fi {
                            correct += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 0);
        let share = correct as f64 / checked as f64;
        assert!(share >= 0.95, "share {share}");
    }

    #[test]
    fn overlay_tints_unknown_gray() {
        let image = RgbImage::new(2, 1, vec![200, 200, 200, 200, 200, 200]).unwrap();
        let seg = SegmentationMap {
            width: 2,
            height: 1,
            labels: vec![UNKNOWN, UNKNOWN],
        };
        let overlay = render_overlay(&image, &seg, &DEFAULT_PALETTE).unwrap();
        assert_eq!(overlay.pixel(0, 0), [164, 164, 164]);
        assert_eq!(overlay.pixel(1, 0), [164, 164, 164]);
    }

    #[test]
    fn overlay_blend_arithmetic() {
        // Pure white source, pure red class at 50%: (255, 128, 128).
        let image = RgbImage::new(1, 1, vec![255, 255, 255]).unwrap();
        let seg = SegmentationMap {
            width: 1,
            height: 1,
            labels: vec![0],
        };
        let overlay = render_overlay(&image, &seg, &[[255, 0, 0]]).unwrap();
        assert_eq!(overlay.pixel(0, 0), [255, 128, 128]);
    }

    #[test]
    fn palette_lookup_is_total() {
        let image = RgbImage::new(3, 1, vec![0; 9]).unwrap();
        // A label beyond the palette falls back to the UNKNOWN tint rather
        // than panicking.
        let seg = SegmentationMap {
            width: 3,
            height: 1,
            labels: vec![0, 4, 9],
        };
        let overlay = render_overlay(&image, &seg, &DEFAULT_PALETTE).unwrap();
        assert_eq!(overlay.pixel(2, 0), [64, 64, 64]);
    }

    #[test]
    fn overlay_rejects_dimension_mismatch() {
        let image = RgbImage::new(2, 2, vec![0; 12]).unwrap();
        let seg = SegmentationMap {
            width: 1,
            height: 1,
            labels: vec![0],
        };
        assert!(render_overlay(&image, &seg, &DEFAULT_PALETTE).is_err());
    }
}
