//! SURF interest-point detection and the descriptor variants used by the
//! classifiers.

mod describe;
mod detect;
pub mod io;

pub use describe::{assign_orientation, describe};
pub use detect::{detect, hessian_response};

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, IntegralImage};

/// Detected blob with sub-pixel location.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestPoint {
    pub x: f64,
    pub y: f64,
    /// Characteristic scale in pixels (1.2 * filter_size / 9).
    pub scale: f64,
    /// Fast-Hessian determinant at the detection.
    pub strength: f64,
    /// Radians; 0 for upright variants.
    pub orientation: f64,
}

/// Descriptor layout. The upright variants skip orientation assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorVariant {
    /// Oriented 4x4 grid, (dx, dy, |dx|, |dy|) sums: 64 dims.
    Surf64,
    /// Upright 4x4 grid, 4 sums: 64 dims.
    USurf64,
    /// Upright 3x3 grid, 4 sums: 36 dims.
    USurf36,
    /// Upright 4x4 grid, (dx, dy) sums only: 32 dims.
    USurf32,
    /// Upright 4x4 grid, (|dx|, |dy|) sums only: 32 dims.
    USurf32Abs,
}

impl DescriptorVariant {
    pub const ALL: [DescriptorVariant; 5] = [
        DescriptorVariant::Surf64,
        DescriptorVariant::USurf64,
        DescriptorVariant::USurf36,
        DescriptorVariant::USurf32,
        DescriptorVariant::USurf32Abs,
    ];

    /// Number of sub-regions per grid axis.
    pub fn grid(self) -> usize {
        match self {
            DescriptorVariant::USurf36 => 3,
            _ => 4,
        }
    }

    /// Retained sums per sub-region.
    pub fn sums_per_region(self) -> usize {
        match self {
            DescriptorVariant::USurf32 | DescriptorVariant::USurf32Abs => 2,
            _ => 4,
        }
    }

    pub fn dims(self) -> usize {
        self.grid() * self.grid() * self.sums_per_region()
    }

    pub fn is_upright(self) -> bool {
        !matches!(self, DescriptorVariant::Surf64)
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorVariant::Surf64 => "surf64",
            DescriptorVariant::USurf64 => "usurf64",
            DescriptorVariant::USurf36 => "usurf36",
            DescriptorVariant::USurf32 => "usurf32",
            DescriptorVariant::USurf32Abs => "usurf32abs",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "surf64" => Ok(DescriptorVariant::Surf64),
            "usurf64" => Ok(DescriptorVariant::USurf64),
            "usurf36" => Ok(DescriptorVariant::USurf36),
            "usurf32" => Ok(DescriptorVariant::USurf32),
            "usurf32abs" => Ok(DescriptorVariant::USurf32Abs),
            other => Err(Error::Config(format!("unknown descriptor variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for DescriptorVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Region description around an interest point; unit Euclidean norm except
/// for the all-zero flat-region case.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub variant: DescriptorVariant,
    pub values: Vec<f64>,
}

/// An interest point together with its descriptor: the unit that flows
/// through the whole pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub point: InterestPoint,
    pub descriptor: Descriptor,
}

/// Fast-Hessian detector parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Minimum determinant response; kept low so grid thinning, not the
    /// threshold, bounds the feature count.
    pub blob_threshold: f64,
    pub octaves: usize,
    pub intervals: usize,
    /// Sampling step of the first octave; doubles per octave.
    pub init_step: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            blob_threshold: 0.0002,
            octaves: 4,
            intervals: 4,
            init_step: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blob_threshold < 0.0 {
            return Err(Error::Config("blob_threshold must be >= 0".into()));
        }
        if self.octaves < 1 {
            return Err(Error::Config("octaves must be >= 1".into()));
        }
        if self.intervals < 3 {
            return Err(Error::Config(
                "intervals must be >= 3 for scale-space maxima".into(),
            ));
        }
        if self.init_step < 1 {
            return Err(Error::Config("init_step must be >= 1".into()));
        }
        Ok(())
    }
}

/// Detect, orient (for the rotated variant) and describe in one pass.
pub fn extract_features(
    ii: &IntegralImage,
    cfg: &DetectorConfig,
    variant: DescriptorVariant,
) -> Result<Vec<Feature>> {
    let points = detect(ii, cfg)?;
    points
        .into_iter()
        .map(|mut point| {
            if !variant.is_upright() {
                point.orientation = assign_orientation(ii, &point);
            }
            let descriptor = describe(ii, &point, variant);
            Ok(Feature { point, descriptor })
        })
        .collect()
}

/// Convenience wrapper: grayscale image in, features out.
pub fn extract_from_image(
    img: &GrayImage,
    cfg: &DetectorConfig,
    variant: DescriptorVariant,
) -> Result<Vec<Feature>> {
    let ii = crate::imaging::build_integral(img);
    extract_features(&ii, cfg, variant)
}
