//! Grayscale images, integral images and the box/Haar primitives the
//! feature detector is built on.

pub mod pnm;

use crate::error::{Error, Result};

/// 8-bit interleaved RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major `[r, g, b, r, g, b, ...]`, length `3 * width * height`.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != 3 * width * height {
            return Err(Error::Data(format!(
                "rgb buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Grayscale image with luminance values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major luminance, length `width * height`.
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::Data(format!(
                "gray buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// 8-bit samples scaled to `[0, 1]`.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(width, height, data)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Quantize back to 8-bit for PGM dumps.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Summed-area table: entry `(x, y)` holds the sum of all luminance at
/// positions `<= (x, y)`.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    pub width: usize,
    pub height: usize,
    table: Vec<f64>,
}

/// Axis-aligned rectangle in pixel coordinates. `x`/`y` may be negative and
/// `w`/`h` may run past the image; lookups clip to bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Rect {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self { x, y, w, h }
    }
}

/// Rec. 601 luma conversion, normalized so white maps to 1.0.
pub fn to_grayscale(rgb: &RgbImage) -> Result<GrayImage> {
    if rgb.width == 0 || rgb.height == 0 {
        return Err(Error::EmptyImage);
    }
    let data = rgb
        .data
        .chunks_exact(3)
        .map(|px| {
            (0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]))
                / 255.0
        })
        .collect();
    GrayImage::new(rgb.width, rgb.height, data)
}

/// Single-pass summed-area table construction.
pub fn build_integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width, img.height);
    let mut table = vec![0.0; w * h];
    for y in 0..h {
        let mut row_sum = 0.0;
        for x in 0..w {
            row_sum += img.data[y * w + x];
            table[y * w + x] = row_sum + if y > 0 { table[(y - 1) * w + x] } else { 0.0 };
        }
    }
    IntegralImage {
        width: w,
        height: h,
        table,
    }
}

impl IntegralImage {
    /// Cumulative sum at `(x, y)`; zero for negative coordinates, clamped at
    /// the far edges so out-of-bounds rectangles clip instead of failing.
    #[inline]
    fn lookup(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 {
            return 0.0;
        }
        let xi = (x as usize).min(self.width - 1);
        let yi = (y as usize).min(self.height - 1);
        self.table[yi * self.width + xi]
    }

    pub fn total(&self) -> f64 {
        self.table[self.height * self.width - 1]
    }
}

/// Sum of luminance inside `rect` clipped to image bounds; an empty
/// intersection yields 0.
#[inline]
pub fn box_sum(ii: &IntegralImage, rect: Rect) -> f64 {
    if rect.w <= 0 || rect.h <= 0 {
        return 0.0;
    }
    let x0 = rect.x - 1;
    let y0 = rect.y - 1;
    let x1 = rect.x + rect.w - 1;
    let y1 = rect.y + rect.h - 1;
    if x1 < 0 || y1 < 0 || rect.x >= ii.width as i64 || rect.y >= ii.height as i64 {
        return 0.0;
    }
    let a = ii.lookup(x1, y1);
    let b = ii.lookup(x0, y1);
    let c = ii.lookup(x1, y0);
    let d = ii.lookup(x0, y0);
    (a - b - c + d).max(0.0)
}

fn check_haar_size(size: i64) -> Result<i64> {
    if size < 2 || size % 2 != 0 {
        return Err(Error::OddHaarSize);
    }
    Ok(size / 2)
}

/// Horizontal Haar response: right half minus left half of a `size`x`size`
/// window whose right half starts at column `x`.
pub fn haar_x(ii: &IntegralImage, x: i64, y: i64, size: i64) -> Result<f64> {
    let half = check_haar_size(size)?;
    let right = box_sum(ii, Rect::new(x, y - half, half, size));
    let left = box_sum(ii, Rect::new(x - half, y - half, half, size));
    Ok(right - left)
}

/// Vertical Haar response: bottom half minus top half.
pub fn haar_y(ii: &IntegralImage, x: i64, y: i64, size: i64) -> Result<f64> {
    let half = check_haar_size(size)?;
    let bottom = box_sum(ii, Rect::new(x - half, y, size, half));
    let top = box_sum(ii, Rect::new(x - half, y - half, size, half));
    Ok(bottom - top)
}
