//! Binary netpbm I/O: 8-bit PGM (P5) and PPM (P6).

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{GrayImage, RgbImage};
use crate::error::{Error, Result};

enum PnmKind {
    Gray,
    Rgb,
}

struct PnmHeader {
    kind: PnmKind,
    width: usize,
    height: usize,
    data_offset: usize,
}

/// Parse the ASCII header of a P5/P6 file. Whitespace-separated tokens with
/// `#` comments, terminated by a single whitespace byte before the raster.
fn parse_header(path: &Path, bytes: &[u8]) -> Result<PnmHeader> {
    let err = |m: &str| Error::format(path, m);
    if bytes.len() < 2 {
        return Err(err("truncated header"));
    }
    let kind = match &bytes[..2] {
        b"P5" => PnmKind::Gray,
        b"P6" => PnmKind::Rgb,
        _ => return Err(err("expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comment lines.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(err("truncated header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(err("expected integer header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text
            .parse()
            .map_err(|_| err("header field out of range"))?;
    }
    if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(err("missing whitespace after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    if maxval == 0 || maxval > 255 {
        return Err(err("only 8-bit images are supported"));
    }
    Ok(PnmHeader {
        kind,
        width,
        height,
        data_offset: pos,
    })
}

/// Read a P5 (grayscale) or P6 (color) file; P6 input is converted with
/// [`super::to_grayscale`].
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    let raster = &bytes[header.data_offset..];
    match header.kind {
        PnmKind::Gray => {
            let need = header.width * header.height;
            if raster.len() < need {
                return Err(Error::format(path, "truncated raster"));
            }
            GrayImage::from_bytes(header.width, header.height, &raster[..need])
        }
        PnmKind::Rgb => {
            let need = 3 * header.width * header.height;
            if raster.len() < need {
                return Err(Error::format(path, "truncated raster"));
            }
            let rgb = RgbImage::new(header.width, header.height, raster[..need].to_vec())?;
            super::to_grayscale(&rgb)
        }
    }
}

/// Read a P6 file as color; P5 input is expanded to gray RGB.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    let raster = &bytes[header.data_offset..];
    match header.kind {
        PnmKind::Rgb => {
            let need = 3 * header.width * header.height;
            if raster.len() < need {
                return Err(Error::format(path, "truncated raster"));
            }
            RgbImage::new(header.width, header.height, raster[..need].to_vec())
        }
        PnmKind::Gray => {
            let need = header.width * header.height;
            if raster.len() < need {
                return Err(Error::format(path, "truncated raster"));
            }
            let mut data = Vec::with_capacity(3 * need);
            for &b in &raster[..need] {
                data.extend_from_slice(&[b, b, b]);
            }
            RgbImage::new(header.width, header.height, data)
        }
    }
}

/// Read raw P5 bytes without scaling; used for label masks where pixel
/// values are class indices.
pub fn read_pgm_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(path, &bytes)?;
    if !matches!(header.kind, PnmKind::Gray) {
        return Err(Error::format(path, "expected P5 mask"));
    }
    let need = header.width * header.height;
    let raster = &bytes[header.data_offset..];
    if raster.len() < need {
        return Err(Error::format(path, "truncated raster"));
    }
    Ok((header.width, header.height, raster[..need].to_vec()))
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let path = path.as_ref();
    debug_assert_eq!(data.len(), width * height);
    let mut out = Vec::with_capacity(data.len() + 32);
    write!(out, "P5\n{} {}\n255\n", width, height).expect("vec write");
    out.extend_from_slice(data);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    write_pgm(path, img.width, img.height, &img.to_bytes())
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(img.data.len() + 32);
    write!(out, "P6\n{} {}\n255\n", img.width, img.height).expect("vec write");
    out.extend_from_slice(&img.data);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
