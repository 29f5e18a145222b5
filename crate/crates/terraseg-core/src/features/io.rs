//! Feature-set CSV: the interchange format between extract, preprocess,
//! train and evaluate.
//!
//! Header `x,y,scale,strength,orientation,label,d0,...,d{p-1}`, one feature
//! per row, label -1 when unlabeled, floats printed with 9 significant
//! digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Descriptor, DescriptorVariant, Feature, InterestPoint};
use crate::error::{Error, Result};

fn push_float(out: &mut String, v: f64) {
    write!(out, "{v:.8e}").expect("string write");
}

/// Serialize features (and optional class labels) to CSV text.
pub fn to_csv(features: &[Feature], labels: Option<&[usize]>) -> String {
    let dims = features.first().map_or(0, |f| f.descriptor.values.len());
    let mut out = String::new();
    out.push_str("x,y,scale,strength,orientation,label");
    for d in 0..dims {
        write!(out, ",d{d}").expect("string write");
    }
    out.push('\n');
    for (i, f) in features.iter().enumerate() {
        push_float(&mut out, f.point.x);
        out.push(',');
        push_float(&mut out, f.point.y);
        out.push(',');
        push_float(&mut out, f.point.scale);
        out.push(',');
        push_float(&mut out, f.point.strength);
        out.push(',');
        push_float(&mut out, f.point.orientation);
        let label = labels.map_or(-1, |l| l[i] as i64);
        write!(out, ",{label}").expect("string write");
        for v in &f.descriptor.values {
            out.push(',');
            push_float(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, features: &[Feature], labels: Option<&[usize]>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(features, labels)).map_err(|e| Error::io(path, e))
}

fn parse_header(text: &str, origin: &Path) -> Result<usize> {
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::format(origin, "empty feature file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 6 || columns[..6] != ["x", "y", "scale", "strength", "orientation", "label"]
    {
        return Err(Error::format(origin, "unrecognized feature CSV header"));
    }
    Ok(columns.len() - 6)
}

/// Parse feature CSV text. Labels come back as -1 for unlabeled rows.
/// When `variant` is given the descriptor width must match it; otherwise the
/// variant is inferred from the width (64 -> usurf64, 36 -> usurf36,
/// 32 -> usurf32).
pub fn from_csv(
    text: &str,
    variant: Option<DescriptorVariant>,
    origin: &Path,
) -> Result<(Vec<Feature>, Vec<i64>)> {
    let dims = parse_header(text, origin)?;
    let variant = match variant {
        Some(v) => {
            if v.dims() != dims {
                return Err(Error::format(
                    origin,
                    format!("descriptor width {dims} does not match variant {v}"),
                ));
            }
            v
        }
        None => match dims {
            64 => DescriptorVariant::USurf64,
            36 => DescriptorVariant::USurf36,
            32 => DescriptorVariant::USurf32,
            other => {
                return Err(Error::format(
                    origin,
                    format!("cannot infer descriptor variant from width {other}"),
                ))
            }
        },
    };
    parse_rows(text, dims, variant, origin)
}

fn parse_rows(
    text: &str,
    dims: usize,
    variant: DescriptorVariant,
    origin: &Path,
) -> Result<(Vec<Feature>, Vec<i64>)> {
    let mut lines = text.lines().enumerate();
    lines.next(); // header

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_f64 = |name: &str| -> Result<f64> {
            fields
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| {
                    Error::format(origin, format!("line {}: bad {name}", lineno + 1))
                })
        };
        let x = next_f64("x")?;
        let y = next_f64("y")?;
        let scale = next_f64("scale")?;
        let strength = next_f64("strength")?;
        let orientation = next_f64("orientation")?;
        let label: i64 = fields
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::format(origin, format!("line {}: bad label", lineno + 1)))?;
        let values: Vec<f64> = fields
            .map(|t| {
                t.parse().map_err(|_| {
                    Error::format(origin, format!("line {}: bad descriptor value", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dims {
            return Err(Error::format(
                origin,
                format!("line {}: expected {dims} descriptor values", lineno + 1),
            ));
        }
        features.push(Feature {
            point: InterestPoint {
                x,
                y,
                scale,
                strength,
                orientation,
            },
            descriptor: Descriptor {
                variant,
                values,
            },
        });
        labels.push(label);
    }
    Ok((features, labels))
}

pub fn read_csv(
    path: impl AsRef<Path>,
    variant: Option<DescriptorVariant>,
) -> Result<(Vec<Feature>, Vec<i64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv(&text, variant, path)
}

/// Parse with a caller-supplied variant tag and no width check; model files
/// record their variant explicitly, so the tag wins over inference.
pub fn read_csv_tagged(
    path: impl AsRef<Path>,
    variant: DescriptorVariant,
) -> Result<(Vec<Feature>, Vec<i64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dims = parse_header(&text, path)?;
    parse_rows(&text, dims, variant, path)
}
