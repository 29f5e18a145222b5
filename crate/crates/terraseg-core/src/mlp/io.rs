//! Model persistence: structured text with 17-significant-digit weights so
//! files round-trip exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MlpModel, ModelMeta};
use crate::error::{Error, Result};

pub const MAGIC: &str = "terraseg-mlp v1";

impl MlpModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str("structure");
        for n in &self.structure {
            write!(out, " {n}").expect("string write");
        }
        out.push('\n');
        writeln!(out, "algorithm {}", if self.meta.algorithm.is_empty() { "none" } else { &self.meta.algorithm })
            .expect("string write");
        writeln!(out, "seed {}", self.meta.seed).expect("string write");
        writeln!(out, "epochs {}", self.meta.epochs).expect("string write");
        for (l, layer) in self.weights.iter().enumerate() {
            let rows = self.structure[l + 1];
            let cols = self.structure[l] + 1;
            writeln!(out, "layer {l} {rows} {cols}").expect("string write");
            for row in 0..rows {
                let mut line = String::new();
                for col in 0..cols {
                    if col > 0 {
                        line.push(' ');
                    }
                    write!(line, "{:.16e}", layer[row * cols + col]).expect("string write");
                }
                out.push_str(&line);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(origin, m);
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad(format!("expected {MAGIC:?} header")));
        }
        let structure_line = lines.next().ok_or_else(|| bad("missing structure".into()))?;
        let mut tokens = structure_line.split_whitespace();
        if tokens.next() != Some("structure") {
            return Err(bad("missing structure".into()));
        }
        let structure: Vec<usize> = tokens
            .map(|t| t.parse().map_err(|_| bad(format!("bad layer size {t:?}"))))
            .collect::<Result<_>>()?;
        let mut model = MlpModel::zeroed(&structure)
            .map_err(|_| bad(format!("invalid structure {structure:?}")))?;

        let mut meta = ModelMeta::default();
        for key in ["algorithm", "seed", "epochs"] {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            let value = line
                .strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| bad(format!("missing {key}")))?;
            match key {
                "algorithm" => meta.algorithm = if value == "none" { String::new() } else { value.to_string() },
                "seed" => meta.seed = value.parse().map_err(|_| bad("bad seed".into()))?,
                _ => meta.epochs = value.parse().map_err(|_| bad("bad epochs".into()))?,
            }
        }
        model.meta = meta;

        for l in 0..structure.len() - 1 {
            let header = lines.next().ok_or_else(|| bad(format!("missing layer {l}")))?;
            let rows = structure[l + 1];
            let cols = structure[l] + 1;
            let expected = format!("layer {l} {rows} {cols}");
            if header != expected {
                return Err(bad(format!("expected {expected:?}, got {header:?}")));
            }
            for row in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| bad(format!("layer {l} truncated at row {row}")))?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| bad(format!("bad weight {t:?}"))))
                    .collect::<Result<_>>()?;
                if values.len() != cols {
                    return Err(bad(format!(
                        "layer {l} row {row}: expected {cols} weights, got {}",
                        values.len()
                    )));
                }
                model.weights[l][row * cols..(row + 1) * cols].copy_from_slice(&values);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trips_exactly() {
        let mut model = MlpModel::random(&[4, 6, 6, 3], 77).unwrap();
        model.meta = ModelMeta {
            algorithm: "rprop".into(),
            seed: 77,
            epochs: 123,
        };
        let text = model.to_text();
        let back = MlpModel::from_text(&text, Path::new("mem")).unwrap();
        // 17 significant digits reproduce every f64 bit-exactly.
        assert_eq!(model, back);
    }

    #[test]
    fn corrupted_header_is_rejected() {
        assert!(MlpModel::from_text("bogus\n", Path::new("mem")).is_err());
    }
}
