//! One-vs-one model persistence: structured text, 17-significant-digit
//! numerics, per-machine support-vector lists indexing one shared vector
//! block.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BinarySvm, OvoModel};
use crate::error::{Error, Result};

pub const MAGIC: &str = "terraseg-svm v1";

fn vector_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

impl OvoModel {
    pub fn to_text(&self) -> String {
        // Shared vector block: identical support vectors (bit-wise) are
        // stored once.
        let mut block: Vec<&Vec<f64>> = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for (_, svm) in &self.machines {
            for v in &svm.vectors {
                index.entry(vector_key(v)).or_insert_with(|| {
                    block.push(v);
                    block.len() - 1
                });
            }
        }
        let dims = block.first().map_or(0, |v| v.len());

        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        writeln!(out, "gamma {:.16e}", self.gamma).expect("string write");
        writeln!(out, "c {:.16e}", self.c).expect("string write");
        writeln!(out, "classes {}", self.class_count).expect("string write");
        writeln!(out, "class_names {}", self.class_names.join(" ")).expect("string write");
        writeln!(out, "vectors {} {}", block.len(), dims).expect("string write");
        for v in &block {
            let mut line = String::new();
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                write!(line, "{x:.16e}").expect("string write");
            }
            out.push_str(&line);
            out.push('\n');
        }
        for ((a, b), svm) in &self.machines {
            writeln!(
                out,
                "machine {a} {b} {} {:.16e}",
                svm.vectors.len(),
                svm.bias
            )
            .expect("string write");
            for (v, coef) in svm.vectors.iter().zip(&svm.coefficients) {
                let idx = index[&vector_key(v)];
                writeln!(out, "{idx} {coef:.16e}").expect("string write");
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
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| bad(format!("missing {key}")))
        };
        let gamma: f64 = field("gamma")?.parse().map_err(|_| bad("bad gamma".into()))?;
        let c: f64 = field("c")?.parse().map_err(|_| bad("bad c".into()))?;
        let class_count: usize = field("classes")?
            .parse()
            .map_err(|_| bad("bad class count".into()))?;
        let class_names: Vec<String> = field("class_names")?
            .split_whitespace()
            .map(String::from)
            .collect();
        let vectors_header = field("vectors")?;
        let mut header_tokens = vectors_header.split_whitespace();
        let count: usize = header_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad vector count".into()))?;
        let dims: usize = header_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad vector dims".into()))?;

        let mut block = Vec::with_capacity(count);
        for i in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("vector block truncated at {i}")))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad vector value {t:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != dims {
                return Err(bad(format!("vector {i} has {} dims, expected {dims}", v.len())));
            }
            block.push(v);
        }

        let mut machines = Vec::new();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 5 || tokens[0] != "machine" {
                return Err(bad(format!("unexpected line {line:?}")));
            }
            let a: usize = tokens[1].parse().map_err(|_| bad("bad class index".into()))?;
            let b: usize = tokens[2].parse().map_err(|_| bad("bad class index".into()))?;
            let sv_count: usize = tokens[3].parse().map_err(|_| bad("bad sv count".into()))?;
            let bias: f64 = tokens[4].parse().map_err(|_| bad("bad bias".into()))?;
            let mut vectors = Vec::with_capacity(sv_count);
            let mut coefficients = Vec::with_capacity(sv_count);
            for _ in 0..sv_count {
                let line = lines
                    .next()
                    .ok_or_else(|| bad("support vector list truncated".into()))?;
                let (idx, coef) = line
                    .split_once(' ')
                    .ok_or_else(|| bad(format!("bad support vector line {line:?}")))?;
                let idx: usize = idx.parse().map_err(|_| bad("bad vector index".into()))?;
                if idx >= block.len() {
                    return Err(bad(format!("vector index {idx} out of range")));
                }
                vectors.push(block[idx].clone());
                coefficients
                    .push(coef.trim().parse().map_err(|_| bad("bad coefficient".into()))?);
            }
            machines.push((
                (a, b),
                BinarySvm {
                    gamma,
                    c,
                    bias,
                    vectors,
                    coefficients,
                },
            ));
        }
        if machines.len() != class_count * (class_count - 1) / 2 {
            return Err(bad(format!(
                "{} machines for {class_count} classes",
                machines.len()
            )));
        }
        Ok(OvoModel {
            class_count,
            gamma,
            c,
            machines,
            class_names,
        })
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
