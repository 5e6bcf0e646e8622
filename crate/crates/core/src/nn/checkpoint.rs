//! Text checkpoint format for named parameter vectors and scalars.
//!
//! ```text
//! vec-offload-checkpoint 1
//! scalar <name> <value>
//! net <name> <layer count>
//! layer <out> <in>
//! w <out*in row-major values>
//! b <out values>
//! ```
//!
//! Values are written in Rust's shortest round-trip float form, so a save
//! followed by a load reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::params::{Layer, ParamVector};
use crate::error::{Error, Result};

const MAGIC: &str = "vec-offload-checkpoint 1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub scalars: Vec<(String, f64)>,
    pub nets: Vec<(String, ParamVector)>,
}

impl Checkpoint {
    pub fn net(&self, name: &str) -> Result<&ParamVector> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Checkpoint(format!("missing network `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Checkpoint(format!("missing scalar `{name}`")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        for (name, v) in &self.scalars {
            let _ = writeln!(out, "scalar {name} {v:?}");
        }
        for (name, p) in &self.nets {
            let _ = writeln!(out, "net {name} {}", p.layers.len());
            for l in &p.layers {
                let _ = writeln!(out, "layer {} {}", l.out_dim(), l.in_dim());
                out.push('w');
                for v in l.weight.iter() {
                    let _ = write!(out, " {v:?}");
                }
                out.push_str("\nb");
                for v in l.bias.iter() {
                    let _ = write!(out, " {v:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(Error::Checkpoint("missing header".into())),
        }
        let mut ck = Checkpoint::default();
        while let Some((no, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("scalar") => {
                    let name = tok.next().ok_or_else(|| bad(no, "scalar without name"))?;
                    let v: f64 = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(no, "bad scalar value"))?;
                    ck.scalars.push((name.to_string(), v));
                }
                Some("net") => {
                    let name = tok.next().ok_or_else(|| bad(no, "net without name"))?;
                    let count: usize = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad(no, "bad layer count"))?;
                    let mut layers = Vec::with_capacity(count);
                    for _ in 0..count {
                        let (no, header) = lines.next().ok_or_else(|| bad(no, "truncated net"))?;
                        let dims: Vec<usize> = header
                            .strip_prefix("layer ")
                            .ok_or_else(|| bad(no, "expected `layer`"))?
                            .split_whitespace()
                            .map(|s| s.parse().map_err(|_| bad(no, "bad layer shape")))
                            .collect::<Result<_>>()?;
                        if dims.len() != 2 {
                            return Err(bad(no, "layer needs <out> <in>"));
                        }
                        let (out_dim, in_dim) = (dims[0], dims[1]);
                        let w = read_values(lines.next(), 'w', out_dim * in_dim)?;
                        let b = read_values(lines.next(), 'b', out_dim)?;
                        layers.push(Layer {
                            weight: Array2::from_shape_vec((out_dim, in_dim), w)
                                .map_err(|e| Error::Checkpoint(e.to_string()))?,
                            bias: Array1::from_vec(b),
                        });
                    }
                    ck.nets.push((name.to_string(), ParamVector::new(layers)));
                }
                _ => return Err(bad(no, "unexpected record")),
            }
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn read_values(line: Option<(usize, &str)>, tag: char, expected: usize) -> Result<Vec<f64>> {
    let (no, line) = line.ok_or_else(|| Error::Checkpoint("truncated layer".into()))?;
    let mut tok = line.split_whitespace();
    let tag_str = tag.to_string();
    if tok.next() != Some(tag_str.as_str()) {
        return Err(Error::Checkpoint(format!(
            "line {no}: expected `{tag}` record"
        )));
    }
    let vals: Vec<f64> = tok
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Checkpoint(format!("line {no}: {e}")))?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!(
            "line {no}: expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}
