use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::distance::constrained_match;
use super::{Candidate, OpCounter};
use crate::data::{format_value, quantize, Dataset, TimeSeries};
use crate::error::{Error, Result};

const POOL_MAGIC: &str = "#shapecond-pool v1";

/// A selected candidate with its information gain (bits) and best threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Shapelet {
    pub candidate: Candidate,
    pub score: f64,
    pub threshold: f64,
}

/// The top-k shapelets, best first, with the window used to match them.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeletPool {
    shapelets: Vec<Shapelet>,
    window: usize,
}

impl ShapeletPool {
    pub fn new(shapelets: Vec<Shapelet>, window: usize) -> Self {
        Self { shapelets, window }
    }

    pub fn shapelets(&self) -> &[Shapelet] {
        &self.shapelets
    }

    pub fn len(&self) -> usize {
        self.shapelets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapelets.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    /// Largest channel index referenced plus one.
    pub fn required_channels(&self) -> usize {
        self.shapelets
            .iter()
            .map(|s| s.candidate.channel + 1)
            .max()
            .unwrap_or(0)
    }

    /// The pool as it reads back from its file: every real rounded to 9
    /// significant digits. Source series indices are kept.
    pub fn canonical(&self) -> Self {
        let shapelets = self
            .shapelets
            .iter()
            .map(|s| Shapelet {
                candidate: Candidate {
                    values: s.candidate.values.iter().map(|&v| quantize(v)).collect(),
                    ..s.candidate.clone()
                },
                score: quantize(s.score),
                threshold: quantize(s.threshold),
            })
            .collect();
        Self {
            shapelets,
            window: self.window,
        }
    }

    /// Pool file text; `comments` become `# ` lines after the header.
    pub fn to_text(&self, comments: &[String]) -> String {
        let mut out = format!("{POOL_MAGIC} k={} window={}\n", self.len(), self.window);
        for c in comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        for s in &self.shapelets {
            let c = &s.candidate;
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.channel,
                c.position,
                c.len(),
                format_value(s.threshold),
                format_value(s.score)
            );
            for v in &c.values {
                out.push('\t');
                out.push_str(&format_value(*v));
            }
            out.push('\n');
        }
        out
    }

    /// SHA-256 (hex) of the comment-free pool text.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text(&[]).as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let header = lines
            .next()
            .map(|(_, l)| l)
            .filter(|l| l.starts_with(POOL_MAGIC))
            .ok_or_else(|| Error::Format("missing shapelet-pool header".into()))?;
        let field = |key: &str| -> Result<usize> {
            crate::data::text_lookup(header, key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("pool header lacks `{key}=`")))
        };
        let k = field("k")?;
        let window = field("window")?;

        let mut shapelets = Vec::with_capacity(k);
        for (line_no, line) in lines {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let int = |i: usize| -> Result<usize> {
                fields.get(i).and_then(|f| f.parse().ok()).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("field {i} is not a non-negative integer"),
                })
            };
            let real = |f: &str| -> Result<f64> {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("{f:?} is not a finite number"),
                    })
            };
            let (channel, position, len) = (int(0)?, int(1)?, int(2)?);
            if fields.len() != 5 + len || len == 0 {
                return Err(Error::Format(format!(
                    "line {line_no}: shapelet of length {len} has {} fields",
                    fields.len()
                )));
            }
            let values = fields[5..].iter().map(|f| real(f)).collect::<Result<Vec<_>>>()?;
            shapelets.push(Shapelet {
                candidate: Candidate {
                    series_index: None,
                    channel,
                    position,
                    values,
                },
                threshold: real(fields[3])?,
                score: real(fields[4])?,
            });
        }
        if shapelets.len() != k {
            return Err(Error::Format(format!(
                "pool header declares {k} shapelets but {} were found",
                shapelets.len()
            )));
        }
        Ok(Self { shapelets, window })
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text(comments)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Distances from `x` to every pooled shapelet, in pool order.
pub fn shapelet_transform(x: &TimeSeries, pool: &ShapeletPool, window: usize) -> Result<Vec<f64>> {
    if pool.is_empty() {
        return Err(Error::Shape("shapelet transform needs a non-empty pool".into()));
    }
    let mut counter = OpCounter::new();
    pool.shapelets()
        .iter()
        .map(|s| constrained_match(&s.candidate, x, window, &mut counter).map(|m| m.distance))
        .collect()
}

/// Shapelet features of every series of `d`, using the pool's own window.
pub fn transform_dataset(d: &Dataset, pool: &ShapeletPool) -> Result<Vec<Vec<f64>>> {
    d.series()
        .iter()
        .map(|s| shapelet_transform(s, pool, pool.window()))
        .collect()
}
