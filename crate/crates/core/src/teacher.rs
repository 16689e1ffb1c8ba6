//! The shapelet-augmented teacher and its checkpoint format.
//!
//! A checkpoint is a text manifest followed by a little-endian `f64` blob:
//!
//! ```text
//! #shapecond-teacher v1
//! arch depth=3 width=32 kernel=5 norm=batch act=relu pool=max
//! shape channels=1 length=128 classes=2
//! labels	a	b
//! pool_path pool.txt
//! pool_hash <sha256 of the pool text>
//! param <name> <d0,d1,...> <byte offset>
//! # free-form comments
//! end_manifest <blob bytes>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{text_lookup, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Arch, Network, Norm, Pooling};
use crate::shapelet::ShapeletPool;
use crate::tensor::Activation;
use crate::train::{fit, Labels, TrainConfig, TrainLog};

const MAGIC: &str = "#shapecond-teacher v1";
const END: &str = "end_manifest";

/// A trained network with a shapelet branch, plus what is needed to find its
/// pool again.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherModel {
    pub net: Network,
    pub length: usize,
    pub label_names: Vec<String>,
    /// Where the pool was read from; written into checkpoints.
    pub pool_path: String,
}

impl TeacherModel {
    pub fn pool(&self) -> &ShapeletPool {
        self.net.pool().expect("a teacher always has a shapelet branch")
    }

    pub fn pool_hash(&self) -> String {
        self.pool().content_hash()
    }
}

/// Trains a teacher on `d`. The pool is canonicalized first so that a saved
/// and reloaded teacher computes bit-identical features.
pub fn train_teacher(
    d: &Dataset,
    pool: &ShapeletPool,
    pool_path: &str,
    cfg: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<(TeacherModel, TrainLog)> {
    if d.is_empty() {
        return Err(Error::Empty("teacher training set is empty".into()));
    }
    let mut net = Network::new(Arch::default(), d.channels(), d.num_classes(), Some(pool.canonical()), cfg.seed)?;
    let log = fit(&mut net, d.series(), Labels::Hard(d.labels()), cfg, validation)?;
    Ok((
        TeacherModel {
            net,
            length: d.length(),
            label_names: d.label_names().to_vec(),
            pool_path: pool_path.to_string(),
        },
        log,
    ))
}

fn tensors(m: &TeacherModel) -> Vec<(String, Vec<usize>, &[f64])> {
    let mut out: Vec<(String, Vec<usize>, &[f64])> = m
        .net
        .parameters()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec(), t.data()))
        .collect();
    out.extend(m.net.buffers().into_iter().map(|(n, v)| (n, vec![v.len()], v)));
    out
}

/// Serializes a teacher; `comments` are embedded as `#` lines.
pub fn encode_teacher(m: &TeacherModel, comments: &[String]) -> Vec<u8> {
    let a = m.net.arch();
    let mut head = String::new();
    let _ = writeln!(head, "{MAGIC}");
    let _ = writeln!(
        head,
        "arch depth={} width={} kernel={} norm={} act={} pool={}",
        a.depth,
        a.width,
        a.kernel,
        a.norm.name(),
        a.activation.name(),
        a.pooling.name()
    );
    let _ = writeln!(
        head,
        "shape channels={} length={} classes={}",
        m.net.in_channels(),
        m.length,
        m.net.num_classes()
    );
    let _ = writeln!(head, "labels\t{}", m.label_names.join("\t"));
    let _ = writeln!(head, "pool_path {}", m.pool_path);
    let _ = writeln!(head, "pool_hash {}", m.pool_hash());
    let mut blob = Vec::new();
    for (name, shape, data) in tensors(m) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        let _ = writeln!(head, "param {name} {} {}", dims.join(","), blob.len());
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(head, "# {line}");
        }
    }
    let _ = writeln!(head, "{END} {}", blob.len());
    let mut out = head.into_bytes();
    out.extend(blob);
    out
}

pub fn save_teacher(m: &TeacherModel, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_teacher(m, comments)).map_err(|e| Error::io(path, e))
}

struct Manifest {
    arch: Arch,
    channels: usize,
    length: usize,
    classes: usize,
    labels: Vec<String>,
    pool_path: String,
    pool_hash: String,
    params: Vec<(String, Vec<usize>, usize)>,
    blob_len: usize,
}

fn parse_manifest(text: &str) -> Result<Manifest> {
    let bad = |what: &str| Error::Format(format!("teacher checkpoint: {what}"));
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header"));
    }
    let (mut arch, mut shape, mut labels, mut pool_path, mut pool_hash) = (None, None, None, None, None);
    let mut params = Vec::new();
    let mut blob_len = None;
    for line in lines {
        if line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once([' ', '\t']).unwrap_or((line, ""));
        match key {
            "arch" => {
                let get = |k| text_lookup(rest, k).ok_or_else(|| bad("incomplete arch line"));
                let num = |k| get(k)?.parse::<usize>().map_err(|_| bad("bad arch number"));
                arch = Some(Arch {
                    depth: num("depth")?,
                    width: num("width")?,
                    kernel: num("kernel")?,
                    norm: Norm::parse(get("norm")?).ok_or_else(|| bad("unknown norm"))?,
                    activation: Activation::parse(get("act")?).ok_or_else(|| bad("unknown activation"))?,
                    pooling: Pooling::parse(get("pool")?).ok_or_else(|| bad("unknown pooling"))?,
                });
            }
            "shape" => {
                let num = |k| {
                    text_lookup(rest, k)
                        .and_then(|v| v.parse::<usize>().ok())
                        .ok_or_else(|| bad("incomplete shape line"))
                };
                shape = Some((num("channels")?, num("length")?, num("classes")?));
            }
            "labels" => labels = Some(rest.split('\t').map(str::to_string).collect::<Vec<_>>()),
            "pool_path" => pool_path = Some(rest.to_string()),
            "pool_hash" => pool_hash = Some(rest.trim().to_string()),
            "param" => {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 3 {
                    return Err(bad("malformed param line"));
                }
                let dims = f[1]
                    .split(',')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("bad parameter shape"))?;
                let offset = f[2].parse().map_err(|_| bad("bad parameter offset"))?;
                params.push((f[0].to_string(), dims, offset));
            }
            END => {
                blob_len = Some(rest.trim().parse().map_err(|_| bad("bad blob length"))?);
                break;
            }
            _ => return Err(bad(&format!("unexpected manifest line {line:?}"))),
        }
    }
    let (channels, length, classes) = shape.ok_or_else(|| bad("missing shape line"))?;
    Ok(Manifest {
        arch: arch.ok_or_else(|| bad("missing arch line"))?,
        channels,
        length,
        classes,
        labels: labels.ok_or_else(|| bad("missing labels line"))?,
        pool_path: pool_path.ok_or_else(|| bad("missing pool path"))?,
        pool_hash: pool_hash.ok_or_else(|| bad("missing pool hash"))?,
        params,
        blob_len: blob_len.ok_or_else(|| bad("truncated manifest"))?,
    })
}

fn split_checkpoint(bytes: &[u8]) -> Result<(Manifest, &[u8])> {
    let truncated = || Error::Format("teacher checkpoint: truncated manifest".into());
    let marker = format!("\n{END} ");
    let at = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(truncated)?;
    let nl = bytes[at + 1..].iter().position(|&b| b == b'\n').ok_or_else(truncated)?;
    let split = at + 1 + nl + 1;
    let text = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::Format("teacher checkpoint: manifest is not UTF-8".into()))?;
    Ok((parse_manifest(text)?, &bytes[split..]))
}

/// Rebuilds a teacher from checkpoint bytes and its pool. The pool's content
/// hash must match the one recorded at save time.
pub fn decode_teacher(bytes: &[u8], pool: ShapeletPool) -> Result<TeacherModel> {
    let (m, blob) = split_checkpoint(bytes)?;
    if blob.len() != m.blob_len {
        return Err(Error::Format(format!(
            "teacher checkpoint: expected {} parameter bytes, found {}",
            m.blob_len,
            blob.len()
        )));
    }
    let hash = pool.content_hash();
    if hash != m.pool_hash {
        return Err(Error::Integrity(format!(
            "pool hash {hash} does not match the checkpoint's {}",
            m.pool_hash
        )));
    }

    let mut net = Network::new(m.arch, m.channels, m.classes, Some(pool), 0)?;
    let read = |name: &str, numel: usize| -> Result<Vec<f64>> {
        let (_, shape, offset) = m
            .params
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| Error::Format(format!("teacher checkpoint: missing tensor {name}")))?;
        if shape.iter().product::<usize>() != numel {
            return Err(Error::Format(format!("teacher checkpoint: tensor {name} has the wrong size")));
        }
        let end = offset + 8 * numel;
        let raw = blob
            .get(*offset..end)
            .ok_or_else(|| Error::Format(format!("teacher checkpoint: tensor {name} is out of range")))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let names: Vec<(String, usize)> = net.parameters().into_iter().map(|(n, t)| (n, t.numel())).collect();
    for ((name, numel), p) in names.iter().zip(net.parameters_mut()) {
        p.data_mut().copy_from_slice(&read(name, *numel)?);
    }
    let buffer_names: Vec<(String, usize)> = net.buffers().into_iter().map(|(n, v)| (n, v.len())).collect();
    for ((name, numel), b) in buffer_names.iter().zip(net.buffers_mut()) {
        b.copy_from_slice(&read(name, *numel)?);
    }
    Ok(TeacherModel {
        net,
        length: m.length,
        label_names: m.labels,
        pool_path: m.pool_path,
    })
}

/// Loads a checkpoint. The pool comes from `pool_override` when given,
/// otherwise from the recorded path (tried as-is, then relative to the
/// checkpoint's directory).
pub fn load_teacher(path: impl AsRef<Path>, pool_override: Option<&Path>) -> Result<TeacherModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pool_file: PathBuf = match pool_override {
        Some(p) => p.to_path_buf(),
        None => {
            let recorded = split_checkpoint(&bytes)?.0.pool_path;
            let direct = PathBuf::from(&recorded);
            if direct.exists() || direct.is_absolute() {
                direct
            } else {
                path.parent().unwrap_or(Path::new(".")).join(recorded)
            }
        }
    };
    let pool = ShapeletPool::load(&pool_file)?;
    decode_teacher(&bytes, pool)
}
