//! Time-series datasets, condensed sets, and their text formats.

mod io;
mod preprocess;
mod text;

pub use io::{load_condensed, load_dataset, save_condensed, save_dataset, write_condensed, write_dataset};
pub use preprocess::{oversample_balance, stratified_split, znormalize, znormalize_series};
pub use text::{format_value, quantize};
pub(crate) use text::lookup as text_lookup;

use crate::error::{Error, Result};

/// A multichannel series stored channel-major: `values[c * len + t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    channels: usize,
    len: usize,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("a series needs at least one channel".into()));
        }
        if values.is_empty() || values.len() % channels != 0 {
            return Err(Error::Shape(format!(
                "{} values cannot be split into {channels} equal non-empty channels",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("non-finite value at flat index {pos}")));
        }
        let len = values.len() / channels;
        Ok(Self {
            values,
            channels,
            len,
        })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// A labelled collection of equal-shape series with dense class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    labels: Vec<usize>,
    num_classes: usize,
    channels: usize,
    length: usize,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes and label range. Label names default to
    /// the decimal class id when `label_names` is empty.
    pub fn new(
        series: Vec<TimeSeries>,
        labels: Vec<usize>,
        num_classes: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Empty("dataset has no series".into()));
        }
        if series.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} series but {} labels",
                series.len(),
                labels.len()
            )));
        }
        let channels = series[0].channels();
        let length = series[0].len();
        for (i, s) in series.iter().enumerate() {
            if s.channels() != channels || s.len() != length {
                return Err(Error::Shape(format!(
                    "series {i} has shape {}x{}, expected {channels}x{length}",
                    s.channels(),
                    s.len()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Invariant(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let label_names = if label_names.is_empty() {
            (0..num_classes).map(|v| v.to_string()).collect()
        } else {
            label_names
        };
        if label_names.len() != num_classes {
            return Err(Error::Invariant(format!(
                "{} label names for {num_classes} classes",
                label_names.len()
            )));
        }
        Ok(Self {
            series,
            labels,
            num_classes,
            channels,
            length,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TimeSeries, usize)> {
        self.series.iter().zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Indices of the members of each class, in dataset order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }

    /// Sub-dataset made of the given item indices (label space unchanged).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.series[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.num_classes,
            self.label_names.clone(),
        )
    }

    /// Re-expresses the labels in the id space of `names` (matched by label
    /// string). Fails if a label of `self` is unknown to `names`.
    pub fn align_labels(&self, names: &[String]) -> Result<Self> {
        let mut remap = Vec::with_capacity(self.num_classes);
        for name in &self.label_names {
            let id = names.iter().position(|n| n == name).ok_or_else(|| {
                Error::Invariant(format!("label {name:?} is not part of the reference label set"))
            })?;
            remap.push(id);
        }
        Self::new(
            self.series.clone(),
            self.labels.iter().map(|&y| remap[y]).collect(),
            names.len(),
            names.to_vec(),
        )
    }

    pub(crate) fn map_series(&self, f: impl Fn(&TimeSeries) -> TimeSeries) -> Self {
        Self {
            series: self.series.iter().map(f).collect(),
            ..self.clone()
        }
    }
}

/// One synthetic sample with its class-probability label.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedItem {
    pub series: TimeSeries,
    pub soft_label: Vec<f64>,
}

impl CondensedItem {
    /// Index of the largest probability; ties resolve to the lowest class id.
    pub fn hard_label(&self) -> usize {
        argmax(&self.soft_label)
    }
}

/// The condensed training set: synthetic series with soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedSet {
    pub items: Vec<CondensedItem>,
    pub spc: usize,
    pub num_classes: usize,
    pub channels: usize,
    pub length: usize,
    pub label_names: Vec<String>,
}

/// Tolerance on `Σ soft_label = 1`.
pub const SOFT_LABEL_TOLERANCE: f64 = 1e-6;

impl CondensedSet {
    pub fn empty(num_classes: usize, channels: usize, length: usize) -> Self {
        Self {
            items: Vec::new(),
            spc: 0,
            num_classes,
            channels,
            length,
            label_names: (0..num_classes).map(|v| v.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        self.items.iter().map(CondensedItem::hard_label).collect()
    }

    /// Checks shapes and that every soft label is a probability vector.
    pub fn validate(&self) -> Result<()> {
        for (i, item) in self.items.iter().enumerate() {
            if item.series.channels() != self.channels || item.series.len() != self.length {
                return Err(Error::Shape(format!("condensed item {i} has the wrong shape")));
            }
            if item.soft_label.len() != self.num_classes {
                return Err(Error::Shape(format!(
                    "condensed item {i} has {} label entries, expected {}",
                    item.soft_label.len(),
                    self.num_classes
                )));
            }
            check_probability_vector(&item.soft_label)
                .map_err(|msg| Error::Invariant(format!("soft label of item {i}: {msg}")))?;
        }
        Ok(())
    }

    /// Views the condensed samples as a hard-labelled dataset (argmax labels).
    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.items.iter().map(|it| it.series.clone()).collect(),
            self.hard_labels(),
            self.num_classes,
            self.label_names.clone(),
        )
    }
}

fn check_probability_vector(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("entry {v} is not a probability"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SOFT_LABEL_TOLERANCE {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn one_hot(class: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    v
}
