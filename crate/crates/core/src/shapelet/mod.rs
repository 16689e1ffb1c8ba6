//! Shapelet discovery: pruned candidate enumeration, position-constrained
//! distances, information-gain scoring and the shapelet transform.
//!
//! A full-scan reference pipeline ([`discover_full_scan`]) lives next to the
//! fast one so the two can be compared candidate by candidate.

mod counter;
mod discover;
mod distance;
mod gain;
mod pool;

pub use counter::OpCounter;
pub use discover::{discover, discover_full_scan, enumerate_candidates, retained_series, DiscoveryConfig};
pub use distance::{
    constrained_distance, constrained_match, euclidean, full_distance, full_match, Match,
};
pub(crate) use distance::window_match;
pub use gain::{entropy, information_gain};
pub use pool::{shapelet_transform, transform_dataset, Shapelet, ShapeletPool};

/// A contiguous single-channel subsequence of a source series.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index of the source series in the dataset it was drawn from; `None`
    /// for shapelets read back from a pool file.
    pub series_index: Option<usize>,
    pub channel: usize,
    /// Start position `j` in the source series.
    pub position: usize,
    pub values: Vec<f64>,
}

impl Candidate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Deterministic ordering key used to break score ties.
    pub fn order_key(&self) -> (Option<usize>, usize, usize, usize) {
        (self.series_index, self.channel, self.position, self.values.len())
    }
}
