use std::ops::AddAssign;

/// Exact integer tallies of the work done by a discovery run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Candidate-versus-series distance evaluations.
    pub distance_evals: u64,
    /// Alignment positions compared across all evaluations.
    pub alignment_ops: u64,
    pub candidates_generated: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.distance_evals += rhs.distance_evals;
        self.alignment_ops += rhs.alignment_ops;
        self.candidates_generated += rhs.candidates_generated;
    }
}

impl std::iter::Sum for OpCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, c| {
            acc += c;
            acc
        })
    }
}
